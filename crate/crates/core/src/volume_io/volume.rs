//! Voxel volumes with physical geometry.
//!
//! A [`Grid`] maps voxel indices to world coordinates in millimetres via
//! `world = origin + R * diag(spacing) * index`, where the columns of `R` are
//! the unit axis directions. Voxel data is stored flat, x fastest.

use thiserror::Error;

/// Errors raised when constructing or validating volumes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("dims must all be >= 1, got {0:?}")]
    BadDims([usize; 3]),
    #[error("spacing must all be > 0, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("orientation matrix is not orthonormal within 1e-4")]
    NotOrthonormal,
    #[error("data length {got} does not match dims product {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("voxel {index} carries label code {code}, which is not a permitted label")]
    InvalidLabel { index: usize, code: i64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

/// Storage type of voxel values, matching the supported NIfTI datatypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    U8,
    I16,
    U16,
    F32,
}

impl ElementKind {
    pub fn nifti_datatype(self) -> i16 {
        match self {
            ElementKind::U8 => 2,
            ElementKind::I16 => 4,
            ElementKind::F32 => 16,
            ElementKind::U16 => 512,
        }
    }

    pub fn from_nifti_datatype(code: i16) -> Option<Self> {
        match code {
            2 => Some(ElementKind::U8),
            4 => Some(ElementKind::I16),
            16 => Some(ElementKind::F32),
            512 => Some(ElementKind::U16),
            _ => None,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            ElementKind::U8 => 1,
            ElementKind::I16 | ElementKind::U16 => 2,
            ElementKind::F32 => 4,
        }
    }
}

/// Scalar types that can be stored in a [`Volume`].
pub trait Voxel: Copy + Default + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    const KIND: ElementKind;
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Voxel for u8 {
    const KIND: ElementKind = ElementKind::U8;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, u8::MAX as f64) as u8
    }
}

impl Voxel for i16 {
    const KIND: ElementKind = ElementKind::I16;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
    }
}

impl Voxel for u16 {
    const KIND: ElementKind = ElementKind::U16;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, u16::MAX as f64) as u16
    }
}

impl Voxel for f32 {
    const KIND: ElementKind = ElementKind::F32;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

pub type Vec3 = [f64; 3];

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Voxel lattice geometry shared by all volumes derived from one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: Vec3,
    pub origin: Vec3,
    /// Row-major 3x3 matrix; column `k` is the world direction of index axis `k`.
    pub direction: [[f64; 3]; 3],
}

impl Grid {
    /// Axis-aligned grid at the world origin.
    pub fn new(dims: [usize; 3], spacing: Vec3) -> Self {
        Grid {
            dims,
            spacing,
            origin: [0.0; 3],
            direction: IDENTITY,
        }
    }

    pub fn with_origin(mut self, origin: Vec3) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_direction(mut self, direction: [[f64; 3]; 3]) -> Self {
        self.direction = direction;
        self
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        if self.dims.contains(&0) {
            return Err(VolumeError::BadDims(self.dims));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeError::BadSpacing(self.spacing));
        }
        if !is_orthonormal(&self.direction, 1e-4) {
            return Err(VolumeError::NotOrthonormal);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let y = (index / self.dims[0]) % self.dims[1];
        let z = index / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Linear index of a signed coordinate, or `None` when out of bounds.
    #[inline]
    pub fn checked_index(&self, c: [i64; 3]) -> Option<usize> {
        if c.iter().zip(self.dims.iter()).all(|(&v, &d)| v >= 0 && (v as usize) < d) {
            Some(self.index(c[0] as usize, c[1] as usize, c[2] as usize))
        } else {
            None
        }
    }

    /// World position (mm) of a continuous index.
    pub fn world(&self, ijk: Vec3) -> Vec3 {
        let scaled = [
            ijk[0] * self.spacing[0],
            ijk[1] * self.spacing[1],
            ijk[2] * self.spacing[2],
        ];
        let mut out = self.origin;
        for (r, o) in out.iter_mut().enumerate() {
            *o += (0..3).map(|c| self.direction[r][c] * scaled[c]).sum::<f64>();
        }
        out
    }

    pub fn world_of_index(&self, index: usize) -> Vec3 {
        let c = self.coords(index);
        self.world([c[0] as f64, c[1] as f64, c[2] as f64])
    }

    /// Continuous index of a world position (inverse of [`Grid::world`]).
    pub fn continuous_index(&self, world: Vec3) -> Vec3 {
        let d = [
            world[0] - self.origin[0],
            world[1] - self.origin[1],
            world[2] - self.origin[2],
        ];
        // R is orthonormal, so R^-1 = R^T.
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let proj: f64 = (0..3).map(|r| self.direction[r][c] * d[r]).sum();
            *o = proj / self.spacing[c];
        }
        out
    }

    /// Voxel whose centre is nearest to `world`, if inside the grid.
    pub fn nearest_voxel(&self, world: Vec3) -> Option<usize> {
        let ci = self.continuous_index(world);
        self.checked_index([
            (ci[0] + 0.5).floor() as i64,
            (ci[1] + 0.5).floor() as i64,
            (ci[2] + 0.5).floor() as i64,
        ])
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Length of a diagonal step across one voxel (mm).
    pub fn voxel_diagonal(&self) -> f64 {
        self.spacing.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// True when both grids describe the same lattice within `tol` mm.
    pub fn same_lattice(&self, other: &Grid, tol: f64) -> bool {
        self.dims == other.dims
            && close3(&self.spacing, &other.spacing, tol)
            && close3(&self.origin, &other.origin, tol)
            && (0..3).all(|r| close3(&self.direction[r], &other.direction[r], tol))
    }

    pub fn ensure_same_lattice(&self, other: &Grid) -> Result<(), VolumeError> {
        if self.same_lattice(other, 1e-4) {
            Ok(())
        } else {
            Err(VolumeError::GridMismatch(format!(
                "dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

fn close3(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub(crate) fn is_orthonormal(m: &[[f64; 3]; 3], tol: f64) -> bool {
    for a in 0..3 {
        for b in 0..3 {
            let dot: f64 = (0..3).map(|r| m[r][a] * m[r][b]).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            if (dot - want).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// A typed voxel array on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    grid: Grid,
    data: Vec<T>,
}

impl<T: Voxel> Volume<T> {
    pub fn new(grid: Grid, data: Vec<T>) -> Result<Self, VolumeError> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(VolumeError::DataLength {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Volume { grid, data })
    }

    /// Volume of `grid` with every voxel set to `value`.
    ///
    /// Panics if the grid is invalid.
    pub fn filled(grid: Grid, value: T) -> Self {
        grid.validate().expect("invalid grid");
        let n = grid.len();
        Volume {
            grid,
            data: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn kind(&self) -> ElementKind {
        T::KIND
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.grid.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.grid.index(x, y, z);
        self.data[i] = v;
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same geometry, new data.
    pub fn with_data<U: Voxel>(&self, data: Vec<U>) -> Result<Volume<U>, VolumeError> {
        Volume::new(self.grid.clone(), data)
    }
}

impl Volume<u8> {
    /// Binary volume: 1 where `self` is nonzero.
    pub fn binarized(&self) -> Volume<u8> {
        self.map(|v| u8::from(v != 0))
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// A volume of any supported element kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    U8(Volume<u8>),
    I16(Volume<i16>),
    U16(Volume<u16>),
    F32(Volume<f32>),
}

impl AnyVolume {
    pub fn grid(&self) -> &Grid {
        match self {
            AnyVolume::U8(v) => v.grid(),
            AnyVolume::I16(v) => v.grid(),
            AnyVolume::U16(v) => v.grid(),
            AnyVolume::F32(v) => v.grid(),
        }
    }

    pub fn kind(&self) -> ElementKind {
        match self {
            AnyVolume::U8(_) => ElementKind::U8,
            AnyVolume::I16(_) => ElementKind::I16,
            AnyVolume::U16(_) => ElementKind::U16,
            AnyVolume::F32(_) => ElementKind::F32,
        }
    }

    /// Values rounded to integers, for label volumes stored in wider types.
    pub fn to_rounded_i64(&self) -> Vec<i64> {
        match self {
            AnyVolume::U8(v) => v.data().iter().map(|&x| x as i64).collect(),
            AnyVolume::I16(v) => v.data().iter().map(|&x| x as i64).collect(),
            AnyVolume::U16(v) => v.data().iter().map(|&x| x as i64).collect(),
            AnyVolume::F32(v) => v.data().iter().map(|&x| x.round() as i64).collect(),
        }
    }
}

impl From<Volume<u8>> for AnyVolume {
    fn from(v: Volume<u8>) -> Self {
        AnyVolume::U8(v)
    }
}

impl From<Volume<i16>> for AnyVolume {
    fn from(v: Volume<i16>) -> Self {
        AnyVolume::I16(v)
    }
}

impl From<Volume<u16>> for AnyVolume {
    fn from(v: Volume<u16>) -> Self {
        AnyVolume::U16(v)
    }
}

impl From<Volume<f32>> for AnyVolume {
    fn from(v: Volume<f32>) -> Self {
        AnyVolume::F32(v)
    }
}
