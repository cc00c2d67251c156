//! Volume containers, NIfTI-1 I/O, resampling, connectivity and distance
//! transforms.

pub mod components;
pub mod distance;
pub mod nifti;
pub mod resample;
pub mod volume;

pub use components::{
    betti_numbers, count_components, filter_small_components, foreground_components,
    label_components, sparse_components, Components, Connectivity, DisjointSet,
};
pub use distance::{euclidean_distance_field, squared_distance_transform};
pub use nifti::{parse_nifti, read_nifti_file, write_nifti, write_nifti_file, NiftiError};
pub use resample::resample_nearest;
pub use volume::{AnyVolume, ElementKind, Grid, Vec3, Volume, VolumeError, Voxel};

use crate::anatomy::is_permitted_code;

/// An unsigned-8 volume whose values are all permitted CoW label codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMask(Volume<u8>);

impl LabeledMask {
    pub fn new(volume: Volume<u8>) -> Result<Self, VolumeError> {
        if let Some((index, &code)) = volume
            .data()
            .iter()
            .enumerate()
            .find(|(_, &v)| !is_permitted_code(v as i64))
        {
            return Err(VolumeError::InvalidLabel {
                index,
                code: code as i64,
            });
        }
        Ok(LabeledMask(volume))
    }

    /// Accept a volume of any element kind as long as every value rounds to
    /// a permitted code.
    pub fn from_any(volume: &AnyVolume) -> Result<Self, VolumeError> {
        let values = volume.to_rounded_i64();
        if let Some((index, &code)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !is_permitted_code(v))
        {
            return Err(VolumeError::InvalidLabel { index, code });
        }
        let data = values.into_iter().map(|v| v as u8).collect();
        Ok(LabeledMask(Volume::new(volume.grid().clone(), data)?))
    }

    pub fn volume(&self) -> &Volume<u8> {
        &self.0
    }

    pub fn into_volume(self) -> Volume<u8> {
        self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    /// Foreground (any label) as a 0/1 volume.
    pub fn binary(&self) -> Volume<u8> {
        self.0.binarized()
    }

    /// Number of voxels carrying `code`.
    pub fn count_label(&self, code: u8) -> usize {
        self.0.data().iter().filter(|&&v| v == code).count()
    }

    /// Label codes present, ascending, background excluded.
    pub fn labels_present(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &v in self.0.data() {
            seen[v as usize] = true;
        }
        (1..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    /// Label at the voxel nearest to a world point, 0 outside the grid.
    pub fn label_at_world(&self, p: Vec3) -> u8 {
        self.grid()
            .nearest_voxel(p)
            .map_or(0, |i| self.0.data()[i])
    }
}

/// Distance (mm) from each foreground voxel centre to the nearest background
/// voxel centre.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField(Volume<f32>);

impl DistanceField {
    pub fn new(volume: Volume<f32>) -> Self {
        DistanceField(volume)
    }

    pub fn volume(&self) -> &Volume<f32> {
        &self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        self.0.data()[index] as f64
    }

    /// Value at the voxel nearest to a world point, 0 outside the grid.
    pub fn at_world(&self, p: Vec3) -> f64 {
        self.grid().nearest_voxel(p).map_or(0.0, |i| self.at(i))
    }
}
