//! Single-file NIfTI-1 reader and writer (little-endian, uncompressed).

use super::volume::{is_orthonormal, AnyVolume, ElementKind, Grid, Volume, Voxel};
use byteorder::{ByteOrder, LittleEndian};
use std::path::Path;
use thiserror::Error;

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("sizeof_hdr: input holds {0} bytes, a NIfTI-1 header needs 348")]
    Truncated(usize),
    #[error("sizeof_hdr: expected 348, found {0}")]
    SizeofHdr(i32),
    #[error("bad magic: unsupported magic {0:?} (only single-file \"n+1\" is read)")]
    BadMagic(String),
    #[error("bad magic: gzip-compressed input, decompress before parsing")]
    Compressed,
    #[error("datatype: unsupported datatype {0}")]
    Datatype(i16),
    #[error("bitpix: {bitpix} does not match datatype {datatype}")]
    Bitpix { datatype: i16, bitpix: i16 },
    #[error("dim: expected 3 dimensions, found {0}")]
    DimCount(i16),
    #[error("dim: extents must be >= 1, found {0:?}")]
    DimExtent([i16; 3]),
    #[error("pixdim: spacing must be finite and > 0, found {0:?}")]
    Pixdim([f32; 3]),
    #[error("vox_offset: {0}")]
    VoxOffset(String),
    #[error("srow: {0}")]
    Sform(String),
    #[error("quatern: {0}")]
    Qform(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Parse a single-file NIfTI-1 image into a typed volume.
pub fn parse_nifti(bytes: &[u8]) -> Result<AnyVolume, NiftiError> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        return Err(NiftiError::Compressed);
    }
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::Truncated(bytes.len()));
    }
    let sizeof_hdr = LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(NiftiError::SizeofHdr(sizeof_hdr));
    }
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic != b"n+1\0" {
        let shown: String = magic
            .iter()
            .take_while(|&&b| b != 0)
            .map(|&b| b as char)
            .collect();
        return Err(NiftiError::BadMagic(shown));
    }

    let mut dim = [0i16; 8];
    LittleEndian::read_i16_into(&bytes[offsets::DIM..offsets::DIM + 16], &mut dim);
    if dim[0] != 3 {
        return Err(NiftiError::DimCount(dim[0]));
    }
    let extents = [dim[1], dim[2], dim[3]];
    if extents.iter().any(|&d| d < 1) {
        return Err(NiftiError::DimExtent(extents));
    }
    let dims = extents.map(|d| d as usize);

    let datatype = LittleEndian::read_i16(&bytes[offsets::DATATYPE..]);
    let kind = ElementKind::from_nifti_datatype(datatype).ok_or(NiftiError::Datatype(datatype))?;
    let bitpix = LittleEndian::read_i16(&bytes[offsets::BITPIX..]);
    if bitpix as usize != kind.bytes() * 8 {
        return Err(NiftiError::Bitpix { datatype, bitpix });
    }

    let mut pixdim = [0f32; 8];
    LittleEndian::read_f32_into(&bytes[offsets::PIXDIM..offsets::PIXDIM + 32], &mut pixdim);
    let spacing_f32 = [pixdim[1], pixdim[2], pixdim[3]];
    if spacing_f32.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(NiftiError::Pixdim(spacing_f32));
    }
    let spacing = spacing_f32.map(|s| s as f64);

    let vox_offset = LittleEndian::read_f32(&bytes[offsets::VOX_OFFSET..]);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32 && vox_offset.fract() == 0.0) {
        return Err(NiftiError::VoxOffset(format!(
            "{vox_offset} is not an integral offset >= 348"
        )));
    }
    let vox_offset = vox_offset as usize;
    let count = dims.iter().product::<usize>();
    let payload = count * kind.bytes();
    if vox_offset + payload > bytes.len() {
        return Err(NiftiError::VoxOffset(format!(
            "{vox_offset} + {payload} payload bytes exceeds input length {}",
            bytes.len()
        )));
    }

    let (origin, direction) = decode_orientation(bytes, pixdim[0])?;
    let grid = Grid {
        dims,
        spacing,
        origin,
        direction,
    };
    let raw = &bytes[vox_offset..vox_offset + payload];
    let volume = match kind {
        ElementKind::U8 => AnyVolume::U8(build(grid, raw.to_vec())?),
        ElementKind::I16 => {
            let mut v = vec![0i16; count];
            LittleEndian::read_i16_into(raw, &mut v);
            AnyVolume::I16(build(grid, v)?)
        }
        ElementKind::U16 => {
            let mut v = vec![0u16; count];
            LittleEndian::read_u16_into(raw, &mut v);
            AnyVolume::U16(build(grid, v)?)
        }
        ElementKind::F32 => {
            let mut v = vec![0f32; count];
            LittleEndian::read_f32_into(raw, &mut v);
            AnyVolume::F32(build(grid, v)?)
        }
    };
    Ok(volume)
}

fn build<T: Voxel>(grid: Grid, data: Vec<T>) -> Result<Volume<T>, NiftiError> {
    Volume::new(grid, data).map_err(|e| NiftiError::Sform(e.to_string()))
}

type Orientation = ([f64; 3], [[f64; 3]; 3]);

fn decode_orientation(bytes: &[u8], qfac: f32) -> Result<Orientation, NiftiError> {
    let sform_code = LittleEndian::read_i16(&bytes[offsets::SFORM_CODE..]);
    let qform_code = LittleEndian::read_i16(&bytes[offsets::QFORM_CODE..]);
    if sform_code > 0 {
        let mut rows = [[0f32; 4]; 3];
        for (r, row) in rows.iter_mut().enumerate() {
            let at = offsets::SROW_X + 16 * r;
            LittleEndian::read_f32_into(&bytes[at..at + 16], row);
        }
        let mut direction = [[0.0; 3]; 3];
        for c in 0..3 {
            let col = [rows[0][c] as f64, rows[1][c] as f64, rows[2][c] as f64];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(NiftiError::Sform(format!("column {c} has zero length")));
            }
            for r in 0..3 {
                direction[r][c] = col[r] / norm;
            }
        }
        if !is_orthonormal(&direction, 1e-4) {
            return Err(NiftiError::Sform("axes are not orthogonal".into()));
        }
        let origin = [rows[0][3] as f64, rows[1][3] as f64, rows[2][3] as f64];
        Ok((origin, direction))
    } else if qform_code > 0 {
        let mut q = [0f32; 3];
        LittleEndian::read_f32_into(&bytes[offsets::QUATERN_B..offsets::QUATERN_B + 12], &mut q);
        let mut off = [0f32; 3];
        LittleEndian::read_f32_into(&bytes[offsets::QOFFSET_X..offsets::QOFFSET_X + 12], &mut off);
        let direction = quaternion_to_direction([q[0] as f64, q[1] as f64, q[2] as f64], qfac)?;
        Ok((off.map(|v| v as f64), direction))
    } else {
        log::warn!("NIfTI header has neither sform nor qform; assuming identity orientation");
        Ok(([0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    }
}

fn quaternion_to_direction(bcd: [f64; 3], qfac: f32) -> Result<[[f64; 3]; 3], NiftiError> {
    let [b, c, d] = bcd;
    let sq = b * b + c * c + d * d;
    if sq > 1.0 + 1e-6 {
        return Err(NiftiError::Qform(format!("b^2+c^2+d^2 = {sq} exceeds 1")));
    }
    let a = (1.0 - sq).max(0.0).sqrt();
    let mut m = [
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        ],
    ];
    if qfac < 0.0 {
        for row in m.iter_mut() {
            row[2] = -row[2];
        }
    }
    Ok(m)
}

/// Quaternion (b, c, d) and qfac encoding an orthonormal direction matrix.
fn direction_to_quaternion(direction: &[[f64; 3]; 3]) -> ([f64; 3], f32) {
    let mut m = *direction;
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let qfac = if det < 0.0 {
        for row in m.iter_mut() {
            row[2] = -row[2];
        }
        -1.0
    } else {
        1.0
    };
    let trace = m[0][0] + m[1][1] + m[2][2] + 1.0;
    let (a, b, c, d);
    if trace > 0.5 {
        let s = 0.5 * trace.sqrt();
        a = s;
        b = 0.25 * (m[2][1] - m[1][2]) / a;
        c = 0.25 * (m[0][2] - m[2][0]) / a;
        d = 0.25 * (m[1][0] - m[0][1]) / a;
    } else {
        let xd = 1.0 + m[0][0] - (m[1][1] + m[2][2]);
        let yd = 1.0 + m[1][1] - (m[0][0] + m[2][2]);
        let zd = 1.0 + m[2][2] - (m[0][0] + m[1][1]);
        if xd > 1.0 {
            let bb = 0.5 * xd.sqrt();
            b = bb;
            c = 0.25 * (m[0][1] + m[1][0]) / bb;
            d = 0.25 * (m[0][2] + m[2][0]) / bb;
            a = 0.25 * (m[2][1] - m[1][2]) / bb;
        } else if yd > 1.0 {
            let cc = 0.5 * yd.sqrt();
            c = cc;
            b = 0.25 * (m[0][1] + m[1][0]) / cc;
            d = 0.25 * (m[1][2] + m[2][1]) / cc;
            a = 0.25 * (m[0][2] - m[2][0]) / cc;
        } else {
            let dd = 0.5 * zd.sqrt();
            d = dd;
            b = 0.25 * (m[0][2] + m[2][0]) / dd;
            c = 0.25 * (m[1][2] + m[2][1]) / dd;
            a = 0.25 * (m[1][0] - m[0][1]) / dd;
        }
    }
    if a < 0.0 {
        ([-b, -c, -d], qfac)
    } else {
        ([b, c, d], qfac)
    }
}

/// Serialize a volume as a single-file NIfTI-1 image with sform and qform
/// both populated from the grid.
pub fn write_nifti(volume: &AnyVolume) -> Vec<u8> {
    let grid = volume.grid();
    let kind = volume.kind();
    let count = grid.len();
    let mut out = vec![0u8; DEFAULT_VOX_OFFSET + count * kind.bytes()];
    let h = &mut out[..HEADER_SIZE];
    LittleEndian::write_i32(&mut h[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);

    let mut dim = [1i16; 8];
    dim[0] = 3;
    for k in 0..3 {
        dim[k + 1] = i16::try_from(grid.dims[k]).expect("dimension exceeds NIfTI-1 i16 range");
    }
    LittleEndian::write_i16_into(&dim, &mut h[offsets::DIM..offsets::DIM + 16]);
    LittleEndian::write_i16(&mut h[offsets::DATATYPE..], kind.nifti_datatype());
    LittleEndian::write_i16(&mut h[offsets::BITPIX..], (kind.bytes() * 8) as i16);

    let (quat, qfac) = direction_to_quaternion(&grid.direction);
    let mut pixdim = [0f32; 8];
    pixdim[0] = qfac;
    for k in 0..3 {
        pixdim[k + 1] = grid.spacing[k] as f32;
    }
    LittleEndian::write_f32_into(&pixdim, &mut h[offsets::PIXDIM..offsets::PIXDIM + 32]);
    LittleEndian::write_f32(&mut h[offsets::VOX_OFFSET..], DEFAULT_VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut h[offsets::SCL_SLOPE..], 1.0);
    // mm
    h[offsets::XYZT_UNITS] = 2;
    let descrip = b"cow-centerline";
    h[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip);

    LittleEndian::write_i16(&mut h[offsets::QFORM_CODE..], 1);
    LittleEndian::write_i16(&mut h[offsets::SFORM_CODE..], 1);
    let quat32 = quat.map(|v| v as f32);
    LittleEndian::write_f32_into(&quat32, &mut h[offsets::QUATERN_B..offsets::QUATERN_B + 12]);
    let origin32 = grid.origin.map(|v| v as f32);
    LittleEndian::write_f32_into(&origin32, &mut h[offsets::QOFFSET_X..offsets::QOFFSET_X + 12]);
    for r in 0..3 {
        let row = [
            (grid.direction[r][0] * grid.spacing[0]) as f32,
            (grid.direction[r][1] * grid.spacing[1]) as f32,
            (grid.direction[r][2] * grid.spacing[2]) as f32,
            grid.origin[r] as f32,
        ];
        let at = offsets::SROW_X + 16 * r;
        LittleEndian::write_f32_into(&row, &mut h[at..at + 16]);
    }
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");

    let body = &mut out[DEFAULT_VOX_OFFSET..];
    match volume {
        AnyVolume::U8(v) => body.copy_from_slice(v.data()),
        AnyVolume::I16(v) => LittleEndian::write_i16_into(v.data(), body),
        AnyVolume::U16(v) => LittleEndian::write_u16_into(v.data(), body),
        AnyVolume::F32(v) => LittleEndian::write_f32_into(v.data(), body),
    }
    out
}

pub fn read_nifti_file(path: impl AsRef<Path>) -> Result<AnyVolume, NiftiError> {
    let bytes = std::fs::read(path)?;
    parse_nifti(&bytes)
}

/// Write via a temporary sibling file and rename, so readers never see a
/// partially written image.
pub fn write_nifti_file(path: impl AsRef<Path>, volume: &AnyVolume) -> Result<(), NiftiError> {
    crate::util::atomic_write(path.as_ref(), &write_nifti(volume))?;
    Ok(())
}
