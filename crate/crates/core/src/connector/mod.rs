//! Label transfer onto skeletons and A*-based reconnection of fragments.

mod astar;
mod stages;

pub use astar::{closest_pair, connect_pair, rasterize_line};
pub use stages::{connect_all, connect_all_with_field, ConnectReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeletonizer::Skeleton;
use crate::util::dist;
use crate::volume_io::{Grid, LabeledMask, VolumeError};

/// Labels farther than this from a skeleton voxel signal a grid mismatch.
pub const MAX_TRANSFER_DISTANCE_MM: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectError {
    #[error("no path within the search domain")]
    NoPath,
    #[error("skeleton voxel {index} is farther than {max_mm} mm from any labeled voxel")]
    NoLabelNearby { index: usize, max_mm: f64 },
    #[error(transparent)]
    Grid(#[from] VolumeError),
}

/// Weights of the search priority `g + w1 * d(n, goal) - w2 * f_d(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AStarParams {
    pub w1: f64,
    pub w2: f64,
}

impl Default for AStarParams {
    fn default() -> Self {
        AStarParams { w1: 1.0, w2: 2.0 }
    }
}

impl AStarParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.w1 > 0.0 && self.w1.is_finite()) {
            return Err(format!("w1 must be > 0, got {}", self.w1));
        }
        if !(self.w2 >= 0.0 && self.w2.is_finite()) {
            return Err(format!("w2 must be >= 0, got {}", self.w2));
        }
        Ok(())
    }
}

/// An ordered chain of 26-adjacent voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelPath {
    pub voxels: Vec<usize>,
    pub length_mm: f64,
}

impl VoxelPath {
    pub fn new(grid: &Grid, voxels: Vec<usize>) -> Self {
        let length_mm = voxels
            .windows(2)
            .map(|w| dist(grid.world_of_index(w[0]), grid.world_of_index(w[1])))
            .sum();
        VoxelPath { voxels, length_mm }
    }
}

/// Label of the mask voxel nearest to voxel `i` (its own label if nonzero);
/// equal distances go to the smaller code.
pub(crate) fn nearest_label(mask: &LabeledMask, i: usize) -> Option<(u8, f64)> {
    let vol = mask.volume();
    let data = vol.data();
    if data[i] != 0 {
        return Some((data[i], 0.0));
    }
    let grid = vol.grid();
    let c = grid.coords(i).map(|v| v as i64);
    let min_step = grid.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_r = (MAX_TRANSFER_DISTANCE_MM / min_step).ceil() as i64;
    let mut best: Option<(f64, u8)> = None;
    // Chebyshev shells; once a shell's nearest possible point is farther
    // than the best hit, nothing closer remains.
    for r in 1..=max_r {
        if let Some((bd, _)) = best {
            if r as f64 * min_step > bd {
                break;
            }
        }
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                        continue;
                    }
                    let Some(j) = grid.checked_index([c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    let l = data[j];
                    if l == 0 {
                        continue;
                    }
                    let d = ((dx as f64 * grid.spacing[0]).powi(2)
                        + (dy as f64 * grid.spacing[1]).powi(2)
                        + (dz as f64 * grid.spacing[2]).powi(2))
                    .sqrt();
                    let better = match best {
                        None => true,
                        Some((bd, bl)) => d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && l < bl),
                    };
                    if better {
                        best = Some((d, l));
                    }
                }
            }
        }
    }
    best.filter(|&(d, _)| d <= MAX_TRANSFER_DISTANCE_MM)
        .map(|(d, l)| (l, d))
}

/// Give every skeleton voxel the label of the nearest labeled mask voxel.
pub fn transfer_labels(s: &Skeleton, m: &LabeledMask) -> Result<Skeleton, ConnectError> {
    s.grid().ensure_same_lattice(m.grid())?;
    let mut out = vec![0u8; s.grid().len()];
    for i in s.voxels() {
        let (l, _) = nearest_label(m, i).ok_or(ConnectError::NoLabelNearby {
            index: i,
            max_mm: MAX_TRANSFER_DISTANCE_MM,
        })?;
        out[i] = l;
    }
    Ok(Skeleton::new(s.volume().with_data(out)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::Volume;

    fn mask_with(g: &Grid, cells: &[([usize; 3], u8)]) -> LabeledMask {
        let mut v = Volume::filled(g.clone(), 0u8);
        for &([x, y, z], l) in cells {
            v.set(x, y, z, l);
        }
        LabeledMask::new(v).unwrap()
    }

    fn skel_with(g: &Grid, cells: &[[usize; 3]]) -> Skeleton {
        let mut v = Volume::filled(g.clone(), 0u8);
        for &[x, y, z] in cells {
            v.set(x, y, z, 1);
        }
        Skeleton::new(v)
    }

    #[test]
    fn containment_gives_own_label() {
        let g = Grid::new([5, 5, 5], [0.25; 3]);
        let m = mask_with(&g, &[([2, 2, 2], 4)]);
        let s = transfer_labels(&skel_with(&g, &[[2, 2, 2]]), &m).unwrap();
        assert_eq!(s.volume().get(2, 2, 2), 4);
    }

    #[test]
    fn ties_go_to_smaller_code() {
        let g = Grid::new([5, 5, 5], [0.25; 3]);
        let m = mask_with(&g, &[([1, 2, 2], 3), ([3, 2, 2], 2)]);
        let s = transfer_labels(&skel_with(&g, &[[2, 2, 2]]), &m).unwrap();
        assert_eq!(s.volume().get(2, 2, 2), 2);
    }

    #[test]
    fn nearest_wins_over_code() {
        let g = Grid::new([7, 5, 5], [0.25; 3]);
        let m = mask_with(&g, &[([0, 2, 2], 2), ([4, 2, 2], 3)]);
        let s = transfer_labels(&skel_with(&g, &[[3, 2, 2]]), &m).unwrap();
        assert_eq!(s.volume().get(3, 2, 2), 3);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let g = Grid::new([5, 5, 5], [0.25; 3]);
        let m = mask_with(&g, &[]);
        let r = transfer_labels(&skel_with(&g, &[[2, 2, 2]]), &m);
        assert!(matches!(r, Err(ConnectError::NoLabelNearby { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(AStarParams::default().validate().is_ok());
        assert!(AStarParams { w1: 0.0, w2: 2.0 }.validate().is_err());
        assert!(AStarParams { w1: 1.0, w2: -1.0 }.validate().is_err());
    }
}
