//! Nearest-neighbour resampling of label masks onto an isotropic grid.

use super::volume::{Grid, Volume};
use super::LabeledMask;

/// Resample `mask` to `target_spacing` (mm). The output grid covers the same
/// physical extent: `dims_out = ceil(dims * spacing / target)`, with outer
/// voxel faces aligned to the input's. Each output voxel copies the input
/// voxel whose centre is nearest in world space.
pub fn resample_nearest(mask: &LabeledMask, target_spacing: [f64; 3]) -> LabeledMask {
    assert!(
        target_spacing.iter().all(|&t| t > 0.0 && t.is_finite()),
        "target spacing must be positive"
    );
    let src = mask.volume();
    let g = src.grid();
    if g.spacing == target_spacing {
        return mask.clone();
    }
    let mut dims = [0usize; 3];
    let mut maps: Vec<Vec<usize>> = Vec::with_capacity(3);
    for a in 0..3 {
        let ratio = g.spacing[a] / target_spacing[a];
        // Guard against 4 * 0.5 / 0.25 = 8.000000001 style round-off.
        let exact = g.dims[a] as f64 * ratio;
        let n = if (exact - exact.round()).abs() < 1e-9 {
            exact.round() as usize
        } else {
            exact.ceil() as usize
        };
        dims[a] = n.max(1);
        let step = target_spacing[a] / g.spacing[a];
        maps.push(
            (0..dims[a])
                .map(|j| {
                    let c = (j as f64 + 0.5) * step - 0.5;
                    // nearest centre; exact halves go to the lower index
                    let i = (c - 0.5).ceil().max(0.0) as usize;
                    i.min(g.dims[a] - 1)
                })
                .collect(),
        );
    }
    let mut origin = g.origin;
    for (a, (&t, &sp)) in target_spacing.iter().zip(&g.spacing).enumerate() {
        let shift = 0.5 * (t - sp);
        for (r, o) in origin.iter_mut().enumerate() {
            *o += g.direction[r][a] * shift;
        }
    }
    let out_grid = Grid {
        dims,
        spacing: target_spacing,
        origin,
        direction: g.direction,
    };
    let mut data = Vec::with_capacity(out_grid.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                data.push(src.get(maps[0][x], maps[1][y], maps[2][z]));
            }
        }
    }
    LabeledMask::new(Volume::new(out_grid, data).expect("valid grid")).expect("codes preserved")
}
