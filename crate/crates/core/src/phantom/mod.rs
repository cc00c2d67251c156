//! Synthetic vessel phantoms: tube rasterization and scripted
//! Circle-of-Willis geometries with known variants.

mod cow;

pub use cow::{bifurcation_phantom, cow_phantom, BifurcationSpec, CowPhantom, CowPhantomSpec, ZONE_FACTOR};

use rayon::prelude::*;

use crate::util::{dist, dot, normalized, sub};
use crate::volume_io::{Grid, LabeledMask, Vec3, Volume};

/// Label every voxel centre with `f(world point)`.
///
/// # Panics
/// If `f` returns a code that is not a permitted label.
pub fn rasterize_fn(grid: &Grid, f: impl Fn(Vec3) -> u8 + Sync) -> LabeledMask {
    let data: Vec<u8> = (0..grid.len())
        .into_par_iter()
        .map(|i| f(grid.world_of_index(i)))
        .collect();
    LabeledMask::new(Volume::new(grid.clone(), data).expect("sized to grid"))
        .expect("phantom labels are permitted codes")
}

/// Rotation matrix (rows) for `angle` radians about `axis`.
pub fn rotation_about(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = normalized(axis).expect("non-zero axis");
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

pub fn rotate(r: &[[f64; 3]; 3], p: Vec3) -> Vec3 {
    [dot(r[0], p), dot(r[1], p), dot(r[2], p)]
}

/// A labeled tube around a polyline; the radius varies linearly between
/// consecutive points.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub label: u8,
    pub points: Vec<Vec3>,
    pub radii: Vec<f64>,
}

impl Tube {
    pub fn new(label: u8, points: Vec<Vec3>, radius: f64) -> Self {
        let radii = vec![radius; points.len()];
        Tube {
            label,
            points,
            radii,
        }
    }

    /// Straight tube whose radius goes linearly from `r0` to `r1`.
    pub fn tapered(label: u8, a: Vec3, b: Vec3, r0: f64, r1: f64) -> Self {
        Tube {
            label,
            points: vec![a, b],
            radii: vec![r0, r1],
        }
    }

    /// Signed distance to the surface (negative inside).
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.points.len().saturating_sub(1) {
            let (a, b) = (self.points[k], self.points[k + 1]);
            let ab = sub(b, a);
            let len2 = dot(ab, ab);
            let t = if len2 > 0.0 {
                (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = [0, 1, 2].map(|d| a[d] + t * ab[d]);
            let r = self.radii[k] + t * (self.radii[k + 1] - self.radii[k]);
            best = best.min(dist(p, q) - r);
        }
        if self.points.len() == 1 {
            best = dist(p, self.points[0]) - self.radii[0];
        }
        best
    }

    fn bounds(&self) -> (Vec3, Vec3) {
        let rmax = self.radii.iter().cloned().fold(0.0, f64::max);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d] - rmax);
                hi[d] = hi[d].max(p[d] + rmax);
            }
        }
        (lo, hi)
    }
}

/// Rasterize tubes onto an axis-aligned grid. A voxel inside several tubes
/// takes the label of the tube it is deepest inside (earliest on ties).
pub fn rasterize_tubes(grid: &Grid, tubes: &[Tube]) -> LabeledMask {
    let mut best = vec![(0.0f64, 0u8); grid.len()];
    for tube in tubes {
        let (lo, hi) = tube.bounds();
        let a = grid.continuous_index(lo);
        let b = grid.continuous_index(hi);
        let range = |d: usize| {
            let (x, y) = (a[d].min(b[d]), a[d].max(b[d]));
            let from = (x.floor() - 1.0).max(0.0) as usize;
            let to = ((y.ceil() + 1.0).max(0.0) as usize).min(grid.dims[d].saturating_sub(1));
            from..=to
        };
        let (rx, ry, rz) = (range(0), range(1), range(2));
        let hits: Vec<(usize, f64)> = rz
            .into_par_iter()
            .flat_map_iter(|z| {
                let (rx, ry) = (rx.clone(), ry.clone());
                ry.flat_map(move |y| rx.clone().map(move |x| (x, y, z)))
                    .filter_map(|(x, y, z)| {
                        let i = grid.index(x, y, z);
                        let d = tube.signed_distance(grid.world_of_index(i));
                        (d <= 0.0).then_some((i, d))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        for (i, d) in hits {
            if best[i].1 == 0 || d < best[i].0 {
                best[i] = (d, tube.label);
            }
        }
    }
    let data = best.into_iter().map(|(_, l)| l).collect();
    LabeledMask::new(Volume::new(grid.clone(), data).expect("sized to grid"))
        .expect("phantom labels are permitted codes")
}

/// Points along a circular arc in the plane spanned by `u` and `v` around
/// `center`, from angle `a0` to `a1` (radians), spaced about `step` mm.
pub fn arc_points(center: Vec3, u: Vec3, v: Vec3, radius: f64, a0: f64, a1: f64, step: f64) -> Vec<Vec3> {
    let n = (((a1 - a0).abs() * radius / step).ceil() as usize).max(1);
    (0..=n)
        .map(|k| {
            let a = a0 + (a1 - a0) * k as f64 / n as f64;
            let (s, c) = a.sin_cos();
            [0, 1, 2].map(|d| center[d] + radius * (c * u[d] + s * v[d]))
        })
        .collect()
}

/// Grid of `dims` voxels of `spacing` mm centred on the world origin.
pub fn centred_grid(dims: [usize; 3], spacing: f64) -> Grid {
    let o = dims.map(|n| -((n as f64 - 1.0) * spacing) / 2.0);
    Grid::new(dims, [spacing; 3]).with_origin(o)
}
