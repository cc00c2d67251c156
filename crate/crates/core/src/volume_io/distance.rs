//! Exact Euclidean distance transform (separable lower-envelope method).
//!
//! Each pass computes, per 1D line, `min_q (f(q) + w * (p - q)^2)` with the
//! lower envelope of parabolas, so a full transform is three linear passes.
//! Voxels outside the grid count as background: every line carries virtual
//! background sites at index -1 and n.

use super::volume::{Grid, Volume};
use super::DistanceField;
use rayon::prelude::*;

/// Squared distance (mm^2) from every voxel centre to the nearest background
/// voxel centre. Background voxels get 0.
pub fn squared_distance_transform(mask: &Volume<u8>) -> Vec<f64> {
    let grid = mask.grid().clone();
    let nx = grid.dims[0];
    let w = grid.spacing.map(|s| s * s);
    let data = mask.data();

    // Pass along x: direct two-sided scan.
    let mut d = vec![0f64; grid.len()];
    d.par_chunks_mut(nx).enumerate().for_each(|(row, out)| {
        let base = row * nx;
        let mut last_bg: i64 = -1;
        for x in 0..nx {
            if data[base + x] == 0 {
                last_bg = x as i64;
                out[x] = 0.0;
            } else {
                out[x] = (x as i64 - last_bg) as f64;
            }
        }
        let mut next_bg: i64 = nx as i64;
        for x in (0..nx).rev() {
            if data[base + x] == 0 {
                next_bg = x as i64;
            } else {
                let k = (out[x]).min((next_bg - x as i64) as f64);
                out[x] = k * k * w[0];
            }
        }
    });

    // Pass along y, then z, each over independent lines.
    envelope_pass(&mut d, &grid, 1, w[1]);
    envelope_pass(&mut d, &grid, 2, w[2]);
    d
}

fn envelope_pass(d: &mut [f64], grid: &Grid, axis: usize, weight: f64) {
    let [nx, ny, nz] = grid.dims;
    let n = grid.dims[axis];
    let (stride, lines): (usize, Vec<usize>) = match axis {
        1 => (nx, (0..nz).flat_map(|z| (0..nx).map(move |x| z * nx * ny + x)).collect()),
        2 => (nx * ny, (0..nx * ny).collect()),
        _ => unreachable!(),
    };
    let results: Vec<(usize, Vec<f64>)> = lines
        .par_iter()
        .map_init(
            || Scratch::new(n),
            |scratch, &start| {
                let f: Vec<f64> = (0..n).map(|i| d[start + i * stride]).collect();
                (start, scratch.transform(&f, weight))
            },
        )
        .collect();
    for (start, out) in results {
        for (i, v) in out.into_iter().enumerate() {
            d[start + i * stride] = v;
        }
    }
}

struct Scratch {
    v: Vec<i64>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            v: vec![0; n + 2],
            z: vec![0.0; n + 3],
        }
    }

    /// 1D transform over sites -1..=n where sites -1 and n carry f = 0.
    fn transform(&mut self, f: &[f64], w: f64) -> Vec<f64> {
        let n = f.len() as i64;
        let fval = |q: i64| -> f64 {
            if q < 0 || q >= n {
                0.0
            } else {
                f[q as usize]
            }
        };
        // Intersection abscissa of parabolas rooted at q and p (q > p).
        let meet = |q: i64, p: i64| -> f64 {
            ((fval(q) + w * (q * q) as f64) - (fval(p) + w * (p * p) as f64))
                / (2.0 * w * (q - p) as f64)
        };
        let mut k = 0usize;
        self.v[0] = -1;
        self.z[0] = f64::NEG_INFINITY;
        self.z[1] = f64::INFINITY;
        for q in 0..=n {
            if q < n && !fval(q).is_finite() {
                continue;
            }
            let mut s = meet(q, self.v[k]);
            while s <= self.z[k] {
                k -= 1;
                s = meet(q, self.v[k]);
            }
            k += 1;
            self.v[k] = q;
            self.z[k] = s;
            self.z[k + 1] = f64::INFINITY;
        }
        let mut out = vec![0.0; f.len()];
        let mut k = 0usize;
        for (p, o) in out.iter_mut().enumerate() {
            let p = p as i64;
            while self.z[k + 1] < p as f64 {
                k += 1;
            }
            let q = self.v[k];
            *o = w * ((p - q) * (p - q)) as f64 + fval(q);
        }
        out
    }
}

/// Euclidean distance field (mm) of a binary volume.
pub fn euclidean_distance_field(mask: &Volume<u8>) -> DistanceField {
    let sq = squared_distance_transform(mask);
    let data = sq.into_iter().map(|v| v.sqrt() as f32).collect();
    DistanceField::new(mask.with_data(data).expect("same grid"))
}
