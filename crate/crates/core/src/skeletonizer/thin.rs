//! Directional, distance-ordered sequential thinning.

use super::simple::{is_simple_point, CENTER};
use super::Skeleton;
use crate::volume_io::components::FACE_OFFSETS;
use crate::volume_io::{squared_distance_transform, Volume};

/// Binary working copy with a one-voxel background border, so neighbour
/// lookups never leave the buffer.
struct Padded {
    dims: [usize; 3],
    data: Vec<u8>,
    /// Linear offsets of the 26 neighbours, indexed by neighbourhood bit.
    nbr: [isize; 27],
}

impl Padded {
    fn new(v: &Volume<u8>) -> Self {
        let [nx, ny, nz] = v.dims();
        let dims = [nx + 2, ny + 2, nz + 2];
        let mut data = vec![0u8; dims[0] * dims[1] * dims[2]];
        for z in 0..nz {
            for y in 0..ny {
                let src = (z * ny + y) * nx;
                let dst = ((z + 1) * dims[1] + y + 1) * dims[0] + 1;
                for x in 0..nx {
                    data[dst + x] = u8::from(v.data()[src + x] != 0);
                }
            }
        }
        let mut nbr = [0isize; 27];
        for (p, o) in nbr.iter_mut().enumerate() {
            let (x, y, z) = (p as isize % 3 - 1, (p as isize / 3) % 3 - 1, p as isize / 9 - 1);
            *o = x + y * dims[0] as isize + z * (dims[0] * dims[1]) as isize;
        }
        Padded { dims, data, nbr }
    }

    fn offset(&self, o: [i64; 3]) -> isize {
        o[0] as isize + o[1] as isize * self.dims[0] as isize
            + o[2] as isize * (self.dims[0] * self.dims[1]) as isize
    }

    #[inline]
    fn at(&self, p: usize, off: isize) -> u8 {
        self.data[(p as isize + off) as usize]
    }

    #[inline]
    fn mask(&self, p: usize) -> u32 {
        let mut m = 0u32;
        for (bit, &off) in self.nbr.iter().enumerate() {
            if bit as u32 != CENTER && self.at(p, off) != 0 {
                m |= 1 << bit;
            }
        }
        m
    }

    fn to_original(&self, p: usize) -> usize {
        let [px, py, _] = self.dims;
        let x = p % px - 1;
        let y = (p / px) % py - 1;
        let z = p / (px * py) - 1;
        ((z * (py - 2)) + y) * (px - 2) + x
    }

    fn to_padded(&self, x: usize, y: usize, z: usize) -> usize {
        ((z + 1) * self.dims[1] + y + 1) * self.dims[0] + x + 1
    }
}

/// Thin the foreground of `mask` (any nonzero value) to a curve skeleton.
///
/// Each sweep runs six sub-iterations, one per face direction. A
/// sub-iteration collects the foreground voxels whose neighbour in that
/// direction is background, orders them by distance to the background
/// (then by linear index), and deletes them one at a time if they are still
/// simple and not endpoints. Sweeps repeat until nothing changes.
pub fn thin_mask(mask: &Volume<u8>) -> Skeleton {
    let binary = mask.binarized();
    let dist2 = squared_distance_transform(&binary);
    let out = thin_ordered(&binary, |i| dist2[i]);
    Skeleton::new(binary.with_data(out).expect("same grid"))
}

/// Sequential thinning of the nonzero voxels of `v`, removal order given by
/// `key` (ascending) over original linear indices. Returns a 0/1 buffer.
pub(crate) fn thin_ordered(v: &Volume<u8>, key: impl Fn(usize) -> f64) -> Vec<u8> {
    let mut work = Padded::new(v);
    let [nx, ny, nz] = v.dims();

    let mut alive: Vec<usize> = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if v.get(x, y, z) != 0 {
                    alive.push(work.to_padded(x, y, z));
                }
            }
        }
    }
    let dirs: Vec<isize> = FACE_OFFSETS.iter().map(|&o| work.offset(o)).collect();

    loop {
        let mut changed = false;
        for &dir in &dirs {
            let mut cands: Vec<(f64, usize)> = alive
                .iter()
                .copied()
                .filter(|&p| work.at(p, dir) == 0)
                .filter_map(|p| {
                    let m = work.mask(p);
                    (m.count_ones() > 1 && is_simple_point(m))
                        .then(|| (key(work.to_original(p)), p))
                })
                .collect();
            if cands.is_empty() {
                continue;
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut removed = false;
            for (_, p) in cands {
                let m = work.mask(p);
                if m.count_ones() > 1 && is_simple_point(m) {
                    work.data[p] = 0;
                    removed = true;
                }
            }
            if removed {
                changed = true;
                alive.retain(|&p| work.data[p] != 0);
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = vec![0u8; v.grid().len()];
    for p in alive {
        out[work.to_original(p)] = 1;
    }
    out
}
