//! Curve skeletons by topology-preserving thinning, plus spur pruning.

mod prune;
pub mod simple;
mod thin;

pub use prune::prune_spurs;
pub use simple::is_simple_point;
pub use thin::thin_mask;

use crate::volume_io::components::NEIGHBOR_OFFSETS_26;
use crate::volume_io::{Grid, Vec3, Volume};

/// A one-voxel-wide centerline volume. Nonzero voxels belong to the
/// skeleton; once labels are transferred the values are label codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    volume: Volume<u8>,
}

impl Skeleton {
    pub fn new(volume: Volume<u8>) -> Self {
        Skeleton { volume }
    }

    pub fn volume(&self) -> &Volume<u8> {
        &self.volume
    }

    pub fn into_volume(self) -> Volume<u8> {
        self.volume
    }

    pub fn grid(&self) -> &Grid {
        self.volume.grid()
    }

    pub fn source_spacing(&self) -> Vec3 {
        self.grid().spacing
    }

    /// Linear indices of skeleton voxels, ascending.
    pub fn voxels(&self) -> Vec<usize> {
        self.volume
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.volume.count_nonzero()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nonzero 26-neighbours of voxel `i`, in ascending offset order.
pub(crate) fn skeleton_neighbors(grid: &Grid, data: &[u8], i: usize) -> Vec<usize> {
    let c = grid.coords(i);
    let mut out = Vec::with_capacity(4);
    for o in &NEIGHBOR_OFFSETS_26 {
        let q = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
        if let Some(j) = grid.checked_index(q) {
            if data[j] != 0 {
                out.push(j);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::{betti_numbers, euclidean_distance_field};

    fn grid(d: [usize; 3]) -> Grid {
        Grid::new(d, [0.25; 3])
    }

    fn from_fn(d: [usize; 3], f: impl Fn(usize, usize, usize) -> bool) -> Volume<u8> {
        let mut v = Volume::filled(grid(d), 0u8);
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    if f(x, y, z) {
                        v.set(x, y, z, 1);
                    }
                }
            }
        }
        v
    }

    fn skeleton_degrees(s: &Skeleton) -> Vec<usize> {
        let data = s.volume().data();
        s.voxels()
            .into_iter()
            .map(|i| skeleton_neighbors(s.grid(), data, i).len())
            .collect()
    }

    #[test]
    fn empty_input_gives_empty_skeleton() {
        let v = Volume::filled(grid([4, 4, 4]), 0u8);
        assert!(thin_mask(&v).is_empty());
    }

    #[test]
    fn thin_chain_is_fixed_point() {
        let v = from_fn([12, 5, 5], |x, y, z| y == 2 && z == 2 && (1..11).contains(&x));
        let s = thin_mask(&v);
        assert_eq!(s.volume(), &v);
        // a diagonal staircase chain too
        let v = from_fn([9, 9, 9], |x, y, z| x == y && y == z && x < 8);
        assert_eq!(thin_mask(&v).volume(), &v);
    }

    #[test]
    fn tube_thins_to_straight_axial_chain() {
        let v = from_fn([11, 11, 45], |x, y, z| {
            (2..9).contains(&x) && (2..9).contains(&y) && (2..43).contains(&z)
        });
        let s = thin_mask(&v);
        let (b0, b1, _) = betti_numbers(s.volume());
        assert_eq!((b0, b1), (1, 0));
        for i in s.voxels() {
            let [x, y, z] = s.grid().coords(i);
            assert_eq!((x, y), (5, 5), "off-axis voxel at z = {z}");
        }
        let degs = skeleton_degrees(&s);
        assert_eq!(degs.iter().filter(|&&d| d == 1).count(), 2);
        assert!(degs.iter().all(|&d| d <= 2));
        // The end caps erode by about the tube radius.
        assert!(s.len() >= 41 - 2 * 4 && s.len() <= 41, "length {}", s.len());
    }

    #[test]
    fn torus_keeps_its_loop() {
        let (c, big, small) = (16.0, 9.0, 3.2);
        let v = from_fn([33, 33, 13], |x, y, z| {
            let (dx, dy, dz) = (x as f64 - c, y as f64 - c, z as f64 - 6.0);
            let r = (dx * dx + dy * dy).sqrt() - big;
            r * r + dz * dz <= small * small
        });
        assert_eq!(betti_numbers(&v).1, 1);
        let s = thin_mask(&v);
        let (b0, b1, _) = betti_numbers(s.volume());
        assert_eq!((b0, b1), (1, 1));
        assert!(skeleton_degrees(&s).iter().all(|&d| d == 2));
    }

    #[test]
    fn skeleton_is_subset_of_mask_and_deterministic() {
        let v = from_fn([20, 20, 20], |x, y, z| {
            let (a, b, c) = (x as f64 - 9.5, y as f64 - 9.5, z as f64 - 9.5);
            (a * a + b * b < 16.0 && c.abs() < 8.0) || (a * a + c * c < 9.0 && b > -2.0)
        });
        let s1 = thin_mask(&v);
        let s2 = thin_mask(&v);
        assert_eq!(s1, s2);
        for i in s1.voxels() {
            assert_ne!(v.data()[i], 0);
        }
        assert_eq!(betti_numbers(s1.volume()).0, betti_numbers(&v).0);
    }

    fn comb(spur_len: usize) -> (Volume<u8>, Skeleton) {
        // main chain along x at y = 10, spur up along y from x = 10
        let chain = from_fn([21, 21, 3], |x, y, z| {
            z == 1 && ((y == 10 && (1..20).contains(&x)) || (x == 10 && y > 10 && y <= 10 + spur_len))
        });
        (chain.clone(), Skeleton::new(chain))
    }

    fn field_with_value(g: &Grid, at: usize, value: f32) -> crate::volume_io::DistanceField {
        let mut data = vec![0.5f32; g.len()];
        data[at] = value;
        crate::volume_io::DistanceField::new(Volume::new(g.clone(), data).unwrap())
    }

    #[test]
    fn short_spur_removed_long_spur_kept() {
        // two voxels of spur: 0.5 mm from tip to attachment
        let (_, s) = comb(2);
        let att = s.grid().index(10, 10, 1);
        let f = field_with_value(s.grid(), att, 1.0);
        let pruned = prune_spurs(&s, 1.0, &f);
        assert_eq!(pruned.len(), s.len() - 2);
        assert_eq!(pruned.volume().get(10, 11, 1), 0);

        // twelve voxels: 3 mm
        let (_, s) = comb(12);
        let pruned = prune_spurs(&s, 1.0, &f);
        assert_eq!(pruned, s);
    }

    #[test]
    fn zero_bulge_is_identity() {
        let (_, s) = comb(2);
        let att = s.grid().index(10, 10, 1);
        let f = field_with_value(s.grid(), att, 1.0);
        assert_eq!(prune_spurs(&s, 0.0, &f), s);
    }

    #[test]
    fn lone_chain_never_pruned() {
        let v = from_fn([6, 3, 3], |x, y, z| y == 1 && z == 1 && x < 3);
        let s = Skeleton::new(v.clone());
        let f = euclidean_distance_field(&Volume::filled(grid([6, 3, 3]), 1u8));
        assert_eq!(prune_spurs(&s, 100.0, &f), s);
    }

    #[test]
    fn pruning_keeps_topology_of_star() {
        // three short arms around a centre: pruning must leave a component
        let v = from_fn([5, 5, 3], |x, y, z| z == 1 && ((y == 2 && x >= 1) || (x == 2 && y >= 2)));
        let s = Skeleton::new(v);
        let f = field_with_value(s.grid(), s.grid().index(2, 2, 1), 10.0);
        let p = prune_spurs(&s, 1.0, &f);
        let (b0, b1, _) = betti_numbers(p.volume());
        assert_eq!((b0, b1), (1, 0));
        assert!(p.len() >= 2);
    }
}
