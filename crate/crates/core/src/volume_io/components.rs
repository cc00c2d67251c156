//! Connected components, union-find, and Betti numbers of voxel sets.

use super::volume::{Grid, Volume};
use super::LabeledMask;

/// Voxel adjacency used for connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Six,
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [[i64; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &NEIGHBOR_OFFSETS_26,
        }
    }
}

pub const FACE_OFFSETS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// The 26 neighbour offsets in lexicographic (z, y, x) order.
pub const NEIGHBOR_OFFSETS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        true
    }
}

/// Component labelling of a voxel set.
#[derive(Debug, Clone)]
pub struct Components {
    /// 0 for voxels outside the set, otherwise a 1-based component id.
    /// Ids are assigned in order of each component's smallest voxel index.
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Voxel indices of every component, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }
}

/// Label the connected components of `{i : member(i)}`.
pub fn label_components(
    grid: &Grid,
    member: impl Fn(usize) -> bool,
    connectivity: Connectivity,
) -> Components {
    let n = grid.len();
    let mut labels = vec![0u32; n];
    let mut count = 0u32;
    let mut stack = Vec::new();
    let offsets = connectivity.offsets();
    for seed in 0..n {
        if labels[seed] != 0 || !member(seed) {
            continue;
        }
        count += 1;
        labels[seed] = count;
        stack.push(seed);
        while let Some(v) = stack.pop() {
            let c = grid.coords(v);
            for o in offsets {
                let q = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
                if let Some(j) = grid.checked_index(q) {
                    if labels[j] == 0 && member(j) {
                        labels[j] = count;
                        stack.push(j);
                    }
                }
            }
        }
    }
    Components {
        labels,
        count: count as usize,
    }
}

/// Components of a sparse voxel set given as a list of indices. `member`
/// must hold for every listed voxel; neighbours are followed only when
/// `member` holds for them. Components come out ordered by their smallest
/// voxel, each list ascending.
pub fn sparse_components(
    grid: &Grid,
    voxels: &[usize],
    member: impl Fn(usize) -> bool,
    connectivity: Connectivity,
) -> Vec<Vec<usize>> {
    let mut seeds: Vec<usize> = voxels.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut seen = std::collections::HashSet::with_capacity(seeds.len());
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &seed in &seeds {
        if !seen.insert(seed) {
            continue;
        }
        let mut comp = vec![seed];
        stack.push(seed);
        while let Some(v) = stack.pop() {
            let c = grid.coords(v);
            for o in connectivity.offsets() {
                let q = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
                if let Some(j) = grid.checked_index(q) {
                    if member(j) && seen.insert(j) {
                        comp.push(j);
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Components of the nonzero voxels of `v`.
pub fn foreground_components(v: &Volume<u8>, connectivity: Connectivity) -> Components {
    let data = v.data();
    label_components(v.grid(), |i| data[i] != 0, connectivity)
}

/// Number of 26-connected foreground components.
pub fn count_components(v: &Volume<u8>) -> usize {
    foreground_components(v, Connectivity::TwentySix).count
}

/// Betti numbers (b0, b1, b2) of the union of closed unit cubes at the
/// foreground voxels: 26-connected foreground, 6-connected background, with
/// everything outside the grid treated as background.
///
/// b1 follows from the Euler characteristic `V - E + F - C` of the cubical
/// complex, `b1 = b0 + b2 - chi`.
pub fn betti_numbers(v: &Volume<u8>) -> (usize, usize, usize) {
    let b0 = count_components(v);
    let chi = euler_characteristic(v);
    let grid = v.grid();
    let data = v.data();
    let bg = label_components(grid, |i| data[i] == 0, Connectivity::Six);
    let mut touches_border = vec![false; bg.count + 1];
    let [nx, ny, nz] = grid.dims;
    for (i, &l) in bg.labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let [x, y, z] = grid.coords(i);
        if x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1 {
            touches_border[l as usize] = true;
        }
    }
    let b2 = touches_border[1..].iter().filter(|&&t| !t).count();
    let b1 = (b0 as i64 + b2 as i64 - chi).max(0) as usize;
    (b0, b1, b2)
}

/// Euler characteristic of the cubical complex of closed foreground voxels.
pub fn euler_characteristic(v: &Volume<u8>) -> i64 {
    let grid = v.grid();
    let [nx, ny, nz] = grid.dims.map(|d| d as i64);
    let data = v.data();
    let fg = |x: i64, y: i64, z: i64| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && x < nx
            && y < ny
            && z < nz
            && data[grid.index(x as usize, y as usize, z as usize)] != 0
    };
    let cubes = data.iter().filter(|&&d| d != 0).count() as i64;
    let mut vertices = 0i64;
    let mut edges = 0i64;
    let mut faces = 0i64;
    // Lattice point (x, y, z) is the corner shared by voxels (x-1..x, ...).
    for z in 0..=nz {
        for y in 0..=ny {
            for x in 0..=nx {
                let around = |dx: i64, dy: i64, dz: i64| fg(x - 1 + dx, y - 1 + dy, z - 1 + dz);
                // Vertex: any of the 8 incident voxels.
                if (0..8).any(|k| around(k & 1, (k >> 1) & 1, (k >> 2) & 1)) {
                    vertices += 1;
                }
                // Edge along +x from this lattice point: voxels with x index = x.
                if x < nx && (0..4).any(|k| fg(x, y - 1 + (k & 1), z - 1 + (k >> 1))) {
                    edges += 1;
                }
                if y < ny && (0..4).any(|k| fg(x - 1 + (k & 1), y, z - 1 + (k >> 1))) {
                    edges += 1;
                }
                if z < nz && (0..4).any(|k| fg(x - 1 + (k & 1), y - 1 + (k >> 1), z)) {
                    edges += 1;
                }
                // Faces spanned from this lattice point.
                if y < ny && z < nz && (fg(x - 1, y, z) || fg(x, y, z)) {
                    faces += 1;
                }
                if x < nx && z < nz && (fg(x, y - 1, z) || fg(x, y, z)) {
                    faces += 1;
                }
                if x < nx && y < ny && (fg(x, y, z - 1) || fg(x, y, z)) {
                    faces += 1;
                }
            }
        }
    }
    vertices - edges + faces - cubes
}

/// Remove foreground components whose bounding-box diagonal is smaller than
/// `rel_diag` times the diagonal of the largest component.
///
/// Bounding boxes span whole voxels, so a single voxel has the diagonal of
/// one voxel. The reference is the component with the largest diagonal.
pub fn filter_small_components(mask: &LabeledMask, rel_diag: f64) -> LabeledMask {
    let vol = mask.volume();
    let grid = vol.grid();
    let comps = foreground_components(vol, Connectivity::TwentySix);
    if comps.count <= 1 {
        return mask.clone();
    }
    let mut lo = vec![[usize::MAX; 3]; comps.count];
    let mut hi = vec![[0usize; 3]; comps.count];
    for (i, &l) in comps.labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let c = grid.coords(i);
        let k = l as usize - 1;
        for a in 0..3 {
            lo[k][a] = lo[k][a].min(c[a]);
            hi[k][a] = hi[k][a].max(c[a]);
        }
    }
    let diag: Vec<f64> = (0..comps.count)
        .map(|k| {
            (0..3)
                .map(|a| ((hi[k][a] - lo[k][a] + 1) as f64 * grid.spacing[a]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let threshold = rel_diag * largest;
    let keep: Vec<bool> = diag.iter().map(|&d| d >= threshold).collect();
    let data = vol
        .data()
        .iter()
        .zip(&comps.labels)
        .map(|(&v, &l)| if l > 0 && !keep[l as usize - 1] { 0 } else { v })
        .collect();
    LabeledMask::new(vol.with_data(data).expect("same grid")).expect("codes unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(dims: [usize; 3], on: &[[usize; 3]]) -> Volume<u8> {
        let g = Grid::new(dims, [1.0; 3]);
        let mut v = Volume::filled(g, 0u8);
        for &[x, y, z] in on {
            v.set(x, y, z, 1);
        }
        v
    }

    #[test]
    fn sparse_matches_dense_labelling() {
        let v = vol(
            [6, 6, 6],
            &[[0, 0, 0], [1, 1, 1], [3, 3, 3], [4, 3, 3], [5, 5, 5], [0, 5, 0]],
        );
        let dense = foreground_components(&v, Connectivity::TwentySix).members();
        let list: Vec<usize> = (0..v.grid().len()).filter(|&i| v.data()[i] != 0).collect();
        let sparse = sparse_components(v.grid(), &list, |i| v.data()[i] != 0, Connectivity::TwentySix);
        assert_eq!(dense, sparse);
    }

    #[test]
    fn diagonal_voxels_join_under_26_only() {
        let v = vol([3, 3, 3], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(foreground_components(&v, Connectivity::TwentySix).count, 1);
        assert_eq!(foreground_components(&v, Connectivity::Six).count, 2);
    }

    #[test]
    fn betti_of_simple_shapes() {
        // single voxel
        assert_eq!(betti_numbers(&vol([3, 3, 3], &[[1, 1, 1]])), (1, 0, 0));
        // square ring in a plane: one loop
        let ring: Vec<[usize; 3]> = (0..3)
            .flat_map(|x| (0..3).map(move |y| [x, y, 1]))
            .filter(|&[x, y, _]| !(x == 1 && y == 1))
            .collect();
        assert_eq!(betti_numbers(&vol([3, 3, 3], &ring)), (1, 1, 0));
        // hollow cube: one cavity
        let mut shell = Vec::new();
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    if !(x == 1 && y == 1 && z == 1) {
                        shell.push([x, y, z]);
                    }
                }
            }
        }
        assert_eq!(betti_numbers(&vol([3, 3, 3], &shell)), (1, 0, 1));
        // three voxels meeting at a common corner form no loop
        let corner = vol([2, 2, 2], &[[0, 0, 0], [1, 1, 0], [0, 1, 1]]);
        assert_eq!(betti_numbers(&corner), (1, 0, 0));
    }

    #[test]
    fn union_find_joins() {
        let mut ds = DisjointSet::new(4);
        assert!(ds.union(0, 1));
        assert!(ds.union(2, 3));
        assert!(!ds.union(1, 0));
        assert_ne!(ds.find(0), ds.find(2));
        assert!(ds.union(1, 3));
        assert_eq!(ds.find(0), ds.find(2));
    }

    #[test]
    fn small_component_removed_relative_to_largest() {
        // line of 100 voxels (diag ~100) and a 4-voxel line (diag ~4)
        let g = Grid::new([120, 3, 3], [1.0; 3]);
        let mut v = Volume::filled(g, 0u8);
        for x in 0..100 {
            v.set(x, 1, 1, 4);
        }
        for x in 110..114 {
            v.set(x, 1, 1, 10);
        }
        let m = LabeledMask::new(v).unwrap();
        let out = filter_small_components(&m, 0.05);
        assert_eq!(out.volume().count_nonzero(), 100);
        // idempotent
        assert_eq!(filter_small_components(&out, 0.05), out);
    }

    #[test]
    fn equal_components_both_kept() {
        let g = Grid::new([20, 3, 3], [1.0; 3]);
        let mut v = Volume::filled(g, 0u8);
        for x in 0..5 {
            v.set(x, 1, 1, 1);
            v.set(x + 10, 1, 1, 2);
        }
        let m = LabeledMask::new(v).unwrap();
        assert_eq!(filter_small_components(&m, 0.05), m);
    }
}
