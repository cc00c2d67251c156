//! Best-first search between two voxel sets with a centring bonus.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::{AStarParams, ConnectError, VoxelPath};
use crate::util::dist;
use crate::volume_io::components::NEIGHBOR_OFFSETS_26;
use crate::volume_io::{DistanceField, Grid};

#[derive(Debug, Clone, Copy)]
struct Open {
    priority: f64,
    index: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // BinaryHeap is a max-heap: invert so the lowest priority, then the
    // lowest index, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then(other.index.cmp(&self.index))
    }
}

/// Closest voxel pair `(p, q)` with `p` in `a` and `q` in `b`; ties go to
/// the lexicographically smallest `(p, q)`.
pub fn closest_pair(grid: &Grid, a: &[usize], b: &[usize]) -> Option<(usize, usize, f64)> {
    let wb: Vec<[f64; 3]> = b.iter().map(|&j| grid.world_of_index(j)).collect();
    let mut best: Option<(usize, usize, f64)> = None;
    let mut sorted_a = a.to_vec();
    sorted_a.sort_unstable();
    let mut order_b: Vec<usize> = (0..b.len()).collect();
    order_b.sort_unstable_by_key(|&k| b[k]);
    for &p in &sorted_a {
        let wp = grid.world_of_index(p);
        for &k in &order_b {
            let d2 = (0..3).map(|t| (wp[t] - wb[k][t]).powi(2)).sum::<f64>();
            if best.is_none_or(|(_, _, bd)| d2 < bd) {
                best = Some((p, b[k], d2));
            }
        }
    }
    best.map(|(p, q, d2)| (p, q, d2.sqrt()))
}

/// Search from the voxel of `a` closest to `b` until any voxel of `b` is
/// reached, moving through 26-neighbours for which `domain` holds.
///
/// The priority of a voxel `n` is `g(n) + w1 * d(n, q) - w2 * f_d(n)`, with
/// `g` the accumulated step length (mm), `q` the voxel of `b` closest to
/// `a`, and `f_d` the boundary distance. Priority ties are broken by the
/// smaller linear index.
pub fn connect_pair(
    grid: &Grid,
    a: &[usize],
    b: &[usize],
    domain: impl Fn(usize) -> bool,
    dist_field: &DistanceField,
    params: &AStarParams,
) -> Result<VoxelPath, ConnectError> {
    let (start, goal, _) = closest_pair(grid, a, b).ok_or(ConnectError::NoPath)?;
    search(grid, start, goal, b, domain, dist_field, params)
}

/// The search itself, from a given start towards a given goal voxel;
/// terminates on reaching any voxel of `targets`.
pub(crate) fn search(
    grid: &Grid,
    start: usize,
    goal: usize,
    targets: &[usize],
    domain: impl Fn(usize) -> bool,
    dist_field: &DistanceField,
    params: &AStarParams,
) -> Result<VoxelPath, ConnectError> {
    let targets: HashSet<usize> = targets.iter().copied().collect();
    let goal_w = grid.world_of_index(goal);
    let priority = |i: usize, g: f64| {
        g + params.w1 * dist(grid.world_of_index(i), goal_w) - params.w2 * dist_field.at(i)
    };

    let mut best_g: HashMap<usize, f64> = HashMap::new();
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut closed: HashSet<usize> = HashSet::new();
    let mut open = BinaryHeap::new();
    best_g.insert(start, 0.0);
    open.push(Open {
        priority: priority(start, 0.0),
        index: start,
    });

    while let Some(Open { index: cur, .. }) = open.pop() {
        if !closed.insert(cur) {
            continue;
        }
        if targets.contains(&cur) {
            let mut voxels = vec![cur];
            let mut v = cur;
            while let Some(&p) = parent.get(&v) {
                voxels.push(p);
                v = p;
            }
            voxels.reverse();
            return Ok(VoxelPath::new(grid, voxels));
        }
        let g_cur = best_g[&cur];
        let wc = grid.world_of_index(cur);
        let c = grid.coords(cur);
        for o in &NEIGHBOR_OFFSETS_26 {
            let q = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
            let Some(n) = grid.checked_index(q) else {
                continue;
            };
            if closed.contains(&n) || !(domain(n) || targets.contains(&n)) {
                continue;
            }
            let g = g_cur + dist(wc, grid.world_of_index(n));
            if best_g.get(&n).is_none_or(|&old| g < old) {
                best_g.insert(n, g);
                parent.insert(n, cur);
                open.push(Open {
                    priority: priority(n, g),
                    index: n,
                });
            }
        }
    }
    Err(ConnectError::NoPath)
}

/// Straight voxel line from `a` to `b` (inclusive); consecutive voxels are
/// 26-adjacent.
pub fn rasterize_line(grid: &Grid, a: usize, b: usize) -> VoxelPath {
    let ca = grid.coords(a).map(|v| v as f64);
    let cb = grid.coords(b).map(|v| v as f64);
    let steps = (0..3).map(|t| (cb[t] - ca[t]).abs()).fold(0.0, f64::max) as usize;
    let mut voxels = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
        let p = [0, 1, 2].map(|d| (ca[d] + t * (cb[d] - ca[d])).round() as usize);
        let i = grid.index(p[0], p[1], p[2]);
        if voxels.last() != Some(&i) {
            voxels.push(i);
        }
    }
    VoxelPath::new(grid, voxels)
}
