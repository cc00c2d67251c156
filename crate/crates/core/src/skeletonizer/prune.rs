//! Scale-relative removal of short terminal branches.

use super::thin::thin_ordered;
use super::{skeleton_neighbors, Skeleton};
use crate::util::dist;
use crate::volume_io::DistanceField;

/// A chain from an endpoint voxel up to (excluding) its attachment voxel.
#[derive(Debug, Clone)]
struct Branch {
    voxels: Vec<usize>,
    attachment: usize,
    length: f64,
}

/// Delete terminal branches shorter than `bulge_size` times the boundary
/// distance at their attachment voxel, until no such branch remains.
///
/// A terminal branch runs from a voxel with one neighbour through voxels
/// with two neighbours to the first voxel with three or more. Chains that
/// end at another endpoint have no junction and are never pruned. The
/// attachment voxel itself is never deleted and removals are re-checked one
/// at a time, so components and cycles are preserved. After each round the
/// skeleton is re-thinned, which only deletes simple non-endpoint voxels.
pub fn prune_spurs(s: &Skeleton, bulge_size: f64, dist_field: &DistanceField) -> Skeleton {
    let grid = s.grid().clone();
    let mut data = s.volume().data().to_vec();
    if bulge_size <= 0.0 {
        return s.clone();
    }
    loop {
        let mut branches: Vec<Branch> = terminal_branches(&grid, &data)
            .into_iter()
            .filter(|b| b.length < bulge_size * dist_field.at(b.attachment))
            .collect();
        if branches.is_empty() {
            break;
        }
        branches.sort_by(|a, b| {
            a.length
                .total_cmp(&b.length)
                .then(a.voxels[0].cmp(&b.voxels[0]))
        });
        let mut removed = false;
        for b in branches {
            // An earlier removal may have turned the attachment into a plain
            // chain voxel, in which case this branch is no longer terminal.
            let still_junction = skeleton_neighbors(&grid, &data, b.attachment).len() >= 3;
            let intact = b.voxels.iter().all(|&v| data[v] != 0);
            if still_junction && intact {
                for &v in &b.voxels {
                    data[v] = 0;
                }
                removed = true;
            }
        }
        if !removed {
            break;
        }
        // Removing a spur can leave a one-voxel bump at a junction cluster;
        // re-thin with the outermost voxels going first.
        let current = s.volume().with_data(data.clone()).expect("same grid");
        let thinned = thin_ordered(&current, |i| dist_field.at(i));
        for (d, t) in data.iter_mut().zip(thinned) {
            if t == 0 {
                *d = 0;
            }
        }
    }
    Skeleton::new(s.volume().with_data(data).expect("same grid"))
}

fn terminal_branches(grid: &crate::volume_io::Grid, data: &[u8]) -> Vec<Branch> {
    let mut out = Vec::new();
    for start in 0..data.len() {
        if data[start] == 0 {
            continue;
        }
        let first = skeleton_neighbors(grid, data, start);
        if first.len() != 1 {
            continue;
        }
        let mut voxels = vec![start];
        let mut length = 0.0;
        let mut prev = start;
        let mut cur = first[0];
        loop {
            length += dist(grid.world_of_index(prev), grid.world_of_index(cur));
            let nb = skeleton_neighbors(grid, data, cur);
            if nb.len() >= 3 {
                out.push(Branch {
                    voxels,
                    attachment: cur,
                    length,
                });
                break;
            }
            if nb.len() <= 1 {
                // reached the other end of a junction-free chain
                break;
            }
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            if voxels.contains(&next) {
                break;
            }
            voxels.push(cur);
            prev = cur;
            cur = next;
        }
    }
    out
}
