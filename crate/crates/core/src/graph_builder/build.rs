//! Skeleton tracing into a [`CenterlineGraph`].

use std::collections::{HashMap, HashSet};

use super::{CenterlineGraph, GraphEdge};
use crate::skeletonizer::{skeleton_neighbors, Skeleton};
use crate::util::dist;
use crate::volume_io::{sparse_components, Connectivity, Grid};

/// Label runs shorter than this are absorbed into a neighbouring run.
const MIN_RUN: usize = 2;

/// Trace a labeled skeleton into a graph.
///
/// Voxels with a neighbour count other than 2 become nodes; 26-adjacent
/// junction voxels (count >= 3) are merged into one node placed at the
/// cluster voxel nearest the cluster centroid. Degree-2 chains become edges
/// and are split into degree-2 boundary nodes wherever the label changes.
/// A cycle without junctions gets one anchor node at its smallest voxel.
pub fn build_graph(s: &Skeleton) -> CenterlineGraph {
    let grid = s.grid();
    let data = s.volume().data();
    let voxels = s.voxels();
    let mut g = CenterlineGraph::default();
    if voxels.is_empty() {
        return g;
    }
    let neighbors: HashMap<usize, Vec<usize>> = voxels
        .iter()
        .map(|&v| (v, skeleton_neighbors(grid, data, v)))
        .collect();
    let degree = |v: usize| neighbors[&v].len();

    // Node clusters: junction voxels merge, other non-chain voxels stand alone.
    let junctions: Vec<usize> = voxels.iter().copied().filter(|&v| degree(v) >= 3).collect();
    let junction_set: HashSet<usize> = junctions.iter().copied().collect();
    let mut clusters = sparse_components(
        grid,
        &junctions,
        |j| junction_set.contains(&j),
        Connectivity::TwentySix,
    );
    clusters.extend(
        voxels
            .iter()
            .filter(|&&v| degree(v) < 2)
            .map(|&v| vec![v]),
    );
    clusters.sort_by_key(|c| c[0]);

    let mut node_of: HashMap<usize, usize> = HashMap::new();
    for c in &clusters {
        let id = g.add_node(grid.world_of_index(representative(grid, c)));
        for &v in c {
            node_of.insert(v, id);
        }
    }

    let mut visited: HashSet<usize> = HashSet::new();
    let mut direct: HashSet<(usize, usize)> = HashSet::new();
    for c in &clusters {
        for &v in c {
            for &u in &neighbors[&v] {
                if node_of.get(&u) == Some(&node_of[&v]) {
                    continue;
                }
                if node_of.contains_key(&u) {
                    if direct.insert((v.min(u), v.max(u))) {
                        add_chain(&mut g, grid, data, &node_of, &[v, u]);
                    }
                    continue;
                }
                if visited.contains(&u) {
                    continue;
                }
                let mut chain = vec![v, u];
                visited.insert(u);
                let (mut prev, mut cur) = (v, u);
                loop {
                    let next = *neighbors[&cur]
                        .iter()
                        .find(|&&n| n != prev)
                        .expect("chain voxel has two neighbours");
                    chain.push(next);
                    if node_of.contains_key(&next) {
                        break;
                    }
                    visited.insert(next);
                    (prev, cur) = (cur, next);
                }
                add_chain(&mut g, grid, data, &node_of, &chain);
            }
        }
    }

    // Pure cycles left over.
    let mut rest: Vec<usize> = voxels
        .iter()
        .copied()
        .filter(|v| !visited.contains(v) && !node_of.contains_key(v))
        .collect();
    rest.sort_unstable();
    let mut done: HashSet<usize> = HashSet::new();
    for &anchor in &rest {
        if done.contains(&anchor) {
            continue;
        }
        let id = g.add_node(grid.world_of_index(anchor));
        node_of.insert(anchor, id);
        done.insert(anchor);
        let mut chain = vec![anchor];
        let (mut prev, mut cur) = (anchor, *neighbors[&anchor].iter().min().unwrap());
        while cur != anchor {
            chain.push(cur);
            done.insert(cur);
            let next = *neighbors[&cur].iter().find(|&&n| n != prev).unwrap();
            (prev, cur) = (cur, next);
        }
        chain.push(anchor);
        add_chain(&mut g, grid, data, &node_of, &chain);
    }
    g
}

/// Cluster voxel nearest to the cluster centroid, smallest index on ties.
fn representative(grid: &Grid, cluster: &[usize]) -> usize {
    if cluster.len() == 1 {
        return cluster[0];
    }
    let pts: Vec<_> = cluster.iter().map(|&v| grid.world_of_index(v)).collect();
    let n = pts.len() as f64;
    let c = [0, 1, 2].map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / n);
    let mut best = (f64::INFINITY, usize::MAX);
    for (k, p) in pts.iter().enumerate() {
        let d = dist(*p, c);
        if d < best.0 - 1e-12 {
            best = (d, cluster[k]);
        }
    }
    best.1
}

/// Add the edges of one traced chain, split at label changes. The chain
/// starts and ends at node voxels.
fn add_chain(
    g: &mut CenterlineGraph,
    grid: &Grid,
    data: &[u8],
    node_of: &HashMap<usize, usize>,
    chain: &[usize],
) {
    let start = node_of[&chain[0]];
    let end = node_of[chain.last().unwrap()];
    let interior = &chain[1..chain.len() - 1];
    let runs = label_runs(interior.iter().map(|&v| data[v]).collect());

    let point = |v: usize| grid.world_of_index(v);
    let polyline = |g: &CenterlineGraph, from_node: usize, voxels: &[usize], to_node: usize| {
        let mut pts = Vec::with_capacity(voxels.len() + 2);
        pts.push(g.nodes[from_node].coords);
        pts.extend(voxels.iter().map(|&v| point(v)));
        pts.push(g.nodes[to_node].coords);
        pts.dedup();
        pts
    };

    if runs.len() <= 1 {
        let label = match runs.first() {
            Some(&(l, _)) => l,
            None => majority(&[data[chain[0]], data[*chain.last().unwrap()]]),
        };
        let pts = polyline(g, start, interior, end);
        g.add_edge(GraphEdge::new((start, end), pts, label));
        return;
    }

    // Boundary node at the first voxel of each later run.
    let mut from = start;
    let mut pos = 0;
    let mut pieces = Vec::new();
    for (k, &(label, len)) in runs.iter().enumerate() {
        if k + 1 < runs.len() {
            let b = interior[pos + len];
            let node = g.add_node(point(b));
            pieces.push((from, pos..pos + len, node, label));
            from = node;
            pos += len;
        } else {
            pieces.push((from, pos..interior.len(), end, label));
        }
    }
    // Each later piece starts at its own boundary voxel, so skip it.
    for (k, (a, range, b, label)) in pieces.into_iter().enumerate() {
        let body = if k == 0 {
            &interior[range]
        } else {
            &interior[range.start + 1..range.end]
        };
        let pts = polyline(g, a, body, b);
        g.add_edge(GraphEdge::new((a, b), pts, label));
    }
}

/// Run-length encoding of chain labels after absorbing short runs that sit
/// at a chain end or between two runs of the same label.
fn label_runs(labels: Vec<u8>) -> Vec<(u8, usize)> {
    let mut runs: Vec<(u8, usize)> = Vec::new();
    for l in labels {
        match runs.last_mut() {
            Some((rl, n)) if *rl == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    loop {
        let n = runs.len();
        let pick = (0..n).find(|&k| {
            runs[k].1 < MIN_RUN
                && n > 1
                && (k == 0 || k == n - 1 || runs[k - 1].0 == runs[k + 1].0)
        });
        let Some(k) = pick else {
            break;
        };
        let into = if k == 0 { 1 } else { k - 1 };
        runs[into].1 += runs[k].1;
        runs.remove(k);
        // merge neighbours that now share a label
        let mut merged: Vec<(u8, usize)> = Vec::with_capacity(runs.len());
        for r in runs.drain(..) {
            match merged.last_mut() {
                Some((ml, mn)) if *ml == r.0 => *mn += r.1,
                _ => merged.push(r),
            }
        }
        runs = merged;
    }
    runs
}

/// Most frequent label, smaller code on ties.
fn majority(labels: &[u8]) -> u8 {
    let mut counts = [0usize; 256];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let mut best = 0u8;
    for l in 1..256 {
        if counts[l] > counts[best as usize] {
            best = l as u8;
        }
    }
    best
}
