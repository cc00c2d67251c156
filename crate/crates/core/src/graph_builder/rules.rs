//! Rule-based removal of spurious edges.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{CenterlineGraph, GraphEdge};
use crate::anatomy::labels_adjacent;
use crate::util::dist;
use crate::volume_io::DistanceField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleParams {
    /// Self-loops shorter than this multiple of the boundary distance at
    /// their node are removed.
    pub self_loop_factor: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            self_loop_factor: 4.0,
        }
    }
}

/// Apply the edge rules until nothing changes:
///
/// * R1: delete self-loops shorter than `self_loop_factor` times the
///   boundary distance at their node.
/// * R2: among parallel edges of one label between the same two nodes keep
///   the one with the largest mean boundary distance; the others go if they
///   run inside its lumen (separate channels, i.e. fenestrations, stay).
/// * R3: delete an edge whose label is neither equal nor adjacent to any
///   other label at one of its endpoints, unless that disconnects the graph;
///   break cycles made of exactly two labels at their thinnest edge.
///
/// Degree-2 nodes left between edges of one label are dissolved.
pub fn remove_spurious_edges(
    g: &CenterlineGraph,
    dist_field: &DistanceField,
    params: &RuleParams,
) -> CenterlineGraph {
    let mut g = g.clone();
    loop {
        let victim = self_loop_victim(&g, dist_field, params)
            .or_else(|| parallel_victim(&g, dist_field))
            .or_else(|| label_pair_victim(&g))
            .or_else(|| two_label_cycle_victim(&g, dist_field));
        let Some(e) = victim else {
            break;
        };
        log::debug!("removing spurious edge {e} (label {})", g.edges[e].label);
        g.remove_edges(|x| x.id == e);
        g.dissolve_plain_degree2();
    }
    g
}

fn mean_fd(e: &GraphEdge, f: &DistanceField) -> f64 {
    e.points.iter().map(|&p| f.at_world(p)).sum::<f64>() / e.points.len() as f64
}

fn self_loop_victim(g: &CenterlineGraph, f: &DistanceField, p: &RuleParams) -> Option<usize> {
    g.edges
        .iter()
        .find(|e| {
            e.is_self_loop()
                && e.length() < p.self_loop_factor * f.at_world(g.nodes[e.nodes.0].coords)
        })
        .map(|e| e.id)
}

fn parallel_victim(g: &CenterlineGraph, f: &DistanceField) -> Option<usize> {
    let mut groups: BTreeMap<(usize, usize, u8), Vec<usize>> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| !e.is_self_loop()) {
        let (a, b) = e.nodes;
        groups.entry((a.min(b), a.max(b), e.label)).or_default().push(e.id);
    }
    let tol = f.grid().voxel_diagonal();
    for ids in groups.values().filter(|v| v.len() > 1) {
        let mut ranked: Vec<(f64, usize)> = ids.iter().map(|&i| (mean_fd(&g.edges[i], f), i)).collect();
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let keep = &g.edges[ranked[0].1];
        for &(_, i) in &ranked[1..] {
            if inside_lumen(&g.edges[i], keep, f, tol) {
                return Some(i);
            }
        }
    }
    None
}

/// Every point of `e` lies within the lumen around `keep`'s centerline.
fn inside_lumen(e: &GraphEdge, keep: &GraphEdge, f: &DistanceField, tol: f64) -> bool {
    e.points.iter().all(|&p| {
        let (d, q) = keep
            .points
            .iter()
            .map(|&q| (dist(p, q), q))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .expect("edge has points");
        d <= f.at_world(q).max(tol)
    })
}

fn label_pair_victim(g: &CenterlineGraph) -> Option<usize> {
    let base = g.components().len();
    for e in &g.edges {
        let bad_end = [e.nodes.0, e.nodes.1].into_iter().any(|n| {
            let others: Vec<u8> = g
                .incident(n)
                .into_iter()
                .filter(|&x| x != e.id)
                .map(|x| g.edges[x].label)
                .collect();
            !others.is_empty()
                && !others
                    .iter()
                    .any(|&l| l == e.label || labels_adjacent(l, e.label))
        });
        if !bad_end {
            continue;
        }
        let mut trial = g.clone();
        trial.remove_edges(|x| x.id == e.id);
        if trial.components().len() == base {
            return Some(e.id);
        }
    }
    None
}

fn two_label_cycle_victim(g: &CenterlineGraph, f: &DistanceField) -> Option<usize> {
    let mut order: Vec<(f64, usize)> = g.edges.iter().map(|e| (mean_fd(e, f), e.id)).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let labels = g.labels();
    for (_, id) in order {
        let e = &g.edges[id];
        for &other in &labels {
            if other == e.label || !labels_adjacent(other, e.label) {
                continue;
            }
            if closes_mixed_cycle(g, id, e.label, other) {
                return Some(id);
            }
        }
    }
    None
}

/// Whether edge `id` lies on a simple cycle over edges labeled `a` or `b`
/// that uses at least one `b` edge, i.e. shares a biconnected block of that
/// subgraph with a `b` edge.
fn closes_mixed_cycle(g: &CenterlineGraph, id: usize, a: u8, b: u8) -> bool {
    let in_h = |e: &GraphEdge| (e.label == a || e.label == b) && !e.is_self_loop();
    if !in_h(&g.edges[id]) {
        return false;
    }
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in g.edges.iter().filter(|e| in_h(e)) {
        adj.entry(e.nodes.0).or_default().push(e.id);
        adj.entry(e.nodes.1).or_default().push(e.id);
    }
    let mut blocks = Blocks {
        g,
        adj: &adj,
        disc: HashMap::new(),
        low: HashMap::new(),
        stack: Vec::new(),
        block_of: HashMap::new(),
        count: 0,
    };
    let mut roots: Vec<usize> = adj.keys().copied().collect();
    roots.sort_unstable();
    for r in roots {
        if !blocks.disc.contains_key(&r) {
            blocks.visit(r, None);
        }
    }
    let target = blocks.block_of[&id];
    blocks
        .block_of
        .iter()
        .any(|(&e, &blk)| blk == target && g.edges[e].label == b)
}

/// Tarjan's biconnected components, recording the block of every edge.
struct Blocks<'a> {
    g: &'a CenterlineGraph,
    adj: &'a HashMap<usize, Vec<usize>>,
    disc: HashMap<usize, usize>,
    low: HashMap<usize, usize>,
    stack: Vec<usize>,
    block_of: HashMap<usize, usize>,
    count: usize,
}

impl Blocks<'_> {
    fn visit(&mut self, u: usize, via: Option<usize>) {
        let t = self.disc.len();
        self.disc.insert(u, t);
        self.low.insert(u, t);
        for &e in &self.adj[&u] {
            if Some(e) == via {
                continue;
            }
            let v = self.g.edges[e].other(u);
            match self.disc.get(&v).copied() {
                None => {
                    self.stack.push(e);
                    self.visit(v, Some(e));
                    let lv = self.low[&v];
                    if lv < self.low[&u] {
                        self.low.insert(u, lv);
                    }
                    if lv >= self.disc[&u] {
                        while let Some(x) = self.stack.pop() {
                            self.block_of.insert(x, self.count);
                            if x == e {
                                break;
                            }
                        }
                        self.count += 1;
                    }
                }
                Some(dv) if dv < self.disc[&u] => {
                    self.stack.push(e);
                    if dv < self.low[&u] {
                        self.low.insert(u, dv);
                    }
                }
                Some(_) => {}
            }
        }
    }
}
