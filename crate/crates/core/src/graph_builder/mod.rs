//! Centerline graph construction, anatomical node extraction and graph
//! clean-up.

mod build;
mod merge;
mod nodes;
pub mod paths;
mod rules;
mod smooth;

pub use build::build_graph;
pub use merge::{merge_single_label_graphs, MergeReport, SNAP_DISTANCE_MM};
pub use nodes::{extract_anatomical_nodes, AnatomicalNode, NodeExtraction, NodeType};
pub use rules::{remove_spurious_edges, RuleParams};
pub use smooth::{trim_and_smooth, TRIM_CAP_MM};

use serde::Serialize;

use crate::util::polyline_length;
use crate::volume_io::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphNode {
    pub id: usize,
    pub coords: Vec3,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEdge {
    pub id: usize,
    pub nodes: (usize, usize),
    /// Ordered from `nodes.0` to `nodes.1`.
    pub points: Vec<Vec3>,
    pub label: u8,
    pub ce_radius: Vec<Option<f64>>,
    pub mis_radius: Vec<Option<f64>>,
}

impl GraphEdge {
    pub fn new(nodes: (usize, usize), points: Vec<Vec3>, label: u8) -> Self {
        let n = points.len();
        GraphEdge {
            id: 0,
            nodes,
            points,
            label,
            ce_radius: vec![None; n],
            mis_radius: vec![None; n],
        }
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }

    pub fn is_self_loop(&self) -> bool {
        self.nodes.0 == self.nodes.1
    }

    /// The endpoint opposite to `node`.
    pub fn other(&self, node: usize) -> usize {
        if self.nodes.0 == node {
            self.nodes.1
        } else {
            self.nodes.0
        }
    }

    /// Points ordered starting from `node`.
    pub fn points_from(&self, node: usize) -> Vec<Vec3> {
        let mut p = self.points.clone();
        if self.nodes.0 != node {
            p.reverse();
        }
        p
    }

    pub(crate) fn reversed(&self) -> GraphEdge {
        let mut e = self.clone();
        e.nodes = (e.nodes.1, e.nodes.0);
        e.points.reverse();
        e.ce_radius.reverse();
        e.mis_radius.reverse();
        e
    }
}

/// Undirected multigraph; node and edge ids equal their positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CenterlineGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl CenterlineGraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_node(&mut self, coords: Vec3) -> usize {
        let id = self.nodes.len();
        self.nodes.push(GraphNode {
            id,
            coords,
            degree: 0,
        });
        id
    }

    pub fn add_edge(&mut self, mut e: GraphEdge) -> usize {
        let id = self.edges.len();
        e.id = id;
        let (a, b) = e.nodes;
        self.nodes[a].degree += 1;
        self.nodes[b].degree += 1;
        self.edges.push(e);
        id
    }

    /// Edge ids incident to `node`; a self-loop appears twice.
    pub fn incident(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.nodes.0 == node {
                out.push(e.id);
            }
            if e.nodes.1 == node {
                out.push(e.id);
            }
        }
        out
    }

    pub fn recompute_degrees(&mut self) {
        for n in &mut self.nodes {
            n.degree = 0;
        }
        for e in &self.edges {
            self.nodes[e.nodes.0].degree += 1;
            self.nodes[e.nodes.1].degree += 1;
        }
    }

    /// Drop the edges for which `remove` holds, then renumber.
    pub fn remove_edges(&mut self, remove: impl Fn(&GraphEdge) -> bool) {
        self.edges.retain(|e| !remove(e));
        self.renumber_edges();
        self.recompute_degrees();
    }

    fn renumber_edges(&mut self) {
        for (i, e) in self.edges.iter_mut().enumerate() {
            e.id = i;
        }
    }

    /// Remove nodes of degree 0 and renumber everything, keeping order.
    pub fn drop_isolated_nodes(&mut self) {
        self.recompute_degrees();
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut kept = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            if n.degree > 0 {
                map[n.id] = kept.len();
                let mut n = n.clone();
                n.id = kept.len();
                kept.push(n);
            }
        }
        self.nodes = kept;
        for e in &mut self.edges {
            e.nodes = (map[e.nodes.0], map[e.nodes.1]);
        }
    }

    /// Join the two edges at every degree-2 node whose edges share a label
    /// and are distinct, so that remaining degree-2 nodes mark label changes
    /// or cycle anchors.
    pub fn dissolve_plain_degree2(&mut self) {
        loop {
            self.recompute_degrees();
            let target = self.nodes.iter().find_map(|n| {
                if n.degree != 2 {
                    return None;
                }
                let inc = self.incident(n.id);
                let (a, b) = (inc[0], inc[1]);
                (a != b && self.edges[a].label == self.edges[b].label).then_some((n.id, a, b))
            });
            let Some((node, a, b)) = target else {
                break;
            };
            let ea = if self.edges[a].nodes.1 == node {
                self.edges[a].clone()
            } else {
                self.edges[a].reversed()
            };
            let eb = if self.edges[b].nodes.0 == node {
                self.edges[b].clone()
            } else {
                self.edges[b].reversed()
            };
            let mut joined = ea.clone();
            joined.nodes = (ea.nodes.0, eb.nodes.1);
            joined.points.extend_from_slice(&eb.points[1..]);
            joined.ce_radius.extend_from_slice(&eb.ce_radius[1..]);
            joined.mis_radius.extend_from_slice(&eb.mis_radius[1..]);
            let (lo, hi) = (a.min(b), a.max(b));
            self.edges[lo] = joined;
            self.edges.remove(hi);
            self.renumber_edges();
            self.drop_isolated_nodes();
        }
        self.drop_isolated_nodes();
    }

    /// Connected components of the node set, each ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut ds = crate::volume_io::DisjointSet::new(self.nodes.len());
        for e in &self.edges {
            ds.union(e.nodes.0, e.nodes.1);
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for n in 0..self.nodes.len() {
            let r = ds.find(n);
            groups.entry(r).or_default().push(n);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|c| c[0]);
        out
    }

    /// E − V + C.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.components().len() - self.nodes.len()
    }

    /// Labels carried by edges, ascending.
    pub fn labels(&self) -> Vec<u8> {
        let mut l: Vec<u8> = self.edges.iter().map(|e| e.label).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// Straight polyline between two points with roughly `step` spacing.
    pub fn line(a: Vec3, b: Vec3, step: f64) -> Vec<Vec3> {
        let n = ((crate::util::dist(a, b) / step).ceil() as usize).max(1);
        (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                [0, 1, 2].map(|d| a[d] + t * (b[d] - a[d]))
            })
            .collect()
    }

    /// Graph from node coordinates and `(a, b, label)` straight edges.
    pub fn graph(nodes: &[Vec3], edges: &[(usize, usize, u8)]) -> CenterlineGraph {
        let mut g = CenterlineGraph::default();
        for &p in nodes {
            g.add_node(p);
        }
        for &(a, b, l) in edges {
            g.add_edge(GraphEdge::new((a, b), line(nodes[a], nodes[b], 0.25), l));
        }
        g
    }
}
