//! Shortest label-restricted paths through the graph and arc-length windows
//! along them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{CenterlineGraph, NodeExtraction};
use crate::anatomy::Segment;
use crate::util::dist;
use crate::volume_io::Vec3;

/// A polyline assembled from consecutive graph edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphPath {
    pub nodes: Vec<usize>,
    pub points: Vec<Vec3>,
    pub ce_radius: Vec<Option<f64>>,
    pub mis_radius: Vec<Option<f64>>,
    /// Label of the edge each point belongs to; a shared junction point
    /// takes the label of the edge that follows it.
    pub labels: Vec<u8>,
    /// Cumulative arc length at each point.
    pub arc: Vec<f64>,
    /// Index into `points` of each entry of `nodes`.
    pub node_index: Vec<usize>,
}

impl GraphPath {
    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }

    /// Arc position of graph node `n` on the path.
    pub fn arc_of_node(&self, n: usize) -> Option<f64> {
        self.nodes
            .iter()
            .position(|&x| x == n)
            .map(|k| self.arc[self.node_index[k]])
    }

    /// Arc position where the path first enters an edge labeled `label`.
    pub fn arc_of_label_start(&self, label: u8) -> Option<f64> {
        self.labels.iter().position(|&l| l == label).map(|i| self.arc[i])
    }

    /// Point at arc length `s` (clamped), linearly interpolated.
    pub fn point_at(&self, s: f64) -> Vec3 {
        let (i, f) = self.locate(s);
        if f == 0.0 {
            return self.points[i];
        }
        lerp(self.points[i], self.points[i + 1], f)
    }

    /// Segment index and fraction for arc length `s`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.points.len();
        if n == 0 {
            return (0, 0.0);
        }
        let s = s.clamp(0.0, self.length());
        let i = self.arc.partition_point(|&a| a <= s).saturating_sub(1).min(n - 1);
        if i + 1 >= n {
            return (n - 1, 0.0);
        }
        let seg = self.arc[i + 1] - self.arc[i];
        let f = if seg > 0.0 { (s - self.arc[i]) / seg } else { 0.0 };
        (i, f)
    }

    /// Sub-polyline between arc lengths `s0 <= s1` with interpolated ends.
    /// Interpolated ends take the radii of the nearer original point.
    pub fn window(&self, s0: f64, s1: f64) -> GraphPath {
        let len = self.length();
        let (s0, s1) = (s0.clamp(0.0, len), s1.clamp(0.0, len));
        let mut out = GraphPath::default();
        if self.points.is_empty() || s1 < s0 {
            return out;
        }
        let mut push = |p: Vec3, k: usize| {
            if out.points.last() == Some(&p) {
                return;
            }
            out.points.push(p);
            out.ce_radius.push(self.ce_radius[k]);
            out.mis_radius.push(self.mis_radius[k]);
            out.labels.push(self.labels[k]);
        };
        let (i0, f0) = self.locate(s0);
        let nearest = |i: usize, f: f64| if f > 0.5 { i + 1 } else { i };
        push(self.point_at(s0), nearest(i0, f0));
        for k in 0..self.points.len() {
            if self.arc[k] > s0 && self.arc[k] < s1 {
                push(self.points[k], k);
            }
        }
        let (i1, f1) = self.locate(s1);
        push(self.point_at(s1), nearest(i1, f1));
        out.arc = cumulative(&out.points);
        out
    }

    pub fn reversed(&self) -> GraphPath {
        let mut p = self.clone();
        p.nodes.reverse();
        p.points.reverse();
        p.ce_radius.reverse();
        p.mis_radius.reverse();
        // junction points belong to the edge that follows them
        let mut labels = self.labels.clone();
        labels.reverse();
        if labels.len() > 1 {
            let n = labels.len();
            let mut shifted = labels.clone();
            for (k, idx) in p.node_index.iter().map(|&i| n - 1 - i).enumerate() {
                let _ = k;
                if idx + 1 < n {
                    shifted[idx] = labels[idx + 1];
                }
            }
            labels = shifted;
        }
        p.labels = labels;
        let n = self.points.len();
        p.node_index = self.node_index.iter().rev().map(|&i| n - 1 - i).collect();
        p.arc = cumulative(&p.points);
        p
    }

    /// Radii of the path's points whose label is `label`, missing values
    /// dropped.
    pub fn ce_values(&self) -> Vec<f64> {
        self.ce_radius.iter().flatten().copied().collect()
    }
}

fn lerp(a: Vec3, b: Vec3, f: f64) -> Vec3 {
    [0, 1, 2].map(|d| a[d] + f * (b[d] - a[d]))
}

pub(crate) fn cumulative(points: &[Vec3]) -> Vec<f64> {
    let mut arc = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (k, p) in points.iter().enumerate() {
        if k > 0 {
            acc += dist(points[k - 1], *p);
        }
        arc.push(acc);
    }
    arc
}

#[derive(Debug, Clone, Copy)]
struct Item(f64, usize);

impl PartialEq for Item {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Shortest path from `from` to `to` over edges whose label is in
/// `allowed`. Equal-length alternatives resolve to the smaller edge ids.
pub fn label_path(g: &CenterlineGraph, allowed: &[u8], from: usize, to: usize) -> Option<GraphPath> {
    let n = g.nodes.len();
    if from >= n || to >= n {
        return None;
    }
    let mut best = vec![f64::INFINITY; n];
    let mut via: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::from([Item(0.0, from)]);
    best[from] = 0.0;
    let lengths: Vec<f64> = g.edges.iter().map(|e| e.length()).collect();
    while let Some(Item(d, u)) = heap.pop() {
        if d > best[u] {
            continue;
        }
        if u == to {
            break;
        }
        for e in g.incident(u) {
            let edge = &g.edges[e];
            if !allowed.contains(&edge.label) || edge.is_self_loop() {
                continue;
            }
            let v = edge.other(u);
            let nd = d + lengths[e];
            if nd < best[v] {
                best[v] = nd;
                via[v] = Some(e);
                heap.push(Item(nd, v));
            }
        }
    }
    if !best[to].is_finite() {
        return None;
    }
    let mut chain = Vec::new();
    let mut cur = to;
    while cur != from {
        let e = via[cur]?;
        chain.push(e);
        cur = g.edges[e].other(cur);
    }
    chain.reverse();

    let mut path = GraphPath {
        nodes: vec![from],
        node_index: vec![0],
        ..Default::default()
    };
    let mut at = from;
    if chain.is_empty() {
        path.points.push(g.nodes[from].coords);
        path.ce_radius.push(None);
        path.mis_radius.push(None);
        path.labels.push(0);
    }
    for e in chain {
        let edge = if g.edges[e].nodes.0 == at {
            g.edges[e].clone()
        } else {
            g.edges[e].reversed()
        };
        let skip = usize::from(!path.points.is_empty());
        if skip == 1 {
            // the shared point now belongs to the following edge
            let relabeled = *path.labels.last().unwrap() != edge.label;
            *path.labels.last_mut().unwrap() = edge.label;
            if relabeled || path.ce_radius.last().unwrap().is_none() {
                *path.ce_radius.last_mut().unwrap() = edge.ce_radius[0];
                *path.mis_radius.last_mut().unwrap() = edge.mis_radius[0];
            }
        }
        for k in skip..edge.points.len() {
            path.points.push(edge.points[k]);
            path.ce_radius.push(edge.ce_radius[k]);
            path.mis_radius.push(edge.mis_radius[k]);
            path.labels.push(edge.label);
        }
        at = edge.nodes.1;
        path.nodes.push(at);
        path.node_index.push(path.points.len() - 1);
    }
    path.arc = cumulative(&path.points);
    Some(path)
}

/// Graph node where `other` joins `seg`: the boundary node on `seg` naming
/// `other`, else the bifurcation on `seg` named after `other`, else the
/// lowest-id node touched by edges of both labels.
pub fn attachment(g: &CenterlineGraph, x: &NodeExtraction, seg: Segment, other: Segment) -> Option<usize> {
    let rel = seg.relative_name(other);
    if let Some(n) = x.find(seg, &format!("{rel} boundary")) {
        return Some(n.id);
    }
    if let Some(n) = x.find(seg, &format!("{rel} bifurcation")) {
        return Some(n.id);
    }
    touching(g, seg.code(), other.code())
}

/// Lowest-id node incident to edges of both labels.
pub fn touching(g: &CenterlineGraph, a: u8, b: u8) -> Option<usize> {
    g.nodes.iter().map(|n| n.id).find(|&n| {
        let inc = g.incident(n);
        inc.iter().any(|&e| g.edges[e].label == a) && inc.iter().any(|&e| g.edges[e].label == b)
    })
}

/// Degree-1 node on an edge of `label` farthest (along edges of that
/// label) from `from`.
pub fn farthest_end(g: &CenterlineGraph, label: u8, from: usize) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for n in &g.nodes {
        if n.degree != 1 {
            continue;
        }
        let e = g.incident(n.id)[0];
        if g.edges[e].label != label {
            continue;
        }
        if let Some(p) = label_path(g, &[label], from, n.id) {
            if best.is_none_or(|(d, _)| p.length() > d) {
                best = Some((p.length(), n.id));
            }
        }
    }
    best.map(|(_, n)| n)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::graph;
    use super::*;

    fn chain() -> CenterlineGraph {
        graph(
            &[[0.0; 3], [2.0, 0.0, 0.0], [5.0, 0.0, 0.0], [5.0, 4.0, 0.0]],
            &[(0, 1, 1), (2, 1, 2), (2, 3, 2)],
        )
    }

    #[test]
    fn path_over_allowed_labels() {
        let g = chain();
        let p = label_path(&g, &[1, 2], 0, 3).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2, 3]);
        assert!((p.length() - 9.0).abs() < 1e-9);
        assert_eq!(p.points.len(), p.labels.len());
        assert_eq!(p.arc_of_label_start(2), Some(2.0));
        assert_eq!(p.arc_of_node(2), Some(5.0));
        assert!(label_path(&g, &[2], 0, 3).is_none());
        let r = p.reversed();
        assert_eq!(r.nodes, vec![3, 2, 1, 0]);
        assert_eq!(r.arc_of_node(1), Some(7.0));
        assert_eq!(r.arc_of_label_start(1), Some(7.0));
    }

    #[test]
    fn window_interpolates() {
        let g = chain();
        let p = label_path(&g, &[1, 2], 0, 3).unwrap();
        let w = p.window(1.1, 6.3);
        assert!((w.length() - 5.2).abs() < 1e-9);
        assert_eq!(w.points[0], [1.1, 0.0, 0.0]);
        let last = *w.points.last().unwrap();
        assert!((last[0] - 5.0).abs() < 1e-12 && (last[1] - 1.3).abs() < 1e-9);
        assert_eq!(p.window(0.0, p.length()).points, p.points);
    }

    #[test]
    fn farthest_end_and_touching() {
        let g = chain();
        assert_eq!(touching(&g, 1, 2), Some(1));
        assert_eq!(farthest_end(&g, 2, 1), Some(3));
        assert_eq!(farthest_end(&g, 1, 1), Some(0));
    }
}
