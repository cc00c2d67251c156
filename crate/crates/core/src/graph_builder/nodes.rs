//! Anatomical node taxonomy on a labeled centerline graph.

use serde::Serialize;

use super::CenterlineGraph;
use crate::anatomy::{Segment, VesselKind};
use crate::volume_io::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Start,
    End,
    Bifurcation,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnatomicalNode {
    /// Id of the graph node this sits on.
    pub id: usize,
    pub degree: usize,
    pub label: u8,
    pub node_type: NodeType,
    pub coords: Vec3,
    pub name: String,
}

impl AnatomicalNode {
    pub fn segment(&self) -> Segment {
        Segment::from_code(self.label).expect("node label is a segment code")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NodeExtraction {
    pub nodes: Vec<AnatomicalNode>,
    pub diagnostics: Vec<String>,
}

impl NodeExtraction {
    /// First node with the given segment and name.
    pub fn find(&self, segment: Segment, name: &str) -> Option<&AnatomicalNode> {
        self.nodes
            .iter()
            .find(|n| n.label == segment.code() && n.name == name)
    }

    pub fn on_segment(&self, segment: Segment) -> impl Iterator<Item = &AnatomicalNode> {
        self.nodes.iter().filter(move |n| n.label == segment.code())
    }
}

/// Name the anatomically meaningful nodes of `g`.
///
/// Degree-1 nodes become starts (BA, ICA) or ends; degree-2 nodes between
/// two labels become a boundary node on each side; degree-3 nodes are
/// classified from the labels of their branches, looking through a short
/// same-label stub to the label beyond its boundary node when needed.
/// Nodes that fit no vocabulary entry are reported in `diagnostics`.
pub fn extract_anatomical_nodes(g: &CenterlineGraph) -> NodeExtraction {
    let mut out = NodeExtraction::default();
    for node in &g.nodes {
        let inc = g.incident(node.id);
        let labels: Vec<u8> = inc.iter().map(|&e| g.edges[e].label).collect();
        let segs: Option<Vec<Segment>> = labels.iter().map(|&l| Segment::from_code(l)).collect();
        let Some(segs) = segs else {
            out.diagnostics
                .push(format!("node {}: unknown label among {labels:?}", node.id));
            continue;
        };
        let mut emit = |seg: Segment, node_type: NodeType, name: String| {
            if seg.node_vocabulary().contains(&name.as_str()) {
                out.nodes.push(AnatomicalNode {
                    id: node.id,
                    degree: node.degree,
                    label: seg.code(),
                    node_type,
                    coords: node.coords,
                    name,
                });
                true
            } else {
                false
            }
        };
        match node.degree {
            0 => {}
            1 => {
                let s = segs[0];
                let (t, word) = match s.kind() {
                    VesselKind::Ba | VesselKind::Ica => (NodeType::Start, "start"),
                    _ => (NodeType::End, "end"),
                };
                let name = format!("{} {word}", s.kind().name());
                if !emit(s, t, name) {
                    out.diagnostics
                        .push(format!("node {}: dangling {} end", node.id, s.name()));
                }
            }
            2 => {
                let (a, b) = (segs[0], segs[1]);
                if a == b {
                    continue;
                }
                let ok_a = emit(a, NodeType::Boundary, format!("{} boundary", a.relative_name(b)));
                let ok_b = emit(b, NodeType::Boundary, format!("{} boundary", b.relative_name(a)));
                if !(ok_a && ok_b) {
                    out.diagnostics.push(format!(
                        "node {}: {} meets {} (not adjacent)",
                        node.id,
                        a.name(),
                        b.name()
                    ));
                }
            }
            3 => match classify_junction(g, node.id, &inc) {
                Some((seg, name)) => {
                    emit(seg, NodeType::Bifurcation, name);
                }
                None => {
                    let names: Vec<&str> = segs.iter().map(|s| s.name()).collect();
                    out.diagnostics.push(format!(
                        "node {}: unclassified junction of {}",
                        node.id,
                        names.join(", ")
                    ));
                }
            },
            d => out
                .diagnostics
                .push(format!("node {}: degree {d} junction not named", node.id)),
        }
    }
    out.nodes.sort_by(|a, b| {
        (a.label, &a.name, a.id).cmp(&(b.label, &b.name, b.id))
    });
    out
}

/// Label seen along edge `e` away from `node`: if `e` ends in a boundary
/// node, the label on the other side of it.
fn label_beyond(g: &CenterlineGraph, node: usize, e: usize) -> Option<u8> {
    let far = g.edges[e].other(node);
    if far == node || g.nodes[far].degree != 2 {
        return None;
    }
    let next = g.incident(far).into_iter().find(|&x| x != e)?;
    let l = g.edges[next].label;
    (l != g.edges[e].label).then_some(l)
}

/// Segment and bifurcation name for a degree-3 node.
fn classify_junction(g: &CenterlineGraph, node: usize, inc: &[usize]) -> Option<(Segment, String)> {
    let raw: Vec<u8> = inc.iter().map(|&e| g.edges[e].label).collect();
    if let Some(hit) = bifurcation_name(&raw) {
        return Some(hit);
    }
    // Substitute look-through labels on as few branches as possible.
    let beyond: Vec<Option<u8>> = inc.iter().map(|&e| label_beyond(g, node, e)).collect();
    for size in 1..=inc.len() {
        for mask in 0u32..(1 << inc.len()) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut labels = raw.clone();
            let mut valid = true;
            for k in 0..inc.len() {
                if mask & (1 << k) != 0 {
                    match beyond[k] {
                        Some(l) => labels[k] = l,
                        None => valid = false,
                    }
                }
            }
            if valid {
                if let Some(hit) = bifurcation_name(&labels) {
                    return Some(hit);
                }
            }
        }
    }
    None
}

/// Bifurcation named by three branch labels, if any.
fn bifurcation_name(labels: &[u8]) -> Option<(Segment, String)> {
    let segs: Vec<Segment> = labels
        .iter()
        .map(|&l| Segment::from_code(l))
        .collect::<Option<_>>()?;
    if segs.len() != 3 {
        return None;
    }
    let mut sorted = segs.clone();
    sorted.sort();
    if sorted == [Segment::Ba, Segment::RPca, Segment::LPca] {
        return Some((Segment::Ba, "BA bifurcation".into()));
    }
    for side in [crate::anatomy::Side::Right, crate::anatomy::Side::Left] {
        let ica = Segment::sided(VesselKind::Ica, side)?;
        let mca = Segment::sided(VesselKind::Mca, side)?;
        let aca = Segment::sided(VesselKind::Aca, side)?;
        let mut want = [ica, mca, aca];
        want.sort();
        if sorted == want {
            return Some((ica, "ICA bifurcation".into()));
        }
    }
    // Two branches of the host segment plus one side branch.
    for &host in &sorted {
        if sorted.iter().filter(|&&s| s == host).count() != 2 {
            continue;
        }
        let branch = *sorted.iter().find(|&&s| s != host)?;
        let name = format!("{} bifurcation", host.relative_name(branch));
        if host.node_vocabulary().contains(&name.as_str())
            && crate::anatomy::segments_adjacent(host, branch)
        {
            return Some((host, name));
        }
    }
    None
}
