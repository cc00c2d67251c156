//! Bifurcation angles and radius-based bifurcation features.

use serde::Serialize;

use super::exponent::solve_bifurcation_exponent;
use crate::anatomy::{Segment, Side, VesselKind};
use crate::graph_builder::paths::{farthest_end, label_path, GraphPath};
use crate::graph_builder::{AnatomicalNode, CenterlineGraph, NodeExtraction};
use crate::util::{angle_deg, sub};
use crate::volume_io::Vec3;

/// Arc distance of the direction points used for angles (mm).
pub const ANGLE_OFFSET_MM: f64 = 1.0;
/// Consecutive polyline radii averaged per radius sample.
pub const RADIUS_AVERAGE_COUNT: usize = 3;

/// The three incident edges of a bifurcation node and what they lead to.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRoles {
    pub node: usize,
    pub host: u8,
    pub parent: usize,
    pub child1: usize,
    pub child2: usize,
    pub child1_label: u8,
    pub child2_label: u8,
    /// Graph node the parent path runs towards.
    pub parent_target: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndividualRatios {
    /// r_p / r_c1
    pub p_c1: f64,
    /// r_p / r_c2
    pub p_c2: f64,
    /// r_c1 / r_c2
    pub c1_c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusFeatures {
    pub r_p: f64,
    pub r_c1: f64,
    pub r_c2: f64,
    pub individual_ratios: IndividualRatios,
    pub radius_sum_ratio: f64,
    pub area_sum_ratio: f64,
    pub exponent: Option<f64>,
    pub d1: f64,
    pub d2: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationFeatures {
    pub name: String,
    pub node: usize,
    pub coords: Vec3,
    /// (parent, c1), (parent, c2), (c1, c2) in degrees.
    pub angles: [f64; 3],
    pub radius: Option<RadiusFeatures>,
    pub support_flags: Vec<String>,
}

/// Label an incident edge leads to: its own label, or for a short stub of
/// the host label the label beyond its degree-2 boundary node.
fn beyond(g: &CenterlineGraph, node: usize, e: usize, host: u8) -> (u8, Option<usize>) {
    let edge = &g.edges[e];
    if edge.label != host {
        return (edge.label, None);
    }
    let m = edge.other(node);
    if g.nodes[m].degree == 2 {
        for f in g.incident(m) {
            if f != e && g.edges[f].label != host {
                return (g.edges[f].label, Some(m));
            }
        }
    }
    (host, None)
}

/// First edge of the shortest `labels` path from `node` to `target`.
fn first_edge_towards(g: &CenterlineGraph, labels: &[u8], node: usize, target: usize) -> Option<usize> {
    let p = label_path(g, labels, node, target)?;
    let next = *p.nodes.get(1)?;
    g.incident(node)
        .into_iter()
        .filter(|&e| g.edges[e].other(node) == next && labels.contains(&g.edges[e].label))
        .min_by(|&a, &b| g.edges[a].length().total_cmp(&g.edges[b].length()))
}

/// Work out parent and children of a named bifurcation node. Major
/// bifurcations have one host-labeled branch (the parent); at Pcom and
/// Acom bifurcations the parent is the host branch leading towards
/// `upstream`.
pub fn bifurcation_roles(g: &CenterlineGraph, x: &NodeExtraction, bif: &AnatomicalNode) -> Option<BranchRoles> {
    let host = bif.label;
    let seg = bif.segment();
    let inc = g.incident(bif.id);
    if inc.len() != 3 {
        return None;
    }
    let kinds: Vec<(usize, u8)> = inc.iter().map(|&e| (e, beyond(g, bif.id, e, host).0)).collect();
    let hosts: Vec<usize> = kinds.iter().filter(|k| k.1 == host).map(|k| k.0).collect();
    let others: Vec<(usize, u8)> = kinds.iter().filter(|k| k.1 != host).copied().collect();
    let start_of = |s: Segment, name: &str| x.find(s, name).map(|n| n.id);
    match (hosts.len(), others.len()) {
        (1, 2) => {
            let (mut c1, mut c2) = (others[0], others[1]);
            // fixed child order: R before L, MCA before ACA
            let rank = |l: u8| match Segment::from_code(l).map(|s| (s.kind(), s.side())) {
                Some((_, Some(Side::Right))) if seg == Segment::Ba => 0,
                Some((VesselKind::Mca, _)) => 0,
                _ => 1,
            };
            if rank(c1.1) > rank(c2.1) {
                std::mem::swap(&mut c1, &mut c2);
            }
            let target = match seg.kind() {
                VesselKind::Ba => start_of(seg, "BA start"),
                VesselKind::Ica => start_of(seg, "ICA start"),
                _ => None,
            }
            .or_else(|| farthest_end(g, host, bif.id));
            Some(BranchRoles {
                node: bif.id,
                host,
                parent: hosts[0],
                child1: c1.0,
                child2: c2.0,
                child1_label: c1.1,
                child2_label: c2.1,
                parent_target: target,
            })
        }
        (2, 1) => {
            let side = seg.side()?;
            // upstream neighbour of the host along the circle
            let (toward, labels): (Option<usize>, Vec<u8>) = match seg.kind() {
                VesselKind::Pca => (
                    crate::graph_builder::paths::touching(g, host, Segment::Ba.code()),
                    vec![host],
                ),
                VesselKind::Ica => (
                    start_of(seg, "ICA start").or_else(|| farthest_end(g, host, bif.id)),
                    vec![host],
                ),
                VesselKind::Aca => (
                    crate::graph_builder::paths::touching(g, host, Segment::sided(VesselKind::Ica, side)?.code()),
                    vec![host],
                ),
                _ => (None, vec![host]),
            };
            let toward = toward?;
            let parent = first_edge_towards(g, &labels, bif.id, toward).filter(|e| hosts.contains(e))?;
            let cont = *hosts.iter().find(|&&e| e != parent)?;
            Some(BranchRoles {
                node: bif.id,
                host,
                parent,
                child1: cont,
                child2: others[0].0,
                child1_label: host,
                child2_label: others[0].1,
                parent_target: Some(toward),
            })
        }
        _ => None,
    }
}

/// Direction point at arc distance `offset` along edge `e` from `node`;
/// the flag is set when the edge is shorter and its far end is used.
fn direction_point(g: &CenterlineGraph, node: usize, e: usize, offset: f64) -> (Vec3, bool) {
    let pts = g.edges[e].points_from(node);
    let arc = crate::graph_builder::paths::cumulative(&pts);
    let total = *arc.last().unwrap_or(&0.0);
    if total < offset {
        return (*pts.last().unwrap(), true);
    }
    let i = arc.partition_point(|&a| a < offset).max(1);
    let seg = arc[i] - arc[i - 1];
    let f = if seg > 0.0 { (offset - arc[i - 1]) / seg } else { 0.0 };
    ([0, 1, 2].map(|c| pts[i - 1][c] + f * (pts[i][c] - pts[i - 1][c])), false)
}

/// Angles between the branch directions at `offset` mm from the node:
/// (parent, c1), (parent, c2), (c1, c2). The flag reports a reduced offset.
pub fn compute_bifurcation_angles(g: &CenterlineGraph, roles: &BranchRoles, offset: f64) -> ([f64; 3], bool) {
    let o = g.nodes[roles.node].coords;
    let (p, rp) = direction_point(g, roles.node, roles.parent, offset);
    let (c1, r1) = direction_point(g, roles.node, roles.child1, offset);
    let (c2, r2) = direction_point(g, roles.node, roles.child2, offset);
    let (vp, v1, v2) = (sub(p, o), sub(c1, o), sub(c2, o));
    ([angle_deg(vp, v1), angle_deg(vp, v2), angle_deg(v1, v2)], rp || r1 || r2)
}

/// Mean of `RADIUS_AVERAGE_COUNT` consecutive radii of points labeled
/// `label`, centred on the one nearest to arc length `s` and kept inside
/// that point's label run.
pub(crate) fn sample_radius(p: &GraphPath, s: f64, label: u8) -> Option<f64> {
    let candidates: Vec<usize> = (0..p.points.len())
        .filter(|&i| p.labels[i] == label && p.ce_radius[i].is_some())
        .collect();
    let &i = candidates
        .iter()
        .min_by(|&&a, &&b| (p.arc[a] - s).abs().total_cmp(&(p.arc[b] - s).abs()))?;
    let ok = |j: usize| p.labels[j] == label && p.ce_radius[j].is_some();
    let (mut lo, mut hi) = (i, i);
    let half = RADIUS_AVERAGE_COUNT / 2;
    for _ in 0..half {
        if lo > 0 && ok(lo - 1) {
            lo -= 1;
        }
        if hi + 1 < p.points.len() && ok(hi + 1) {
            hi += 1;
        }
    }
    // shift inwards at the end of a run
    while hi - lo + 1 < RADIUS_AVERAGE_COUNT {
        if hi + 1 < p.points.len() && ok(hi + 1) {
            hi += 1;
        } else if lo > 0 && ok(lo - 1) {
            lo -= 1;
        } else {
            break;
        }
    }
    let vals: Vec<f64> = (lo..=hi).filter_map(|j| p.ce_radius[j]).collect();
    Some(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Radius sampling at D = max(d1, d2): d_k is the arc distance from the
/// node to child k's boundary node.
pub fn compute_bifurcation_radius_features(
    g: &CenterlineGraph,
    roles: &BranchRoles,
) -> Result<RadiusFeatures, String> {
    let n = roles.node;
    let child = |e: usize, label: u8| -> Result<(f64, GraphPath), String> {
        let (_, boundary) = beyond(g, n, e, roles.host);
        let edge = &g.edges[e];
        let d = if boundary.is_some() { edge.length() } else { 0.0 };
        let entry = boundary.unwrap_or_else(|| edge.other(n));
        let end = farthest_end(g, label, entry).ok_or_else(|| format!("no distal end on label {label}"))?;
        let p = label_path(g, &[roles.host, label], n, end).ok_or("child path not found")?;
        Ok((d, p))
    };
    let (d1, p1) = child(roles.child1, roles.child1_label)?;
    let (d2, p2) = child(roles.child2, roles.child2_label)?;
    let big_d = d1.max(d2);
    let target = roles.parent_target.ok_or("no parent target")?;
    let pp = label_path(g, &[roles.host], n, target).ok_or("parent path not found")?;
    let r_p = sample_radius(&pp, big_d, roles.host).ok_or("parent radius missing")?;
    let r_c1 = sample_radius(&p1, big_d, roles.child1_label).ok_or("child 1 radius missing")?;
    let r_c2 = sample_radius(&p2, big_d, roles.child2_label).ok_or("child 2 radius missing")?;
    Ok(radius_features(r_p, r_c1, r_c2, d1, d2))
}

/// Ratios and exponent from three radii.
pub fn radius_features(r_p: f64, r_c1: f64, r_c2: f64, d1: f64, d2: f64) -> RadiusFeatures {
    RadiusFeatures {
        r_p,
        r_c1,
        r_c2,
        individual_ratios: IndividualRatios {
            p_c1: r_p / r_c1,
            p_c2: r_p / r_c2,
            c1_c2: r_c1 / r_c2,
        },
        radius_sum_ratio: r_p / (r_c1 + r_c2),
        area_sum_ratio: r_p * r_p / (r_c1 * r_c1 + r_c2 * r_c2),
        exponent: solve_bifurcation_exponent(r_p, r_c1, r_c2).ok(),
        d1,
        d2,
        n: RADIUS_AVERAGE_COUNT,
    }
}

/// Named major (BA, ICA) and minor (Pcom, Acom) bifurcations.
pub fn bifurcation_nodes(x: &NodeExtraction) -> Vec<(String, &AnatomicalNode, bool)> {
    let mut out = Vec::new();
    for n in &x.nodes {
        let seg = n.segment();
        let entry = match (seg.kind(), n.name.as_str()) {
            (VesselKind::Ba, "BA bifurcation") => Some(("BA bifurcation".to_string(), true)),
            (VesselKind::Ica, "ICA bifurcation") => Some((format!("{} bifurcation", seg.name()), true)),
            (VesselKind::Ica | VesselKind::Pca, "Pcom bifurcation") => {
                Some((format!("{} Pcom bifurcation", seg.name()), false))
            }
            (VesselKind::Aca, "Acom bifurcation") => Some((format!("{} Acom bifurcation", seg.name()), false)),
            _ => None,
        };
        if let Some((name, major)) = entry {
            out.push((name, n, major));
        }
    }
    out
}

/// Features of every named bifurcation; radius features for major ones
/// only.
pub fn compute_bifurcations(g: &CenterlineGraph, x: &NodeExtraction, offset: f64) -> (Vec<BifurcationFeatures>, Vec<String>) {
    let mut out = Vec::new();
    let mut diag = Vec::new();
    for (name, node, major) in bifurcation_nodes(x) {
        let Some(roles) = bifurcation_roles(g, x, node) else {
            diag.push(format!("{name}: branch roles not identified"));
            continue;
        };
        let (angles, reduced) = compute_bifurcation_angles(g, &roles, offset);
        let mut flags = Vec::new();
        if reduced {
            flags.push("reduced_offset".to_string());
        }
        let radius = if major {
            match compute_bifurcation_radius_features(g, &roles) {
                Ok(r) => {
                    if r.exponent.is_none() {
                        let why = solve_bifurcation_exponent(r.r_p, r.r_c1, r.r_c2).err().map(|e| e.to_string());
                        flags.push(format!("no_exponent: {}", why.unwrap_or_default()));
                    }
                    Some(r)
                }
                Err(e) => {
                    flags.push(format!("radius_missing: {e}"));
                    diag.push(format!("{name}: {e}"));
                    None
                }
            }
        } else {
            None
        };
        out.push(BifurcationFeatures {
            name,
            node: node.id,
            coords: node.coords,
            angles,
            radius,
            support_flags: flags,
        });
    }
    (out, diag)
}
