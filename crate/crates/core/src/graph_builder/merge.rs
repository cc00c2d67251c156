//! Splicing per-label graphs into the main graph.

use serde::Serialize;

use super::{CenterlineGraph, GraphEdge};
use crate::util::dist;

/// Largest gap bridged when snapping a part onto the main graph.
pub const SNAP_DISTANCE_MM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MergeReport {
    pub merged_labels: Vec<u8>,
    pub diagnostics: Vec<String>,
}

/// Replace the main graph's edges of each part's label by the part graph.
///
/// The splice sites are the main-graph nodes where edges of that label met
/// edges of other labels. Every splice site needs a part node within
/// `snap_mm`; that part node is replaced by the site. Otherwise the part is
/// skipped and a diagnostic recorded.
pub fn merge_single_label_graphs(
    main: &CenterlineGraph,
    parts: &[(u8, CenterlineGraph)],
    snap_mm: f64,
) -> (CenterlineGraph, MergeReport) {
    let mut g = main.clone();
    let mut report = MergeReport::default();
    for (label, part) in parts {
        let label = *label;
        if part.edges.is_empty() {
            continue;
        }
        let sites: Vec<usize> = g
            .nodes
            .iter()
            .filter(|n| {
                let inc = g.incident(n.id);
                inc.iter().any(|&e| g.edges[e].label == label)
                    && inc.iter().any(|&e| g.edges[e].label != label)
            })
            .map(|n| n.id)
            .collect();
        let mut mapping: Vec<Option<usize>> = vec![None; part.nodes.len()];
        let mut failed = None;
        for &site in &sites {
            let c = g.nodes[site].coords;
            let nearest = part
                .nodes
                .iter()
                .filter(|pn| pn.degree > 0 && mapping[pn.id].is_none())
                .map(|pn| (dist(pn.coords, c), pn.id))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match nearest {
                Some((d, pid)) if d <= snap_mm => mapping[pid] = Some(site),
                Some((d, _)) => {
                    failed = Some(format!(
                        "label {label}: no part node within {snap_mm} mm of node {site} (nearest {d:.3} mm)"
                    ));
                    break;
                }
                None => {
                    failed = Some(format!("label {label}: part has no nodes"));
                    break;
                }
            }
        }
        if let Some(msg) = failed {
            report.diagnostics.push(msg);
            continue;
        }

        g.remove_edges(|e| e.label == label);
        for pn in &part.nodes {
            if mapping[pn.id].is_none() && pn.degree > 0 {
                mapping[pn.id] = Some(g.add_node(pn.coords));
            }
        }
        for e in &part.edges {
            let (a, b) = (mapping[e.nodes.0].unwrap(), mapping[e.nodes.1].unwrap());
            let mut points = e.points.clone();
            let ca = g.nodes[a].coords;
            let cb = g.nodes[b].coords;
            points[0] = ca;
            let last = points.len() - 1;
            points[last] = cb;
            let mut ne = GraphEdge::new((a, b), points, label);
            ne.ce_radius = e.ce_radius.clone();
            ne.mis_radius = e.mis_radius.clone();
            g.add_edge(ne);
        }
        g.drop_isolated_nodes();
        report.merged_labels.push(label);
    }
    (g, report)
}
