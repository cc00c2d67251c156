//! Segment and subsegment definitions and their features.

use serde::Serialize;

use super::spline::fit_segment_spline_with;
use crate::anatomy::{Segment, Side, VesselKind};
use crate::graph_builder::paths::{farthest_end, label_path, touching, GraphPath};
use crate::graph_builder::{CenterlineGraph, NodeExtraction};
use crate::pipeline::Modality;
use crate::util::{dist, median};
use crate::variants::VariantReport;

/// Fallback lengths when the communicating artery is absent (mm).
pub const A1_FALLBACK_MM: f64 = 15.57;
pub const P1_FALLBACK_MM: f64 = 7.18;
pub const C7_FALLBACK_MM: f64 = 7.08;
/// Analysis cap for segments leaving the circle (mm).
pub const PERIPHERAL_CAP_MM: f64 = 10.0;
/// C6 cap in CTA, where the ICA enters the skull base (mm).
pub const C6_CTA_CAP_MM: f64 = 5.0;

/// A segment as a label-restricted path between two graph nodes, cut to
/// the arc range `[offset_mm, offset_mm + max_length_mm]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentDefinition {
    pub name: String,
    pub labels: Vec<u8>,
    pub from: usize,
    pub to: usize,
    pub offset_mm: f64,
    pub max_length_mm: Option<f64>,
    /// Peripheral truncation (5 or 10 mm), if any.
    pub cap_mm: Option<f64>,
    /// Bounded by a fallback length instead of an anatomical node.
    pub fallback: bool,
}

impl SegmentDefinition {
    fn bounded(name: String, label: u8, from: usize, to: usize) -> Self {
        SegmentDefinition {
            name,
            labels: vec![label],
            from,
            to,
            offset_mm: 0.0,
            max_length_mm: None,
            cap_mm: None,
            fallback: false,
        }
    }

    fn windowed(name: String, label: u8, from: usize, to: usize, offset: f64, len: f64, fallback: bool) -> Self {
        SegmentDefinition {
            offset_mm: offset,
            max_length_mm: Some(len),
            fallback,
            ..Self::bounded(name, label, from, to)
        }
    }

    fn capped(name: String, label: u8, from: usize, to: usize, offset: f64, cap: f64) -> Self {
        SegmentDefinition {
            cap_mm: Some(cap),
            ..Self::windowed(name, label, from, to, offset, cap, false)
        }
    }

    /// The polyline this definition selects, if the path exists.
    pub fn path(&self, g: &CenterlineGraph) -> Option<GraphPath> {
        let p = label_path(g, &self.labels, self.from, self.to)?;
        let end = match self.max_length_mm {
            Some(l) => self.offset_mm + l,
            None => p.length(),
        };
        if self.offset_mm == 0.0 && end >= p.length() {
            return Some(p);
        }
        if self.offset_mm >= p.length() {
            return None;
        }
        Some(p.window(self.offset_mm, end.min(p.length())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentFeatures {
    pub median_radius: Option<f64>,
    /// Spline arc length C (mm).
    pub length: f64,
    pub tortuosity: f64,
    pub volume: Option<f64>,
    pub mean_curvature: f64,
    /// Endpoint distance L (mm).
    pub chord: f64,
}

/// Features of one segment polyline. Radii of points inside the junction
/// blob of a path node of degree >= 3 (closer to it than their own radius)
/// are left out of the median.
pub fn compute_segment_features(g: &CenterlineGraph, def: &SegmentDefinition, knot_stride: usize) -> Option<SegmentFeatures> {
    let p = def.path(g)?;
    if p.points.len() < 2 {
        return None;
    }
    let junctions: Vec<_> = g
        .nodes
        .iter()
        .filter(|n| n.degree >= 3)
        .map(|n| n.coords)
        .filter(|c| p.points.iter().any(|q| dist(*q, *c) < 1e-9))
        .collect();
    Some(features_of_path(&p, &junctions, knot_stride))
}

pub(crate) fn features_of_path(p: &GraphPath, junctions: &[crate::volume_io::Vec3], knot_stride: usize) -> SegmentFeatures {
    let curve = fit_segment_spline_with(&p.points, knot_stride);
    let length = curve.arc_length();
    let chord = dist(p.points[0], *p.points.last().unwrap());
    let tortuosity = if chord > 0.0 { (length / chord - 1.0).max(0.0) } else { 0.0 };
    let n = p.points.len();
    let interior: Vec<f64> = (0..n)
        .filter(|&i| n <= 2 || (i > 0 && i + 1 < n))
        .filter_map(|i| {
            let r = p.ce_radius[i]?;
            let blob = junctions.iter().any(|&c| dist(c, p.points[i]) < r);
            (!blob).then_some(r)
        })
        .collect();
    let all: Vec<f64> = p.ce_radius.iter().flatten().copied().collect();
    let median_radius = median(&interior).or_else(|| median(&all));
    let mut volume = 0.0;
    let mut any = false;
    for i in 0..n - 1 {
        let (Some(a), Some(b)) = (p.ce_radius[i], p.ce_radius[i + 1]) else {
            continue;
        };
        any = true;
        volume += std::f64::consts::PI * 0.5 * (a * a + b * b) * dist(p.points[i], p.points[i + 1]);
    }
    SegmentFeatures {
        median_radius,
        length,
        tortuosity,
        volume: any.then_some(volume),
        mean_curvature: curve.mean_curvature(),
        chord,
    }
}

fn seg(kind: VesselKind, side: Side) -> Segment {
    Segment::sided(kind, side).expect("paired kind")
}

/// Node named `name` on `on`, if extracted.
fn named(x: &NodeExtraction, on: Segment, name: &str) -> Option<usize> {
    x.find(on, name).map(|n| n.id)
}

/// Where `other` branches off `on`: its bifurcation node, else its boundary
/// node, else any node shared by both labels.
pub(crate) fn junction_on(g: &CenterlineGraph, x: &NodeExtraction, on: Segment, other: Segment) -> Option<usize> {
    let rel = on.relative_name(other);
    named(x, on, &format!("{rel} bifurcation"))
        .or_else(|| named(x, on, &format!("{rel} boundary")))
        .or_else(|| touching(g, on.code(), other.code()))
}

/// Where `on` begins after `from`: its boundary node naming `from`, else a
/// shared node.
pub(crate) fn entry_of(g: &CenterlineGraph, x: &NodeExtraction, on: Segment, from: Segment) -> Option<usize> {
    named(x, on, &format!("{} boundary", on.relative_name(from))).or_else(|| touching(g, on.code(), from.code()))
}

/// Degree-1 node of label `on` farthest from `from`.
fn far_end(g: &CenterlineGraph, on: Segment, from: usize) -> Option<usize> {
    farthest_end(g, on.code(), from)
}

/// Proximal end of the ICA: its start node, else the farthest ICA end.
fn ica_start(g: &CenterlineGraph, x: &NodeExtraction, ica: Segment, from: usize) -> Option<usize> {
    x.on_segment(ica)
        .find(|n| n.name == "ICA start")
        .map(|n| n.id)
        .or_else(|| far_end(g, ica, from))
}

/// Segment definitions for every segment the graph supports.
pub fn define_subsegments(
    g: &CenterlineGraph,
    x: &NodeExtraction,
    variants: &VariantReport,
    modality: Modality,
) -> (Vec<SegmentDefinition>, Vec<String>) {
    let mut defs = Vec::new();
    let mut diag = Vec::new();
    let ba = Segment::Ba;

    // BA: 10 mm proximal from the bifurcation
    let ba_top = named(x, ba, "BA bifurcation")
        .or_else(|| named(x, ba, "R-PCA boundary"))
        .or_else(|| named(x, ba, "L-PCA boundary"))
        .or_else(|| touching(g, ba.code(), Segment::RPca.code()))
        .or_else(|| touching(g, ba.code(), Segment::LPca.code()));
    if let Some(top) = ba_top {
        let start = named(x, ba, "BA start").or_else(|| far_end(g, ba, top));
        match start {
            Some(s) => defs.push(SegmentDefinition::capped("BA".into(), ba.code(), top, s, 0.0, PERIPHERAL_CAP_MM)),
            None => diag.push("BA: no proximal end".into()),
        }
    }

    for side in [Side::Right, Side::Left] {
        let pre = side.prefix();
        let (pca, ica, pcom) = (seg(VesselKind::Pca, side), seg(VesselKind::Ica, side), seg(VesselKind::Pcom, side));
        let (mca, aca) = (seg(VesselKind::Mca, side), seg(VesselKind::Aca, side));
        let pcom_on = variants.pcom(side);

        // PCA: P1 and P2
        let pca_pcom = if pcom_on { junction_on(g, x, pca, pcom) } else { None };
        if variants.p1(side) {
            if let Some(from) = entry_of(g, x, pca, ba) {
                match (pca_pcom, far_end(g, pca, from)) {
                    (Some(to), end) => {
                        defs.push(SegmentDefinition::bounded(format!("{pre}-PCA P1"), pca.code(), from, to));
                        if let Some(e) = end.filter(|&e| e != to) {
                            defs.push(SegmentDefinition::capped(format!("{pre}-PCA P2"), pca.code(), to, e, 0.0, PERIPHERAL_CAP_MM));
                        }
                    }
                    (None, Some(e)) => {
                        defs.push(SegmentDefinition::windowed(
                            format!("{pre}-PCA P1"),
                            pca.code(),
                            from,
                            e,
                            0.0,
                            P1_FALLBACK_MM,
                            true,
                        ));
                        defs.push(SegmentDefinition::capped(
                            format!("{pre}-PCA P2"),
                            pca.code(),
                            from,
                            e,
                            P1_FALLBACK_MM,
                            PERIPHERAL_CAP_MM,
                        ));
                    }
                    (None, None) => diag.push(format!("{pre}-PCA: no distal end")),
                }
            } else {
                diag.push(format!("{pre}-PCA P1: no BA attachment"));
            }
        } else if let Some(from) = pca_pcom {
            // fetal origin: the PCA starts at the Pcom
            if let Some(e) = far_end(g, pca, from) {
                defs.push(SegmentDefinition::capped(format!("{pre}-PCA P2"), pca.code(), from, e, 0.0, PERIPHERAL_CAP_MM));
            }
        }

        // Pcom
        if pcom_on {
            let a = entry_of(g, x, pcom, ica);
            let b = entry_of(g, x, pcom, pca);
            match (a, b) {
                (Some(a), Some(b)) if a != b => {
                    defs.push(SegmentDefinition::bounded(format!("{pre}-Pcom"), pcom.code(), a, b))
                }
                _ => diag.push(format!("{pre}-Pcom: attachments not found")),
            }
        }

        // ICA: C7 and C6
        let ica_top = named(x, ica, "ICA bifurcation")
            .or_else(|| named(x, ica, "MCA boundary"))
            .or_else(|| named(x, ica, "ACA boundary"))
            .or_else(|| touching(g, ica.code(), mca.code()))
            .or_else(|| touching(g, ica.code(), aca.code()));
        let ica_pcom = if pcom_on { junction_on(g, x, ica, pcom) } else { None };
        let c6_cap = match modality {
            Modality::Cta => C6_CTA_CAP_MM,
            Modality::Mra => PERIPHERAL_CAP_MM,
        };
        if let Some(top) = ica_top {
            let start = ica_start(g, x, ica, top);
            match (ica_pcom, start) {
                (Some(pc), start) => {
                    defs.push(SegmentDefinition::bounded(format!("{pre}-ICA C7"), ica.code(), pc, top));
                    if let Some(s) = start.filter(|&s| s != pc) {
                        defs.push(SegmentDefinition::capped(format!("{pre}-ICA C6"), ica.code(), pc, s, 0.0, c6_cap));
                    }
                }
                (None, Some(s)) => {
                    defs.push(SegmentDefinition::windowed(
                        format!("{pre}-ICA C7"),
                        ica.code(),
                        top,
                        s,
                        0.0,
                        C7_FALLBACK_MM,
                        true,
                    ));
                    defs.push(SegmentDefinition::capped(format!("{pre}-ICA C6"), ica.code(), top, s, C7_FALLBACK_MM, c6_cap));
                }
                (None, None) => diag.push(format!("{pre}-ICA: no proximal end")),
            }
        }

        // MCA
        if let Some(from) = entry_of(g, x, mca, ica) {
            if let Some(e) = far_end(g, mca, from) {
                defs.push(SegmentDefinition::capped(format!("{pre}-MCA"), mca.code(), from, e, 0.0, PERIPHERAL_CAP_MM));
            }
        }

        // ACA: A1 and A2
        let aca_acom = if variants.anterior.acom {
            junction_on(g, x, aca, Segment::Acom)
        } else {
            None
        };
        if variants.a1(side) {
            if let Some(from) = entry_of(g, x, aca, ica) {
                match (aca_acom, far_end(g, aca, from)) {
                    (Some(to), end) => {
                        defs.push(SegmentDefinition::bounded(format!("{pre}-ACA A1"), aca.code(), from, to));
                        if let Some(e) = end.filter(|&e| e != to) {
                            defs.push(SegmentDefinition::capped(format!("{pre}-ACA A2"), aca.code(), to, e, 0.0, PERIPHERAL_CAP_MM));
                        }
                    }
                    (None, Some(e)) => {
                        defs.push(SegmentDefinition::windowed(
                            format!("{pre}-ACA A1"),
                            aca.code(),
                            from,
                            e,
                            0.0,
                            A1_FALLBACK_MM,
                            true,
                        ));
                        defs.push(SegmentDefinition::capped(
                            format!("{pre}-ACA A2"),
                            aca.code(),
                            from,
                            e,
                            A1_FALLBACK_MM,
                            PERIPHERAL_CAP_MM,
                        ));
                    }
                    (None, None) => diag.push(format!("{pre}-ACA: no distal end")),
                }
            }
        } else if let Some(from) = aca_acom {
            if let Some(e) = far_end(g, aca, from) {
                defs.push(SegmentDefinition::capped(format!("{pre}-ACA A2"), aca.code(), from, e, 0.0, PERIPHERAL_CAP_MM));
            }
        }
    }

    // Acom and 3rd-A2
    let acom = Segment::Acom;
    if variants.anterior.acom {
        let a = entry_of(g, x, acom, Segment::RAca);
        let b = entry_of(g, x, acom, Segment::LAca);
        match (a, b) {
            (Some(a), Some(b)) if a != b => defs.push(SegmentDefinition::bounded("Acom".into(), acom.code(), a, b)),
            _ => diag.push("Acom: attachments not found".into()),
        }
    }
    let third = Segment::ThirdA2;
    if variants.anterior.third_a2 {
        if let Some(from) = entry_of(g, x, third, acom) {
            if let Some(e) = far_end(g, third, from) {
                defs.push(SegmentDefinition::capped("3rd-A2".into(), third.code(), from, e, 0.0, PERIPHERAL_CAP_MM));
            }
        }
    }
    (defs, diag)
}
