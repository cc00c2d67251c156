//! Segment and bifurcation morphometry on a labeled centerline graph.

mod bifurcations;
pub mod exponent;
pub mod segments;
pub mod spline;

use serde::Serialize;

pub use bifurcations::{
    bifurcation_roles, compute_bifurcation_angles, compute_bifurcation_radius_features, compute_bifurcations,
    radius_features, BifurcationFeatures, BranchRoles, IndividualRatios, RadiusFeatures, ANGLE_OFFSET_MM,
    RADIUS_AVERAGE_COUNT,
};
pub use exponent::{solve_bifurcation_exponent, NoExponent, EXPONENT_BRACKET};
pub use segments::{compute_segment_features, define_subsegments, SegmentDefinition, SegmentFeatures};
pub use spline::{fit_segment_spline, fit_segment_spline_with, BSpline, SegmentCurve, KNOT_STRIDE};

use crate::graph_builder::{CenterlineGraph, NodeExtraction};
use crate::pipeline::Modality;
use crate::variants::VariantReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRecord {
    pub name: String,
    pub features: Option<SegmentFeatures>,
    pub fallback: bool,
    pub cap_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FeatureReport {
    pub segments: Vec<SegmentRecord>,
    pub bifurcations: Vec<BifurcationFeatures>,
    pub diagnostics: Vec<String>,
}

impl FeatureReport {
    pub fn segment(&self, name: &str) -> Option<&SegmentFeatures> {
        self.segments.iter().find(|s| s.name == name)?.features.as_ref()
    }

    pub fn bifurcation(&self, name: &str) -> Option<&BifurcationFeatures> {
        self.bifurcations.iter().find(|b| b.name == name)
    }
}

pub fn compute_features(
    g: &CenterlineGraph,
    x: &NodeExtraction,
    variants: &VariantReport,
    modality: Modality,
) -> FeatureReport {
    compute_features_with(g, x, variants, modality, KNOT_STRIDE)
}

pub fn compute_features_with(
    g: &CenterlineGraph,
    x: &NodeExtraction,
    variants: &VariantReport,
    modality: Modality,
    knot_stride: usize,
) -> FeatureReport {
    let (defs, mut diagnostics) = define_subsegments(g, x, variants, modality);
    let segments = defs
        .iter()
        .map(|d| {
            let features = compute_segment_features(g, d, knot_stride);
            if features.is_none() {
                diagnostics.push(format!("{}: no usable path", d.name));
            }
            SegmentRecord {
                name: d.name.clone(),
                features,
                fallback: d.fallback,
                cap_mm: d.cap_mm,
            }
        })
        .collect();
    let (bifurcations, diag) = compute_bifurcations(g, x, ANGLE_OFFSET_MM);
    diagnostics.extend(diag);
    FeatureReport {
        segments,
        bifurcations,
        diagnostics,
    }
}
