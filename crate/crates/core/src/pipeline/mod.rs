//! End-to-end processing from a labeled mask to graph, features, variants
//! and the exported bundle.

mod config;
pub mod export;

pub use config::{Modality, Mode, PipelineConfig};

use std::path::Path;

use thiserror::Error;

use crate::connector::{connect_all_with_field, transfer_labels, ConnectError, ConnectReport};
use crate::graph_builder::{
    build_graph, extract_anatomical_nodes, merge_single_label_graphs, remove_spurious_edges, trim_and_smooth,
    CenterlineGraph, NodeExtraction,
};
use crate::morphometry::{compute_features_with, FeatureReport};
use crate::radii::annotate_radii;
use crate::skeletonizer::{prune_spurs, thin_mask, Skeleton};
use crate::variants::{classify_variants, FetalDecision, VariantReport};
use crate::volume_io::{
    euclidean_distance_field, filter_small_components, read_nifti_file, resample_nearest, write_nifti_file,
    AnyVolume, DistanceField, LabeledMask, NiftiError, VolumeError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse_nifti: {0}")]
    Parse(#[from] NiftiError),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

/// Read a mask file and check its labels.
pub fn load_mask(path: &Path) -> Result<LabeledMask, PipelineError> {
    let v = read_nifti_file(path)?;
    LabeledMask::from_any(&v).map_err(|e| PipelineError::stage("load_mask", e))
}

/// Read a skeleton file; any nonzero voxel is skeleton.
pub fn load_skeleton(path: &Path) -> Result<Skeleton, PipelineError> {
    let v = read_nifti_file(path)?;
    let data: Vec<u8> = v.to_rounded_i64().into_iter().map(|x| u8::from(x != 0)).collect();
    let vol = crate::volume_io::Volume::new(v.grid().clone(), data).map_err(|e: VolumeError| PipelineError::stage("load_skeleton", e))?;
    Ok(Skeleton::new(vol))
}

/// Resample to the working spacing (when it differs) and drop small
/// disconnected components.
pub fn prepare_mask(m: &LabeledMask, cfg: &PipelineConfig) -> LabeledMask {
    let t = cfg.target_spacing;
    let s = m.grid().spacing;
    let resampled = if s.iter().all(|&x| (x - t).abs() <= 1e-6 * t) {
        m.clone()
    } else {
        resample_nearest(m, [t; 3])
    };
    filter_small_components(&resampled, cfg.filter_rel_diag)
}

/// Thin the binarized mask and prune spurs.
pub fn skeletonize(m: &LabeledMask, field: &DistanceField, cfg: &PipelineConfig) -> Skeleton {
    let thin = thin_mask(&m.binary());
    prune_spurs(&thin, cfg.bulge_size, field)
}

/// Transfer labels onto the skeleton and reconnect its fragments.
pub fn connect(
    s: &Skeleton,
    m: &LabeledMask,
    field: &DistanceField,
    cfg: &PipelineConfig,
) -> Result<ConnectReport, ConnectError> {
    let labeled = transfer_labels(s, m)?;
    connect_all_with_field(&labeled, m, field, &cfg.astar())
}

/// Graph stage output.
#[derive(Debug, Clone)]
pub struct GraphStage {
    pub graph: CenterlineGraph,
    pub nodes: NodeExtraction,
    pub diagnostics: Vec<String>,
}

/// Labeled skeleton to an annotated, cleaned and smoothed graph with
/// named nodes.
pub fn graph_stage(s: &Skeleton, m: &LabeledMask, field: &DistanceField, cfg: &PipelineConfig) -> GraphStage {
    let mut diagnostics = Vec::new();
    let mut g = build_graph(s);
    if !cfg.merge_labels.is_empty() {
        let parts: Vec<(u8, CenterlineGraph)> = cfg
            .merge_labels
            .iter()
            .map(|&l| {
                let data: Vec<u8> = s.volume().data().iter().map(|&v| if v == l { v } else { 0 }).collect();
                let part = Skeleton::new(s.volume().with_data(data).expect("same grid"));
                (l, build_graph(&part))
            })
            .collect();
        let (merged, report) = merge_single_label_graphs(&g, &parts, cfg.snap_mm);
        diagnostics.extend(report.diagnostics);
        g = merged;
    }
    let g = remove_spurious_edges(&g, field, &cfg.rules);
    let g = trim_and_smooth(&g, field, cfg.window, cfg.trim_cap_mm);
    let (g, radius_diag) = annotate_radii(&g, m);
    diagnostics.extend(radius_diag);
    let nodes = extract_anatomical_nodes(&g);
    diagnostics.extend(nodes.diagnostics.iter().cloned());
    GraphStage {
        graph: g,
        nodes,
        diagnostics,
    }
}

/// Everything computed for one case.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub mask: LabeledMask,
    pub skeleton: Skeleton,
    pub connect: ConnectReport,
    pub graph: CenterlineGraph,
    pub nodes: NodeExtraction,
    pub variants: VariantReport,
    pub fetal: [FetalDecision; 2],
    pub features: FeatureReport,
    pub diagnostics: Vec<String>,
}

/// Run every stage on an in-memory mask, optionally with an external
/// skeleton on the same (pre-resampling) grid.
pub fn process_mask(
    mask: &LabeledMask,
    skeleton: Option<&Skeleton>,
    cfg: &PipelineConfig,
) -> Result<CaseResult, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let m = prepare_mask(mask, cfg);
    if m.volume().count_nonzero() == 0 {
        return Err(PipelineError::stage("prepare_mask", "mask is empty"));
    }
    let field = euclidean_distance_field(&m.binary());
    let raw = match (cfg.mode, skeleton) {
        (Mode::ReferenceThinning, _) => skeletonize(&m, &field, cfg),
        (Mode::ExternalSkeleton, Some(s)) => {
            s.grid()
                .ensure_same_lattice(mask.grid())
                .map_err(|e| PipelineError::stage("load_skeleton", e))?;
            resample_skeleton(s, &m)
        }
        (Mode::ExternalSkeleton, None) => {
            return Err(PipelineError::Config("external-skeleton mode needs a skeleton".into()))
        }
    };
    let report = connect(&raw, &m, &field, cfg).map_err(|e| PipelineError::stage("connect_all", e))?;
    let gs = graph_stage(&report.skeleton, &m, &field, cfg);
    let (variants, fetal) = classify_variants(&m, &gs.graph);
    let features = compute_features_with(&gs.graph, &gs.nodes, &variants, cfg.modality, cfg.knot_stride);
    let mut diagnostics = gs.diagnostics;
    diagnostics.extend(features.diagnostics.iter().cloned());
    for (d, side) in fetal.iter().zip(["R", "L"]) {
        if d.low_support {
            diagnostics.push(format!("{side}-PCA fetal decision has low P1 support"));
        }
    }
    Ok(CaseResult {
        mask: m,
        skeleton: report.skeleton.clone(),
        connect: report,
        graph: gs.graph,
        nodes: gs.nodes,
        variants,
        fetal,
        features,
        diagnostics,
    })
}

/// Move an external skeleton onto the working grid of `m`: each skeleton
/// voxel marks the working voxel containing its centre.
fn resample_skeleton(s: &Skeleton, m: &LabeledMask) -> Skeleton {
    let g = m.grid();
    if s.grid().same_lattice(g, 1e-6) {
        return s.clone();
    }
    let mut data = vec![0u8; g.len()];
    for i in s.voxels() {
        if let Some(j) = g.nearest_voxel(s.grid().world_of_index(i)) {
            data[j] = 1;
        }
    }
    Skeleton::new(crate::volume_io::Volume::new(g.clone(), data).expect("sized to grid"))
}

/// Run the pipeline on files and write the output bundle to `cfg.outdir`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    mask_path: &Path,
    skeleton_path: Option<&Path>,
) -> Result<CaseResult, PipelineError> {
    let mask = load_mask(mask_path)?;
    let skel = skeleton_path.map(load_skeleton).transpose()?;
    let result = process_mask(&mask, skel.as_ref(), cfg)?;
    write_bundle(&result, &cfg.outdir)?;
    Ok(result)
}

/// Write graph.vtk, nodes.json, variants.json, features.json and
/// skeleton.nii into `dir`.
pub fn write_bundle(r: &CaseResult, dir: &Path) -> Result<(), PipelineError> {
    let io = |name: &str| {
        let path = dir.join(name).display().to_string();
        move |source| PipelineError::Io { path, source }
    };
    export::export_vtk_polydata(&r.graph, &dir.join("graph.vtk")).map_err(io("graph.vtk"))?;
    export::export_node_json(&r.nodes.nodes, &dir.join("nodes.json")).map_err(io("nodes.json"))?;
    export::export_variant_json(&r.variants, &dir.join("variants.json")).map_err(io("variants.json"))?;
    export::export_feature_json(&r.features, &dir.join("features.json")).map_err(io("features.json"))?;
    write_skeleton(&r.skeleton, &dir.join("skeleton.nii"))?;
    Ok(())
}

pub fn write_skeleton(s: &Skeleton, path: &Path) -> Result<(), PipelineError> {
    write_nifti_file(path, &AnyVolume::U8(s.volume().clone())).map_err(PipelineError::from)
}
