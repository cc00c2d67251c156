//! Metrics comparing predicted and reference skeletons, nodes, variants and
//! features.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::graph_builder::{build_graph, AnatomicalNode};
use crate::skeletonizer::Skeleton;
use crate::util::{dist, mean, median, percentile, std_dev};
use crate::variants::VariantReport;
use crate::volume_io::{count_components, euclidean_distance_field, Volume, VolumeError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Grid(#[from] VolumeError),
    #[error("{what}: {pred} predicted vs {reference} reference entries")]
    LengthMismatch {
        what: &'static str,
        pred: usize,
        reference: usize,
    },
}

fn check_grids(a: &Volume<u8>, b: &Volume<u8>) -> Result<(), EvalError> {
    if a.dims() != b.dims() {
        return Err(VolumeError::GridMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())).into());
    }
    a.grid().ensure_same_lattice(b.grid())?;
    Ok(())
}

/// 2|a ∩ b| / (|a| + |b|) over nonzero voxels; two empty volumes give 1.
pub fn dice(a: &Volume<u8>, b: &Volume<u8>) -> Result<f64, EvalError> {
    check_grids(a, b)?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += usize::from(x != 0);
        nb += usize::from(y != 0);
        both += usize::from(x != 0 && y != 0);
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Difference in 26-connected component counts.
pub fn betti0_error(a: &Volume<u8>, b: &Volume<u8>) -> Result<usize, EvalError> {
    check_grids(a, b)?;
    Ok(count_components(a).abs_diff(count_components(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thickness {
    pub mean: f64,
    pub p99: f64,
}

/// Thickness of a skeleton: the skeleton is traced into a graph and every
/// polyline point gets the distance to the nearest voxel outside the
/// skeleton as its radius. A one-voxel-wide line therefore measures one
/// voxel spacing. Isolated voxels without edges count by themselves.
pub fn skeleton_thickness(s: &Skeleton) -> Option<Thickness> {
    let field = euclidean_distance_field(s.volume());
    let g = build_graph(s);
    let mut seen = std::collections::HashSet::new();
    let mut radii = Vec::new();
    for e in &g.edges {
        for p in &e.points {
            if let Some(i) = s.grid().nearest_voxel(*p) {
                if seen.insert(i) {
                    radii.push(field.at(i));
                }
            }
        }
    }
    for i in s.voxels() {
        if seen.insert(i) && g.edges.is_empty() {
            radii.push(field.at(i));
        }
    }
    Some(Thickness {
        mean: mean(&radii)?,
        p99: percentile(&radii, 99.0)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeCategory {
    MajorBifurcations,
    MinorBifurcations,
    BoundaryPoints,
}

/// Category of a node name; starts and ends have none.
pub fn node_category(name: &str) -> Option<NodeCategory> {
    match name {
        "BA bifurcation" | "ICA bifurcation" => Some(NodeCategory::MajorBifurcations),
        n if n.ends_with(" bifurcation") => Some(NodeCategory::MinorBifurcations),
        n if n.ends_with(" boundary") => Some(NodeCategory::BoundaryPoints),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceStats {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub support: usize,
}

impl DistanceStats {
    fn of(d: &[f64]) -> Self {
        DistanceStats {
            mean: mean(d),
            sd: if d.len() == 1 { Some(0.0) } else { std_dev(d) },
            support: d.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDistanceReport {
    pub major_bifurcations: DistanceStats,
    pub minor_bifurcations: DistanceStats,
    pub boundary_points: DistanceStats,
    pub overall: DistanceStats,
    pub unmatched_reference: usize,
    pub unmatched_predicted: usize,
    #[serde(skip)]
    pub distances: Vec<(NodeCategory, f64)>,
}

/// Minimum-cost assignment for a rows x cols cost matrix; returns
/// (row, col) pairs covering min(rows, cols) entries.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<_> = hungarian(&t).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }
    // potentials over 1-based rows/cols with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

type NodeGroups<'a> = BTreeMap<(u8, &'a str), (Vec<&'a AnatomicalNode>, Vec<&'a AnatomicalNode>)>;

/// Match nodes by (segment label, name); groups with repeated names are
/// assigned by minimum total distance. Distances are pooled over L/R into
/// the three categories and `overall` (their union).
pub fn node_distance_stats(pred: &[AnatomicalNode], reference: &[AnatomicalNode]) -> NodeDistanceReport {
    let mut groups: NodeGroups = BTreeMap::new();
    for n in pred.iter().filter(|n| node_category(&n.name).is_some()) {
        groups.entry((n.label, &n.name)).or_default().0.push(n);
    }
    for n in reference.iter().filter(|n| node_category(&n.name).is_some()) {
        groups.entry((n.label, &n.name)).or_default().1.push(n);
    }
    let mut distances = Vec::new();
    let (mut unmatched_reference, mut unmatched_predicted) = (0, 0);
    for ((_, name), (p, r)) in &groups {
        let cat = node_category(name).expect("filtered");
        let cost: Vec<Vec<f64>> = r.iter().map(|a| p.iter().map(|b| dist(a.coords, b.coords)).collect()).collect();
        let pairs = hungarian(&cost);
        unmatched_reference += r.len() - pairs.len();
        unmatched_predicted += p.len() - pairs.len();
        distances.extend(pairs.into_iter().map(|(i, j)| (cat, cost[i][j])));
    }
    let of = |c: NodeCategory| {
        let d: Vec<f64> = distances.iter().filter(|x| x.0 == c).map(|x| x.1).collect();
        DistanceStats::of(&d)
    };
    let all: Vec<f64> = distances.iter().map(|x| x.1).collect();
    NodeDistanceReport {
        major_bifurcations: of(NodeCategory::MajorBifurcations),
        minor_bifurcations: of(NodeCategory::MinorBifurcations),
        boundary_points: of(NodeCategory::BoundaryPoints),
        overall: DistanceStats::of(&all),
        unmatched_reference,
        unmatched_predicted,
        distances,
    }
}

/// Micro-averaged F1 over every binary variant slot of every case. With no
/// positives on either side the agreement is perfect and F1 is 1.
pub fn variant_f1(pred: &[VariantReport], reference: &[VariantReport]) -> Result<f64, EvalError> {
    if pred.len() != reference.len() {
        return Err(EvalError::LengthMismatch {
            what: "variant reports",
            pred: pred.len(),
            reference: reference.len(),
        });
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (p, r) in pred.iter().zip(reference) {
        for (a, b) in p.slots().into_iter().zip(r.slots()) {
            match (a, b) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fnn += 1,
                _ => {}
            }
        }
    }
    if tp + fp + fnn == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fnn) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureAgreement {
    /// Median relative error over pairs with a nonzero reference.
    pub medre: Option<f64>,
    /// None with fewer than 2 pairs or a constant side.
    pub pearson_r: Option<f64>,
    pub pairs: usize,
    pub excluded_zero_reference: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn feature_agreement(pred: &[f64], reference: &[f64]) -> Result<FeatureAgreement, EvalError> {
    if pred.len() != reference.len() {
        return Err(EvalError::LengthMismatch {
            what: "feature values",
            pred: pred.len(),
            reference: reference.len(),
        });
    }
    let rel: Vec<f64> = pred
        .iter()
        .zip(reference)
        .filter(|(_, r)| **r != 0.0)
        .map(|(p, r)| (p - r).abs() / r.abs())
        .collect();
    Ok(FeatureAgreement {
        medre: median(&rel),
        pearson_r: pearson(pred, reference),
        pairs: pred.len(),
        excluded_zero_reference: pred.len() - rel.len(),
    })
}

/// Scalar features of a features.json document keyed by
/// (feature, segment or bifurcation name); null values are left out.
pub fn feature_values(doc: &Value) -> BTreeMap<(String, String), f64> {
    let mut out = BTreeMap::new();
    let mut put = |feature: &str, item: &str, v: &Value| {
        if let Some(x) = v.as_f64() {
            out.insert((feature.to_string(), item.to_string()), x);
        }
    };
    for s in doc["segments"].as_array().into_iter().flatten() {
        let name = s["name"].as_str().unwrap_or_default();
        for k in ["median_radius_mm", "length_mm", "tortuosity", "volume_mm3", "mean_curvature_per_mm"] {
            put(k, name, &s[k]);
        }
    }
    for b in doc["bifurcations"].as_array().into_iter().flatten() {
        let name = b["name"].as_str().unwrap_or_default();
        for k in ["radius_sum_ratio", "area_sum_ratio", "exponent"] {
            put(k, name, &b[k]);
        }
        for (i, a) in b["angles_deg"].as_array().into_iter().flatten().enumerate() {
            put(&format!("angle_{}", i + 1), name, a);
        }
    }
    out
}

/// Per-feature agreement, pooling every item present in both documents of
/// each case pair.
pub fn feature_agreement_by_feature(cases: &[(&Value, &Value)]) -> BTreeMap<String, FeatureAgreement> {
    let mut pooled: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (p, r) in cases {
        let (pv, rv) = (feature_values(p), feature_values(r));
        for (key, &x) in &pv {
            if let Some(&y) = rv.get(key) {
                let e = pooled.entry(key.0.clone()).or_default();
                e.0.push(x);
                e.1.push(y);
            }
        }
    }
    pooled
        .into_iter()
        .map(|(k, (p, r))| (k, feature_agreement(&p, &r).expect("paired")))
        .collect()
}

/// One predicted/reference case; absent parts are skipped.
#[derive(Debug, Clone, Default)]
pub struct EvalCase {
    pub pred_skeleton: Option<Volume<u8>>,
    pub ref_skeleton: Option<Volume<u8>>,
    pub pred_nodes: Vec<AnatomicalNode>,
    pub ref_nodes: Vec<AnatomicalNode>,
    pub pred_variants: Option<VariantReport>,
    pub ref_variants: Option<VariantReport>,
    pub pred_features: Option<Value>,
    pub ref_features: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub cases: usize,
    /// Mean over cases with both skeletons.
    pub dice: Option<f64>,
    pub betti0_error: Option<f64>,
    /// Mean over cases of the predicted skeletons' thickness.
    pub thickness: Option<Thickness>,
    pub node_distances: NodeDistanceReport,
    pub variant_f1: Option<f64>,
    pub feature_agreement: BTreeMap<String, FeatureAgreement>,
}

pub fn evaluate(cases: &[EvalCase]) -> Result<EvalReport, EvalError> {
    let (mut dices, mut b0, mut thick_mean, mut thick_p99) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for c in cases {
        if let (Some(p), Some(r)) = (&c.pred_skeleton, &c.ref_skeleton) {
            dices.push(dice(p, r)?);
            b0.push(betti0_error(p, r)? as f64);
        }
        if let Some(p) = &c.pred_skeleton {
            let bin = p.map(|x| u8::from(x != 0));
            if let Some(t) = skeleton_thickness(&Skeleton::new(bin)) {
                thick_mean.push(t.mean);
                thick_p99.push(t.p99);
            }
        }
    }
    // keep cases apart: ids and names repeat across cases
    let mut node_distances = node_distance_stats(&[], &[]);
    let mut all = Vec::new();
    for c in cases {
        let r = node_distance_stats(&c.pred_nodes, &c.ref_nodes);
        node_distances.unmatched_reference += r.unmatched_reference;
        node_distances.unmatched_predicted += r.unmatched_predicted;
        all.extend(r.distances);
    }
    let of = |c: Option<NodeCategory>| {
        let d: Vec<f64> = all.iter().filter(|x| c.is_none_or(|c| x.0 == c)).map(|x| x.1).collect();
        DistanceStats::of(&d)
    };
    node_distances.major_bifurcations = of(Some(NodeCategory::MajorBifurcations));
    node_distances.minor_bifurcations = of(Some(NodeCategory::MinorBifurcations));
    node_distances.boundary_points = of(Some(NodeCategory::BoundaryPoints));
    node_distances.overall = of(None);
    node_distances.distances = all;

    let (pv, rv): (Vec<_>, Vec<_>) = cases
        .iter()
        .filter_map(|c| Some((c.pred_variants?, c.ref_variants?)))
        .unzip();
    let variant_f1 = if pv.is_empty() { None } else { Some(variant_f1(&pv, &rv)?) };
    let feats: Vec<(&Value, &Value)> = cases
        .iter()
        .filter_map(|c| Some((c.pred_features.as_ref()?, c.ref_features.as_ref()?)))
        .collect();
    Ok(EvalReport {
        cases: cases.len(),
        dice: mean(&dices),
        betti0_error: mean(&b0),
        thickness: mean(&thick_mean).zip(mean(&thick_p99)).map(|(mean, p99)| Thickness { mean, p99 }),
        node_distances,
        variant_f1,
        feature_agreement: feature_agreement_by_feature(&feats),
    })
}
