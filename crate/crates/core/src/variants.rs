//! Circle-of-Willis variant classification: segment presence, fetal PCA
//! origin and fenestrations.

use serde::{Deserialize, Serialize};

use crate::anatomy::{Segment, Side, VesselKind};
use crate::graph_builder::paths::{label_path, touching};
use crate::graph_builder::CenterlineGraph;
use crate::util::percentile;
use crate::volume_io::LabeledMask;

/// Minimum voxel count for a communicating artery at 0.25 mm spacing.
pub const MIN_VOXELS: f64 = 30.0;
/// Working grid spacing the voxel threshold refers to.
pub const REFERENCE_SPACING_MM: f64 = 0.25;
/// Pcom over P1 caliber ratio at the 25th percentile that marks a fetal PCA.
pub const FETAL_RATIO: f64 = 1.05;
/// P1 length used when no Pcom attachment exists on the PCA.
pub const P1_FALLBACK_MM: f64 = 7.18;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnteriorVariants {
    #[serde(rename = "L-A1")]
    pub l_a1: bool,
    #[serde(rename = "Acom")]
    pub acom: bool,
    #[serde(rename = "3rd-A2")]
    pub third_a2: bool,
    #[serde(rename = "R-A1")]
    pub r_a1: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosteriorVariants {
    #[serde(rename = "L-Pcom")]
    pub l_pcom: bool,
    #[serde(rename = "L-P1")]
    pub l_p1: bool,
    #[serde(rename = "R-P1")]
    pub r_p1: bool,
    #[serde(rename = "R-Pcom")]
    pub r_pcom: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetalVariants {
    #[serde(rename = "L-PCA")]
    pub l_pca: bool,
    #[serde(rename = "R-PCA")]
    pub r_pca: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fenestrations {
    #[serde(rename = "L-A1")]
    pub l_a1: bool,
    #[serde(rename = "Acom")]
    pub acom: bool,
    #[serde(rename = "R-A1")]
    pub r_a1: bool,
    #[serde(rename = "L-P1")]
    pub l_p1: bool,
    #[serde(rename = "R-P1")]
    pub r_p1: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantReport {
    pub anterior: AnteriorVariants,
    pub posterior: PosteriorVariants,
    pub fetal: FetalVariants,
    pub fenestrations: Fenestrations,
}

impl VariantReport {
    /// All 15 binaries in a fixed order: anterior, posterior, fetal,
    /// fenestrations.
    pub fn slots(&self) -> Vec<bool> {
        let (a, p, f, x) = (self.anterior, self.posterior, self.fetal, self.fenestrations);
        vec![
            a.l_a1, a.acom, a.third_a2, a.r_a1, p.l_pcom, p.l_p1, p.r_p1, p.r_pcom, f.l_pca, f.r_pca, x.l_a1,
            x.acom, x.r_a1, x.l_p1, x.r_p1,
        ]
    }

    pub fn pcom(&self, side: Side) -> bool {
        match side {
            Side::Left => self.posterior.l_pcom,
            Side::Right => self.posterior.r_pcom,
        }
    }

    pub fn p1(&self, side: Side) -> bool {
        match side {
            Side::Left => self.posterior.l_p1,
            Side::Right => self.posterior.r_p1,
        }
    }

    pub fn a1(&self, side: Side) -> bool {
        match side {
            Side::Left => self.anterior.l_a1,
            Side::Right => self.anterior.r_a1,
        }
    }

    pub fn fetal(&self, side: Side) -> bool {
        match side {
            Side::Left => self.fetal.l_pca,
            Side::Right => self.fetal.r_pca,
        }
    }
}

/// Voxel count a segment needs to count as present on a grid with the
/// given voxel volume.
pub fn presence_threshold(voxel_volume_mm3: f64) -> f64 {
    MIN_VOXELS * REFERENCE_SPACING_MM.powi(3) / voxel_volume_mm3
}

fn seg(kind: VesselKind, side: Side) -> Segment {
    Segment::sided(kind, side).expect("sided kind")
}

/// Presence of the eight anterior and posterior segments. Communicating
/// arteries and the 3rd-A2 use the voxel-count threshold; A1 and P1 use
/// graph connectivity to the ICA and BA.
pub fn classify_segment_presence(m: &LabeledMask, g: &CenterlineGraph) -> (AnteriorVariants, PosteriorVariants) {
    let thr = presence_threshold(m.grid().voxel_volume());
    let big = |s: Segment| m.count_label(s.code()) as f64 >= thr - 1e-9;
    let joined = |a: Segment, b: Segment| touching(g, a.code(), b.code()).is_some();
    let a1 = |side| joined(seg(VesselKind::Aca, side), seg(VesselKind::Ica, side));
    let p1 = |side| joined(seg(VesselKind::Pca, side), Segment::Ba);
    (
        AnteriorVariants {
            l_a1: a1(Side::Left),
            acom: big(Segment::Acom),
            third_a2: big(Segment::ThirdA2),
            r_a1: a1(Side::Right),
        },
        PosteriorVariants {
            l_pcom: big(seg(VesselKind::Pcom, Side::Left)),
            l_p1: p1(Side::Left),
            r_p1: p1(Side::Right),
            r_pcom: big(seg(VesselKind::Pcom, Side::Right)),
        },
    )
}

/// Outcome of the fetal test with the values it was decided on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FetalDecision {
    pub fetal: bool,
    pub pcom_p25: Option<f64>,
    pub p1_p25: Option<f64>,
    /// True when the P1 path had no usable radii or had to use the
    /// fallback window.
    pub low_support: bool,
}

/// Fetal PCA test for one side, given whether that side's Pcom and P1 are
/// present.
pub fn classify_fetal_pca(g: &CenterlineGraph, side: Side, pcom_present: bool, p1_present: bool) -> FetalDecision {
    let none = FetalDecision {
        fetal: false,
        pcom_p25: None,
        p1_p25: None,
        low_support: false,
    };
    if !pcom_present {
        return none;
    }
    if !p1_present {
        return FetalDecision { fetal: true, ..none };
    }
    let pcom = seg(VesselKind::Pcom, side).code();
    let pca = seg(VesselKind::Pca, side).code();
    let pcom_r: Vec<f64> = g
        .edges
        .iter()
        .filter(|e| e.label == pcom)
        .flat_map(|e| e.ce_radius.iter().flatten().copied())
        .collect();
    let mut low = false;
    let p1_r: Vec<f64> = match p1_path_radii(g, pca, pcom) {
        Some((r, fallback)) => {
            low = fallback;
            r
        }
        None => Vec::new(),
    };
    if pcom_r.is_empty() {
        return FetalDecision { low_support: true, ..none };
    }
    let pc = percentile(&pcom_r, 25.0).expect("non-empty");
    if p1_r.is_empty() {
        // no measurable P1 despite the connection: treat as full fetal origin
        return FetalDecision {
            fetal: true,
            pcom_p25: Some(pc),
            p1_p25: None,
            low_support: true,
        };
    }
    let p1 = percentile(&p1_r, 25.0).expect("non-empty");
    FetalDecision {
        fetal: pc >= FETAL_RATIO * p1,
        pcom_p25: Some(pc),
        p1_p25: Some(p1),
        low_support: low,
    }
}

/// Radii along P1: the PCA path from the BA junction to the Pcom junction,
/// or the first `P1_FALLBACK_MM` of PCA when the Pcom does not attach.
fn p1_path_radii(g: &CenterlineGraph, pca: u8, pcom: u8) -> Option<(Vec<f64>, bool)> {
    let start = touching(g, pca, Segment::Ba.code())?;
    if let Some(end) = touching(g, pca, pcom) {
        let p = label_path(g, &[pca], start, end)?;
        let r: Vec<f64> = p.ce_radius.iter().flatten().copied().collect();
        return Some((r, false));
    }
    let end = crate::graph_builder::paths::farthest_end(g, pca, start)?;
    let p = label_path(g, &[pca], start, end)?;
    let w = p.window(0.0, P1_FALLBACK_MM);
    Some((w.ce_radius.iter().flatten().copied().collect(), true))
}

/// Cycle rank of the subgraph formed by edges of one label.
pub fn label_cycle_rank(g: &CenterlineGraph, label: u8) -> usize {
    let edges: Vec<_> = g.edges.iter().filter(|e| e.label == label).collect();
    if edges.is_empty() {
        return 0;
    }
    let mut nodes: Vec<usize> = edges.iter().flat_map(|e| [e.nodes.0, e.nodes.1]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut ds = crate::volume_io::DisjointSet::new(nodes.len());
    let pos = |n: usize| nodes.binary_search(&n).expect("collected");
    for e in &edges {
        ds.union(pos(e.nodes.0), pos(e.nodes.1));
    }
    let comps = (0..nodes.len()).filter(|&i| ds.find(i) == i).count();
    edges.len() + comps - nodes.len()
}

/// A fenestration is a cycle inside one label's subgraph.
pub fn detect_fenestrations(g: &CenterlineGraph) -> Fenestrations {
    let f = |s: Segment| label_cycle_rank(g, s.code()) >= 1;
    Fenestrations {
        l_a1: f(seg(VesselKind::Aca, Side::Left)),
        acom: f(Segment::Acom),
        r_a1: f(seg(VesselKind::Aca, Side::Right)),
        l_p1: f(seg(VesselKind::Pca, Side::Left)),
        r_p1: f(seg(VesselKind::Pca, Side::Right)),
    }
}

/// Full report plus the per-side fetal decisions.
pub fn classify_variants(m: &LabeledMask, g: &CenterlineGraph) -> (VariantReport, [FetalDecision; 2]) {
    let (anterior, posterior) = classify_segment_presence(m, g);
    let mut report = VariantReport {
        anterior,
        posterior,
        fenestrations: detect_fenestrations(g),
        ..Default::default()
    };
    let l = classify_fetal_pca(g, Side::Left, report.pcom(Side::Left), report.p1(Side::Left));
    let r = classify_fetal_pca(g, Side::Right, report.pcom(Side::Right), report.p1(Side::Right));
    report.fetal = FetalVariants {
        l_pca: l.fetal,
        r_pca: r.fetal,
    };
    (report, [l, r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_builder::test_util::graph;
    use crate::volume_io::{Grid, Volume};

    const RPCA: u8 = 2;
    const RPCOM: u8 = 8;
    const BA: u8 = 1;

    fn mask_with(counts: &[(u8, usize)], spacing: f64) -> LabeledMask {
        let g = Grid::new([40, 40, 40], [spacing; 3]);
        let mut data = vec![0u8; g.len()];
        let mut i = 0;
        for &(l, n) in counts {
            for _ in 0..n {
                data[i] = l;
                i += 1;
            }
        }
        LabeledMask::new(Volume::new(g, data).unwrap()).unwrap()
    }

    #[test]
    fn threshold_scales_with_voxel_volume() {
        assert!((presence_threshold(0.25f64.powi(3)) - 30.0).abs() < 1e-12);
        assert!((presence_threshold(0.5f64.powi(3)) - 3.75).abs() < 1e-12);
    }

    #[test]
    fn acom_count_threshold() {
        let g = CenterlineGraph::default();
        let (a, _) = classify_segment_presence(&mask_with(&[(10, 25)], 0.25), &g);
        assert!(!a.acom);
        let (a, _) = classify_segment_presence(&mask_with(&[(10, 30), (15, 29)], 0.25), &g);
        assert!(a.acom && !a.third_a2);
        let (a, _) = classify_segment_presence(&mask_with(&[(10, 4)], 0.5), &g);
        assert!(a.acom);
    }

    #[test]
    fn a1_requires_connection_to_ica() {
        // R-ICA (4) to R-ACA (11) touching; L-ACA (12) floating
        let g = graph(
            &[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [5.0, 0.0, 0.0], [6.0, 0.0, 0.0]],
            &[(0, 1, 4), (1, 2, 11), (3, 4, 12)],
        );
        let (a, _) = classify_segment_presence(&mask_with(&[], 0.25), &g);
        assert!(a.r_a1 && !a.l_a1);
    }

    fn posterior(pcom_r: f64, p1_r: f64) -> CenterlineGraph {
        // BA -> node1 -> PCA to node2 (Pcom junction) -> PCA onwards; Pcom off node2
        let mut g = graph(
            &[[0.0; 3], [0.0, 0.0, 5.0], [5.0, 0.0, 5.0], [10.0, 0.0, 5.0], [5.0, 5.0, 5.0]],
            &[(0, 1, BA), (1, 2, RPCA), (2, 3, RPCA), (2, 4, RPCOM)],
        );
        for e in &mut g.edges {
            let r = match (e.label, e.nodes) {
                (RPCOM, _) => pcom_r,
                (RPCA, (1, 2)) => p1_r,
                _ => 1.0,
            };
            e.ce_radius = vec![Some(r); e.points.len()];
        }
        g
    }

    #[test]
    fn fetal_rule() {
        let d = classify_fetal_pca(&posterior(1.3, 1.0), Side::Right, true, true);
        assert!(d.fetal);
        assert_eq!(d.pcom_p25, Some(1.3));
        assert!(!classify_fetal_pca(&posterior(1.0, 1.0), Side::Right, true, true).fetal);
        assert!(!classify_fetal_pca(&posterior(1.3, 1.0), Side::Right, false, true).fetal);
        assert!(classify_fetal_pca(&posterior(0.3, 1.0), Side::Right, true, false).fetal);
    }

    #[test]
    fn fetal_is_scale_invariant() {
        for s in [0.5, 1.7, 3.0] {
            let d = classify_fetal_pca(&posterior(1.3 * s, 1.0 * s), Side::Right, true, true);
            assert!(d.fetal);
            let d = classify_fetal_pca(&posterior(1.04 * s, 1.0 * s), Side::Right, true, true);
            assert!(!d.fetal);
        }
    }

    #[test]
    fn fenestration_single_label_cycle() {
        let g = graph(
            &[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]],
            &[(0, 1, 10), (1, 2, 10), (1, 2, 10), (2, 3, 10)],
        );
        assert_eq!(label_cycle_rank(&g, 10), 1);
        assert!(detect_fenestrations(&g).acom);
        // a ring spanning two labels is not a fenestration
        let ring = graph(
            &[[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
            &[(0, 1, 2), (1, 2, 2), (2, 0, 3)],
        );
        assert_eq!(detect_fenestrations(&ring), Fenestrations::default());
    }

    #[test]
    fn json_keys() {
        let r = VariantReport::default();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"3rd-A2\":false"));
        assert!(s.contains("\"fenestrations\":{\"L-A1\""));
        assert_eq!(r.slots().len(), 15);
    }
}
