//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion. A
//! FAIL only sets the exit status when `ACCEPTANCE_STRICT` is set. Pass
//! criterion numbers as arguments to run a subset.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cow_centerline::connector::{connect_all_with_field, transfer_labels, AStarParams};
use cow_centerline::evaluator::{betti0_error, dice, feature_agreement, node_distance_stats, skeleton_thickness, variant_f1};
use cow_centerline::graph_builder::{build_graph, AnatomicalNode, CenterlineGraph};
use cow_centerline::morphometry::{compute_segment_features, fit_segment_spline, solve_bifurcation_exponent, SegmentDefinition, SegmentFeatures};
use cow_centerline::phantom::{
    arc_points, bifurcation_phantom, centred_grid, cow_phantom, rasterize_fn, rasterize_tubes, rotation_about, BifurcationSpec,
    CowPhantomSpec, Tube,
};
use cow_centerline::pipeline::{graph_stage, prepare_mask, process_mask, skeletonize, write_bundle, CaseResult, PipelineConfig};
use cow_centerline::skeletonizer::{thin_mask, Skeleton};
use cow_centerline::variants::{Fenestrations, VariantReport};
use cow_centerline::volume_io::{betti_numbers, euclidean_distance_field, DisjointSet, Grid, LabeledMask, Vec3, Volume};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);
type Bundle = Vec<(String, Vec<u8>)>;
type SuiteRun = (String, CaseResult, VariantReport, Vec<AnatomicalNode>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const OFFSETS: usize = 26;

fn neighbour_offsets() -> [[i64; 3]; OFFSETS] {
    let mut out = [[0; 3]; OFFSETS];
    let mut k = 0;
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    out[k] = [dx, dy, dz];
                    k += 1;
                }
            }
        }
    }
    out
}

/// 26-connected component count by union-find over nonzero voxels.
fn components_union_find(v: &Volume<u8>) -> usize {
    let g = v.grid();
    let data = v.data();
    let mut ds = DisjointSet::new(g.len());
    let mut n = data.iter().filter(|&&x| x != 0).count();
    for i in 0..g.len() {
        if data[i] == 0 {
            continue;
        }
        let c = g.coords(i).map(|x| x as i64);
        for o in neighbour_offsets() {
            if let Some(j) = g.checked_index([c[0] + o[0], c[1] + o[1], c[2] + o[2]]) {
                if data[j] != 0 && ds.union(i, j) {
                    n -= 1;
                }
            }
        }
    }
    n
}

/// 26-connected component count by breadth-first flood fill.
fn components_flood_fill(data: &[u8], dims: [usize; 3]) -> usize {
    let [nx, ny, nz] = dims;
    let mut seen = vec![false; data.len()];
    let mut count = 0;
    for start in 0..data.len() {
        if data[start] == 0 || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (a, b, c) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                            continue;
                        }
                        let j = a as usize + nx * (b as usize + ny * c as usize);
                        if data[j] != 0 && !seen[j] {
                            seen[j] = true;
                            q.push_back(j);
                        }
                    }
                }
            }
        }
    }
    count
}

fn cfg() -> PipelineConfig {
    PipelineConfig::default()
}

/// Pruned skeleton, labeled, plus the graph stage on it.
fn centerline(m: &LabeledMask) -> (Skeleton, CenterlineGraph) {
    let c = cfg();
    let m = prepare_mask(m, &c);
    let field = euclidean_distance_field(&m.binary());
    let s = skeletonize(&m, &field, &c);
    let labeled = transfer_labels(&s, &m).expect("labels");
    let r = connect_all_with_field(&labeled, &m, &field, &c.astar()).expect("connect");
    let gs = graph_stage(&r.skeleton, &m, &field, &c);
    (r.skeleton, gs.graph)
}

fn whole_edge_features(g: &CenterlineGraph) -> Option<SegmentFeatures> {
    whole_edge_features_with(g, cfg().knot_stride)
}

fn whole_edge_features_with(g: &CenterlineGraph, knot_stride: usize) -> Option<SegmentFeatures> {
    let e = g.edges.iter().max_by(|a, b| a.length().total_cmp(&b.length()))?;
    let def = SegmentDefinition {
        name: "edge".into(),
        labels: vec![e.label],
        from: e.nodes.0,
        to: e.nodes.1,
        offset_mm: 0.0,
        max_length_mm: None,
        cap_mm: None,
        fallback: false,
    };
    compute_segment_features(g, &def, knot_stride)
}

// --- 1: topology preservation -------------------------------------------

fn topology_phantoms() -> Vec<(&'static str, LabeledMask, (usize, usize))> {
    let z = 0.0;
    let ring = arc_points([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 5.0, 0.0, 2.0 * PI, 0.25);
    vec![
        (
            "tube",
            rasterize_tubes(&centred_grid([64, 24, 24], 0.25), &[Tube::new(1, vec![[-6.5, 0.0, z], [6.5, 0.0, z]], 1.5)]),
            (1, 0),
        ),
        (
            "L-bend",
            rasterize_tubes(
                &centred_grid([56, 56, 20], 0.25),
                &[Tube::new(1, vec![[-5.5, -5.0, z], [4.0, -5.0, z], [4.0, 5.5, z]], 1.2)],
            ),
            (1, 0),
        ),
        (
            "Y-junction",
            rasterize_tubes(
                &centred_grid([56, 60, 20], 0.25),
                &[
                    Tube::new(1, vec![[0.0, -6.5, z], [0.0, 0.0, z]], 1.3),
                    Tube::new(1, vec![[0.0, 0.0, z], [5.0, 5.5, z]], 1.1),
                    Tube::new(1, vec![[0.0, 0.0, z], [-5.0, 5.5, z]], 1.1),
                ],
            ),
            (1, 0),
        ),
        ("torus", rasterize_tubes(&centred_grid([56, 56, 16], 0.25), &[Tube::new(1, ring, 1.2)]), (1, 1)),
        (
            "two-component",
            rasterize_tubes(
                &centred_grid([64, 40, 20], 0.25),
                &[
                    Tube::new(1, vec![[-6.5, -2.5, z], [6.5, -2.5, z]], 1.2),
                    Tube::new(1, vec![[-6.5, 2.5, z], [6.5, 2.5, z]], 1.2),
                ],
            ),
            (2, 0),
        ),
    ]
}

fn c1_topology() -> Outcome {
    let mut notes = Vec::new();
    for (name, m, expected) in topology_phantoms() {
        ensure!(m.grid().dims.iter().all(|&d| d <= 64), "{name}: larger than 64^3");
        let (b0, b1, _) = betti_numbers(&m.binary());
        ensure!((b0, b1) == expected, "{name}: mask Betti ({b0}, {b1}), built for {expected:?}");
        let t = Instant::now();
        let s = thin_mask(&m.binary());
        let secs = t.elapsed().as_secs_f64();
        let s0 = components_union_find(s.volume());
        let g = build_graph(&s);
        let s1 = g.cycle_rank();
        ensure!((s0, s1) == (b0, b1), "{name}: skeleton Betti ({s0}, {s1}) vs mask ({b0}, {b1})");
        ensure!(secs < 10.0, "{name}: thinning took {secs:.2} s");
        notes.push(format!("{name} ({s0},{s1}) {secs:.2}s"));
    }
    Ok(notes.join(", "))
}

// --- 2: reconnection ------------------------------------------------------

fn c2_reconnection() -> Outcome {
    let mut phantoms: Vec<(&str, LabeledMask)> = topology_phantoms()
        .into_iter()
        .filter(|(n, _, _)| *n != "two-component")
        .map(|(n, m, _)| (n, m))
        .collect();
    phantoms.push(("CoW", cow_phantom(&CowPhantomSpec::default()).mask));
    let c = cfg();
    let prepared: Vec<_> = phantoms
        .iter()
        .map(|(name, m)| {
            let m = prepare_mask(m, &c);
            let field = euclidean_distance_field(&m.binary());
            let s = transfer_labels(&skeletonize(&m, &field, &c), &m).expect("labels");
            (*name, m, field, s)
        })
        .collect();
    let params = AStarParams::default();
    let (mut bridges, mut trials) = (0usize, 0usize);
    for t in 0..100u64 {
        let (name, m, field, s) = &prepared[t as usize % prepared.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(t);
        let voxels = s.voxels();
        let mut data = s.volume().data().to_vec();
        for k in rand::seq::index::sample(&mut rng, voxels.len(), 10) {
            data[voxels[k]] = 0;
        }
        let broken = Skeleton::new(s.volume().with_data(data).unwrap());
        let r = connect_all_with_field(&broken, m, field, &params).map_err(|e| format!("{name} trial {t}: {e}"))?;
        let err = betti0_error(r.skeleton.volume(), &m.binary()).unwrap();
        ensure!(err == 0, "{name} trial {t}: beta0 error {err}");
        let fallbacks = r.dilated_fallbacks + r.raster_fallbacks;
        ensure!(fallbacks == 0, "{name} trial {t}: {fallbacks} fallbacks");
        let md = m.volume().data();
        for b in &r.bridges {
            ensure!(b.voxels.iter().all(|&v| md[v] != 0), "{name} trial {t}: bridge leaves the mask");
        }
        bridges += r.bridges.len();
        trials += 1;
    }
    Ok(format!("{trials}/100 trials restored beta0, {bridges} bridges all inside the mask, 0 fallbacks"))
}

// --- 3: thickness ----------------------------------------------------------

fn c3_thickness() -> Outcome {
    let mut masks: Vec<(&str, LabeledMask)> = topology_phantoms().into_iter().map(|(n, m, _)| (n, m)).collect();
    masks.push(("CoW", cow_phantom(&CowPhantomSpec::default()).mask));
    masks.push(("Y", bifurcation_phantom(&BifurcationSpec::default()).mask));
    let c = cfg();
    let mut notes = Vec::new();
    for (name, m) in masks {
        let m = prepare_mask(&m, &c);
        let field = euclidean_distance_field(&m.binary());
        let s = skeletonize(&m, &field, &c);
        let t = skeleton_thickness(&s).ok_or(format!("{name}: empty skeleton"))?;
        ensure!((0.2..=0.3).contains(&t.mean), "{name}: mean thickness {:.4}", t.mean);
        ensure!(t.p99 <= 0.4, "{name}: p99 thickness {:.4}", t.p99);
        notes.push(format!("{name} {:.3}/{:.3}", t.mean, t.p99));
    }
    Ok(format!("mean/p99 mm: {}", notes.join(", ")))
}

// --- 4: radius accuracy ------------------------------------------------------

/// Radii of graph points at least `margin` mm from both tube ends, with the
/// axis running from `a` to `b`.
fn interior_radii(g: &CenterlineGraph, a: Vec3, b: Vec3, margin: f64) -> (Vec<f64>, Vec<f64>) {
    let d: Vec3 = [0, 1, 2].map(|k| b[k] - a[k]);
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let (mut ce, mut mis) = (Vec::new(), Vec::new());
    for e in &g.edges {
        for (k, p) in e.points.iter().enumerate() {
            let s = (0..3).map(|c| (p[c] - a[c]) * d[c]).sum::<f64>() / len;
            if s < margin || s > len - margin {
                continue;
            }
            if let (Some(c), Some(m)) = (e.ce_radius[k], e.mis_radius[k]) {
                ce.push(c);
                mis.push(m);
            }
        }
    }
    (ce, mis)
}

fn c4_radius() -> Outcome {
    let mut notes = Vec::new();
    let grid = centred_grid([84, 60, 24], 0.25);
    for r in [1.0, 2.0] {
        for tilt in [0.0f64, 30.0] {
            let rot = rotation_about([0.0, 0.0, 1.0], tilt.to_radians());
            let a = cow_centerline_rotate(&rot, [-8.0, 0.0, 0.0]);
            let b = cow_centerline_rotate(&rot, [8.0, 0.0, 0.0]);
            let m = rasterize_tubes(&grid, &[Tube::new(1, vec![a, b], r)]);
            let (_, g) = centerline(&m);
            let (ce, _) = interior_radii(&g, a, b, 2.0 * r + 1.0);
            ensure!(ce.len() > 10, "r={r} tilt={tilt}: only {} interior points", ce.len());
            let worst = ce.iter().map(|c| (c / r - 1.0).abs()).fold(0.0, f64::max);
            ensure!(worst <= 0.05, "r={r} tilt={tilt}: ce off by {:.1}%", 100.0 * worst);
            notes.push(format!("r{r}@{tilt}deg max {:.1}%", 100.0 * worst));
        }
    }
    // elliptical cross-section, semi-axes 1 (y) and 2 (z)
    let grid = centred_grid([72, 16, 24], 0.25);
    let m = rasterize_fn(&grid, |p| {
        u8::from(p[0].abs() <= 8.0 && (p[1] / 1.0).powi(2) + (p[2] / 2.0).powi(2) <= 1.0)
    });
    let (_, g) = centerline(&m);
    let (ce, mis) = interior_radii(&g, [-8.0, 0.0, 0.0], [8.0, 0.0, 0.0], 5.0);
    ensure!(ce.len() > 10, "ellipse: only {} interior points", ce.len());
    let ce_worst = ce.iter().map(|c| (c / 2f64.sqrt() - 1.0).abs()).fold(0.0, f64::max);
    let mis_worst = mis.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
    ensure!(ce_worst <= 0.05, "ellipse: ce off by {:.1}%", 100.0 * ce_worst);
    ensure!(mis_worst <= 0.10, "ellipse: mis off by {:.1}%", 100.0 * mis_worst);
    notes.push(format!("ellipse ce max {:.1}%, mis max {:.1}%", 100.0 * ce_worst, 100.0 * mis_worst));
    Ok(notes.join(", "))
}

fn cow_centerline_rotate(r: &[[f64; 3]; 3], p: Vec3) -> Vec3 {
    cow_centerline::phantom::rotate(r, p)
}

// --- 5: tortuosity and curvature ---------------------------------------------

fn c5_tortuosity() -> Outcome {
    let r = 1.0;
    let semicircle = arc_points([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 10.0, 0.0, PI, 0.1);
    let grid = Grid::new([105, 90, 21], [0.25; 3]).with_origin([-13.0, -10.0, -2.5]);

    // semicircular R-Pcom between straight ICA and PCA legs
    let m = rasterize_tubes(
        &grid,
        &[
            Tube::new(4, vec![[10.0, -9.0, 0.0], [10.0, 0.0, 0.0]], r),
            Tube::new(8, semicircle.clone(), r),
            Tube::new(2, vec![[-10.0, 0.0, 0.0], [-10.0, -9.0, 0.0]], r),
        ],
    );
    let res = process_mask(&m, None, &cfg()).map_err(|e| e.to_string())?;
    let pcom = res.features.segment("R-Pcom").ok_or("no R-Pcom segment")?;
    let target = PI / 2.0 - 1.0;
    let tau_err = (pcom.tortuosity / target - 1.0).abs();
    ensure!(tau_err <= 0.02, "semicircle tau {:.4} vs {target:.4}", pcom.tortuosity);

    // 10 mm arc alone: curvature on the voxelised centerline decides; the
    // analytic polyline and a coarser knot stride are reported alongside
    let m = rasterize_tubes(&grid, &[Tube::new(1, semicircle, r)]);
    let (_, g) = centerline(&m);
    let arc = whole_edge_features(&g).ok_or("arc: no edge")?;
    let coarse = whole_edge_features_with(&g, 8).ok_or("arc: no edge")?;
    let exact: Vec<Vec3> = arc_points([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 10.0, 0.0, PI, 0.25);
    let analytic = fit_segment_spline(&exact).mean_curvature();
    let k_err = (arc.mean_curvature / 0.1 - 1.0).abs();
    let context = format!("knot stride 8 gives {:.4}, analytic arc {analytic:.4}", coarse.mean_curvature);

    // straight tube, oblique to the grid
    let m = rasterize_tubes(&centred_grid([84, 40, 24], 0.25), &[Tube::new(1, vec![[-9.0, -3.0, -1.0], [9.0, 3.0, 1.0]], r)]);
    let (_, g) = centerline(&m);
    let line = whole_edge_features(&g).ok_or("line: no edge")?;
    ensure!(line.tortuosity < 0.005, "straight tau {:.5}", line.tortuosity);
    ensure!(
        k_err <= 0.05,
        "voxelised arc curvature {:.4}/mm ({:.1}% off); semicircle tau {:.4} and straight tau {:.5} pass; {context}",
        arc.mean_curvature,
        100.0 * k_err,
        pcom.tortuosity,
        line.tortuosity
    );

    Ok(format!(
        "semicircle tau {:.4} ({:.2}% off), arc curvature {:.4}/mm ({:.2}% off), straight tau {:.5}; {context}",
        pcom.tortuosity,
        100.0 * tau_err,
        arc.mean_curvature,
        100.0 * k_err,
        line.tortuosity
    ))
}

// --- 6: bifurcation exponent -------------------------------------------------

fn major_bifurcation(r: &CaseResult, name: &str) -> Result<cow_centerline::morphometry::RadiusFeatures, String> {
    let b = r.features.bifurcation(name).ok_or(format!("no {name}"))?;
    b.radius.clone().ok_or(format!("{name}: no radius features {:?}", b.support_flags))
}

fn c6_exponent() -> Outcome {
    let x = solve_bifurcation_exponent(5.0, 4.0, 3.0).map_err(|e| e.to_string())?;
    ensure!((x - 2.0).abs() < 1e-9, "(5,4,3) gave {x}");
    let c = 2f64.powf(-3.0 / 7.0);
    let x = solve_bifurcation_exponent(1.0, c, c).map_err(|e| e.to_string())?;
    ensure!((x - 7.0 / 3.0).abs() < 1e-6, "minimum-energy triple gave {x}");

    // triples built from a known exponent
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut valid = 0;
    while valid < 10_000 {
        let rp: f64 = rng.random_range(0.2..5.0);
        let xt: f64 = rng.random_range(1.0..10.0);
        let a: f64 = rng.random_range(0.05..0.95);
        let b = (1.0 - a.powf(xt)).powf(1.0 / xt);
        let (c1, c2) = (a * rp, b * rp);
        if c1.max(c2) >= rp {
            continue;
        }
        valid += 1;
        let x = solve_bifurcation_exponent(rp, c1, c2).map_err(|e| format!("({rp}, {c1}, {c2}): {e}"))?;
        let res = ((c1 / rp).powf(x) + (c2 / rp).powf(x) - 1.0).abs();
        ensure!(res < 1e-9, "residual {res:e} at ({rp}, {c1}, {c2})");
        worst = worst.max(res);
    }

    let rc = 2.0 * 2f64.powf(-1.0 / 3.0);
    let spec = BifurcationSpec {
        r_children: [rc; 2],
        ..Default::default()
    };
    let r = process_mask(&bifurcation_phantom(&spec).mask, None, &cfg()).map_err(|e| e.to_string())?;
    let rf = major_bifurcation(&r, "BA bifurcation")?;
    let xe = rf.exponent.ok_or(format!("no exponent for radii {:.3} {:.3} {:.3}", rf.r_p, rf.r_c1, rf.r_c2))?;
    ensure!((xe - 3.0).abs() <= 0.5, "Y phantom exponent {xe:.3}");
    Ok(format!("solver exact; max residual {worst:.1e} over 1e4 triples; Y phantom x = {xe:.3}"))
}

// --- 7: Finet ratio ---------------------------------------------------------

fn c7_finet() -> Outcome {
    let r = process_mask(&bifurcation_phantom(&BifurcationSpec::default()).mask, None, &cfg()).map_err(|e| e.to_string())?;
    let ratio = major_bifurcation(&r, "BA bifurcation")?.radius_sum_ratio;
    ensure!((ratio - 0.678).abs() <= 0.03, "Y phantom ratio {ratio:.4}");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = Vec::new();
    for _ in 0..6 {
        let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..1.0)];
        let spec = CowPhantomSpec {
            rotation: rotation_about(axis, rng.random_range(-0.4..0.4)),
            shift: [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)],
            radius_scale: rng.random_range(0.9..1.2),
            ..Default::default()
        };
        let r = process_mask(&cow_phantom(&spec).mask, None, &cfg()).map_err(|e| e.to_string())?;
        let q = major_bifurcation(&r, "BA bifurcation")?.radius_sum_ratio;
        ensure!((0.6..=0.8).contains(&q), "random phantom ratio {q:.4}");
        seen.push(q);
    }
    let lo = seen.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = seen.iter().cloned().fold(0.0, f64::max);
    Ok(format!("Y phantom {ratio:.4}; 6 random CoW phantoms in [{lo:.3}, {hi:.3}]"))
}

// --- 8: nodes and variants ------------------------------------------------

fn suite() -> Vec<(String, CowPhantomSpec)> {
    let d = CowPhantomSpec::default;
    let fen = |f: fn(&mut Fenestrations)| {
        let mut x = Fenestrations::default();
        f(&mut x);
        x
    };
    let cases = vec![
        ("complete", d()),
        ("no Acom", CowPhantomSpec { acom: false, ..d() }),
        ("3rd-A2", CowPhantomSpec { third_a2: true, ..d() }),
        ("no R-A1", CowPhantomSpec { a1: [false, true], ..d() }),
        ("no L-A1", CowPhantomSpec { a1: [true, false], ..d() }),
        ("no R-P1", CowPhantomSpec { p1: [false, true], fetal: [true, false], ..d() }),
        ("no L-P1", CowPhantomSpec { p1: [true, false], fetal: [false, true], ..d() }),
        ("no R-Pcom", CowPhantomSpec { pcom: [false, true], ..d() }),
        ("no L-Pcom", CowPhantomSpec { pcom: [true, false], ..d() }),
        ("no Pcoms", CowPhantomSpec { pcom: [false, false], ..d() }),
        ("fetal R", CowPhantomSpec { fetal: [true, false], ..d() }),
        ("fetal L", CowPhantomSpec { fetal: [false, true], ..d() }),
        ("fetal both", CowPhantomSpec { fetal: [true, true], ..d() }),
        ("Acom fenestration", CowPhantomSpec { fenestrations: fen(|f| f.acom = true), ..d() }),
        ("R-A1 fenestration", CowPhantomSpec { fenestrations: fen(|f| f.r_a1 = true), ..d() }),
        ("L-P1 fenestration", CowPhantomSpec { fenestrations: fen(|f| f.l_p1 = true), ..d() }),
        (
            "rotated z",
            CowPhantomSpec {
                rotation: rotation_about([0.0, 0.0, 1.0], 0.35),
                shift: [0.3, -0.2, 0.1],
                ..d()
            },
        ),
        (
            "rotated x, scaled",
            CowPhantomSpec {
                rotation: rotation_about([1.0, 0.0, 0.0], 0.25),
                radius_scale: 1.15,
                ..d()
            },
        ),
        ("no Acom, no R-Pcom", CowPhantomSpec { acom: false, pcom: [false, true], ..d() }),
        (
            "no R-P1, 3rd-A2",
            CowPhantomSpec {
                p1: [false, true],
                fetal: [true, false],
                third_a2: true,
                ..d()
            },
        ),
    ];
    cases.into_iter().map(|(n, s)| (n.to_string(), s)).collect()
}

/// Bundle bytes of the first suite run, for the determinism check.
static FIRST_RUN: OnceLock<BTreeMap<String, Bundle>> = OnceLock::new();

fn bundle_bytes(r: &CaseResult) -> Bundle {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(r, dir.path()).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_suite() -> Result<Vec<SuiteRun>, String> {
    let mut out = Vec::new();
    for (name, spec) in suite() {
        spec.validate().map_err(|e| format!("{name}: {e}"))?;
        let p = cow_phantom(&spec);
        let r = process_mask(&p.mask, None, &cfg()).map_err(|e| format!("{name}: {e}"))?;
        out.push((name, r, p.variants, p.nodes));
    }
    Ok(out)
}

fn c8_nodes_variants() -> Outcome {
    let runs = run_suite()?;
    ensure!(runs.len() == 20, "suite has {} phantoms", runs.len());
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    let mut dists = Vec::new();
    let mut unmatched = 0;
    let mut bytes = BTreeMap::new();
    for (name, r, expected, nodes) in &runs {
        let s = node_distance_stats(&r.nodes.nodes, nodes);
        dists.extend(s.distances.iter().map(|d| d.1));
        unmatched += s.unmatched_reference;
        if r.variants != *expected {
            eprintln!("  {name}: predicted {:?}\n  {name}: expected  {:?}", r.variants, expected);
        }
        pred.push(r.variants);
        truth.push(*expected);
        bytes.insert(name.clone(), bundle_bytes(r));
    }
    let _ = FIRST_RUN.set(bytes);
    let mean = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
    let f1 = variant_f1(&pred, &truth).map_err(|e| e.to_string())?;
    ensure!(mean <= 0.5, "mean node distance {mean:.3} mm");
    ensure!(f1 == 1.0, "variant F1 {f1:.4}");
    Ok(format!(
        "{} matched nodes, mean distance {mean:.3} mm, {unmatched} reference nodes unmatched; variant F1 {f1:.3} over 20 phantoms",
        dists.len()
    ))
}

// --- 9: metric oracles --------------------------------------------------------

fn c9_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in 0..200 {
        let dims = [rng.random_range(1..=32), rng.random_range(1..=32), rng.random_range(1..=32)];
        let n = dims[0] * dims[1] * dims[2];
        let (pa, pb): (f64, f64) = (rng.random_range(0.0..0.6), rng.random_range(0.0..0.6));
        let a: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(pa))).collect();
        let b: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(pb))).collect();
        let grid = Grid::new(dims, [0.5; 3]);
        let (va, vb) = (Volume::new(grid.clone(), a.clone()).unwrap(), Volume::new(grid, b.clone()).unwrap());
        let (na, nb) = (a.iter().filter(|&&x| x != 0).count(), b.iter().filter(|&&x| x != 0).count());
        let both = a.iter().zip(&b).filter(|(x, y)| **x != 0 && **y != 0).count();
        let oracle = if na + nb == 0 { 1.0 } else { 2.0 * both as f64 / (na + nb) as f64 };
        let got = dice(&va, &vb).unwrap();
        ensure!(got == oracle, "volume {t}: dice {got} vs {oracle}");
        let ca = components_flood_fill(&a, dims) as i64;
        let cb = components_flood_fill(&b, dims) as i64;
        let e = betti0_error(&va, &vb).unwrap();
        ensure!(e as i64 == (ca - cb).abs(), "volume {t}: beta0 error {e} vs {}", (ca - cb).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..10.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.02 * v).collect();
    let a = feature_agreement(&y, &x).map_err(|e| e.to_string())?;
    let (medre, r) = (a.medre.ok_or("no MedRE")?, a.pearson_r.ok_or("no Pearson r")?);
    ensure!((medre - 0.02).abs() <= 1e-12, "MedRE {medre}");
    ensure!((r - 1.0).abs() <= 1e-12, "Pearson {r}");
    Ok(format!("200 random volumes match count and flood-fill oracles; agreement(1.02x, x) = ({medre:.15}, {r:.15})"))
}

// --- 10: determinism and throughput ------------------------------------------

fn c10_determinism() -> Outcome {
    let first = match FIRST_RUN.get() {
        Some(b) => b.clone(),
        None => {
            let mut m = BTreeMap::new();
            for (name, r, _, _) in run_suite()? {
                m.insert(name, bundle_bytes(&r));
            }
            m
        }
    };
    let mut files = 0;
    for (name, r, _, _) in run_suite()? {
        let again = bundle_bytes(&r);
        ensure!(first.get(&name) == Some(&again), "{name}: outputs differ between runs");
        files += again.len();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let spec = CowPhantomSpec {
        dims: Some([256; 3]),
        ..Default::default()
    };
    let (secs, dims) = pool.install(|| -> Result<(f64, [usize; 3]), String> {
        let p = cow_phantom(&spec);
        let dims = p.mask.grid().dims;
        let t = Instant::now();
        let r = process_mask(&p.mask, None, &cfg()).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_bundle(&r, dir.path()).map_err(|e| e.to_string())?;
        Ok((t.elapsed().as_secs_f64(), dims))
    })?;
    ensure!(dims == [256; 3], "phantom grid {dims:?}");
    ensure!(secs < 60.0, "256^3 pipeline took {secs:.1} s");
    Ok(format!("{files} files byte-identical across two runs of 20 phantoms; 256^3 single-threaded in {secs:.1} s"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "topology preservation", c1_topology),
        (2, "reconnection", c2_reconnection),
        (3, "thickness", c3_thickness),
        (4, "radius accuracy", c4_radius),
        (5, "tortuosity and curvature", c5_tortuosity),
        (6, "bifurcation exponent", c6_exponent),
        (7, "Finet ratio", c7_finet),
        (8, "node accuracy and variants", c8_nodes_variants),
        (9, "metric oracles", c9_metrics),
        (10, "determinism and throughput", c10_determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    println!("{failed} criteria failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
