//! Cross-section analysis: circle-equivalent and inscribed radii along
//! centerline polylines.

use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph_builder::CenterlineGraph;
use crate::util::{add, cross, normalized, percentile, scale, sub};
use crate::volume_io::{LabeledMask, Vec3};

/// In-plane sampling step (mm).
pub const CELL_MM: f64 = 0.1;
/// Half the side of the sampled square (mm).
pub const HALF_EXTENT_MM: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadiusError {
    #[error("section centre is not inside label {label}")]
    CentreOutside { label: u8 },
    #[error("degenerate tangent")]
    BadTangent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub center: Vec3,
    pub tangent: Vec3,
    /// Occupied cells as (column, row) offsets from the centre cell.
    pub cells: Vec<(i32, i32)>,
    pub area: f64,
    /// Distances from the centre to the midpoints of the outline's cell
    /// edges.
    pub contour: Vec<f64>,
}

impl CrossSection {
    pub fn ce_radius(&self) -> f64 {
        (self.area / std::f64::consts::PI).sqrt()
    }

    /// 10th percentile of the contour distances.
    pub fn mis_radius(&self) -> f64 {
        percentile(&self.contour, 10.0).unwrap_or(0.0)
    }
}

/// Two unit vectors completing `t` to a right-handed orthonormal basis.
pub(crate) fn plane_basis(t: Vec3) -> (Vec3, Vec3) {
    let axis = if t[0].abs() <= t[1].abs() && t[0].abs() <= t[2].abs() {
        [1.0, 0.0, 0.0]
    } else if t[1].abs() <= t[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let u = normalized(cross(t, axis)).expect("axis not parallel to tangent");
    let v = cross(t, u);
    (u, v)
}

/// Sample the plane through `point` orthogonal to `tangent` and keep the
/// region of `label` 4-connected to the centre cell.
pub fn sample_cross_section(
    m: &LabeledMask,
    point: Vec3,
    tangent: Vec3,
    label: u8,
) -> Result<CrossSection, RadiusError> {
    let t = normalized(tangent).ok_or(RadiusError::BadTangent)?;
    let (u, v) = plane_basis(t);
    let half = (HALF_EXTENT_MM / CELL_MM).round() as i32;
    let side = (2 * half + 1) as usize;
    let at = |i: i32, j: i32| add(point, add(scale(u, i as f64 * CELL_MM), scale(v, j as f64 * CELL_MM)));
    // 0 unknown, 1 inside, 2 outside
    let mut state = vec![0u8; side * side];
    let slot = |i: i32, j: i32| ((j + half) as usize) * side + (i + half) as usize;
    let occupied = |state: &mut Vec<u8>, i: i32, j: i32| -> bool {
        if i.abs() > half || j.abs() > half {
            return false;
        }
        let k = slot(i, j);
        if state[k] == 0 {
            state[k] = if m.label_at_world(at(i, j)) == label { 1 } else { 2 };
        }
        state[k] == 1
    };
    if !occupied(&mut state, 0, 0) {
        return Err(RadiusError::CentreOutside { label });
    }
    const DIRS: [(i32, i32); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    let mut cells = Vec::new();
    let mut contour = Vec::new();
    let mut seen = vec![false; side * side];
    seen[slot(0, 0)] = true;
    let mut queue = VecDeque::from([(0, 0)]);
    while let Some((i, j)) = queue.pop_front() {
        cells.push((i, j));
        for (di, dj) in DIRS {
            let (a, b) = (i + di, j + dj);
            if occupied(&mut state, a, b) {
                let k = slot(a, b);
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back((a, b));
                }
            } else {
                let x = (i as f64 + 0.5 * di as f64) * CELL_MM;
                let y = (j as f64 + 0.5 * dj as f64) * CELL_MM;
                contour.push((x * x + y * y).sqrt());
            }
        }
    }
    cells.sort_unstable();
    let area = cells.len() as f64 * CELL_MM * CELL_MM;
    Ok(CrossSection {
        center: point,
        tangent: t,
        cells,
        area,
        contour,
    })
}

/// Central-difference tangents; one-sided at the ends.
pub(crate) fn tangents(points: &[Vec3]) -> Vec<Option<Vec3>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return None;
            }
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            normalized(sub(points[b], points[a]))
        })
        .collect()
}

/// Fill every point's `ce_radius` and `mis_radius` from its cross-section.
/// Failed sections take the values of the nearest successful point on the
/// same edge (the earlier one on ties); edges with no successful section
/// keep missing values and are reported.
pub fn annotate_radii(g: &CenterlineGraph, m: &LabeledMask) -> (CenterlineGraph, Vec<String>) {
    let mut out = g.clone();
    let results: Vec<Vec<Option<(f64, f64)>>> = out
        .edges
        .par_iter()
        .map(|e| {
            let tans = tangents(&e.points);
            e.points
                .iter()
                .zip(tans)
                .map(|(&p, t)| {
                    let s = sample_cross_section(m, p, t?, e.label).ok()?;
                    Some((s.ce_radius(), s.mis_radius()))
                })
                .collect()
        })
        .collect();
    let mut diagnostics = Vec::new();
    for (e, vals) in out.edges.iter_mut().zip(results) {
        let valid: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].is_some()).collect();
        if valid.is_empty() {
            diagnostics.push(format!("edge {} (label {}): no valid cross-section", e.id, e.label));
            e.ce_radius = vec![None; vals.len()];
            e.mis_radius = vec![None; vals.len()];
            continue;
        }
        for i in 0..vals.len() {
            let src = *valid
                .iter()
                .min_by_key(|&&k| (k as i64 - i as i64).unsigned_abs())
                .unwrap();
            let (ce, mis) = vals[src].unwrap();
            e.ce_radius[i] = Some(ce);
            e.mis_radius[i] = Some(mis);
        }
    }
    (out, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_builder::GraphEdge;
    use crate::util::{dot, norm};
    use crate::phantom::{rasterize_fn, rotation_about};
    use crate::volume_io::Grid;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        let h = n as f64 * 0.25 / 2.0;
        Grid::new([n; 3], [0.25; 3]).with_origin([-h, -h, -h])
    }

    /// Label-1 tube of radius `r` around the line through the origin along `axis`.
    fn tube(g: &Grid, axis: Vec3, r: f64) -> LabeledMask {
        let a = normalized(axis).unwrap();
        rasterize_fn(g, |p| {
            let along = dot(p, a);
            let off = sub(p, scale(a, along));
            u8::from(norm(off) <= r)
        })
    }

    #[test]
    fn axial_tube_area() {
        let g = grid(48);
        let m = tube(&g, [0.0, 0.0, 1.0], 2.0);
        let s = sample_cross_section(&m, [0.0; 3], [0.0, 0.0, 1.0], 1).unwrap();
        assert!((s.area / (4.0 * PI) - 1.0).abs() < 0.05, "{}", s.area);
        assert!((s.ce_radius() - 2.0).abs() < 0.1);
        assert!((s.ce_radius().powi(2) * PI - s.area).abs() < 1e-9);
        assert!(s.mis_radius() <= s.ce_radius() + 0.05);
        assert!(s.ce_radius() - s.mis_radius() < 0.15);
    }

    #[test]
    fn tilted_plane_gives_ellipse() {
        let g = grid(48);
        let m = tube(&g, [0.0, 0.0, 1.0], 2.0);
        let t = [30f64.to_radians().sin(), 0.0, 30f64.to_radians().cos()];
        let s = sample_cross_section(&m, [0.0; 3], t, 1).unwrap();
        let want = 4.0 * PI / 30f64.to_radians().cos();
        assert!((s.area / want - 1.0).abs() < 0.05, "{} vs {want}", s.area);
    }

    #[test]
    fn only_centre_region_counts() {
        let g = grid(48);
        // two parallel tubes along z, 4 mm apart
        let m = rasterize_fn(&g, |p| {
            let d1 = (p[0] + 2.0).hypot(p[1]);
            let d2 = (p[0] - 2.0).hypot(p[1]);
            u8::from(d1 <= 1.0 || d2 <= 1.0)
        });
        let s = sample_cross_section(&m, [-2.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1).unwrap();
        assert!((s.area / PI - 1.0).abs() < 0.1);
        assert!(s.cells.iter().all(|&(i, _)| (i as f64) * CELL_MM < 1.5));
    }

    #[test]
    fn centre_outside_is_an_error() {
        let g = grid(32);
        let m = tube(&g, [0.0, 0.0, 1.0], 1.0);
        let r = sample_cross_section(&m, [2.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1);
        assert_eq!(r, Err(RadiusError::CentreOutside { label: 1 }));
        let r = sample_cross_section(&m, [0.0; 3], [0.0, 0.0, 1.0], 2);
        assert!(r.is_err());
    }

    #[test]
    fn ellipse_radii() {
        let g = grid(48);
        let m = rasterize_fn(&g, |p| u8::from((p[0] / 2.0).powi(2) + p[1].powi(2) <= 1.0));
        let s = sample_cross_section(&m, [0.0; 3], [0.0, 0.0, 1.0], 1).unwrap();
        assert!((s.ce_radius() / 2f64.sqrt() - 1.0).abs() < 0.05, "{}", s.ce_radius());
        assert!((s.mis_radius() - 1.0).abs() < 0.1, "{}", s.mis_radius());
    }

    #[test]
    fn annotate_tube_and_inherit() {
        let g = grid(64);
        let m = tube(&g, [1.0, 0.0, 0.0], 2.0);
        let mut graph = CenterlineGraph::default();
        let pts: Vec<Vec3> = (0..=24).map(|i| [-6.0 + 0.5 * i as f64, 0.0, 0.0]).collect();
        let a = graph.add_node(pts[0]);
        let b = graph.add_node(pts[24]);
        graph.add_edge(GraphEdge::new((a, b), pts, 1));
        // an edge of a label that is absent everywhere
        let c = graph.add_node([0.0, 0.0, 6.0]);
        graph.add_edge(GraphEdge::new((b, c), vec![[6.0, 0.0, 0.0], [0.0, 0.0, 6.0]], 2));
        let (out, diag) = annotate_radii(&graph, &m);
        assert_eq!(diag.len(), 1);
        for (ce, mis) in out.edges[0].ce_radius.iter().zip(&out.edges[0].mis_radius) {
            let (ce, mis) = (ce.unwrap(), mis.unwrap());
            assert!((ce - 2.0).abs() < 0.1, "{ce}");
            assert!(mis <= ce + 0.05);
        }
        assert!(out.edges[1].ce_radius.iter().all(Option::is_none));
    }

    #[test]
    fn rotation_invariance() {
        let g = grid(64);
        let axis0 = [0.0, 0.0, 1.0];
        let base = tube(&g, axis0, 1.5);
        let s0 = sample_cross_section(&base, [0.0; 3], axis0, 1).unwrap();
        for rot_axis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]] {
            let r = rotation_about(rot_axis, 30f64.to_radians());
            let axis = [0, 1, 2].map(|i| dot(r[i], axis0));
            let m = tube(&g, axis, 1.5);
            let s = sample_cross_section(&m, [0.0; 3], axis, 1).unwrap();
            assert!((s.ce_radius() / s0.ce_radius() - 1.0).abs() < 0.02);
            // p10 of a voxel staircase moves with the lattice phase
            assert!((s.mis_radius() / s0.mis_radius() - 1.0).abs() < 0.06);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        for t in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], normalized([1.0, 2.0, -3.0]).unwrap()] {
            let (u, v) = plane_basis(t);
            assert!(dot(u, t).abs() < 1e-12 && dot(v, t).abs() < 1e-12 && dot(u, v).abs() < 1e-12);
            assert!((norm(u) - 1.0).abs() < 1e-12 && (norm(v) - 1.0).abs() < 1e-12);
        }
    }
}
