//! Terminal trimming and moving-average smoothing of edge polylines.

use super::CenterlineGraph;
use crate::util::{dist, polyline_length};
use crate::volume_io::{DistanceField, Vec3};

/// Upper bound on the arc length removed at a degree-1 terminus.
pub const TRIM_CAP_MM: f64 = 1.0;

/// Trim every degree-1 terminus by `min(f_d, trim_cap_mm)` of arc length,
/// then smooth interior polyline points with a centred moving average of
/// `window` points (truncated at the ends). Endpoints stay fixed.
///
/// Edges too short to lose both trims are left untrimmed.
///
/// # Panics
/// If `window` is even or below 3.
pub fn trim_and_smooth(
    g: &CenterlineGraph,
    dist_field: &DistanceField,
    window: usize,
    trim_cap_mm: f64,
) -> CenterlineGraph {
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    let mut out = g.clone();
    for k in 0..out.edges.len() {
        let e = &out.edges[k];
        if e.is_self_loop() {
            continue;
        }
        let (a, b) = e.nodes;
        let trim = |n: usize| {
            if out.nodes[n].degree == 1 {
                dist_field.at_world(out.nodes[n].coords).min(trim_cap_mm).max(0.0)
            } else {
                0.0
            }
        };
        let (ta, tb) = (trim(a), trim(b));
        if ta + tb <= 0.0 || e.length() <= ta + tb {
            continue;
        }
        let mut points = e.points.clone();
        let mut ce = e.ce_radius.clone();
        let mut mis = e.mis_radius.clone();
        if ta > 0.0 {
            let kept = trim_front(&points, ta);
            let cut = points.len() - kept.len();
            ce.drain(..cut);
            mis.drain(..cut);
            ce[0] = None;
            mis[0] = None;
            points = kept;
        }
        if tb > 0.0 {
            points.reverse();
            let kept = trim_front(&points, tb);
            let cut = points.len() - kept.len();
            let n = ce.len();
            ce.truncate(n - cut);
            mis.truncate(n - cut);
            *ce.last_mut().unwrap() = None;
            *mis.last_mut().unwrap() = None;
            points = kept;
            points.reverse();
        }
        out.nodes[a].coords = points[0];
        out.nodes[b].coords = *points.last().unwrap();
        let e = &mut out.edges[k];
        e.points = points;
        e.ce_radius = ce;
        e.mis_radius = mis;
    }
    for e in &mut out.edges {
        e.points = moving_average(&e.points, window);
    }
    out
}

/// Drop `t` mm of arc from the front; the new first point is interpolated.
fn trim_front(points: &[Vec3], t: f64) -> Vec<Vec3> {
    let mut acc = 0.0;
    for i in 1..points.len() {
        let seg = dist(points[i - 1], points[i]);
        if acc + seg >= t {
            let f = if seg > 0.0 { (t - acc) / seg } else { 0.0 };
            let p = [0, 1, 2].map(|d| points[i - 1][d] + f * (points[i][d] - points[i - 1][d]));
            let mut out = vec![p];
            let rest = if dist(p, points[i]) < 1e-9 {
                &points[i + 1..]
            } else {
                &points[i..]
            };
            out.extend_from_slice(rest);
            if out.len() == 1 {
                out.push(*points.last().unwrap());
            }
            return out;
        }
        acc += seg;
    }
    debug_assert!(polyline_length(points) < t);
    points[points.len().saturating_sub(2)..].to_vec()
}

fn moving_average(points: &[Vec3], window: usize) -> Vec<Vec3> {
    let n = points.len();
    if n <= 2 {
        return points.to_vec();
    }
    let h = window / 2;
    let mut out = points.to_vec();
    for (i, o) in out.iter_mut().enumerate().take(n - 1).skip(1) {
        // truncated, not shrunk, at the ends
        let win = &points[i.saturating_sub(h)..=(i + h).min(n - 1)];
        *o = [0, 1, 2].map(|d| win.iter().map(|p| p[d]).sum::<f64>() / win.len() as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::test_util::graph;
    use super::super::GraphEdge;
    use super::*;
    use crate::volume_io::{Grid, Volume};

    fn field(value: f32) -> DistanceField {
        let g = Grid::new([80, 40, 40], [0.25; 3]).with_origin([-5.0, -5.0, -5.0]);
        DistanceField::new(Volume::filled(g, value))
    }

    #[test]
    fn zigzag_flattened() {
        let mut g = CenterlineGraph::default();
        let pts: Vec<Vec3> = (0..21)
            .map(|i| [i as f64 * 0.25, if i % 2 == 0 { -0.25 } else { 0.25 }, 0.0])
            .collect();
        let a = g.add_node(pts[0]);
        let b = g.add_node(pts[20]);
        g.add_edge(GraphEdge::new((a, b), pts.clone(), 1));
        // both ends are interior to a larger graph: no trimming
        g.nodes[a].degree = 3;
        g.nodes[b].degree = 3;
        let out = trim_and_smooth(&g, &field(1.0), 5, TRIM_CAP_MM);
        let s = &out.edges[0].points;
        assert_eq!(s.len(), pts.len());
        assert_eq!(s[0], pts[0]);
        assert_eq!(s[20], pts[20]);
        for (i, p) in s.iter().enumerate().take(20).skip(1) {
            // direct convolution oracle
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(20);
            let want: f64 = pts[lo..=hi].iter().map(|q| q[1]).sum::<f64>() / (hi - lo + 1) as f64;
            assert!((p[1] - want).abs() < 1e-12);
            assert!(p[1].abs() <= 0.3 * 0.25);
        }
    }

    #[test]
    fn two_points_unchanged() {
        let g = graph(&[[0.0; 3], [0.25, 0.0, 0.0]], &[(0, 1, 1)]);
        let out = trim_and_smooth(&g, &field(1.0), 5, TRIM_CAP_MM);
        assert_eq!(out, g);
    }

    #[test]
    fn trim_capped_at_one_mm() {
        let g = graph(&[[0.0; 3], [2.0, 0.0, 0.0], [6.0, 0.0, 0.0], [2.0, 3.0, 0.0]], &[
            (0, 1, 1),
            (1, 2, 2),
            (1, 3, 3),
        ]);
        let out = trim_and_smooth(&g, &field(2.0), 5, TRIM_CAP_MM);
        let e = &out.edges[1];
        assert!((g.edges[1].length() - e.length() - 1.0).abs() < 1e-9);
        assert_eq!(out.nodes[2].coords, [5.0, 0.0, 0.0]);
        assert_eq!(out.nodes[1].coords, g.nodes[1].coords);
    }

    #[test]
    fn trim_follows_small_boundary_distance() {
        let g = graph(&[[0.0; 3], [4.0, 0.0, 0.0]], &[(0, 1, 1)]);
        let out = trim_and_smooth(&g, &field(0.4), 3, TRIM_CAP_MM);
        assert!((out.edges[0].length() - 3.2).abs() < 1e-6);
        assert_eq!(out.edges[0].points.len(), out.edges[0].ce_radius.len());
    }

    #[test]
    #[should_panic]
    fn even_window_rejected() {
        let g = CenterlineGraph::default();
        trim_and_smooth(&g, &field(1.0), 4, TRIM_CAP_MM);
    }
}
