//! Least-squares cubic B-spline fits to centerline polylines.

use nalgebra::{DMatrix, DVector};

use crate::util::{cross, dist, norm, sub};
use crate::volume_io::Vec3;

/// Default spacing of interior knots, in polyline points.
pub const KNOT_STRIDE: usize = 3;
/// Parameter samples used for the arc length.
pub const ARC_SAMPLES: usize = 1000;
/// Parameter samples used for the mean curvature.
pub const CURVATURE_SAMPLES: usize = 100;

/// Clamped B-spline curve on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub control: Vec<Vec3>,
}

impl BSpline {
    fn span(&self, t: f64) -> usize {
        let n = self.control.len() - 1;
        let p = self.degree;
        if t >= self.knots[n + 1] {
            return n;
        }
        if t <= self.knots[p] {
            return p;
        }
        // last k with knots[k] <= t < knots[k + 1]
        let mut k = p;
        while k < n && self.knots[k + 1] <= t {
            k += 1;
        }
        k
    }

    /// Point at parameter `t` (de Boor).
    pub fn eval(&self, t: f64) -> Vec3 {
        let p = self.degree;
        if self.control.len() == 1 || p == 0 {
            let k = if p == 0 { self.span(t) } else { 0 };
            return self.control[k.min(self.control.len() - 1)];
        }
        let k = self.span(t);
        let mut d: Vec<Vec3> = (0..=p).map(|j| self.control[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + k - p;
                let den = self.knots[i + p - r + 1] - self.knots[i];
                let a = if den > 0.0 { (t - self.knots[i]) / den } else { 0.0 };
                d[j] = [0, 1, 2].map(|c| (1.0 - a) * d[j - 1][c] + a * d[j][c]);
            }
        }
        d[p]
    }

    /// The derivative curve (one degree lower).
    pub fn derivative(&self) -> BSpline {
        let p = self.degree;
        if p == 0 {
            return BSpline {
                degree: 0,
                knots: vec![0.0, 1.0],
                control: vec![[0.0; 3]],
            };
        }
        let control = (0..self.control.len() - 1)
            .map(|i| {
                let den = self.knots[i + p + 1] - self.knots[i + 1];
                let f = if den > 0.0 { p as f64 / den } else { 0.0 };
                [0, 1, 2].map(|c| f * (self.control[i + 1][c] - self.control[i][c]))
            })
            .collect();
        BSpline {
            degree: p - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            control,
        }
    }

    /// Values of every basis function at `t` (Cox-de Boor).
    fn basis(&self, t: f64) -> Vec<f64> {
        let n = self.control.len();
        let p = self.degree;
        let u = &self.knots;
        let k = self.span(t);
        let mut out = vec![0.0; n];
        // triangular table of the p+1 non-zero functions
        let mut nfun = vec![0.0; p + 1];
        nfun[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = t - u[k + 1 - j];
            right[j] = u[k + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let den = right[r + 1] + left[j - r];
                let tmp = if den != 0.0 { nfun[r] / den } else { 0.0 };
                nfun[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            nfun[j] = saved;
        }
        for (j, v) in nfun.into_iter().enumerate() {
            out[k - p + j] = v;
        }
        out
    }
}

/// A fitted segment curve: a cubic spline, or a straight line when the
/// polyline has fewer than four points.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentCurve {
    Line(Vec3, Vec3),
    Spline(BSpline),
}

impl SegmentCurve {
    pub fn eval(&self, t: f64) -> Vec3 {
        match self {
            SegmentCurve::Line(a, b) => [0, 1, 2].map(|c| a[c] + t * (b[c] - a[c])),
            SegmentCurve::Spline(s) => s.eval(t),
        }
    }

    /// Length of the polyline through `ARC_SAMPLES` uniform parameter
    /// samples.
    pub fn arc_length(&self) -> f64 {
        match self {
            SegmentCurve::Line(a, b) => dist(*a, *b),
            SegmentCurve::Spline(_) => {
                let n = ARC_SAMPLES;
                let pts: Vec<Vec3> = (0..n).map(|i| self.eval(i as f64 / (n - 1) as f64)).collect();
                pts.windows(2).map(|w| dist(w[0], w[1])).sum()
            }
        }
    }

    /// Mean of |γ′ × γ″| / |γ′|³ over `CURVATURE_SAMPLES` uniform parameter
    /// samples.
    pub fn mean_curvature(&self) -> f64 {
        match self {
            SegmentCurve::Line(..) => 0.0,
            SegmentCurve::Spline(s) => {
                let d1 = s.derivative();
                let d2 = d1.derivative();
                let n = CURVATURE_SAMPLES;
                let mut sum = 0.0;
                let mut count = 0;
                for i in 0..n {
                    let t = i as f64 / (n - 1) as f64;
                    let a = d1.eval(t);
                    let b = d2.eval(t);
                    let speed = norm(a);
                    if speed > 1e-12 {
                        sum += norm(cross(a, b)) / speed.powi(3);
                        count += 1;
                    }
                }
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            }
        }
    }
}

/// Chord-length parameters in [0, 1].
fn chord_params(points: &[Vec3]) -> Vec<f64> {
    let mut t = vec![0.0];
    for w in points.windows(2) {
        t.push(t.last().unwrap() + dist(w[0], w[1]));
    }
    let total = *t.last().unwrap();
    if total > 0.0 {
        for v in &mut t {
            *v /= total;
        }
    }
    t
}

/// Fit a clamped cubic spline by least squares with interior knots at the
/// parameters of every `stride`-th point. The end points are interpolated
/// exactly. Fewer than four distinct points give a straight line.
pub fn fit_segment_spline_with(polyline: &[Vec3], stride: usize) -> SegmentCurve {
    let mut pts: Vec<Vec3> = Vec::with_capacity(polyline.len());
    for &p in polyline {
        if pts.last().is_none_or(|&q| dist(p, q) > 1e-12) {
            pts.push(p);
        }
    }
    if pts.len() < 4 {
        let a = polyline.first().copied().unwrap_or([0.0; 3]);
        let b = polyline.last().copied().unwrap_or(a);
        return SegmentCurve::Line(a, b);
    }
    let t = chord_params(&pts);
    let n = pts.len();
    let stride = stride.max(1);
    let mut interior: Vec<f64> = Vec::new();
    let mut k = stride;
    while k + 2 < n {
        if interior.last().is_none_or(|&x| t[k] - x > 1e-9) && t[k] > 1e-9 && t[k] < 1.0 - 1e-9 {
            interior.push(t[k]);
        }
        k += stride;
    }
    let mut knots = vec![0.0; 4];
    knots.extend(&interior);
    knots.extend([1.0; 4]);
    let m = interior.len() + 4;
    let mut spline = BSpline {
        degree: 3,
        knots,
        control: vec![[0.0; 3]; m],
    };
    spline.control[0] = pts[0];
    spline.control[m - 1] = pts[n - 1];
    // rows for all points; unknowns are the interior control points
    let free = m - 2;
    let mut a = DMatrix::<f64>::zeros(n, free);
    let mut rhs = DMatrix::<f64>::zeros(n, 3);
    for i in 0..n {
        let b = spline.basis(t[i]);
        for j in 0..free {
            a[(i, j)] = b[j + 1];
        }
        let r = sub(sub(pts[i], scale3(pts[0], b[0])), scale3(pts[n - 1], b[m - 1]));
        for c in 0..3 {
            rhs[(i, c)] = r[c];
        }
    }
    let svd = a.svd(true, true);
    for c in 0..3 {
        let col = DVector::from_column_slice(rhs.column(c).as_slice());
        let x = svd.solve(&col, 1e-12).expect("SVD with both factors");
        for j in 0..free {
            spline.control[j + 1][c] = x[j];
        }
    }
    SegmentCurve::Spline(spline)
}

fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// [`fit_segment_spline_with`] at the default knot stride.
pub fn fit_segment_spline(polyline: &[Vec3]) -> SegmentCurve {
    fit_segment_spline_with(polyline, KNOT_STRIDE)
}
