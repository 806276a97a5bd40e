//! Interpolating B-splines over recent key points, with one-span
//! extrapolation to predict where the surface is headed.
//!
//! Key points are parameterized centripetally (sqrt-chord), fitted with a
//! clamped degree-k interpolating spline, and the next surface point is read
//! off by evaluating the last polynomial span just beyond the parameter
//! range.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Centripetal parameter values: cumulative square-root chord lengths
/// normalized to [0, 1].
pub fn centripetal_params(points: &[Vec2]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::SplineDegenerate("need at least two points".into()));
    }
    let mut u = Vec::with_capacity(points.len());
    u.push(0.0);
    for w in points.windows(2) {
        let chord = (w[1] - w[0]).norm();
        if chord < 1e-12 {
            return Err(Error::SplineDegenerate("coincident key points".into()));
        }
        u.push(u.last().unwrap() + chord.sqrt());
    }
    let total = *u.last().unwrap();
    for v in &mut u {
        *v /= total;
    }
    Ok(u)
}

/// Clamped knot vector for interpolation at the given parameters: degree+1
/// copies of 0 and 1 at the ends, interior knots by parameter averaging.
fn averaging_knots(params: &[f64], degree: usize) -> Vec<f64> {
    let n = params.len();
    let k = degree;
    let mut knots = vec![0.0; n + k + 1];
    for j in 1..n - k {
        let mean: f64 = params[j..j + k].iter().sum::<f64>() / k as f64;
        knots[k + j] = mean;
    }
    for t in knots.iter_mut().skip(n) {
        *t = 1.0;
    }
    knots
}

/// Fitted interpolating spline over one window of key points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplinePredictor {
    pub degree: usize,
    pub knots: Vec<f64>,
    /// Parameter values of the interpolated points.
    pub params: Vec<f64>,
    /// Control points, one per interpolated point.
    pub control: Vec<Vec2>,
}

/// Basis function values B_{span-k..span} at u (the k+1 non-vanishing ones).
fn basis_funs(knots: &[f64], span: usize, u: f64, k: usize) -> Vec<f64> {
    let mut n = vec![0.0; k + 1];
    let mut left = vec![0.0; k + 1];
    let mut right = vec![0.0; k + 1];
    n[0] = 1.0;
    for j in 1..=k {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Fit an interpolating spline of the given degree through the points.
pub fn fit_spline(points: &[Vec2], degree: usize) -> Result<SplinePredictor> {
    let n = points.len();
    if degree < 1 {
        return Err(Error::SplineDegenerate("degree must be at least 1".into()));
    }
    if n < degree + 1 {
        return Err(Error::SplineDegenerate(format!(
            "need at least {} points for degree {}",
            degree + 1,
            degree
        )));
    }
    let params = centripetal_params(points)?;
    let knots = averaging_knots(&params, degree);
    let predictor_span = |u: f64| find_span(&knots, n, degree, u);
    let mut a = DMatrix::zeros(n, n);
    for (i, &u) in params.iter().enumerate() {
        let span = predictor_span(u);
        let vals = basis_funs(&knots, span, u, degree);
        for (j, v) in vals.iter().enumerate() {
            a[(i, span - degree + j)] = *v;
        }
    }
    let lu = a.lu();
    let solve_axis = |ys: Vec<f64>| -> Result<Vec<f64>> {
        lu.solve(&DVector::from_vec(ys))
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::SplineDegenerate("singular collocation matrix".into()))
    };
    let xs = solve_axis(points.iter().map(|p| p.x).collect())?;
    let ys = solve_axis(points.iter().map(|p| p.y).collect())?;
    let control = xs
        .into_iter()
        .zip(ys)
        .map(|(x, y)| Vec2::new(x, y))
        .collect();
    Ok(SplinePredictor {
        degree,
        knots,
        params,
        control,
    })
}

/// Largest valid span index whose knot interval is at or below u; values
/// beyond the knot range select the boundary span, whose polynomial then
/// extends past the range.
fn find_span(knots: &[f64], n: usize, degree: usize, u: f64) -> usize {
    if u >= knots[n] {
        return n - 1;
    }
    if u <= knots[degree] {
        return degree;
    }
    // Binary search for t_span <= u < t_span+1.
    let (mut lo, mut hi) = (degree, n - 1);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if knots[mid] <= u {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

impl SplinePredictor {
    pub fn point_count(&self) -> usize {
        self.params.len()
    }

    /// De Boor evaluation; parameters outside [0, 1] extend the boundary
    /// span polynomially.
    pub fn eval(&self, u: f64) -> Vec2 {
        let k = self.degree;
        let n = self.control.len();
        let span = find_span(&self.knots, n, k, u);
        let mut d: Vec<Vec2> = (0..=k).map(|j| self.control[span - k + j]).collect();
        for r in 1..=k {
            for j in (r..=k).rev() {
                let i = span - k + j;
                let denom = self.knots[i + k - r + 1] - self.knots[i];
                let alpha = if denom.abs() < 1e-300 {
                    0.0
                } else {
                    (u - self.knots[i]) / denom
                };
                d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
            }
        }
        d[k]
    }

    /// Predicted next surface point, one nominal key-point spacing ahead:
    /// the spline evaluated at u = 1 + 1/(n-1).
    pub fn extrapolate_next(&self) -> Vec2 {
        self.eval(self.next_param())
    }

    pub fn next_param(&self) -> f64 {
        1.0 + 1.0 / (self.point_count() as f64 - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn collinear(n: usize, spacing: f64) -> Vec<Vec2> {
        (0..n)
            .map(|i| Vec2::new(3.0 + spacing * i as f64, -1.0 + 0.5 * spacing * i as f64))
            .collect()
    }

    #[test]
    fn params_strictly_increasing_and_normalized() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(3.0, 3.0),
            Vec2::new(7.0, 2.0),
            Vec2::new(9.0, 5.0),
        ];
        let u = centripetal_params(&pts).unwrap();
        assert_eq!(u[0], 0.0);
        assert_eq!(*u.last().unwrap(), 1.0);
        for w in u.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn knot_vector_structure() {
        let pts = collinear(5, 2.0);
        let sp = fit_spline(&pts, 3).unwrap();
        assert_eq!(sp.knots.len(), 9);
        assert_eq!(&sp.knots[..4], &[0.0; 4]);
        assert_eq!(&sp.knots[5..], &[1.0; 4]);
        let expected = (sp.params[1] + sp.params[2] + sp.params[3]) / 3.0;
        assert_abs_diff_eq!(sp.knots[4], expected, epsilon = 1e-15);
    }

    #[test]
    fn interpolates_its_key_points() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 2.5),
            Vec2::new(6.0, 7.0),
            Vec2::new(11.0, 8.0),
            Vec2::new(13.0, 12.0),
        ];
        let sp = fit_spline(&pts, 3).unwrap();
        for (u, p) in sp.params.iter().zip(&pts) {
            assert!((sp.eval(*u) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_give_exact_linear_extrapolation() {
        for n in [4, 5, 6, 8] {
            let spacing = 2.5;
            let pts = collinear(n, spacing);
            let sp = fit_spline(&pts, 3).unwrap();
            let step = pts[1] - pts[0];
            let expected = pts[n - 1] + step;
            let got = sp.extrapolate_next();
            assert!(
                (got - expected).norm() < 1e-6,
                "n={n}: predicted {got:?} expected {expected:?}"
            );
            // Curve stays on the line in between.
            for i in 0..=20 {
                let u = i as f64 / 20.0;
                let p = sp.eval(u);
                let along = (p - pts[0]).dot(&step.normalize());
                let off = (p - (pts[0] + step.normalize() * along)).norm();
                assert!(off < 1e-9, "off-line by {off}");
            }
        }
    }

    #[test]
    fn next_param_follows_point_count() {
        for n in [4, 5, 7, 10] {
            let sp = fit_spline(&collinear(n, 2.0), 3).unwrap();
            assert_abs_diff_eq!(
                sp.next_param(),
                1.0 + 1.0 / (n as f64 - 1.0),
                epsilon = 1e-15
            );
        }
        let sp5 = fit_spline(&collinear(5, 2.0), 3).unwrap();
        assert_abs_diff_eq!(sp5.next_param(), 1.25, epsilon = 1e-15);
    }

    #[test]
    fn circle_arc_fidelity() {
        let r = 80.0;
        let c = Vec2::new(10.0, -4.0);
        // Five points spanning 2 mm arcs, like gated key points on a round
        // object.
        let pts: Vec<Vec2> = (0..5)
            .map(|i| {
                let a = 0.3 + 2.0 / r * i as f64;
                c + Vec2::new(a.cos(), a.sin()) * r
            })
            .collect();
        let sp = fit_spline(&pts, 3).unwrap();
        for (u, p) in sp.params.iter().zip(&pts) {
            assert!((sp.eval(*u) - p).norm() < 1e-9);
        }
        for i in 0..=40 {
            let u = i as f64 / 40.0;
            let dev = ((sp.eval(u) - c).norm() - r).abs();
            assert!(dev < 0.1, "mid-span deviation {dev}");
        }
        let next = sp.extrapolate_next();
        let dev = ((next - c).norm() - r).abs();
        assert!(dev < 0.5, "extrapolated point off-circle by {dev}");
        // The prediction continues forward along the arc, near the matched
        // arc position one spacing ahead.
        let ahead_angle = 0.3 + 2.0 / r * 5.0;
        let ahead = c + Vec2::new(ahead_angle.cos(), ahead_angle.sin()) * r;
        assert!((next - ahead).norm() < 0.5);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let mut pts = collinear(5, 2.0);
        pts[2] = pts[1];
        assert!(matches!(
            fit_spline(&pts, 3),
            Err(Error::SplineDegenerate(_))
        ));
        assert!(matches!(
            fit_spline(&collinear(3, 2.0), 3),
            Err(Error::SplineDegenerate(_))
        ));
    }

    proptest! {
        /// Random gated walks (every consecutive pair at least 2 mm apart)
        /// are interpolated to numerical precision, for every window size.
        #[test]
        fn interpolation_residual_below_tolerance(
            n in 4usize..9,
            seed_angle in 0.0..(2.0 * PI),
            turns in proptest::collection::vec(-0.5..0.5f64, 8),
            steps in proptest::collection::vec(2.0..6.0f64, 8),
        ) {
            let mut pts = vec![Vec2::new(0.0, 0.0)];
            let mut angle = seed_angle;
            for i in 0..n - 1 {
                angle += turns[i];
                let p = *pts.last().unwrap()
                    + Vec2::new(angle.cos(), angle.sin()) * steps[i];
                pts.push(p);
            }
            let sp = fit_spline(&pts, 3).unwrap();
            for (u, p) in sp.params.iter().zip(&pts) {
                prop_assert!((sp.eval(*u) - p).norm() < 1e-9);
            }
        }
    }
}
