//! Deflection measurement fields over the contact plane.
//!
//! A field assigns the magnetometer reading z = f(x, y) to every base-frame
//! contact position. Its level curves are deflected shaft shapes, which is
//! what the level-set tracer walks. The fitted polynomial model implements
//! the same interface, so the tracer runs identically on either.

use crate::geometry::Vec2;
use crate::whisker::WhiskerParams;

/// Scalar measurement surface with an analytic gradient.
pub trait DeflectionField {
    /// Field value at a base-frame point, µT.
    fn value(&self, p: Vec2) -> f64;
    /// Analytic gradient, µT/mm.
    fn gradient(&self, p: Vec2) -> Vec2;
    /// Whether the point lies inside the field's trusted domain.
    fn contains(&self, p: Vec2) -> bool;
    /// (min, max) measured value over the domain, µT.
    fn z_range(&self) -> (f64, f64);
}

/// Exact field induced by the constant-curvature shaft model: a contact at
/// (x, y) bends the shaft to curvature 2y/(x²+y²), and the reading follows
/// the affine curvature map.
#[derive(Debug, Clone)]
pub struct SyntheticField {
    params: WhiskerParams,
}

impl SyntheticField {
    pub fn new(params: WhiskerParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &WhiskerParams {
        &self.params
    }

    /// Curvature of the shaft contacting at p (clamped denominator).
    pub fn curvature_at(&self, p: Vec2) -> f64 {
        let r2 = p.norm_squared().max(1e-12);
        2.0 * p.y / r2
    }
}

impl DeflectionField for SyntheticField {
    fn value(&self, p: Vec2) -> f64 {
        self.params.static_offset - self.params.measurement_gain * self.curvature_at(p)
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        let g = self.params.measurement_gain;
        let r2 = p.norm_squared().max(1e-12);
        let r4 = r2 * r2;
        Vec2::new(
            4.0 * g * p.x * p.y / r4,
            -2.0 * g * (p.x * p.x - p.y * p.y) / r4,
        )
    }

    fn contains(&self, p: Vec2) -> bool {
        let m = self.params.shaft_length + 2.0;
        p.x >= -1.0 && p.x <= m && p.y >= -1.0 && p.y <= m
    }

    fn z_range(&self) -> (f64, f64) {
        (self.params.saturation_measurement(), self.params.static_offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whisker::{arc_point, measurement_from_curvature};
    use approx::assert_abs_diff_eq;

    fn field() -> SyntheticField {
        SyntheticField::new(WhiskerParams::default())
    }

    #[test]
    fn arc_points_lie_on_level_curves() {
        let f = field();
        for k in [0.001, 0.005, 0.012, 0.02] {
            let z = measurement_from_curvature(f.params(), k).z;
            for i in 1..=20 {
                let s = 75.0 * i as f64 / 20.0;
                assert_abs_diff_eq!(f.value(arc_point(k, s)), z, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = field();
        let h = 1e-5;
        for &(x, y) in &[(30.0, 5.0), (50.0, 20.0), (10.0, 3.0), (60.0, 1.0)] {
            let p = Vec2::new(x, y);
            let g = f.gradient(p);
            let fx = (f.value(p + Vec2::new(h, 0.0)) - f.value(p - Vec2::new(h, 0.0))) / (2.0 * h);
            let fy = (f.value(p + Vec2::new(0.0, h)) - f.value(p - Vec2::new(0.0, h))) / (2.0 * h);
            assert_abs_diff_eq!(g.x, fx, epsilon = 1e-3 * g.norm().max(1.0));
            assert_abs_diff_eq!(g.y, fy, epsilon = 1e-3 * g.norm().max(1.0));
        }
    }

    #[test]
    fn gradient_perpendicular_to_shaft_tangent() {
        let f = field();
        let k = 0.008;
        for i in 2..=20 {
            let s = 75.0 * i as f64 / 20.0;
            let p = arc_point(k, s);
            // Shaft tangent at arc length s has direction (cos ks, sin ks).
            let t = Vec2::new((k * s).cos(), (k * s).sin());
            let g = f.gradient(p);
            let cosine = t.dot(&g) / (t.norm() * g.norm());
            assert!(cosine.abs() < 1e-7, "tangent not on level curve: {cosine}");
        }
    }

    #[test]
    fn range_and_domain() {
        let f = field();
        let (lo, hi) = f.z_range();
        assert_abs_diff_eq!(lo, -12_300.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, -8300.0, epsilon = 1e-9);
        assert!(f.contains(Vec2::new(40.0, 20.0)));
        assert!(!f.contains(Vec2::new(-5.0, 0.0)));
        assert!(!f.contains(Vec2::new(80.0, 0.0)));
    }

    #[test]
    fn origin_gradient_is_finite() {
        let f = field();
        let g = f.gradient(Vec2::zeros());
        assert!(g.x.is_finite() && g.y.is_finite());
    }
}
