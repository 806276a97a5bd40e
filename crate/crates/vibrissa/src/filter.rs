//! Constant-state per-axis Kalman filtering of the tip contact position.
//!
//! The process model is "the contact point does not move": prediction keeps
//! the mean and inflates variance by a small fixed Q. Measurement noise R is
//! re-estimated every iteration from the sample variance of a sliding window
//! of raw tip estimates, so the filter trusts localization exactly as much
//! as its recent scatter warrants.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::tip::TipEstimate;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Lower bound on the estimated measurement variance, mm².
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Fixed per-axis process variance, mm².
pub const PROCESS_VARIANCE: f64 = 1e-5;
/// Initial prior variance at (re-)initialization, mm².
pub const INITIAL_VARIANCE: f64 = 10.0;

/// Per-axis scalar Kalman state over the base-frame tip position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    /// Posterior mean, mm.
    pub x_hat: Vec2,
    /// Posterior variance per axis, mm².
    pub p: Vec2,
    /// Process variance per axis, mm².
    pub q: Vec2,
    pub initialized: bool,
}

impl Default for FilterState {
    fn default() -> Self {
        Self {
            x_hat: Vec2::zeros(),
            p: Vec2::new(INITIAL_VARIANCE, INITIAL_VARIANCE),
            q: Vec2::new(PROCESS_VARIANCE, PROCESS_VARIANCE),
            initialized: false,
        }
    }
}

impl FilterState {
    /// Start (or restart) the filter on the first contact's tip estimate.
    pub fn init(first_tip: &TipEstimate) -> Self {
        Self {
            x_hat: first_tip.position,
            ..Self::default()
        }
        .tap_initialized()
    }

    fn tap_initialized(mut self) -> Self {
        self.initialized = true;
        self
    }

    /// Constant-state prediction: mean unchanged, variance grows by Q.
    pub fn predict(&mut self) -> Result<()> {
        if !self.initialized {
            return Err(Error::FilterUninitialized);
        }
        self.p += self.q;
        Ok(())
    }

    /// Scalar measurement update per axis with the given noise variance.
    pub fn update(&mut self, measured: &TipEstimate, r: Vec2) -> Result<()> {
        if !self.initialized {
            return Err(Error::FilterUninitialized);
        }
        if !(r.x > 0.0) || !(r.y > 0.0) {
            return Err(Error::NonPositiveVariance(r.x.min(r.y)));
        }
        for axis in 0..2 {
            let prior_p = self.p[axis];
            let k = prior_p / (prior_p + r[axis]);
            self.x_hat[axis] += k * (measured.position[axis] - self.x_hat[axis]);
            self.p[axis] = (1.0 - k) * prior_p;
        }
        Ok(())
    }
}

/// Sliding window of recent raw tip estimates used to gauge measurement
/// noise empirically.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseWindow {
    buf: VecDeque<Vec2>,
    capacity: usize,
}

impl NoiseWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, tip: &TipEstimate) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(tip.position);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    /// Per-axis unbiased sample variance of the window, floored; `None`
    /// until the window has filled once.
    pub fn estimate_r(&self) -> Option<Vec2> {
        if !self.is_full() || self.capacity < 2 {
            return None;
        }
        let n = self.buf.len() as f64;
        let mut mean = Vec2::zeros();
        for p in &self.buf {
            mean += p;
        }
        mean /= n;
        let mut var = Vec2::zeros();
        for p in &self.buf {
            let d = p - mean;
            var.x += d.x * d.x;
            var.y += d.y * d.y;
        }
        var /= n - 1.0;
        Some(Vec2::new(var.x.max(VARIANCE_FLOOR), var.y.max(VARIANCE_FLOOR)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    fn tip(x: f64, y: f64) -> TipEstimate {
        TipEstimate {
            position: Vec2::new(x, y),
            arc_length_traced: 75.0,
            converged: true,
        }
    }

    #[test]
    fn init_sets_prior() {
        let f = FilterState::init(&tip(40.0, 5.0));
        assert_eq!(f.x_hat, Vec2::new(40.0, 5.0));
        assert_eq!(f.p, Vec2::new(10.0, 10.0));
        assert_eq!(f.q, Vec2::new(1e-5, 1e-5));
        assert!(f.initialized);
        // Re-init replaces the state entirely.
        let mut g = f;
        g.predict().unwrap();
        g.update(&tip(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let h = FilterState::init(&tip(40.0, 5.0));
        assert_eq!(h.x_hat, f.x_hat);
        assert_eq!(h.p, f.p);
    }

    #[test]
    fn predict_grows_variance_only() {
        let mut f = FilterState::init(&tip(1.0, 2.0));
        let x_before = f.x_hat;
        f.predict().unwrap();
        assert_eq!(f.x_hat, x_before);
        assert_abs_diff_eq!(f.p.x, 10.00001, epsilon = 1e-15);
        let mut g = FilterState::init(&tip(0.0, 0.0));
        for _ in 0..1000 {
            g.predict().unwrap();
        }
        assert_abs_diff_eq!(g.p.x, 10.0 + 1000.0 * 1e-5, epsilon = 1e-12);
    }

    #[test]
    fn update_hand_check() {
        let mut f = FilterState::init(&tip(0.0, 0.0));
        f.predict().unwrap();
        f.update(&tip(1.0, 1.0), Vec2::new(1.0, 1.0)).unwrap();
        let prior_p = 10.0 + 1e-5;
        let k = prior_p / (prior_p + 1.0);
        assert_abs_diff_eq!(f.x_hat.x, k, epsilon = 1e-12);
        assert_abs_diff_eq!(f.p.x, (1.0 - k) * prior_p, epsilon = 1e-12);
        assert_abs_diff_eq!(f.x_hat.y, f.x_hat.x, epsilon = 1e-15);
    }

    #[test]
    fn update_limiting_cases() {
        // Tiny R with loose prior: measurement dominates.
        let mut f = FilterState::init(&tip(0.0, 0.0));
        f.predict().unwrap();
        f.update(&tip(3.0, -2.0), Vec2::new(VARIANCE_FLOOR, VARIANCE_FLOOR))
            .unwrap();
        assert_abs_diff_eq!(f.x_hat.x, 3.0, epsilon = 1e-5);
        assert_abs_diff_eq!(f.x_hat.y, -2.0, epsilon = 1e-5);
        // Huge R: measurement ignored.
        let mut g = FilterState::init(&tip(1.0, 1.0));
        g.predict().unwrap();
        let p_before = g.p;
        g.update(&tip(100.0, 100.0), Vec2::new(1e15, 1e15)).unwrap();
        assert_abs_diff_eq!(g.x_hat.x, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.p.x, p_before.x, epsilon = 1e-9);
    }

    #[test]
    fn update_rejects_bad_variance() {
        let mut f = FilterState::init(&tip(0.0, 0.0));
        f.predict().unwrap();
        assert!(matches!(
            f.update(&tip(1.0, 1.0), Vec2::new(0.0, 1.0)),
            Err(Error::NonPositiveVariance(_))
        ));
        let mut unready = FilterState::default();
        assert!(matches!(unready.predict(), Err(Error::FilterUninitialized)));
        assert!(matches!(
            unready.update(&tip(1.0, 1.0), Vec2::new(1.0, 1.0)),
            Err(Error::FilterUninitialized)
        ));
    }

    #[test]
    fn variance_monotone_through_cycle() {
        let mut f = FilterState::init(&tip(0.0, 0.0));
        for i in 0..50 {
            let before = f.p;
            f.predict().unwrap();
            assert!(f.p.x > before.x && f.p.y > before.y);
            let predicted = f.p;
            f.update(&tip(i as f64 * 0.1, 0.0), Vec2::new(0.5, 0.5)).unwrap();
            assert!(f.p.x < predicted.x && f.p.y < predicted.y);
        }
    }

    #[test]
    fn axis_symmetry() {
        let mut a = FilterState::init(&tip(1.0, -4.0));
        let mut b = FilterState::init(&tip(-4.0, 1.0));
        for i in 0..20 {
            let m = (i as f64 * 0.3).sin();
            a.predict().unwrap();
            b.predict().unwrap();
            a.update(&tip(m, 2.0 * m), Vec2::new(0.3, 0.7)).unwrap();
            b.update(&tip(2.0 * m, m), Vec2::new(0.7, 0.3)).unwrap();
            assert_abs_diff_eq!(a.x_hat.x, b.x_hat.y, epsilon = 1e-14);
            assert_abs_diff_eq!(a.x_hat.y, b.x_hat.x, epsilon = 1e-14);
        }
    }

    #[test]
    fn window_variance_hand_checks() {
        let mut w = NoiseWindow::new(10);
        for _ in 0..10 {
            w.push(&tip(4.0, -2.0));
        }
        let r = w.estimate_r().unwrap();
        assert_eq!(r, Vec2::new(VARIANCE_FLOOR, VARIANCE_FLOOR));

        let mut w = NoiseWindow::new(10);
        for i in 0..10 {
            let v = (i % 2) as f64;
            w.push(&tip(v, v));
        }
        let r = w.estimate_r().unwrap();
        // Five zeros and five ones: unbiased variance 5/18.
        assert_abs_diff_eq!(r.x, 5.0 / 18.0, epsilon = 1e-12);

        let mut doubled = NoiseWindow::new(10);
        for i in 0..10 {
            let v = 2.0 * (i % 2) as f64;
            doubled.push(&tip(v, v));
        }
        assert_abs_diff_eq!(doubled.estimate_r().unwrap().x, 4.0 * r.x, epsilon = 1e-12);
    }

    #[test]
    fn window_gates_until_full() {
        let mut w = NoiseWindow::new(5);
        for i in 0..4 {
            w.push(&tip(i as f64, 0.0));
            assert!(w.estimate_r().is_none());
        }
        w.push(&tip(4.0, 0.0));
        assert!(w.estimate_r().is_some());
        // Ring behavior: oldest evicted.
        for i in 5..8 {
            w.push(&tip(i as f64, 0.0));
        }
        assert_eq!(w.len(), 5);
        w.clear();
        assert!(w.is_empty());
    }

    #[test]
    fn stationary_truth_noise_suppression() {
        let truth = Vec2::new(35.0, 12.0);
        let sigma = 0.3;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
        let mut raw = Vec::new();
        let mut filtered = Vec::new();
        let mut window = NoiseWindow::new(10);
        let mut filter = None;
        for _ in 0..1000 {
            let m = tip(
                truth.x + normal.sample(&mut rng),
                truth.y + normal.sample(&mut rng),
            );
            raw.push(m.position);
            window.push(&m);
            let f = filter.get_or_insert_with(|| FilterState::init(&m));
            if let Some(r) = window.estimate_r() {
                f.predict().unwrap();
                f.update(&m, r).unwrap();
            }
            filtered.push(f.x_hat);
        }
        let std = |pts: &[Vec2], axis: usize| {
            let mean = pts.iter().map(|p| p[axis]).sum::<f64>() / pts.len() as f64;
            (pts.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / pts.len() as f64)
                .sqrt()
        };
        for axis in 0..2 {
            let r = std(&raw, axis);
            let f = std(&filtered, axis);
            assert!(f <= r / 2.0, "axis {axis}: filtered {f} vs raw {r}");
        }
    }
}
