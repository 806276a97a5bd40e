//! Tip-contact localization.
//!
//! A tip contact's measurement pins the deflected shaft to one level curve
//! of the measurement surface. Tracing that curve from the root for the
//! shaft's arc length lands on the tip. The slow tracer runs offline; its
//! resampled results are condensed into two univariate polynomials in z (the
//! characterized model) for microsecond runtime lookups.

use crate::calibration::FitReport;
use crate::error::{Error, Result};
use crate::field::DeflectionField;
use crate::geometry::Vec2;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Level-set tracer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Fixed step length, mm.
    pub step_size: f64,
    /// Weight of the corrective (loss-descent) component against the
    /// tangential component.
    pub loss_blend: f64,
    /// Hard iteration budget.
    pub max_steps: usize,
    /// Trace start point, base frame.
    pub root: Vec2,
}

impl TraceConfig {
    /// Budget sized for a given shaft length: 1.5x the ideal step count, the
    /// slack absorbing the initial capture excursion.
    pub fn for_shaft(shaft_length: f64, step_size: f64) -> Self {
        Self {
            step_size,
            loss_blend: 0.5,
            max_steps: (1.5 * shaft_length / step_size).ceil() as usize,
            root: Vec2::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidParams("step_size must be positive".into()));
        }
        if !(self.loss_blend > 0.0 && self.loss_blend <= 1.0) {
            return Err(Error::InvalidParams("loss_blend must be in (0, 1]".into()));
        }
        Ok(())
    }
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self::for_shaft(75.0, 1e-3)
    }
}

/// Localized tip contact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipEstimate {
    /// Base-frame tip position, mm.
    pub position: Vec2,
    /// Arc length walked by the tracer, mm.
    pub arc_length_traced: f64,
    pub converged: bool,
}

fn trace_core<F: DeflectionField>(
    field: &F,
    z_c: f64,
    arc_len: f64,
    cfg: &TraceConfig,
    mut path: Option<&mut Vec<Vec2>>,
) -> Result<TipEstimate> {
    cfg.validate()?;
    let (z_lo, z_hi) = field.z_range();
    let margin = 1e-6 * (z_hi - z_lo).abs().max(1.0);
    if z_c < z_lo - margin || z_c > z_hi + margin {
        return Err(Error::OutOfRange {
            z: z_c,
            min: z_lo,
            max: z_hi,
        });
    }

    let mut p = cfg.root;
    // Initial orientation: away from the root along base +X, the direction
    // every level curve leaves the root in.
    let mut prev = Vec2::new(1.0, 0.0);
    let mut traced = 0.0;
    let mut steps = 0usize;
    if let Some(path) = path.as_deref_mut() {
        path.clear();
        path.push(p);
    }
    while traced + 0.5 * cfg.step_size < arc_len {
        if steps >= cfg.max_steps {
            return Err(Error::NotConverged);
        }
        if !field.contains(p) {
            return Err(Error::LeftDomain {
                steps,
                x: p.x,
                y: p.y,
            });
        }
        let g = field.gradient(p);
        let gn = g.norm();
        let dir = if gn < 1e-9 {
            // The synthetic surface has a true stationary point at the root
            // itself; the first step may pass through it. Anywhere else a
            // vanished gradient means the trace is lost.
            if steps == 0 {
                prev
            } else {
                return Err(Error::GradientVanished {
                    steps,
                    x: p.x,
                    y: p.y,
                });
            }
        } else {
            let ghat = g / gn;
            let mut tangent = Vec2::new(-ghat.y, ghat.x);
            if tangent.dot(&prev) < 0.0 {
                tangent = -tangent;
            }
            let resid = field.value(p) - z_c;
            if resid.abs() <= gn * cfg.step_size {
                // Within one step of the level set: pure tangent motion.
                // Without this band the corrective term alternates sign each
                // step and the walk zigzags off the curve.
                tangent
            } else {
                let correct = -resid.signum() * ghat;
                let blended = tangent + cfg.loss_blend * correct;
                blended / blended.norm()
            }
        };
        p += dir * cfg.step_size;
        prev = dir;
        traced += cfg.step_size;
        steps += 1;
        if let Some(path) = path.as_deref_mut() {
            path.push(p);
        }
    }
    Ok(TipEstimate {
        position: p,
        arc_length_traced: traced,
        converged: true,
    })
}

/// Trace the level curve f = z_c from the root for the shaft arc length.
pub fn trace_tip<F: DeflectionField>(
    field: &F,
    z_c: f64,
    arc_len: f64,
    cfg: &TraceConfig,
) -> Result<TipEstimate> {
    trace_core(field, z_c, arc_len, cfg, None)
}

/// Same as [`trace_tip`] but also returns the visited polyline.
pub fn trace_path<F: DeflectionField>(
    field: &F,
    z_c: f64,
    arc_len: f64,
    cfg: &TraceConfig,
) -> Result<(TipEstimate, Vec<Vec2>)> {
    let mut path = Vec::new();
    let est = trace_core(field, z_c, arc_len, cfg, Some(&mut path))?;
    Ok((est, path))
}

/// Fast runtime map from a measurement to the tip position: one univariate
/// polynomial per axis over the scaled measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterizedModel {
    pub degree: usize,
    /// Ascending-power coefficients over the scaled measurement.
    pub coeffs_x: Vec<f64>,
    pub coeffs_y: Vec<f64>,
    /// Valid measurement range, µT.
    pub z_min: f64,
    pub z_max: f64,
    /// Shaft length the traces were run for, mm.
    pub shaft_length: f64,
    pub report_x: FitReport,
    pub report_y: FitReport,
}

fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<(Vec<f64>, FitReport)> {
    let n = xs.len();
    let mut a = DMatrix::zeros(n, degree + 1);
    for (r, &x) in xs.iter().enumerate() {
        let mut pow = 1.0;
        for c in 0..=degree {
            a[(r, c)] = pow;
            pow *= x;
        }
    }
    let b = DVector::from_column_slice(ys);
    let qr = a.qr();
    let r = qr.r();
    let mut diag_min = f64::INFINITY;
    let mut diag_max = 0.0f64;
    for i in 0..=degree {
        diag_min = diag_min.min(r[(i, i)].abs());
        diag_max = diag_max.max(r[(i, i)].abs());
    }
    if diag_min < 1e-12 * diag_max {
        return Err(Error::RankDeficient);
    }
    let rhs = qr.q().transpose() * &b;
    let coeffs = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient)?;
    let coeffs: Vec<f64> = coeffs.iter().copied().collect();

    let eval = |x: f64| {
        let mut acc = 0.0;
        for &c in coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    let mean = ys.iter().sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        ss_res += (eval(x) - y) * (eval(x) - y);
        ss_tot += (y - mean) * (y - mean);
    }
    let rmse = (ss_res / n as f64).sqrt();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-18 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok((coeffs, FitReport { rmse, r_squared }))
}

/// Trace `n_samples` evenly spaced level curves across the field's range and
/// condense the tips into per-axis polynomials of the measurement.
pub fn build_characterized_model<F: DeflectionField>(
    field: &F,
    shaft_length: f64,
    n_samples: usize,
    degree: usize,
    cfg: &TraceConfig,
) -> Result<CharacterizedModel> {
    if n_samples < degree + 1 {
        return Err(Error::InvalidParams(
            "need at least degree+1 trace anchors".into(),
        ));
    }
    let (z_lo, z_hi) = field.z_range();
    let zc = 0.5 * (z_lo + z_hi);
    let zh = (0.5 * (z_hi - z_lo)).max(1e-9);
    let mut zs = Vec::with_capacity(n_samples);
    let mut xs = Vec::with_capacity(n_samples);
    let mut ys = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let z = z_lo + (z_hi - z_lo) * i as f64 / (n_samples - 1) as f64;
        let tip = trace_tip(field, z, shaft_length, cfg)?;
        zs.push((z - zc) / zh);
        xs.push(tip.position.x);
        ys.push(tip.position.y);
    }
    let (coeffs_x, report_x) = polyfit(&zs, &xs, degree)?;
    let (coeffs_y, report_y) = polyfit(&zs, &ys, degree)?;
    Ok(CharacterizedModel {
        degree,
        coeffs_x,
        coeffs_y,
        z_min: z_lo,
        z_max: z_hi,
        shaft_length,
        report_x,
        report_y,
    })
}

impl CharacterizedModel {
    fn scaled(&self, z: f64) -> f64 {
        let zc = 0.5 * (self.z_min + self.z_max);
        let zh = (0.5 * (self.z_max - self.z_min)).max(1e-9);
        (z - zc) / zh
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_min && z <= self.z_max
    }
}

/// Runtime tip lookup: two polynomial evaluations.
pub fn tip_from_measurement(cm: &CharacterizedModel, z: f64) -> Result<TipEstimate> {
    if !cm.contains(z) {
        return Err(Error::OutOfRange {
            z,
            min: cm.z_min,
            max: cm.z_max,
        });
    }
    let u = cm.scaled(z);
    let eval = |coeffs: &[f64]| {
        let mut acc = 0.0;
        for &c in coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    };
    Ok(TipEstimate {
        position: Vec2::new(eval(&cm.coeffs_x), eval(&cm.coeffs_y)),
        arc_length_traced: cm.shaft_length,
        converged: true,
    })
}
