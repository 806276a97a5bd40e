//! Quasi-static whisker shaft model.
//!
//! The shaft is a constant-curvature planar arc rooted at the sensor base,
//! initial tangent along base +X, bending toward +Y only. Bending curvature
//! maps affinely to the magnetometer reading. Ground-truth contact against a
//! contour is resolved by finding the smallest curvature that reconciles the
//! arc with the solid.

use crate::error::{Error, Result};
use crate::geometry::{Contour, Pose2D, Vec2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Physical and sensing parameters of one whisker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhiskerParams {
    /// Shaft length in mm.
    pub shaft_length: f64,
    /// Curvature-to-flux scale in µT·mm.
    pub measurement_gain: f64,
    /// Rest reading of the straight shaft, in µT.
    pub static_offset: f64,
    /// Largest bending curvature the shaft sustains, 1/mm.
    pub curvature_max: f64,
    /// Arc discretization used by contact resolution.
    pub arc_samples: usize,
    /// Standard deviation of additive measurement noise, µT.
    pub noise_std: f64,
}

impl Default for WhiskerParams {
    fn default() -> Self {
        Self {
            shaft_length: 75.0,
            measurement_gain: 2.0e5,
            static_offset: -8300.0,
            curvature_max: 0.02,
            arc_samples: 200,
            noise_std: 3.0,
        }
    }
}

impl WhiskerParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.shaft_length > 0.0) {
            return err("shaft_length must be positive");
        }
        if !(self.measurement_gain > 0.0) {
            return err("measurement_gain must be positive");
        }
        if !(self.curvature_max > 0.0) {
            return err("curvature_max must be positive");
        }
        if self.curvature_max * self.shaft_length >= PI {
            return err("curvature_max * shaft_length must stay below pi (no self-wrap)");
        }
        if self.arc_samples < 16 {
            return err("arc_samples must be at least 16");
        }
        if self.noise_std < 0.0 {
            return err("noise_std must be non-negative");
        }
        Ok(())
    }

    /// Reading at full bend, the other end of the measurement range.
    pub fn saturation_measurement(&self) -> f64 {
        self.static_offset - self.measurement_gain * self.curvature_max
    }
}

/// What part of the shaft, if any, is touching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    None,
    Tip,
    Tangential,
}

impl fmt::Display for ContactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ContactKind::None => "none",
            ContactKind::Tip => "tip",
            ContactKind::Tangential => "tangential",
        };
        f.write_str(s)
    }
}

/// Resolved mechanical state of the shaft against the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiskerState {
    /// Bending curvature, 1/mm, in [0, curvature_max].
    pub curvature: f64,
    /// Arc length of the binding contact sample, mm.
    pub contact_s: Option<f64>,
    pub contact_kind: ContactKind,
    pub contact_point_world: Option<Vec2>,
}

impl WhiskerState {
    pub fn free() -> Self {
        Self {
            curvature: 0.0,
            contact_s: None,
            contact_kind: ContactKind::None,
            contact_point_world: None,
        }
    }
}

/// One magnetometer sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Flux reading along the sensing axis, µT.
    pub z: f64,
}

/// Point at arc length `s` on the constant-curvature arc, base frame.
///
/// Closed form (sin(ks)/k, (1-cos(ks))/k); series expansion below
/// |ks| < 1e-6 keeps full accuracy through the straight-shaft limit.
pub fn arc_point(curvature: f64, s: f64) -> Vec2 {
    let t = curvature * s;
    if t.abs() < 1e-6 {
        let t2 = t * t;
        Vec2::new(
            s * (1.0 - t2 / 6.0 + t2 * t2 / 120.0),
            s * (t / 2.0 - t * t2 / 24.0),
        )
    } else {
        // 2 sin^2(t/2) = 1 - cos(t) without cancellation at small bend.
        let h = (0.5 * t).sin();
        Vec2::new(t.sin() / curvature, 2.0 * h * h / curvature)
    }
}

/// Tip of the shaft at the given curvature, base frame.
pub fn tip_position(params: &WhiskerParams, curvature: f64) -> Vec2 {
    arc_point(curvature, params.shaft_length)
}

/// Curvature of the unique base-rooted arc passing through a contact point.
pub fn curvature_from_contact(contact: Vec2) -> Result<f64> {
    let r2 = contact.norm_squared();
    if r2 < 1e-12 {
        return Err(Error::DegenerateContact);
    }
    Ok(2.0 * contact.y / r2)
}

/// Exact affine curvature-to-flux map.
pub fn measurement_from_curvature(params: &WhiskerParams, curvature: f64) -> Measurement {
    Measurement {
        z: params.static_offset - params.measurement_gain * curvature,
    }
}

/// Inverse of the affine map: curvature that produces a given reading.
pub fn curvature_from_measurement(params: &WhiskerParams, z: f64) -> f64 {
    (params.static_offset - z) / params.measurement_gain
}

/// Affine reading plus seeded Gaussian noise (skipped when noise_std = 0).
pub fn noisy_measurement<R: Rng + ?Sized>(
    params: &WhiskerParams,
    curvature: f64,
    rng: &mut R,
) -> Measurement {
    let exact = measurement_from_curvature(params, curvature);
    if params.noise_std == 0.0 {
        return exact;
    }
    let noise = Normal::new(0.0, params.noise_std).expect("noise_std validated non-negative");
    Measurement {
        z: exact.z + noise.sample(rng),
    }
}

/// Surface tolerance for contact resolution, mm.
const CONTACT_TOL: f64 = 1e-6;
/// Curvature bisection tolerance, 1/mm.
const KAPPA_TOL: f64 = 1e-9;
/// Coarse scan resolution over the curvature range.
const SCAN_STEPS: usize = 128;

/// Minimum signed distance over the sampled arc and the binding sample index.
fn arc_clearance(
    pose: &Pose2D,
    contour: &Contour,
    params: &WhiskerParams,
    curvature: f64,
) -> (f64, usize) {
    let n = params.arc_samples;
    let mut min_sd = f64::INFINITY;
    let mut binding = 0;
    for i in 0..n {
        let s = params.shaft_length * i as f64 / (n - 1) as f64;
        let p = pose.to_world(arc_point(curvature, s));
        let sd = contour.signed_distance(p);
        if sd < min_sd {
            min_sd = sd;
            binding = i;
        }
    }
    (min_sd, binding)
}

/// Resolve the shaft's quasi-static contact state against a contour.
///
/// Free at rest, the shaft bends toward the surface and stops at the first
/// touch; rooted in overlap, it takes the smallest curvature that relieves
/// penetration. Either way the returned curvature is minimal: reducing it by
/// 1e-6 re-opens the contact (or re-enters the solid).
pub fn solve_contact(
    pose: &Pose2D,
    contour: &Contour,
    params: &WhiskerParams,
) -> Result<WhiskerState> {
    params.validate()?;
    let clearance = |k: f64| arc_clearance(pose, contour, params, k);
    let (c0, b0) = clearance(0.0);
    if c0.abs() <= CONTACT_TOL {
        return Ok(contact_state(pose, params, 0.0, b0));
    }

    // Predicate form shared by both branches: seek the first curvature where
    // the arc reaches the admissible band, then bisect onto the crossing.
    let seek = |reached: &dyn Fn(f64) -> bool| -> Option<f64> {
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=SCAN_STEPS {
            let k = params.curvature_max * i as f64 / SCAN_STEPS as f64;
            if reached(k) {
                hi = Some(k);
                break;
            }
            lo = k;
        }
        let mut hi = hi?;
        while hi - lo > KAPPA_TOL {
            let mid = 0.5 * (lo + hi);
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };

    if c0 > CONTACT_TOL {
        // Free at rest: bend toward +Y until the arc first kisses the surface.
        let touched = |k: f64| clearance(k).0 <= CONTACT_TOL;
        match seek(&touched) {
            Some(k) => {
                let (_, binding) = clearance(k);
                Ok(contact_state(pose, params, k, binding))
            }
            None => Ok(WhiskerState::free()),
        }
    } else {
        // Straight shaft penetrates: find the smallest relieving curvature.
        let relieved = |k: f64| clearance(k).0 >= -CONTACT_TOL;
        match seek(&relieved) {
            Some(k) => {
                let (_, binding) = clearance(k);
                Ok(contact_state(pose, params, k, binding))
            }
            None => Err(Error::Unresolvable),
        }
    }
}

fn contact_state(
    pose: &Pose2D,
    params: &WhiskerParams,
    curvature: f64,
    binding: usize,
) -> WhiskerState {
    let n = params.arc_samples;
    let s = params.shaft_length * binding as f64 / (n - 1) as f64;
    let kind = if binding == n - 1 {
        ContactKind::Tip
    } else {
        ContactKind::Tangential
    };
    WhiskerState {
        curvature,
        contact_s: Some(s),
        contact_kind: kind,
        contact_point_world: Some(pose.to_world(arc_point(curvature, s))),
    }
}
