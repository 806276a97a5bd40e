//! Closed-loop active perception: collision gating, windowed filtering,
//! key-point extraction, spline look-ahead steering, and the PID/total-
//! velocity command pair.
//!
//! Per iteration: gate on the collision threshold, localize the tip from
//! the measurement, refresh the noise window and Kalman filter, admit the
//! filtered world-frame tip as a key point when stride and spacing allow,
//! refit the spline predictor on fresh key points, and command the next
//! orientation plus radial/tangential velocities.

use crate::error::Error;
use crate::filter::{FilterState, NoiseWindow};
use crate::geometry::{normalize_angle, Pose2D, Vec2};
use crate::spline::{fit_spline, SplinePredictor};
use crate::tip::{tip_from_measurement, CharacterizedModel, TipEstimate};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

/// The commanded orientation is the travel tangent along the surface; the
/// shaft axis is mounted a quarter turn clockwise from it so base +X presses
/// radially at the surface and base +Y leads along the travel direction.
pub const TANGENT_TO_SHAFT: f64 = -FRAC_PI_2;

/// A spline extrapolation whose direction disagrees with the deque's end
/// chord by more than this angle (radians) is treated as an artifact of the
/// cubic's end segment (uneven key-point gaps make it hook sideways or even
/// backwards) and the end chord steers instead.
pub const EXTRAPOLATION_SANITY: f64 = 0.45;

/// Largest angle (radians) the spline look-ahead may lead the deque's end
/// chord by when it does steer. The end segment inflates curvature even on
/// clean data, and the held direction now walks all the way to the goal, so
/// an unbounded lead from one bad refit can wind the shaft into a tangential
/// wrap before the next key point arrives to correct it.
pub const SPLINE_LEAD_MAX: f64 = 0.2;

/// Readings closer to the static offset than this (µT) are treated as a free
/// shaft: the tip model still evaluates there but the rest tip lies on no
/// surface, so such ticks are never localized. Well past the noise floor yet
/// far below any real contact of interest.
pub const FREE_READING_EPS: f64 = 25.0;

/// Per-tick slew of the held travel direction toward the latest spline goal,
/// radians. Reorienting sweeps the tip across the surface, so adopting a
/// refit direction in one jump presses or releases the shaft in a pulse the
/// deflection loop counters with lag and overshoot; ramping it turns the
/// pulse into a steady rate the integral term tracks. At the loop rate the
/// ramp still out-turns the steady demand of the tightest preset curve.
pub const THETA_STEP_MAX: f64 = 0.006;

/// Total held-direction travel (radians) one spline refit may authorize.
/// The per-tick ramp draws against this budget and stalls when it runs out,
/// so a goal left stale by a key-point drought cannot keep walking the
/// direction off a transient bad fit; each fresh refit re-arms it. Sized to
/// out-turn the tightest preset corner between consecutive key points.
pub const THETA_REFIT_BUDGET: f64 = 0.08;

/// Fraction of the total speed the radial axis may claim once traversal has
/// begun. The remainder guarantees a tangential creep even with the radial
/// loop saturated, so the contact geometry keeps evolving instead of
/// deadlocking in a press-release cycle against a concave seam.
pub const TANGENTIAL_RESERVE: f64 = 0.98;

/// Per-tick integral bleed while the reading sits inside the collision band.
/// A brief light excursion keeps most of the standing integral (curved
/// surfaces need one to counter the steady press from heading slew), while a
/// long detach drains it within a couple of seconds so stale contact history
/// cannot command a blind retreat during free flight.
pub const INTEGRAL_FREE_DECAY: f64 = 0.95;

/// Radial acceleration limit (mm/s per second) applied while the reading
/// sits inside the collision band. A barely bent shaft at grazing incidence
/// is so sensitive that one tick of proportional correction overshoots the
/// band and the loop flutters at half the tick rate; rate-limiting the
/// radial command there forces the press to creep back onto the surface.
/// Outside the band sensitivity is tame and the limit stays out of the way.
pub const LIGHT_RADIAL_ACCEL: f64 = 9.0;

/// Controller gains and gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Collision threshold relative to the static reading, µT.
    pub collision_threshold: f64,
    /// Deflection setpoint held during following, µT.
    pub target_deflection: f64,
    /// Fixed total linear speed, mm/s.
    pub total_velocity: f64,
    /// Key points kept for the spline window.
    pub keypoint_count: usize,
    /// Minimum iterations between admitted key points.
    pub keypoint_stride: usize,
    /// Minimum spatial separation between admitted key points, mm.
    pub keypoint_min_spacing: f64,
    pub spline_degree: usize,
    /// Samples in the measurement-noise estimation window.
    pub filter_window: usize,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the accumulated integral error, µT·s.
    pub integral_clamp: f64,
    /// Heading slew limit applied by the world stepper, rad/s.
    pub max_turn_rate: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            collision_threshold: 300.0,
            target_deflection: -8760.0,
            total_velocity: 10.0,
            keypoint_count: 5,
            keypoint_stride: 10,
            keypoint_min_spacing: 4.0,
            spline_degree: 3,
            filter_window: 10,
            kp: 0.0075,
            ki: 0.002,
            kd: 0.0001,
            integral_clamp: 5000.0,
            max_turn_rate: 0.35,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let err = |m: &str| Err(Error::InvalidParams(m.into()));
        if self.keypoint_count < self.spline_degree + 1 {
            return err("keypoint_count must be at least spline_degree + 1");
        }
        if !(self.total_velocity > 0.0) {
            return err("total_velocity must be positive");
        }
        if !(self.collision_threshold > 0.0) {
            return err("collision_threshold must be positive");
        }
        if !(self.keypoint_min_spacing > 0.0) {
            return err("keypoint_min_spacing must be positive");
        }
        if !(self.max_turn_rate > 0.0) {
            return err("max_turn_rate must be positive");
        }
        if self.filter_window < 2 {
            return err("filter_window needs at least two samples");
        }
        Ok(())
    }
}

/// Deflection beyond the threshold relative to the static reading?
pub fn detect_collision(z: f64, static_z: f64, cfg: &ControlConfig) -> bool {
    (z - static_z).abs() >= cfg.collision_threshold
}

/// Stride- and spacing-gated ring of recent world-frame surface points.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPointDeque {
    points: VecDeque<Vec2>,
    capacity: usize,
    stride: usize,
    min_spacing: f64,
    last_push_iter: Option<usize>,
}

impl KeyPointDeque {
    pub fn new(cfg: &ControlConfig) -> Self {
        Self {
            points: VecDeque::with_capacity(cfg.keypoint_count),
            capacity: cfg.keypoint_count,
            stride: cfg.keypoint_stride,
            min_spacing: cfg.keypoint_min_spacing,
            last_push_iter: None,
        }
    }

    /// Admit the point if the iteration stride and spatial spacing gates
    /// both pass and the point continues the deque's travel direction, so
    /// the stored sequence stays orderly for spline extrapolation. Contact
    /// points slide backwards along the surface while the press deepens, and
    /// admitting those retrograde samples would fold the chain onto itself.
    /// The oldest point falls out at capacity.
    pub fn maybe_push(&mut self, p: Vec2, iter: usize) -> bool {
        if let Some(last_iter) = self.last_push_iter {
            if iter - last_iter < self.stride {
                return false;
            }
        }
        if let Some(last) = self.points.back() {
            if (p - last).norm() < self.min_spacing {
                return false;
            }
        }
        let n = self.points.len();
        if n >= 2 {
            let dir = self.points[n - 1] - self.points[n - 2];
            if (p - self.points[n - 1]).dot(&dir) < 0.0 {
                return false;
            }
        }
        if n == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back(p);
        self.last_push_iter = Some(iter);
        true
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.points.len() == self.capacity
    }

    pub fn points(&self) -> Vec<Vec2> {
        self.points.iter().copied().collect()
    }
}

/// PID over the deflection-magnitude error with clamped integral and output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    pub fn update(&mut self, error: f64, cfg: &ControlConfig, dt: f64) -> f64 {
        let derivative = match self.prev_error {
            Some(prev) => (error - prev) / dt,
            None => 0.0,
        };
        self.prev_error = Some(error);
        // Conditional integration: while the output is already saturated in
        // the error's own direction, integrating further only winds the
        // integral up and prolongs recovery once the error reverses.
        let unsat = cfg.kp * error + cfg.ki * self.integral + cfg.kd * derivative;
        let saturated_deeper =
            unsat.abs() >= cfg.total_velocity && unsat.signum() == error.signum();
        if !saturated_deeper {
            self.integral =
                (self.integral + error * dt).clamp(-cfg.integral_clamp, cfg.integral_clamp);
        }
        let raw = cfg.kp * error + cfg.ki * self.integral + cfg.kd * derivative;
        raw.clamp(-cfg.total_velocity, cfg.total_velocity)
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Radial correction speed from the deflection error, mm/s. Positive under-
/// deflection (too light a touch) commands approach.
pub fn pid_update(pid: &mut PidState, z: f64, static_z: f64, cfg: &ControlConfig, dt: f64) -> f64 {
    let error = (cfg.target_deflection - static_z).abs() - (z - static_z).abs();
    pid.update(error, cfg, dt)
}

/// Remaining speed budget spent along the travel tangent.
pub fn constrain_tangential(v_x: f64, cfg: &ControlConfig) -> f64 {
    (cfg.total_velocity * cfg.total_velocity - v_x * v_x).max(0.0).sqrt()
}

/// Travel direction toward the predicted next surface point; `None` when the
/// points coincide (keep the previous orientation).
pub fn target_orientation(current: Vec2, next: Vec2) -> Option<f64> {
    let d = next - current;
    if d.norm() < 1e-12 {
        return None;
    }
    Some(d.y.atan2(d.x))
}

/// Travel direction from a fresh spline fit: the chord from the newest key
/// point toward the extrapolated next point, sanity-checked against the
/// deque's end chord and replaced by it when the extrapolation hooks away.
pub fn steer_direction(deque: &KeyPointDeque, current: Vec2, next: Vec2) -> Option<f64> {
    let spline_theta = target_orientation(current, next);
    let pts = deque.points();
    let n = pts.len();
    let chord_theta = if n >= 2 {
        target_orientation(pts[n - 2], pts[n - 1])
    } else {
        None
    };
    match (spline_theta, chord_theta) {
        (Some(s), Some(c)) => {
            let lead = normalize_angle(s - c);
            if lead.abs() > EXTRAPOLATION_SANITY {
                Some(c)
            } else {
                Some(normalize_angle(c + lead.clamp(-SPLINE_LEAD_MAX, SPLINE_LEAD_MAX)))
            }
        }
        (s, c) => s.or(c),
    }
}

/// One iteration's motion command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Commanded travel-tangent orientation, rad, world frame.
    pub target_orientation: f64,
    /// Radial/approach speed along base +X, mm/s.
    pub v_x: f64,
    /// Tangential speed along base +Y, mm/s.
    pub v_y: f64,
}

/// Everything the controller carries between iterations.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Latched on the first collision and never cleared: from then on every
    /// reading is localized, the straight-shaft rest reading included.
    pub contacted: bool,
    pub filter: FilterState,
    pub window: NoiseWindow,
    pub keypoints: KeyPointDeque,
    pub pid: PidState,
    pub spline: Option<SplinePredictor>,
    /// Travel direction the latest spline refit asked for, world frame.
    pub theta_goal: Option<f64>,
    /// Remaining held-direction travel the latest refit still authorizes.
    pub theta_budget: f64,
    /// Commanded travel tangent, world frame, slewed toward the goal one
    /// step per tick; valid once a spline has produced one.
    pub held_theta: Option<f64>,
    /// Radial speed commanded last tick, mm/s.
    pub prev_v_x: f64,
    pub iter: usize,
    /// Detach events: the deflection dropped back inside the collision
    /// band after tracking above it.
    pub slip_count: usize,
    was_above: bool,
    /// Raw and filtered tip from the current iteration, for logging.
    pub last_raw_tip: Option<TipEstimate>,
    pub last_filtered_world: Option<Vec2>,
    pub keypoint_pushed: bool,
}

impl ControllerState {
    pub fn new(cfg: &ControlConfig) -> Self {
        Self {
            contacted: false,
            filter: FilterState::default(),
            window: NoiseWindow::new(cfg.filter_window),
            keypoints: KeyPointDeque::new(cfg),
            pid: PidState::default(),
            spline: None,
            theta_goal: None,
            theta_budget: 0.0,
            held_theta: None,
            prev_v_x: 0.0,
            iter: 0,
            slip_count: 0,
            was_above: false,
            last_raw_tip: None,
            last_filtered_world: None,
            keypoint_pushed: false,
        }
    }

    fn approach_command(&self, pose: &Pose2D, cfg: &ControlConfig) -> ControlCommand {
        // Straight-line approach along the shaft axis; the commanded tangent
        // converts back to exactly the current heading.
        ControlCommand {
            target_orientation: normalize_angle(pose.heading - TANGENT_TO_SHAFT),
            v_x: cfg.total_velocity,
            v_y: 0.0,
        }
    }
}

/// One controller iteration; call at the loop rate with the latest
/// measurement and the sensor's current pose.
pub fn control_step(
    state: &mut ControllerState,
    z: f64,
    static_z: f64,
    pose: &Pose2D,
    cm: &CharacterizedModel,
    cfg: &ControlConfig,
    dt: f64,
) -> ControlCommand {
    let iter = state.iter;
    state.iter += 1;
    state.keypoint_pushed = false;

    let above = detect_collision(z, static_z, cfg);
    if !state.contacted {
        if !above {
            state.last_raw_tip = None;
            state.last_filtered_world = None;
            return state.approach_command(pose, cfg);
        }
        state.contacted = true;
    } else if state.was_above && !above {
        // Dropped back inside the collision band mid-track: a detach the
        // PID approach term will recover from.
        state.slip_count += 1;
    }
    state.was_above = above;
    if !above {
        // Bleed the integral while detached rather than zeroing it at the
        // crossing: an instant reset forces the standing integral that holds
        // the setpoint on curved surfaces to rebuild from scratch and turns
        // every light excursion into a detach-reattach limit cycle.
        state.pid.integral *= INTEGRAL_FREE_DECAY;
    }

    // Localize only while the reading shows some bend and sits inside the
    // characterized range. A free reading describes no surface point, and a
    // reading past saturation yields no tip either way; both skip this tick
    // and the PID's approach or retreat recovers on its own.
    state.last_raw_tip = None;
    let mut filtered_world = None;
    if (z - static_z).abs() > FREE_READING_EPS {
        if let Ok(raw) = tip_from_measurement(cm, z) {
            state.last_raw_tip = Some(raw);
            state.window.push(&raw);
            if !state.filter.initialized {
                state.filter = FilterState::init(&raw);
            }
            if let Some(r) = state.window.estimate_r() {
                state.filter.predict().expect("filter initialized above");
                state.filter.update(&raw, r).expect("variance floored");
            }
            filtered_world = Some(pose.to_world(state.filter.x_hat));
        }
    }
    state.last_filtered_world = filtered_world;

    // Key points wait for a full noise window so the filter output is
    // measurement-informed rather than the raw initial prior.
    if state.window.is_full() {
        if let Some(p) = filtered_world {
            if state.keypoints.maybe_push(p, iter) {
                state.keypoint_pushed = true;
                if state.keypoints.is_full() {
                    if let Ok(sp) = fit_spline(&state.keypoints.points(), cfg.spline_degree) {
                        let next = sp.extrapolate_next();
                        if let Some(theta) = steer_direction(&state.keypoints, p, next) {
                            state.theta_goal = Some(theta);
                            state.theta_budget = THETA_REFIT_BUDGET;
                        }
                        state.spline = Some(sp);
                    }
                }
            }
        }
    }

    // Slew the held direction toward the goal a little every tick rather
    // than jumping at refits, so reorientation loads the shaft at a steady
    // rate the deflection loop tracks instead of in pulses it overshoots.
    // The walk draws on the refit budget and stalls when it runs out.
    if let Some(goal) = state.theta_goal {
        state.held_theta = Some(match state.held_theta {
            Some(prev) => {
                let cap = THETA_STEP_MAX.min(state.theta_budget);
                let step = normalize_angle(goal - prev).clamp(-cap, cap);
                state.theta_budget -= step.abs();
                normalize_angle(prev + step)
            }
            None => goal,
        });
    }

    let target_theta = state
        .held_theta
        .unwrap_or_else(|| normalize_angle(pose.heading - TANGENT_TO_SHAFT));
    let mut v_x = pid_update(&mut state.pid, z, static_z, cfg, dt);
    if !above {
        let dv = LIGHT_RADIAL_ACCEL * dt;
        v_x = state.prev_v_x + (v_x - state.prev_v_x).clamp(-dv, dv);
    }
    let v_y = if state.keypoints.is_empty() {
        0.0
    } else {
        let cap = TANGENTIAL_RESERVE * cfg.total_velocity;
        v_x = v_x.clamp(-cap, cap);
        constrain_tangential(v_x, cfg)
    };
    state.prev_v_x = v_x;
    ControlCommand {
        target_orientation: target_theta,
        v_x,
        v_y,
    }
}
