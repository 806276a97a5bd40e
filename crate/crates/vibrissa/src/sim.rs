//! Closed-loop world stepping and the two experiment drivers: flat-wall
//! distance sweeps with a fixed sensor, and full contour-following trials,
//! scored against ground truth.

use crate::control::{
    control_step, detect_collision, ControlCommand, ControlConfig, ControllerState,
    TANGENT_TO_SHAFT,
};
use crate::filter::{FilterState, NoiseWindow};
use crate::geometry::{normalize_angle, Contour, ContourSpec, Pose2D, Vec2};
use crate::tip::{tip_from_measurement, CharacterizedModel};
use crate::whisker::{noisy_measurement, solve_contact, ContactKind, WhiskerParams};
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Coverage is scored by marking fixed-width arc-length buckets along the
/// contour, one mark per reconstructed point's closest boundary position.
pub const COVERAGE_BUCKET: f64 = 2.0;

/// An open contour counts as fully traversed once the tracked contact point
/// comes within this arc-length margin (mm) of the far boundary end.
pub const END_MARGIN: f64 = 1.0;

/// One contour-following trial: what to touch, where to start, and how long
/// to run. Bundles the sensor and controller settings so a single document
/// reproduces the trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub contour: ContourSpec,
    pub contour_pose: Pose2D,
    pub start: Pose2D,
    /// Control loop rate, Hz.
    pub tick_rate: f64,
    /// Trial length, s.
    pub duration: f64,
    pub whisker: WhiskerParams,
    pub control: ControlConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::cylinder()
    }
}

impl ScenarioConfig {
    /// Cylinder of diameter 160 mm, approached head-on from the left.
    pub fn cylinder() -> Self {
        Self {
            contour: ContourSpec::Circle { radius: 80.0 },
            contour_pose: Pose2D::new(120.0, 0.0, 0.0),
            start: Pose2D::new(-40.0, 0.0, 0.0),
            tick_rate: 30.0,
            duration: 100.0,
            whisker: WhiskerParams::default(),
            control: ControlConfig::default(),
            seed: 0,
        }
    }

    /// Square slab with rounded corners (160 x 160, corner radius 40).
    pub fn rounded_rectangle() -> Self {
        Self {
            contour: ContourSpec::RoundedRectangle {
                width: 160.0,
                height: 160.0,
                corner_radius: 40.0,
            },
            contour_pose: Pose2D::new(130.0, 0.0, 0.0),
            duration: 110.0,
            ..Self::cylinder()
        }
    }

    /// Regular octagon, side 70 mm, corners rounded at 30 mm.
    pub fn octagon() -> Self {
        Self {
            contour: ContourSpec::RoundedPolygon {
                sides: 8,
                side_length: 70.0,
                corner_radius: 30.0,
            },
            contour_pose: Pose2D::new(135.0, 0.0, 0.0),
            duration: 105.0,
            ..Self::cylinder()
        }
    }

    /// Open wall: flat shelf, filleted ramp, upper shelf. The solid side is
    /// below; the sensor starts above the low shelf pointing down and
    /// traverses left to right.
    pub fn wall() -> Self {
        Self {
            contour: ContourSpec::Polyline {
                vertices: vec![[340.0, 60.0], [220.0, 60.0], [140.0, 20.0], [0.0, 20.0]],
                fillet_radius: 25.0,
            },
            contour_pose: Pose2D::identity(),
            start: Pose2D::new(20.0, 100.0, -FRAC_PI_2),
            duration: 50.0,
            ..Self::cylinder()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick_rate > 0.0) {
            return Err(crate::Error::InvalidParams(
                "tick_rate must be positive".into(),
            ));
        }
        if !(self.duration > 0.0) {
            return Err(crate::Error::InvalidParams(
                "duration must be positive".into(),
            ));
        }
        self.contour.validate()?;
        self.whisker.validate()?;
        self.control.validate()
    }
}

/// One tick of a trial's time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickEntry {
    pub tick: usize,
    pub pose: Pose2D,
    /// Measurement fed to the controller, µT.
    pub z: f64,
    pub raw_tip_world: Option<Vec2>,
    pub filtered_tip_world: Option<Vec2>,
    pub command: Option<ControlCommand>,
    /// Ground-truth contact kind resolved by the simulator.
    pub contact_kind: ContactKind,
}

/// Full record of one trial plus the constants needed to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub entries: Vec<TickEntry>,
    /// Filtered world-frame tips, one per tick the estimator held contact.
    pub reconstructed: Vec<Vec2>,
    pub slip_count: usize,
    /// Populated when the trial ended early (for example unresolvable
    /// contact); failure is a result, not a crash.
    pub failed: Option<String>,
    pub target_deflection: f64,
    pub static_offset: f64,
    /// Collision threshold the trial's controller ran with, µT; scoring uses
    /// it to pick out the contact-held ticks.
    pub collision_threshold: f64,
    pub tick_rate: f64,
}

impl TrialRecord {
    fn new(
        target_deflection: f64,
        static_offset: f64,
        collision_threshold: f64,
        tick_rate: f64,
    ) -> Self {
        Self {
            entries: Vec::new(),
            reconstructed: Vec::new(),
            slip_count: 0,
            failed: None,
            target_deflection,
            static_offset,
            collision_threshold,
            tick_rate,
        }
    }
}

/// Aggregate reconstruction scores; `None` aggregates (with `valid` false)
/// mean the trial produced no reconstructed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub valid: bool,
    /// Mean |signed distance| of reconstructed points to the contour, mm.
    pub mean_abs_error: Option<f64>,
    pub std_error: Option<f64>,
    pub max_error: Option<f64>,
    /// Mean measurement over contact-held ticks, µT.
    pub mean_deflection: Option<f64>,
    /// |mean deflection - target| as a fraction of the target-to-rest span.
    pub deflection_deviation: Option<f64>,
    pub slip_count: usize,
    /// Fraction of perimeter arc-length buckets touched by reconstruction.
    pub coverage_fraction: f64,
}

impl Metrics {
    fn invalid(slip_count: usize) -> Self {
        Self {
            valid: false,
            mean_abs_error: None,
            std_error: None,
            max_error: None,
            mean_deflection: None,
            deflection_deviation: None,
            slip_count,
            coverage_fraction: 0.0,
        }
    }
}

/// Advance the sensor pose one tick: slew the heading toward the commanded
/// travel tangent (shaft mount is a quarter turn clockwise from it), then
/// integrate the sensor-frame velocity pair explicitly.
pub fn step_world(pose: &Pose2D, cmd: &ControlCommand, max_turn_rate: f64, dt: f64) -> Pose2D {
    let desired = normalize_angle(cmd.target_orientation + TANGENT_TO_SHAFT);
    let offset = normalize_angle(desired - pose.heading);
    let slew = max_turn_rate * dt;
    let heading = normalize_angle(pose.heading + offset.clamp(-slew, slew));
    let next = Pose2D {
        position: pose.position,
        heading,
    };
    let v_world = next.rotate_to_world(Vec2::new(cmd.v_x, cmd.v_y));
    Pose2D {
        position: next.position + v_world * dt,
        heading,
    }
}

/// Per-point distances of a record's reconstruction to the true contour, mm.
pub fn reconstruction_errors(record: &TrialRecord, contour: &Contour) -> Vec<f64> {
    record
        .reconstructed
        .iter()
        .map(|p| contour.signed_distance(*p).abs())
        .collect()
}

/// Score a trial against the ground-truth contour.
pub fn compute_metrics(record: &TrialRecord, contour: &Contour) -> Metrics {
    let errors = reconstruction_errors(record, contour);
    if errors.is_empty() {
        return Metrics::invalid(record.slip_count);
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let max = errors.iter().cloned().fold(0.0f64, f64::max);

    let deflections: Vec<f64> = record
        .entries
        .iter()
        .filter(|e| (e.z - record.static_offset).abs() >= record.collision_threshold)
        .map(|e| e.z)
        .collect();
    let span = (record.target_deflection - record.static_offset).abs();
    let (mean_deflection, deflection_deviation) = if deflections.is_empty() {
        (None, None)
    } else {
        let mean_z = deflections.iter().sum::<f64>() / deflections.len() as f64;
        (
            Some(mean_z),
            Some((mean_z - record.target_deflection).abs() / span),
        )
    };

    let buckets = ((contour.perimeter() / COVERAGE_BUCKET).ceil() as usize).max(1);
    let mut hit = vec![false; buckets];
    for p in &record.reconstructed {
        let s = contour.boundary_position(*p);
        let idx = ((s / COVERAGE_BUCKET).floor() as usize).min(buckets - 1);
        hit[idx] = true;
    }
    let coverage = hit.iter().filter(|h| **h).count() as f64 / buckets as f64;

    Metrics {
        valid: true,
        mean_abs_error: Some(mean),
        std_error: Some(var.sqrt()),
        max_error: Some(max),
        mean_deflection,
        deflection_deviation,
        slip_count: record.slip_count,
        coverage_fraction: coverage,
    }
}

/// Run one contour-following trial: straight approach until the collision
/// gate trips, then closed-loop traversal until the clock runs out. An open
/// contour also ends the trial once the tracked contact reaches the boundary
/// end opposite the one where tracking began.
pub fn run_follow(
    scenario: &ScenarioConfig,
    cm: &CharacterizedModel,
) -> Result<(TrialRecord, Metrics)> {
    scenario.validate()?;
    let contour = Contour::new(scenario.contour.clone(), scenario.contour_pose)?;
    let params = scenario.whisker;
    let ctl = scenario.control;
    let dt = 1.0 / scenario.tick_rate;
    let ticks = (scenario.duration * scenario.tick_rate).ceil() as usize;
    let perimeter = contour.perimeter();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut pose = scenario.start;
    let mut state = ControllerState::new(&ctl);
    let mut record = TrialRecord::new(
        ctl.target_deflection,
        params.static_offset,
        ctl.collision_threshold,
        scenario.tick_rate,
    );
    let mut start_s: Option<f64> = None;

    for tick in 0..ticks {
        let contact = match solve_contact(&pose, &contour, &params) {
            Ok(c) => c,
            Err(e) => {
                record.failed = Some(format!("tick {tick}: {e}"));
                break;
            }
        };
        let z = noisy_measurement(&params, contact.curvature, &mut rng).z;
        let cmd = control_step(&mut state, z, params.static_offset, &pose, cm, &ctl, dt);
        let raw_world = state.last_raw_tip.map(|t| pose.to_world(t.position));
        let filtered_world = state.last_filtered_world;
        if let Some(p) = filtered_world {
            record.reconstructed.push(p);
        }
        record.entries.push(TickEntry {
            tick,
            pose,
            z,
            raw_tip_world: raw_world,
            filtered_tip_world: filtered_world,
            command: Some(cmd),
            contact_kind: contact.contact_kind,
        });
        if !contour.is_closed() {
            if let Some(p) = contact.contact_point_world {
                let s = contour.boundary_position(p);
                let first = *start_s.get_or_insert(s);
                let far_end = if first < perimeter / 2.0 { perimeter } else { 0.0 };
                if (s - far_end).abs() < END_MARGIN {
                    break;
                }
            }
        }
        pose = step_world(&pose, &cmd, ctl.max_turn_rate, dt);
    }
    record.slip_count = state.slip_count;
    let metrics = compute_metrics(&record, &contour);
    Ok((record, metrics))
}

/// Flat-wall sweep configuration: the sensor is fixed at the origin and a
/// wall at each listed distance translates along itself past the shaft.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub whisker: WhiskerParams,
    pub control: ControlConfig,
    /// Wall distances from the shaft axis, mm.
    pub distances: Vec<f64>,
    /// Sampling rate, Hz.
    pub tick_rate: f64,
    /// Wall translation speed, mm/s.
    pub speed: f64,
    /// Total wall travel per trial, mm.
    pub travel: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            whisker: WhiskerParams::default(),
            control: ControlConfig::default(),
            distances: (1..=9).map(|i| 5.0 * i as f64).collect(),
            tick_rate: 300.0,
            speed: 10.0,
            travel: 80.0,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(crate::Error::InvalidParams(m.into()));
        if self.distances.is_empty() {
            return err("sweep needs at least one distance");
        }
        if !(self.tick_rate > 0.0) || !(self.speed > 0.0) || !(self.travel > 0.0) {
            return err("tick_rate, speed, and travel must be positive");
        }
        self.whisker.validate()?;
        self.control.validate()
    }
}

/// One sweep distance's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrial {
    pub distance: f64,
    pub metrics: Metrics,
    /// Ground truth left tip contact at some tick.
    pub slip: bool,
    pub failed: bool,
    /// Per-point reconstruction errors, for distribution plots.
    pub errors: Vec<f64>,
}

/// All sweep trials plus the probed contact-loss transition distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub trials: Vec<SweepTrial>,
    /// Smallest probed distance at which the shaft can no longer hold tip
    /// contact on the wall.
    pub transition_distance: Option<f64>,
}

/// Infinite-for-our-purposes flat wall at height `d`, solid above.
fn flat_wall(d: f64) -> Result<Contour> {
    Contour::new(
        ContourSpec::Polyline {
            vertices: vec![[-200.0, d], [300.0, d]],
            fillet_radius: 0.0,
        },
        Pose2D::identity(),
    )
}

/// Probe increasing wall distances for the first loss of tip contact.
pub fn contact_transition_distance(
    params: &WhiskerParams,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<Option<f64>> {
    let mut d = lo;
    while d <= hi + 1e-9 {
        let contour = flat_wall(d)?;
        let st = solve_contact(&Pose2D::identity(), &contour, params)?;
        if st.contact_kind != ContactKind::Tip {
            return Ok(Some(d));
        }
        d += step;
    }
    Ok(None)
}

fn run_sweep_trial(
    cfg: &SweepConfig,
    cm: &CharacterizedModel,
    distance: f64,
    seed: u64,
) -> Result<SweepTrial> {
    let params = cfg.whisker;
    let ctl = cfg.control;
    let dt = 1.0 / cfg.tick_rate;
    let ticks = (cfg.travel / cfg.speed * cfg.tick_rate).round() as usize;
    let sensor = Pose2D::identity();
    // The wall translates along its own line, so the time-zero contour is
    // the exact ground truth for every tick.
    let truth = flat_wall(distance)?;
    let mut wall = flat_wall(distance)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = TrialRecord::new(
        ctl.target_deflection,
        params.static_offset,
        ctl.collision_threshold,
        cfg.tick_rate,
    );
    let mut latched = false;
    let mut filter = FilterState::default();
    let mut window = NoiseWindow::new(ctl.filter_window);
    let mut slip = false;
    let mut failed = false;

    for tick in 0..ticks {
        wall.set_pose(Pose2D::new(cfg.speed * tick as f64 * dt, 0.0, 0.0));
        let contact = match solve_contact(&sensor, &wall, &params) {
            Ok(c) => c,
            Err(e) => {
                record.failed = Some(format!("tick {tick}: {e}"));
                failed = true;
                break;
            }
        };
        let z = noisy_measurement(&params, contact.curvature, &mut rng).z;
        if !latched && detect_collision(z, params.static_offset, &ctl) {
            latched = true;
        }
        if latched && contact.contact_kind != ContactKind::Tip {
            slip = true;
        }
        let mut raw_world = None;
        let mut filtered_world = None;
        if latched {
            match tip_from_measurement(cm, z) {
                Ok(tip) => {
                    raw_world = Some(tip.position);
                    window.push(&tip);
                    if !filter.initialized {
                        filter = FilterState::init(&tip);
                    }
                    if let Some(r) = window.estimate_r() {
                        filter.predict()?;
                        filter.update(&tip, r)?;
                    }
                    filtered_world = Some(filter.x_hat);
                }
                Err(_) => {
                    latched = false;
                    filter = FilterState::default();
                    window.clear();
                    record.slip_count += 1;
                }
            }
        }
        if let Some(p) = filtered_world {
            record.reconstructed.push(p);
        }
        record.entries.push(TickEntry {
            tick,
            pose: sensor,
            z,
            raw_tip_world: raw_world,
            filtered_tip_world: filtered_world,
            command: None,
            contact_kind: contact.contact_kind,
        });
    }

    let errors = reconstruction_errors(&record, &truth);
    let metrics = compute_metrics(&record, &truth);
    Ok(SweepTrial {
        distance,
        metrics,
        slip,
        failed,
        errors,
    })
}

/// Run every sweep distance (trials are independent and run on their own
/// threads) and probe where tip contact is lost beyond the largest one.
pub fn run_flat_sweep(cfg: &SweepConfig, cm: &CharacterizedModel) -> Result<SweepOutcome> {
    cfg.validate()?;
    let trials: Vec<Result<SweepTrial>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .distances
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let seed = cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                scope.spawn(move || run_sweep_trial(cfg, cm, d, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let largest = cfg.distances.iter().cloned().fold(0.0f64, f64::max);
    let transition = contact_transition_distance(&cfg.whisker, largest, largest + 5.0, 0.25)?;
    Ok(SweepOutcome {
        trials,
        transition_distance: transition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SyntheticField;
    use crate::tip::{build_characterized_model, TraceConfig};
    use approx::assert_abs_diff_eq;

    fn noiseless_params() -> WhiskerParams {
        WhiskerParams {
            noise_std: 0.0,
            ..WhiskerParams::default()
        }
    }

    fn model() -> CharacterizedModel {
        let field = SyntheticField::new(noiseless_params());
        build_characterized_model(&field, 75.0, 20, 5, &TraceConfig::default()).unwrap()
    }

    fn hold_cmd(pose: &Pose2D, v_x: f64, v_y: f64) -> ControlCommand {
        ControlCommand {
            target_orientation: normalize_angle(pose.heading - TANGENT_TO_SHAFT),
            v_x,
            v_y,
        }
    }

    #[test]
    fn step_world_identity() {
        let pose = Pose2D::new(3.0, -2.0, 0.4);
        let next = step_world(&pose, &hold_cmd(&pose, 0.0, 0.0), 1.0, 0.1);
        assert_eq!(next, pose);
    }

    #[test]
    fn step_world_tangential_translation() {
        let pose = Pose2D::identity();
        let next = step_world(&pose, &hold_cmd(&pose, 0.0, 10.0), 1.0, 0.1);
        // Heading 0: the tangential axis maps to world +Y.
        assert_abs_diff_eq!(next.position.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next.position.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next.heading, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn step_world_slew_clamp() {
        let pose = Pose2D::identity();
        let mut cmd = hold_cmd(&pose, 0.0, 0.0);
        cmd.target_orientation += 0.5;
        let next = step_world(&pose, &cmd, 1.0, 0.1);
        assert_abs_diff_eq!(next.heading, 0.1, epsilon = 1e-12);
        cmd.target_orientation = normalize_angle(pose.heading - TANGENT_TO_SHAFT) - 0.5;
        let next = step_world(&pose, &cmd, 1.0, 0.1);
        assert_abs_diff_eq!(next.heading, -0.1, epsilon = 1e-12);
    }

    fn record_with(points: &[Vec2], zs: &[f64]) -> TrialRecord {
        let mut r = TrialRecord::new(-8760.0, -8300.0, 300.0, 30.0);
        for (i, (p, z)) in points.iter().zip(zs).enumerate() {
            r.reconstructed.push(*p);
            r.entries.push(TickEntry {
                tick: i,
                pose: Pose2D::identity(),
                z: *z,
                raw_tip_world: Some(*p),
                filtered_tip_world: Some(*p),
                command: None,
                contact_kind: ContactKind::Tip,
            });
        }
        r
    }

    #[test]
    fn metrics_single_point_one_mm_off() {
        let wall = flat_wall(10.0).unwrap();
        let rec = record_with(&[Vec2::new(30.0, 9.0)], &[-8700.0]);
        let m = compute_metrics(&rec, &wall);
        assert!(m.valid);
        assert_abs_diff_eq!(m.mean_abs_error.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.max_error.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.std_error.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn metrics_match_hand_computation() {
        let wall = flat_wall(10.0).unwrap();
        let rec = record_with(
            &[
                Vec2::new(30.0, 9.0),
                Vec2::new(32.0, 12.0),
                Vec2::new(34.0, 10.5),
            ],
            &[-8500.0, -8700.0, -8760.0],
        );
        let m = compute_metrics(&rec, &wall);
        let mean = (1.0 + 2.0 + 0.5) / 3.0;
        assert_abs_diff_eq!(m.mean_abs_error.unwrap(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(m.max_error.unwrap(), 2.0, epsilon = 1e-12);
        let var = ((1.0 - mean).powi(2) + (2.0 - mean).powi(2) + (0.5 - mean).powi(2)) / 3.0;
        assert_abs_diff_eq!(m.std_error.unwrap(), var.sqrt(), epsilon = 1e-12);
        // -8500 sits inside the collision band, so only the held ticks at
        // -8700 and -8760 enter the deflection average.
        let mean_z = (-8700.0 - 8760.0) / 2.0;
        assert_abs_diff_eq!(m.mean_deflection.unwrap(), mean_z, epsilon = 1e-9);
        assert_abs_diff_eq!(
            m.deflection_deviation.unwrap(),
            (mean_z + 8760.0f64).abs() / 460.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn metrics_empty_record_flagged_invalid() {
        let wall = flat_wall(10.0).unwrap();
        let rec = TrialRecord::new(-8760.0, -8300.0, 300.0, 30.0);
        let m = compute_metrics(&rec, &wall);
        assert!(!m.valid);
        assert!(m.mean_abs_error.is_none());
        assert_eq!(m.coverage_fraction, 0.0);
    }

    #[test]
    fn coverage_half_circle() {
        let contour = Contour::new(
            ContourSpec::Circle { radius: 80.0 },
            Pose2D::identity(),
        )
        .unwrap();
        // Points every 1 mm of arc along half the circumference.
        let half = contour.perimeter() / 2.0;
        let mut pts = Vec::new();
        let mut zs = Vec::new();
        let mut s = 0.0;
        while s < half {
            pts.push(contour.boundary_point(s));
            zs.push(-8760.0);
            s += 1.0;
        }
        let m = compute_metrics(&record_with(&pts, &zs), &contour);
        assert!(m.coverage_fraction > 0.47 && m.coverage_fraction < 0.53);
        assert_abs_diff_eq!(m.mean_abs_error.unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn sweep_single_distance_noiseless() {
        let cfg = SweepConfig {
            whisker: noiseless_params(),
            distances: vec![20.0],
            travel: 5.0,
            ..SweepConfig::default()
        };
        let out = run_flat_sweep(&cfg, &model()).unwrap();
        assert_eq!(out.trials.len(), 1);
        let t = &out.trials[0];
        assert!(!t.failed);
        assert!(!t.slip);
        assert!(t.metrics.valid);
        assert!(t.metrics.mean_abs_error.unwrap() < 2.0);
        // Probing above this trial's 20 mm wall finds no loss of tip contact.
        assert!(out.transition_distance.is_none());
    }

    #[test]
    fn tip_contact_lost_beyond_reachable_rise() {
        let probe = contact_transition_distance(&noiseless_params(), 40.0, 50.0, 0.5).unwrap();
        let d = probe.expect("transition expected below 50 mm");
        assert!(d > 45.0 && d < 47.5, "transition at {d}");
    }

    #[test]
    fn follow_smoke_acquires_and_tracks() {
        let scenario = ScenarioConfig {
            whisker: noiseless_params(),
            duration: 12.0,
            ..ScenarioConfig::cylinder()
        };
        let (record, metrics) = run_follow(&scenario, &model()).unwrap();
        assert!(record.failed.is_none());
        assert!(!record.reconstructed.is_empty());
        assert!(metrics.valid);
        assert!(metrics.mean_abs_error.unwrap() < 2.0);
        // The tip starts 5 mm short of the surface; at 10 mm/s the collision
        // gate trips within the first second or so.
        let first_contact = record
            .entries
            .iter()
            .position(|e| e.filtered_tip_world.is_some())
            .unwrap();
        assert!(first_contact as f64 / 30.0 < 1.5);
    }

    #[test]
    fn follow_deterministic_under_seed() {
        let scenario = ScenarioConfig {
            duration: 4.0,
            seed: 7,
            ..ScenarioConfig::cylinder()
        };
        let (r1, m1) = run_follow(&scenario, &model()).unwrap();
        let (r2, m2) = run_follow(&scenario, &model()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn follow_error_invariant_under_rigid_motion() {
        let cm = model();
        let base = ScenarioConfig {
            whisker: noiseless_params(),
            duration: 14.0,
            ..ScenarioConfig::cylinder()
        };
        let (_, m0) = run_follow(&base, &cm).unwrap();

        let angle = 0.7f64;
        let shift = Vec2::new(13.0, -8.0);
        let rot = |p: Vec2| {
            let (s, c) = angle.sin_cos();
            Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y) + shift
        };
        let moved = ScenarioConfig {
            contour_pose: Pose2D {
                position: rot(base.contour_pose.position),
                heading: normalize_angle(base.contour_pose.heading + angle),
            },
            start: Pose2D {
                position: rot(base.start.position),
                heading: normalize_angle(base.start.heading + angle),
            },
            ..base
        };
        let (_, m1) = run_follow(&moved, &cm).unwrap();
        assert!(m0.valid && m1.valid);
        assert_abs_diff_eq!(
            m0.mean_abs_error.unwrap(),
            m1.mean_abs_error.unwrap(),
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(m0.coverage_fraction, m1.coverage_fraction, epsilon = 0.02);
    }
}
