use vibrissa::control::{control_step, ControllerState};
use vibrissa::field::SyntheticField;
use vibrissa::geometry::Contour;
use vibrissa::sim::*;
use vibrissa::tip::{build_characterized_model, TraceConfig};
use vibrissa::whisker::{measurement_from_curvature, solve_contact, WhiskerParams};

fn main() {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "cylinder".into());
    let params = WhiskerParams { noise_std: 0.0, ..WhiskerParams::default() };
    let field = SyntheticField::new(params);
    let cm = build_characterized_model(&field, 75.0, 20, 5, &TraceConfig::default()).unwrap();
    let base = match preset.as_str() {
        "cylinder" => ScenarioConfig::cylinder(),
        "rounded_rectangle" => ScenarioConfig::rounded_rectangle(),
        "octagon" => ScenarioConfig::octagon(),
        "wall" => ScenarioConfig::wall(),
        other => panic!("unknown preset {other}"),
    };
    let scenario = ScenarioConfig { whisker: params, ..base };
    let contour = Contour::new(scenario.contour.clone(), scenario.contour_pose).unwrap();
    let dt = 1.0 / scenario.tick_rate;
    let n = (scenario.duration * scenario.tick_rate).round() as usize;
    let mut pose = scenario.start;
    let mut ctrl = ControllerState::new(&scenario.control);
    let mut prev_slip = 0;
    for i in 0..n {
        let contact = solve_contact(&pose, &contour, &params).unwrap();
        let z = measurement_from_curvature(&params, contact.curvature).z;
        let cmd = control_step(&mut ctrl, z, params.static_offset, &pose, &cm, &scenario.control, dt);
        if ctrl.keypoint_pushed {
            let pts = ctrl.keypoints.points();
            let p = *pts.last().unwrap();
            let sd = contour.signed_distance(p);
            println!(
                "PUSH t={:6.2} p=({:7.2},{:7.2}) sd={:7.3} n_kp={} theta={:?}",
                i as f64 * dt, p.x, p.y, sd, pts.len(), ctrl.held_theta
            );
        }
        if ctrl.slip_count != prev_slip {
            let s = contact.contact_point_world.map(|p| contour.boundary_position(p));
            println!(
                "SLIP t={:6.2} #{} pos=({:7.2},{:7.2}) z={:9.1} kind={:?} s={:?}",
                i as f64 * dt, ctrl.slip_count, pose.position.x, pose.position.y, z,
                contact.contact_kind, s
            );
            prev_slip = ctrl.slip_count;
        }
        if i % 150 == 0 {
            println!(
                "t={:6.2} pos=({:7.2},{:7.2}) hd={:6.3} z={:9.1} kind={:?} v=({:5.2},{:5.2})",
                i as f64 * dt, pose.position.x, pose.position.y, pose.heading, z,
                contact.contact_kind, cmd.v_x, cmd.v_y
            );
        }
        pose = step_world(&pose, &cmd, scenario.control.max_turn_rate, dt);
    }
    let (record, metrics) = run_follow(&scenario, &cm).unwrap();
    println!("failed: {:?}", record.failed);
    println!("slip: {}", record.slip_count);
    println!("recon: {}", record.reconstructed.len());
    println!("metrics: {:#?}", metrics);
}
