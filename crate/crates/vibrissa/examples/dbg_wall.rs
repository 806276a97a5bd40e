use vibrissa::control::{control_step, ControllerState};
use vibrissa::field::SyntheticField;
use vibrissa::geometry::Contour;
use vibrissa::sim::*;
use vibrissa::tip::{build_characterized_model, TraceConfig};
use vibrissa::whisker::{measurement_from_curvature, solve_contact, WhiskerParams};

fn main() {
    let params = WhiskerParams { noise_std: 0.0, ..WhiskerParams::default() };
    let field = SyntheticField::new(params);
    let cm = build_characterized_model(&field, 75.0, 20, 5, &TraceConfig::default()).unwrap();
    let scenario = ScenarioConfig { whisker: params, ..ScenarioConfig::wall() };
    let contour = Contour::new(scenario.contour.clone(), scenario.contour_pose).unwrap();
    let dt = 1.0 / scenario.tick_rate;
    let n = (scenario.duration * scenario.tick_rate).round() as usize;
    let mut pose = scenario.start;
    let mut ctrl = ControllerState::new(&scenario.control);
    for i in 0..n {
        let contact = solve_contact(&pose, &contour, &params).unwrap();
        let z = measurement_from_curvature(&params, contact.curvature).z;
        let cmd = control_step(&mut ctrl, z, params.static_offset, &pose, &cm, &scenario.control, dt);
        if ctrl.keypoint_pushed {
            let pts = ctrl.keypoints.points();
            let p = *pts.last().unwrap();
            println!(
                "PUSH t={:6.2} p=({:7.2},{:7.2}) sd={:7.3} theta={:?}",
                i as f64 * dt, p.x, p.y, contour.signed_distance(p), ctrl.held_theta
            );
        }
        if i as f64 * dt > 33.0 && i as f64 * dt < 37.0 {
            if let Some(cp) = contact.contact_point_world {
                println!("  CONTACT t={:6.2} kind={:?} cp=({:7.2},{:7.2}) s={:8.3} perim={:8.3}",
                    i as f64 * dt, contact.contact_kind, cp.x, cp.y,
                    contour.boundary_position(cp), contour.perimeter());
            } else {
                println!("  CONTACT t={:6.2} kind={:?} cp=None", i as f64 * dt, contact.contact_kind);
            }
        }
        if i % 30 == 0 {
            println!(
                "t={:6.2} pos=({:7.2},{:7.2}) hd={:6.3} z={:9.1} kind={:?} v=({:5.2},{:5.2})",
                i as f64 * dt, pose.position.x, pose.position.y, pose.heading, z,
                contact.contact_kind, cmd.v_x, cmd.v_y
            );
        }
        pose = step_world(&pose, &cmd, scenario.control.max_turn_rate, dt);
    }
}
