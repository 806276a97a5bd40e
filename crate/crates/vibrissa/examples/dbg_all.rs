use vibrissa::field::SyntheticField;
use vibrissa::sim::*;
use vibrissa::tip::{build_characterized_model, TraceConfig};
use vibrissa::whisker::WhiskerParams;

fn main() {
    let params = WhiskerParams { noise_std: 0.0, ..WhiskerParams::default() };
    let field = SyntheticField::new(params);
    let cm = build_characterized_model(&field, 75.0, 20, 5, &TraceConfig::default()).unwrap();
    for (name, mut sc) in [
        ("cylinder", ScenarioConfig::cylinder()),
        ("rounded_rectangle", ScenarioConfig::rounded_rectangle()),
        ("octagon", ScenarioConfig::octagon()),
        ("wall", ScenarioConfig::wall()),
    ] {
        sc.whisker = params;
        let t0 = std::time::Instant::now();
        let (record, metrics) = run_follow(&sc, &cm).unwrap();
        let latch = record
            .entries
            .iter()
            .position(|e| (e.z - record.static_offset).abs() > 300.0)
            .unwrap_or(0);
        let post: Vec<f64> = record.entries[latch..].iter().map(|e| e.z).collect();
        let post_mean = post.iter().sum::<f64>() / post.len() as f64;
        let post_dev = (post_mean - record.target_deflection).abs()
            / (record.target_deflection - record.static_offset).abs();
        let mut gap_max = 0usize;
        let mut gap = 0usize;
        for e in &record.entries[latch..] {
            if (e.z - record.static_offset).abs() > 300.0 {
                gap = 0;
            } else {
                gap += 1;
                gap_max = gap_max.max(gap);
            }
        }
        println!(
            "{name:<18} fail={:?} slip={:4} recon={:5} mean={:?} max={:?} dev={:?} post_dev={post_dev:.4} gap_max={:.2}s cov={:.3}  ({:.1}s)",
            record.failed,
            record.slip_count,
            record.reconstructed.len(),
            metrics.mean_abs_error.map(|v| (v * 1e3).round() / 1e3),
            metrics.max_error.map(|v| (v * 1e3).round() / 1e3),
            metrics.deflection_deviation.map(|v| (v * 1e4).round() / 1e4),
            gap_max as f64 / record.tick_rate,
            metrics.coverage_fraction,
            t0.elapsed().as_secs_f64(),
        );
    }
}
