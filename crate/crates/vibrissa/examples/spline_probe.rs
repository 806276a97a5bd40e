use vibrissa::geometry::Vec2;
use vibrissa::spline::fit_spline;

fn main() {
    let pts = [
        Vec2::new(40.63, 11.01),
        Vec2::new(41.26, 15.13),
        Vec2::new(42.09, 19.18),
        Vec2::new(43.14, 23.21),
        Vec2::new(45.09, 28.04),
    ];
    let sp = fit_spline(&pts, 3).unwrap();
    let next = sp.extrapolate_next();
    let p = pts[4];
    let d = next - p;
    println!("next = ({:.4}, {:.4})  chord theta = {:.4}", next.x, next.y, d.y.atan2(d.x));
    // center (120,0): true tangent at p and a bit beyond
    let phi = (p.y).atan2(p.x - 120.0);
    println!("true tangent at last = {:.4}", (-phi.cos()).atan2(phi.sin()));
    // sample the spline near the end to see the end tangent
    for u in [0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25] {
        let q = sp.eval(u);
        println!("u={:.2} -> ({:.4}, {:.4})", u, q.x, q.y);
    }
}
