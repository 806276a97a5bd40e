//! 2D poses and analytic contours with exact distance queries.
//!
//! Contours are solids bounded by line segments and circular arcs; every
//! supported shape decomposes into such a feature list, which gives exact
//! closest points, signed distances, perimeters, and arc-length coordinates
//! along the boundary (used by the coverage metric).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub type Vec2 = nalgebra::Vector2<f64>;

pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Rigid pose of a frame in the world: position in mm, heading in radians
/// (frame +X axis versus world +X), normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn to_world(&self, p_local: Vec2) -> Vec2 {
        let (s, c) = self.heading.sin_cos();
        Vec2::new(
            self.position.x + c * p_local.x - s * p_local.y,
            self.position.y + s * p_local.x + c * p_local.y,
        )
    }

    pub fn to_local(&self, p_world: Vec2) -> Vec2 {
        let d = p_world - self.position;
        let (s, c) = self.heading.sin_cos();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Rotate a direction vector from this frame into the world (no translation).
    pub fn rotate_to_world(&self, v: Vec2) -> Vec2 {
        let (s, c) = self.heading.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }
}

/// Shape of a contour in its own local frame. All lengths in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContourSpec {
    Circle {
        radius: f64,
    },
    RoundedRectangle {
        width: f64,
        height: f64,
        corner_radius: f64,
    },
    RoundedPolygon {
        sides: u32,
        side_length: f64,
        corner_radius: f64,
    },
    /// Open one-sided wall: the solid lies on the left of the directed
    /// vertex sequence. Interior corners are filleted with the given radius.
    Polyline {
        vertices: Vec<[f64; 2]>,
        fillet_radius: f64,
    },
}

impl ContourSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::InvalidParams(m.into()));
        match self {
            ContourSpec::Circle { radius } => {
                if *radius <= 0.0 {
                    return err("circle radius must be positive");
                }
            }
            ContourSpec::RoundedRectangle {
                width,
                height,
                corner_radius,
            } => {
                if *width <= 0.0 || *height <= 0.0 {
                    return err("rectangle sides must be positive");
                }
                if *corner_radius <= 0.0 {
                    return err("corner radius must be positive");
                }
                if *corner_radius > width.min(*height) / 2.0 {
                    return err("corner radius exceeds half the shortest side");
                }
            }
            ContourSpec::RoundedPolygon {
                sides,
                side_length,
                corner_radius,
            } => {
                if *sides < 3 {
                    return err("polygon needs at least 3 sides");
                }
                if *side_length <= 0.0 || *corner_radius <= 0.0 {
                    return err("polygon lengths must be positive");
                }
                let apothem = side_length / (2.0 * (PI / *sides as f64).tan());
                if *corner_radius >= apothem {
                    return err("corner radius exceeds the polygon apothem");
                }
            }
            ContourSpec::Polyline {
                vertices,
                fillet_radius,
            } => {
                if vertices.len() < 2 {
                    return err("polyline needs at least 2 vertices");
                }
                if *fillet_radius < 0.0 {
                    return err("fillet radius must be non-negative");
                }
                for w in vertices.windows(2) {
                    let d = Vec2::from(w[1]) - Vec2::from(w[0]);
                    if d.norm() < 1e-9 {
                        return err("polyline has coincident consecutive vertices");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Boundary primitive in the contour's local frame.
#[derive(Debug, Clone)]
enum Feature {
    Segment {
        a: Vec2,
        b: Vec2,
        /// Unit normal pointing out of the solid.
        normal: Vec2,
    },
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        /// Signed sweep; positive = counterclockwise.
        sweep: f64,
        /// +1 when the solid is on the center side of the arc, -1 when the
        /// solid surrounds the arc (concave fillet seen from the solid).
        side: f64,
    },
}

impl Feature {
    fn length(&self) -> f64 {
        match self {
            Feature::Segment { a, b, .. } => (b - a).norm(),
            Feature::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Closest boundary point, its arc-length offset along this feature, and
    /// the sign (+1 outside the solid) this feature assigns to the query.
    fn closest(&self, p: Vec2) -> (Vec2, f64, f64) {
        match self {
            Feature::Segment { a, b, normal } => {
                let ab = b - a;
                let len = ab.norm();
                let t = ((p - a).dot(&ab) / (len * len)).clamp(0.0, 1.0);
                let foot = a + ab * t;
                let sign = if (p - foot).dot(normal) >= 0.0 { 1.0 } else { -1.0 };
                (foot, t * len, sign)
            }
            Feature::Arc {
                center,
                radius,
                start_angle,
                sweep,
                side,
            } => {
                let d = p - center;
                let phi = if d.norm() < 1e-12 {
                    *start_angle
                } else {
                    d.y.atan2(d.x)
                };
                // Position of the query's radial angle within the sweep, in
                // sweep units; snap to the nearer endpoint when outside.
                let full = TAU / sweep.abs();
                let mut raw = normalize_angle(phi - start_angle) / sweep;
                if raw < 0.0 {
                    raw += full;
                }
                let t = if raw <= 1.0 {
                    raw
                } else if raw - 1.0 < full - raw {
                    1.0
                } else {
                    0.0
                };
                let ang = start_angle + t * sweep;
                let foot = center + Vec2::new(ang.cos(), ang.sin()) * *radius;
                let sign = if d.norm() >= *radius { *side } else { -*side };
                (foot, t * radius * sweep.abs(), sign)
            }
        }
    }
}

/// Result of a closest-point query: the boundary point and the signed
/// distance from the query (negative inside the solid).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestPointResult {
    pub point: Vec2,
    pub distance: f64,
}

/// A contour placed in the world: shape plus pose, with the boundary
/// decomposition precomputed for fast repeated queries.
#[derive(Debug, Clone)]
pub struct Contour {
    pub spec: ContourSpec,
    pub pose: Pose2D,
    features: Vec<Feature>,
    cum_length: Vec<f64>,
    perimeter: f64,
}

impl Contour {
    pub fn new(spec: ContourSpec, pose: Pose2D) -> Result<Self> {
        spec.validate()?;
        let features = build_features(&spec)?;
        let mut cum_length = Vec::with_capacity(features.len());
        let mut total = 0.0;
        for f in &features {
            cum_length.push(total);
            total += f.length();
        }
        Ok(Self {
            spec,
            pose,
            features,
            cum_length,
            perimeter: total,
        })
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn set_pose(&mut self, pose: Pose2D) {
        self.pose = pose;
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self.spec, ContourSpec::Polyline { .. })
    }

    /// Nearest feature scan: (local foot, distance, boundary offset, sign).
    fn scan(&self, p_world: Vec2) -> (Vec2, f64, f64, f64) {
        let p = self.pose.to_local(p_world);
        let mut best = (Vec2::zeros(), f64::INFINITY, 0.0, 1.0);
        for (i, f) in self.features.iter().enumerate() {
            let (foot, offset, sign) = f.closest(p);
            let d = (p - foot).norm();
            if d < best.1 {
                best = (foot, d, self.cum_length[i] + offset, sign);
            }
        }
        best
    }

    /// Signed distance from a world point: negative inside the solid, zero on
    /// the boundary, positive outside. For the open polyline the "solid" is
    /// the left side of the directed vertex sequence.
    pub fn signed_distance(&self, p_world: Vec2) -> f64 {
        let (_, dist, _, sign) = self.scan(p_world);
        sign * dist
    }

    pub fn closest_point(&self, p_world: Vec2) -> ClosestPointResult {
        let (foot, dist, _, sign) = self.scan(p_world);
        ClosestPointResult {
            point: self.pose.to_world(foot),
            distance: sign * dist,
        }
    }

    /// Arc-length coordinate of the closest boundary point, in [0, perimeter].
    pub fn boundary_position(&self, p_world: Vec2) -> f64 {
        let (_, _, pos, _) = self.scan(p_world);
        pos.min(self.perimeter)
    }

    /// Point on the boundary at a given arc-length coordinate (world frame).
    pub fn boundary_point(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.perimeter);
        let mut idx = self.features.len() - 1;
        for (i, start) in self.cum_length.iter().enumerate() {
            if s < start + self.features[i].length() {
                idx = i;
                break;
            }
        }
        let f = &self.features[idx];
        let t = ((s - self.cum_length[idx]) / f.length()).clamp(0.0, 1.0);
        let local = match f {
            Feature::Segment { a, b, .. } => a + (b - a) * t,
            Feature::Arc {
                center,
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let ang = start_angle + t * sweep;
                center + Vec2::new(ang.cos(), ang.sin()) * *radius
            }
        };
        self.pose.to_world(local)
    }
}

fn build_features(spec: &ContourSpec) -> Result<Vec<Feature>> {
    let mut out = Vec::new();
    match spec {
        ContourSpec::Circle { radius } => {
            out.push(Feature::Arc {
                center: Vec2::zeros(),
                radius: *radius,
                start_angle: 0.0,
                sweep: TAU,
                side: 1.0,
            });
        }
        ContourSpec::RoundedRectangle {
            width,
            height,
            corner_radius,
        } => {
            let hx = width / 2.0 - corner_radius;
            let hy = height / 2.0 - corner_radius;
            let r = *corner_radius;
            // Counterclockwise; corner i covers outward normals
            // [i*pi/2, (i+1)*pi/2], followed by the flat with the end normal.
            let corners = [
                Vec2::new(hx, hy),
                Vec2::new(-hx, hy),
                Vec2::new(-hx, -hy),
                Vec2::new(hx, -hy),
            ];
            for i in 0..4 {
                let start = i as f64 * PI / 2.0;
                out.push(Feature::Arc {
                    center: corners[i],
                    radius: r,
                    start_angle: start,
                    sweep: PI / 2.0,
                    side: 1.0,
                });
                let na = start + PI / 2.0;
                let normal = Vec2::new(na.cos(), na.sin());
                out.push(Feature::Segment {
                    a: corners[i] + normal * r,
                    b: corners[(i + 1) % 4] + normal * r,
                    normal,
                });
            }
        }
        ContourSpec::RoundedPolygon {
            sides,
            side_length,
            corner_radius,
        } => {
            // Minkowski sum of the polygon inset by the corner radius and a
            // disc: flats stay on the original edge lines, corners round off.
            let n = *sides as usize;
            let apothem = side_length / (2.0 * (PI / n as f64).tan());
            let circum_in = (apothem - corner_radius) / (PI / n as f64).cos();
            let inner: Vec<Vec2> = (0..n)
                .map(|i| {
                    let ang = TAU * i as f64 / n as f64;
                    Vec2::new(circum_in * ang.cos(), circum_in * ang.sin())
                })
                .collect();
            let r = *corner_radius;
            for i in 0..n {
                // Vertex i joins edge i-1 (normal angle 2pi(i-0.5)/n) and
                // edge i (normal angle 2pi(i+0.5)/n).
                let prev_normal = TAU * (i as f64 - 0.5) / n as f64;
                out.push(Feature::Arc {
                    center: inner[i],
                    radius: r,
                    start_angle: prev_normal,
                    sweep: TAU / n as f64,
                    side: 1.0,
                });
                let na = TAU * (i as f64 + 0.5) / n as f64;
                let normal = Vec2::new(na.cos(), na.sin());
                out.push(Feature::Segment {
                    a: inner[i] + normal * r,
                    b: inner[(i + 1) % n] + normal * r,
                    normal,
                });
            }
        }
        ContourSpec::Polyline {
            vertices,
            fillet_radius,
        } => {
            let pts: Vec<Vec2> = vertices.iter().map(|v| Vec2::from(*v)).collect();
            let rc = *fillet_radius;
            let mut trims = vec![0.0; pts.len()];
            for i in 1..pts.len() - 1 {
                let u = (pts[i] - pts[i - 1]).normalize();
                let w = (pts[i + 1] - pts[i]).normalize();
                let turn = cross(u, w).atan2(u.dot(&w));
                if rc > 0.0 && turn.abs() > 1e-9 {
                    trims[i] = rc * (turn.abs() / 2.0).tan();
                }
            }
            for i in 1..pts.len() - 1 {
                let lin = (pts[i] - pts[i - 1]).norm();
                let lout = (pts[i + 1] - pts[i]).norm();
                if trims[i - 1] + trims[i] > lin + 1e-9 || trims[i] + trims[i + 1] > lout + 1e-9 {
                    return Err(Error::InvalidParams(
                        "fillet radius too large for polyline segment lengths".into(),
                    ));
                }
            }
            for i in 0..pts.len() - 1 {
                let dir = (pts[i + 1] - pts[i]).normalize();
                let a = pts[i] + dir * trims[i];
                let b = pts[i + 1] - dir * trims[i + 1];
                // Solid on the left of travel; outward normal points right.
                let normal = Vec2::new(dir.y, -dir.x);
                out.push(Feature::Segment { a, b, normal });
                if i + 1 < pts.len() - 1 && trims[i + 1] > 0.0 {
                    let u = dir;
                    let w = (pts[i + 2] - pts[i + 1]).normalize();
                    let turn = cross(u, w).atan2(u.dot(&w));
                    // Center sits on the angle bisector of the two rays
                    // leaving the vertex, at equal distance rc from both lines.
                    let bisector = ((-u) + w).normalize();
                    let half_open = ((-u).dot(&w)).clamp(-1.0, 1.0).acos() / 2.0;
                    let center = pts[i + 1] + bisector * (rc / half_open.sin());
                    let t1 = pts[i + 1] - u * trims[i + 1];
                    let t2 = pts[i + 1] + w * trims[i + 1];
                    let a0 = angle_of(t1 - center);
                    let a1 = angle_of(t2 - center);
                    let mut sweep = normalize_angle(a1 - a0);
                    if turn > 0.0 && sweep < 0.0 {
                        sweep += TAU;
                    }
                    if turn < 0.0 && sweep > 0.0 {
                        sweep -= TAU;
                    }
                    // Left turn: the center is inside the solid, so points
                    // beyond the radius are outside; mirrored for right turns.
                    let side = if turn > 0.0 { 1.0 } else { -1.0 };
                    out.push(Feature::Arc {
                        center,
                        radius: rc,
                        start_angle: a0,
                        sweep,
                        side,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn angle_of(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}
