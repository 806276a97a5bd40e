//! Contact-grid calibration and the bivariate polynomial measurement model.
//!
//! A simulated touch rod visits a grid of contact positions; each reachable
//! node yields one (x, y, z) sample. A degree-5 bivariate polynomial is then
//! least-squares fitted over scaled coordinates, giving the smooth surface
//! whose level curves the tip localizer traces.

use crate::error::{Error, Result};
use crate::field::DeflectionField;
use crate::geometry::Vec2;
use crate::whisker::{curvature_from_contact, noisy_measurement, WhiskerParams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Polynomial basis degree; all monomials x^i y^j with i+j <= 5.
pub const BASIS_DEGREE: usize = 5;
/// Number of basis terms for the degree-5 bivariate basis.
pub const BASIS_TERMS: usize = 21;

/// Axis-aligned rectangle in base-frame mm, used both for grid regions and
/// model domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn half_width(&self) -> Vec2 {
        Vec2::new(
            (0.5 * (self.x_max - self.x_min)).max(1e-6),
            (0.5 * (self.y_max - self.y_min)).max(1e-6),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::InvalidParams("region bounds must be ordered".into()));
        }
        Ok(())
    }
}

/// Default calibration region: inside the reachable contact zone, one-sided.
pub fn default_region() -> Region {
    Region::new(9.0, 75.0, 3.0, 42.0)
}

/// One calibration observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Collected calibration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub samples: Vec<GridSample>,
    pub region: Region,
    pub step: f64,
}

/// Visit every grid node in the region at the given step, skip nodes the
/// shaft cannot reach (curvature above the limit), and record one
/// measurement per reachable node.
pub fn sample_grid<R: Rng + ?Sized>(
    params: &WhiskerParams,
    region: Region,
    step: f64,
    rng: &mut R,
) -> Result<CalibrationGrid> {
    params.validate()?;
    region.validate()?;
    if !(step > 0.0) {
        return Err(Error::InvalidParams("grid step must be positive".into()));
    }
    let nx = ((region.x_max - region.x_min) / step + 1e-9).floor() as usize + 1;
    let ny = ((region.y_max - region.y_min) / step + 1e-9).floor() as usize + 1;
    let mut samples = Vec::new();
    for iy in 0..ny {
        let y = region.y_min + iy as f64 * step;
        for ix in 0..nx {
            let x = region.x_min + ix as f64 * step;
            let Ok(k) = curvature_from_contact(Vec2::new(x, y)) else {
                continue;
            };
            if !(0.0..=params.curvature_max).contains(&k) {
                continue;
            }
            let z = noisy_measurement(params, k, rng).z;
            samples.push(GridSample { x, y, z });
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(CalibrationGrid {
        samples,
        region,
        step,
    })
}

/// Degree-5 bivariate polynomial over scaled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyModel {
    pub degree: usize,
    /// Coefficients ordered by (i, j) lexicographic over u^i v^j.
    pub coeffs: Vec<f64>,
    /// Coordinate scaling: u = (x - center.x) / half_width.x, likewise v.
    pub center: Vec2,
    pub half_width: Vec2,
    /// Trusted evaluation domain (grid region widened to envelope the root).
    pub domain: Region,
    /// Measured value range over the training grid, µT.
    pub z_min: f64,
    pub z_max: f64,
}

/// Training-data fit quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rmse: f64,
    pub r_squared: f64,
}

fn basis_powers() -> impl Iterator<Item = (usize, usize)> {
    (0..=BASIS_DEGREE).flat_map(|i| (0..=BASIS_DEGREE - i).map(move |j| (i, j)))
}

fn basis_row(u: f64, v: f64) -> [f64; BASIS_TERMS] {
    let mut row = [0.0; BASIS_TERMS];
    for (idx, (i, j)) in basis_powers().enumerate() {
        row[idx] = u.powi(i as i32) * v.powi(j as i32);
    }
    row
}

/// Least-squares fit of the polynomial surface to a calibration grid.
pub fn fit_poly(grid: &CalibrationGrid) -> Result<(PolyModel, FitReport)> {
    let n = grid.samples.len();
    if n < BASIS_TERMS {
        return Err(Error::RankDeficient);
    }
    let center = grid.region.center();
    let hw = grid.region.half_width();
    let mut a = DMatrix::zeros(n, BASIS_TERMS);
    let mut b = DVector::zeros(n);
    for (r, s) in grid.samples.iter().enumerate() {
        let row = basis_row((s.x - center.x) / hw.x, (s.y - center.y) / hw.y);
        for (c, value) in row.iter().enumerate() {
            a[(r, c)] = *value;
        }
        b[r] = s.z;
    }
    let qr = a.qr();
    let r = qr.r();
    let mut diag_min = f64::INFINITY;
    let mut diag_max = 0.0f64;
    for i in 0..BASIS_TERMS {
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

    let domain = Region::new(
        grid.region.x_min.min(0.0) - 1.0,
        grid.region.x_max + 2.0,
        -1.0,
        grid.region.y_max + 2.0,
    );
    let (mut z_min, mut z_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &grid.samples {
        z_min = z_min.min(s.z);
        z_max = z_max.max(s.z);
    }
    let model = PolyModel {
        degree: BASIS_DEGREE,
        coeffs: coeffs.iter().copied().collect(),
        center,
        half_width: hw,
        domain,
        z_min,
        z_max,
    };

    let mut ss_res = 0.0;
    let mut sum = 0.0;
    for s in &grid.samples {
        sum += s.z;
    }
    let mean = sum / n as f64;
    let mut ss_tot = 0.0;
    for s in &grid.samples {
        let pred = model.value(Vec2::new(s.x, s.y));
        ss_res += (pred - s.z) * (pred - s.z);
        ss_tot += (s.z - mean) * (s.z - mean);
    }
    let rmse = (ss_res / n as f64).sqrt();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-18 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok((model, FitReport { rmse, r_squared }))
}

impl PolyModel {
    /// Checked evaluation, µT.
    pub fn eval(&self, p: Vec2) -> Result<f64> {
        self.check(p)?;
        Ok(self.value(p))
    }

    /// Checked analytic gradient, µT/mm.
    pub fn grad(&self, p: Vec2) -> Result<Vec2> {
        self.check(p)?;
        Ok(DeflectionField::gradient(self, p))
    }

    fn check(&self, p: Vec2) -> Result<()> {
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y });
        }
        Ok(())
    }
}

impl DeflectionField for PolyModel {
    fn value(&self, p: Vec2) -> f64 {
        let u = (p.x - self.center.x) / self.half_width.x;
        let v = (p.y - self.center.y) / self.half_width.y;
        let mut acc = 0.0;
        for (idx, (i, j)) in basis_powers().enumerate() {
            acc += self.coeffs[idx] * u.powi(i as i32) * v.powi(j as i32);
        }
        acc
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        let u = (p.x - self.center.x) / self.half_width.x;
        let v = (p.y - self.center.y) / self.half_width.y;
        let mut du = 0.0;
        let mut dv = 0.0;
        for (idx, (i, j)) in basis_powers().enumerate() {
            if i > 0 {
                du += self.coeffs[idx] * i as f64 * u.powi(i as i32 - 1) * v.powi(j as i32);
            }
            if j > 0 {
                dv += self.coeffs[idx] * j as f64 * u.powi(i as i32) * v.powi(j as i32 - 1);
            }
        }
        Vec2::new(du / self.half_width.x, dv / self.half_width.y)
    }

    fn contains(&self, p: Vec2) -> bool {
        self.domain.contains(p)
    }

    fn z_range(&self) -> (f64, f64) {
        (self.z_min, self.z_max)
    }
}
