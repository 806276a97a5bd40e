//! Simulation and control library for a 2D magnetically transduced whisker
//! sensor: deflection-field calibration, tip-contact localization, noise
//! filtering, and closed-loop contour following.

pub mod calibration;
pub mod control;
pub mod error;
pub mod field;
pub mod filter;
pub mod geometry;
pub mod sim;
pub mod spline;
pub mod tip;
pub mod whisker;

pub use error::{Error, Result};
