use thiserror::Error;

use crate::source::Setting;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("phase range [{lo}, {hi}] is not a valid interval narrower than pi")]
    InvalidPhaseRange { lo: f64, hi: f64 },

    #[error("intensity range [{lo}, {hi}] must satisfy 0 <= lo <= hi")]
    InvalidIntensityRange { lo: f64, hi: f64 },

    #[error("phase ranges for {0} and {1} overlap")]
    OverlappingPhaseRanges(Setting, Setting),

    #[error("intensity ordering violated: {0}")]
    IntensityOrdering(&'static str),

    #[error("{name} = {value} is outside its allowed range")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("filter parameter q = {0} is outside [0, 1] or equal to 1/2")]
    InvalidFilter(f64),

    #[error("Bloch vector has y = {0}, expected a vector on the X-Z plane")]
    NotOnXzPlane(f64),

    #[error("phase half-width {0} rad is outside the closed-form regime [0, 10 deg)")]
    HalfwidthOutOfRegime(f64),

    #[error("non-positive denominator {value} while evaluating {what}")]
    NonPositiveDenominator { what: &'static str, value: f64 },

    #[error("state triple is degenerate (|det M| = {0})")]
    DegenerateGeometry(f64),

    #[error("value {value} for {name} is outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },

    #[error("phase-error bound is vacuous (ratio {ratio}, denominator {denominator})")]
    VacuousBound { ratio: f64, denominator: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
