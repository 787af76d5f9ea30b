use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("longitudinal speed {vx} m/s is at or below the slip-model floor")]
    BelowSpeedFloor { vx: f64 },
    #[error("query {value} outside the valid range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("steering solution infeasible at {count} path samples")]
    InfeasibleSteering { count: usize },
    #[error("no acceleration profile satisfies the envelope")]
    InfeasibleProfile,
    #[error("lateral target {y_f} m not reached by the open-loop maneuver")]
    TargetNotReached { y_f: f64 },
    #[error("trajectory never reaches a clearing configuration")]
    NoClearing,
    #[error("curve `{0}` is not monotone in speed")]
    NonMonotoneCurve(&'static str),
    #[error("lookup table axis mismatch: {0}")]
    AxisMismatch(&'static str),
    #[error("no table page available for mu = {mu}")]
    MissingPage { mu: f64 },
    #[error("empty grid")]
    EmptyGrid,
}

pub type Result<T> = core::result::Result<T, Error>;
