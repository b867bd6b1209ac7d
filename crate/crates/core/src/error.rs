use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("moment with x-exponent {exponent} is not integrable at x -> 0")]
    NonIntegrableMoment { exponent: i32 },
    #[error("quadrature did not converge on [{a}, {b}]: estimate {value:e}, error {error:e}")]
    Quadrature { a: f64, b: f64, value: f64, error: f64 },
    #[error("classical limit undefined at zero temperature")]
    ZeroTemperatureClassicalLimit,
    #[error("wrong regime: {0}")]
    Regime(String),
    #[error("time {t} outside loop period [0, {t_p}]")]
    Domain { t: f64, t_p: f64 },
    #[error("loop is not closed: {0}")]
    Closure(String),
    #[error("pole in closed form: {0}")]
    Pole(String),
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("underdetermined fit: {points} points for {params} parameters")]
    Underdetermined { points: usize, params: usize },
    #[error("run family mismatch: {0}")]
    FamilyMismatch(String),
    #[error("domain error: {0}")]
    InvalidArgument(String),
}
