use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDateTime;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cooling load {load_tons:.1} tons exceeds plant capacity {capacity_tons:.1} tons")]
    CapacityExceeded { load_tons: f64, capacity_tons: f64 },

    #[error("{what} out of range: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("plant solve did not converge after {iterations} iterations (last residual {residual:.4} °F)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("training data has too few rows for the {0}-fan stratum")]
    MissingStratum(u8),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("timestamp {0} is not covered by any tariff period")]
    ScheduleGap(NaiveDateTime),

    #[error("series is missing {} intervals (first missing {})", gaps.len(), gaps.first().map(|t| t.to_string()).unwrap_or_default())]
    Coverage { gaps: Vec<NaiveDateTime> },

    #[error("series are not aligned: {0}")]
    Alignment(String),

    #[error("sweep failed at {timestamp} (setpoint {t_cws_setpoint} °F, {n_fans} fans): {source}")]
    Sweep {
        timestamp: NaiveDateTime,
        t_cws_setpoint: f64,
        n_fans: u8,
        source: Box<Error>,
    },

    #[error("table cell (q_load {q_load_tons} tons, t_wb {t_wb_f} °F) failed: {source}")]
    TableCell {
        q_load_tons: f64,
        t_wb_f: f64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}
