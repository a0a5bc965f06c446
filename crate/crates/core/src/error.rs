use thiserror::Error;

use crate::model::ValidationReport;
use crate::qp_solver::SolveStatus;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("no battery")]
    NoBattery,
    #[error("scenario failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("certificate refused: solver status is {0:?}")]
    NotOptimal(SolveStatus),
    #[error("horizon K={steps} exceeds the enumeration limit {limit}")]
    HorizonTooLong { steps: usize, limit: usize },
    #[error("missing duals: {0}")]
    MissingDuals(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
