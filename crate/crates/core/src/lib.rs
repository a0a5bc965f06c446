//! Day-ahead household energy scheduling.
//!
//! A house with an optional battery, thermostatic load and deferrable load
//! buys from and sells to the grid at different prices. The relaxed
//! scheduling problem (no explicit charge/discharge exclusivity) is written as
//! a smooth convex QP through an epigraph of the piecewise-linear bill, solved
//! by a dense interior-point method, and then audited: KKT residuals, the
//! battery stationarity identity, the bill subgradient at `g = 0`, and the
//! complementarity margins that the round-trip condition `eta_ch * eta_dch < 1`
//! guarantees to vanish.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below name the common instantiations.

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod program_builder;
pub mod qp_solver;
pub mod scalar;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Scenario64 = model::HouseholdScenario<f64>;
pub type Scenario32 = model::HouseholdScenario<f32>;
pub type Program64 = program_builder::HouseholdProgram<f64>;
pub type Program32 = program_builder::HouseholdProgram<f32>;
pub type Qp64 = qp_solver::QuadraticProgram<f64>;
pub type Qp32 = qp_solver::QuadraticProgram<f32>;
pub type QpResult64 = qp_solver::QPResult<f64>;
pub type QpResult32 = qp_solver::QPResult<f32>;
pub type Schedule64 = program_builder::ScheduleSolution<f64>;
pub type Schedule32 = program_builder::ScheduleSolution<f32>;
pub type Certificate64 = analysis::CertificateReport<f64>;
pub type Certificate32 = analysis::CertificateReport<f32>;
