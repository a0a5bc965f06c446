//! File formats, synthetic data and batch drivers around `hems_core`.
//!
//! Everything here works in `f64`. Profiles are CSV with the header
//! `k,d_kw,r_kw,p_buy,p_sell,theta_ex_c`; scenario parameters are TOML.

pub mod ausgrid;
pub mod batch;
pub mod config;
pub mod error;
pub mod profiles;
pub mod schedule;
pub mod sweep;
pub mod synth;

pub use error::InputError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A house whose efficiencies satisfy the sufficient condition failed certification.
    pub const CERTIFICATE_FAILED: u8 = 2;
    /// Unreadable or malformed input, or an output that could not be written.
    pub const INPUT: u8 = 3;
}

/// Formats a float so that parsing it back yields the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
