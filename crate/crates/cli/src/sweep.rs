//! Efficiency sweeps around the sufficient condition `eta_ch * eta_dch < 1`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hems_core::analysis::default_eps_c;
use hems_core::model::HouseholdScenario;

use crate::batch::{solve_and_certify, RunOptions};
use crate::error::InputError;
use crate::fmt_f64;

pub const SWEEP_COLUMNS: [&str; 10] = [
    "eta_ch",
    "eta_dch",
    "product",
    "status",
    "max_margin",
    "eps_c",
    "theorem_holds",
    "certified",
    "simultaneous_steps",
    "objective",
];

/// Parses `"0.9:0.9,1.0:1.0"` into `(eta_ch, eta_dch)` pairs.
pub fn parse_eta_grid(text: &str) -> Result<Vec<(f64, f64)>, InputError> {
    let bad = |item: &str| InputError::Other(format!("eta grid entry \"{item}\" is not <eta_ch>:<eta_dch>"));
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| bad(item))?;
            let a: f64 = a.trim().parse().map_err(|_| bad(item))?;
            let b: f64 = b.trim().parse().map_err(|_| bad(item))?;
            Ok((a, b))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(InputError::Other("eta grid is empty".into()));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta_ch: f64,
    pub eta_dch: f64,
    pub product: f64,
    pub status: String,
    pub max_margin: Option<f64>,
    pub eps_c: f64,
    pub theorem_holds: bool,
    pub certified: bool,
    pub simultaneous_steps: Option<usize>,
    pub objective: Option<f64>,
}

impl SweepRow {
    /// A row inside the sufficient condition whose margin exceeds the tolerance.
    pub fn violates(&self) -> bool {
        self.theorem_holds && self.max_margin.map_or(true, |m| m > self.eps_c)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violates()).count()
    }

    pub fn to_csv_string(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut out = SWEEP_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.eta_ch),
                fmt_f64(r.eta_dch),
                fmt_f64(r.product),
                r.status,
                opt(r.max_margin),
                fmt_f64(r.eps_c),
                r.theorem_holds,
                r.certified,
                r.simultaneous_steps.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.objective),
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), InputError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| InputError::io(parent, e))?;
        }
        fs::write(path, self.to_csv_string()).map_err(|e| InputError::io(path, e))
    }
}

/// Solves and certifies `base` once per grid point with the battery
/// efficiencies replaced. Fails only if `base` has no battery.
pub fn sweep_condition(
    base: &HouseholdScenario<f64>,
    grid: &[(f64, f64)],
    opts: &RunOptions,
) -> Result<SweepReport, InputError> {
    let bat = base
        .battery
        .as_ref()
        .ok_or_else(|| InputError::Other("sweep needs a [battery] section".into()))?;
    let rows = grid
        .iter()
        .map(|&(eta_ch, eta_dch)| {
            let mut s = base.clone();
            let b = s.battery.as_mut().unwrap();
            b.eta_ch = eta_ch;
            b.eta_dch = eta_dch;
            let out = solve_and_certify(&s, opts);
            let audit = out.certificate.as_ref().and_then(|c| c.battery.as_ref());
            SweepRow {
                eta_ch,
                eta_dch,
                product: eta_ch * eta_dch,
                status: out.status.clone(),
                max_margin: audit.map(|a| a.complementarity.max_margin),
                eps_c: opts.eps_c.unwrap_or_else(|| default_eps_c(bat)),
                theorem_holds: eta_ch * eta_dch < 1.0,
                certified: out.certified(),
                simultaneous_steps: audit.map(|a| a.complementarity.simultaneous_steps.len()),
                objective: out.schedule.as_ref().map(|s| s.objective),
            }
        })
        .collect();
    Ok(SweepReport { rows })
}
