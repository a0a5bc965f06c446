//! Solving and certifying many independent houses.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hems_core::analysis::{certify, CertificateReport, CertifyOptions};
use hems_core::model::{theorem_condition, validate_scenario, HouseholdScenario};
use hems_core::program_builder::{solve_household, HouseholdProgram, ScheduleSolution};
use hems_core::qp_solver::{QPResult, SolverSettings};
use rayon::prelude::*;

use crate::error::InputError;
use crate::exit;
use crate::fmt_f64;
use crate::schedule::write_schedule;

pub const REPORT_COLUMNS: [&str; 10] = [
    "house_id",
    "status",
    "objective",
    "bill",
    "currency",
    "max_margin",
    "simultaneous_steps",
    "certified",
    "theorem_holds",
    "iterations",
];

/// Status for scenarios rejected before solving because a parameter is malformed.
pub const STATUS_INVALID: &str = "Invalid";
/// Status for inputs that could not be read or parsed.
pub const STATUS_INPUT_ERROR: &str = "InputError";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Complementarity tolerance override in kW.
    pub eps_c: Option<f64>,
    pub settings: SolverSettings<f64>,
}

impl RunOptions {
    pub fn certify_options(&self) -> CertifyOptions<f64> {
        CertifyOptions {
            eps_c: self.eps_c,
            ..CertifyOptions::default()
        }
    }
}

/// Everything produced for one scenario.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Solver status name, or [`STATUS_INVALID`].
    pub status: String,
    pub message: String,
    pub program: Option<HouseholdProgram<f64>>,
    pub result: Option<QPResult<f64>>,
    pub schedule: Option<ScheduleSolution<f64>>,
    pub certificate: Option<CertificateReport<f64>>,
    /// `None` without a battery.
    pub theorem_holds: Option<bool>,
}

impl Outcome {
    pub fn certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.passed)
    }

    /// A house that was solvable, satisfies the sufficient condition and still failed.
    pub fn is_certificate_failure(&self) -> bool {
        self.theorem_holds == Some(true) && self.status != STATUS_INVALID
            && self.status != "PrimalInfeasible"
            && !self.certified()
    }
}

/// Validates, solves and certifies one scenario. Never panics on bad input.
pub fn solve_and_certify(s: &HouseholdScenario<f64>, opts: &RunOptions) -> Outcome {
    let theorem_holds = theorem_condition(s).ok().map(|c| c.holds);
    let mut out = Outcome {
        status: String::new(),
        message: String::new(),
        program: None,
        result: None,
        schedule: None,
        certificate: None,
        theorem_holds,
    };
    let report = validate_scenario(s);
    if !report.passed() {
        out.status = if report.only_infeasibility() {
            "PrimalInfeasible".into()
        } else {
            STATUS_INVALID.into()
        };
        out.message = report.to_string();
        return out;
    }
    let solved = match solve_household(s, &opts.settings) {
        Ok(v) => v,
        Err(e) => {
            out.status = STATUS_INVALID.into();
            out.message = e.to_string();
            return out;
        }
    };
    out.status = solved.result.status.as_str().into();
    if let Some(sol) = &solved.schedule {
        match certify(s, &solved.program, sol, &solved.result, &opts.certify_options()) {
            Ok(c) => out.certificate = Some(c),
            Err(e) => out.message = e.to_string(),
        }
    }
    out.program = Some(solved.program);
    out.result = Some(solved.result);
    out.schedule = solved.schedule;
    out
}

/// One house as handed to [`run_batch`]; a parse failure is carried along.
#[derive(Debug, Clone)]
pub struct HouseInput {
    pub house_id: String,
    pub scenario: Result<HouseholdScenario<f64>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseRow {
    pub house_id: String,
    pub status: String,
    pub objective: Option<f64>,
    pub bill: Option<f64>,
    pub max_margin: Option<f64>,
    pub simultaneous_steps: Option<usize>,
    pub certified: bool,
    pub theorem_holds: Option<bool>,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub message: String,
    /// Certificate failure under the sufficient condition.
    pub condition_failure: bool,
}

#[derive(Debug, Clone)]
pub struct HouseResult {
    pub row: HouseRow,
    pub scenario: Option<HouseholdScenario<f64>>,
    pub schedule: Option<ScheduleSolution<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub currency: String,
    /// Sorted by `house_id`.
    pub rows: Vec<HouseRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl RunReport {
    pub fn max_margin(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.max_margin)
            .fold(None, |a, m| Some(a.map_or(m, |a: f64| a.max(m))))
    }

    pub fn certified_count(&self) -> usize {
        self.rows.iter().filter(|r| r.certified).count()
    }

    pub fn simultaneous_steps(&self) -> usize {
        self.rows.iter().filter_map(|r| r.simultaneous_steps).sum()
    }

    pub fn input_errors(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == STATUS_INPUT_ERROR || r.status == STATUS_INVALID)
            .count()
    }

    /// 3 on any unreadable or malformed input, else 2 on any certificate
    /// failure where the sufficient condition holds, else 0.
    pub fn exit_code(&self) -> u8 {
        if self.input_errors() > 0 {
            exit::INPUT
        } else if self.rows.iter().any(|r| r.condition_failure) {
            exit::CERTIFICATE_FAILED
        } else {
            exit::OK
        }
    }

    /// The report CSV. Contains no timing, so identical inputs give identical bytes.
    pub fn to_csv_string(&self) -> String {
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.house_id,
                r.status,
                opt(r.objective),
                opt(r.bill),
                self.currency,
                opt(r.max_margin),
                r.simultaneous_steps.map(|n| n.to_string()).unwrap_or_default(),
                r.certified,
                r.theorem_holds.map(|b| b.to_string()).unwrap_or_default(),
                r.iterations,
            );
        }
        out
    }

    /// Per-house wall time, kept out of the main report.
    pub fn timing_csv_string(&self) -> String {
        let mut out = String::from("house_id,wall_time_ms\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.3}", r.house_id, r.wall_time_ms);
        }
        out
    }
}

pub fn run_house(input: &HouseInput, opts: &RunOptions) -> HouseResult {
    let start = Instant::now();
    let mut row = HouseRow {
        house_id: input.house_id.clone(),
        status: STATUS_INPUT_ERROR.into(),
        objective: None,
        bill: None,
        max_margin: None,
        simultaneous_steps: None,
        certified: false,
        theorem_holds: None,
        iterations: 0,
        wall_time_ms: 0.0,
        message: String::new(),
        condition_failure: false,
    };
    let s = match &input.scenario {
        Ok(s) => s,
        Err(msg) => {
            row.message = msg.clone();
            return HouseResult {
                row,
                scenario: None,
                schedule: None,
            };
        }
    };
    let out = solve_and_certify(s, opts);
    row.status = out.status.clone();
    row.message = out.message.clone();
    row.theorem_holds = out.theorem_holds;
    row.certified = out.certified();
    row.condition_failure = out.is_certificate_failure();
    row.iterations = out.result.as_ref().map_or(0, |r| r.iterations);
    if let Some(sol) = &out.schedule {
        row.objective = Some(sol.objective);
        row.bill = Some(sol.bill);
    }
    if let Some(audit) = out.certificate.as_ref().and_then(|c| c.battery.as_ref()) {
        row.max_margin = Some(audit.complementarity.max_margin);
        row.simultaneous_steps = Some(audit.complementarity.simultaneous_steps.len());
    }
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    HouseResult {
        row,
        scenario: Some(s.clone()),
        schedule: out.schedule,
    }
}

/// Runs every house in parallel. Results are sorted by `house_id`, so the
/// order of `inputs` and the thread schedule do not affect the report.
pub fn run_batch(inputs: &[HouseInput], currency: &str, opts: &RunOptions) -> (RunReport, Vec<HouseResult>) {
    let mut results: Vec<HouseResult> = inputs.par_iter().map(|h| run_house(h, opts)).collect();
    results.sort_by(|a, b| a.row.house_id.cmp(&b.row.house_id));
    for r in &results {
        if !r.row.message.is_empty() {
            log::warn!("{}: {}: {}", r.row.house_id, r.row.status, r.row.message);
        }
    }
    let report = RunReport {
        currency: currency.to_string(),
        rows: results.iter().map(|r| r.row.clone()).collect(),
    };
    (report, results)
}

/// Sidecar paths next to a report file: `<stem>.timing.csv` and `<stem>_schedules/`.
pub fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let dir = out.parent().unwrap_or(Path::new(""));
    (
        dir.join(format!("{stem}.timing.csv")),
        dir.join(format!("{stem}_schedules")),
    )
}

/// Writes the report, the timing sidecar and one schedule CSV per solved house.
pub fn write_batch(out: &Path, report: &RunReport, results: &[HouseResult]) -> Result<(), InputError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| InputError::io(parent, e))?;
    }
    fs::write(out, report.to_csv_string()).map_err(|e| InputError::io(out, e))?;
    let (timing, sched_dir) = sidecar_paths(out);
    fs::write(&timing, report.timing_csv_string()).map_err(|e| InputError::io(&timing, e))?;
    fs::create_dir_all(&sched_dir).map_err(|e| InputError::io(&sched_dir, e))?;
    for r in results {
        if let (Some(s), Some(sol)) = (&r.scenario, &r.schedule) {
            let path = sched_dir.join(format!("{}.csv", r.row.house_id));
            write_schedule(&path, s, sol)?;
        }
    }
    Ok(())
}
