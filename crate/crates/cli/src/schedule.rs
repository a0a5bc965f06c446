//! Schedule CSV: one row per step with controls, grid exchange, end-of-step
//! states and the step bill.

use std::fs;
use std::path::Path;

use hems_core::model::HouseholdScenario;
use hems_core::program_builder::{step_bill, Controls, ScheduleSolution};

use crate::error::InputError;
use crate::fmt_f64;

pub const COLUMNS: [&str; 9] = [
    "k", "u_ch_kw", "u_dch_kw", "u_nd_kw", "u_tcl_kw", "g_kw", "soc_end", "theta_end_c", "bill",
];

/// Renders a schedule. `soc_end`/`theta_end_c` are the states after step `k`
/// and are left empty for absent components.
pub fn schedule_to_string(s: &HouseholdScenario<f64>, sol: &ScheduleSolution<f64>) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    let c = &sol.controls;
    let state = |v: &Option<Vec<f64>>, k: usize| v.as_ref().map_or(String::new(), |x| fmt_f64(x[k + 1]));
    for k in 0..sol.steps() {
        let cells = [
            k.to_string(),
            fmt_f64(c.u_ch[k]),
            fmt_f64(c.u_dch[k]),
            fmt_f64(c.u_nd[k]),
            fmt_f64(c.u_tcl[k]),
            fmt_f64(sol.g[k]),
            state(&sol.soc, k),
            state(&sol.theta, k),
            fmt_f64(step_bill(s, k, sol.g[k])),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_schedule(
    path: &Path,
    s: &HouseholdScenario<f64>,
    sol: &ScheduleSolution<f64>,
) -> Result<(), InputError> {
    fs::write(path, schedule_to_string(s, sol)).map_err(|e| InputError::io(path, e))
}

/// A schedule read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleFile {
    pub controls: Controls<f64>,
    pub g: Vec<f64>,
    pub soc_end: Option<Vec<f64>>,
    pub theta_end: Option<Vec<f64>>,
    pub bill: Vec<f64>,
}

pub fn parse_schedule(text: &str, path: &Path) -> Result<ScheduleFile, InputError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| InputError::csv(path, e))?.clone();
    for col in COLUMNS {
        if !header.iter().any(|h| h == col) {
            return Err(InputError::MissingColumn {
                path: path.to_path_buf(),
                column: col.to_string(),
            });
        }
    }
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(InputError::Header {
            path: path.to_path_buf(),
            expected: COLUMNS.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut controls = Controls::zeros(0);
    let mut g = Vec::new();
    let mut soc = Vec::new();
    let mut theta = Vec::new();
    let mut bill = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| InputError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| InputError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let opt = |i: usize| -> Result<Option<f64>, InputError> {
            let cell = &record[i];
            if cell.is_empty() {
                return Ok(None);
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("{}: \"{cell}\" is not a number", COLUMNS[i])))?;
            if !v.is_finite() {
                return Err(err(format!("{}: value must be finite", COLUMNS[i])));
            }
            Ok(Some(v))
        };
        let req = |i: usize| -> Result<f64, InputError> {
            opt(i)?.ok_or_else(|| err(format!("{}: value required", COLUMNS[i])))
        };
        let k: usize = record[0]
            .parse()
            .map_err(|_| err(format!("k: \"{}\" is not a step index", &record[0])))?;
        if k != g.len() {
            return Err(err(format!("k must be {} here, found {k}", g.len())));
        }
        controls.u_ch.push(req(1)?);
        controls.u_dch.push(req(2)?);
        controls.u_nd.push(req(3)?);
        controls.u_tcl.push(req(4)?);
        g.push(req(5)?);
        soc.push(opt(6)?);
        theta.push(opt(7)?);
        bill.push(req(8)?);
    }
    let collect = |v: Vec<Option<f64>>| -> Option<Vec<f64>> {
        if v.is_empty() {
            None
        } else {
            v.into_iter().collect()
        }
    };
    Ok(ScheduleFile {
        controls,
        g,
        soc_end: collect(soc),
        theta_end: collect(theta),
        bill,
    })
}

pub fn load_schedule(path: &Path) -> Result<ScheduleFile, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    parse_schedule(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hems_core::model::{BatteryParams, Horizon, RegularizationParams, Tariff};
    use hems_core::program_builder::solve_household;
    use hems_core::qp_solver::SolverSettings;

    #[test]
    fn written_schedule_reads_back_exactly() {
        let s = HouseholdScenario {
            horizon: Horizon { steps: 4, dt: 1.0 },
            tariff: Tariff {
                buy: vec![0.15, 0.5, 0.5, 0.15],
                sell: vec![0.08; 4],
            },
            battery: Some(BatteryParams {
                u_ch_max: 3.0,
                u_dch_max: 3.0,
                eta_ch: 0.9,
                eta_dch: 0.9,
                u_sd: 0.0,
                capacity: 10.0,
                x0: 0.5,
                x_min: 0.1,
                x_max: 0.9,
            }),
            tcl: None,
            nd_load: None,
            reg: RegularizationParams::zero(),
            demand: vec![1.0, 2.0, 1.5, 0.5],
            renewable: vec![0.0, 0.3, 0.0, 0.0],
        };
        let sol = solve_household(&s, &SolverSettings::default())
            .unwrap()
            .schedule
            .unwrap();
        let text = schedule_to_string(&s, &sol);
        let back = parse_schedule(&text, Path::new("s.csv")).unwrap();
        assert_eq!(back.controls, sol.controls);
        assert_eq!(back.g, sol.g);
        assert_eq!(back.soc_end.unwrap(), sol.soc.unwrap()[1..].to_vec());
        assert!(back.theta_end.is_none());
        let total: f64 = back.bill.iter().sum();
        assert!((total - sol.bill).abs() < 1e-12);
    }
}
