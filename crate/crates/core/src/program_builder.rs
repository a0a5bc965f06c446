//! Assembles the relaxed household problem as a [`QuadraticProgram`].
//!
//! Decision variables are the controls of the present components plus one
//! epigraph variable `t_k` per step standing in for the bill
//! `max{p_k dt g_k, s_k dt g_k}`. State trajectories (SoC, indoor temperature)
//! are substituted forward through their affine dynamics, so their bounds
//! become ordinary linear rows in the controls. The battery exclusivity
//! constraint `u_ch * u_dch = 0` is deliberately absent.
//!
//! Prices and regularization apply to energy per step, i.e. to `power * dt`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{
    soc_trajectory, step_soc, step_temperature, temperature_trajectory, validate_scenario,
    HouseholdScenario,
};
use crate::qp_solver::{solve, QPResult, QuadraticProgram, SolverSettings};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    Charge,
    Discharge,
    NonDyn,
    Tcl,
    Epigraph,
}

/// Bijection between `(kind, step)` pairs and QP column indices. Columns are
/// grouped by kind, `K` per present kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableIndex {
    steps: usize,
    kinds: Vec<VarKind>,
}

impl VariableIndex {
    pub fn new(steps: usize, battery: bool, nd_load: bool, tcl: bool) -> Self {
        let mut kinds = Vec::with_capacity(5);
        if battery {
            kinds.extend([VarKind::Charge, VarKind::Discharge]);
        }
        if nd_load {
            kinds.push(VarKind::NonDyn);
        }
        if tcl {
            kinds.push(VarKind::Tcl);
        }
        kinds.push(VarKind::Epigraph);
        Self { steps, kinds }
    }

    pub fn len(&self) -> usize {
        self.steps * self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn has(&self, kind: VarKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn slot(&self, kind: VarKind, step: usize) -> Option<usize> {
        if step >= self.steps {
            return None;
        }
        let block = self.kinds.iter().position(|k| *k == kind)?;
        Some(block * self.steps + step)
    }

    pub fn decode(&self, column: usize) -> Option<(VarKind, usize)> {
        if column >= self.len() {
            return None;
        }
        Some((self.kinds[column / self.steps], column % self.steps))
    }
}

/// Identity of an inequality row. `Lower` rows are `-u + lo <= 0`, `Upper`
/// rows are `u - hi <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintKind {
    ChargeLower,
    ChargeUpper,
    DischargeLower,
    DischargeUpper,
    NonDynLower,
    NonDynUpper,
    TclLower,
    TclUpper,
    SocLower,
    SocUpper,
    TempLower,
    TempUpper,
    EpiBuy,
    EpiSell,
}

impl ConstraintKind {
    /// Short arrow notation (`↑` marks a lower bound).
    pub fn symbol(self) -> &'static str {
        use ConstraintKind::*;
        match self {
            ChargeLower => "ch↑",
            ChargeUpper => "ch↓",
            DischargeLower => "dch↑",
            DischargeUpper => "dch↓",
            NonDynLower => "nd↑",
            NonDynUpper => "nd↓",
            TclLower => "tcl↑",
            TclUpper => "tcl↓",
            SocLower => "x↑",
            SocUpper => "x↓",
            TempLower => "θ↑",
            TempUpper => "θ↓",
            EpiBuy => "epi_p",
            EpiSell => "epi_s",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowTag {
    pub kind: ConstraintKind,
    pub step: usize,
}

/// Inequality rows grouped by kind, `K` per present kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLayout {
    steps: usize,
    kinds: Vec<ConstraintKind>,
}

impl RowLayout {
    fn new(steps: usize, index: &VariableIndex) -> Self {
        use ConstraintKind::*;
        let mut kinds = Vec::new();
        if index.has(VarKind::Charge) {
            kinds.extend([ChargeLower, ChargeUpper, DischargeLower, DischargeUpper]);
        }
        if index.has(VarKind::NonDyn) {
            kinds.extend([NonDynLower, NonDynUpper]);
        }
        if index.has(VarKind::Tcl) {
            kinds.extend([TclLower, TclUpper]);
        }
        if index.has(VarKind::Charge) {
            kinds.extend([SocLower, SocUpper]);
        }
        if index.has(VarKind::Tcl) {
            kinds.extend([TempLower, TempUpper]);
        }
        kinds.extend([EpiBuy, EpiSell]);
        Self { steps, kinds }
    }

    pub fn len(&self) -> usize {
        self.steps * self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    pub fn row(&self, kind: ConstraintKind, step: usize) -> Option<usize> {
        if step >= self.steps {
            return None;
        }
        let block = self.kinds.iter().position(|k| *k == kind)?;
        Some(block * self.steps + step)
    }

    pub fn tag(&self, row: usize) -> Option<RowTag> {
        if row >= self.len() {
            return None;
        }
        Some(RowTag {
            kind: self.kinds[row / self.steps],
            step: row % self.steps,
        })
    }

    pub fn tags(&self) -> Vec<RowTag> {
        (0..self.len()).filter_map(|i| self.tag(i)).collect()
    }
}

/// Readings of the household model that differ from its literal typesetting.
pub const INTERPRETATION_NOTES: [&str; 3] = [
    "nd↓ is built as u_nd - u_nd_max <= 0 (the upper bound of the deferrable load itself)",
    "nd↑ is built as u_nd_min - u_nd <= 0, using the deferrable lower bound",
    "the equality row is sum_k u_nd_k = total of the deferrable load",
];

/// The relaxed household problem in standard form, with its column and row maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdProgram<T> {
    pub qp: QuadraticProgram<T>,
    pub index: VariableIndex,
    pub rows: RowLayout,
    pub notes: Vec<String>,
}

impl<T: Scalar> HouseholdProgram<T> {
    pub fn row_tag(&self, row: usize) -> Option<RowTag> {
        self.rows.tag(row)
    }

    pub fn has_equality(&self) -> bool {
        self.qp.num_eq() > 0
    }

    /// Full decision vector for given controls, with each `t_k` set to the bill of step `k`.
    pub fn assemble_primal(&self, s: &HouseholdScenario<T>, controls: &Controls<T>) -> Result<Vec<T>> {
        let k = s.steps();
        controls.check(k)?;
        let mut x = vec![T::zero(); self.index.len()];
        let mut put = |kind, v: &[T]| {
            for (step, val) in v.iter().enumerate() {
                if let Some(j) = self.index.slot(kind, step) {
                    x[j] = *val;
                }
            }
        };
        put(VarKind::Charge, &controls.u_ch);
        put(VarKind::Discharge, &controls.u_dch);
        put(VarKind::NonDyn, &controls.u_nd);
        put(VarKind::Tcl, &controls.u_tcl);
        let g = grid_exchange(s, controls);
        for (step, gk) in g.iter().enumerate() {
            let j = self.index.slot(VarKind::Epigraph, step).unwrap();
            x[j] = step_bill(s, step, *gk);
        }
        Ok(x)
    }
}

/// Per-step controls, kW. Components that are absent are all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controls<T> {
    pub u_ch: Vec<T>,
    pub u_dch: Vec<T>,
    pub u_nd: Vec<T>,
    pub u_tcl: Vec<T>,
}

impl<T: Scalar> Controls<T> {
    pub fn zeros(steps: usize) -> Self {
        Self {
            u_ch: vec![T::zero(); steps],
            u_dch: vec![T::zero(); steps],
            u_nd: vec![T::zero(); steps],
            u_tcl: vec![T::zero(); steps],
        }
    }

    fn check(&self, steps: usize) -> Result<()> {
        check_len("u_ch", steps, self.u_ch.len())?;
        check_len("u_dch", steps, self.u_dch.len())?;
        check_len("u_nd", steps, self.u_nd.len())?;
        check_len("u_tcl", steps, self.u_tcl.len())
    }
}

/// A schedule read back from a solution vector, with everything recomputed
/// from the controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSolution<T> {
    pub controls: Controls<T>,
    /// Grid exchange per step, kW; positive means import.
    pub g: Vec<T>,
    /// SoC trajectory of length `K + 1`, when a battery is present.
    pub soc: Option<Vec<T>>,
    /// Indoor temperature trajectory of length `K + 1`, when a TCL is present.
    pub theta: Option<Vec<T>>,
    /// Epigraph values taken from the solver vector.
    pub epigraph: Vec<T>,
    pub bill: T,
    pub reg_cost: T,
    pub objective: T,
}

impl<T: Scalar> ScheduleSolution<T> {
    pub fn has_battery(&self) -> bool {
        self.soc.is_some()
    }

    pub fn steps(&self) -> usize {
        self.g.len()
    }
}

/// Grid exchange `g_k = u_ch - u_dch + u_nd + u_tcl + d_k - r_k`.
pub fn grid_exchange<T: Scalar>(s: &HouseholdScenario<T>, c: &Controls<T>) -> Vec<T> {
    (0..s.steps())
        .map(|k| c.u_ch[k] - c.u_dch[k] + c.u_nd[k] + c.u_tcl[k] + s.demand[k] - s.renewable[k])
        .collect()
}

/// Bill of step `k` for exchange `g`: `max{p dt g, s dt g}`.
pub fn step_bill<T: Scalar>(s: &HouseholdScenario<T>, k: usize, g: T) -> T {
    let dt = s.dt();
    (s.tariff.buy[k] * dt * g).max(s.tariff.sell[k] * dt * g)
}

fn reg_cost<T: Scalar>(s: &HouseholdScenario<T>, c: &Controls<T>) -> T {
    let r = &s.reg;
    let dt = s.dt();
    let term = |alpha: T, beta: T, u: T| alpha * u * u + beta * u;
    (0..s.steps())
        .map(|k| {
            dt * (term(r.alpha_ch, r.beta_ch, c.u_ch[k])
                + term(r.alpha_dch, r.beta_dch, c.u_dch[k])
                + term(r.alpha_nd, r.beta_nd, c.u_nd[k])
                + term(r.alpha_tcl, r.beta_tcl, c.u_tcl[k]))
        })
        .sum()
}

/// Builds the relaxed problem. Rejects scenarios that fail validation.
pub fn build_qp<T: Scalar>(s: &HouseholdScenario<T>) -> Result<HouseholdProgram<T>> {
    let report = validate_scenario(s);
    if !report.passed() {
        return Err(Error::Invalid(report));
    }
    let steps = s.steps();
    let dt = s.dt();
    let two = T::lit(2.0);
    let index = VariableIndex::new(steps, s.battery.is_some(), s.nd_load.is_some(), s.tcl.is_some());
    let rows = RowLayout::new(steps, &index);
    let n = index.len();

    let mut q = vec![T::zero(); n];
    let mut c = vec![T::zero(); n];
    let reg = &s.reg;
    let weights = [
        (VarKind::Charge, reg.alpha_ch, reg.beta_ch),
        (VarKind::Discharge, reg.alpha_dch, reg.beta_dch),
        (VarKind::NonDyn, reg.alpha_nd, reg.beta_nd),
        (VarKind::Tcl, reg.alpha_tcl, reg.beta_tcl),
    ];
    for (kind, alpha, beta) in weights {
        for k in 0..steps {
            if let Some(j) = index.slot(kind, k) {
                q[j] = two * alpha * dt;
                c[j] = beta * dt;
            }
        }
    }
    for k in 0..steps {
        c[index.slot(VarKind::Epigraph, k).unwrap()] = T::one();
    }

    let mut a = DenseMatrix::zeros(0, n);
    let mut b = Vec::with_capacity(rows.len());
    let mut row = vec![T::zero(); n];

    // Rows are pushed kind by kind in exactly the order of `RowLayout`.
    for &kind in rows.kinds() {
        for k in 0..steps {
            row.iter_mut().for_each(|v| *v = T::zero());
            let rhs = fill_row(s, &index, kind, k, &mut row);
            a.push_row(&row);
            b.push(rhs);
        }
    }
    debug_assert_eq!(a.rows(), rows.len());

    let mut a_eq = DenseMatrix::zeros(0, n);
    let mut b_eq = Vec::new();
    if let Some(nd) = &s.nd_load {
        row.iter_mut().for_each(|v| *v = T::zero());
        for k in 0..steps {
            row[index.slot(VarKind::NonDyn, k).unwrap()] = T::one();
        }
        a_eq.push_row(&row);
        b_eq.push(nd.total);
    }

    let notes = if s.nd_load.is_some() {
        INTERPRETATION_NOTES.iter().map(|n| n.to_string()).collect()
    } else {
        Vec::new()
    };

    Ok(HouseholdProgram {
        qp: QuadraticProgram::new(q, c, a, b, a_eq, b_eq),
        index,
        rows,
        notes,
    })
}

/// Writes the coefficients of row `(kind, k)` into `row` and returns its right-hand side.
fn fill_row<T: Scalar>(
    s: &HouseholdScenario<T>,
    index: &VariableIndex,
    kind: ConstraintKind,
    k: usize,
    row: &mut [T],
) -> T {
    use ConstraintKind::*;
    let one = T::one();
    let zero = T::zero();
    let dt = s.dt();
    let col = |v: VarKind, step: usize| index.slot(v, step).expect("component present");

    match kind {
        ChargeLower | DischargeLower | NonDynLower | TclLower => {
            let (v, lo) = match kind {
                ChargeLower => (VarKind::Charge, zero),
                DischargeLower => (VarKind::Discharge, zero),
                NonDynLower => (VarKind::NonDyn, s.nd_load.as_ref().unwrap().u_min),
                _ => (VarKind::Tcl, zero),
            };
            row[col(v, k)] = -one;
            -lo
        }
        ChargeUpper | DischargeUpper | NonDynUpper | TclUpper => {
            let (v, hi) = match kind {
                ChargeUpper => (VarKind::Charge, s.battery.as_ref().unwrap().u_ch_max),
                DischargeUpper => (VarKind::Discharge, s.battery.as_ref().unwrap().u_dch_max),
                NonDynUpper => (VarKind::NonDyn, s.nd_load.as_ref().unwrap().u_max),
                _ => (VarKind::Tcl, s.tcl.as_ref().unwrap().u_tcl_max),
            };
            row[col(v, k)] = one;
            hi
        }
        SocLower | SocUpper => {
            let bat = s.battery.as_ref().unwrap();
            // x_{k+1} = free_k + sum_{j<=k} (gain_ch u_ch_j - gain_dch u_dch_j)
            let gain_ch = dt * bat.eta_ch / bat.capacity;
            let gain_dch = dt / (bat.eta_dch * bat.capacity);
            let free = (0..=k).fold(bat.x0, |x, _| step_soc(x, zero, zero, bat, dt));
            let sign = if kind == SocUpper { one } else { -one };
            for j in 0..=k {
                row[col(VarKind::Charge, j)] = sign * gain_ch;
                row[col(VarKind::Discharge, j)] = -sign * gain_dch;
            }
            if kind == SocUpper {
                bat.x_max - free
            } else {
                free - bat.x_min
            }
        }
        TempLower | TempUpper => {
            let tcl = s.tcl.as_ref().unwrap();
            // theta_{k+1} = free_k - sum_{j<=k} a_tilde^{k-j} dt b u_j
            let at = tcl.a_tilde(dt);
            let gain = dt * tcl.b();
            let free = (0..=k).fold(tcl.theta0, |th, j| {
                step_temperature(th, zero, tcl.theta_ex[j], tcl, dt)
            });
            let sign = if kind == TempUpper { one } else { -one };
            let mut decay = one;
            for j in (0..=k).rev() {
                row[col(VarKind::Tcl, j)] = -sign * gain * decay;
                decay *= at;
            }
            if kind == TempUpper {
                tcl.theta_max() - free
            } else {
                free - tcl.theta_min()
            }
        }
        EpiBuy | EpiSell => {
            let price = if kind == EpiBuy {
                s.tariff.buy[k]
            } else {
                s.tariff.sell[k]
            };
            let w = price * dt;
            if index.has(VarKind::Charge) {
                row[col(VarKind::Charge, k)] = w;
                row[col(VarKind::Discharge, k)] = -w;
            }
            if index.has(VarKind::NonDyn) {
                row[col(VarKind::NonDyn, k)] = w;
            }
            if index.has(VarKind::Tcl) {
                row[col(VarKind::Tcl, k)] = w;
            }
            row[col(VarKind::Epigraph, k)] = -one;
            -w * (s.demand[k] - s.renewable[k])
        }
    }
}

/// Reads a schedule out of a solver vector. The bill is recomputed from the
/// grid exchange, not taken from the epigraph variables.
pub fn extract_solution<T: Scalar>(
    prog: &HouseholdProgram<T>,
    primal: &[T],
    s: &HouseholdScenario<T>,
) -> Result<ScheduleSolution<T>> {
    check_len("primal", prog.index.len(), primal.len())?;
    let steps = s.steps();
    check_len("scenario horizon", prog.index.steps(), steps)?;
    let read = |kind| -> Vec<T> {
        (0..steps)
            .map(|k| prog.index.slot(kind, k).map_or(T::zero(), |j| primal[j]))
            .collect()
    };
    let controls = Controls {
        u_ch: read(VarKind::Charge),
        u_dch: read(VarKind::Discharge),
        u_nd: read(VarKind::NonDyn),
        u_tcl: read(VarKind::Tcl),
    };
    let epigraph = read(VarKind::Epigraph);
    schedule_from_controls(s, controls, epigraph)
}

/// Builds a schedule directly from controls (epigraph values set to the step bills).
pub fn schedule_from_controls<T: Scalar>(
    s: &HouseholdScenario<T>,
    controls: Controls<T>,
    epigraph: Vec<T>,
) -> Result<ScheduleSolution<T>> {
    let steps = s.steps();
    controls.check(steps)?;
    let g = grid_exchange(s, &controls);
    let epigraph = if epigraph.is_empty() {
        g.iter().enumerate().map(|(k, gk)| step_bill(s, k, *gk)).collect()
    } else {
        epigraph
    };
    let soc = s
        .battery
        .as_ref()
        .map(|b| soc_trajectory(b, s.dt(), &controls.u_ch, &controls.u_dch));
    let theta = s
        .tcl
        .as_ref()
        .map(|t| temperature_trajectory(t, s.dt(), &controls.u_tcl));
    let bill: T = g.iter().enumerate().map(|(k, gk)| step_bill(s, k, *gk)).sum();
    let reg = reg_cost(s, &controls);
    Ok(ScheduleSolution {
        controls,
        g,
        soc,
        theta,
        epigraph,
        bill,
        reg_cost: reg,
        objective: bill + reg,
    })
}

/// Total cost of a schedule: bill plus regularization, from its controls and
/// grid exchange only.
pub fn objective_value<T: Scalar>(s: &HouseholdScenario<T>, sol: &ScheduleSolution<T>) -> T {
    let bill: T = sol
        .g
        .iter()
        .enumerate()
        .map(|(k, gk)| step_bill(s, k, *gk))
        .sum();
    bill + reg_cost(s, &sol.controls)
}

/// A built program together with its solver result and, when optimal, the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedHousehold<T> {
    pub program: HouseholdProgram<T>,
    pub result: QPResult<T>,
    pub schedule: Option<ScheduleSolution<T>>,
}

/// Builds, solves and extracts in one go.
pub fn solve_household<T: Scalar>(
    s: &HouseholdScenario<T>,
    settings: &SolverSettings<T>,
) -> Result<SolvedHousehold<T>> {
    let program = build_qp(s)?;
    let result = solve(&program.qp, settings);
    let schedule = if result.is_optimal() {
        Some(extract_solution(&program, &result.primal, s)?)
    } else {
        None
    };
    Ok(SolvedHousehold {
        program,
        result,
        schedule,
    })
}
