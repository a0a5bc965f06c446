//! Ex-post audit of solved relaxed problems.
//!
//! For a battery the two stationarity rows of step `k` read, in the units of
//! the assembled QP (energy terms carry a factor `dt`),
//!
//! ```text
//! dt v_r(u_ch)  + l_ch_up  - l_ch_lo  + (dt eta_ch / E)       L_k + dt v_e = 0
//! dt v_r(u_dch) + l_dch_up - l_dch_lo - (dt / (eta_dch E))    L_k - dt v_e = 0
//! ```
//!
//! where `L_k` is the SoC costate and `v_e` the bill subgradient. Adding
//! `eta_ch eta_dch` times the second row to the first removes `L_k`:
//!
//! ```text
//! dt v_e (1 - eta^2) + dt (v_r(u_ch) + eta^2 v_r(u_dch))
//!     + (l_ch_up - l_ch_lo) + eta^2 (l_dch_up - l_dch_lo) = 0.
//! ```
//!
//! If both controls were positive, both lower-bound multipliers vanish and
//! every remaining term is nonnegative while the first is strictly positive
//! whenever `eta^2 < 1`. The checks below evaluate exactly this.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{theorem_condition, BatteryParams, ConditionReport, HouseholdScenario};
use crate::program_builder::{ConstraintKind, HouseholdProgram, ScheduleSolution};
use crate::qp_solver::{kkt_residuals, KktTolerances, QPResult, ResidualReport, SolveStatus};
use crate::scalar::Scalar;

/// Default complementarity tolerance: `1e-6 * max(u_ch_max, u_dch_max, 1)`, at least `1e-9` kW.
pub fn default_eps_c<T: Scalar>(b: &BatteryParams<T>) -> T {
    let scale = b.u_ch_max.max(b.u_dch_max).max(T::one());
    (T::lit(1e-6) * scale).max(T::lit(1e-9))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport<T> {
    /// `min(u_ch_k, u_dch_k)` per step, kW.
    pub margins: Vec<T>,
    pub max_margin: T,
    pub eps_c: T,
    pub non_simultaneous: bool,
    /// Steps whose margin exceeds `eps_c`.
    pub simultaneous_steps: Vec<usize>,
}

pub fn check_complementarity<T: Scalar>(
    sol: &ScheduleSolution<T>,
    eps_c: T,
) -> Result<ComplementarityReport<T>> {
    if !sol.has_battery() {
        return Err(Error::NoBattery);
    }
    let margins: Vec<T> = sol
        .controls
        .u_ch
        .iter()
        .zip(&sol.controls.u_dch)
        .map(|(c, d)| c.min(*d))
        .collect();
    let max_margin = margins.iter().fold(T::zero(), |a, m| a.max(*m));
    let simultaneous_steps = margins
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > eps_c)
        .map(|(k, _)| k)
        .collect();
    Ok(ComplementarityReport {
        margins,
        max_margin,
        eps_c,
        non_simultaneous: max_margin <= eps_c,
        simultaneous_steps,
    })
}

/// Closed interval `[lo, hi]` of bill subgradients, per unit of energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: T, tol: T) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

/// Subdifferential of `g -> max{p g, s g}`: `{p}` for import, `{s}` for export,
/// `[s, p]` at `g = 0`.
pub fn bill_subgradient_interval<T: Scalar>(g: T, p: T, s: T) -> Interval<T> {
    if g > T::zero() {
        Interval::point(p)
    } else if g < T::zero() {
        Interval::point(s)
    } else {
        Interval { lo: s, hi: p }
    }
}

/// Audit of the eliminated stationarity identity at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStationarity<T> {
    pub step: usize,
    pub g: T,
    pub interval: Interval<T>,
    /// Subgradient used in the residual.
    pub v_e: T,
    /// Weight on `p` of the residual-minimizing witness, when `g` is treated as zero.
    pub delta: Option<T>,
    /// Unclipped minimizer; outside `[0, 1]` means no witness in the interval balances the row.
    pub delta_raw: Option<T>,
    /// Subgradient implied by the epigraph multipliers, `mu_p p + mu_s s`.
    pub v_e_dual: T,
    /// `mu_p / (mu_p + mu_s)`.
    pub delta_dual: Option<T>,
    pub residual: T,
}

/// Multipliers of the battery rows of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDuals<T> {
    pub ch_lower: T,
    pub ch_upper: T,
    pub dch_lower: T,
    pub dch_upper: T,
    pub epi_buy: T,
    pub epi_sell: T,
}

fn dual_of<T: Scalar>(
    prog: &HouseholdProgram<T>,
    lambda: &[T],
    kind: ConstraintKind,
    step: usize,
) -> Result<T> {
    prog.rows
        .row(kind, step)
        .and_then(|r| lambda.get(r).copied())
        .ok_or(Error::MissingDuals(kind.symbol()))
}

pub fn box_duals<T: Scalar>(
    prog: &HouseholdProgram<T>,
    lambda: &[T],
    step: usize,
) -> Result<BoxDuals<T>> {
    use ConstraintKind::*;
    Ok(BoxDuals {
        ch_lower: dual_of(prog, lambda, ChargeLower, step)?,
        ch_upper: dual_of(prog, lambda, ChargeUpper, step)?,
        dch_lower: dual_of(prog, lambda, DischargeLower, step)?,
        dch_upper: dual_of(prog, lambda, DischargeUpper, step)?,
        epi_buy: dual_of(prog, lambda, EpiBuy, step)?,
        epi_sell: dual_of(prog, lambda, EpiSell, step)?,
    })
}

fn check_duals<T: Scalar>(prog: &HouseholdProgram<T>, res: &QPResult<T>) -> Result<()> {
    if res.lambda.len() != prog.qp.num_ineq() {
        return Err(Error::MissingDuals("inequality multipliers"));
    }
    if res.nu.len() != prog.qp.num_eq() {
        return Err(Error::MissingDuals("equality multipliers"));
    }
    Ok(())
}

/// Marginal regularization cost `2 alpha u + beta`.
fn v_r<T: Scalar>(alpha: T, beta: T, u: T) -> T {
    T::lit(2.0) * alpha * u + beta
}

/// Evaluates the eliminated battery identity at every step. Steps with
/// `|g| <= g_zero_tol` use the residual-minimizing `v_e` in `[s, p]`.
pub fn battery_stationarity_residual<T: Scalar>(
    s: &HouseholdScenario<T>,
    prog: &HouseholdProgram<T>,
    sol: &ScheduleSolution<T>,
    res: &QPResult<T>,
    g_zero_tol: T,
) -> Result<Vec<StepStationarity<T>>> {
    let bat = s.battery.as_ref().ok_or(Error::NoBattery)?;
    check_duals(prog, res)?;
    let dt = s.dt();
    let eta2 = bat.round_trip();
    let one = T::one();
    let zero = T::zero();
    let c = &sol.controls;

    (0..s.steps())
        .map(|k| {
            let d = box_duals(prog, &res.lambda, k)?;
            let p = s.tariff.buy[k];
            let q = s.tariff.sell[k];
            let g = sol.g[k];
            let g_eff = if g.abs() <= g_zero_tol { zero } else { g };
            let interval = bill_subgradient_interval(g_eff, p, q);

            let base = dt
                * (v_r(s.reg.alpha_ch, s.reg.beta_ch, c.u_ch[k])
                    + eta2 * v_r(s.reg.alpha_dch, s.reg.beta_dch, c.u_dch[k]))
                + (d.ch_upper - d.ch_lower)
                + eta2 * (d.dch_upper - d.dch_lower);
            let weight = dt * (one - eta2);
            let at = |v_e: T| weight * v_e + base;

            let mu = d.epi_buy + d.epi_sell;
            let delta_dual = (mu > zero).then(|| d.epi_buy / mu);
            let v_e_dual = d.epi_buy * p + d.epi_sell * q;

            let (v_e, delta, delta_raw) = if interval.is_point() && g_eff != zero {
                (interval.lo, None, None)
            } else {
                // residual(delta) = at(s) + delta * weight * (p - s), affine in delta.
                let slope = weight * (p - q);
                let raw = if slope > zero {
                    -at(q) / slope
                } else {
                    delta_dual.unwrap_or(T::lit(0.5))
                };
                let dl = raw.max(zero).min(one);
                (dl * p + (one - dl) * q, Some(dl), Some(raw))
            };

            Ok(StepStationarity {
                step: k,
                g,
                interval,
                v_e,
                delta,
                delta_raw,
                v_e_dual,
                delta_dual,
                residual: at(v_e),
            })
        })
        .collect()
}

/// SoC costate `L_k = sum_{j >= k} (l_soc_upper_j - l_soc_lower_j)`.
pub fn soc_costate<T: Scalar>(prog: &HouseholdProgram<T>, lambda: &[T]) -> Result<Vec<T>> {
    let steps = prog.index.steps();
    let mut out = vec![T::zero(); steps];
    let mut acc = T::zero();
    for k in (0..steps).rev() {
        acc += dual_of(prog, lambda, ConstraintKind::SocUpper, k)?
            - dual_of(prog, lambda, ConstraintKind::SocLower, k)?;
        out[k] = acc;
    }
    Ok(out)
}

/// Costate implied by the charge row when both charge bounds are inactive:
/// `L_k = -E (v_e + v_r(u_ch)) / eta_ch`.
pub fn charging_costate<T: Scalar>(s: &HouseholdScenario<T>, sol: &ScheduleSolution<T>, step: usize, v_e: T) -> Result<T> {
    let bat = s.battery.as_ref().ok_or(Error::NoBattery)?;
    let vr = v_r(s.reg.alpha_ch, s.reg.beta_ch, sol.controls.u_ch[step]);
    Ok(-bat.capacity * (v_e + vr) / bat.eta_ch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagKind {
    /// Both controls positive while `eta^2 < 1`: the identity cannot hold.
    Contradiction,
    /// Both controls positive with `eta^2 >= 1`: the sufficient condition is not met.
    PreconditionViolated,
    /// A battery bound multiplier is negative.
    DualInfeasible,
    /// No subgradient in `[s, p]` balances the identity at a `g = 0` step.
    DeltaOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofFlag<T> {
    pub step: usize,
    pub kind: FlagKind,
    pub value: T,
    pub message: String,
}

/// Left side of the identity at a step where both lower-bound multipliers are
/// taken as zero: `dt v_e (1 - eta^2) + dt (v_r sum) + l_ch_up + eta^2 l_dch_up`.
pub fn simultaneous_lhs<T: Scalar>(
    s: &HouseholdScenario<T>,
    sol: &ScheduleSolution<T>,
    duals: &BoxDuals<T>,
    step: usize,
    v_e: T,
) -> Result<T> {
    let bat = s.battery.as_ref().ok_or(Error::NoBattery)?;
    let eta2 = bat.round_trip();
    let dt = s.dt();
    let c = &sol.controls;
    Ok(dt * v_e * (T::one() - eta2)
        + dt * (v_r(s.reg.alpha_ch, s.reg.beta_ch, c.u_ch[step])
            + eta2 * v_r(s.reg.alpha_dch, s.reg.beta_dch, c.u_dch[step]))
        + duals.ch_upper
        + eta2 * duals.dch_upper)
}

/// Flags every step where the sign argument behind non-simultaneity breaks
/// down or is contradicted. An empty result means nothing suspicious.
pub fn proof_structure_flags<T: Scalar>(
    s: &HouseholdScenario<T>,
    prog: &HouseholdProgram<T>,
    sol: &ScheduleSolution<T>,
    lambda: &[T],
    stationarity: &[StepStationarity<T>],
    eps_c: T,
    dual_tol: T,
) -> Result<Vec<ProofFlag<T>>> {
    let bat = s.battery.as_ref().ok_or(Error::NoBattery)?;
    let holds = bat.round_trip() < T::one();
    let mut flags = Vec::new();
    for st in stationarity {
        let k = st.step;
        let d = box_duals(prog, lambda, k)?;
        let named = [
            ("λ^{ch↑}", d.ch_lower),
            ("λ^{ch↓}", d.ch_upper),
            ("λ^{dch↑}", d.dch_lower),
            ("λ^{dch↓}", d.dch_upper),
        ];
        for (name, v) in named {
            if v < -dual_tol {
                flags.push(ProofFlag {
                    step: k,
                    kind: FlagKind::DualInfeasible,
                    value: v,
                    message: format!("{name} = {v:e} is negative; dual feasibility violated"),
                });
            }
        }
        if let Some(raw) = st.delta_raw {
            let slack = T::lit(1e-9);
            if raw < -slack || raw > T::one() + slack {
                flags.push(ProofFlag {
                    step: k,
                    kind: FlagKind::DeltaOutOfRange,
                    value: raw,
                    message: format!("balancing delta {raw:e} lies outside [0, 1]"),
                });
            }
        }
        let (uc, ud) = (sol.controls.u_ch[k], sol.controls.u_dch[k]);
        if uc > eps_c && ud > eps_c {
            let lhs = simultaneous_lhs(s, sol, &d, k, st.v_e)?;
            let flag = if holds {
                ProofFlag {
                    step: k,
                    kind: FlagKind::Contradiction,
                    value: lhs,
                    message: format!(
                        "u_ch = {uc:e}, u_dch = {ud:e} both positive: first term is strictly positive, left side = {lhs:e}"
                    ),
                }
            } else {
                ProofFlag {
                    step: k,
                    kind: FlagKind::PreconditionViolated,
                    value: lhs,
                    message: format!(
                        "u_ch = {uc:e}, u_dch = {ud:e} both positive with eta_ch * eta_dch >= 1"
                    ),
                }
            };
            flags.push(flag);
        }
    }
    Ok(flags)
}

/// Tolerances used by [`certify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions<T> {
    /// Complementarity tolerance in kW; `None` uses [`default_eps_c`].
    pub eps_c: Option<T>,
    pub kkt: KktTolerances<T>,
    /// Bound on the eliminated battery identity.
    pub stationarity: T,
    /// `|g|` at or below this is treated as the kink of the bill.
    pub g_zero: T,
}

impl<T: Scalar> Default for CertifyOptions<T> {
    fn default() -> Self {
        Self {
            eps_c: None,
            kkt: KktTolerances::default(),
            stationarity: T::lit(1e-6),
            g_zero: T::lit(1e-7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryAudit<T> {
    pub condition: ConditionReport<T>,
    pub complementarity: ComplementarityReport<T>,
    pub stationarity: Vec<StepStationarity<T>>,
    pub max_stationarity_residual: T,
    pub stationarity_ok: bool,
    pub flags: Vec<ProofFlag<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport<T> {
    pub kkt: ResidualReport<T>,
    pub kkt_ok: bool,
    /// `None` when the scenario has no battery; the complementarity audit is then vacuous.
    pub battery: Option<BatteryAudit<T>>,
    pub passed: bool,
}

impl<T: Scalar> CertificateReport<T> {
    pub fn non_simultaneous(&self) -> Option<bool> {
        self.battery.as_ref().map(|b| b.complementarity.non_simultaneous)
    }

    pub fn simultaneous_steps(&self) -> usize {
        self.battery
            .as_ref()
            .map_or(0, |b| b.complementarity.simultaneous_steps.len())
    }
}

/// Full audit of an optimal solution. Refuses anything not marked optimal.
///
/// `passed` requires the KKT residuals within tolerance, the battery identity
/// within tolerance at every step, and non-simultaneity whenever
/// `eta_ch * eta_dch < 1`.
pub fn certify<T: Scalar>(
    s: &HouseholdScenario<T>,
    prog: &HouseholdProgram<T>,
    sol: &ScheduleSolution<T>,
    res: &QPResult<T>,
    opts: &CertifyOptions<T>,
) -> Result<CertificateReport<T>> {
    if res.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(res.status));
    }
    check_duals(prog, res)?;
    if res.primal.len() != prog.qp.num_vars() {
        return Err(Error::DimensionMismatch {
            what: "primal",
            expected: prog.qp.num_vars(),
            got: res.primal.len(),
        });
    }
    let kkt = kkt_residuals(&prog.qp, res);
    let kkt_ok = kkt.within(&opts.kkt);

    let battery = match &s.battery {
        None => None,
        Some(bat) => {
            let eps_c = opts.eps_c.unwrap_or_else(|| default_eps_c(bat));
            let condition = theorem_condition(s)?;
            let complementarity = check_complementarity(sol, eps_c)?;
            let stationarity = battery_stationarity_residual(s, prog, sol, res, opts.g_zero)?;
            let max_stationarity_residual = stationarity
                .iter()
                .fold(T::zero(), |a, st| a.max(st.residual.abs()));
            let flags = proof_structure_flags(
                s,
                prog,
                sol,
                &res.lambda,
                &stationarity,
                eps_c,
                opts.kkt.dual,
            )?;
            Some(BatteryAudit {
                condition,
                complementarity,
                stationarity_ok: max_stationarity_residual <= opts.stationarity,
                stationarity,
                max_stationarity_residual,
                flags,
            })
        }
    };

    let battery_ok = battery.as_ref().map_or(true, |b| {
        b.stationarity_ok && (!b.condition.holds || b.complementarity.non_simultaneous)
    });
    Ok(CertificateReport {
        passed: kkt_ok && battery_ok,
        kkt,
        kkt_ok,
        battery,
    })
}
