//! Exact reference for the charge/discharge exclusivity constraint on short
//! horizons.
//!
//! Every point satisfying `u_ch_k * u_dch_k = 0` has, at each step, at least
//! one side equal to zero. Fixing one side per step gives `2^K` convex QPs
//! whose feasible sets together cover the exclusive problem exactly; the
//! smallest of their optima is the exact optimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_scenario, HouseholdScenario};
use crate::program_builder::{
    build_qp, extract_solution, Controls, HouseholdProgram, ScheduleSolution, VarKind,
};
use crate::qp_solver::{solve, SolveStatus, SolverSettings};
use crate::scalar::Scalar;

/// Horizon limit used when the caller does not choose one.
pub const DEFAULT_K_LIMIT: usize = 10;

/// Hard cap on the horizon, whatever limit is requested.
pub const MAX_K_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternResult<T> {
    /// Bit `k` set forces `u_dch_k = 0`; clear forces `u_ch_k = 0`.
    pub pattern: u64,
    pub status: SolveStatus,
    /// `None` when the pattern is infeasible or was not solved to optimality.
    pub objective: Option<T>,
    pub solution: Option<ScheduleSolution<T>>,
}

impl<T: Scalar> PatternResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.objective.is_some()
    }

    /// `true` when step `k` may charge (its discharge side is fixed to zero).
    pub fn charges_at(&self, k: usize) -> bool {
        self.pattern >> k & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution<T> {
    /// Lowest-objective feasible pattern; `None` when every pattern is infeasible.
    pub best: Option<PatternResult<T>>,
    /// All `2^K` patterns in index order.
    pub all: Vec<PatternResult<T>>,
    /// Patterns that stopped without an optimality or infeasibility verdict.
    pub unresolved: usize,
}

/// Column fixings that realize `pattern` in `prog`.
pub fn pattern_fixings<T: Scalar>(prog: &HouseholdProgram<T>, pattern: u64) -> Vec<(usize, T)> {
    (0..prog.index.steps())
        .filter_map(|k| {
            let kind = if pattern >> k & 1 == 1 {
                VarKind::Discharge
            } else {
                VarKind::Charge
            };
            prog.index.slot(kind, k).map(|j| (j, T::zero()))
        })
        .collect()
}

/// A pattern containing the given exclusive controls: bit `k` is set exactly
/// when the step charges. Returns `None` if some step has both sides positive.
pub fn pattern_of<T: Scalar>(controls: &Controls<T>) -> Option<u64> {
    let mut bits = 0u64;
    for (k, (c, d)) in controls.u_ch.iter().zip(&controls.u_dch).enumerate() {
        if *c > T::zero() && *d > T::zero() {
            return None;
        }
        if *c > T::zero() {
            bits |= 1 << k;
        }
    }
    Some(bits)
}

/// Solves one pattern. Constant rows left after fixing are checked against
/// `settings.tol_primal`.
pub fn solve_pattern<T: Scalar>(
    s: &HouseholdScenario<T>,
    prog: &HouseholdProgram<T>,
    pattern: u64,
    settings: &SolverSettings<T>,
) -> Result<PatternResult<T>> {
    let red = prog.qp.eliminate(&pattern_fixings(prog, pattern));
    let tol = settings.tol_primal;
    let infeasible = red.constant_ineq.iter().any(|(_, v)| *v > tol)
        || red.constant_eq.iter().any(|(_, v)| v.abs() > tol);
    if infeasible {
        return Ok(PatternResult {
            pattern,
            status: SolveStatus::PrimalInfeasible,
            objective: None,
            solution: None,
        });
    }
    let res = solve(&red.reduced, settings);
    if !res.is_optimal() {
        return Ok(PatternResult {
            pattern,
            status: res.status,
            objective: None,
            solution: None,
        });
    }
    let primal = red.expand_primal(&res.primal);
    let sol = extract_solution(prog, &primal, s)?;
    Ok(PatternResult {
        pattern,
        status: SolveStatus::Optimal,
        objective: Some(sol.objective),
        solution: Some(sol),
    })
}

/// Enumerates all `2^K` patterns (in parallel) and keeps the cheapest.
/// Objectives within `1e-12 (1 + |best|)` of each other count as ties and go
/// to the lowest pattern index.
pub fn solve_exact<T: Scalar>(
    s: &HouseholdScenario<T>,
    k_limit: usize,
    settings: &SolverSettings<T>,
) -> Result<ExactSolution<T>> {
    let report = validate_scenario(s);
    if !report.passed() {
        return Err(Error::Invalid(report));
    }
    if s.battery.is_none() {
        return Err(Error::NoBattery);
    }
    let limit = k_limit.min(MAX_K_LIMIT);
    if s.steps() > limit {
        return Err(Error::HorizonTooLong {
            steps: s.steps(),
            limit,
        });
    }
    let prog = build_qp(s)?;
    let count = 1u64 << s.steps();
    let all = (0..count)
        .into_par_iter()
        .map(|pattern| solve_pattern(s, &prog, pattern, settings))
        .collect::<Result<Vec<_>>>()?;

    let unresolved = all
        .iter()
        .filter(|p| !matches!(p.status, SolveStatus::Optimal | SolveStatus::PrimalInfeasible))
        .count();
    let mut best: Option<&PatternResult<T>> = None;
    for p in &all {
        let Some(obj) = p.objective else { continue };
        let better = match best.and_then(|b| b.objective) {
            None => true,
            Some(b) => obj < b - T::lit(1e-12) * (T::one() + b.abs()),
        };
        if better {
            best = Some(p);
        }
    }
    Ok(ExactSolution {
        best: best.cloned(),
        all,
        unresolved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport<T> {
    pub relaxed_objective: T,
    /// `None` when no pattern is feasible.
    pub exact_objective: Option<T>,
    /// `(relaxed - exact) / (1 + |exact|)`, sign preserved; `-inf` when the exact problem is infeasible.
    pub relative_gap: T,
    /// `|relative_gap| <= 1e-6`.
    pub tight: bool,
    /// `relaxed <= exact + 1e-7 (1 + |exact|)`.
    pub bound_holds: bool,
}

pub fn compare<T: Scalar>(relaxed: &ScheduleSolution<T>, exact: &PatternResult<T>) -> GapReport<T> {
    let r = relaxed.objective;
    match exact.objective {
        None => GapReport {
            relaxed_objective: r,
            exact_objective: None,
            relative_gap: T::neg_infinity(),
            tight: false,
            bound_holds: true,
        },
        Some(e) => {
            let scale = T::one() + e.abs();
            let gap = (r - e) / scale;
            GapReport {
                relaxed_objective: r,
                exact_objective: Some(e),
                relative_gap: gap,
                tight: gap.abs() <= T::lit(1e-6),
                bound_holds: gap <= T::lit(1e-7),
            }
        }
    }
}
