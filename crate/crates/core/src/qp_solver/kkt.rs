use serde::{Deserialize, Serialize};

use super::{QPResult, QuadraticProgram};
use crate::scalar::{norm_inf, Scalar};

/// The four KKT residual groups, recomputed from the problem data alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    /// `||Q x + c + A' lambda + E' nu||_inf`
    pub stationarity: T,
    /// `max_i |lambda_i (a_i'x - b_i)|`
    pub complementarity: T,
    /// Largest inequality excess or equality mismatch.
    pub primal_feasibility: T,
    /// `max(0, -min_i lambda_i)`
    pub dual_violation: T,
    /// Smallest inequality multiplier (or zero when there are none).
    pub min_lambda: T,
    pub worst_stationarity_var: Option<usize>,
    pub worst_primal_row: Option<usize>,
    pub worst_complementarity_row: Option<usize>,
    pub worst_dual_row: Option<usize>,
}

impl<T: Scalar> ResidualReport<T> {
    /// True when every group is inside its tolerance.
    pub fn within(&self, tol: &KktTolerances<T>) -> bool {
        self.stationarity <= tol.stationarity
            && self.complementarity <= tol.complementarity
            && self.primal_feasibility <= tol.primal
            && self.min_lambda >= -tol.dual
    }
}

/// Acceptance thresholds for an independently recomputed KKT point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktTolerances<T> {
    pub stationarity: T,
    pub complementarity: T,
    pub primal: T,
    /// Multipliers may dip to `-dual`.
    pub dual: T,
}

impl<T: Scalar> Default for KktTolerances<T> {
    fn default() -> Self {
        Self {
            stationarity: T::lit(1e-6),
            complementarity: T::lit(1e-7),
            primal: T::lit(1e-8),
            dual: T::lit(1e-10),
        }
    }
}

pub fn kkt_residuals<T: Scalar>(qp: &QuadraticProgram<T>, res: &QPResult<T>) -> ResidualReport<T> {
    kkt_residuals_at(qp, &res.primal, &res.lambda, &res.nu)
}

fn argmax<T: Scalar>(v: impl Iterator<Item = T>) -> (T, Option<usize>) {
    v.enumerate().fold((T::zero(), None), |(best, at), (i, x)| {
        if x > best {
            (x, Some(i))
        } else {
            (best, at)
        }
    })
}

/// Residuals of an arbitrary primal-dual point. Panics on dimension mismatch.
pub fn kkt_residuals_at<T: Scalar>(
    qp: &QuadraticProgram<T>,
    x: &[T],
    lambda: &[T],
    nu: &[T],
) -> ResidualReport<T> {
    assert_eq!(x.len(), qp.num_vars(), "primal length");
    assert_eq!(lambda.len(), qp.num_ineq(), "lambda length");
    assert_eq!(nu.len(), qp.num_eq(), "nu length");

    let grad = qp.lagrangian_gradient(x, lambda, nu);
    let h = qp.ineq_values(x);
    let e = qp.eq_values(x);

    let (stationarity, worst_stationarity_var) = argmax(grad.iter().map(|g| g.abs()));
    let (compl, worst_complementarity_row) =
        argmax(h.iter().zip(lambda).map(|(hi, li)| (*hi * *li).abs()));
    let (ineq_excess, worst_primal_row) = argmax(h.iter().map(|hi| hi.max(T::zero())));
    let (dual_violation, worst_dual_row) = argmax(lambda.iter().map(|l| -*l));
    let min_lambda = lambda.iter().fold(T::zero(), |a, l| a.min(*l));

    ResidualReport {
        stationarity,
        complementarity: compl,
        primal_feasibility: ineq_excess.max(norm_inf(&e)),
        dual_violation,
        min_lambda,
        worst_stationarity_var,
        worst_primal_row,
        worst_complementarity_row,
        worst_dual_row,
    }
}
