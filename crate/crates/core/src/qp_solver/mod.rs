//! Dense convex QP solver for problems of the form
//!
//! ```text
//!     minimize     1/2 x' Q x + c' x        (Q diagonal, Q >= 0)
//!     subject to   A x <= b
//!                  E x  = f
//! ```
//!
//! The multipliers follow the convention `Q x + c + A' lambda + E' nu = 0`,
//! `lambda >= 0`, so a row `h(x) = a'x - b <= 0` carries the usual sign.
//!
//! Solving goes through a bound-propagation presolve (empty boxes, impossible
//! rows, fixed variables) and a Mehrotra predictor-corrector interior-point
//! method on what remains.

mod ipm;
mod kkt;
mod presolve;

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::scalar::{dot, Scalar};

pub use kkt::{kkt_residuals, kkt_residuals_at, KktTolerances, ResidualReport};

/// Standard-form convex QP with a diagonal Hessian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProgram<T> {
    /// Diagonal of `Q`.
    pub q_diag: Vec<T>,
    pub c: Vec<T>,
    pub a_ineq: DenseMatrix<T>,
    pub b_ineq: Vec<T>,
    pub a_eq: DenseMatrix<T>,
    pub b_eq: Vec<T>,
}

impl<T: Scalar> QuadraticProgram<T> {
    /// Panics on inconsistent dimensions.
    pub fn new(
        q_diag: Vec<T>,
        c: Vec<T>,
        a_ineq: DenseMatrix<T>,
        b_ineq: Vec<T>,
        a_eq: DenseMatrix<T>,
        b_eq: Vec<T>,
    ) -> Self {
        let qp = Self {
            q_diag,
            c,
            a_ineq,
            b_ineq,
            a_eq,
            b_eq,
        };
        if let Err(e) = qp.check_shapes() {
            panic!("malformed QP: {e}");
        }
        qp
    }

    pub fn check_shapes(&self) -> Result<(), String> {
        let n = self.c.len();
        if self.q_diag.len() != n {
            return Err(format!("Q has {} entries, c has {n}", self.q_diag.len()));
        }
        if self.a_ineq.cols() != n || self.a_eq.cols() != n {
            return Err("constraint matrices must have n columns".into());
        }
        if self.a_ineq.rows() != self.b_ineq.len() {
            return Err("A_ineq rows do not match b_ineq".into());
        }
        if self.a_eq.rows() != self.b_eq.len() {
            return Err("A_eq rows do not match b_eq".into());
        }
        Ok(())
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    #[inline]
    pub fn num_ineq(&self) -> usize {
        self.b_ineq.len()
    }

    #[inline]
    pub fn num_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn objective(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        x.iter()
            .zip(&self.q_diag)
            .zip(&self.c)
            .map(|((xi, qi), ci)| half * *qi * *xi * *xi + *ci * *xi)
            .sum()
    }

    /// Lagrange dual value `-1/2 x'Qx - b'lambda - f'nu`; a lower bound on the
    /// optimum whenever `(x, lambda, nu)` is dual feasible.
    pub fn dual_objective(&self, x: &[T], lambda: &[T], nu: &[T]) -> T {
        let half = T::lit(0.5);
        let quad: T = x
            .iter()
            .zip(&self.q_diag)
            .map(|(xi, qi)| *qi * *xi * *xi)
            .sum();
        -(half * quad) - dot(&self.b_ineq, lambda) - dot(&self.b_eq, nu)
    }

    /// `A x - b`, one entry per inequality row.
    pub fn ineq_values(&self, x: &[T]) -> Vec<T> {
        self.a_ineq
            .mul_vec(x)
            .into_iter()
            .zip(&self.b_ineq)
            .map(|(ax, b)| ax - *b)
            .collect()
    }

    /// `E x - f`
    pub fn eq_values(&self, x: &[T]) -> Vec<T> {
        self.a_eq
            .mul_vec(x)
            .into_iter()
            .zip(&self.b_eq)
            .map(|(ex, f)| ex - *f)
            .collect()
    }

    /// `Q x + c + A' lambda + E' nu`
    pub fn lagrangian_gradient(&self, x: &[T], lambda: &[T], nu: &[T]) -> Vec<T> {
        let at = self.a_ineq.tr_mul_vec(lambda);
        let et = self.a_eq.tr_mul_vec(nu);
        (0..self.num_vars())
            .map(|j| self.q_diag[j] * x[j] + self.c[j] + at[j] + et[j])
            .collect()
    }

    /// Scales `Q` and `c` by `gamma`.
    pub fn scale_objective(&self, gamma: T) -> Self {
        let mut out = self.clone();
        out.q_diag.iter_mut().for_each(|q| *q *= gamma);
        out.c.iter_mut().for_each(|c| *c *= gamma);
        out
    }

    /// Substitutes fixed values for some variables and drops them. Rows whose
    /// remaining coefficients are all zero are dropped as well.
    pub fn eliminate(&self, fixed: &[(usize, T)]) -> Reduction<T> {
        presolve::eliminate(self, fixed)
    }
}

/// A QP with some variables substituted out, and the bookkeeping to map back.
#[derive(Debug, Clone)]
pub struct Reduction<T> {
    pub reduced: QuadraticProgram<T>,
    /// Original index of each reduced variable.
    pub kept_vars: Vec<usize>,
    /// Original index of each reduced inequality row.
    pub kept_ineq: Vec<usize>,
    pub kept_eq: Vec<usize>,
    /// Full-length values for the eliminated variables (others zero).
    pub fixed_values: Vec<T>,
    pub is_fixed: Vec<bool>,
    /// Rows left with no free variable, as `(row, a'x_fixed - b)`.
    pub constant_ineq: Vec<(usize, T)>,
    pub constant_eq: Vec<(usize, T)>,
}

impl<T: Scalar> Reduction<T> {
    pub fn expand_primal(&self, x_reduced: &[T]) -> Vec<T> {
        let mut x = self.fixed_values.clone();
        for (v, &j) in x_reduced.iter().zip(&self.kept_vars) {
            x[j] = *v;
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T> {
    /// Absolute tolerance on constraint violation.
    pub tol_primal: T,
    /// Absolute tolerance on the Lagrangian gradient.
    pub tol_dual: T,
    /// Relative duality-gap tolerance.
    pub tol_gap: T,
    /// Largest admissible `|lambda_i * (a_i'x - b_i)|`.
    pub tol_compl: T,
    pub max_iter: usize,
    /// Normalized Farkas residual below which divergence counts as infeasibility.
    pub infeasibility_threshold: T,
}

impl<T: Scalar> Default for SolverSettings<T> {
    /// Tight tolerances for `f64`; single precision gets looser ones scaled to its epsilon.
    fn default() -> Self {
        if T::epsilon() > T::lit(1e-10) {
            return Self {
                tol_primal: T::lit(1e-4),
                tol_dual: T::lit(1e-4),
                tol_gap: T::lit(1e-4),
                tol_compl: T::lit(1e-6),
                max_iter: 200,
                infeasibility_threshold: T::lit(1e-3),
            };
        }
        Self {
            tol_primal: T::lit(1e-8),
            tol_dual: T::lit(1e-8),
            tol_gap: T::lit(1e-8),
            tol_compl: T::lit(1e-13),
            max_iter: 200,
            infeasibility_threshold: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<(), String> {
        let tols = [
            self.tol_primal,
            self.tol_dual,
            self.tol_gap,
            self.tol_compl,
            self.infeasibility_threshold,
        ];
        if tols.iter().any(|t| !(*t > T::zero())) {
            return Err("all tolerances must be positive".into());
        }
        if self.max_iter < 1 {
            return Err("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::PrimalInfeasible => "PrimalInfeasible",
            SolveStatus::IterationLimit => "IterationLimit",
            SolveStatus::NumericalFailure => "NumericalFailure",
        }
    }
}

/// Why a problem was declared infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InfeasibilityCertificate<T> {
    /// Singleton rows give variable `var` a lower bound above its upper bound.
    EmptyBox { var: usize, lower: T, upper: T },
    /// Over the variable boxes, inequality `row` cannot reach its right-hand side.
    IneqActivity { row: usize, min_activity: T, rhs: T },
    /// Over the variable boxes, equality `row` cannot reach its right-hand side.
    EqActivity {
        row: usize,
        min_activity: T,
        max_activity: T,
        rhs: T,
    },
    /// `y >= 0`, `A'y + E'z ~ 0`, `b'y + f'z < 0`.
    Farkas {
        y: Vec<T>,
        z: Vec<T>,
        residual: T,
        value: T,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals<T> {
    pub primal: T,
    pub dual: T,
    /// `(primal objective - dual objective) / (1 + |primal objective|)`
    pub gap: T,
    pub complementarity: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPResult<T> {
    pub status: SolveStatus,
    pub primal: Vec<T>,
    /// Inequality multipliers.
    pub lambda: Vec<T>,
    /// Equality multipliers.
    pub nu: Vec<T>,
    pub iterations: usize,
    pub residuals: Residuals<T>,
    pub objective: T,
    pub certificate: Option<InfeasibilityCertificate<T>>,
}

impl<T: Scalar> QPResult<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn empty(qp: &QuadraticProgram<T>, status: SolveStatus) -> Self {
        Self {
            status,
            primal: vec![T::zero(); qp.num_vars()],
            lambda: vec![T::zero(); qp.num_ineq()],
            nu: vec![T::zero(); qp.num_eq()],
            iterations: 0,
            residuals: Residuals {
                primal: T::infinity(),
                dual: T::infinity(),
                gap: T::infinity(),
                complementarity: T::infinity(),
            },
            objective: T::nan(),
            certificate: None,
        }
    }
}

/// Solves `qp`. Never panics on numerical trouble; failures come back as a status.
pub fn solve<T: Scalar>(qp: &QuadraticProgram<T>, settings: &SolverSettings<T>) -> QPResult<T> {
    if let Err(e) = qp.check_shapes().and(settings.validate()) {
        log::warn!("refusing to solve: {e}");
        return QPResult::empty(qp, SolveStatus::NumericalFailure);
    }
    let finite = qp.q_diag.iter().all(|v| v.is_finite())
        && qp.c.iter().all(|v| v.is_finite())
        && qp.b_ineq.iter().all(|v| v.is_finite())
        && qp.b_eq.iter().all(|v| v.is_finite());
    if !finite || qp.q_diag.iter().any(|q| *q < T::zero()) {
        return QPResult::empty(qp, SolveStatus::NumericalFailure);
    }

    let pre = match presolve::presolve(qp, settings.tol_primal) {
        Ok(p) => p,
        Err(cert) => {
            let mut res = QPResult::empty(qp, SolveStatus::PrimalInfeasible);
            res.certificate = Some(cert);
            return res;
        }
    };

    let inner = ipm::interior_point(&pre.reduction.reduced, &pre.lower, &pre.upper, settings);
    let mut res = presolve::postsolve(qp, &pre, inner);
    if res.status == SolveStatus::Optimal || res.status == SolveStatus::IterationLimit {
        let r = kkt_residuals_at(qp, &res.primal, &res.lambda, &res.nu);
        res.residuals = Residuals {
            primal: r.primal_feasibility,
            dual: r.stationarity,
            gap: relative_gap(qp, &res.primal, &res.lambda, &res.nu),
            complementarity: r.complementarity,
        };
        res.objective = qp.objective(&res.primal);
    }
    res
}

pub(crate) fn relative_gap<T: Scalar>(
    qp: &QuadraticProgram<T>,
    x: &[T],
    lambda: &[T],
    nu: &[T],
) -> T {
    let p = qp.objective(x);
    let d = qp.dual_objective(x, lambda, nu);
    (p - d) / (T::one() + p.abs())
}
