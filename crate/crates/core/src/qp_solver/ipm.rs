//! Mehrotra predictor-corrector on
//!
//! ```text
//!     Q x + c + A' lambda + E' nu = 0
//!     A x + s = b,  E x = f
//!     lambda o s = 0,  lambda, s >= 0
//! ```
//!
//! Each Newton system is reduced to `(Q + A' W A) dx + E' dnu = r`, `E dx = r'`
//! with `W = diag(lambda / s)`, factored densely by Cholesky with a Schur
//! complement for the (at most a handful of) equality rows.

use super::{relative_gap, InfeasibilityCertificate, QPResult, QuadraticProgram, Residuals, SolveStatus, SolverSettings};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::scalar::{dot, norm_inf, Scalar};

/// Fraction of the distance to the boundary taken by each step.
const STEP_FRACTION: f64 = 0.995;

struct Iterate<T> {
    x: Vec<T>,
    s: Vec<T>,
    lambda: Vec<T>,
    nu: Vec<T>,
}

struct Direction<T> {
    dx: Vec<T>,
    ds: Vec<T>,
    dl: Vec<T>,
    dn: Vec<T>,
}

/// Factored reduced Newton matrix for one iteration.
struct NewtonSystem<'a, T> {
    qp: &'a QuadraticProgram<T>,
    h: DenseMatrix<T>,
    chol: Cholesky<T>,
    /// `H^{-1} E'`, column by column.
    h_inv_et: Vec<Vec<T>>,
    schur: Option<Cholesky<T>>,
}

impl<'a, T: Scalar> NewtonSystem<'a, T> {
    fn new(qp: &'a QuadraticProgram<T>, w: &[T]) -> Option<Self> {
        let n = qp.num_vars();
        let mut h = DenseMatrix::zeros(n, n);
        for j in 0..n {
            h[(j, j)] = qp.q_diag[j];
        }
        for (i, wi) in w.iter().enumerate() {
            let row = qp.a_ineq.row(i);
            for (j, aj) in row.iter().enumerate() {
                if aj.is_zero() {
                    continue;
                }
                let waj = *wi * *aj;
                for k in 0..=j {
                    h[(j, k)] += waj * row[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                h[(k, j)] = h[(j, k)];
            }
        }

        let diag_max = (0..n).fold(T::one(), |m, j| m.max(h[(j, j)]));
        let mut reg = T::epsilon() * diag_max;
        let chol = loop {
            let mut hr = h.clone();
            for j in 0..n {
                hr[(j, j)] += reg;
            }
            match Cholesky::factor(&hr) {
                Ok(c) => break c,
                Err(_) if reg < T::lit(1e-6) * diag_max => reg *= T::lit(100.0),
                Err(_) => return None,
            }
        };

        let p = qp.num_eq();
        let h_inv_et: Vec<Vec<T>> = (0..p).map(|r| chol.solve(qp.a_eq.row(r))).collect();
        let schur = if p > 0 {
            let mut s = DenseMatrix::zeros(p, p);
            for r in 0..p {
                for q in 0..p {
                    s[(r, q)] = dot(qp.a_eq.row(r), &h_inv_et[q]);
                }
            }
            let smax = (0..p).fold(T::one(), |m, j| m.max(s[(j, j)]));
            for r in 0..p {
                s[(r, r)] += T::epsilon() * smax;
            }
            Some(Cholesky::factor(&s).ok()?)
        } else {
            None
        };

        Some(Self {
            qp,
            h,
            chol,
            h_inv_et,
            schur,
        })
    }

    /// Solves `H dx + E' dnu = r1`, `E dx = r2`.
    fn solve_block(&self, r1: &[T], r2: &[T]) -> (Vec<T>, Vec<T>) {
        let mut dx = self.chol.solve(r1);
        let mut dn = Vec::new();
        if let Some(schur) = &self.schur {
            let rhs: Vec<T> = (0..r2.len())
                .map(|r| dot(self.qp.a_eq.row(r), &dx) - r2[r])
                .collect();
            dn = schur.solve(&rhs);
            for (col, v) in self.h_inv_et.iter().zip(&dn) {
                for (d, c) in dx.iter_mut().zip(col) {
                    *d -= *v * *c;
                }
            }
        }
        (dx, dn)
    }

    /// Block solve plus one step of iterative refinement against the
    /// unregularized matrix.
    fn solve_refined(&self, r1: &[T], r2: &[T]) -> (Vec<T>, Vec<T>) {
        let (mut dx, mut dn) = self.solve_block(r1, r2);
        let hdx = self.h.mul_vec(&dx);
        let etn = self.qp.a_eq.tr_mul_vec(&dn);
        let e1: Vec<T> = (0..dx.len()).map(|j| r1[j] - hdx[j] - etn[j]).collect();
        let edx = self.qp.a_eq.mul_vec(&dx);
        let e2: Vec<T> = (0..r2.len()).map(|r| r2[r] - edx[r]).collect();
        let (cx, cn) = self.solve_block(&e1, &e2);
        dx.iter_mut().zip(cx).for_each(|(a, b)| *a += b);
        dn.iter_mut().zip(cn).for_each(|(a, b)| *a += b);
        (dx, dn)
    }

    /// Newton direction for complementarity right-hand side `rc`.
    fn direction(&self, it: &Iterate<T>, rd: &[T], rp: &[T], re: &[T], rc: &[T]) -> Direction<T> {
        let qp = self.qp;
        let m = qp.num_ineq();
        let tmp: Vec<T> = (0..m)
            .map(|i| (it.lambda[i] * rp[i] - rc[i]) / it.s[i])
            .collect();
        let at = qp.a_ineq.tr_mul_vec(&tmp);
        let r1: Vec<T> = rd.iter().zip(&at).map(|(d, a)| -*d - *a).collect();
        let r2: Vec<T> = re.iter().map(|v| -*v).collect();
        let (dx, dn) = self.solve_refined(&r1, &r2);
        let adx = qp.a_ineq.mul_vec(&dx);
        let ds: Vec<T> = (0..m).map(|i| -rp[i] - adx[i]).collect();
        let dl: Vec<T> = (0..m)
            .map(|i| (-rc[i] - it.lambda[i] * ds[i]) / it.s[i])
            .collect();
        Direction { dx, ds, dl, dn }
    }
}

fn max_step<T: Scalar>(v: &[T], dv: &[T]) -> T {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < T::zero())
        .fold(T::infinity(), |a, (x, d)| a.min(-*x / *d))
}

fn starting_point<T: Scalar>(qp: &QuadraticProgram<T>, lower: &[T], upper: &[T]) -> Iterate<T> {
    let one = T::one();
    let x: Vec<T> = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => T::lit(0.5) * (*lo + *hi),
            (true, false) => *lo + one,
            (false, true) => *hi - one,
            (false, false) => T::zero(),
        })
        .collect();
    let s = qp
        .ineq_values(&x)
        .into_iter()
        .map(|h| (-h).max(one))
        .collect();
    Iterate {
        x,
        s,
        lambda: vec![one; qp.num_ineq()],
        nu: vec![T::zero(); qp.num_eq()],
    }
}

pub(super) fn interior_point<T: Scalar>(
    qp: &QuadraticProgram<T>,
    lower: &[T],
    upper: &[T],
    settings: &SolverSettings<T>,
) -> QPResult<T> {
    let m = qp.num_ineq();
    let mf = T::from_usize(m.max(1)).unwrap();
    let mut it = starting_point(qp, lower, upper);
    let tau = T::lit(STEP_FRACTION);
    let mu_floor = settings.tol_compl * T::lit(0.01);

    let mut iterations = 0;
    let mut status = SolveStatus::IterationLimit;
    let mut certificate = None;
    let mut residuals;

    loop {
        let h = qp.ineq_values(&it.x);
        let rd = qp.lagrangian_gradient(&it.x, &it.lambda, &it.nu);
        let rp: Vec<T> = h.iter().zip(&it.s).map(|(hi, si)| *hi + *si).collect();
        let re = qp.eq_values(&it.x);

        let primal_inf = h
            .iter()
            .fold(norm_inf(&re), |a, v| a.max(v.max(T::zero())));
        let compl = h
            .iter()
            .zip(&it.lambda)
            .fold(T::zero(), |a, (hi, li)| a.max((*hi * *li).abs()));
        residuals = Residuals {
            primal: primal_inf,
            dual: norm_inf(&rd),
            gap: relative_gap(qp, &it.x, &it.lambda, &it.nu),
            complementarity: compl,
        };
        let finite = it.x.iter().chain(&it.lambda).chain(&it.nu).all(|v| v.is_finite())
            && residuals.dual.is_finite();
        if !finite {
            status = SolveStatus::NumericalFailure;
            break;
        }
        if residuals.primal <= settings.tol_primal
            && residuals.dual <= settings.tol_dual
            && residuals.gap.abs() <= settings.tol_gap
            && residuals.complementarity <= settings.tol_compl
        {
            status = SolveStatus::Optimal;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        if let Some(cert) = farkas_check(qp, &it, settings.infeasibility_threshold) {
            status = SolveStatus::PrimalInfeasible;
            certificate = Some(cert);
            break;
        }

        let w: Vec<T> = it.lambda.iter().zip(&it.s).map(|(l, s)| *l / *s).collect();
        let Some(sys) = NewtonSystem::new(qp, &w) else {
            status = SolveStatus::NumericalFailure;
            break;
        };

        let mu = dot(&it.lambda, &it.s) / mf;
        let rc_aff: Vec<T> = it.lambda.iter().zip(&it.s).map(|(l, s)| *l * *s).collect();
        let aff = sys.direction(&it, &rd, &rp, &re, &rc_aff);
        let alpha_aff = T::one()
            .min(max_step(&it.s, &aff.ds))
            .min(max_step(&it.lambda, &aff.dl));
        let mu_aff = (0..m)
            .map(|i| (it.s[i] + alpha_aff * aff.ds[i]) * (it.lambda[i] + alpha_aff * aff.dl[i]))
            .sum::<T>()
            / mf;
        let sigma = if mu > T::zero() {
            (mu_aff / mu).powi(3).min(T::one())
        } else {
            T::zero()
        };

        // Never aim below the complementarity tolerance: driving lambda o s to
        // underflow makes W unbounded and the normal matrix useless.
        let target = (sigma * mu).max(mu_floor);
        let rc: Vec<T> = (0..m)
            .map(|i| rc_aff[i] + aff.ds[i] * aff.dl[i] - target)
            .collect();
        let dir = sys.direction(&it, &rd, &rp, &re, &rc);
        let alpha_max = max_step(&it.s, &dir.ds).min(max_step(&it.lambda, &dir.dl));
        let alpha = T::one().min(tau * alpha_max);

        for (x, d) in it.x.iter_mut().zip(&dir.dx) {
            *x += alpha * *d;
        }
        for (x, d) in it.s.iter_mut().zip(&dir.ds) {
            *x += alpha * *d;
        }
        for (x, d) in it.lambda.iter_mut().zip(&dir.dl) {
            *x += alpha * *d;
        }
        for (x, d) in it.nu.iter_mut().zip(&dir.dn) {
            *x += alpha * *d;
        }
        iterations += 1;
        log::trace!(
            "ipm iter {iterations}: mu={mu:e} sigma={sigma:e} alpha={alpha:e} rp={:e} rd={:e}",
            residuals.primal,
            residuals.dual
        );
    }

    let objective = qp.objective(&it.x);
    QPResult {
        status,
        primal: it.x,
        lambda: it.lambda,
        nu: it.nu,
        iterations,
        residuals,
        objective,
        certificate,
    }
}

/// Once the multipliers blow up, test whether their direction is a Farkas ray.
fn farkas_check<T: Scalar>(
    qp: &QuadraticProgram<T>,
    it: &Iterate<T>,
    threshold: T,
) -> Option<InfeasibilityCertificate<T>> {
    let scale = norm_inf(&it.lambda).max(norm_inf(&it.nu));
    if !(scale > T::one() / threshold) {
        return None;
    }
    let y: Vec<T> = it.lambda.iter().map(|v| *v / scale).collect();
    let z: Vec<T> = it.nu.iter().map(|v| *v / scale).collect();
    let mut col = qp.a_ineq.tr_mul_vec(&y);
    for (c, e) in col.iter_mut().zip(qp.a_eq.tr_mul_vec(&z)) {
        *c += e;
    }
    let residual = norm_inf(&col);
    let value = dot(&qp.b_ineq, &y) + dot(&qp.b_eq, &z);
    (residual <= threshold && value < -threshold).then_some(InfeasibilityCertificate::Farkas {
        y,
        z,
        residual,
        value,
    })
}
