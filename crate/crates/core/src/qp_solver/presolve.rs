use super::{InfeasibilityCertificate, QPResult, QuadraticProgram, Reduction, SolveStatus};
use crate::scalar::Scalar;

pub(super) struct Presolved<T> {
    pub reduction: Reduction<T>,
    /// Implied bounds of the reduced variables, used for the starting point.
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// For every original variable, the singleton rows giving its tightest
    /// upper and lower bound.
    upper_row: Vec<Option<usize>>,
    lower_row: Vec<Option<usize>>,
}

pub(super) fn eliminate<T: Scalar>(qp: &QuadraticProgram<T>, fixed: &[(usize, T)]) -> Reduction<T> {
    let n = qp.num_vars();
    let mut is_fixed = vec![false; n];
    let mut fixed_values = vec![T::zero(); n];
    for &(j, v) in fixed {
        is_fixed[j] = true;
        fixed_values[j] = v;
    }
    let kept_vars: Vec<usize> = (0..n).filter(|j| !is_fixed[*j]).collect();

    // Rows with no remaining coefficient become constants.
    let split_rows = |a: &crate::linalg::DenseMatrix<T>, rhs: &[T]| {
        let mut kept = Vec::new();
        let mut new_rhs = Vec::new();
        let mut constant = Vec::new();
        for i in 0..a.rows() {
            let row = a.row(i);
            let mut shift = T::zero();
            let mut live = false;
            for (j, aij) in row.iter().enumerate() {
                if aij.is_zero() {
                    continue;
                }
                if is_fixed[j] {
                    shift += *aij * fixed_values[j];
                } else {
                    live = true;
                }
            }
            if live {
                kept.push(i);
                new_rhs.push(rhs[i] - shift);
            } else {
                constant.push((i, shift - rhs[i]));
            }
        }
        (kept, new_rhs, constant)
    };

    let (kept_ineq, b_ineq, const_ineq) = split_rows(&qp.a_ineq, &qp.b_ineq);
    let (kept_eq, b_eq, const_eq) = split_rows(&qp.a_eq, &qp.b_eq);

    let reduced = QuadraticProgram {
        q_diag: kept_vars.iter().map(|&j| qp.q_diag[j]).collect(),
        c: kept_vars.iter().map(|&j| qp.c[j]).collect(),
        a_ineq: qp.a_ineq.select_rows(&kept_ineq).select_columns(&kept_vars),
        b_ineq,
        a_eq: qp.a_eq.select_rows(&kept_eq).select_columns(&kept_vars),
        b_eq,
    };

    Reduction {
        reduced,
        kept_vars,
        kept_ineq,
        kept_eq,
        fixed_values,
        is_fixed,
        constant_ineq: const_ineq,
        constant_eq: const_eq,
    }
}

/// Bound propagation from singleton rows, activity checks, and elimination of
/// variables whose box has collapsed to a point.
pub(super) fn presolve<T: Scalar>(
    qp: &QuadraticProgram<T>,
    tol: T,
) -> Result<Presolved<T>, InfeasibilityCertificate<T>> {
    let n = qp.num_vars();
    let mut lower = vec![T::neg_infinity(); n];
    let mut upper = vec![T::infinity(); n];
    let mut upper_row = vec![None; n];
    let mut lower_row = vec![None; n];

    for i in 0..qp.num_ineq() {
        let row = qp.a_ineq.row(i);
        let nnz = qp.a_ineq.row_nnz(i);
        if nnz == 0 {
            if qp.b_ineq[i] < -tol {
                return Err(InfeasibilityCertificate::IneqActivity {
                    row: i,
                    min_activity: T::zero(),
                    rhs: qp.b_ineq[i],
                });
            }
            continue;
        }
        if nnz != 1 {
            continue;
        }
        let j = row.iter().position(|a| !a.is_zero()).unwrap();
        let a = row[j];
        let bound = qp.b_ineq[i] / a;
        if a > T::zero() {
            if bound < upper[j] {
                upper[j] = bound;
                upper_row[j] = Some(i);
            }
        } else if bound > lower[j] {
            lower[j] = bound;
            lower_row[j] = Some(i);
        }
    }

    for j in 0..n {
        if lower[j] > upper[j] + tol {
            return Err(InfeasibilityCertificate::EmptyBox {
                var: j,
                lower: lower[j],
                upper: upper[j],
            });
        }
    }

    for i in 0..qp.num_ineq() {
        if qp.a_ineq.row_nnz(i) < 2 {
            continue;
        }
        let (lo, _) = activity_range(qp.a_ineq.row(i), &lower, &upper);
        let rhs = qp.b_ineq[i];
        if lo.is_finite() && lo > rhs + tol * (T::one() + rhs.abs()) {
            return Err(InfeasibilityCertificate::IneqActivity {
                row: i,
                min_activity: lo,
                rhs,
            });
        }
    }
    for i in 0..qp.num_eq() {
        let (lo, hi) = activity_range(qp.a_eq.row(i), &lower, &upper);
        let rhs = qp.b_eq[i];
        let slack = tol * (T::one() + rhs.abs());
        if lo > rhs + slack || hi < rhs - slack {
            return Err(InfeasibilityCertificate::EqActivity {
                row: i,
                min_activity: lo,
                max_activity: hi,
                rhs,
            });
        }
    }

    let four_eps = T::epsilon() * T::lit(4.0);
    let fixed: Vec<(usize, T)> = (0..n)
        .filter(|&j| {
            let (lo, hi) = (lower[j], upper[j]);
            lo.is_finite() && hi.is_finite() && hi - lo <= four_eps * T::one().max(hi.abs())
        })
        .map(|j| {
            let v = if lower[j] <= upper[j] {
                upper[j]
            } else {
                T::lit(0.5) * (lower[j] + upper[j])
            };
            (j, v)
        })
        .collect();

    let reduction = eliminate(qp, &fixed);
    if let Some(&(row, excess)) = reduction
        .constant_ineq
        .iter()
        .find(|(_, excess)| *excess > tol)
    {
        return Err(InfeasibilityCertificate::IneqActivity {
            row,
            min_activity: excess + qp.b_ineq[row],
            rhs: qp.b_ineq[row],
        });
    }
    if let Some(&(row, excess)) = reduction
        .constant_eq
        .iter()
        .find(|(_, excess)| excess.abs() > tol)
    {
        let act = excess + qp.b_eq[row];
        return Err(InfeasibilityCertificate::EqActivity {
            row,
            min_activity: act,
            max_activity: act,
            rhs: qp.b_eq[row],
        });
    }

    let lower_kept = reduction.kept_vars.iter().map(|&j| lower[j]).collect();
    let upper_kept = reduction.kept_vars.iter().map(|&j| upper[j]).collect();
    Ok(Presolved {
        reduction,
        lower: lower_kept,
        upper: upper_kept,
        upper_row,
        lower_row,
    })
}

fn activity_range<T: Scalar>(row: &[T], lower: &[T], upper: &[T]) -> (T, T) {
    let mut lo = T::zero();
    let mut hi = T::zero();
    for (j, a) in row.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let (p, q) = (*a * lower[j], *a * upper[j]);
        lo += p.min(q);
        hi += p.max(q);
    }
    (lo, hi)
}

/// Maps a reduced solution back and recovers multipliers for the rows that
/// presolve removed.
pub(super) fn postsolve<T: Scalar>(
    qp: &QuadraticProgram<T>,
    pre: &Presolved<T>,
    inner: QPResult<T>,
) -> QPResult<T> {
    let red = &pre.reduction;
    let primal = red.expand_primal(&inner.primal);
    let mut lambda = vec![T::zero(); qp.num_ineq()];
    for (v, &i) in inner.lambda.iter().zip(&red.kept_ineq) {
        lambda[i] = *v;
    }
    let mut nu = vec![T::zero(); qp.num_eq()];
    for (v, &i) in inner.nu.iter().zip(&red.kept_eq) {
        nu[i] = *v;
    }

    if inner.status == SolveStatus::Optimal || inner.status == SolveStatus::IterationLimit {
        // Each fixed variable sits on both of its bound rows; put whatever
        // stationarity is left over onto the matching one.
        let grad = qp.lagrangian_gradient(&primal, &lambda, &nu);
        settle_fixed_columns(qp, pre, &grad, &mut lambda);
    }

    let certificate = inner.certificate.map(|c| match c {
        InfeasibilityCertificate::Farkas { y, z, .. } => {
            let mut yf = vec![T::zero(); qp.num_ineq()];
            for (v, &i) in y.iter().zip(&red.kept_ineq) {
                yf[i] = *v;
            }
            let mut zf = vec![T::zero(); qp.num_eq()];
            for (v, &i) in z.iter().zip(&red.kept_eq) {
                zf[i] = *v;
            }
            let mut col = qp.a_ineq.tr_mul_vec(&yf);
            for (cj, ej) in col.iter_mut().zip(qp.a_eq.tr_mul_vec(&zf)) {
                *cj += ej;
            }
            settle_fixed_columns(qp, pre, &col, &mut yf);
            let mut col = qp.a_ineq.tr_mul_vec(&yf);
            for (cj, ej) in col.iter_mut().zip(qp.a_eq.tr_mul_vec(&zf)) {
                *cj += ej;
            }
            InfeasibilityCertificate::Farkas {
                residual: crate::scalar::norm_inf(&col),
                value: crate::scalar::dot(&qp.b_ineq, &yf) + crate::scalar::dot(&qp.b_eq, &zf),
                y: yf,
                z: zf,
            }
        }
        other => other,
    });

    QPResult {
        status: inner.status,
        primal,
        lambda,
        nu,
        iterations: inner.iterations,
        residuals: inner.residuals,
        objective: inner.objective,
        certificate,
    }
}

/// Cancels `col[j]` for every fixed variable `j` by loading its active bound row.
fn settle_fixed_columns<T: Scalar>(
    qp: &QuadraticProgram<T>,
    pre: &Presolved<T>,
    col: &[T],
    mult: &mut [T],
) {
    for j in (0..qp.num_vars()).filter(|&j| pre.reduction.is_fixed[j]) {
        let rho = col[j];
        if rho < T::zero() {
            if let Some(i) = pre.upper_row[j] {
                mult[i] -= rho / qp.a_ineq[(i, j)];
            }
        } else if rho > T::zero() {
            if let Some(i) = pre.lower_row[j] {
                mult[i] += rho / -qp.a_ineq[(i, j)];
            }
        }
    }
}
