//! Reference computations for the acceptance suite, written without the
//! solver or certificate code they are used to check.

#![allow(dead_code)]

use hems_core::linalg::DenseMatrix;
use hems_core::Qp64;
use rand::Rng;

/// Small QP in plain vectors: `min 1/2 x'diag(q)x + c'x`, `Ax <= b`, `Ex = f`.
#[derive(Debug, Clone)]
pub struct TinyQp {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    pub f: Vec<f64>,
}

impl TinyQp {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| 0.5 * self.q[i] * x[i] * x[i] + self.c[i] * x[i])
            .sum()
    }

    pub fn to_core(&self) -> Qp64 {
        let n = self.n();
        Qp64::new(
            self.q.clone(),
            self.c.clone(),
            DenseMatrix::from_rows(n, &self.a),
            self.b.clone(),
            DenseMatrix::from_rows(n, &self.e),
            self.f.clone(),
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Strictly convex and feasible by construction: the constraints are
/// satisfied at a random point with random slack.
pub fn random_tiny_qp(rng: &mut impl Rng) -> TinyQp {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=6);
    let p = if n > 1 && rng.gen_bool(0.3) { 1 } else { 0 };
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a: Vec<Vec<f64>> = (0..m).map(|_| random_row(rng, n)).collect();
    let b = a
        .iter()
        .map(|r| dot(r, &x0) + if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    let e: Vec<Vec<f64>> = (0..p).map(|_| random_row(rng, n)).collect();
    let f = e.iter().map(|r| dot(r, &x0)).collect();
    TinyQp {
        q: (0..n).map(|_| rng.gen_range(0.1..3.0)).collect(),
        c: (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        a,
        b,
        e,
        f,
    }
}

/// Dense solve with partial pivoting; `None` when (numerically) singular.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = m.iter().flatten().fold(1.0_f64, |a, v| a.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let factor = m[r][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[r][k] -= factor * m[col][k];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

/// Exact optimum by enumerating every active set: solve the equality-constrained
/// KKT system for each subset of inequality rows and keep the points that are
/// primal feasible with nonnegative multipliers.
pub fn active_set_optimum(qp: &TinyQp) -> Option<(Vec<f64>, f64)> {
    let n = qp.n();
    let m = qp.a.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let rows: Vec<&Vec<f64>> = active.iter().map(|&i| &qp.a[i]).chain(&qp.e).collect();
        let dim = n + rows.len();
        let mut kkt = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for i in 0..n {
            kkt[i][i] = qp.q[i];
            rhs[i] = -qp.c[i];
        }
        for (r, row) in rows.iter().enumerate() {
            for i in 0..n {
                kkt[i][n + r] = row[i];
                kkt[n + r][i] = row[i];
            }
        }
        for (r, &i) in active.iter().enumerate() {
            rhs[n + r] = qp.b[i];
        }
        for (r, v) in qp.f.iter().enumerate() {
            rhs[n + active.len() + r] = *v;
        }
        let Some(sol) = gauss_solve(kkt, rhs) else { continue };
        let x = &sol[..n];
        let feasible = qp.a.iter().zip(&qp.b).all(|(r, b)| dot(r, x) <= b + 1e-9);
        let dual_ok = sol[n..n + active.len()].iter().all(|l| *l >= -1e-9);
        if feasible && dual_ok {
            let obj = qp.objective(x);
            if best.as_ref().map_or(true, |(_, b)| obj < *b) {
                best = Some((x.to_vec(), obj));
            }
        }
    }
    best
}

/// KKT residuals recomputed from the raw problem data.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kkt {
    pub stationarity: f64,
    pub complementarity: f64,
    pub primal: f64,
    pub min_dual: f64,
}

impl Kkt {
    pub fn worst(self, o: Kkt) -> Kkt {
        Kkt {
            stationarity: self.stationarity.max(o.stationarity),
            complementarity: self.complementarity.max(o.complementarity),
            primal: self.primal.max(o.primal),
            min_dual: self.min_dual.min(o.min_dual),
        }
    }
}

pub fn kkt_of(qp: &Qp64, x: &[f64], lambda: &[f64], nu: &[f64]) -> Kkt {
    let n = x.len();
    let mut grad: Vec<f64> = (0..n).map(|i| qp.q_diag[i] * x[i] + qp.c[i]).collect();
    let mut out = Kkt {
        min_dual: f64::INFINITY,
        ..Kkt::default()
    };
    for i in 0..qp.a_ineq.rows() {
        let row = qp.a_ineq.row(i);
        let h = dot(row, x) - qp.b_ineq[i];
        out.primal = out.primal.max(h);
        out.complementarity = out.complementarity.max((lambda[i] * h).abs());
        out.min_dual = out.min_dual.min(lambda[i]);
        for j in 0..n {
            grad[j] += row[j] * lambda[i];
        }
    }
    for i in 0..qp.a_eq.rows() {
        let row = qp.a_eq.row(i);
        out.primal = out.primal.max((dot(row, x) - qp.b_eq[i]).abs());
        for j in 0..n {
            grad[j] += row[j] * nu[i];
        }
    }
    out.stationarity = grad.iter().fold(0.0, |a, g| a.max(g.abs()));
    out
}
