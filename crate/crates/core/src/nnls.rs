//! Lawson–Hanson non-negative least squares and the diagonal-Gram shortcut.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlpError};
use crate::linalg::offdiag_ratio;

pub const NNLS_TOL: f64 = 1e-9;
pub const NNLS_MAX_ITER: usize = 500;
/// Off-diagonal ratio below which `AᵀA` counts as diagonal.
pub const DIAGONAL_GRAM_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NnlsProblem {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub delta: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Objective after every accepted move, starting from `δ = 0`.
    pub trace: Vec<f64>,
}

impl NnlsProblem {
    pub fn new(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if c.nrows() != d.len() {
            return Err(SlpError::Dimension(format!(
                "C has {} rows but d has {} entries",
                c.nrows(),
                d.len()
            )));
        }
        if c.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(SlpError::InvalidArgument("NNLS data must be finite".into()));
        }
        Ok(Self { c, d })
    }

    /// `‖Cδ - d‖²`.
    pub fn objective(&self, delta: &DVector<f64>) -> f64 {
        (&self.c * delta - &self.d).norm_squared()
    }

    /// Gradient `Cᵀ(Cδ - d)` of `½‖Cδ - d‖²`.
    pub fn gradient(&self, delta: &DVector<f64>) -> DVector<f64> {
        self.c.tr_mul(&(&self.c * delta - &self.d))
    }

    /// Largest violation of the KKT conditions at `delta`.
    pub fn kkt_residual(&self, delta: &DVector<f64>) -> f64 {
        let g = self.gradient(delta);
        let mut r: f64 = 0.0;
        for (j, &gj) in g.iter().enumerate() {
            if delta[j] > 0.0 {
                r = r.max(gj.abs());
            } else {
                r = r.max((-gj).max(0.0));
            }
            r = r.max((-delta[j]).max(0.0));
        }
        r
    }
}

/// Unconstrained least squares on the columns in `set`, via Cholesky with an
/// SVD fallback for rank-deficient subsets.
fn subset_least_squares(c: &DMatrix<f64>, d: &DVector<f64>, set: &[usize]) -> DVector<f64> {
    let cs = c.select_columns(set);
    let gram = cs.tr_mul(&cs);
    let rhs = cs.tr_mul(d);
    if let Some(chol) = gram.clone().cholesky() {
        let z = chol.solve(&rhs);
        if z.iter().all(|v| v.is_finite()) {
            return z;
        }
    }
    let svd = cs.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(d, eps).unwrap_or_else(|_| DVector::zeros(set.len()))
}

/// Active-set solve. `tol` is relative to `max(1, ‖Cᵀd‖∞)`.
pub fn solve_nnls(problem: &NnlsProblem, tol: f64, max_iter: usize) -> Result<NnlsSolution> {
    if tol <= 0.0 {
        return Err(SlpError::InvalidArgument("tol must be positive".into()));
    }
    let n = problem.c.ncols();
    let scale = problem.c.tr_mul(&problem.d).amax().max(1.0);
    let tol_abs = tol * scale;
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut trace = vec![problem.objective(&x)];
    let mut iterations = 0;

    loop {
        let w = -problem.gradient(&x);
        let mut enter = None;
        let mut best = tol_abs;
        for j in 0..n {
            if !passive[j] && w[j] > best {
                best = w[j];
                enter = Some(j);
            }
        }
        let Some(j) = enter else { break };
        if iterations >= max_iter {
            return Err(SlpError::NnlsMaxIter {
                iterations,
                kkt_residual: problem.kkt_residual(&x),
                best: x.iter().copied().collect(),
            });
        }
        iterations += 1;
        passive[j] = true;

        loop {
            let set: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let z_sub = subset_least_squares(&problem.c, &problem.d, &set);
            let mut z = DVector::zeros(n);
            for (pos, &i) in set.iter().enumerate() {
                z[i] = z_sub[pos];
            }
            if set.iter().all(|&i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut blocker = set[0];
            for &i in &set {
                if z[i] <= 0.0 {
                    let a = x[i] / (x[i] - z[i]);
                    if a < alpha {
                        alpha = a;
                        blocker = i;
                    }
                }
            }
            x = &x + (&z - &x) * alpha.clamp(0.0, 1.0);
            x[blocker] = 0.0;
            passive[blocker] = false;
            for &i in &set {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        trace.push(problem.objective(&x));
    }

    let kkt_residual = problem.kkt_residual(&x);
    Ok(NnlsSolution {
        objective: problem.objective(&x),
        delta: x,
        iterations,
        kkt_residual,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct GramDiagnostic {
    pub r_a: DMatrix<f64>,
    pub offdiag_ratio: f64,
}

/// `R_A = AᵀA` and its off-diagonal Frobenius ratio.
pub fn gram_diagnostic(a: &DMatrix<f64>) -> GramDiagnostic {
    let r_a = a.tr_mul(a);
    let r_a = (&r_a + r_a.transpose()) * 0.5;
    GramDiagnostic {
        offdiag_ratio: offdiag_ratio(&r_a),
        r_a,
    }
}

/// NNLS data `C = AΛ`, `d = -As` for `min_{δ ⪰ 0} ‖A(s + Λδ)‖²`.
pub fn cir_nnls_problem(a: &DMatrix<f64>, s: &DVector<f64>, lambda: &DMatrix<f64>) -> Result<NnlsProblem> {
    NnlsProblem::new(a * lambda, -(a * s))
}

/// Returns `Some(0)` when `AᵀA` is diagonal, so that `δ = 0` is optimal for
/// `min ‖A(s + Λδ)‖²`; `None` otherwise.
pub fn diagonal_gram_shortcut(s: &DVector<f64>, a: &DMatrix<f64>) -> Option<DVector<f64>> {
    if gram_diagnostic(a).offdiag_ratio < DIAGONAL_GRAM_THRESHOLD {
        Some(DVector::zeros(s.len()))
    } else {
        None
    }
}
