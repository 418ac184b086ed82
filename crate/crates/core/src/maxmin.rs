//! Generalized Dinkelbach iteration for robust SINR balancing and the
//! log-barrier Newton solver for its convex max-min subproblem.
//!
//! The subproblem for a fixed `λ` is
//!
//! ```text
//! max t  s.t.  t <= γ_k - λ sqrt(β_k² xᵀE_k x + σ²)   for all k
//!              Λ⁻¹(Hx - Γs) ⪰ 0,  ‖x‖² <= P_T,  γ_k >= γ_floor
//! ```
//!
//! Internally the power budget is normalized to one.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlpError};
use crate::linalg::right_pinv;
use crate::nnls::{solve_nnls, NnlsProblem, NNLS_MAX_ITER};

pub const GAMMA_FLOOR: f64 = 1e-9;
pub const OUTER_TOL: f64 = 1e-7;
pub const INNER_TOL: f64 = 1e-6;
pub const MAX_OUTER: usize = 50;

/// Robust SINR-balancing problem data in the real lifted domain.
#[derive(Debug, Clone)]
pub struct MmfpProblem {
    pub h: DMatrix<f64>,
    pub lambda_inv: DMatrix<f64>,
    pub s: DVector<f64>,
    pub beta: Vec<f64>,
    /// `E_k`; may be empty for users with `β_k = 0`.
    pub e: Vec<DMatrix<f64>>,
    pub sigma2: f64,
    pub p_t: f64,
}

/// Barrier schedule and Newton limits.
#[derive(Debug, Clone, Copy)]
pub struct BarrierSettings {
    /// Factor by which the barrier weight grows between centering stages.
    pub tau_growth: f64,
    pub max_newton_per_stage: usize,
    pub max_newton_total: usize,
    /// Half squared Newton decrement at which the final centering stage stops.
    pub centering_tol: f64,
    /// Looser centering threshold for the intermediate stages.
    pub centering_tol_mid: f64,
    /// Divides each user's term by its denominator at the previous outer
    /// iterate, which makes the outer iteration superlinear.
    pub normalize_denominators: bool,
    /// Solves problems with every `β_k = 0` through the dual NNLS of the
    /// minimum-power CIR problem instead of the barrier method.
    pub exact_unaged: bool,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            tau_growth: 2.0,
            max_newton_per_stage: 60,
            max_newton_total: 2000,
            centering_tol: 1e-10,
            centering_tol_mid: 1e-3,
            normalize_denominators: true,
            exact_unaged: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: DVector<f64>,
    pub gamma: DVector<f64>,
    pub t: f64,
    pub newton_iters: usize,
    /// Barrier duality gap bound `m/τ` at exit, in normalized units.
    pub gap: f64,
    /// Barrier weight at exit.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub lambda: f64,
    pub inner_value: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct GdSolution {
    pub x: DVector<f64>,
    pub gamma: DVector<f64>,
    pub lambda: f64,
    pub lambda_trace: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub newton_iters: usize,
}

impl MmfpProblem {
    pub fn n_users(&self) -> usize {
        self.s.len() / 2
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_users();
        let (rows, cols) = self.h.shape();
        if rows != 2 * k || self.s.len() != 2 * k || self.lambda_inv.shape() != (2 * k, 2 * k) {
            return Err(SlpError::Dimension(format!(
                "H is {rows}x{cols}, s has {} entries, Λ⁻¹ is {:?}",
                self.s.len(),
                self.lambda_inv.shape()
            )));
        }
        if self.beta.len() != k || self.e.len() != k {
            return Err(SlpError::Dimension(format!(
                "expected {k} aging coefficients and Gram matrices"
            )));
        }
        let bad_gram = self
            .e
            .iter()
            .zip(&self.beta)
            .any(|(e, &b)| e.shape() != (cols, cols) && !(b == 0.0 && e.is_empty()));
        if bad_gram {
            return Err(SlpError::Dimension(
                "E_k must be 2N x 2N (or empty when β_k = 0)".into(),
            ));
        }
        if !(self.p_t > 0.0) || !(self.sigma2 > 0.0) {
            return Err(SlpError::InvalidArgument("P_T and σ² must be positive".into()));
        }
        if self.beta.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(SlpError::InvalidArgument("β_k must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `sqrt(β_k² xᵀE_k x + σ²)`.
    pub fn denominator(&self, k: usize, x: &DVector<f64>) -> f64 {
        let b2 = self.beta[k] * self.beta[k];
        let quad = if b2 == 0.0 { 0.0 } else { x.dot(&(&self.e[k] * x)) };
        (b2 * quad + self.sigma2).sqrt()
    }

    /// `min_k γ_k / sqrt(β_k² xᵀE_k x + σ²)`.
    pub fn ratio(&self, x: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
        (0..self.n_users())
            .map(|k| gamma[k] / self.denominator(k, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_k (γ_k - λ sqrt(β_k² xᵀE_k x + σ²))`.
    pub fn inner_value(&self, lambda: f64, x: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
        (0..self.n_users())
            .map(|k| gamma[k] - lambda * self.denominator(k, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Most negative entry of `Λ⁻¹(Hx - Γs)`.
    pub fn cir_violation(&self, x: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
        let k = self.n_users();
        let g = &self.lambda_inv * &self.h * x;
        let b = &self.lambda_inv * &self.s;
        (0..2 * k)
            .map(|j| g[j] - gamma[j % k] * b[j])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `γ` per user that keeps `x` inside the scaled CIR.
    pub fn max_feasible_gamma(&self, x: &DVector<f64>) -> DVector<f64> {
        let k = self.n_users();
        let g = &self.lambda_inv * &self.h * x;
        let b = &self.lambda_inv * &self.s;
        DVector::from_fn(k, |i, _| (g[i] / b[i]).min(g[i + k] / b[i + k]))
    }

    /// Closed-form start `x ∝ H†Θs`, `γ_k ∝ τ_k`, with `τ_k` from the
    /// trace-matched approximation of `E_k`.
    pub fn closed_form_start(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let k = self.n_users();
        let n = self.h.ncols() / 2;
        let tau: Vec<f64> = (0..k)
            .map(|i| {
                let m2 = if self.e[i].is_empty() {
                    0.0
                } else {
                    0.5 * self.e[i].trace()
                };
                (self.beta[i] * self.beta[i] * m2 * self.p_t / n as f64 + self.sigma2).sqrt()
            })
            .collect();
        let theta_s = DVector::from_fn(2 * k, |j, _| tau[j % k] * self.s[j]);
        let dir = right_pinv(&self.h)? * theta_s;
        let scale = (self.p_t / dir.norm_squared()).sqrt();
        Ok((dir * scale, DVector::from_fn(k, |i, _| scale * tau[i])))
    }
}

/// Problem data normalized to unit power with `G = Λ⁻¹H` precomputed.
struct Prepared {
    g: DMatrix<f64>,
    gt: DMatrix<f64>,
    b: DVector<f64>,
    /// `β_k² E_k`, `None` when `β_k = 0`.
    w: Vec<Option<DMatrix<f64>>>,
    sigma2: f64,
    root_p: f64,
    /// Per-user constraint weights `ω_k` multiplying `γ_k - λ q_k`.
    omega: Vec<f64>,
    k: usize,
    nx: usize,
}

impl Prepared {
    fn new(problem: &MmfpProblem) -> Self {
        let k = problem.n_users();
        let root_p = problem.p_t.sqrt();
        let g = &problem.lambda_inv * &problem.h;
        let b = &problem.lambda_inv * &problem.s;
        let w = (0..k)
            .map(|i| {
                let b2 = problem.beta[i] * problem.beta[i];
                (b2 > 0.0).then(|| &problem.e[i] * b2)
            })
            .collect();
        Self {
            gt: g.transpose(),
            g,
            b,
            w,
            sigma2: problem.sigma2 / problem.p_t,
            root_p,
            omega: vec![1.0; k],
            k,
            nx: problem.h.ncols(),
        }
    }

    fn n_vars(&self) -> usize {
        self.nx + self.k + 1
    }

    fn n_constraints(&self) -> usize {
        4 * self.k + 1
    }

    /// Returns `(W_k x, q_k)` for every user.
    fn denominators(&self, x: &DVector<f64>) -> (Vec<Option<DVector<f64>>>, Vec<f64>) {
        let mut wx = Vec::with_capacity(self.k);
        let mut q = Vec::with_capacity(self.k);
        for w in &self.w {
            match w {
                Some(w) => {
                    let v = w * x;
                    q.push((x.dot(&v) + self.sigma2).sqrt());
                    wx.push(Some(v));
                }
                None => {
                    q.push(self.sigma2.sqrt());
                    wx.push(None);
                }
            }
        }
        (wx, q)
    }

    fn split<'z>(&self, z: &'z DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
        let x = z.rows(0, self.nx).into_owned();
        let gamma = z.rows(self.nx, self.k).into_owned();
        (x, gamma, z[self.nx + self.k])
    }

    /// All slacks, or `None` if some constraint is not strictly satisfied.
    fn slacks(&self, lambda: f64, z: &DVector<f64>) -> Option<Slacks> {
        let (x, gamma, t) = self.split(z);
        let (wx, q) = self.denominators(&x);
        let f: Vec<f64> = (0..self.k)
            .map(|i| self.omega[i] * (gamma[i] - lambda * q[i]) - t)
            .collect();
        let gx = &self.g * &x;
        let c: Vec<f64> = (0..2 * self.k).map(|j| gx[j] - gamma[j % self.k] * self.b[j]).collect();
        let p = 1.0 - x.norm_squared();
        let l: Vec<f64> = (0..self.k).map(|i| gamma[i] - GAMMA_FLOOR).collect();
        let ok = f.iter().chain(&c).chain(&l).all(|&v| v > 0.0) && p > 0.0;
        ok.then_some(Slacks { wx, q, f, c, p, l })
    }

    fn barrier(&self, tau: f64, z: &DVector<f64>, s: &Slacks) -> f64 {
        let t = z[self.nx + self.k];
        -tau * t - s.f.iter().chain(&s.c).chain(&s.l).map(|v| v.ln()).sum::<f64>() - s.p.ln()
    }

    /// Gradient and Hessian of the barrier objective.
    fn newton_system(&self, lambda: f64, tau: f64, z: &DVector<f64>, s: &Slacks) -> (DVector<f64>, DMatrix<f64>) {
        let (nx, k) = (self.nx, self.k);
        let n = self.n_vars();
        let it = nx + k;
        let x = z.rows(0, nx);
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut hxx = DMatrix::<f64>::zeros(nx, nx);
        // rows r with coefficient c contribute c·r·rᵀ to the xx block
        let n_rows = 3 * k + 1;
        let mut rows = DMatrix::<f64>::zeros(n_rows, nx);
        let mut coefs = vec![0.0; n_rows];
        grad[it] = -tau;

        for i in 0..k {
            let om = self.omega[i];
            let inv = 1.0 / s.f[i];
            let inv2 = inv * inv;
            // ∇f_i = (-ωλ W_i x / q_i, ω e_i, -1)
            grad[nx + i] -= om * inv;
            grad[it] += inv;
            hess[(nx + i, nx + i)] += om * om * inv2;
            hess[(it, it)] += inv2;
            hess[(nx + i, it)] -= om * inv2;
            hess[(it, nx + i)] -= om * inv2;
            if let (Some(wx), Some(w)) = (&s.wx[i], &self.w[i]) {
                let qi = s.q[i];
                let ol = om * lambda;
                let g_scale = ol / qi;
                for r in 0..nx {
                    grad[r] += inv * g_scale * wx[r];
                }
                // -∇²f/f = ωλ/f (W/q - wx wxᵀ/q³), plus ∇f∇fᵀ/f²
                let coef = ol * inv / qi;
                for (h, v) in hxx.as_mut_slice().iter_mut().zip(w.as_slice()) {
                    *h += coef * v;
                }
                rows.row_mut(i).tr_copy_from(wx);
                coefs[i] = inv2 * g_scale * g_scale - ol * inv / (qi * qi * qi);
                for r in 0..nx {
                    let v = -g_scale * wx[r] * inv2;
                    hess[(r, nx + i)] += om * v;
                    hess[(r, it)] -= v;
                }
            }
        }

        // CI rows: ∇c_j = (g_j, -b_j e_{k(j)}, 0)
        for j in 0..2 * k {
            let inv = 1.0 / s.c[j];
            let kj = j % k;
            let bj = self.b[j];
            let gj = self.gt.column(j);
            for r in 0..nx {
                grad[r] -= inv * gj[r];
            }
            grad[nx + kj] += inv * bj;
            let inv2 = inv * inv;
            hess[(nx + kj, nx + kj)] += inv2 * bj * bj;
            for r in 0..nx {
                hess[(r, nx + kj)] -= inv2 * bj * gj[r];
            }
            rows.row_mut(k + j).tr_copy_from(&gj);
            coefs[k + j] = inv2;
        }

        // power: p = 1 - ‖x‖²
        let ip = 1.0 / s.p;
        for r in 0..nx {
            grad[r] += 2.0 * ip * x[r];
            hxx[(r, r)] += 2.0 * ip;
        }
        rows.row_mut(3 * k).tr_copy_from(&x);
        coefs[3 * k] = 4.0 * ip * ip;

        let mut scaled = rows.clone();
        for (r, c) in coefs.iter().enumerate() {
            scaled.row_mut(r).scale_mut(*c);
        }
        hxx.gemm(1.0, &scaled.transpose(), &rows, 1.0);
        hess.view_mut((0, 0), (nx, nx)).copy_from(&hxx);
        for c in nx..n {
            for r in 0..nx {
                hess[(c, r)] = hess[(r, c)];
            }
        }

        for i in 0..k {
            let inv = 1.0 / s.l[i];
            grad[nx + i] -= inv;
            hess[(nx + i, nx + i)] += inv * inv;
        }
        (grad, hess)
    }

    /// Typical magnitude of the weighted epigraph objective.
    fn objective_scale(&self, gamma: &DVector<f64>) -> f64 {
        let s = (0..self.k).map(|i| self.omega[i] * gamma[i]).sum::<f64>() / self.k as f64;
        s.max(1e-12)
    }

    /// Builds a strictly feasible point from `(x, γ)` in problem units.
    fn interior_start(&self, lambda: f64, x: &DVector<f64>, gamma: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.k;
        let mut xn = x / self.root_p;
        let norm2 = xn.norm_squared();
        let shrink = if norm2 >= 0.98 { (0.98 / norm2).sqrt() } else { 1.0 };
        xn *= shrink;
        let gx = &self.g * &xn;
        let cap = DVector::from_fn(k, |i, _| (gx[i] / self.b[i]).min(gx[i + k] / self.b[i + k]));
        let mut gam = DVector::zeros(k);
        for i in 0..k {
            let want = (gamma[i] / self.root_p) * shrink;
            let upper = cap[i];
            if !(upper > 2.0 * GAMMA_FLOOR) {
                return Err(SlpError::Infeasible(format!(
                    "no interior rescaling factor for user {i}"
                )));
            }
            let lo = GAMMA_FLOOR + 0.01 * (upper - GAMMA_FLOOR);
            let hi = GAMMA_FLOOR + 0.99 * (upper - GAMMA_FLOOR);
            gam[i] = want.clamp(lo, hi);
        }
        let (_, q) = self.denominators(&xn);
        let fmin = (0..k)
            .map(|i| self.omega[i] * (gam[i] - lambda * q[i]))
            .fold(f64::INFINITY, f64::min);
        let t = fmin - 0.05 * self.objective_scale(&gam);
        let mut z = DVector::zeros(self.n_vars());
        z.rows_mut(0, self.nx).copy_from(&xn);
        z.rows_mut(self.nx, k).copy_from(&gam);
        z[self.nx + k] = t;
        Ok(z)
    }

    fn solve(
        &self,
        lambda: f64,
        start: &DVector<f64>,
        tol: f64,
        settings: &BarrierSettings,
    ) -> Result<SubproblemSolution> {
        let scale = self.objective_scale(&start.rows(self.nx, self.k).into_owned());
        self.solve_to_gap(lambda, start, tol * scale, None, settings)
    }

    /// Barrier path following until the duality gap bound `m/τ` drops
    /// below `gap_target`, given in normalized objective units.
    fn solve_to_gap(
        &self,
        lambda: f64,
        start: &DVector<f64>,
        gap_target: f64,
        tau0: Option<f64>,
        settings: &BarrierSettings,
    ) -> Result<SubproblemSolution> {
        let mut z = start.clone();
        let m = self.n_constraints() as f64;
        let scale = self.objective_scale(&z.rows(self.nx, self.k).into_owned());
        let cold = 10.0 * m / scale;
        let mut tau = tau0.map_or(cold, |t| t.max(cold).min(m / gap_target));
        let mut total = 0;
        loop {
            let last_stage = m / tau <= gap_target;
            let tol = if last_stage {
                settings.centering_tol
            } else {
                settings.centering_tol_mid
            };
            let (_, centered) = self.center(lambda, tau, &mut z, tol, &mut total, settings)?;
            if last_stage {
                if centered {
                    break;
                }
                continue;
            }
            tau *= settings.tau_growth;
        }
        let (x, gamma, t) = self.split(&z);
        Ok(SubproblemSolution {
            x: x * self.root_p,
            gamma: gamma * self.root_p,
            t: t * self.root_p,
            newton_iters: total,
            gap: m / tau,
            tau,
        })
    }

    /// Damped Newton centering at fixed `(λ, τ)`. Returns the number
    /// of steps taken and whether the decrement reached `centering_tol`.
    fn center(
        &self,
        lambda: f64,
        tau: f64,
        z: &mut DVector<f64>,
        centering_tol: f64,
        total: &mut usize,
        settings: &BarrierSettings,
    ) -> Result<(usize, bool)> {
        let m = self.n_constraints() as f64;
        let mut steps = 0;
        let mut cached: Option<Slacks> = None;
        loop {
            let s = match cached.take() {
                Some(s) => s,
                None => self
                    .slacks(lambda, z)
                    .ok_or_else(|| SlpError::Infeasible("iterate left the interior".into()))?,
            };
            let (grad, hess) = self.newton_system(lambda, tau, z, &s);
            let dz = solve_spd(hess, &grad)?;
            let decrement2 = -grad.dot(&dz);
            if decrement2 / 2.0 <= centering_tol {
                return Ok((steps, true));
            }
            if steps >= settings.max_newton_per_stage {
                return Ok((steps, false));
            }
            if *total >= settings.max_newton_total {
                return Err(SlpError::NewtonMaxIter {
                    iterations: *total,
                    gap: m / tau,
                    best: z.iter().copied().collect(),
                });
            }
            let phi0 = self.barrier(tau, z, &s);
            let slope = grad.dot(&dz);
            let mut step = self.max_linear_step(z, &dz);
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &*z + &dz * step;
                if let Some(sc) = self.slacks(lambda, &cand) {
                    if self.barrier(tau, &cand, &sc) <= phi0 + 0.01 * step * slope {
                        *z = cand;
                        cached = Some(sc);
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            steps += 1;
            *total += 1;
            if !accepted {
                return Ok((steps, false));
            }
        }
    }

    /// Resets the weights to `1/q_k(x)` and the epigraph variable so that
    /// `z` is strictly feasible for a new `λ`.
    fn retarget(&mut self, lambda: f64, tau: f64, z: &mut DVector<f64>, normalize: bool) {
        let (x, gamma, _) = self.split(z);
        let (_, q) = self.denominators(&x);
        if normalize {
            // a common factor does not change the maximizer; keeping the
            // mean fixed keeps τ meaningful across reweightings
            let mean_old = self.omega.iter().sum::<f64>();
            let raw: Vec<f64> = q.iter().map(|v| 1.0 / v).collect();
            let mean_new = raw.iter().sum::<f64>();
            self.omega = raw.iter().map(|w| w * mean_old / mean_new).collect();
        }
        let fmin = (0..self.k)
            .map(|i| self.omega[i] * (gamma[i] - lambda * q[i]))
            .fold(f64::INFINITY, f64::min);
        z[self.nx + self.k] = fmin - self.k as f64 / tau;
    }

    /// Largest step in `(0, 1]` (times 0.99) that keeps the linear
    /// constraints strictly satisfied.
    fn max_linear_step(&self, z: &DVector<f64>, dz: &DVector<f64>) -> f64 {
        let (nx, k) = (self.nx, self.k);
        let x = z.rows(0, nx);
        let dx = dz.rows(0, nx);
        let gx = &self.g * x;
        let gdx = &self.g * dx;
        let mut step: f64 = 1.0;
        for j in 0..2 * k {
            let kj = j % k;
            let c = gx[j] - z[nx + kj] * self.b[j];
            let dc = gdx[j] - dz[nx + kj] * self.b[j];
            if dc < 0.0 {
                step = step.min(-0.99 * c / dc);
            }
        }
        for i in 0..k {
            let l = z[nx + i] - GAMMA_FLOOR;
            if dz[nx + i] < 0.0 {
                step = step.min(-0.99 * l / dz[nx + i]);
            }
        }
        step
    }
}

struct Slacks {
    wx: Vec<Option<DVector<f64>>>,
    q: Vec<f64>,
    f: Vec<f64>,
    c: Vec<f64>,
    p: f64,
    l: Vec<f64>,
}

/// Solves `H d = -g` for a symmetric positive definite `H`, adding a tiny
/// diagonal shift if the factorization fails.
fn solve_spd(hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        if shift > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += shift;
            }
        }
        if let Some(ch) = h.cholesky() {
            return Ok(-ch.solve(grad));
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    Err(SlpError::Singular("barrier Hessian".into()))
}

/// Solves the subproblem for fixed `λ` from a given `(x, γ)`, which must
/// satisfy the CIR constraints with positive `γ`.
pub fn solve_subproblem_from(
    problem: &MmfpProblem,
    lambda: f64,
    x0: &DVector<f64>,
    gamma0: &DVector<f64>,
    tol: f64,
    settings: &BarrierSettings,
) -> Result<SubproblemSolution> {
    problem.validate()?;
    if !(lambda >= 0.0) {
        return Err(SlpError::InvalidArgument("λ must be nonnegative".into()));
    }
    let prep = Prepared::new(problem);
    let z0 = prep.interior_start(lambda, x0, gamma0)?;
    prep.solve(lambda, &z0, tol, settings)
}

/// Solves the subproblem for fixed `λ`, starting from the closed-form point.
pub fn solve_subproblem(problem: &MmfpProblem, lambda: f64, tol: f64) -> Result<SubproblemSolution> {
    let (x0, g0) = problem.closed_form_start()?;
    solve_subproblem_from(problem, lambda, &x0, &g0, tol, &BarrierSettings::default())
}

/// Generalized Dinkelbach iteration with default barrier settings.
pub fn solve_gd(problem: &MmfpProblem, outer_tol: f64, inner_tol: f64, max_outer: usize) -> Result<GdSolution> {
    solve_gd_with(
        problem,
        outer_tol,
        inner_tol,
        max_outer,
        &BarrierSettings::default(),
        &GdStart::default(),
    )
}

/// Optional starting point for [`solve_gd_with`].
#[derive(Debug, Clone, Default)]
pub struct GdStart {
    /// Feasible `(x, γ)` replacing the closed-form start.
    pub point: Option<(DVector<f64>, DVector<f64>)>,
}

/// Generalized Dinkelbach iteration with explicit settings and start.
///
/// Each outer iteration runs one centering stage of the barrier method on
/// the current subproblem and then moves `λ` to the ratio achieved by the
/// centered iterate. The barrier weight grows between stages until the gap
/// bound reaches `inner_tol`; from then on every subproblem is solved to
/// that accuracy, and the loop stops once the inner value certifies
/// convergence.
pub fn solve_gd_with(
    problem: &MmfpProblem,
    outer_tol: f64,
    inner_tol: f64,
    max_outer: usize,
    settings: &BarrierSettings,
    start: &GdStart,
) -> Result<GdSolution> {
    problem.validate()?;
    if settings.exact_unaged && problem.beta.iter().all(|&b| b == 0.0) {
        if let Some(sol) = solve_unaged(problem)? {
            return Ok(sol);
        }
    }
    let (x0, gamma0) = match &start.point {
        Some(w) => w.clone(),
        None => problem.closed_form_start()?,
    };
    let mut prep = Prepared::new(problem);
    let mut lambda = problem.ratio(&x0, &gamma0);
    if settings.normalize_denominators {
        prep.omega = (0..problem.n_users())
            .map(|k| 1.0 / problem.denominator(k, &x0))
            .collect();
    }
    let mut z = prep.interior_start(lambda, &x0, &gamma0)?;
    let m = prep.n_constraints() as f64;
    let scale = prep.objective_scale(&z.rows(prep.nx, prep.k).into_owned());
    let tau_final = m / (inner_tol * scale);
    let mut tau = (10.0 * m / scale).min(tau_final);

    // best feasible iterate in problem units
    let mut best = (x0, gamma0);
    let mut lambda_trace = vec![lambda];
    let mut trace = Vec::new();
    let mut newton_total = 0;
    let mut converged = false;
    let mut last_value = f64::INFINITY;

    for outer in 1..=max_outer {
        let at_final = tau >= tau_final;
        let tol = if at_final {
            settings.centering_tol
        } else {
            settings.centering_tol_mid
        };
        let (steps, centered) = prep.center(lambda, tau, &mut z, tol, &mut newton_total, settings)?;
        let (xn, gn, _) = prep.split(&z);
        let x = xn * prep.root_p;
        let gamma = gn * prep.root_p;
        let value = problem.inner_value(lambda, &x, &gamma);
        last_value = value;
        trace.push(TraceRow {
            outer_iter: outer,
            lambda,
            inner_value: value,
            newton_iters: steps,
        });
        if at_final && centered && value <= outer_tol * (1.0 + lambda) {
            if value >= 0.0 {
                best = (x, gamma);
            }
            converged = true;
            break;
        }
        let achieved = problem.ratio(&x, &gamma);
        if achieved > lambda {
            lambda = achieved;
            lambda_trace.push(lambda);
            best = (x, gamma);
        }
        if !at_final && centered {
            tau = (tau * settings.tau_growth).min(tau_final);
        }
        prep.retarget(lambda, tau, &mut z, settings.normalize_denominators);
    }
    if !converged {
        return Err(SlpError::DinkelbachMaxIter {
            outer: max_outer,
            inner_value: last_value,
            lambda_trace,
        });
    }

    // any slack in the power budget only helps: rescale onto the sphere
    let (mut x, mut gamma) = best;
    let norm2 = x.norm_squared();
    if norm2 > 0.0 {
        let c = (problem.p_t / norm2).sqrt();
        x *= c;
        gamma *= c;
    }
    let final_ratio = problem.ratio(&x, &gamma);
    if final_ratio > lambda {
        lambda_trace.push(final_ratio);
    }
    Ok(GdSolution {
        x,
        gamma,
        lambda: final_ratio,
        lambda_trace,
        trace,
        newton_iters: newton_total,
    })
}

/// With constant denominators the optimum is the scaled minimum-norm point
/// of `{x : Λ⁻¹Hx ⪰ Λ⁻¹s}`. Its dual is an NNLS in the CIR multipliers `μ`
/// with `x = Gᵀμ/2`. Returns `None` if the NNLS does not converge.
fn solve_unaged(problem: &MmfpProblem) -> Result<Option<GdSolution>> {
    let k = problem.n_users();
    let g = &problem.lambda_inv * &problem.h;
    let b = &problem.lambda_inv * &problem.s;
    let d = right_pinv(&g)? * &b;
    let c = g.transpose() * 0.5;
    let sol = match solve_nnls(&NnlsProblem::new(c.clone(), d)?, 1e-12, NNLS_MAX_ITER) {
        Ok(sol) => sol,
        Err(SlpError::NnlsMaxIter { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let x_min = c * sol.delta;
    let norm2 = x_min.norm_squared();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Ok(None);
    }
    let scale = (problem.p_t / norm2).sqrt();
    let x = x_min * scale;
    // the dual is exact only up to the NNLS tolerance
    let cap = problem.max_feasible_gamma(&x).min();
    if !(cap > 0.0) {
        return Ok(None);
    }
    let gamma = DVector::from_element(k, cap);
    let (x0, g0) = problem.closed_form_start()?;
    let lambda0 = problem.ratio(&x0, &g0);
    let lambda = problem.ratio(&x, &gamma);
    let mut lambda_trace = vec![lambda0];
    if lambda > lambda0 {
        lambda_trace.push(lambda);
    }
    Ok(Some(GdSolution {
        trace: vec![TraceRow {
            outer_iter: 1,
            lambda: lambda0,
            inner_value: problem.inner_value(lambda0, &x, &gamma),
            newton_iters: 0,
        }],
        x,
        gamma,
        lambda,
        lambda_trace,
        newton_iters: 0,
    }))
}

/// Writes the solver trace as CSV.
pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> Result<()> {
    writeln!(w, "outer_iter,lambda,inner_value,newton_iters")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{}",
            r.outer_iter, r.lambda, r.inner_value, r.newton_iters
        )?;
    }
    Ok(())
}
