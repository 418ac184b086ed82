use nalgebra::{Cholesky, DMatrix, DVector};

use super::{Diagnostics, SlpInput, SlpOutput};
use crate::error::{Result, SlpError};
use crate::linalg::cholesky_jittered;
use crate::nnls::{solve_nnls, NnlsProblem, NNLS_MAX_ITER, NNLS_TOL};

pub const MMSE_MAX_ITER: usize = 20;
/// Relative objective change below which the alternation stops early.
pub const MMSE_REL_TOL: f64 = 1e-8;
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Which member of the alternating MMSE family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmseVariant {
    /// Full `E_k`, per-user `ψ_k`, NNLS for `δ`.
    Robust,
    /// `β = 0` and one `ψ` shared by every user.
    Conventional,
    /// Diagonal `Ê_k`, the small-dimension inverse and `δ = 0`.
    LowComplexity,
}

/// Iterate of the alternating MMSE algorithm.
#[derive(Debug, Clone)]
pub struct MmseState {
    pub psi: DVector<f64>,
    pub eta: f64,
    /// `P`, or its approximation `P̂` for the low-complexity variant.
    pub p_matrix: DMatrix<f64>,
    /// `Υ = Σ ψ_k²β_k²E_k`; `None` when the variant replaces it by a multiple
    /// of the identity.
    pub upsilon: Option<DMatrix<f64>>,
    /// Coefficient of the identity inside the inverse defining `P`.
    pub kappa: f64,
    /// Upper factor `B` with `BᵀB = N(I - ΨHP)`; `None` when `δ = 0` is imposed.
    pub cholesky_factor: Option<DMatrix<f64>>,
    pub u: DVector<f64>,
    pub s_tilde: DVector<f64>,
    pub delta: DVector<f64>,
    /// Components of `ψ` whose last update was accepted.
    pub psi_accepted: Vec<bool>,
}

/// `[Ψ]_jj = ψ_{j mod K}`.
fn psi_stack(psi: &DVector<f64>) -> DVector<f64> {
    let k = psi.len();
    DVector::from_fn(2 * k, |j, _| psi[j % k])
}

/// `HᵀΨ`.
fn ht_psi(h: &DMatrix<f64>, psi: &DVector<f64>) -> DMatrix<f64> {
    let ps = psi_stack(psi);
    let mut m = h.transpose();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col *= ps[j];
    }
    m
}

/// `(HᵀΨ²H + κI)⁻¹HᵀΨ` through the `2N`-dimensional inverse.
pub fn mil_projection_direct(h: &DMatrix<f64>, psi: &DVector<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    let htp = ht_psi(h, psi);
    let mut a = &htp * htp.transpose();
    for i in 0..a.nrows() {
        a[(i, i)] += kappa;
    }
    let chol = Cholesky::new(a).ok_or_else(|| SlpError::Singular("HᵀΨ²H + κI".into()))?;
    Ok(chol.solve(&htp))
}

/// `HᵀΨ(ΨHHᵀΨ + κI)⁻¹` through the `2K`-dimensional inverse.
pub fn mil_projection_small(h: &DMatrix<f64>, psi: &DVector<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    let htp = ht_psi(h, psi);
    let mut a = htp.transpose() * &htp;
    for i in 0..a.nrows() {
        a[(i, i)] += kappa;
    }
    let chol = Cholesky::new(a).ok_or_else(|| SlpError::Singular("ΨHHᵀΨ + κI".into()))?;
    // P̂ = HᵀΨ A⁻¹ and A is symmetric, so P̂ᵀ = A⁻¹ ΨH
    Ok(chol.solve(&htp.transpose()).transpose())
}

/// Per-user quadratic `uᵀE_k u` (or its diagonal approximation).
fn aging_quads(input: &SlpInput, variant: MmseVariant, u: &DVector<f64>) -> Vec<f64> {
    let unc = input.uncertainty;
    (0..input.n_users())
        .map(|k| {
            let b2 = unc.beta[k] * unc.beta[k];
            match variant {
                MmseVariant::Conventional => 0.0,
                _ if b2 == 0.0 => 0.0,
                MmseVariant::Robust => b2 * u.dot(&(&unc.e[k] * u)),
                MmseVariant::LowComplexity => b2 * unc.diag_scale(k) * u.norm_squared(),
            }
        })
        .collect()
}

/// Numerators and denominators of the closed-form `ψ_k` minimizer.
fn psi_terms(input: &SlpInput, variant: MmseVariant, u: &DVector<f64>, s_tilde: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let k = input.n_users();
    let hu = input.h * u;
    let noise = input.sigma2 / input.p_t * u.norm_squared();
    let quads = aging_quads(input, variant, u);
    let num = (0..k)
        .map(|i| s_tilde[i] * hu[i] + s_tilde[i + k] * hu[i + k])
        .collect();
    let den = (0..k)
        .map(|i| hu[i] * hu[i] + hu[i + k] * hu[i + k] + noise + quads[i])
        .collect();
    (num, den)
}

/// Objective of the alternating MMSE problem at `x = ηu`, `η² = P_T/‖u‖²`:
/// `‖ΨHu - s̃‖² + Σ ψ_k²(σ²‖u‖²/P_T + β_k² uᵀE_k u)`.
fn alternating_objective(
    input: &SlpInput,
    variant: MmseVariant,
    psi: &DVector<f64>,
    u: &DVector<f64>,
    s_tilde: &DVector<f64>,
) -> f64 {
    let k = input.n_users();
    let (num, den) = psi_terms(input, variant, u, s_tilde);
    (0..k)
        .map(|i| {
            psi[i] * psi[i] * den[i] - 2.0 * psi[i] * num[i] + s_tilde[i] * s_tilde[i] + s_tilde[i + k] * s_tilde[i + k]
        })
        .sum()
}

/// Robust MMSE objective for fixed `(u, s̃)` as a function of `ψ`.
pub fn mmse_objective(input: &SlpInput, psi: &DVector<f64>, u: &DVector<f64>, s_tilde: &DVector<f64>) -> f64 {
    alternating_objective(input, MmseVariant::Robust, psi, u, s_tilde)
}

/// `∂f/∂ψ_k` of [`mmse_objective`].
pub fn psi_gradient(input: &SlpInput, psi: &DVector<f64>, u: &DVector<f64>, s_tilde: &DVector<f64>) -> DVector<f64> {
    let (num, den) = psi_terms(input, MmseVariant::Robust, u, s_tilde);
    DVector::from_fn(psi.len(), |i, _| 2.0 * psi[i] * den[i] - 2.0 * num[i])
}

/// Expected deviation `‖ΨHx/η - s̃‖² + Σ ψ_k²(β_k² xᵀE_k x + σ²)/η²` for
/// fixed `(ψ, s̃)`.
pub fn mmse_x_objective(
    input: &SlpInput,
    psi: &DVector<f64>,
    s_tilde: &DVector<f64>,
    x: &DVector<f64>,
    eta: f64,
) -> f64 {
    let k = input.n_users();
    let unc = input.uncertainty;
    let hx = input.h * x;
    let ps = psi_stack(psi);
    let fit = (0..2 * k)
        .map(|j| {
            let r = ps[j] * hx[j] / eta - s_tilde[j];
            r * r
        })
        .sum::<f64>();
    let spread = (0..k)
        .map(|i| {
            let b2 = unc.beta[i] * unc.beta[i];
            let quad = if b2 == 0.0 { 0.0 } else { x.dot(&(&unc.e[i] * x)) };
            psi[i] * psi[i] * (b2 * quad + input.sigma2)
        })
        .sum::<f64>();
    fit + spread / (eta * eta)
}

/// One projection step: `P` (or `P̂`), `Υ` and the identity coefficient.
fn projection(
    input: &SlpInput,
    variant: MmseVariant,
    psi: &DVector<f64>,
) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>, f64)> {
    let unc = input.uncertainty;
    let k = input.n_users();
    let sum_psi2 = psi.norm_squared();
    match variant {
        MmseVariant::LowComplexity => {
            let kappa = (0..k)
                .map(|i| {
                    let b2 = unc.beta[i] * unc.beta[i];
                    psi[i] * psi[i] * (b2 * unc.diag_scale(i) + input.sigma2 / input.p_t)
                })
                .sum::<f64>();
            Ok((mil_projection_small(input.h, psi, kappa)?, None, kappa))
        }
        MmseVariant::Robust | MmseVariant::Conventional => {
            let kappa = input.sigma2 * sum_psi2 / input.p_t;
            let n2 = input.h.ncols();
            let mut upsilon = DMatrix::zeros(n2, n2);
            if variant == MmseVariant::Robust {
                for i in 0..k {
                    let b2 = unc.beta[i] * unc.beta[i];
                    if b2 > 0.0 {
                        upsilon += &unc.e[i] * (psi[i] * psi[i] * b2);
                    }
                }
            }
            let htp = ht_psi(input.h, psi);
            let mut a = &htp * htp.transpose() + &upsilon;
            for i in 0..n2 {
                a[(i, i)] += kappa;
            }
            let a = (&a + a.transpose()) * 0.5;
            let chol = Cholesky::new(a).ok_or_else(|| SlpError::Singular("MMSE projection".into()))?;
            Ok((chol.solve(&htp), Some(upsilon), kappa))
        }
    }
}

/// `δ` from the NNLS `min_{δ ⪰ 0} ‖B(Λδ + s)‖²` with `BᵀB = N(I - ΨHP)`.
fn relaxation(input: &SlpInput, psi: &DVector<f64>, p: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k2 = 2 * input.n_users();
    let n = input.uncertainty.n_antennas as f64;
    let ps = psi_stack(psi);
    let mut php = input.h * p;
    for (i, mut row) in php.row_iter_mut().enumerate() {
        row *= ps[i];
    }
    let m = (DMatrix::identity(k2, k2) - php) * n;
    let chol = cholesky_jittered(&m, CHOLESKY_JITTER)?;
    let b = chol.l().transpose();
    let c = &b * &input.cir.lambda.lambda;
    let d = -(&b * &input.cir.s);
    let sol = solve_nnls(&NnlsProblem::new(c, d)?, NNLS_TOL, NNLS_MAX_ITER)?;
    Ok((sol.delta, b))
}

/// Optimal `(u, s̃)` of the robust problem for fixed `ψ`, with `x = ηu`
/// and `η = sqrt(P_T/‖u‖²)`.
pub fn robust_x_step(input: &SlpInput, psi: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    input.validate()?;
    let (p, _, _) = projection(input, MmseVariant::Robust, psi)?;
    let (delta, _) = relaxation(input, psi, &p)?;
    let s_tilde = &input.cir.s + &input.cir.lambda.lambda * &delta;
    Ok((&p * &s_tilde, s_tilde))
}

/// Alternating minimization over `(x, η, δ)` and `ψ`, starting at `ψ = 1`.
///
/// Every iteration computes the optimal `(x, η, δ)` for the current `ψ`,
/// then replaces each `ψ_k` by its closed-form minimizer when that is
/// positive. Stops after `max_iter` iterations or once the objective
/// moves by less than [`MMSE_REL_TOL`] relative. The objective trace starts
/// with the value at `ψ = 1` and then holds one entry per iteration.
pub fn alternating_mmse(input: &SlpInput, variant: MmseVariant, max_iter: usize) -> Result<(SlpOutput, MmseState)> {
    input.validate()?;
    if max_iter == 0 {
        return Err(SlpError::InvalidArgument("max_iter must be at least 1".into()));
    }
    let k = input.n_users();
    let s = &input.cir.s;
    let mut psi = DVector::from_element(k, 1.0);
    let mut trace = Vec::new();
    let mut state = None;
    for _ in 0..max_iter {
        let (p, upsilon, kappa) = projection(input, variant, &psi)?;
        let (delta, b) = if variant == MmseVariant::LowComplexity {
            (DVector::zeros(2 * k), None)
        } else {
            let (d, b) = relaxation(input, &psi, &p)?;
            (d, Some(b))
        };
        let s_tilde = s + &input.cir.lambda.lambda * &delta;
        let u = &p * &s_tilde;
        if trace.is_empty() {
            trace.push(alternating_objective(input, variant, &psi, &u, &s_tilde));
        }
        let (num, den) = psi_terms(input, variant, &u, &s_tilde);
        let mut accepted = vec![false; k];
        if variant == MmseVariant::Conventional {
            let shared = num.iter().sum::<f64>() / den.iter().sum::<f64>();
            if shared > 0.0 {
                psi.fill(shared);
                accepted.fill(true);
            }
        } else {
            for i in 0..k {
                let cand = num[i] / den[i];
                if cand > 0.0 {
                    psi[i] = cand;
                    accepted[i] = true;
                }
            }
        }
        let obj = alternating_objective(input, variant, &psi, &u, &s_tilde);
        let prev = trace.last().copied();
        trace.push(obj);
        state = Some(MmseState {
            psi: psi.clone(),
            eta: 0.0,
            p_matrix: p,
            upsilon,
            kappa,
            cholesky_factor: b,
            u,
            s_tilde,
            delta,
            psi_accepted: accepted,
        });
        if let Some(prev) = prev {
            if (prev - obj).abs() <= MMSE_REL_TOL * prev.abs() {
                break;
            }
        }
    }
    let mut state = state.expect("at least one iteration");
    let u2 = state.u.norm_squared();
    if !(u2 > 0.0) {
        return Err(SlpError::Singular("MMSE direction vanished".into()));
    }
    let eta = (input.p_t / u2).sqrt();
    state.eta = eta;
    let x = &state.u * eta;
    let gamma = DVector::from_fn(k, |i, _| eta / state.psi[i]);
    let out = SlpOutput {
        x,
        gamma,
        target: state.s_tilde.clone(),
        diagnostics: Diagnostics {
            objective: *trace.last().unwrap(),
            iterations: trace.len() - 1,
            delta: Some(state.delta.clone()),
            objective_trace: trace,
            solver_trace: Vec::new(),
        },
    };
    Ok((out, state))
}

/// Robust MMSE SLP with full Gram matrices.
pub fn cimmse_r_precode(input: &SlpInput, max_iter: usize) -> Result<SlpOutput> {
    alternating_mmse(input, MmseVariant::Robust, max_iter).map(|(o, _)| o)
}

/// Conventional MMSE SLP: aging ignored and one `ψ` shared by all users.
pub fn cimmse_precode(input: &SlpInput, max_iter: usize) -> Result<SlpOutput> {
    alternating_mmse(input, MmseVariant::Conventional, max_iter).map(|(o, _)| o)
}

/// Low-complexity robust MMSE SLP.
pub fn cimmse_rlc_precode(input: &SlpInput, max_iter: usize) -> Result<SlpOutput> {
    alternating_mmse(input, MmseVariant::LowComplexity, max_iter).map(|(o, _)| o)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::instance;
    use super::*;
    use crate::channel::ArrayConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn objective_is_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for variant in [
            MmseVariant::Robust,
            MmseVariant::Conventional,
            MmseVariant::LowComplexity,
        ] {
            for _ in 0..3 {
                let inst = instance(&mut rng, ArrayConfig::ula(14, 1), 12, 0.995, 25.0, 8);
                let (out, _) = alternating_mmse(&inst.input(), variant, MMSE_MAX_ITER).unwrap();
                for w in out.diagnostics.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-9, "{variant:?}: {w:?}");
                }
            }
        }
    }

    #[test]
    fn reduced_objective_matches_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = instance(&mut rng, ArrayConfig::ula(8, 2), 4, 0.9, 15.0, 8);
        let input = inst.input();
        let psi = DVector::from_fn(4, |_, _| rng.random_range(0.5..2.0));
        let (p, _, _) = projection(&input, MmseVariant::Robust, &psi).unwrap();
        let (delta, _) = relaxation(&input, &psi, &p).unwrap();
        let s_tilde = &inst.cir.s + &inst.cir.lambda.lambda * &delta;
        let u = &p * &s_tilde;
        let ps = psi_stack(&psi);
        let mut php = &inst.h * &p;
        for (i, mut row) in php.row_iter_mut().enumerate() {
            row *= ps[i];
        }
        let quad = s_tilde.dot(&((DMatrix::identity(8, 8) - php) * &s_tilde));
        let f = mmse_objective(&input, &psi, &u, &s_tilde);
        assert!((quad - f).abs() < 1e-9 * f.abs().max(1.0));
    }

    #[test]
    fn gradient_vanishes_in_x_and_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = instance(&mut rng, ArrayConfig::ula(8, 2), 4, 0.9, 15.0, 8);
        let input = inst.input();
        let psi = DVector::from_fn(4, |_, _| rng.random_range(0.5..2.0));
        let (p, _, _) = projection(&input, MmseVariant::Robust, &psi).unwrap();
        let (delta, _) = relaxation(&input, &psi, &p).unwrap();
        let s_tilde = &inst.cir.s + &inst.cir.lambda.lambda * &delta;
        let u = &p * &s_tilde;
        let eta = (inst.p_t / u.norm_squared()).sqrt();
        let x = &u * eta;
        let h = 1e-5;
        let f = |x: &DVector<f64>, e: f64| mmse_x_objective(&input, &psi, &s_tilde, x, e);
        let d_eta = (f(&x, eta + h) - f(&x, eta - h)) / (2.0 * h);
        assert!(d_eta.abs() < 1e-6, "{d_eta}");
        for _ in 0..10 {
            let mut d = DVector::from_fn(16, |_, _| rng.random_range(-1.0..1.0));
            d -= &x * (x.dot(&d) / x.norm_squared());
            d /= d.norm();
            let g = (f(&(&x + &d * h), eta) - f(&(&x - &d * h), eta)) / (2.0 * h);
            assert!(g.abs() < 1e-6, "{g}");
        }
    }

    #[test]
    fn accepted_psi_updates_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = instance(&mut rng, ArrayConfig::ula(14, 1), 12, 0.995, 30.0, 8);
        let (_, st) = alternating_mmse(&inst.input(), MmseVariant::Robust, 3).unwrap();
        let g = psi_gradient(&inst.input(), &st.psi, &st.u, &st.s_tilde);
        assert!(g.amax() < 1e-9, "{}", g.amax());
    }

    #[test]
    fn unit_alpha_has_zero_upsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = instance(&mut rng, ArrayConfig::ula(8, 1), 4, 1.0, 15.0, 8);
        let (_, st) = alternating_mmse(&inst.input(), MmseVariant::Robust, 5).unwrap();
        assert_eq!(st.upsilon.unwrap().amax(), 0.0);
        let psi = DVector::from_vec(vec![0.5, 1.0, 1.5, 2.0]);
        let (_, ups, kappa) = projection(&inst.input(), MmseVariant::LowComplexity, &psi).unwrap();
        assert!(ups.is_none());
        let want = inst.sigma2 * psi.norm_squared() / inst.p_t;
        assert!((kappa - want).abs() < 1e-15 * want);
    }

    /// Projected gradient on `min_{δ ⪰ 0} (s + Λδ)ᵀ ρ(HHᵀ + ρI)⁻¹ (s + Λδ)`,
    /// the conventional problem after eliminating the transmit vector.
    fn conventional_oracle(inst: &super::super::testutil::Instance) -> f64 {
        let k2 = inst.h.nrows();
        let rho = (k2 / 2) as f64 * inst.sigma2 / inst.p_t;
        let mut g = &inst.h * inst.h.transpose();
        for i in 0..k2 {
            g[(i, i)] += rho;
        }
        let q = g.try_inverse().unwrap() * rho;
        let lam = &inst.cir.lambda.lambda;
        let a = lam.transpose() * &q * lam;
        let step = 1.0 / a.symmetric_eigen().eigenvalues.max();
        let mut delta = DVector::zeros(k2);
        for _ in 0..200_000 {
            let st = &inst.cir.s + lam * &delta;
            let grad = lam.transpose() * (&q * &st);
            delta = (&delta - grad * step).map(|v| v.max(0.0));
        }
        let st = &inst.cir.s + lam * &delta;
        st.dot(&(&q * &st))
    }

    #[test]
    fn conventional_matches_eliminated_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let inst = instance(&mut rng, ArrayConfig::ula(6, 1), 5, 1.0, 10.0, 8);
            let out = cimmse_precode(&inst.input(), MMSE_MAX_ITER).unwrap();
            let want = conventional_oracle(&inst);
            let got = out.diagnostics.objective;
            assert!((got - want).abs() < 1e-5 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn mil_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (n, k) in [(8, 3), (16, 5)] {
            let inst = instance(&mut rng, ArrayConfig::ula(n, 1), k, 0.9, 10.0, 8);
            let psi = DVector::from_fn(k, |_, _| rng.random_range(0.3..3.0));
            let kappa = rng.random_range(0.01..1.0);
            let a = mil_projection_direct(&inst.h, &psi, kappa).unwrap();
            let b = mil_projection_small(&inst.h, &psi, kappa).unwrap();
            assert!((&a - &b).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn conventional_keeps_a_common_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = instance(&mut rng, ArrayConfig::ula(8, 1), 4, 0.95, 20.0, 8);
        let out = cimmse_precode(&inst.input(), MMSE_MAX_ITER).unwrap();
        assert!(out.gamma.iter().all(|&g| g == out.gamma[0]));
        assert!((out.x.norm_squared() - inst.p_t).abs() < 1e-10);
    }
}
