use nalgebra::{DMatrix, DVector};

use super::{scale_to_power, Diagnostics, SlpInput, SlpOutput};
use crate::error::{Result, SlpError};
use crate::linalg::right_pinv;
use crate::maxmin::{
    solve_gd_with, BarrierSettings, GdSolution, GdStart, MmfpProblem, INNER_TOL, MAX_OUTER, OUTER_TOL,
};
use crate::nnls::{cir_nnls_problem, diagonal_gram_shortcut, solve_nnls, NNLS_MAX_ITER, NNLS_TOL};

/// Closed-form quantities shared by the low-complexity SINR-balancing
/// schemes.
#[derive(Debug, Clone)]
pub struct ClosedFormState {
    /// `τ_k = sqrt(β_k²‖m_k‖²P_T/N + σ²)`.
    pub tau: DVector<f64>,
    /// `I₂ ⊗ diag(τ)`, kept as its diagonal.
    pub theta: DVector<f64>,
    /// `H† = Hᵀ(HHᵀ)⁻¹`.
    pub pinv: DMatrix<f64>,
    /// Diagonal of `M = diag(α_k²‖m_k‖²/N)`.
    pub m_diag: DVector<f64>,
}

impl ClosedFormState {
    /// `H†Θv`.
    pub fn direction(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.pinv * v.component_mul(&self.theta)
    }

    /// `√N H†Θ`, the NNLS matrix of the closed-form problem.
    pub fn nnls_matrix(&self, n_antennas: usize) -> DMatrix<f64> {
        let mut a = self.pinv.clone();
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col *= self.theta[j] * (n_antennas as f64).sqrt();
        }
        a
    }
}

pub fn closed_form_state(input: &SlpInput) -> Result<ClosedFormState> {
    input.validate()?;
    let k = input.n_users();
    let unc = input.uncertainty;
    let tau = DVector::from_fn(k, |i, _| {
        let b = unc.beta[i];
        (b * b * unc.diag_scale(i) * input.p_t + input.sigma2).sqrt()
    });
    let theta = DVector::from_fn(2 * k, |j, _| tau[j % k]);
    let m_diag = DVector::from_fn(k, |i, _| {
        let b = unc.beta[i];
        (1.0 - b * b) * unc.diag_scale(i)
    });
    Ok(ClosedFormState {
        tau,
        theta,
        pinv: right_pinv(input.h)?,
        m_diag,
    })
}

/// `min_k γ_k² / τ_k²`, the objective of the diagonal-approximation problem.
pub fn closed_form_objective(state: &ClosedFormState, gamma: &DVector<f64>) -> f64 {
    gamma
        .iter()
        .zip(state.tau.iter())
        .map(|(g, t)| g * g / (t * t))
        .fold(f64::INFINITY, f64::min)
}

fn closed_form_output(input: &SlpInput, state: &ClosedFormState, delta: DVector<f64>) -> Result<SlpOutput> {
    let s_tilde = &input.cir.s + &input.cir.lambda.lambda * &delta;
    let mut x = state.direction(&s_tilde);
    let c = scale_to_power(&mut x, input.p_t)?;
    let gamma = &state.tau * c;
    Ok(SlpOutput {
        x,
        diagnostics: Diagnostics {
            objective: closed_form_objective(state, &gamma),
            delta: Some(delta),
            ..Diagnostics::default()
        },
        gamma,
        target: s_tilde,
    })
}

/// Closed-form robust SINR balancing with `δ = 0`.
pub fn cisb_rlc_precode(input: &SlpInput) -> Result<SlpOutput> {
    let state = closed_form_state(input)?;
    closed_form_output(input, &state, DVector::zeros(2 * input.n_users()))
}

/// Closed-form robust SINR balancing with `δ` from the NNLS
/// `min_{δ ⪰ 0} ‖√N H†Θ(s + Λδ)‖²`.
pub fn closed_form_with_nnls(input: &SlpInput) -> Result<SlpOutput> {
    let state = closed_form_state(input)?;
    let a = state.nnls_matrix(input.uncertainty.n_antennas);
    let s = &input.cir.s;
    let (delta, iterations) = match diagonal_gram_shortcut(s, &a) {
        Some(d) => (d, 0),
        None => {
            let problem = cir_nnls_problem(&a, s, &input.cir.lambda.lambda)?;
            let sol = solve_nnls(&problem, NNLS_TOL, NNLS_MAX_ITER)?;
            (sol.delta, sol.iterations)
        }
    };
    let mut out = closed_form_output(input, &state, delta)?;
    out.diagnostics.iterations = iterations;
    Ok(out)
}

fn problem_for(input: &SlpInput, robust: bool) -> MmfpProblem {
    let unc = input.uncertainty;
    let k = input.n_users();
    let (beta, e) = if robust {
        (unc.beta.clone(), unc.e.clone())
    } else {
        (vec![0.0; k], vec![DMatrix::zeros(0, 0); k])
    };
    MmfpProblem {
        h: input.h.clone(),
        lambda_inv: input.cir.lambda.lambda_inv.clone(),
        s: input.cir.s.clone(),
        beta,
        e,
        sigma2: input.sigma2,
        p_t: input.p_t,
    }
}

fn max_min_output(input: &SlpInput, sol: GdSolution, common_gamma: bool) -> Result<SlpOutput> {
    let k = input.n_users();
    let gamma = if common_gamma {
        DVector::from_element(k, sol.gamma.min())
    } else {
        sol.gamma
    };
    if gamma.iter().any(|&g| !(g > 0.0)) {
        return Err(SlpError::Infeasible("solver returned a nonpositive γ".into()));
    }
    let hx = input.h * &sol.x;
    let target = DVector::from_fn(2 * k, |j, _| hx[j] / gamma[j % k]);
    let delta = &input.cir.lambda.lambda_inv * (&target - &input.cir.s);
    Ok(SlpOutput {
        x: sol.x,
        gamma,
        target,
        diagnostics: Diagnostics {
            objective: sol.lambda,
            iterations: sol.trace.len(),
            delta: Some(delta),
            objective_trace: sol.lambda_trace,
            solver_trace: sol.trace,
        },
    })
}

/// Conventional SINR balancing on the channel mean, ignoring aging, with a
/// single common `γ`.
pub fn cisb_precode(input: &SlpInput) -> Result<SlpOutput> {
    input.validate()?;
    let problem = problem_for(input, false);
    let sol = solve_gd_with(
        &problem,
        OUTER_TOL,
        INNER_TOL,
        MAX_OUTER,
        &BarrierSettings::default(),
        &GdStart::default(),
    )?;
    max_min_output(input, sol, true)
}

/// Robust SINR balancing through the Dinkelbach solver.
pub fn cisb_r_precode(input: &SlpInput) -> Result<SlpOutput> {
    cisb_r_precode_with(input, &BarrierSettings::default())
}

pub fn cisb_r_precode_with(input: &SlpInput, settings: &BarrierSettings) -> Result<SlpOutput> {
    input.validate()?;
    let problem = problem_for(input, true);
    let sol = solve_gd_with(&problem, OUTER_TOL, INNER_TOL, MAX_OUTER, settings, &GdStart::default())?;
    max_min_output(input, sol, false)
}
