use nalgebra::{Cholesky, DVector};

use super::{scale_to_power, Diagnostics, SlpInput, SlpOutput};
use crate::error::{Result, SlpError};
use crate::linalg::right_pinv;

/// Zero forcing `x ∝ H†s` at full power, so that `Hx = γs`.
pub fn zf_precode(input: &SlpInput) -> Result<SlpOutput> {
    input.validate()?;
    let s = &input.cir.s;
    let mut x = right_pinv(input.h)? * s;
    let c = scale_to_power(&mut x, input.p_t)?;
    let k = input.n_users();
    Ok(SlpOutput {
        x,
        gamma: DVector::from_element(k, c),
        target: s.clone(),
        diagnostics: Diagnostics {
            objective: c * c / input.sigma2,
            ..Diagnostics::default()
        },
    })
}

/// Regularized zero forcing `x ∝ Hᵀ(HHᵀ + Kσ²/P_T I)⁻¹ s` at full power.
///
/// The common `γ` is the scalar receiver gain that minimizes the mean
/// squared deviation `E‖(Hx + n)/γ - s‖²` under the estimated channel.
pub fn mmse_precode(input: &SlpInput) -> Result<SlpOutput> {
    input.validate()?;
    let h = input.h;
    let s = &input.cir.s;
    let k = input.n_users();
    let reg = k as f64 * input.sigma2 / input.p_t;
    let mut gram = h * h.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += reg;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| SlpError::Singular("HHᵀ + reg I".into()))?;
    let mut x = h.transpose() * chol.solve(s);
    scale_to_power(&mut x, input.p_t)?;
    let hx = h * &x;
    let corr = s.dot(&hx);
    let gamma = if corr > 0.0 {
        (hx.norm_squared() + k as f64 * input.sigma2) / corr
    } else {
        // only reachable when the channel gives no useful signal
        (input.p_t / right_pinv(h).map(|p| (p * s).norm_squared()).unwrap_or(1.0)).sqrt()
    };
    Ok(SlpOutput {
        x,
        gamma: DVector::from_element(k, gamma),
        target: s.clone(),
        diagnostics: Diagnostics::default(),
    })
}
