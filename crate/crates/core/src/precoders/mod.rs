//! Linear baselines, SINR-balancing SLP and MMSE SLP precoders.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cir::CirSpec;
use crate::error::{Result, SlpError};
use crate::maxmin::TraceRow;

mod linear;
mod mmse;
mod sinr;

pub use linear::{mmse_precode, zf_precode};
pub use mmse::{
    alternating_mmse, cimmse_precode, cimmse_r_precode, cimmse_rlc_precode, mil_projection_direct,
    mil_projection_small, mmse_objective, mmse_x_objective, psi_gradient, robust_x_step, MmseState, MmseVariant,
    CHOLESKY_JITTER, MMSE_MAX_ITER, MMSE_REL_TOL,
};
pub use sinr::{
    cisb_precode, cisb_r_precode, cisb_r_precode_with, cisb_rlc_precode, closed_form_objective, closed_form_state,
    closed_form_with_nnls, ClosedFormState,
};

/// What the transmitter knows about each user's channel error.
#[derive(Debug, Clone)]
pub struct UncertaintyModel {
    pub beta: Vec<f64>,
    /// Full Gram matrices `E_k`.
    pub e: Vec<DMatrix<f64>>,
    /// `‖m_k‖²`, which fixes the diagonal approximation `Ê_k`.
    pub mask_norm2: Vec<f64>,
    pub n_antennas: usize,
}

impl UncertaintyModel {
    pub fn new(beta: Vec<f64>, e: Vec<DMatrix<f64>>, mask_norm2: Vec<f64>, n_antennas: usize) -> Result<Self> {
        let k = beta.len();
        if e.len() != k || mask_norm2.len() != k {
            return Err(SlpError::Dimension(format!(
                "{k} aging coefficients, {} Gram matrices, {} mask norms",
                e.len(),
                mask_norm2.len()
            )));
        }
        if e.iter().any(|m| m.shape() != (2 * n_antennas, 2 * n_antennas)) {
            return Err(SlpError::Dimension("E_k must be 2N x 2N".into()));
        }
        Ok(Self {
            beta,
            e,
            mask_norm2,
            n_antennas,
        })
    }

    /// Same Gram matrices with every `β_k` set to zero.
    pub fn without_aging(&self) -> Self {
        Self {
            beta: vec![0.0; self.beta.len()],
            ..self.clone()
        }
    }

    /// `‖m_k‖² / N`, the scale of `Ê_k`.
    pub fn diag_scale(&self, k: usize) -> f64 {
        self.mask_norm2[k] / self.n_antennas as f64
    }
}

/// Inputs of one precoder call, with `H` built from the channel mean.
#[derive(Debug, Clone, Copy)]
pub struct SlpInput<'a> {
    pub h: &'a DMatrix<f64>,
    pub cir: &'a CirSpec,
    pub uncertainty: &'a UncertaintyModel,
    pub sigma2: f64,
    pub p_t: f64,
}

impl SlpInput<'_> {
    pub fn n_users(&self) -> usize {
        self.cir.n_users()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_users();
        if self.h.nrows() != 2 * k || self.h.ncols() != 2 * self.uncertainty.n_antennas {
            return Err(SlpError::Dimension(format!(
                "H is {}x{}, expected {}x{}",
                self.h.nrows(),
                self.h.ncols(),
                2 * k,
                2 * self.uncertainty.n_antennas
            )));
        }
        if self.uncertainty.beta.len() != k {
            return Err(SlpError::Dimension("one aging coefficient per user".into()));
        }
        if !(self.sigma2 > 0.0) || !(self.p_t > 0.0) {
            return Err(SlpError::InvalidArgument("σ² and P_T must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub delta: Option<DVector<f64>>,
    /// Per-iteration objective for the iterative schemes.
    pub objective_trace: Vec<f64>,
    /// Dinkelbach trace for the max-min schemes.
    pub solver_trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct SlpOutput {
    pub x: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Real stacking of the target the receiver compares `y_k / γ_k` with.
    pub target: DVector<f64>,
    pub diagnostics: Diagnostics,
}

/// `min_k γ_k² / (β_k² xᵀE_k x + σ²)`.
pub fn gamma_min_metric(x: &DVector<f64>, gamma: &DVector<f64>, uncertainty: &UncertaintyModel, sigma2: f64) -> f64 {
    (0..gamma.len())
        .map(|k| {
            let b2 = uncertainty.beta[k] * uncertainty.beta[k];
            let quad = if b2 == 0.0 {
                0.0
            } else {
                x.dot(&(&uncertainty.e[k] * x))
            };
            gamma[k] * gamma[k] / (b2 * quad + sigma2)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "MMSE")]
    Mmse,
    #[serde(rename = "CISB")]
    Cisb,
    #[serde(rename = "CISB-R")]
    CisbR,
    #[serde(rename = "CISB-RLC")]
    CisbRlc,
    #[serde(rename = "CISB-CF")]
    CisbCf,
    #[serde(rename = "CIMMSE")]
    Cimmse,
    #[serde(rename = "CIMMSE-R")]
    CimmseR,
    #[serde(rename = "CIMMSE-RLC")]
    CimmseRlc,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::Zf,
        Scheme::Mmse,
        Scheme::Cisb,
        Scheme::CisbR,
        Scheme::CisbRlc,
        Scheme::CisbCf,
        Scheme::Cimmse,
        Scheme::CimmseR,
        Scheme::CimmseRlc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Zf => "ZF",
            Scheme::Mmse => "MMSE",
            Scheme::Cisb => "CISB",
            Scheme::CisbR => "CISB-R",
            Scheme::CisbRlc => "CISB-RLC",
            Scheme::CisbCf => "CISB-CF",
            Scheme::Cimmse => "CIMMSE",
            Scheme::CimmseR => "CIMMSE-R",
            Scheme::CimmseRlc => "CIMMSE-RLC",
        }
    }

    /// Schemes that target `s` itself rather than a relaxed point in the CIR.
    pub fn is_linear(self) -> bool {
        matches!(self, Scheme::Zf | Scheme::Mmse)
    }

    pub fn is_sinr_balancing(self) -> bool {
        matches!(self, Scheme::Cisb | Scheme::CisbR | Scheme::CisbRlc | Scheme::CisbCf)
    }

    pub fn precode(self, input: &SlpInput) -> Result<SlpOutput> {
        match self {
            Scheme::Zf => zf_precode(input),
            Scheme::Mmse => mmse_precode(input),
            Scheme::Cisb => cisb_precode(input),
            Scheme::CisbR => cisb_r_precode(input),
            Scheme::CisbRlc => cisb_rlc_precode(input),
            Scheme::CisbCf => closed_form_with_nnls(input),
            Scheme::Cimmse => cimmse_precode(input, MMSE_MAX_ITER),
            Scheme::CimmseR => cimmse_r_precode(input, MMSE_MAX_ITER),
            Scheme::CimmseRlc => cimmse_rlc_precode(input, MMSE_MAX_ITER),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SlpError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .iter()
            .copied()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
                SlpError::InvalidArgument(format!("unknown scheme {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// Scales `x` onto the sphere `‖x‖² = P_T` and returns the factor used.
pub(crate) fn scale_to_power(x: &mut DVector<f64>, p_t: f64) -> Result<f64> {
    let n2 = x.norm_squared();
    if !(n2 > 0.0) || !n2.is_finite() {
        return Err(SlpError::Singular("precoder direction vanished".into()));
    }
    let c = (p_t / n2).sqrt();
    *x *= c;
    Ok(c)
}


#[cfg(test)]
mod tests {
    use super::testutil::instance;
    use super::*;
    use crate::channel::ArrayConfig;
    use crate::maxmin::MmfpProblem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.to_string().to_lowercase().parse::<Scheme>().unwrap(), s);
        }
        assert!("CISB-X".parse::<Scheme>().is_err());
    }

    #[test]
    fn gamma_min_without_aging_is_gamma_over_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = instance(&mut rng, ArrayConfig::ula(6, 1), 3, 1.0, 10.0, 4);
        let x = DVector::from_element(12, 0.1);
        let g = DVector::from_vec(vec![0.4, 0.2, 0.3]);
        let v = gamma_min_metric(&x, &g, &inst.unc, inst.sigma2);
        assert!((v - 0.04 / inst.sigma2).abs() < 1e-12 * v);
    }

    #[test]
    fn gamma_min_decreases_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = instance(&mut rng, ArrayConfig::ula(6, 1), 3, 0.9, 10.0, 4);
        let out = cisb_rlc_precode(&inst.input()).unwrap();
        let a = gamma_min_metric(&out.x, &out.gamma, &inst.unc, inst.sigma2);
        let b = gamma_min_metric(&out.x, &out.gamma, &inst.unc, 2.0 * inst.sigma2);
        assert!(b < a);
    }

    #[test]
    fn gamma_min_matches_solver_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = instance(&mut rng, ArrayConfig::ula(8, 2), 4, 0.9, 20.0, 8);
        let out = cisb_r_precode(&inst.input()).unwrap();
        let p = MmfpProblem {
            h: inst.h.clone(),
            lambda_inv: inst.cir.lambda.lambda_inv.clone(),
            s: inst.cir.s.clone(),
            beta: inst.unc.beta.clone(),
            e: inst.unc.e.clone(),
            sigma2: inst.sigma2,
            p_t: inst.p_t,
        };
        let r = p.ratio(&out.x, &out.gamma);
        let g = gamma_min_metric(&out.x, &out.gamma, &inst.unc, inst.sigma2);
        assert!((r * r - g).abs() < 1e-10 * g);
    }

    #[test]
    fn every_scheme_meets_the_power_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = instance(&mut rng, ArrayConfig::ula(8, 1), 4, 0.95, 15.0, 8);
        for s in Scheme::ALL {
            let out = s.precode(&inst.input()).unwrap();
            assert!(out.x.norm_squared() <= inst.p_t * (1.0 + 1e-8), "{s}");
            assert!(out.gamma.iter().all(|&g| g > 0.0), "{s}");
            if s.is_sinr_balancing() {
                assert!((out.x.norm_squared() - inst.p_t).abs() < 1e-8, "{s}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inst = instance(&mut rng, ArrayConfig::ula(4, 1), 2, 0.9, 10.0, 4);
        inst.sigma2 = 0.0;
        assert!(zf_precode(&inst.input()).is_err());
        assert!(UncertaintyModel::new(vec![0.1], vec![], vec![1.0], 4).is_err());
    }
}
