//! Real-valued stacking and the per-user uncertainty operators `V_k`, `E_k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlpError};
use crate::linalg::{lift_matrix, lift_vector, CMatrix, CVector};

/// Real stacked channel `H`, symbols `s` and transmit vector `x`.
#[derive(Debug, Clone)]
pub struct RealLift {
    pub h: DMatrix<f64>,
    pub s: DVector<f64>,
    pub x: DVector<f64>,
}

impl RealLift {
    pub fn new(h_bar: &CMatrix, s: &CVector, x: &CVector) -> Self {
        Self {
            h: lift_channel(h_bar),
            s: lift_vector(s),
            x: lift_vector(x),
        }
    }
}

/// `[[Re(H̄), -Im(H̄)], [Im(H̄), Re(H̄)]]`.
pub fn lift_channel(h_bar: &CMatrix) -> DMatrix<f64> {
    lift_matrix(h_bar)
}

#[derive(Debug, Clone)]
pub struct UncertaintyOperator {
    /// `V̄_k`, rows `m_k ⊙` (rows of `V_Dᴴ`), size `F·N × N`.
    pub v_bar: CMatrix,
    pub v_real: DMatrix<f64>,
    /// `E_k = V_kᵀ V_k`.
    pub e: DMatrix<f64>,
    pub mask_norm2: f64,
}

/// Builds `V̄_k = diag(m_k) V_Dᴴ`, its real lift and `E_k`.
///
/// `E_k` is formed as the lift of `V_D diag(m²) V_Dᴴ`, which equals
/// `V_kᵀ V_k` and costs `O(F N²)` instead of `O(F N³)`.
pub fn build_uncertainty(mask: &DVector<f64>, grid: &CMatrix) -> Result<UncertaintyOperator> {
    let (n, len) = grid.shape();
    if mask.len() != len {
        return Err(SlpError::Dimension(format!(
            "mask length {} does not match grid width {len}",
            mask.len()
        )));
    }
    let grid_h = grid.adjoint();
    let v_bar = CMatrix::from_fn(len, n, |j, i| grid_h[(j, i)] * mask[j]);
    let weighted = CMatrix::from_fn(n, len, |i, j| grid[(i, j)] * (mask[j] * mask[j]));
    let gram_c = weighted * &grid_h;
    let mut e = lift_matrix(&gram_c);
    e = (&e + e.transpose()) * 0.5;
    Ok(UncertaintyOperator {
        v_real: lift_matrix(&v_bar),
        v_bar,
        e,
        mask_norm2: mask.norm_squared(),
    })
}

impl UncertaintyOperator {
    /// `xᵀ E_k x`.
    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.e * x))
    }
}

/// `Ê_k = (‖m_k‖² / N) I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalApprox {
    pub scale: f64,
}

impl DiagonalApprox {
    pub fn new(mask: &DVector<f64>, n_antennas: usize) -> Self {
        Self {
            scale: mask.norm_squared() / n_antennas as f64,
        }
    }

    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        self.scale * x.norm_squared()
    }

    pub fn trace(&self, n_antennas: usize) -> f64 {
        2.0 * n_antennas as f64 * self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceReport {
    /// Largest `|E_nj| / E_nn` over `j != n` (rows with a zero diagonal skipped).
    pub max_offdiag_ratio: f64,
    /// Frobenius mass of the off-diagonal part relative to the whole matrix.
    pub offdiag_mass: f64,
    pub dominant: bool,
}

pub fn diagonal_dominance_report(e: &DMatrix<f64>) -> DominanceReport {
    let n = e.nrows();
    let mut max_ratio: f64 = 0.0;
    let mut dominant = true;
    let slack = 1e-12 * e.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        let d = e[(i, i)];
        for j in 0..n {
            if i == j {
                continue;
            }
            let off = e[(i, j)].abs().max(e[(j, i)].abs());
            if off > d + slack {
                dominant = false;
            }
            if d > 0.0 {
                max_ratio = max_ratio.max(off / d);
            }
        }
    }
    DominanceReport {
        max_offdiag_ratio: max_ratio,
        offdiag_mass: crate::linalg::offdiag_ratio(e),
        dominant,
    }
}

/// Applies the complex operator `V̄_k` to a complex transmit vector.
pub fn apply_v_bar(op: &UncertaintyOperator, x_c: &CVector) -> CVector {
    &op.v_bar * x_c
}
