//! Single-symbol precoding instances drawn from the angular channel model.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{build_dft_grid, complex_gaussian, synthesize_angular_mask, ArrayConfig};
use crate::cir::{psk_constellation, CirSpec};
use crate::error::Result;
use crate::lift::{build_uncertainty, lift_channel};
use crate::linalg::{CMatrix, CVector, C64};
use crate::precoders::{SlpInput, UncertaintyModel};

pub const DEFAULT_CLUSTERS: usize = 3;

/// Owned data behind an [`SlpInput`].
#[derive(Debug, Clone)]
pub struct Instance {
    pub h: DMatrix<f64>,
    pub cir: CirSpec,
    pub unc: UncertaintyModel,
    pub masks: Vec<nalgebra::DVector<f64>>,
    pub sigma2: f64,
    pub p_t: f64,
}

impl Instance {
    pub fn input(&self) -> SlpInput<'_> {
        SlpInput {
            h: &self.h,
            cir: &self.cir,
            uncertainty: &self.unc,
            sigma2: self.sigma2,
            p_t: self.p_t,
        }
    }
}

/// `K` users with three-cluster masks, common `α`, uniform `M`-PSK symbols
/// and `P_T = 1`.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: ArrayConfig,
    k: usize,
    alpha: f64,
    snr_db: f64,
    order: usize,
) -> Result<Instance> {
    let grid = build_dft_grid(&cfg)?;
    let n = cfg.n_antennas;
    let grid_conj = grid.map(|z| z.conj());
    let mut rows = Vec::with_capacity(k);
    let mut e = Vec::with_capacity(k);
    let mut norms = Vec::with_capacity(k);
    let mut masks = Vec::with_capacity(k);
    for _ in 0..k {
        let m = synthesize_angular_mask(rng, DEFAULT_CLUSTERS, &cfg)?;
        let g0 = complex_gaussian(rng, grid.ncols());
        let w = CVector::from_fn(grid.ncols(), |j, _| g0[j] * m[j]);
        rows.push(&grid_conj * w * C64::new(alpha, 0.0));
        e.push(build_uncertainty(&m, &grid)?.e);
        norms.push(m.norm_squared());
        masks.push(m);
    }
    let hbar = CMatrix::from_fn(k, n, |i, j| rows[i][j]);
    let c = psk_constellation(order)?;
    let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..order)).collect();
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    let p_t = 1.0;
    Ok(Instance {
        h: lift_channel(&hbar),
        cir: CirSpec::new(&c, &idx)?,
        unc: UncertaintyModel::new(vec![beta; k], e, norms, n)?,
        masks,
        sigma2: p_t * 10f64.powf(-snr_db / 10.0),
        p_t,
    })
}
