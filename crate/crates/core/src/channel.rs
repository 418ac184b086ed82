//! Jointly correlated angular-domain channel with Gauss-Markov aging.
//!
//! The estimated channel of user `k` is `h_u = V_D* (m_k ⊙ g_0)` and the
//! channel seen at transmission time is
//! `h = α h_u + β V_D* (m_k ⊙ g)`, with `β = sqrt(1 - α²)` and fresh
//! standard complex Gaussian `g`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlpError};
use crate::linalg::{CMatrix, CVector, C64};

/// Speed of light in m/s.
pub const LIGHT_SPEED_MPS: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArrayGeometry {
    Ula,
    Upa {
        n_v: usize,
        n_h: usize,
        dual_polarized: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_antennas: usize,
    pub fine_factor: usize,
    pub geometry: ArrayGeometry,
}

impl ArrayConfig {
    pub fn ula(n_antennas: usize, fine_factor: usize) -> Self {
        Self {
            n_antennas,
            fine_factor,
            geometry: ArrayGeometry::Ula,
        }
    }

    pub fn upa(n_v: usize, n_h: usize, dual_polarized: bool, fine_factor: usize) -> Self {
        let pols = if dual_polarized { 2 } else { 1 };
        Self {
            n_antennas: pols * n_v * n_h,
            fine_factor,
            geometry: ArrayGeometry::Upa {
                n_v,
                n_h,
                dual_polarized,
            },
        }
    }

    /// Number of angular grid points `F_vh · N`.
    pub fn grid_len(&self) -> usize {
        self.fine_factor * self.n_antennas
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(SlpError::InvalidArgument("n_antennas must be >= 1".into()));
        }
        if self.fine_factor == 0 {
            return Err(SlpError::InvalidArgument("fine_factor must be >= 1".into()));
        }
        if let ArrayGeometry::Upa {
            n_v,
            n_h,
            dual_polarized,
        } = self.geometry
        {
            let pols = if dual_polarized { 2 } else { 1 };
            if n_v == 0 || n_h == 0 || pols * n_v * n_h != self.n_antennas {
                return Err(SlpError::InvalidArgument(format!(
                    "UPA {n_v}x{n_h} (dual_polarized={dual_polarized}) does not match N={}",
                    self.n_antennas
                )));
            }
        }
        Ok(())
    }

    /// Per-axis fine factors `(F_v, F_h)` of a planar grid. A square total
    /// factor is split evenly; otherwise all oversampling goes to the
    /// vertical axis.
    fn axis_factors(&self) -> (usize, usize) {
        let f = self.fine_factor;
        let r = (f as f64).sqrt().round() as usize;
        if r * r == f {
            (r, r)
        } else {
            (f, 1)
        }
    }
}

/// Oversampled DFT grid, `n × (f·n)`, column `j` = `exp(-i2π t j/(f n))/√n`.
fn oversampled_dft(n: usize, f: usize) -> CMatrix {
    let cols = f * n;
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, cols, |t, j| {
        let phase = -2.0 * PI * ((t * j) % cols) as f64 / cols as f64;
        C64::from_polar(scale, phase)
    })
}

/// Builds the (partial) DFT dictionary `V_D` of size `N × F_vh·N`.
pub fn build_dft_grid(config: &ArrayConfig) -> Result<CMatrix> {
    config.validate()?;
    match config.geometry {
        ArrayGeometry::Ula => Ok(oversampled_dft(config.n_antennas, config.fine_factor)),
        ArrayGeometry::Upa {
            n_v,
            n_h,
            dual_polarized,
        } => {
            let (fv, fh) = config.axis_factors();
            let single = oversampled_dft(n_v, fv).kronecker(&oversampled_dft(n_h, fh));
            if !dual_polarized {
                return Ok(single);
            }
            let (r, c) = single.shape();
            let mut grid = CMatrix::zeros(2 * r, 2 * c);
            grid.view_mut((0, 0), (r, c)).copy_from(&single);
            grid.view_mut((r, c), (r, c)).copy_from(&single);
            Ok(grid)
        }
    }
}

/// Shape parameters of the synthetic clustered angular mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub n_clusters: usize,
    /// Laplacian decay length in grid bins.
    pub width_bins: f64,
}

impl MaskParams {
    /// Lobe width used when the configuration does not set one.
    ///
    /// On grids with `F_vh·N >= 32` the width is the largest (up to a cap)
    /// for which three overlapping lobes leave at least 80% of the entries
    /// below 1% of the peak: each lobe keeps a support radius `r` and three
    /// tails beyond `r` sum to less than 1% of a lobe apex.
    pub fn default_for(config: &ArrayConfig, n_clusters: usize) -> Self {
        let len = config.grid_len();
        let budget = 0.2 * len as f64 / 3.0;
        let tail = (3.0f64 / 0.01).ln();
        let width_bins = match config.geometry {
            ArrayGeometry::Ula if len < 32 => 1.0,
            ArrayGeometry::Ula => {
                let r = ((budget - 1.0) / 2.0).floor().max(0.0);
                (0.9 * (r + 1.0) / tail).min(0.6)
            }
            ArrayGeometry::Upa { .. } if len < 32 => 0.6,
            ArrayGeometry::Upa { dual_polarized, .. } => {
                let per_pol = if dual_polarized { budget / 2.0 } else { budget };
                let mut r = 0.0;
                while 2.0 * (r + 1.0) * (r + 1.0) + 2.0 * (r + 1.0) + 1.0 <= per_pol {
                    r += 1.0;
                }
                (0.9 * (r + 1.0) / tail).min(0.4)
            }
        };
        Self { n_clusters, width_bins }
    }
}

/// Lobes are cut to exactly zero beyond this many decay lengths.
const LOBE_CUTOFF: f64 = 6.0;

fn circular_distance(a: usize, b: usize, len: usize) -> f64 {
    let d = a.abs_diff(b);
    d.min(len - d) as f64
}

fn lobe(d: f64, width: f64) -> f64 {
    if width <= 0.0 {
        return if d == 0.0 { 1.0 } else { 0.0 };
    }
    if d > LOBE_CUTOFF * width {
        0.0
    } else {
        (-d / width).exp()
    }
}

/// Synthetic angular mask with the default lobe width for `config`.
pub fn synthesize_angular_mask<R: Rng + ?Sized>(
    rng: &mut R,
    n_clusters: usize,
    config: &ArrayConfig,
) -> Result<DVector<f64>> {
    synthesize_angular_mask_with(rng, &MaskParams::default_for(config, n_clusters), config)
}

/// Sum of `n_clusters` Laplacian lobes at random grid centres, rescaled so
/// that `‖m‖² = N`.
pub fn synthesize_angular_mask_with<R: Rng + ?Sized>(
    rng: &mut R,
    params: &MaskParams,
    config: &ArrayConfig,
) -> Result<DVector<f64>> {
    config.validate()?;
    if params.n_clusters == 0 {
        return Err(SlpError::InvalidArgument("n_clusters must be >= 1".into()));
    }
    let len = config.grid_len();
    let mut m: DVector<f64> = DVector::zeros(len);
    match config.geometry {
        ArrayGeometry::Ula => {
            for _ in 0..params.n_clusters {
                let centre = rng.random_range(0..len);
                let amp: f64 = rng.random_range(0.4..1.0);
                for j in 0..len {
                    m[j] += amp * lobe(circular_distance(j, centre, len), params.width_bins);
                }
            }
        }
        ArrayGeometry::Upa {
            n_v,
            n_h,
            dual_polarized,
        } => {
            let (fv, fh) = config.axis_factors();
            let (lv, lh) = (fv * n_v, fh * n_h);
            let block = lv * lh;
            for _ in 0..params.n_clusters {
                let cv = rng.random_range(0..lv);
                let ch = rng.random_range(0..lh);
                let amp: f64 = rng.random_range(0.4..1.0);
                for jv in 0..lv {
                    for jh in 0..lh {
                        let d = circular_distance(jv, cv, lv) + circular_distance(jh, ch, lh);
                        let v = amp * lobe(d, params.width_bins);
                        m[jv * lh + jh] += v;
                        if dual_polarized {
                            m[block + jv * lh + jh] += v;
                        }
                    }
                }
            }
        }
    }
    let norm2 = m.norm_squared();
    if norm2 > 0.0 {
        m *= (config.n_antennas as f64 / norm2).sqrt();
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityProfile {
    pub speed_mps: f64,
    pub carrier_hz: f64,
    pub symbol_duration_s: f64,
    pub light_speed_mps: f64,
}

impl MobilityProfile {
    pub fn new(speed_mps: f64, carrier_hz: f64, symbol_duration_s: f64) -> Self {
        Self {
            speed_mps,
            carrier_hz,
            symbol_duration_s,
            light_speed_mps: LIGHT_SPEED_MPS,
        }
    }
}

/// Bessel function of the first kind, order zero.
///
/// Power series for `|x| <= 8`, Hankel asymptotic expansion beyond; absolute
/// error stays below 1e-7 on the whole real line.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        let q = 0.25 * ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -q / (k as f64 * k as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        let mut p = 0.0;
        let mut q = 0.0;
        let mut a = 1.0;
        let mut prev = f64::INFINITY;
        let z = 8.0 * ax;
        for k in 0..24 {
            if k > 0 {
                let odd = (2 * k - 1) as f64;
                a *= -(odd * odd) / (k as f64 * z);
            }
            let term = a;
            if k > 1 && term.abs() > prev {
                break;
            }
            prev = term.abs();
            match k % 4 {
                0 => p += term,
                1 => q += term,
                2 => p -= term,
                _ => q -= term,
            }
            if term.abs() < 1e-16 {
                break;
            }
        }
        let chi = ax - 0.25 * PI;
        (2.0 / (PI * ax)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Jakes temporal correlation `α = J0(2π v f_c n T / c)` after `n` symbols.
pub fn jakes_correlation(profile: &MobilityProfile, n_symbols: u64) -> f64 {
    let arg = 2.0 * PI * profile.speed_mps * profile.carrier_hz * n_symbols as f64 * profile.symbol_duration_s
        / profile.light_speed_mps;
    bessel_j0(arg)
}

/// Draws a vector of i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// `V_D* (m ⊙ g)`.
fn shaped(grid: &CMatrix, mask: &DVector<f64>, g: &CVector) -> CVector {
    let weighted = CVector::from_fn(g.len(), |j, _| g[j] * mask[j]);
    grid.map(|z| z.conj()) * weighted
}

/// Aging coefficients `(α, β)` with `β = sqrt(1 - α²)`.
pub fn aging_pair(alpha: f64) -> (f64, f64) {
    (alpha, (1.0 - alpha * alpha).max(0.0).sqrt())
}

#[derive(Debug, Clone)]
pub struct AngularChannelModel {
    pub dft_grid: CMatrix,
    pub masks: Vec<DVector<f64>>,
    pub aging: Vec<(f64, f64)>,
}

/// One user's entry of an a posteriori realization.
#[derive(Debug, Clone)]
pub struct ChannelEntry {
    pub estimated: CVector,
    pub mean: CVector,
    pub true_channel: CVector,
    pub innovation: CVector,
}

#[derive(Debug, Clone)]
pub struct PosterioriRealization {
    pub users: Vec<ChannelEntry>,
}

impl AngularChannelModel {
    pub fn new(dft_grid: CMatrix, masks: Vec<DVector<f64>>, alphas: &[f64]) -> Result<Self> {
        if masks.len() != alphas.len() {
            return Err(SlpError::Dimension(format!(
                "{} masks but {} aging coefficients",
                masks.len(),
                alphas.len()
            )));
        }
        for (k, m) in masks.iter().enumerate() {
            if m.len() != dft_grid.ncols() {
                return Err(SlpError::Dimension(format!(
                    "mask {k} has length {} but grid has {} columns",
                    m.len(),
                    dft_grid.ncols()
                )));
            }
            if m.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(SlpError::InvalidArgument(format!(
                    "mask {k} must be finite and nonnegative"
                )));
            }
        }
        let aging = alphas
            .iter()
            .map(|&a| {
                if (0.0..=1.0).contains(&a) {
                    Ok(aging_pair(a))
                } else {
                    Err(SlpError::InvalidArgument(format!("alpha {a} outside [0, 1]")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dft_grid, masks, aging })
    }

    pub fn n_users(&self) -> usize {
        self.masks.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.dft_grid.nrows()
    }

    /// `h_u = V_D* (m_k ⊙ g_0)`.
    pub fn sample_estimated_channel<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> CVector {
        let g0 = complex_gaussian(rng, self.dft_grid.ncols());
        shaped(&self.dft_grid, &self.masks[k], &g0)
    }

    /// Draws the estimate and its aged counterpart for every user.
    pub fn sample_realization<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PosterioriRealization> {
        let users = (0..self.n_users())
            .map(|k| {
                let h_u = self.sample_estimated_channel(k, rng);
                evolve_true_channel(&self.dft_grid, &h_u, &self.masks[k], self.aging[k].0, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PosterioriRealization { users })
    }
}

/// `h = α h_u + β V_D* (m ⊙ g)` with fresh innovation `g`.
pub fn evolve_true_channel<R: Rng + ?Sized>(
    grid: &CMatrix,
    h_u: &CVector,
    mask: &DVector<f64>,
    alpha: f64,
    rng: &mut R,
) -> Result<ChannelEntry> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SlpError::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let (alpha, beta) = aging_pair(alpha);
    let g = complex_gaussian(rng, grid.ncols());
    let mean = h_u * C64::new(alpha, 0.0);
    let true_channel = if beta == 0.0 {
        mean.clone()
    } else {
        &mean + shaped(grid, mask, &g) * C64::new(beta, 0.0)
    };
    Ok(ChannelEntry {
        estimated: h_u.clone(),
        mean,
        true_channel,
        innovation: g,
    })
}

/// Stacks channel rows `h_kᵀ` into the `K × N` matrix used by the precoders.
pub fn stack_rows(rows: &[CVector]) -> CMatrix {
    let k = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(k, n, |i, j| rows[i][j])
}

/// Writes one complex vector per line as `re,im,re,im,...`.
pub fn write_complex_rows<W: Write>(mut w: W, rows: &[CVector]) -> Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_complex_rows<R: BufRead>(r: R) -> Result<Vec<CVector>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = parse_floats(&line, lineno)?;
        if vals.len() % 2 != 0 {
            return Err(SlpError::InvalidArgument(format!(
                "line {}: odd number of fields in complex row",
                lineno + 1
            )));
        }
        out.push(CVector::from_fn(vals.len() / 2, |i, _| {
            C64::new(vals[2 * i], vals[2 * i + 1])
        }));
    }
    Ok(out)
}

/// Writes the columns of the grid, one per line.
pub fn write_grid<W: Write>(w: W, grid: &CMatrix) -> Result<()> {
    let cols: Vec<CVector> = grid.column_iter().map(|c| c.into_owned()).collect();
    write_complex_rows(w, &cols)
}

pub fn read_grid<R: BufRead>(r: R) -> Result<CMatrix> {
    let cols = read_complex_rows(r)?;
    let n = cols.first().map_or(0, |c| c.len());
    if cols.iter().any(|c| c.len() != n) {
        return Err(SlpError::Dimension("grid columns have unequal length".into()));
    }
    Ok(CMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

pub fn write_masks<W: Write>(mut w: W, masks: &[DVector<f64>]) -> Result<()> {
    for m in masks {
        let line: Vec<String> = m.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_masks<R: BufRead>(r: R) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(DVector::from_vec(parse_floats(&line, lineno)?));
    }
    Ok(out)
}

fn parse_floats(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| SlpError::InvalidArgument(format!("line {}: bad number {f:?}: {e}", lineno + 1)))
        })
        .collect()
}

/// `Hᴴ`-free Gram of the grid, handy in tests: `V_D V_Dᴴ`.
pub fn grid_gram(grid: &CMatrix) -> CMatrix {
    grid * grid.adjoint()
}

/// Real-valued magnitudes of the grid columns.
pub fn column_norms(grid: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(grid.ncols(), grid.column_iter().map(|c| c.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// J0 via the integral `(1/π) ∫₀^π cos(x sin θ) dθ`, composite Simpson.
    fn j0_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = PI / n as f64;
        let f = |t: f64| (x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn unitary_dft_for_two_antennas() {
        let v = build_dft_grid(&ArrayConfig::ula(2, 1)).unwrap();
        let g = grid_gram(&v);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn ula14_grid_shape() {
        let v = build_dft_grid(&ArrayConfig::ula(14, 1)).unwrap();
        assert_eq!(v.shape(), (14, 14));
        let g = grid_gram(&v);
        assert!((g - CMatrix::identity(14, 14)).norm() < 1e-12);
    }

    #[test]
    fn oversampled_columns_unit_norm() {
        let v = build_dft_grid(&ArrayConfig::ula(4, 2)).unwrap();
        assert_eq!(v.shape(), (4, 8));
        let gram = v.adjoint() * &v;
        for j in 0..8 {
            assert!((gram[(j, j)].re - 1.0).abs() < 1e-14);
            assert!(gram[(j, j)].im.abs() < 1e-14);
        }
    }

    #[test]
    fn upa_grid_is_block_repeated() {
        let cfg = ArrayConfig::upa(4, 8, true, 4);
        let v = build_dft_grid(&cfg).unwrap();
        assert_eq!(v.shape(), (64, 256));
        let norms = column_norms(&v);
        assert!(norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
        let a = v.view((0, 0), (32, 128)).into_owned();
        let b = v.view((32, 128), (32, 128)).into_owned();
        assert_eq!(a, b);
        assert!(v.view((0, 128), (32, 128)).iter().all(|z| z.norm() == 0.0));
        // tight frame: V_D V_Dᴴ = F I
        let g = grid_gram(&v);
        assert!((g - CMatrix::identity(64, 64) * C64::new(4.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(build_dft_grid(&ArrayConfig::ula(0, 1)).is_err());
        assert!(build_dft_grid(&ArrayConfig::ula(4, 0)).is_err());
        let mut bad = ArrayConfig::upa(4, 8, true, 4);
        bad.n_antennas = 32;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mask_normalization_and_determinism() {
        let cfg = ArrayConfig::ula(64, 4);
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let ma = synthesize_angular_mask(&mut a, 3, &cfg).unwrap();
        let mb = synthesize_angular_mask(&mut b, 3, &cfg).unwrap();
        assert_eq!(ma, mb);
        assert!((ma.norm_squared() - 64.0).abs() < 1e-12);
        assert!(ma.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn narrow_single_cluster_is_one_hot() {
        let cfg = ArrayConfig::ula(16, 1);
        let params = MaskParams {
            n_clusters: 1,
            width_bins: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = synthesize_angular_mask_with(&mut rng, &params, &cfg).unwrap();
        assert_eq!(m.iter().filter(|&&v| v > 0.0).count(), 1);
        assert!((m.norm_squared() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn masks_are_sparse_on_large_grids() {
        let configs = [
            ArrayConfig::ula(64, 4),
            ArrayConfig::ula(32, 1),
            ArrayConfig::ula(8, 4),
            ArrayConfig::upa(4, 8, true, 4),
            ArrayConfig::upa(4, 4, true, 1),
            ArrayConfig::upa(4, 4, false, 2),
            ArrayConfig::ula(16, 16),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for cfg in configs {
            for clusters in 1..=3 {
                for _ in 0..300 {
                    let m = synthesize_angular_mask(&mut rng, clusters, &cfg).unwrap();
                    let max = m.max();
                    let small = m.iter().filter(|&&v| v < 0.01 * max).count();
                    assert!(
                        small as f64 >= 0.8 * m.len() as f64,
                        "{cfg:?}: {small}/{} small entries",
                        m.len()
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_zero_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(synthesize_angular_mask(&mut rng, 0, &ArrayConfig::ula(8, 1)).is_err());
    }

    #[test]
    fn j0_against_quadrature() {
        for i in 0..=400 {
            let x = i as f64 * 0.1;
            let err = (bessel_j0(x) - j0_quadrature(x)).abs();
            assert!(err < 1e-7, "x={x}: err {err}");
        }
        assert!((bessel_j0(-3.0) - bessel_j0(3.0)).abs() < 1e-15);
    }

    #[test]
    fn jakes_anchor_values() {
        let still = MobilityProfile::new(0.0, 3.5e9, 1e-3);
        for n in [0, 1, 10, 1000] {
            assert_eq!(jakes_correlation(&still, n), 1.0);
        }
        let moving = MobilityProfile::new(30.0, 3.5e9, 1e-4);
        assert_eq!(jakes_correlation(&moving, 0), 1.0);

        // choose T so that the argument is exactly x
        let t_for = |x: f64| x * LIGHT_SPEED_MPS / (2.0 * PI * 30.0 * 3.5e9);
        let first_zero = MobilityProfile::new(30.0, 3.5e9, t_for(2.4048));
        assert!(jakes_correlation(&first_zero, 1).abs() < 1e-3);
        let p = MobilityProfile::new(30.0, 3.5e9, t_for(2.199));
        let oracle = j0_quadrature(2.199);
        // J0(2.199) = 0.11092, J0(2.2) = 0.11036
        assert!((oracle - 0.1104).abs() < 1e-3);
        assert!((jakes_correlation(&p, 1) - oracle).abs() < 1e-7);
    }

    fn test_model(n: usize, alpha: f64, seed: u64) -> AngularChannelModel {
        let cfg = ArrayConfig::ula(n, 1);
        let grid = build_dft_grid(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masks = (0..2)
            .map(|_| synthesize_angular_mask(&mut rng, 3, &cfg).unwrap())
            .collect();
        AngularChannelModel::new(grid, masks, &[alpha, alpha]).unwrap()
    }

    #[test]
    fn zero_mask_gives_zero_channel() {
        let cfg = ArrayConfig::ula(8, 1);
        let grid = build_dft_grid(&cfg).unwrap();
        let model = AngularChannelModel::new(grid, vec![DVector::zeros(8)], &[0.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(model.sample_estimated_channel(0, &mut rng).norm() == 0.0);
    }

    #[test]
    fn one_hot_mask_channel_has_constant_modulus() {
        let n = 8;
        let grid = build_dft_grid(&ArrayConfig::ula(n, 1)).unwrap();
        let mut m = DVector::zeros(n);
        m[0] = (n as f64).sqrt();
        let model = AngularChannelModel::new(grid, vec![m], &[1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = model.sample_estimated_channel(0, &mut rng);
        let first = h[0].norm();
        assert!(h.iter().all(|z| (z.norm() - first).abs() < 1e-12));
    }

    #[test]
    fn estimated_channel_power_matches_mask() {
        let model = test_model(14, 1.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| model.sample_estimated_channel(0, &mut rng).norm_squared())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 14.0).abs() < 0.05 * 14.0, "mean {mean}");
    }

    #[test]
    fn quasi_static_limit_is_exact() {
        let model = test_model(8, 1.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h_u = model.sample_estimated_channel(0, &mut rng);
        let e = evolve_true_channel(&model.dft_grid, &h_u, &model.masks[0], 1.0, &mut rng).unwrap();
        assert_eq!(e.true_channel, h_u);
        assert_eq!(e.mean, h_u);
    }

    #[test]
    fn full_aging_decorrelates() {
        let model = test_model(14, 0.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 10_000;
        let mut cross = C64::new(0.0, 0.0);
        let mut pu = 0.0;
        let mut ph = 0.0;
        for _ in 0..draws {
            let h_u = model.sample_estimated_channel(0, &mut rng);
            let e = evolve_true_channel(&model.dft_grid, &h_u, &model.masks[0], 0.0, &mut rng).unwrap();
            cross += h_u.dotc(&e.true_channel);
            pu += h_u.norm_squared();
            ph += e.true_channel.norm_squared();
        }
        let corr = cross.norm() / (pu * ph).sqrt();
        assert!(corr < 0.05, "corr {corr}");
    }

    #[test]
    fn aged_channel_conserves_power() {
        let model = test_model(14, 0.95, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let draws = 10_000;
        let mut p = 0.0;
        for _ in 0..draws {
            let h_u = model.sample_estimated_channel(1, &mut rng);
            let e = evolve_true_channel(&model.dft_grid, &h_u, &model.masks[1], 0.95, &mut rng).unwrap();
            p += e.true_channel.norm_squared();
        }
        let mean = p / draws as f64;
        assert!((mean - 14.0).abs() < 0.05 * 14.0, "mean {mean}");
    }

    #[test]
    fn ensemble_trace_normalization() {
        let k = 4;
        let n = 16;
        let cfg = ArrayConfig::ula(n, 2);
        let grid = build_dft_grid(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let masks = (0..k)
            .map(|_| synthesize_angular_mask(&mut rng, 2, &cfg).unwrap())
            .collect();
        let model = AngularChannelModel::new(grid, masks, &vec![1.0; k]).unwrap();
        let draws = 5_000;
        let mut tr = 0.0;
        for _ in 0..draws {
            let r = model.sample_realization(&mut rng).unwrap();
            let h = stack_rows(&r.users.iter().map(|u| u.mean.clone()).collect::<Vec<_>>());
            tr += (&h * h.adjoint()).trace().re;
        }
        let mean = tr / draws as f64;
        let want = (k * n) as f64;
        assert!((mean - want).abs() < 0.05 * want, "mean {mean}");
    }

    #[test]
    fn evolve_rejects_bad_alpha() {
        let model = test_model(4, 1.0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h_u = model.sample_estimated_channel(0, &mut rng);
        assert!(evolve_true_channel(&model.dft_grid, &h_u, &model.masks[0], 1.2, &mut rng).is_err());
        assert!(evolve_true_channel(&model.dft_grid, &h_u, &model.masks[0], -0.1, &mut rng).is_err());
    }

    #[test]
    fn realizations_are_reproducible() {
        let model = test_model(8, 0.9, 6);
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let ra = model.sample_realization(&mut a).unwrap();
        let rb = model.sample_realization(&mut b).unwrap();
        for (x, y) in ra.users.iter().zip(&rb.users) {
            assert_eq!(x.true_channel, y.true_channel);
            assert_eq!(x.estimated, y.estimated);
        }
    }

    #[test]
    fn grid_and_mask_csv_round_trip() {
        let cfg = ArrayConfig::ula(4, 2);
        let grid = build_dft_grid(&cfg).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &grid).unwrap();
        let back = read_grid(buf.as_slice()).unwrap();
        assert_eq!(back, grid);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let masks: Vec<_> = (0..3)
            .map(|_| synthesize_angular_mask(&mut rng, 2, &cfg).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_masks(&mut buf, &masks).unwrap();
        assert_eq!(read_masks(buf.as_slice()).unwrap(), masks);
    }
}
