//! PSK constellations, constructive-interference regions and the boundary
//! matrix `Λ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlpError};
use crate::linalg::C64;

/// Default tolerance on the cone coordinates in [`in_cir`].
pub const CIR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PskConstellation {
    pub order: usize,
    pub points: Vec<C64>,
}

/// `M`-PSK with point `m` at `exp(i 2π m / M)`.
pub fn psk_constellation(order: usize) -> Result<PskConstellation> {
    if order < 4 || !order.is_power_of_two() {
        return Err(SlpError::InvalidArgument(format!(
            "PSK order must be a power of two >= 4, got {order}"
        )));
    }
    let points = (0..order)
        .map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / order as f64))
        .collect();
    Ok(PskConstellation { order, points })
}

impl PskConstellation {
    pub fn point(&self, index: usize) -> C64 {
        self.points[index % self.order]
    }

    pub fn demodulate(&self, y: C64) -> usize {
        demodulate(y, self.order)
    }
}

/// Edge directions of the constructive-interference cone of one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirBoundary {
    pub mu: C64,
    pub nu: C64,
}

/// Cone edges `exp(i(φ ± π/M))` for `s = exp(iφ)`; `μ` is the one with a
/// nonzero real part.
pub fn cir_boundaries(s: C64, order: usize) -> CirBoundary {
    let phi = s.arg();
    let half = PI / order as f64;
    let plus = C64::from_polar(1.0, phi + half);
    let minus = C64::from_polar(1.0, phi - half);
    if plus.re.abs() > 1e-12 {
        CirBoundary { mu: plus, nu: minus }
    } else {
        CirBoundary { mu: minus, nu: plus }
    }
}

/// Cone coordinates `(δ_μ, δ_ν)` of `z - s`.
pub fn cir_coordinates(z: C64, s: C64, b: &CirBoundary) -> (f64, f64) {
    let r = z - s;
    let det = b.mu.re * b.nu.im - b.nu.re * b.mu.im;
    let dm = (r.re * b.nu.im - b.nu.re * r.im) / det;
    let dn = (b.mu.re * r.im - r.re * b.mu.im) / det;
    (dm, dn)
}

/// Whether `z = s + δ_μ μ + δ_ν ν` with both coordinates `>= -tol`.
pub fn in_cir(z: C64, s: C64, b: &CirBoundary, tol: f64) -> bool {
    let (dm, dn) = cir_coordinates(z, s, b);
    dm >= -tol && dn >= -tol
}

/// Phase-sector decision. Boundary phases go to the lower index, with the
/// sector between `M-1` and `0` resolved to `0`; `y = 0` maps to `0`.
pub fn demodulate(y: C64, order: usize) -> usize {
    if y.re == 0.0 && y.im == 0.0 {
        return 0;
    }
    let mut theta = y.im.atan2(y.re);
    if theta < 0.0 {
        theta += 2.0 * PI;
    }
    let t = theta * order as f64 / (2.0 * PI);
    let floor = t.floor();
    let frac = t - floor;
    let lower = floor as usize % order;
    if (frac - 0.5).abs() < 1e-12 {
        if lower == order - 1 {
            0
        } else {
            lower
        }
    } else if frac < 0.5 {
        lower
    } else {
        (lower + 1) % order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMatrix {
    pub lambda: DMatrix<f64>,
    pub lambda_inv: DMatrix<f64>,
}

/// Assembles `Λ = [[M_R, N_R], [M_I, N_I]]` and its inverse through the
/// Schur complement `N_I - M_I M_R⁻¹ N_R`.
pub fn build_lambda(boundaries: &[CirBoundary]) -> Result<LambdaMatrix> {
    let k = boundaries.len();
    let mut lambda = DMatrix::zeros(2 * k, 2 * k);
    let mut lambda_inv = DMatrix::zeros(2 * k, 2 * k);
    for (i, b) in boundaries.iter().enumerate() {
        let (mr, mi, nr, ni) = (b.mu.re, b.mu.im, b.nu.re, b.nu.im);
        if mr.abs() < 1e-12 {
            return Err(SlpError::Singular(format!("Re(mu_{i}) vanishes")));
        }
        lambda[(i, i)] = mr;
        lambda[(i, i + k)] = nr;
        lambda[(i + k, i)] = mi;
        lambda[(i + k, i + k)] = ni;

        let schur = ni - mi * nr / mr;
        if schur.abs() < 1e-12 {
            return Err(SlpError::Singular(format!("Schur complement {i} vanishes")));
        }
        let a_inv = 1.0 / mr;
        let s_inv = 1.0 / schur;
        lambda_inv[(i, i)] = a_inv + a_inv * nr * s_inv * mi * a_inv;
        lambda_inv[(i, i + k)] = -a_inv * nr * s_inv;
        lambda_inv[(i + k, i)] = -s_inv * mi * a_inv;
        lambda_inv[(i + k, i + k)] = s_inv;
    }
    Ok(LambdaMatrix { lambda, lambda_inv })
}

/// Everything the precoders need to know about one symbol vector.
#[derive(Debug, Clone)]
pub struct CirSpec {
    pub order: usize,
    pub indices: Vec<usize>,
    pub symbols: Vec<C64>,
    pub boundaries: Vec<CirBoundary>,
    pub lambda: LambdaMatrix,
    /// Real stacking `[Re(s); Im(s)]`.
    pub s: DVector<f64>,
}

impl CirSpec {
    pub fn new(constellation: &PskConstellation, indices: &[usize]) -> Result<Self> {
        let symbols: Vec<C64> = indices.iter().map(|&i| constellation.point(i)).collect();
        let boundaries: Vec<CirBoundary> = symbols
            .iter()
            .map(|&s| cir_boundaries(s, constellation.order))
            .collect();
        let lambda = build_lambda(&boundaries)?;
        let k = symbols.len();
        let s = DVector::from_fn(2 * k, |i, _| if i < k { symbols[i].re } else { symbols[i - k].im });
        Ok(Self {
            order: constellation.order,
            indices: indices.to_vec(),
            symbols,
            boundaries,
            lambda,
            s,
        })
    }

    pub fn n_users(&self) -> usize {
        self.symbols.len()
    }

    /// `Λ⁻¹ s`; every entry equals `1 / (2 cos(π/M))`.
    pub fn apex_coordinates(&self) -> DVector<f64> {
        &self.lambda.lambda_inv * &self.s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn constellation_anchors() {
        let c4 = psk_constellation(4).unwrap();
        assert!(close(c4.points[0], C64::new(1.0, 0.0)));
        let c8 = psk_constellation(8).unwrap();
        assert!(close(c8.points[1], C64::from_polar(1.0, PI / 4.0)));
        assert!(c8.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
        assert!(psk_constellation(2).is_err());
        assert!(psk_constellation(6).is_err());
    }

    #[test]
    fn boundaries_of_anchor_symbols() {
        let one = C64::new(1.0, 0.0);
        let b = cir_boundaries(one, 4);
        assert!(close(b.mu, C64::from_polar(1.0, PI / 4.0)));
        assert!(close(b.nu, C64::from_polar(1.0, -PI / 4.0)));
        let b = cir_boundaries(one, 8);
        assert!(close(b.mu, C64::from_polar(1.0, PI / 8.0)));
        assert!(close(b.nu, C64::from_polar(1.0, -PI / 8.0)));

        let i = C64::new(0.0, 1.0);
        let b = cir_boundaries(i, 4);
        assert!(b.mu.re.abs() > 1e-12);
        assert!(close(b.mu, C64::from_polar(1.0, 3.0 * PI / 4.0)));
        // the edges point along the decision boundaries of i
        assert!(in_cir(i + b.mu * 3.0, i, &b, CIR_TOL));
        assert!(in_cir(i + b.nu * 3.0, i, &b, CIR_TOL));
    }

    #[test]
    fn in_cir_basic_cases() {
        for m in [4, 8, 16] {
            let c = psk_constellation(m).unwrap();
            for &s in &c.points {
                let b = cir_boundaries(s, m);
                assert!(in_cir(s, s, &b, CIR_TOL));
                assert!(in_cir(s * 2.0, s, &b, CIR_TOL));
                assert!(!in_cir(-s, s, &b, CIR_TOL));
            }
        }
    }

    #[test]
    fn lambda_single_user_qpsk() {
        let b = cir_boundaries(C64::new(1.0, 0.0), 4);
        let l = build_lambda(&[b]).unwrap();
        let c = (PI / 4.0).cos();
        let s = (PI / 4.0).sin();
        let want = DMatrix::from_row_slice(2, 2, &[c, c, s, -s]);
        assert!((&l.lambda - want).norm() < 1e-15);
        assert!((c * -s - c * s).abs() > 1e-9);
        assert!((&l.lambda * &l.lambda_inv - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn lambda_commutes_with_gamma() {
        let c = psk_constellation(4).unwrap();
        let spec = CirSpec::new(&c, &[0, 1]).unwrap();
        let gamma = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, 2.3, 0.7, 2.3]));
        let lhs = &gamma * &spec.lambda.lambda;
        let rhs = &spec.lambda.lambda * &gamma;
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn lambda_invertible_for_every_single_symbol() {
        for m in [4, 8, 16] {
            let c = psk_constellation(m).unwrap();
            for idx in 0..m {
                let spec = CirSpec::new(&c, &[idx]).unwrap();
                assert!(spec.lambda.lambda.determinant().abs() > 1e-9);
            }
        }
    }

    #[test]
    fn apex_coordinates_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [4, 8, 16] {
            let c = psk_constellation(m).unwrap();
            let idx: Vec<usize> = (0..12).map(|_| rng.random_range(0..m)).collect();
            let spec = CirSpec::new(&c, &idx).unwrap();
            let want = 1.0 / (2.0 * (PI / m as f64).cos());
            assert!(spec.apex_coordinates().iter().all(|v| (v - want).abs() < 1e-12));
        }
    }

    #[test]
    fn demodulation_cases() {
        let c = psk_constellation(8).unwrap();
        for (i, &p) in c.points.iter().enumerate() {
            assert_eq!(demodulate(p, 8), i);
        }
        assert_eq!(demodulate(C64::new(1.0, 0.01), 8), 0);
        assert_eq!(demodulate(C64::new(1.0, -0.01), 8), 0);
        assert_eq!(demodulate(C64::new(0.0, 0.0), 8), 0);
        // exact boundary between points 0 and 1 of QPSK
        assert_eq!(demodulate(C64::new(1.0, 1.0), 4), 0);
        assert_eq!(demodulate(C64::new(-1.0, 1.0), 4), 1);
        // boundary between M-1 and 0
        assert_eq!(demodulate(C64::new(1.0, -1.0), 4), 0);
    }

    #[test]
    fn cir_is_inside_decision_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for m in [4, 8] {
            let c = psk_constellation(m).unwrap();
            for (idx, &s) in c.points.iter().enumerate() {
                let b = cir_boundaries(s, m);
                for _ in 0..10_000 {
                    let dm: f64 = rng.random_range(0.0..5.0);
                    let dn: f64 = rng.random_range(0.0..5.0);
                    let z = s + b.mu * dm + b.nu * dn;
                    assert!(in_cir(z, s, &b, CIR_TOL));
                    assert_eq!(demodulate(z, m), idx);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn lambda_inverse_contract(
            m_exp in 2u32..5,
            idx in proptest::collection::vec(0usize..16, 1..13),
        ) {
            let m = 1usize << m_exp;
            let c = psk_constellation(m).unwrap();
            let spec = CirSpec::new(&c, &idx).unwrap();
            let k = idx.len();
            let prod = &spec.lambda.lambda * &spec.lambda.lambda_inv;
            prop_assert!((prod - DMatrix::identity(2 * k, 2 * k)).amax() < 1e-10);
            prop_assert!(spec.lambda.lambda.determinant().abs() > 1e-9);
        }

        #[test]
        fn gamma_commutation(
            idx in proptest::collection::vec(0usize..8, 1..10),
            g in proptest::collection::vec(0.01f64..10.0, 10),
        ) {
            let c = psk_constellation(8).unwrap();
            let spec = CirSpec::new(&c, &idx).unwrap();
            let k = idx.len();
            let gamma = DMatrix::from_fn(2 * k, 2 * k, |i, j| if i == j { g[i % k] } else { 0.0 });
            let diff = &gamma * &spec.lambda.lambda - &spec.lambda.lambda * &gamma;
            prop_assert!(diff.amax() < 1e-12);
        }

        #[test]
        fn cone_coordinates_round_trip(dm in 0.0f64..10.0, dn in 0.0f64..10.0, idx in 0usize..8) {
            let c = psk_constellation(8).unwrap();
            let s = c.point(idx);
            let b = cir_boundaries(s, 8);
            let (a, bb) = cir_coordinates(s + b.mu * dm + b.nu * dn, s, &b);
            prop_assert!((a - dm).abs() < 1e-9 && (bb - dn).abs() < 1e-9);
        }
    }
}
