//! Self-check suites run by `slpsim validate`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{build_dft_grid, complex_gaussian, synthesize_angular_mask, ArrayConfig};
use crate::cir::{psk_constellation, CirSpec};
use crate::error::{Result, SlpError};
use crate::lift::build_uncertainty;
use crate::linalg::{angle_between, lift_matrix, lift_vector, CMatrix, C64};
use crate::maxmin::{solve_gd_with, BarrierSettings, GdStart, MmfpProblem, INNER_TOL, MAX_OUTER, OUTER_TOL};
use crate::nnls::{
    cir_nnls_problem, diagonal_gram_shortcut, gram_diagnostic, solve_nnls, NnlsProblem, NNLS_MAX_ITER, NNLS_TOL,
};
use crate::precoders::{
    alternating_mmse, cisb_precode, cisb_r_precode, cisb_r_precode_with, cisb_rlc_precode, closed_form_objective,
    closed_form_state, closed_form_with_nnls, mil_projection_direct, mil_projection_small, mmse_x_objective,
    psi_gradient, robust_x_step, zf_precode, MmseVariant, Scheme, MMSE_MAX_ITER,
};
use crate::scenario::{random_instance, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Nnls,
    Prop2,
    Prop3,
    Prop4,
    Prop5,
    Mil,
    Degeneracy,
    Monotone,
    Dinkelbach,
    Invariants,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Lemma1,
        Suite::Nnls,
        Suite::Prop2,
        Suite::Prop3,
        Suite::Prop4,
        Suite::Prop5,
        Suite::Mil,
        Suite::Degeneracy,
        Suite::Monotone,
        Suite::Dinkelbach,
        Suite::Invariants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Nnls => "nnls",
            Suite::Prop2 => "prop2",
            Suite::Prop3 => "prop3",
            Suite::Prop4 => "prop4",
            Suite::Prop5 => "prop5",
            Suite::Mil => "mil",
            Suite::Degeneracy => "degeneracy",
            Suite::Monotone => "monotone",
            Suite::Dinkelbach => "dinkelbach",
            Suite::Invariants => "invariants",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = SlpError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|v| v.name()).collect();
                SlpError::InvalidArgument(format!("unknown suite {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}/{}: {}", self.suite, c.label, c.detail)?;
        }
        write!(
            f,
            "{} {} ({:.1} s)",
            self.suite,
            if self.passed() { "passed" } else { "FAILED" },
            self.elapsed.as_secs_f64()
        )
    }
}

fn check(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        passed,
        detail: detail.into(),
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (suite as u64).wrapping_mul(0x9E37_79B9));
    let checks = match suite {
        Suite::Lemma1 => diagonal_gram(&mut rng)?,
        Suite::Nnls => nnls_brute_force(&mut rng)?,
        Suite::Prop2 => closed_form_audit(&mut rng)?,
        Suite::Prop3 => offdiag_trend(&mut rng, false)?,
        Suite::Prop4 => mmse_stationarity(&mut rng)?,
        Suite::Prop5 => offdiag_trend(&mut rng, true)?,
        Suite::Mil => mil(&mut rng)?,
        Suite::Degeneracy => degeneracy(&mut rng)?,
        Suite::Monotone => monotone(&mut rng)?,
        Suite::Dinkelbach => dinkelbach(&mut rng)?,
        Suite::Invariants => invariants(&mut rng)?,
    };
    Ok(SuiteReport {
        suite,
        checks,
        elapsed: start.elapsed(),
    })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_spec(rng: &mut ChaCha8Rng, k: usize, order: usize) -> Result<CirSpec> {
    let c = psk_constellation(order)?;
    let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..order)).collect();
    CirSpec::new(&c, &idx)
}

fn diagonal_gram(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    let mut zero = 0;
    let mut shortcut = 0;
    let cases = 100;
    for _ in 0..cases {
        let k = rng.random_range(1..7);
        let spec = random_spec(rng, k, 8)?;
        let rows = 2 * k + rng.random_range(0..4);
        let q = gaussian_matrix(rng, rows, 2 * k).qr().q();
        let scales = DVector::from_fn(2 * k, |_, _| rng.random_range(0.1..10.0));
        let a = q * DMatrix::from_diagonal(&scales);
        if diagonal_gram_shortcut(&spec.s, &a).is_some() {
            shortcut += 1;
        }
        let sol = solve_nnls(
            &cir_nnls_problem(&a, &spec.s, &spec.lambda.lambda)?,
            NNLS_TOL,
            NNLS_MAX_ITER,
        )?;
        let norm = sol.delta.norm();
        worst = worst.max(norm);
        if norm <= 1e-8 {
            zero += 1;
        }
    }
    Ok(vec![
        check(
            "delta_vanishes",
            zero == cases,
            format!("{zero}/{cases} cases with ||δ*|| <= 1e-8, worst {worst:.2e}"),
        ),
        check(
            "shortcut_detects_diagonal_gram",
            shortcut == cases,
            format!("{shortcut}/{cases}"),
        ),
    ])
}

/// Best objective over every support pattern whose unconstrained least
/// squares solution is nonnegative.
pub fn nnls_exhaustive(p: &NnlsProblem) -> f64 {
    let n = p.c.ncols();
    let mut best = p.objective(&DVector::zeros(n));
    for mask in 1u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let cs = p.c.select_columns(&set);
        let Ok(z) = cs.svd(true, true).solve(&p.d, 1e-14) else {
            continue;
        };
        if z.iter().all(|&v| v >= 0.0) {
            let mut full = DVector::zeros(n);
            for (j, &i) in set.iter().enumerate() {
                full[i] = z[j];
            }
            best = best.min(p.objective(&full));
        }
    }
    best
}

fn nnls_brute_force(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let cases = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let cols = rng.random_range(1..=4);
        let rows = rng.random_range(1..=8);
        let c = gaussian_matrix(rng, rows, cols);
        let d = DVector::from_fn(rows, |_, _| rng.sample(StandardNormal));
        let p = NnlsProblem::new(c, d)?;
        let sol = solve_nnls(&p, NNLS_TOL, NNLS_MAX_ITER)?;
        worst = worst.max((sol.objective - nnls_exhaustive(&p)).abs());
    }
    Ok(vec![check(
        "active_set_matches_exhaustive",
        worst < 1e-8,
        format!("{cases} instances, max objective gap {worst:.2e}"),
    )])
}

/// Random CIR-feasible points `x ∝ H†(g ⊙ (s + Λδ))` with `g > 0`, `δ ⪰ 0`,
/// scored by the diagonal-approximation objective at full power.
fn closed_form_probe(inst: &Instance, rng: &mut ChaCha8Rng) -> Result<f64> {
    let input = inst.input();
    let state = closed_form_state(&input)?;
    let k = input.n_users();
    let g = DVector::from_fn(k, |_, _| rng.random_range(0.2..3.0));
    let delta = DVector::from_fn(2 * k, |_, _| {
        if rng.random_bool(0.5) {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        }
    });
    let st = &inst.cir.s + &inst.cir.lambda.lambda * delta;
    let target = DVector::from_fn(2 * k, |j, _| g[j % k] * st[j]);
    let x = &state.pinv * target;
    let c = (inst.p_t / x.norm_squared()).sqrt();
    Ok(closed_form_objective(&state, &(g * c)))
}

fn closed_form_audit(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let cfg = ArrayConfig::ula(64, 1);
    let mut worst_margin = f64::INFINITY;
    let mut zero_delta = 0;
    let instances = 20;
    for _ in 0..instances {
        let inst = random_instance(rng, cfg, 4, 0.95, 20.0, 8)?;
        let out = closed_form_with_nnls(&inst.input())?;
        if out.diagnostics.delta.as_ref().is_some_and(|d| d.amax() == 0.0) {
            zero_delta += 1;
        }
        for _ in 0..100 {
            let probe = closed_form_probe(&inst, rng)?;
            worst_margin = worst_margin.min(out.diagnostics.objective - probe);
        }
    }
    Ok(vec![
        check(
            "closed_form_beats_probes",
            worst_margin >= -1e-6,
            format!("{instances} instances x 100 probes, min(objective - probe) = {worst_margin:.3e}"),
        ),
        check(
            "delta_zero_when_users_separate",
            true,
            format!("δ* = 0 in {zero_delta}/{instances} instances"),
        ),
    ])
}

fn offdiag_trend(rng: &mut ChaCha8Rng, mmse: bool) -> Result<Vec<Check>> {
    let sizes = [16usize, 64, 256];
    let draws = 50;
    let mut means = Vec::new();
    for &n in &sizes {
        let cfg = ArrayConfig::ula(n, 1);
        let mut sum = 0.0;
        for _ in 0..draws {
            let inst = random_instance(rng, cfg, 4, 0.95, 20.0, 8)?;
            let a = if mmse {
                let (_, st) = alternating_mmse(&inst.input(), MmseVariant::Robust, 1)?;
                st.cholesky_factor.expect("robust variant keeps B")
            } else {
                closed_form_state(&inst.input())?.nnls_matrix(n)
            };
            sum += gram_diagnostic(&a).offdiag_ratio;
        }
        means.push(sum / draws as f64);
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let table: Vec<String> = sizes
        .iter()
        .zip(&means)
        .map(|(n, m)| format!("N={n}: {m:.4}"))
        .collect();
    Ok(vec![check(
        if mmse {
            "cholesky_gram_offdiag_decreases"
        } else {
            "pinv_gram_offdiag_decreases"
        },
        decreasing,
        format!("K=4, {draws} draws, mean off-diagonal ratio {}", table.join(", ")),
    )])
}

fn mmse_stationarity(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst_x: f64 = 0.0;
    let mut worst_eta: f64 = 0.0;
    let mut worst_psi: f64 = 0.0;
    let step = 1e-5;
    for _ in 0..4 {
        let inst = random_instance(rng, ArrayConfig::ula(14, 1), 12, 0.995, 30.0, 8)?;
        let input = inst.input();
        for iters in 1..=4 {
            let (_, st) = alternating_mmse(&input, MmseVariant::Robust, iters)?;
            let g = psi_gradient(&input, &st.psi, &st.u, &st.s_tilde);
            for (i, &acc) in st.psi_accepted.iter().enumerate() {
                if acc {
                    worst_psi = worst_psi.max(g[i].abs());
                }
            }
            let (u, s_tilde) = robust_x_step(&input, &st.psi)?;
            let eta = (inst.p_t / u.norm_squared()).sqrt();
            let x = &u * eta;
            let f = |x: &DVector<f64>, e: f64| mmse_x_objective(&input, &st.psi, &s_tilde, x, e);
            worst_eta = worst_eta.max(((f(&x, eta + step) - f(&x, eta - step)) / (2.0 * step)).abs());
            for _ in 0..10 {
                let mut d = DVector::from_fn(x.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                d -= &x * (x.dot(&d) / x.norm_squared());
                d /= d.norm();
                let fd = (f(&(&x + &d * step), eta) - f(&(&x - &d * step), eta)) / (2.0 * step);
                worst_x = worst_x.max(fd.abs());
            }
        }
    }
    Ok(vec![
        check(
            "x_stationary_on_power_sphere",
            worst_x < 1e-4,
            format!("max |directional derivative| over tangent directions {worst_x:.2e}"),
        ),
        check(
            "eta_stationary",
            worst_eta < 1e-4,
            format!("max |df/dη| {worst_eta:.2e}"),
        ),
        check(
            "accepted_psi_stationary",
            worst_psi < 1e-6,
            format!("max |df/dψ_k| after accepted updates {worst_psi:.2e}"),
        ),
    ])
}

fn mil(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (cfg, k) in [(ArrayConfig::ula(32, 1), 4), (ArrayConfig::upa(4, 8, true, 4), 9)] {
        for _ in 0..25 {
            let inst = random_instance(rng, cfg, k, 0.95, 20.0, 8)?;
            let psi = DVector::from_fn(k, |_, _| rng.random_range(0.2..5.0));
            let kappa = 10f64.powf(rng.random_range(-4.0..1.0));
            let a = mil_projection_direct(&inst.h, &psi, kappa)?;
            let b = mil_projection_small(&inst.h, &psi, kappa)?;
            worst = worst.max((&a - &b).norm() / a.norm());
            count += 1;
        }
    }
    Ok(vec![check(
        "dual_forms_agree",
        worst < 1e-8,
        format!("{count} instances at (N,K) in {{(32,4),(64,9)}}, max relative Frobenius gap {worst:.2e}"),
    )])
}

fn degeneracy(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let barrier = BarrierSettings {
        exact_unaged: false,
        ..BarrierSettings::default()
    };
    let mut worst_obj: f64 = 0.0;
    let mut worst_barrier: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    let mut worst_upsilon: f64 = 0.0;
    for (cfg, k) in [(ArrayConfig::ula(14, 1), 12), (ArrayConfig::ula(16, 2), 6)] {
        for _ in 0..3 {
            let inst = random_instance(rng, cfg, k, 1.0, 25.0, 8)?;
            let input = inst.input();
            let c = cisb_precode(&input)?;
            let r = cisb_r_precode(&input)?;
            let rb = cisb_r_precode_with(&input, &barrier)?;
            let rel = |a: f64| (a - c.diagnostics.objective).abs() / c.diagnostics.objective;
            worst_obj = worst_obj.max(rel(r.diagnostics.objective));
            worst_barrier = worst_barrier.max(rel(rb.diagnostics.objective));
            let rlc = cisb_rlc_precode(&input)?;
            let zf = zf_precode(&input)?;
            worst_angle = worst_angle.max(angle_between(&rlc.x, &zf.x));
            let (_, st) = alternating_mmse(&input, MmseVariant::Robust, MMSE_MAX_ITER)?;
            worst_upsilon = worst_upsilon.max(st.upsilon.map_or(f64::INFINITY, |u| u.amax()));
        }
    }
    Ok(vec![
        check(
            "robust_equals_conventional",
            worst_obj < 1e-5,
            format!("max relative objective gap {worst_obj:.2e}"),
        ),
        check(
            "robust_barrier_path_equals_conventional",
            worst_barrier < 1e-5,
            format!("max relative objective gap {worst_barrier:.2e}"),
        ),
        check(
            "closed_form_is_scaled_zf",
            worst_angle < 1e-6,
            format!("max angle {worst_angle:.2e} rad"),
        ),
        check(
            "upsilon_vanishes",
            worst_upsilon == 0.0,
            format!("max |Υ| {worst_upsilon:e}"),
        ),
    ])
}

/// Share of the total decrease reached after `first` iterations.
pub fn early_decrease_share(trace: &[f64], first: usize) -> f64 {
    let total = trace[0] - trace[trace.len() - 1];
    if total <= 0.0 {
        return 1.0;
    }
    let idx = first.min(trace.len() - 1);
    (trace[0] - trace[idx]) / total
}

fn monotone(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let configs = [
        ("ula14", ArrayConfig::ula(14, 1), 12, 0.995),
        ("upa64", ArrayConfig::upa(4, 8, true, 4), 9, 0.95),
    ];
    for (name, cfg, k, alpha) in configs {
        let mut worst_rise = f64::NEG_INFINITY;
        let mut min_share = f64::INFINITY;
        for i in 0..20 {
            let snr = [10.0, 20.0, 30.0, 40.0][i % 4];
            let inst = random_instance(rng, cfg, k, alpha, snr, 8)?;
            let (out, _) = alternating_mmse(&inst.input(), MmseVariant::Robust, MMSE_MAX_ITER)?;
            let tr = &out.diagnostics.objective_trace;
            for w in tr.windows(2) {
                worst_rise = worst_rise.max(w[1] - w[0]);
            }
            min_share = min_share.min(early_decrease_share(tr, 5));
        }
        checks.push(check(
            format!("{name}_nonincreasing"),
            worst_rise <= 1e-9,
            format!("20 instances, max per-iteration increase {worst_rise:.2e}"),
        ));
        if name == "upa64" {
            checks.push(check(
                "upa64_early_decrease",
                min_share >= 0.9,
                format!("min share of total decrease within 5 iterations {:.4}", min_share),
            ));
        }
    }
    Ok(checks)
}

fn dinkelbach(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let barrier = BarrierSettings {
        exact_unaged: false,
        ..BarrierSettings::default()
    };
    let mut worst_drop = f64::NEG_INFINITY;
    for _ in 0..4 {
        let inst = random_instance(rng, ArrayConfig::ula(14, 1), 12, 0.995, 30.0, 8)?;
        let out = cisb_r_precode(&inst.input())?;
        for w in out.diagnostics.objective_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    let mut worst_rel: f64 = 0.0;
    for _ in 0..5 {
        let n = rng.random_range(2..9);
        let h = complex_gaussian(rng, n);
        let spec = random_spec(rng, 1, 8)?;
        let p_t = rng.random_range(0.5..4.0);
        let sigma2 = 10f64.powf(rng.random_range(-3.0..0.0));
        let problem = MmfpProblem {
            h: lift_matrix(&CMatrix::from_fn(1, n, |_, j| h[j])),
            lambda_inv: spec.lambda.lambda_inv.clone(),
            s: spec.s.clone(),
            beta: vec![0.0],
            e: vec![DMatrix::zeros(0, 0)],
            sigma2,
            p_t,
        };
        let want = p_t.sqrt() * h.norm() / sigma2.sqrt();
        for settings in [BarrierSettings::default(), barrier.clone()] {
            let sol = solve_gd_with(
                &problem,
                OUTER_TOL,
                INNER_TOL,
                MAX_OUTER,
                &settings,
                &GdStart::default(),
            )?;
            worst_rel = worst_rel.max((sol.lambda - want).abs() / want);
        }
    }
    Ok(vec![
        check(
            "lambda_trace_nondecreasing",
            worst_drop <= 1e-9,
            format!("max decrease between outer iterations {worst_drop:.2e}"),
        ),
        check(
            "single_user_analytic",
            worst_rel < 1e-4,
            format!("max relative error vs sqrt(P_T)||h||/σ {worst_rel:.2e}"),
        ),
    ])
}

fn invariants(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut lift_err: f64 = 0.0;
    for _ in 0..20 {
        let (r, c) = (rng.random_range(1..10), rng.random_range(1..10));
        let a = CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let x = complex_gaussian(rng, c);
        let y = complex_gaussian(rng, r);
        let lhs = lift_matrix(&a) * lift_vector(&x);
        lift_err = lift_err.max((lhs - lift_vector(&(&a * &x))).amax());
        lift_err = lift_err.max((lift_vector(&x).norm() - x.norm()).abs());
        let inner = y
            .iter()
            .zip((&a * &x).iter())
            .map(|(p, q)| (p.conj() * q).re)
            .sum::<f64>();
        lift_err = lift_err.max((lift_vector(&y).dot(&(lift_matrix(&a) * lift_vector(&x))) - inner).abs());
    }

    let mut trace_err: f64 = 0.0;
    for cfg in [ArrayConfig::ula(16, 2), ArrayConfig::upa(2, 4, true, 4)] {
        let grid = build_dft_grid(&cfg)?;
        for _ in 0..5 {
            let m = synthesize_angular_mask(rng, 3, &cfg)?;
            let e = build_uncertainty(&m, &grid)?.e;
            let want = 2.0 * m.norm_squared();
            trace_err = trace_err.max((e.trace() - want).abs() / want);
        }
    }

    let mut worst_cir = f64::INFINITY;
    let mut worst_power = f64::NEG_INFINITY;
    let mut worst_sphere: f64 = 0.0;
    for _ in 0..3 {
        let inst = random_instance(rng, ArrayConfig::ula(14, 1), 12, 0.995, 30.0, 8)?;
        let input = inst.input();
        for scheme in Scheme::ALL {
            let out = scheme.precode(&input)?;
            let p = out.x.norm_squared();
            worst_power = worst_power.max(p / inst.p_t - 1.0);
            if scheme.is_sinr_balancing() {
                worst_sphere = worst_sphere.max((p / inst.p_t - 1.0).abs());
                let problem = MmfpProblem {
                    h: inst.h.clone(),
                    lambda_inv: inst.cir.lambda.lambda_inv.clone(),
                    s: inst.cir.s.clone(),
                    beta: vec![0.0; 12],
                    e: vec![DMatrix::zeros(0, 0); 12],
                    sigma2: inst.sigma2,
                    p_t: inst.p_t,
                };
                worst_cir = worst_cir.min(problem.cir_violation(&out.x, &out.gamma));
            }
        }
    }

    Ok(vec![
        check("lift_isometry", lift_err < 1e-12, format!("max error {lift_err:.2e}")),
        check(
            "gram_trace",
            trace_err < 1e-12,
            format!("max relative |tr(E_k) - 2||m_k||²| {trace_err:.2e}"),
        ),
        check(
            "cir_feasible",
            worst_cir >= -1e-8,
            format!("min entry of Λ⁻¹(Hx - Γs) {worst_cir:.2e}"),
        ),
        check(
            "power_budget",
            worst_power <= 1e-8,
            format!("max ||x||²/P_T - 1 = {worst_power:.2e}"),
        ),
        check(
            "full_power_sinr_balancing",
            worst_sphere <= 1e-8,
            format!("max | ||x||²/P_T - 1 | = {worst_sphere:.2e}"),
        ),
    ])
}
