//! Monte Carlo link simulation over an SNR × α grid.
//!
//! Each slot draws masks and estimated channels for every user; each
//! downlink symbol of the slot precodes on the channel mean, passes the
//! transmit vector through a freshly aged true channel plus noise, and
//! demodulates after dividing by `γ_k`. All schemes of a grid point see the
//! same channel and symbol draws; noise is drawn per scheme.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    bessel_j0, build_dft_grid, complex_gaussian, evolve_true_channel, stack_rows, synthesize_angular_mask,
    AngularChannelModel, ArrayConfig,
};
use crate::cir::{demodulate, psk_constellation, CirSpec};
use crate::error::{Result, SlpError};
use crate::lift::{build_uncertainty, lift_channel};
use crate::linalg::{unlift_vector, CMatrix, C64};
use crate::maxmin::TraceRow;
use crate::precoders::{gamma_min_metric, Scheme, SlpInput, UncertaintyModel};

/// Slots simulated in parallel between two early-stopping checks. Fixed so
/// that results do not depend on the thread count.
pub const SLOT_BATCH: usize = 16;
/// First zero of `J0`.
const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgingMode {
    /// `α_{k,n} = α` for every symbol of the slot.
    FixedAlpha,
    /// `α_{k,n} = J0(n x₁)` with `x₁` chosen so that `J0(x₁) = α`.
    IntraSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Per-user symbols after which a grid point stops.
    pub max_symbols: u64,
    /// Symbol errors after which a grid point stops early.
    pub target_errors: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_symbols: 200_000,
            target_errors: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub array: ArrayConfig,
    pub n_users: usize,
    pub modulation: usize,
    pub n_clusters: usize,
    pub snr_grid_db: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Upper bound on slots per grid point.
    pub n_slots: usize,
    pub symbols_per_slot: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub mode: AgingMode,
    pub budget: Budget,
    pub p_t: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        if self.n_users == 0 || self.n_users > self.array.n_antennas {
            return Err(SlpError::InvalidArgument(format!(
                "need 1 <= K <= N, got K={} N={}",
                self.n_users, self.array.n_antennas
            )));
        }
        psk_constellation(self.modulation)?;
        if self.n_clusters == 0 {
            return Err(SlpError::InvalidArgument("n_clusters must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.alpha_grid.is_empty() || self.schemes.is_empty() {
            return Err(SlpError::InvalidArgument(
                "SNR grid, α grid and scheme list must be nonempty".into(),
            ));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(SlpError::InvalidArgument("SNR values must be finite".into()));
        }
        if self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(SlpError::InvalidArgument("α values must lie in [0, 1]".into()));
        }
        if self.n_slots == 0 || self.symbols_per_slot == 0 || self.budget.max_symbols == 0 {
            return Err(SlpError::InvalidArgument(
                "n_slots, symbols_per_slot and max_symbols must be positive".into(),
            ));
        }
        if !(self.p_t > 0.0) {
            return Err(SlpError::InvalidArgument("P_T must be positive".into()));
        }
        Ok(())
    }

    /// Slots needed to reach the symbol budget, capped by `n_slots`.
    pub fn slots_per_point(&self) -> usize {
        let per_slot = (self.symbols_per_slot * self.n_users) as u64;
        let need = self.budget.max_symbols.div_ceil(per_slot) as usize;
        need.min(self.n_slots)
    }
}

/// Aggregates of one `(scheme, SNR, α)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub alpha: f64,
    pub ser: f64,
    /// Half-width of the 95% Wilson interval on `ser`.
    pub ser_ci: f64,
    pub mse: f64,
    /// `10 log10` of the mean linear `Γ_min` over symbol vectors.
    pub gamma_min_db: f64,
    pub n_symbols: u64,
}

/// Additional per-point statistics not emitted in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDetail {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub alpha: f64,
    pub n_errors: u64,
    pub mean_power: f64,
    pub max_power: f64,
    pub slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub alpha: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub alpha: f64,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub records: Vec<MetricsRecord>,
    pub details: Vec<PointDetail>,
    pub failures: Vec<FailedCell>,
    pub traces: Vec<SolverTrace>,
}

/// Per-slot accumulators for one scheme.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotOutcome {
    pub symbols: u64,
    pub errors: u64,
    pub sq_dev: f64,
    pub gamma_min_sum: f64,
    pub vectors: u64,
    pub power_sum: f64,
    pub power_max: f64,
}

impl SlotOutcome {
    fn merge(&mut self, o: &SlotOutcome) {
        self.symbols += o.symbols;
        self.errors += o.errors;
        self.sq_dev += o.sq_dev;
        self.gamma_min_sum += o.gamma_min_sum;
        self.vectors += o.vectors;
        self.power_sum += o.power_sum;
        self.power_max = self.power_max.max(o.power_max);
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from the sweep seed and a sequence of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(seed), |acc, &l| mix(acc ^ mix(l)))
}

/// Doppler argument per symbol such that `J0(x₁) = α`.
pub fn doppler_step(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, J0_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `α_{k,n}` for downlink symbol `n = 1, 2, …` of a slot.
pub fn symbol_alpha(mode: AgingMode, alpha: f64, n: usize) -> f64 {
    match mode {
        AgingMode::FixedAlpha => alpha,
        AgingMode::IntraSlot => bessel_j0(n as f64 * doppler_step(alpha)).clamp(0.0, 1.0),
    }
}

/// Mean of squared deviations.
pub fn mse_metric(sq_dev_sum: f64, n_symbols: u64) -> Result<f64> {
    if n_symbols == 0 {
        return Err(SlpError::InvalidArgument("MSE over zero symbols".into()));
    }
    Ok(sq_dev_sum / n_symbols as f64)
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_half_width(errors: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.5;
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = errors as f64 / nf;
    let z2 = z * z;
    z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf)
}

/// Immutable per-sweep data shared by every worker.
struct Context {
    grid: CMatrix,
    constellation: crate::cir::PskConstellation,
}

/// One slot of one grid point for every listed scheme. Channel and symbol
/// draws depend only on `(seed, α, slot)`; noise also on the scheme.
#[allow(clippy::too_many_arguments)]
fn run_slot(
    config: &SweepConfig,
    ctx: &Context,
    snr_db: f64,
    alpha: f64,
    schemes: &[Scheme],
    slot: usize,
    want_trace: bool,
) -> Vec<Result<(SlotOutcome, Option<Vec<TraceRow>>)>> {
    let k = config.n_users;
    let n = config.array.n_antennas;
    let sigma2 = config.p_t * 10f64.powf(-snr_db / 10.0);
    let mut chan_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[1, alpha.to_bits(), slot as u64]));

    let setup = (|| -> Result<_> {
        let mut masks = Vec::with_capacity(k);
        let mut grams = Vec::with_capacity(k);
        let mut norms = Vec::with_capacity(k);
        for _ in 0..k {
            let m = synthesize_angular_mask(&mut chan_rng, config.n_clusters, &config.array)?;
            grams.push(build_uncertainty(&m, &ctx.grid)?.e);
            norms.push(m.norm_squared());
            masks.push(m);
        }
        let model = AngularChannelModel::new(ctx.grid.clone(), masks, &vec![alpha; k])?;
        let estimates: Vec<_> = (0..k)
            .map(|u| model.sample_estimated_channel(u, &mut chan_rng))
            .collect();
        Ok((model.masks, grams, norms, estimates))
    })();
    let (masks, grams, norms, estimates) = match setup {
        Ok(v) => v,
        Err(e) => return schemes.iter().map(|_| Err(clone_err(&e))).collect(),
    };

    let mut uncertainty = match UncertaintyModel::new(vec![0.0; k], grams, norms, n) {
        Ok(u) => u,
        Err(e) => return schemes.iter().map(|_| Err(clone_err(&e))).collect(),
    };
    let mut noise_rngs: Vec<ChaCha8Rng> = schemes
        .iter()
        .map(|s| {
            ChaCha8Rng::seed_from_u64(derive_seed(
                config.seed,
                &[2, snr_db.to_bits(), alpha.to_bits(), slot as u64, *s as u64],
            ))
        })
        .collect();
    let mut acc: Vec<Result<(SlotOutcome, Option<Vec<TraceRow>>)>> =
        schemes.iter().map(|_| Ok((SlotOutcome::default(), None))).collect();

    for sym in 1..=config.symbols_per_slot {
        let a = symbol_alpha(config.mode, alpha, sym);
        let beta = (1.0 - a * a).max(0.0).sqrt();
        uncertainty.beta = vec![beta; k];
        let idx: Vec<usize> = (0..k).map(|_| chan_rng.random_range(0..config.modulation)).collect();
        let cir = match CirSpec::new(&ctx.constellation, &idx) {
            Ok(c) => c,
            Err(e) => return schemes.iter().map(|_| Err(clone_err(&e))).collect(),
        };
        let truth: Result<Vec<_>> = estimates
            .iter()
            .zip(&masks)
            .map(|(h_u, m)| evolve_true_channel(&ctx.grid, h_u, m, a, &mut chan_rng))
            .collect();
        let truth = match truth {
            Ok(t) => t,
            Err(e) => return schemes.iter().map(|_| Err(clone_err(&e))).collect(),
        };
        let h_mean = stack_rows(&truth.iter().map(|t| t.mean.clone()).collect::<Vec<_>>());
        let h_true = stack_rows(&truth.iter().map(|t| t.true_channel.clone()).collect::<Vec<_>>());
        let h = lift_channel(&h_mean);
        let input = SlpInput {
            h: &h,
            cir: &cir,
            uncertainty: &uncertainty,
            sigma2,
            p_t: config.p_t,
        };
        for (si, scheme) in schemes.iter().enumerate() {
            let Ok((out_acc, trace)) = &mut acc[si] else { continue };
            let out = match scheme.precode(&input) {
                Ok(o) => o,
                Err(e) => {
                    acc[si] = Err(e);
                    continue;
                }
            };
            if want_trace && sym == 1 && trace.is_none() && !out.diagnostics.solver_trace.is_empty() {
                *trace = Some(out.diagnostics.solver_trace.clone());
            }
            let x_c = match unlift_vector(&out.x) {
                Ok(v) => v,
                Err(e) => {
                    acc[si] = Err(e);
                    continue;
                }
            };
            let noise = complex_gaussian(&mut noise_rngs[si], k) * C64::new(sigma2.sqrt(), 0.0);
            let y = &h_true * &x_c + noise;
            for u in 0..k {
                let z = y[u] / out.gamma[u];
                if demodulate(z, config.modulation) != idx[u] {
                    out_acc.errors += 1;
                }
                let t = C64::new(out.target[u], out.target[u + k]);
                out_acc.sq_dev += (z - t).norm_sqr();
            }
            out_acc.symbols += k as u64;
            out_acc.vectors += 1;
            out_acc.gamma_min_sum += gamma_min_metric(&out.x, &out.gamma, &uncertainty, sigma2);
            let pw = out.x.norm_squared();
            out_acc.power_sum += pw;
            out_acc.power_max = out_acc.power_max.max(pw);
        }
    }
    acc
}

fn clone_err(e: &SlpError) -> SlpError {
    SlpError::InvalidArgument(e.to_string())
}

/// Runs one slot of one scheme.
pub fn run_trial(config: &SweepConfig, snr_db: f64, alpha: f64, scheme: Scheme, slot: usize) -> Result<SlotOutcome> {
    config.validate()?;
    let ctx = Context {
        grid: build_dft_grid(&config.array)?,
        constellation: psk_constellation(config.modulation)?,
    };
    run_slot(config, &ctx, snr_db, alpha, &[scheme], slot, false)
        .pop()
        .expect("one scheme")
        .map(|(o, _)| o)
}

fn finish(
    scheme: Scheme,
    snr_db: f64,
    alpha: f64,
    acc: &SlotOutcome,
    slots: usize,
) -> Result<(MetricsRecord, PointDetail)> {
    let mse = mse_metric(acc.sq_dev, acc.symbols)?;
    let ser = acc.errors as f64 / acc.symbols as f64;
    let gm = acc.gamma_min_sum / acc.vectors as f64;
    Ok((
        MetricsRecord {
            scheme,
            snr_db,
            alpha,
            ser,
            ser_ci: wilson_half_width(acc.errors, acc.symbols),
            mse,
            gamma_min_db: 10.0 * gm.log10(),
            n_symbols: acc.symbols,
        },
        PointDetail {
            scheme,
            snr_db,
            alpha,
            n_errors: acc.errors,
            mean_power: acc.power_sum / acc.vectors as f64,
            max_power: acc.power_max,
            slots,
        },
    ))
}

/// Runs the full `SNR × α × scheme` grid. A precoder failure marks its grid
/// point as failed and the sweep continues.
pub fn run_sweep(config: &SweepConfig, trace_solver: bool) -> Result<SweepOutcome> {
    config.validate()?;
    let ctx = Context {
        grid: build_dft_grid(&config.array)?,
        constellation: psk_constellation(config.modulation)?,
    };
    let max_slots = config.slots_per_point();
    let mut outcome = SweepOutcome::default();

    for &snr in &config.snr_grid_db {
        for &alpha in &config.alpha_grid {
            let mut active: Vec<Scheme> = dedup(&config.schemes);
            let mut acc: BTreeMap<Scheme, (SlotOutcome, usize)> =
                active.iter().map(|&s| (s, (SlotOutcome::default(), 0))).collect();
            let mut failed: BTreeMap<Scheme, String> = BTreeMap::new();
            let mut slot = 0;
            while slot < max_slots && !active.is_empty() {
                let end = (slot + SLOT_BATCH).min(max_slots);
                let batch: Vec<_> = (slot..end)
                    .into_par_iter()
                    .map(|sl| run_slot(config, &ctx, snr, alpha, &active, sl, trace_solver && sl == 0))
                    .collect();
                for per_slot in batch {
                    for (si, res) in per_slot.into_iter().enumerate() {
                        let scheme = active[si];
                        if failed.contains_key(&scheme) {
                            continue;
                        }
                        match res {
                            Ok((o, trace)) => {
                                let e = acc.get_mut(&scheme).unwrap();
                                e.0.merge(&o);
                                e.1 += 1;
                                if let Some(rows) = trace {
                                    outcome.traces.push(SolverTrace {
                                        scheme,
                                        snr_db: snr,
                                        alpha,
                                        rows,
                                    });
                                }
                            }
                            Err(err) => {
                                failed.insert(scheme, err.to_string());
                            }
                        }
                    }
                }
                slot = end;
                active.retain(|s| {
                    let (a, _) = &acc[s];
                    !failed.contains_key(s)
                        && a.symbols < config.budget.max_symbols
                        && a.errors < config.budget.target_errors
                });
            }
            for (scheme, (a, slots)) in &acc {
                let r = match failed.get(scheme) {
                    Some(msg) => Err(msg.clone()),
                    None => finish(*scheme, snr, alpha, a, *slots).map_err(|e| e.to_string()),
                };
                match r {
                    Ok((rec, det)) => {
                        outcome.records.push(rec);
                        outcome.details.push(det);
                    }
                    Err(message) => outcome.failures.push(FailedCell {
                        scheme: *scheme,
                        snr_db: snr,
                        alpha,
                        message,
                    }),
                }
            }
        }
    }
    sort_records(&mut outcome.records);
    outcome.details.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    Ok(outcome)
}

/// Orders records by scheme, then SNR, then α.
pub fn sort_records(records: &mut [MetricsRecord]) {
    records.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.alpha.total_cmp(&b.alpha))
    });
}

fn dedup(schemes: &[Scheme]) -> Vec<Scheme> {
    let mut out = Vec::with_capacity(schemes.len());
    for &s in schemes {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(schemes: Vec<Scheme>) -> SweepConfig {
        SweepConfig {
            array: ArrayConfig::ula(8, 1),
            n_users: 4,
            modulation: 8,
            n_clusters: 3,
            snr_grid_db: vec![10.0],
            alpha_grid: vec![0.95],
            n_slots: 40,
            symbols_per_slot: 5,
            schemes,
            seed: 7,
            mode: AgingMode::FixedAlpha,
            budget: Budget {
                max_symbols: 400,
                target_errors: 1_000_000,
            },
            p_t: 1.0,
        }
    }

    #[test]
    fn noiseless_zf_without_aging_is_error_free() {
        let mut cfg = small(vec![Scheme::Zf]);
        cfg.alpha_grid = vec![1.0];
        cfg.snr_grid_db = vec![150.0];
        let out = run_sweep(&cfg, false).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].ser, 0.0);
        assert!(out.records[0].mse < 1e-10);
    }

    #[test]
    fn trials_are_deterministic_and_independent_of_scheme_set() {
        let cfg = small(vec![Scheme::Zf, Scheme::Mmse]);
        let a = run_trial(&cfg, 10.0, 0.95, Scheme::Mmse, 3).unwrap();
        let b = run_trial(&cfg, 10.0, 0.95, Scheme::Mmse, 3).unwrap();
        assert_eq!(a, b);
        let ctx = Context {
            grid: build_dft_grid(&cfg.array).unwrap(),
            constellation: psk_constellation(8).unwrap(),
        };
        let both = run_slot(&cfg, &ctx, 10.0, 0.95, &[Scheme::Zf, Scheme::Mmse], 3, false);
        assert_eq!(both[1].as_ref().unwrap().0, a);
    }

    #[test]
    fn sweep_respects_budget_and_orders_records() {
        let mut cfg = small(vec![Scheme::Mmse, Scheme::Zf]);
        cfg.snr_grid_db = vec![5.0, 0.0];
        let out = run_sweep(&cfg, false).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.records.len(), 4);
        assert_eq!(out.records[0].scheme, Scheme::Zf);
        assert_eq!(out.records[0].snr_db, 0.0);
        for r in &out.records {
            assert_eq!(r.n_symbols, 400);
            assert!((0.0..=1.0).contains(&r.ser));
        }
        for d in &out.details {
            assert!((d.mean_power - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_stops_early_on_error_target() {
        let mut cfg = small(vec![Scheme::Zf]);
        cfg.snr_grid_db = vec![-5.0];
        cfg.budget = Budget {
            max_symbols: 1_000_000,
            target_errors: 20,
        };
        let out = run_sweep(&cfg, false).unwrap();
        let r = &out.records[0];
        assert!(r.n_symbols <= (SLOT_BATCH * 5 * 4) as u64);
        assert!(out.details[0].n_errors >= 20);
    }

    #[test]
    fn doppler_step_inverts_j0() {
        for a in [0.99, 0.95, 0.5, 0.1] {
            assert!((bessel_j0(doppler_step(a)) - a).abs() < 1e-12);
        }
        assert_eq!(doppler_step(1.0), 0.0);
        assert_eq!(symbol_alpha(AgingMode::FixedAlpha, 0.9, 5), 0.9);
        assert!((symbol_alpha(AgingMode::IntraSlot, 0.9, 1) - 0.9).abs() < 1e-12);
        assert!(symbol_alpha(AgingMode::IntraSlot, 0.9, 2) < 0.9);
    }

    #[test]
    fn wilson_interval_known_value() {
        assert!((wilson_half_width(10, 100) - 0.059_57).abs() < 1e-4);
        assert!(wilson_half_width(0, 1000) > 0.0);
        assert!(mse_metric(1.0, 0).is_err());
        assert_eq!(mse_metric(3.0, 4).unwrap(), 0.75);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        let a = derive_seed(1, &[1, 2]);
        assert_ne!(a, derive_seed(1, &[2, 1]));
        assert_ne!(a, derive_seed(2, &[1, 2]));
        assert_eq!(a, derive_seed(1, &[1, 2]));
    }

    #[test]
    fn single_point_sweep_equals_trial_aggregate() {
        let cfg = small(vec![Scheme::CisbRlc]);
        let out = run_sweep(&cfg, false).unwrap();
        let mut acc = SlotOutcome::default();
        for slot in 0..cfg.slots_per_point() {
            acc.merge(&run_trial(&cfg, 10.0, 0.95, Scheme::CisbRlc, slot).unwrap());
        }
        let (rec, _) = finish(Scheme::CisbRlc, 10.0, 0.95, &acc, cfg.slots_per_point()).unwrap();
        assert_eq!(out.records[0], rec);
    }

    #[test]
    fn unit_alpha_received_paths_coincide() {
        let cfg = ArrayConfig::ula(8, 2);
        let grid = build_dft_grid(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mask = synthesize_angular_mask(&mut rng, 3, &cfg).unwrap();
        let h_u = complex_gaussian(&mut rng, 8);
        let x = complex_gaussian(&mut rng, 8);
        let e = evolve_true_channel(&grid, &h_u, &mask, 1.0, &mut rng).unwrap();
        let op = build_uncertainty(&mask, &grid).unwrap();
        let beta = crate::channel::aging_pair(1.0).1;
        let eq_noise = (op.v_bar.transpose() * &e.innovation).dot(&x) * beta;
        let y_mean = e.mean.dot(&x) + eq_noise;
        let y_true = e.true_channel.dot(&x);
        assert!((y_mean - y_true).norm() < 1e-12);
    }

    #[test]
    fn mse_small_cases_and_batch_agreement() {
        assert_eq!(mse_metric(0.0, 10).unwrap(), 0.0);
        let d = C64::new(0.1, 0.0);
        assert!((mse_metric(d.norm_sqr(), 1).unwrap() - 0.01).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let devs = complex_gaussian(&mut rng, 1000);
        let mut streaming = 0.0;
        for z in devs.iter() {
            streaming += z.norm_sqr();
        }
        let mean_re = devs.iter().map(|z| z.re).sum::<f64>() / 1000.0;
        let mean_im = devs.iter().map(|z| z.im).sum::<f64>() / 1000.0;
        let var: f64 = devs
            .iter()
            .map(|z| (z.re - mean_re).powi(2) + (z.im - mean_im).powi(2))
            .sum::<f64>()
            / 1000.0;
        let batch = var + mean_re * mean_re + mean_im * mean_im;
        assert!((mse_metric(streaming, 1000).unwrap() - batch).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small(vec![Scheme::Zf]);
        cfg.n_users = 9;
        assert!(run_sweep(&cfg, false).is_err());
        let mut cfg = small(vec![]);
        cfg.alpha_grid = vec![0.9];
        assert!(cfg.validate().is_err());
        let mut cfg = small(vec![Scheme::Zf]);
        cfg.alpha_grid = vec![1.1];
        assert!(cfg.validate().is_err());
    }
}
