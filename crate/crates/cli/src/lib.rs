//! Commands behind the `slpsim` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slp_core::channel::ArrayConfig;
use slp_core::config::{load_config, preset, Preset};
use slp_core::precoders::Scheme;
use slp_core::report::write_run;
use slp_core::scenario::random_instance;
use slp_core::sim::{run_sweep, SweepConfig};
use slp_core::validate::{run_suite, Suite};
use slp_core::SlpError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const BENCH_N_GRID: [usize; 4] = [16, 32, 64, 128];
pub const BENCH_REPS: usize = 3;
/// Per-symbol budget for CISB-RLC at the largest array.
pub const RLC_BUDGET_MS: f64 = 50.0;

/// Exit status for an error escaping a command.
pub fn exit_code(err: &SlpError) -> i32 {
    match err {
        SlpError::Config(_) | SlpError::Io(_) | SlpError::Csv(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

/// Where a sweep configuration comes from.
#[derive(Debug, Clone)]
pub enum ConfigSource {
    File(PathBuf),
    Preset(Preset),
}

impl ConfigSource {
    pub fn load(&self) -> slp_core::Result<SweepConfig> {
        match self {
            ConfigSource::File(p) => load_config(p),
            ConfigSource::Preset(p) => Ok(preset(*p)),
        }
    }
}

/// Runs a sweep and writes its artifacts under `out_dir`.
pub fn cmd_sweep(source: &ConfigSource, out_dir: &Path, seed: Option<u64>, trace_solver: bool) -> i32 {
    let mut cfg = match source.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let outcome = match run_sweep(&cfg, trace_solver) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let manifest = match write_run(out_dir, &cfg, &outcome) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    for r in &outcome.records {
        println!(
            "{:<10} snr {:>5.1} dB  alpha {:.4}  SER {:.3e}  MSE {:.3e}  Γmin {:>7.2} dB",
            r.scheme.name(),
            r.snr_db,
            r.alpha,
            r.ser,
            r.mse,
            r.gamma_min_db
        );
    }
    println!("wrote {} files to {}", manifest.outputs.len(), out_dir.display());
    if outcome.failures.is_empty() {
        EXIT_OK
    } else {
        for f in &outcome.failures {
            eprintln!(
                "failed cell {} snr {} alpha {}: {}",
                f.scheme.name(),
                f.snr_db,
                f.alpha,
                f.message
            );
        }
        EXIT_NUMERIC
    }
}

/// Runs one validation suite and prints every check.
pub fn cmd_validate(suite: Suite, seed: u64) -> i32 {
    match run_suite(suite, seed) {
        Ok(report) => {
            print!("{report}");
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_NUMERIC
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Mean wall-clock milliseconds per precoder call.
#[derive(Debug, Clone)]
pub struct BenchTable {
    pub n_users: usize,
    pub n_grid: Vec<usize>,
    pub schemes: Vec<Scheme>,
    /// `ms[i][j]` for `n_grid[i]` and `schemes[j]`.
    pub ms: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BenchCheck {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl BenchTable {
    pub fn get(&self, n: usize, scheme: Scheme) -> Option<f64> {
        let i = self.n_grid.iter().position(|&v| v == n)?;
        let j = self.schemes.iter().position(|&s| s == scheme)?;
        Some(self.ms[i][j])
    }

    pub fn checks(&self) -> Vec<BenchCheck> {
        let mut out = vec![BenchCheck {
            label: "rows_match_grid".into(),
            passed: self.ms.len() == self.n_grid.len(),
            detail: format!("{} rows for N grid {:?}", self.ms.len(), self.n_grid),
        }];
        let ratio = |n| Some(self.get(n, Scheme::CimmseRlc)? / self.get(n, Scheme::CimmseR)?);
        if let (Some(lo), Some(hi)) = (ratio(32), ratio(128)) {
            out.push(BenchCheck {
                label: "low_complexity_scaling".into(),
                passed: hi < lo,
                detail: format!("CIMMSE-RLC/CIMMSE-R time ratio {lo:.4} at N=32, {hi:.4} at N=128"),
            });
        }
        if let Some(t) = self.get(128, Scheme::CisbRlc) {
            out.push(BenchCheck {
                label: "cisb_rlc_budget".into(),
                passed: t < RLC_BUDGET_MS,
                detail: format!("CISB-RLC {t:.3} ms per symbol vector at N=128 (budget {RLC_BUDGET_MS} ms)"),
            });
        }
        out
    }
}

impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>5}", "N")?;
        for s in &self.schemes {
            write!(f, " {:>11}", s.name())?;
        }
        writeln!(f)?;
        for (n, row) in self.n_grid.iter().zip(&self.ms) {
            write!(f, "{n:>5}")?;
            for v in row {
                write!(f, " {v:>11.3}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Times every scheme of `cfg` plus the ones the scaling checks need, on
/// ULA arrays of the given sizes with the configured user count.
pub fn bench_table(cfg: &SweepConfig, n_grid: &[usize], reps: usize) -> slp_core::Result<BenchTable> {
    let k = cfg.n_users;
    if let Some(&n) = n_grid.iter().find(|&&n| n < k) {
        return Err(SlpError::Config(format!("bench needs N >= K, got N={n} with K={k}")));
    }
    let mut schemes = cfg.schemes.clone();
    for s in [Scheme::CisbRlc, Scheme::CimmseR, Scheme::CimmseRlc] {
        if !schemes.contains(&s) {
            schemes.push(s);
        }
    }
    let snr = cfg.snr_grid_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let alpha = cfg.alpha_grid[0];
    let mut ms = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
        let array = ArrayConfig::ula(n, cfg.array.fine_factor);
        let instances = (0..reps)
            .map(|_| random_instance(&mut rng, array, k, alpha, snr, cfg.modulation))
            .collect::<slp_core::Result<Vec<_>>>()?;
        let mut row = Vec::with_capacity(schemes.len());
        for &s in &schemes {
            let start = Instant::now();
            for inst in &instances {
                s.precode(&inst.input())?;
            }
            row.push(start.elapsed().as_secs_f64() * 1e3 / reps as f64);
        }
        ms.push(row);
    }
    Ok(BenchTable {
        n_users: k,
        n_grid: n_grid.to_vec(),
        schemes,
        ms,
    })
}

pub fn cmd_bench(source: &ConfigSource) -> i32 {
    let cfg = match source.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let table = match bench_table(&cfg, &BENCH_N_GRID, BENCH_REPS) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    println!("ms per precoder call, K = {}", table.n_users);
    print!("{table}");
    let mut ok = true;
    for c in table.checks() {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.label, c.detail);
        ok &= c.passed;
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SweepConfig {
        let mut cfg = preset(Preset::Ula14);
        cfg.n_users = 2;
        cfg.schemes = vec![Scheme::Zf];
        cfg
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        assert_eq!(exit_code(&SlpError::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&SlpError::Singular("x".into())), EXIT_NUMERIC);
    }

    #[test]
    fn bench_rows_follow_grid() {
        let t = bench_table(&small_cfg(), &[4, 8], 1).unwrap();
        assert_eq!(t.ms.len(), 2);
        assert_eq!(t.schemes.len(), 4);
        assert!(t.ms.iter().flatten().all(|&v| v >= 0.0));
        assert!(t.checks()[0].passed);
        assert!(t.to_string().lines().count() == 3);
    }

    #[test]
    fn bench_rejects_too_few_antennas() {
        let mut cfg = small_cfg();
        cfg.n_users = 6;
        assert!(matches!(bench_table(&cfg, &[4], 1), Err(SlpError::Config(_))));
    }

    #[test]
    fn scaling_checks_read_the_table() {
        let t = BenchTable {
            n_users: 4,
            n_grid: vec![32, 128],
            schemes: vec![Scheme::CisbRlc, Scheme::CimmseR, Scheme::CimmseRlc],
            ms: vec![vec![0.1, 10.0, 2.0], vec![60.0, 100.0, 5.0]],
        };
        let c = t.checks();
        assert!(c[1].passed);
        assert!(!c[2].passed);
    }
}
