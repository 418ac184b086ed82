//! Artifact emission: metrics CSV, a matplotlib script and the run manifest.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{config_hash, to_toml};
use crate::error::Result;
use crate::maxmin::write_trace_csv;
use crate::sim::{FailedCell, MetricsRecord, SweepConfig, SweepOutcome};

pub const METRICS_HEADER: &str = "scheme,snr_db,alpha,ser,ser_ci,mse,gamma_min_db,n_symbols";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PLOT_FILE: &str = "plot_metrics.py";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const FAILURES_FILE: &str = "failures.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<String>,
    pub failed_cells: usize,
}

pub fn write_metrics_csv<W: Write>(w: W, records: &[MetricsRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wtr.write_record(METRICS_HEADER.split(','))?;
    }
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn write_failures_csv<W: Write>(w: W, failures: &[FailedCell]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for f in failures {
        wtr.serialize(f)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Matplotlib script drawing MSE, SER and `Γ_min` against SNR (one panel
/// per metric, one curve per scheme and α), and against α when the sweep
/// has more than one α.
pub fn plot_script(metrics_file: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{metrics_file}"
rows = list(csv.DictReader(open(path)))
for r in rows:
    for k in ("snr_db", "alpha", "ser", "ser_ci", "mse", "gamma_min_db"):
        r[k] = float(r[k])

metrics = [("mse", "MSE", True), ("ser", "SER", True), ("gamma_min_db", "Gamma_min (dB)", False)]


def panel(key_x, key_group, xlabel, out):
    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
    curves = defaultdict(list)
    for r in rows:
        curves[(r["scheme"], r[key_group])].append(r)
    for (metric, label, logy), ax in zip(metrics, axes):
        for (scheme, g), pts in sorted(curves.items()):
            pts.sort(key=lambda p: p[key_x])
            xs = [p[key_x] for p in pts]
            ys = [p[metric] for p in pts]
            if logy:
                ys = [max(y, 1e-7) for y in ys]
            ax.plot(xs, ys, marker="o", label=f"{{scheme}} ({{key_group}}={{g:g}})")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


panel("snr_db", "alpha", "SNR (dB)", "metrics_vs_snr.png")
if len({{r["alpha"] for r in rows}}) > 1:
    panel("alpha", "snr_db", "alpha", "metrics_vs_alpha.png")
"#
    )
}

/// Writes every artifact of a sweep into `out_dir`.
pub fn write_run(out_dir: &Path, cfg: &SweepConfig, outcome: &SweepOutcome) -> Result<RunManifest> {
    fs::create_dir_all(out_dir)?;
    let mut outputs: Vec<PathBuf> = Vec::new();

    let p = out_dir.join(METRICS_FILE);
    write_metrics_csv(fs::File::create(&p)?, &outcome.records)?;
    outputs.push(p);

    let p = out_dir.join(PLOT_FILE);
    fs::write(&p, plot_script(METRICS_FILE))?;
    outputs.push(p);

    let p = out_dir.join(CONFIG_FILE);
    fs::write(&p, to_toml(cfg))?;
    outputs.push(p);

    if !outcome.failures.is_empty() {
        let p = out_dir.join(FAILURES_FILE);
        write_failures_csv(fs::File::create(&p)?, &outcome.failures)?;
        outputs.push(p);
    }

    for t in &outcome.traces {
        let p = out_dir.join(format!("trace_{}_snr{}_alpha{}.csv", t.scheme, t.snr_db, t.alpha));
        write_trace_csv(fs::File::create(&p)?, &t.rows)?;
        outputs.push(p);
    }

    let manifest_path = out_dir.join(MANIFEST_FILE);
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        failed_cells: outcome.failures.len(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    fs::write(&manifest_path, json)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoders::Scheme;
    use proptest::prelude::*;

    fn record(scheme: Scheme, snr: f64, ser: f64, mse: f64) -> MetricsRecord {
        MetricsRecord {
            scheme,
            snr_db: snr,
            alpha: 0.95,
            ser,
            ser_ci: 1e-3,
            mse,
            gamma_min_db: 12.345_678_901_234,
            n_symbols: 200_000,
        }
    }

    #[test]
    fn header_matches() {
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[record(Scheme::CisbR, 40.0, 1e-5, 0.01)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("CISB-R,40.0,0.95,"));
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), METRICS_HEADER);
    }

    proptest! {
        #[test]
        fn csv_round_trips(
            rows in prop::collection::vec(
                (0usize..9, -20.0f64..60.0, 0.0f64..=1.0, 0.0f64..=1.0, 1e-300f64..1e300, any::<u64>()),
                0..20,
            )
        ) {
            let recs: Vec<MetricsRecord> = rows
                .into_iter()
                .map(|(s, snr, a, ser, mse, n)| MetricsRecord {
                    scheme: Scheme::ALL[s],
                    snr_db: snr,
                    alpha: a,
                    ser,
                    ser_ci: ser / 3.0,
                    mse,
                    gamma_min_db: -snr,
                    n_symbols: n,
                })
                .collect();
            let mut buf = Vec::new();
            write_metrics_csv(&mut buf, &recs).unwrap();
            prop_assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), recs);
        }
    }

    #[test]
    fn write_run_emits_artifacts() {
        let dir = std::env::temp_dir().join(format!("slp_report_{}", std::process::id()));
        let cfg = crate::config::preset(crate::config::Preset::Ula14);
        let outcome = SweepOutcome {
            records: vec![record(Scheme::Zf, 0.0, 0.5, 1.0)],
            failures: vec![FailedCell {
                scheme: Scheme::CisbR,
                snr_db: 0.0,
                alpha: 0.995,
                message: "boom".into(),
            }],
            ..SweepOutcome::default()
        };
        let m = write_run(&dir, &cfg, &outcome).unwrap();
        assert_eq!(m.failed_cells, 1);
        assert_eq!(m.config_hash, config_hash(&cfg));
        let back = read_metrics_csv(fs::File::open(dir.join(METRICS_FILE)).unwrap()).unwrap();
        assert_eq!(back, outcome.records);
        let script = fs::read_to_string(dir.join(PLOT_FILE)).unwrap();
        assert!(script.contains("metrics_vs_snr.png"));
        let parsed: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(parsed, m);
        assert!(dir.join(FAILURES_FILE).exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
