//! Sweep configuration files and the two built-in presets.
//!
//! ```toml
//! [array]
//! geometry = "upa"        # "ula" or "upa"
//! n_v = 4                 # upa only
//! n_h = 8                 # upa only
//! dual_polarized = true   # upa only
//! n_antennas = 14         # ula only
//! fine_factor = 4
//!
//! [users]
//! count = 9
//! modulation = 8
//! clusters = 3            # optional, default 3
//!
//! [sweep]
//! snr_db = [0, 10, 20, 30, 40]
//! alpha = [0.95]
//! slots = 100000          # optional upper bound on slots per point
//! symbols_per_slot = 10   # optional
//! mode = "fixed-alpha"    # optional, or "intra-slot"
//! seed = 1                # optional
//! p_t = 1.0               # optional
//!
//! [schemes]
//! list = ["CISB", "CISB-R", "CIMMSE-R"]
//!
//! [budget]                # optional section
//! max_symbols = 200000
//! target_errors = 500
//! ```

use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::channel::ArrayConfig;
use crate::error::{Result, SlpError};
use crate::precoders::Scheme;
use crate::sim::{AgingMode, Budget, SweepConfig};

pub const DEFAULT_SYMBOLS_PER_SLOT: usize = 10;
pub const DEFAULT_N_SLOTS: usize = 100_000;
pub const DEFAULT_CLUSTERS: usize = 3;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Ula14,
    Upa64,
}

impl FromStr for Preset {
    type Err = SlpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ula14" => Ok(Preset::Ula14),
            "upa64" => Ok(Preset::Upa64),
            _ => Err(SlpError::Config(format!(
                "unknown preset {s:?}, expected ula14 or upa64"
            ))),
        }
    }
}

const PRESET_SCHEMES: [Scheme; 8] = [
    Scheme::Zf,
    Scheme::Mmse,
    Scheme::Cisb,
    Scheme::CisbR,
    Scheme::CisbRlc,
    Scheme::Cimmse,
    Scheme::CimmseR,
    Scheme::CimmseRlc,
];

pub fn preset(p: Preset) -> SweepConfig {
    let (array, n_users, alpha, modulation) = match p {
        Preset::Ula14 => (ArrayConfig::ula(14, 1), 12, 0.995, 8),
        Preset::Upa64 => (ArrayConfig::upa(4, 8, true, 4), 9, 0.95, 8),
    };
    SweepConfig {
        array,
        n_users,
        modulation,
        n_clusters: DEFAULT_CLUSTERS,
        snr_grid_db: (0..=8).map(|i| 5.0 * i as f64).collect(),
        alpha_grid: vec![alpha],
        n_slots: DEFAULT_N_SLOTS,
        symbols_per_slot: DEFAULT_SYMBOLS_PER_SLOT,
        schemes: PRESET_SCHEMES.to_vec(),
        seed: DEFAULT_SEED,
        mode: AgingMode::FixedAlpha,
        budget: Budget::default(),
        p_t: 1.0,
    }
}

fn section<'a>(root: &'a Table, name: &str) -> Result<&'a Table> {
    match root.get(name) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(SlpError::Config(format!("[{name}] must be a table"))),
        None => Err(SlpError::Config(format!("missing section [{name}]"))),
    }
}

fn type_error(sec: &str, key: &str, expected: &str) -> SlpError {
    SlpError::Config(format!("key {sec}.{key}: expected {expected}"))
}

fn get_uint(t: &Table, sec: &str, key: &str) -> Result<Option<u64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(_) => Err(type_error(sec, key, "nonnegative integer")),
    }
}

fn req_uint(t: &Table, sec: &str, key: &str) -> Result<u64> {
    get_uint(t, sec, key)?.ok_or_else(|| SlpError::Config(format!("missing key {sec}.{key}")))
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn get_float(t: &Table, sec: &str, key: &str) -> Result<Option<f64>> {
    t.get(key)
        .map(|v| as_float(v).ok_or_else(|| type_error(sec, key, "number")))
        .transpose()
}

fn get_bool(t: &Table, sec: &str, key: &str) -> Result<Option<bool>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Boolean(b)) => Ok(Some(*b)),
        Some(_) => Err(type_error(sec, key, "boolean")),
    }
}

fn get_str<'a>(t: &'a Table, sec: &str, key: &str) -> Result<Option<&'a str>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(type_error(sec, key, "string")),
    }
}

fn req_float_array(t: &Table, sec: &str, key: &str) -> Result<Vec<f64>> {
    match t.get(key) {
        None => Err(SlpError::Config(format!("missing key {sec}.{key}"))),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| as_float(v).ok_or_else(|| type_error(sec, key, "array of numbers")))
            .collect(),
        Some(_) => Err(type_error(sec, key, "array of numbers")),
    }
}

fn parse_array(t: &Table) -> Result<ArrayConfig> {
    let sec = "array";
    let fine = get_uint(t, sec, "fine_factor")?.unwrap_or(1) as usize;
    let geometry = get_str(t, sec, "geometry")?.ok_or_else(|| SlpError::Config("missing key array.geometry".into()))?;
    let cfg = match geometry.to_ascii_lowercase().as_str() {
        "ula" => ArrayConfig::ula(req_uint(t, sec, "n_antennas")? as usize, fine),
        "upa" => {
            let n_v = req_uint(t, sec, "n_v")? as usize;
            let n_h = req_uint(t, sec, "n_h")? as usize;
            let dual = get_bool(t, sec, "dual_polarized")?.unwrap_or(false);
            let cfg = ArrayConfig::upa(n_v, n_h, dual, fine);
            if let Some(n) = get_uint(t, sec, "n_antennas")? {
                if n as usize != cfg.n_antennas {
                    return Err(SlpError::Config(format!(
                        "key array.n_antennas: {n} does not match n_v·n_h·polarizations = {}",
                        cfg.n_antennas
                    )));
                }
            }
            cfg
        }
        other => {
            return Err(type_error(
                sec,
                "geometry",
                &format!("\"ula\" or \"upa\", got {other:?}"),
            ))
        }
    };
    cfg.validate().map_err(|e| SlpError::Config(format!("[array]: {e}")))?;
    Ok(cfg)
}

fn parse_mode(s: &str) -> Result<AgingMode> {
    match s.to_ascii_lowercase().as_str() {
        "fixed-alpha" => Ok(AgingMode::FixedAlpha),
        "intra-slot" => Ok(AgingMode::IntraSlot),
        other => Err(type_error(
            "sweep",
            "mode",
            &format!("\"fixed-alpha\" or \"intra-slot\", got {other:?}"),
        )),
    }
}

/// Parses a config document.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let root: Table = toml::from_str(text).map_err(|e| SlpError::Config(format!("malformed config: {e}")))?;
    for key in ["array", "users", "sweep", "schemes"] {
        section(&root, key)?;
    }
    for key in root.keys() {
        if !["array", "users", "sweep", "schemes", "budget"].contains(&key.as_str()) {
            return Err(SlpError::Config(format!("unknown section [{key}]")));
        }
    }
    let array = parse_array(section(&root, "array")?)?;

    let users = section(&root, "users")?;
    let n_users = req_uint(users, "users", "count")? as usize;
    let modulation = req_uint(users, "users", "modulation")? as usize;
    let n_clusters = get_uint(users, "users", "clusters")?.map_or(DEFAULT_CLUSTERS, |v| v as usize);

    let sweep = section(&root, "sweep")?;
    let snr_grid_db = req_float_array(sweep, "sweep", "snr_db")?;
    let alpha_grid = req_float_array(sweep, "sweep", "alpha")?;
    let n_slots = get_uint(sweep, "sweep", "slots")?.map_or(DEFAULT_N_SLOTS, |v| v as usize);
    let symbols_per_slot =
        get_uint(sweep, "sweep", "symbols_per_slot")?.map_or(DEFAULT_SYMBOLS_PER_SLOT, |v| v as usize);
    let mode = get_str(sweep, "sweep", "mode")?.map_or(Ok(AgingMode::FixedAlpha), parse_mode)?;
    let seed = get_uint(sweep, "sweep", "seed")?.unwrap_or(DEFAULT_SEED);
    let p_t = get_float(sweep, "sweep", "p_t")?.unwrap_or(1.0);

    let schemes_t = section(&root, "schemes")?;
    let schemes = match schemes_t.get("list") {
        None => return Err(SlpError::Config("missing key schemes.list".into())),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| match v {
                Value::String(s) => s
                    .parse::<Scheme>()
                    .map_err(|e| SlpError::Config(format!("key schemes.list: {e}"))),
                _ => Err(type_error("schemes", "list", "array of strings")),
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(type_error("schemes", "list", "array of strings")),
    };

    let mut budget = Budget::default();
    if let Some(b) = root.get("budget") {
        let b = b
            .as_table()
            .ok_or_else(|| SlpError::Config("[budget] must be a table".into()))?;
        if let Some(v) = get_uint(b, "budget", "max_symbols")? {
            budget.max_symbols = v;
        }
        if let Some(v) = get_uint(b, "budget", "target_errors")? {
            budget.target_errors = v;
        }
    }

    let cfg = SweepConfig {
        array,
        n_users,
        modulation,
        n_clusters,
        snr_grid_db,
        alpha_grid,
        n_slots,
        symbols_per_slot,
        schemes,
        seed,
        mode,
        budget,
        p_t,
    };
    cfg.validate().map_err(|e| SlpError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| SlpError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Renders a config back into the file format.
pub fn to_toml(cfg: &SweepConfig) -> String {
    use crate::channel::ArrayGeometry;
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    let mut out = String::from("[array]\n");
    match cfg.array.geometry {
        ArrayGeometry::Ula => {
            out += &format!("geometry = \"ula\"\nn_antennas = {}\n", cfg.array.n_antennas);
        }
        ArrayGeometry::Upa {
            n_v,
            n_h,
            dual_polarized,
        } => {
            out += &format!("geometry = \"upa\"\nn_v = {n_v}\nn_h = {n_h}\ndual_polarized = {dual_polarized}\n");
        }
    }
    out += &format!("fine_factor = {}\n\n", cfg.array.fine_factor);
    out += &format!(
        "[users]\ncount = {}\nmodulation = {}\nclusters = {}\n\n",
        cfg.n_users, cfg.modulation, cfg.n_clusters
    );
    let mode = match cfg.mode {
        AgingMode::FixedAlpha => "fixed-alpha",
        AgingMode::IntraSlot => "intra-slot",
    };
    out += &format!(
        "[sweep]\nsnr_db = [{}]\nalpha = [{}]\nslots = {}\nsymbols_per_slot = {}\nmode = \"{mode}\"\nseed = {}\np_t = {:?}\n\n",
        list(&cfg.snr_grid_db),
        list(&cfg.alpha_grid),
        cfg.n_slots,
        cfg.symbols_per_slot,
        cfg.seed,
        cfg.p_t
    );
    let names: Vec<String> = cfg.schemes.iter().map(|s| format!("\"{s}\"")).collect();
    out += &format!("[schemes]\nlist = [{}]\n\n", names.join(", "));
    out += &format!(
        "[budget]\nmax_symbols = {}\ntarget_errors = {}\n",
        cfg.budget.max_symbols, cfg.budget.target_errors
    );
    out
}

/// SHA-256 over the canonical JSON form of every field that affects results.
pub fn config_hash(cfg: &SweepConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
