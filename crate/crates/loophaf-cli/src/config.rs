//! Run configuration with the documented precedence:
//! command-line flags, then `LOOPHAF_*` environment variables, then a
//! `loophaf.json` file in the working directory, then built-in defaults.

use std::path::PathBuf;

use serde::Deserialize;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_FLOOR: f64 = 1e-6;
pub const DEFAULT_ENUM_CAP: usize = 20;
pub const DEFAULT_SEED: u64 = 0;
pub const CONFIG_FILE: &str = "loophaf.json";

/// Matrix files are midpoint-symmetrized on ingest; asymmetry beyond this is
/// rejected as malformed input.
pub const INGEST_ASYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub order: usize,
    pub tol: f64,
    pub abs_floor: f64,
    pub enum_cap: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    order: Option<usize>,
    tol: Option<f64>,
    abs_floor: Option<f64>,
    enum_cap: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Option<T> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

/// Flag values (already parsed by clap) layered over environment, file and
/// defaults.
pub struct ConfigOverrides {
    pub order: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

pub fn resolve(overrides: ConfigOverrides) -> RunConfig {
    let file: FileConfig = std::fs::read_to_string(CONFIG_FILE)
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .unwrap_or_default();

    RunConfig {
        order: overrides.order.or(file.order).unwrap_or(DEFAULT_ORDER),
        tol: overrides.tol.or(file.tol).unwrap_or(DEFAULT_TOL),
        abs_floor: file.abs_floor.unwrap_or(DEFAULT_ABS_FLOOR),
        enum_cap: env_parse("LOOPHAF_ENUM_CAP")
            .or(file.enum_cap)
            .unwrap_or(DEFAULT_ENUM_CAP),
        seed: overrides
            .seed
            .or_else(|| env_parse("LOOPHAF_SEED"))
            .or(file.seed)
            .unwrap_or(DEFAULT_SEED),
        threads: overrides
            .threads
            .or_else(|| env_parse("LOOPHAF_THREADS"))
            .or(file.threads),
        output: overrides.output,
    }
}
