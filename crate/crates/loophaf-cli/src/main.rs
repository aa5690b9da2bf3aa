//! Command-line front end.
//!
//! Subcommands wire the library routes to a small JSON file format; every
//! result is a single JSON document on stdout (or `--output`), and errors go
//! to stderr as structured JSON with a documented exit code.

mod config;
mod files;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use loophaf::combinatorial::{
    haf_bruteforce_with_cap, lhaf_bruteforce_with_cap, lhaf_diagonal_with_cap,
};
use loophaf::genfun::{
    lemma_lhaf, lhaf_batch, verify_master_theorem_with_floor, VerificationReport,
};
use loophaf::instances::{random_loop_vector, random_symmetric, rng_from_seed};
use loophaf::matrix::{embed_odd, embed_odd_matrix, paired_extension};
use loophaf::moments::{gaussian_moment_via, mc_moment_estimate, GaussianSpec, MomentRoute};
use loophaf::{Complex64, Error, LoopVector, MultiIndex, SymmetricMatrix};

use config::{resolve, ConfigOverrides, RunConfig};
use files::MatrixFile;

#[derive(Parser)]
#[command(
    name = "loophaf",
    version,
    about = "Hafnians, loop hafnians and Gaussian moments by enumeration, derivative and generating-function routes"
)]
struct Cli {
    /// Thread count for the parallel kernels (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the result JSON to this file instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for randomized subcommands
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hafnian of an even-dimensional matrix file by direct enumeration
    Haf { input: PathBuf },

    /// Loop hafnian of a matrix file with its loop vector
    Lhaf {
        input: PathBuf,
        /// Use the matrix diagonal as the loop vector
        #[arg(long)]
        diagonal_loops: bool,
    },

    /// Loop hafnians of all paired extensions up to a total order, from the
    /// generating function
    Genfun {
        input: PathBuf,
        /// Highest total extension order
        #[arg(long)]
        order: Option<usize>,
    },

    /// Embed an odd-dimensional problem into an even-dimensional one with the
    /// same loop hafnian
    Embed { input: PathBuf },

    /// Cross-check the generating-function, derivative and brute-force routes
    Verify {
        /// Matrix file to verify (omit when using --random)
        input: Option<PathBuf>,
        /// Highest total extension order
        #[arg(long)]
        order: Option<usize>,
        /// Relative tolerance (absolute below the configured floor)
        #[arg(long)]
        tol: Option<f64>,
        /// Verify COUNT seeded random instances of half-dimension M
        #[arg(long, num_args = 2, value_names = ["M", "COUNT"])]
        random: Option<Vec<usize>>,
        /// Include per-instance wall-clock timings in the report
        #[arg(long)]
        timings: bool,
    },

    /// Gaussian joint moment; the file's entries are the covariance and its
    /// loop_vector, when present, the mean
    Moment {
        input: PathBuf,
        /// Power of each variable in the moment product
        #[arg(long, num_args = 1.., required = true)]
        powers: Vec<usize>,
        /// Add a Monte-Carlo estimate with this many samples
        #[arg(long)]
        mc: Option<usize>,
    },

    /// Timing table for the three routes over a fixed seeded instance grid
    Bench {
        #[arg(long, value_enum, default_value_t = BenchSuite::Small)]
        suite: BenchSuite,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchSuite {
    Small,
    Medium,
}

// exit codes: 0 ok, 1 verification failed, 2 malformed input, 3 dimension,
// 4 cap exceeded, 5 missing field, 6 not positive semidefinite
struct CmdError {
    code: i32,
    kind: String,
    message: String,
    hint: Option<String>,
}

impl CmdError {
    fn new(code: i32, kind: &str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind: kind.to_string(),
            message: message.into(),
            hint: None,
        }
    }

    fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }
}

impl From<Error> for CmdError {
    fn from(err: Error) -> Self {
        let (code, kind) = match &err {
            Error::NonSquare { .. } => (2, "non-square"),
            Error::AsymmetryExceedsTolerance { .. } => (2, "asymmetry-exceeds-tolerance"),
            Error::NonFinite { .. } => (2, "non-finite"),
            Error::LengthMismatch { .. } => (3, "length-mismatch"),
            Error::OddDimension { .. } => (3, "odd-dimension"),
            Error::EvenDimension { .. } => (3, "even-dimension"),
            Error::DimensionMismatch { .. } => (3, "dimension-mismatch"),
            Error::DimensionCapExceeded { .. } => (4, "dimension-cap-exceeded"),
            Error::DegreeCapExceeded { .. } => (4, "degree-cap-exceeded"),
            Error::DegreeOutOfRange { .. } => (4, "degree-out-of-range"),
            Error::NotPositiveSemidefinite { .. } => (6, "not-positive-semidefinite"),
            Error::ShapeMismatch { .. }
            | Error::NonzeroConstantTerm
            | Error::ConstantTermNotOne
            | Error::NonUnitConstantTerm
            | Error::NonzeroConstantTermInLinearPart
            | Error::SingularMatrix { .. }
            | Error::NonContractive { .. } => (2, "internal-precondition"),
        };
        CmdError::new(code, kind, err.to_string())
    }
}

impl From<files::SchemaError> for CmdError {
    fn from(err: files::SchemaError) -> Self {
        CmdError::new(2, "schema", err.0)
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let (order_flag, tol_flag) = match &cli.command {
        Command::Genfun { order, .. } => (*order, None),
        Command::Verify { order, tol, .. } => (*order, *tol),
        _ => (None, None),
    };
    let cfg = resolve(ConfigOverrides {
        order: order_flag,
        tol: tol_flag,
        seed: cli.seed,
        threads: cli.threads,
        output: cli.output.clone(),
    });

    #[cfg(feature = "parallel")]
    if let Some(t) = cfg.threads {
        // a failure here means a pool already exists, which only happens in
        // tests driving run() twice; the default pool is fine then
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }

    let outcome = match cli.command {
        Command::Haf { input } => cmd_haf(&input, &cfg),
        Command::Lhaf {
            input,
            diagonal_loops,
        } => cmd_lhaf(&input, diagonal_loops, &cfg),
        Command::Genfun { input, .. } => cmd_genfun(&input, &cfg),
        Command::Embed { input } => cmd_embed(&input, &cfg),
        Command::Verify {
            input,
            random,
            timings,
            ..
        } => {
            return match cmd_verify(input.as_deref(), random.as_deref(), timings, &cfg) {
                Ok((json, passed)) => match emit(&json, &cfg) {
                    Ok(()) => {
                        if passed {
                            0
                        } else {
                            1
                        }
                    }
                    Err(e) => report_error(&e),
                },
                Err(e) => report_error(&e),
            };
        }
        Command::Moment { input, powers, mc } => cmd_moment(&input, &powers, mc, &cfg),
        Command::Bench { suite } => cmd_bench(suite, &cfg),
    };

    match outcome {
        Ok(json) => match emit(&json, &cfg) {
            Ok(()) => 0,
            Err(e) => report_error(&e),
        },
        Err(e) => report_error(&e),
    }
}

fn report_error(err: &CmdError) -> i32 {
    let mut obj = serde_json::json!({
        "error": {
            "code": err.code,
            "kind": err.kind,
            "message": err.message,
        }
    });
    if let Some(hint) = &err.hint {
        obj["error"]["hint"] = serde_json::Value::String(hint.clone());
    }
    eprintln!("{obj}");
    err.code
}

fn emit(json: &str, cfg: &RunConfig) -> Result<(), CmdError> {
    match &cfg.output {
        Some(path) => std::fs::write(path, format!("{json}\n"))
            .map_err(|e| CmdError::new(2, "io", format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn load(path: &std::path::Path) -> Result<MatrixFile, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::new(2, "io", format!("cannot read {}: {e}", path.display())))?;
    Ok(MatrixFile::parse(&text)?)
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CmdError> {
    serde_json::to_string(value).map_err(|e| CmdError::new(2, "io", e.to_string()))
}

#[derive(Serialize)]
struct HafJson {
    haf: [f64; 2],
}

fn cmd_haf(input: &std::path::Path, cfg: &RunConfig) -> Result<String, CmdError> {
    let file = load(input)?;
    let s = file.matrix()?;
    let value = haf_bruteforce_with_cap(&s, cfg.enum_cap)?;
    to_json(&HafJson { haf: pair(value) })
}

#[derive(Serialize)]
struct LhafJson {
    lhaf: [f64; 2],
}

fn cmd_lhaf(
    input: &std::path::Path,
    diagonal_loops: bool,
    cfg: &RunConfig,
) -> Result<String, CmdError> {
    let file = load(input)?;
    let s = file.matrix()?;
    let value = if diagonal_loops {
        lhaf_diagonal_with_cap(&s, cfg.enum_cap)?
    } else {
        let v = file.loop_vector().ok_or_else(|| {
            CmdError::new(5, "missing-field", "input has no loop_vector")
                .with_hint("pass --diagonal-loops to use the matrix diagonal")
        })?;
        lhaf_bruteforce_with_cap(&s, &v, cfg.enum_cap)?
    };
    to_json(&LhafJson { lhaf: pair(value) })
}

#[derive(Serialize)]
struct GenfunValueJson {
    n: Vec<usize>,
    lhaf: [f64; 2],
}

#[derive(Serialize)]
struct GenfunJson {
    m: usize,
    order: usize,
    values: Vec<GenfunValueJson>,
}

fn cmd_genfun(input: &std::path::Path, cfg: &RunConfig) -> Result<String, CmdError> {
    let file = load(input)?;
    let s = file.matrix()?;
    if s.dim() % 2 != 0 {
        return Err(CmdError::from(Error::OddDimension { dim: s.dim() })
            .with_hint("use the embed subcommand to lift to an even dimension"));
    }
    let v = file.loop_vector().unwrap_or_else(|| LoopVector::zero(s.dim()));
    let batch = lhaf_batch(&s, &v, cfg.order)?;
    let values = batch
        .iter()
        .map(|(counts, value)| GenfunValueJson {
            n: counts.counts().to_vec(),
            lhaf: pair(*value),
        })
        .collect();
    to_json(&GenfunJson {
        m: batch.m(),
        order: batch.order(),
        values,
    })
}

fn cmd_embed(input: &std::path::Path, _cfg: &RunConfig) -> Result<String, CmdError> {
    let file = load(input)?;
    let s = file.matrix()?;
    let out = match file.loop_vector() {
        Some(v) => {
            let (es, ev) = embed_odd(&s, &v)?;
            MatrixFile::from_parts(&es, Some(&ev))
        }
        None => MatrixFile::from_parts(&embed_odd_matrix(&s)?, None),
    };
    to_json(&out)
}

#[derive(Serialize)]
struct SummaryJson {
    instances: usize,
    order: usize,
    tolerance: f64,
    max_deviation: f64,
    passed: bool,
}

#[derive(Serialize)]
struct RecordJson {
    instance: usize,
    n: Vec<usize>,
    genfun: [f64; 2],
    lemma: [f64; 2],
    brute: [f64; 2],
    genfun_abs_dev: f64,
    genfun_dev: f64,
    lemma_abs_dev: f64,
    lemma_dev: f64,
}

#[derive(Serialize)]
struct TimingJson {
    instance: usize,
    genfun_ms: f64,
    lemma_ms: f64,
    brute_ms: f64,
}

#[derive(Serialize)]
struct ReportJson {
    summary: SummaryJson,
    records: Vec<RecordJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<Vec<TimingJson>>,
}

fn cmd_verify(
    input: Option<&std::path::Path>,
    random: Option<&[usize]>,
    with_timings: bool,
    cfg: &RunConfig,
) -> Result<(String, bool), CmdError> {
    if 2 * cfg.order > cfg.enum_cap {
        return Err(Error::DimensionCapExceeded {
            dim: 2 * cfg.order,
            cap: cfg.enum_cap,
        }
        .into());
    }
    let instances: Vec<(SymmetricMatrix, LoopVector)> = match (input, random) {
        (Some(path), None) => {
            let file = load(path)?;
            let s = file.matrix()?;
            let v = file.loop_vector().unwrap_or_else(|| LoopVector::zero(s.dim()));
            vec![(s, v)]
        }
        (None, Some(args)) => {
            let (m, count) = (args[0], args[1]);
            if m == 0 {
                return Err(CmdError::new(2, "usage", "--random M must be positive"));
            }
            let mut rng = rng_from_seed(cfg.seed);
            (0..count)
                .map(|_| {
                    let s = random_symmetric(2 * m, &mut rng, 0.5);
                    let v = random_loop_vector(2 * m, &mut rng, 0.5);
                    (s, v)
                })
                .collect()
        }
        (Some(_), Some(_)) => {
            return Err(CmdError::new(
                2,
                "usage",
                "pass either an input file or --random, not both",
            ));
        }
        (None, None) => {
            return Err(CmdError::new(
                2,
                "usage",
                "pass an input file or --random M COUNT",
            ));
        }
    };

    let mut reports: Vec<VerificationReport> = Vec::with_capacity(instances.len());
    for (s, v) in &instances {
        reports.push(verify_master_theorem_with_floor(
            s,
            v,
            cfg.order,
            cfg.tol,
            cfg.abs_floor,
        )?);
    }

    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut max_deviation = 0.0f64;
    let mut passed = true;
    for (i, report) in reports.iter().enumerate() {
        max_deviation = max_deviation.max(report.max_deviation);
        passed &= report.passed;
        for r in &report.records {
            records.push(RecordJson {
                instance: i,
                n: r.counts.counts().to_vec(),
                genfun: pair(r.genfun),
                lemma: pair(r.lemma),
                brute: pair(r.brute),
                genfun_abs_dev: r.genfun_abs_dev,
                genfun_dev: r.genfun_dev,
                lemma_abs_dev: r.lemma_abs_dev,
                lemma_dev: r.lemma_dev,
            });
        }
        timings.push(TimingJson {
            instance: i,
            genfun_ms: report.timings.genfun.as_secs_f64() * 1e3,
            lemma_ms: report.timings.lemma.as_secs_f64() * 1e3,
            brute_ms: report.timings.brute.as_secs_f64() * 1e3,
        });
    }

    let json = to_json(&ReportJson {
        summary: SummaryJson {
            instances: instances.len(),
            order: cfg.order,
            tolerance: cfg.tol,
            max_deviation,
            passed,
        },
        records,
        timings: with_timings.then_some(timings),
    })?;
    Ok((json, passed))
}

#[derive(Serialize)]
struct MomentJson {
    moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<f64>,
}

fn cmd_moment(
    input: &std::path::Path,
    powers: &[usize],
    mc: Option<usize>,
    cfg: &RunConfig,
) -> Result<String, CmdError> {
    let file = load(input)?;
    let covariance = file.real_entries()?;
    let mean = file.real_mean()?;
    let spec = GaussianSpec::new(&covariance, mean)?;
    let query = MultiIndex::new(powers.to_vec());
    let route = if query.total() <= cfg.enum_cap {
        MomentRoute::BruteForce
    } else {
        MomentRoute::Lemma
    };
    let moment = gaussian_moment_via(&spec, &query, route)?;
    let (mc_estimate, stderr) = match mc {
        Some(samples) => {
            let (estimate, err) = mc_moment_estimate(&spec, &query, samples, cfg.seed)?;
            (Some(estimate), Some(err))
        }
        None => (None, None),
    };
    to_json(&MomentJson {
        moment,
        mc_estimate,
        stderr,
    })
}

#[derive(Serialize)]
struct BenchEntryJson {
    name: String,
    dim: usize,
    value: [f64; 2],
    millis: f64,
}

#[derive(Serialize)]
struct BenchJson {
    suite: String,
    threads: Option<usize>,
    entries: Vec<BenchEntryJson>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

fn cmd_bench(suite: BenchSuite, cfg: &RunConfig) -> Result<String, CmdError> {
    // the grid is fixed by constant seeds so runs are comparable across
    // machines and thread counts
    const BASE_SEED: u64 = 0x10af;
    let mut entries = Vec::new();

    let haf_dims: &[usize] = match suite {
        BenchSuite::Small => &[8, 10, 12],
        BenchSuite::Medium => &[8, 10, 12, 14, 16],
    };
    for &dim in haf_dims {
        let s = random_symmetric(dim, &mut rng_from_seed(BASE_SEED + dim as u64), 0.5);
        let (value, millis) = timed(|| haf_bruteforce_with_cap(&s, cfg.enum_cap));
        entries.push(BenchEntryJson {
            name: format!("haf_bruteforce dim={dim}"),
            dim,
            value: pair(value?),
            millis,
        });
    }

    let lhaf_dims: &[usize] = match suite {
        BenchSuite::Small => &[9, 11],
        BenchSuite::Medium => &[9, 11, 13, 14],
    };
    for &dim in lhaf_dims {
        let mut rng = rng_from_seed(BASE_SEED + 100 + dim as u64);
        let s = random_symmetric(dim, &mut rng, 0.5);
        let v = random_loop_vector(dim, &mut rng, 0.5);
        let (value, millis) = timed(|| lhaf_bruteforce_with_cap(&s, &v, cfg.enum_cap));
        entries.push(BenchEntryJson {
            name: format!("lhaf_bruteforce dim={dim}"),
            dim,
            value: pair(value?),
            millis,
        });
    }

    let route_grid: &[(usize, usize, Vec<usize>)] = match suite {
        BenchSuite::Small => &[(2, 3, vec![2, 1])],
        BenchSuite::Medium => &[(2, 3, vec![2, 1]), (3, 4, vec![2, 1, 1])],
    };
    for (m, order, counts) in route_grid {
        let mut rng = rng_from_seed(BASE_SEED + 200 + *m as u64);
        let s = random_symmetric(2 * m, &mut rng, 0.5);
        let v = random_loop_vector(2 * m, &mut rng, 0.5);
        let counts = MultiIndex::new(counts.clone());

        let (batch, millis) = timed(|| lhaf_batch(&s, &v, *order));
        entries.push(BenchEntryJson {
            name: format!("genfun_batch m={m} order={order}"),
            dim: 2 * m,
            value: pair(batch?.value(&counts).expect("grid index within order")),
            millis,
        });

        let (value, millis) = timed(|| lemma_lhaf(&s, &v, &counts.doubled()));
        entries.push(BenchEntryJson {
            name: format!("lemma m={m} counts={counts:?}"),
            dim: 2 * m,
            value: pair(value?),
            millis,
        });

        let (value, millis) = timed(|| -> Result<Complex64, Error> {
            let (es, ev) = paired_extension(&s, &v, &counts)?;
            lhaf_bruteforce_with_cap(&es, &ev, cfg.enum_cap)
        });
        entries.push(BenchEntryJson {
            name: format!("bruteforce_extension m={m} counts={counts:?}"),
            dim: 2 * m,
            value: pair(value?),
            millis,
        });
    }

    to_json(&BenchJson {
        suite: format!("{suite:?}").to_lowercase(),
        threads: cfg.threads,
        entries,
    })
}
