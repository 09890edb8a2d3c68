//! Experiment driver behind the `john-extract` binary.
//!
//! Every command writes one JSON artifact carrying the full parsed
//! configuration, the seed and a `generated_at` timestamp. Apart from
//! that timestamp, repeated runs with the same arguments produce identical
//! bytes. `sweep` writes CSV instead, plus a `<name>.config.json` sidecar
//! when given an output path.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use john_extract::cube::{complementation_check, gt_embedding};
use john_extract::decomposition::{default_tolerance, random_tight_frame};
use john_extract::dvoretzky_rogers::{
    contact_select, dr_classical, dr_select, duality_checks, selfadjoint_variant, sharpness_projection,
    walsh_counterexample,
};
use john_extract::extraction::{
    extract_count, extract_main, extract_trace, normalize_operator, restricted_invertibility,
};
use john_extract::john::{john_decomposition_with, mvee, JohnOptions, PointSetFile};
use john_extract::linalg::{orthonormal_basis, projector_onto};
use john_extract::rng::{gaussian_vector, substream};
use john_extract::{
    Decomposition, DecompositionFile, DenseMatrix, Error, ExtractionParams, GtParams, JohnResult, MatrixFile,
};

/// Stream keys for instances generated by the CLI itself.
const GEN_POINTS: u64 = 1 << 50;
const GEN_PROJECTION: u64 = 2 << 50;
const GEN_OPERATOR: u64 = 3 << 50;

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(
    name = "john-extract",
    version,
    about = "Well-conditioned subsystems, John contacts and cube embeddings"
)]
pub struct Cli {
    /// Write the artifact here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    /// Random tight frame of `m` vectors in R^n.
    Frame,
    /// `m` Gaussian points in R^n (one per ± pair).
    Points,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractMode {
    Main,
    Count,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrVariant {
    Select,
    Classical,
    Contact,
    Selfadjoint,
}

/// Where the point set for a John computation comes from.
#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct PointSource {
    /// Point set JSON (`{"dim", "points"}`); random Gaussian points when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Dimension of generated points.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Number of generated points.
    #[arg(long, default_value_t = 18)]
    pub points: usize,
    /// Tolerance on the John identity residual.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Iteration cap for the ellipsoid solver.
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a random tight frame or point set.
    Gen {
        #[arg(long, value_enum, default_value_t = GenKind::Frame)]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
    },
    /// John decomposition of a symmetric point set.
    John {
        #[command(flatten)]
        source: PointSource,
        /// Seed for generated points; recorded even with --input.
        #[arg(long)]
        seed: u64,
    },
    /// Extract a well-conditioned subsystem of a decomposition.
    Extract {
        /// Decomposition JSON (`{"dim", "vectors"}`), or a `john` artifact.
        #[arg(long)]
        input: PathBuf,
        /// Operator JSON (`{"rows", "cols", "entries"}`); identity when absent.
        #[arg(long)]
        operator: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum, default_value_t = ExtractMode::Main)]
        mode: ExtractMode,
        /// Target count for `--mode count`.
        #[arg(long)]
        kappa: Option<usize>,
        /// Residual tolerance when reading the decomposition.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: u64,
    },
    /// Column subset on which an operator is bounded below.
    Rinv {
        /// Matrix JSON; a random normalized `rows x cols` matrix when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        rows: usize,
        #[arg(long, default_value_t = 12)]
        cols: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Dvoretzky–Rogers selections of contact points.
    Dr {
        #[command(flatten)]
        source: PointSource,
        #[arg(long, value_enum, default_value_t = DrVariant::Select)]
        variant: DrVariant,
        /// Rank of the random projection (defaults to n/2, at least 2).
        #[arg(long)]
        rank: Option<usize>,
        /// Number of contacts to select.
        #[arg(long)]
        kappa: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Walsh-matrix example: every ‖z_j‖_X equals n^{-1/2}.
    Walsh {
        #[arg(long)]
        m: u32,
    },
    /// Projection onto the first k Walsh rows.
    Sharpness {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Contact-point embedding of a cube into a projection of the space.
    Cube {
        #[command(flatten)]
        source: PointSource,
        /// Rank of the random projection (defaults to n, i.e. the identity).
        #[arg(long)]
        rank: Option<usize>,
        /// Monte Carlo trials for the Gaussian average and the sampled complementation cross-check.
        #[arg(long, default_value_t = 4000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Size and equivalence constant over a grid of epsilon and seeds (CSV).
    Sweep {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 24)]
        m: usize,
        /// Number of seeds per epsilon, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        epsilons: Vec<f64>,
        #[arg(long)]
        seed: u64,
    },
}

impl Command {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Gen { seed, .. }
            | Command::John { seed, .. }
            | Command::Extract { seed, .. }
            | Command::Rinv { seed, .. }
            | Command::Dr { seed, .. }
            | Command::Cube { seed, .. }
            | Command::Sweep { seed, .. } => Some(*seed),
            Command::Walsh { .. } | Command::Sharpness { .. } => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("ellipsoid solver did not converge: {0}")]
    NonConvergence(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) | CliError::NonConvergence(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateContacts { .. } | Error::Singular => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct Envelope<'a> {
    config: &'a Cli,
    seed: Option<u64>,
    generated_at: String,
    #[serde(flatten)]
    body: Value,
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: malformed JSON: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(v: Value, what: &str, path: &Path) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::Validation(format!("{}: not a {what}: {e}", path.display())))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("artifacts serialize")
}

/// Reads a decomposition file, or the `decomposition` field of a `john` artifact.
fn load_decomposition(path: &Path, tol: Option<f64>) -> CliResult<Decomposition> {
    let mut v = read_json(path)?;
    if v.get("vectors").is_none() {
        if let Some(inner) = v.get_mut("decomposition") {
            v = inner.take();
        }
    }
    let file: DecompositionFile = parse(v, "decomposition", path)?;
    let tol = tol.unwrap_or_else(|| default_tolerance(file.dim));
    Ok(file.into_decomposition(tol)?)
}

fn load_matrix(path: &Path) -> CliResult<DenseMatrix> {
    parse(read_json(path)?, "matrix", path)
}

fn load_points(source: &PointSource, seed: u64) -> CliResult<Vec<Vec<f64>>> {
    match &source.input {
        Some(path) => {
            let file: PointSetFile = parse(read_json(path)?, "point set", path)?;
            Ok(file.validated()?)
        }
        None => {
            if source.n == 0 || source.points < source.n {
                return Err(CliError::Validation(format!(
                    "need points >= n >= 1, got n = {}, points = {}",
                    source.n, source.points
                )));
            }
            let mut rng = substream(seed, GEN_POINTS);
            Ok((0..source.points)
                .map(|_| gaussian_vector(&mut rng, source.n))
                .collect())
        }
    }
}

/// John decomposition, or the partial solver state plus a non-convergence error.
fn john_or_partial(source: &PointSource, seed: u64) -> CliResult<Result<JohnResult, (Value, CliError)>> {
    let points = load_points(source, seed)?;
    let opts = JohnOptions {
        max_iter: source.max_iter,
        ..JohnOptions::new(source.tol)
    };
    match john_decomposition_with(&points, opts) {
        Ok(j) if j.converged => Ok(Ok(j)),
        Ok(j) => {
            let msg = format!(
                "stopped after {} iterations with gap {:.3e}",
                j.mvee_iterations, j.mvee_gap
            );
            Ok(Err((json!({ "partial": to_value(&j) }), CliError::NonConvergence(msg))))
        }
        Err(e @ Error::DegenerateContacts { .. }) => {
            let partial = mvee(&points, opts.mvee_tol, opts.max_iter)?;
            let err = if partial.converged {
                CliError::Numerical(e.to_string())
            } else {
                CliError::NonConvergence(format!("{e} after {} iterations", partial.iterations))
            };
            Ok(Err((
                json!({ "partial": to_value(&partial), "error": e.to_string() }),
                err,
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn random_projection(n: usize, rank: usize, seed: u64) -> CliResult<(DenseMatrix, Vec<Vec<f64>>)> {
    if rank == 0 || rank > n {
        return Err(CliError::Validation(format!("rank must lie in 1..={n}, got {rank}")));
    }
    if rank == n {
        let basis = (0..n).map(|i| john_extract::matrix::unit_vector(n, i)).collect();
        return Ok((DenseMatrix::identity(n), basis));
    }
    let mut rng = substream(seed, GEN_PROJECTION);
    let raw: Vec<Vec<f64>> = (0..rank).map(|_| gaussian_vector(&mut rng, n)).collect();
    let basis = orthonormal_basis(&raw, 1e-10);
    Ok((projector_onto(&basis, n), basis))
}

/// The artifact body, or a partial body and the error to exit with.
type Body = Result<Value, (Value, CliError)>;

fn body(cli: &Cli) -> CliResult<Body> {
    Ok(Ok(match &cli.command {
        Command::Gen { kind, n, m, seed } => match kind {
            GenKind::Frame => to_value(&DecompositionFile::from(&random_tight_frame(*n, *m, *seed)?)),
            GenKind::Points => {
                if *n == 0 {
                    return Err(CliError::Validation("n must be positive".into()));
                }
                let mut rng = substream(*seed, GEN_POINTS);
                let points: Vec<Vec<f64>> = (0..*m).map(|_| gaussian_vector(&mut rng, *n)).collect();
                to_value(&PointSetFile { dim: *n, points })
            }
        },
        Command::John { source, seed } => match john_or_partial(source, *seed)? {
            Ok(j) => json!({
                "result": to_value(&j),
                "decomposition": to_value(&DecompositionFile::from(j.decomposition())),
            }),
            Err(partial) => return Ok(Err(partial)),
        },
        Command::Extract {
            input,
            operator,
            epsilon,
            delta,
            mode,
            kappa,
            tol,
            seed,
        } => {
            let d = load_decomposition(input, *tol)?;
            let t = match operator {
                Some(p) => load_matrix(p)?,
                None => DenseMatrix::identity(d.dim()),
            };
            let mut params = ExtractionParams::new(*epsilon, *seed);
            params.delta = *delta;
            let cert = match mode {
                ExtractMode::Main => extract_main(&d, &t, &params)?,
                ExtractMode::Trace => extract_trace(&d, &t, &params)?,
                ExtractMode::Count => {
                    let k = kappa.ok_or_else(|| CliError::Validation("--mode count needs --kappa".into()))?;
                    extract_count(&d, &t, k, &params)?
                }
            };
            json!({ "result": to_value(&cert) })
        }
        Command::Rinv {
            input,
            rows,
            cols,
            epsilon,
            seed,
        } => {
            let t = match input {
                Some(p) => load_matrix(p)?,
                None => {
                    let mut rng = substream(*seed, GEN_OPERATOR);
                    let raw: Vec<Vec<f64>> = (0..*rows).map(|_| gaussian_vector(&mut rng, *cols)).collect();
                    normalize_operator(&DenseMatrix::from_rows(&raw)?)?.0
                }
            };
            let cert = restricted_invertibility(&t, *epsilon, &ExtractionParams::new(*epsilon, *seed))?;
            json!({ "operator": to_value(&MatrixFile::from(&t)), "result": to_value(&cert) })
        }
        Command::Dr {
            source,
            variant,
            rank,
            kappa,
            epsilon,
            seed,
        } => {
            let john = match john_or_partial(source, *seed)? {
                Ok(j) => j,
                Err(partial) => return Ok(Err(partial)),
            };
            let n = john.dim();
            let rank = rank.unwrap_or((n / 2).max(2).min(n));
            let (p, basis) = random_projection(n, rank, *seed)?;
            let kappa = kappa.unwrap_or(rank.div_ceil(2).min(rank.saturating_sub(1)).max(1));
            let params = ExtractionParams::new(*epsilon, *seed);
            let result = match variant {
                DrVariant::Select => to_value(&dr_select(&john, &p, kappa, &params)?),
                DrVariant::Classical => to_value(&dr_classical(&john, &basis, kappa.min(rank))?),
                DrVariant::Contact => to_value(&contact_select(&john, *epsilon, &params)?),
                DrVariant::Selfadjoint => to_value(&selfadjoint_variant(&john, &p, kappa, &params)?),
            };
            json!({
                "rank": rank,
                "kappa": kappa,
                "projection": to_value(&MatrixFile::from(&p)),
                "duality": to_value(&duality_checks(&john, &p)?),
                "result": result,
            })
        }
        Command::Walsh { m } => json!({ "result": to_value(&walsh_counterexample(*m)?) }),
        Command::Sharpness { n, k } => json!({ "result": to_value(&sharpness_projection(*n, *k)?) }),
        Command::Cube {
            source,
            rank,
            trials,
            seed,
        } => {
            let john = match john_or_partial(source, *seed)? {
                Ok(j) => j,
                Err(partial) => return Ok(Err(partial)),
            };
            let n = john.dim();
            let (p, _) = random_projection(n, rank.unwrap_or(n), *seed)?;
            let mut params = GtParams::new(*seed);
            params.ell_trials = (*trials).max(1000);
            let r = gt_embedding(&john, &p, &params)?;
            let c = complementation_check(&r, &john.space, (*trials / 10).max(100), *seed)?;
            json!({ "result": to_value(&r), "complementation": to_value(&c) })
        }
        Command::Sweep { .. } => unreachable!("sweep writes CSV"),
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub seed: u64,
    pub h: f64,
    pub size: usize,
    pub sigma_over_h: f64,
    pub equivalence_k: f64,
    pub loop_equivalence_k: f64,
}

/// One row per (ε, seed) cell, ε-major in the order given. Cells run in
/// parallel, each from its own seed, and are collected in order.
pub fn sweep_rows(n: usize, m: usize, epsilons: &[f64], seed: u64, seeds: u64) -> Result<Vec<SweepRow>, Error> {
    let cells: Vec<(f64, u64)> = epsilons
        .iter()
        .flat_map(|&e| (seed..seed + seeds).map(move |s| (e, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(e, s)| {
            let d = random_tight_frame(n, m, s)?;
            let t = DenseMatrix::identity(n);
            let cert = extract_main(&d, &t, &ExtractionParams::new(e, s))?;
            Ok(SweepRow {
                epsilon: e,
                seed: s,
                h: cert.h,
                size: cert.sigma.len(),
                sigma_over_h: cert.sigma.len() as f64 / cert.h,
                equivalence_k: cert.achieved_equivalence_k,
                loop_equivalence_k: cert.loop_equivalence_k,
            })
        })
        .collect()
}

fn emit(cli: &Cli, bytes: &[u8]) -> CliResult<()> {
    match &cli.output {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Runs one command and writes its artifact. On a numerical failure a partial
/// artifact is still written before the error is returned.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Sweep {
        n,
        m,
        seeds,
        epsilons,
        seed,
    } = &cli.command
    {
        if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(CliError::Validation(format!("epsilon {e} outside (0, 1)")));
        }
        let rows = sweep_rows(*n, *m, epsilons, *seed, *seeds)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).map_err(|e| CliError::Validation(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Validation(e.to_string()))?;
        emit(cli, &bytes)?;
        // CSV has no room for the config, so it goes next to the table
        if let Some(path) = &cli.output {
            let side = path.with_extension("config.json");
            let env = Envelope {
                config: cli,
                seed: cli.command.seed(),
                generated_at: timestamp(),
                body: serde_json::json!({ "table": path, "rows": rows.len() }),
            };
            let mut text = serde_json::to_string_pretty(&env).expect("artifacts serialize");
            text.push('\n');
            fs::write(&side, text).map_err(|source| CliError::Io { path: side, source })?;
        }
        return Ok(());
    }

    let (body, err) = match body(cli)? {
        Ok(b) => (b, None),
        Err((b, e)) => (b, Some(e)),
    };
    let env = Envelope {
        config: cli,
        seed: cli.command.seed(),
        generated_at: timestamp(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).expect("artifacts serialize");
    text.push('\n');
    emit(cli, text.as_bytes())?;
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Caps the rayon pool from `JOHN_EXTRACT_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("JOHN_EXTRACT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("JOHN_EXTRACT_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Validation("JOHN_EXTRACT_THREADS must be positive".into()));
        }
        // a pool may already exist (tests); keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
