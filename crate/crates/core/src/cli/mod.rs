//! Command-line pipelines over flat files.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data/format error,
//! 4 numerical failure. Every command writes a `<out>.manifest.json`
//! recording the resolved configuration and input/output digests, and
//! every output file carries the manifest digest that produced it.

pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::abstraction::{
    self, abstract_link, lut_inverse_snr, read_models, read_report, report_to_csv, AwgnLut,
    BetaModel, ReportRow,
};
use crate::channels::{self, ChannelError, ScenarioConfig, RNG_ALGORITHM};
use crate::constellation::make_constellation;
use crate::io::{self, FormatError};
use crate::lls::{
    self, default_mcs_table, gen_awgn_lut, mcs_by_index, measure_bler, AwgnGridSpec, LlsConfig,
    McsEntry,
};
use crate::mib::{build_mib_table, GridSpec, IntegrationSpec, MibTable};
use crate::oracle::{beta_scatter, scatter_to_csv, OracleConfig};
use crate::training::{
    fit_beta_model, fit_static_model, measure_training_samples, read_samples_csv, samples_to_csv,
    trace_to_csv,
};
use crate::util::{mean, percentile};
use manifest::{digest_file, write_manifest, ManifestCore};

pub const STATS_SCHEMA: &str = "linkabs/validation-stats/v1";

/// Environment variable for the default worker count.
pub const WORKERS_ENV: &str = "LINKABS_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::mib::MibError> for CliError {
    fn from(e: crate::mib::MibError) -> Self {
        use crate::mib::MibError::*;
        match e {
            GridTooSmall(_) | Constellation(_) => CliError::Usage(e.to_string()),
            NotMonotone(_) | Format(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<crate::lls::LlsError> for CliError {
    fn from(e: crate::lls::LlsError) -> Self {
        use crate::lls::LlsError::*;
        match e {
            InvalidConfig(_) | CandidateSetTooLarge(_) | Constellation(_) => {
                CliError::Usage(e.to_string())
            }
            LengthMismatch { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<crate::oracle::OracleError> for CliError {
    fn from(e: crate::oracle::OracleError) -> Self {
        use crate::oracle::OracleError::*;
        match e {
            CandidateSetTooLarge(_) => CliError::Usage(e.to_string()),
            DegenerateBounds(_) | Bounds(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<crate::abstraction::AbstractionError> for CliError {
    fn from(e: crate::abstraction::AbstractionError) -> Self {
        use crate::abstraction::AbstractionError::*;
        match e {
            EmptyInput => CliError::Usage(e.to_string()),
            Bounds(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<crate::training::TrainingError> for CliError {
    fn from(e: crate::training::TrainingError) -> Self {
        use crate::training::TrainingError::*;
        match e {
            EmptyTrainingSet => CliError::Usage(e.to_string()),
            MaxIterationsExceeded => CliError::Numerical(e.to_string()),
            BadSampleIndex { .. } | Format(_) => CliError::Data(e.to_string()),
            Lls(inner) => inner.into(),
            Abstraction(inner) => inner.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Argument structures
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "linkabs",
    version,
    about = "Instantaneous BLER prediction for interference-aware ML receivers"
)]
pub struct Cli {
    /// Worker thread cap (default: LINKABS_WORKERS or all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded set of fading channel realizations.
    GenChannels(GenChannelsArgs),
    /// Build SNR-to-MIB tables for one or more modulation orders.
    BuildMibTables(BuildMibTablesArgs),
    /// Measure AWGN BLER reference curves for a set of MCS indices.
    GenAwgnLut(GenAwgnLutArgs),
    /// Exact-MIB scatter of optimal combining ratios over a channel set.
    OracleScatter(OracleScatterArgs),
    /// Fit the adaptive (or static) combining-weight model.
    Train(TrainArgs),
    /// Predict BLER over a channel set, optionally measuring it too.
    Abstract(AbstractArgs),
    /// Summarize prediction accuracy of one or more reports.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct GenChannelsArgs {
    /// Scenario config JSON (overrides the individual flags).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub n_rx: usize,
    #[arg(long, default_value_t = 1)]
    pub v1: usize,
    #[arg(long, default_value_t = 1)]
    pub v2: usize,
    #[arg(long, default_value_t = 48)]
    pub subcarriers: usize,
    /// Noise variance (linear).
    #[arg(long, default_value_t = 1.0)]
    pub noise_var: f64,
    /// Interferer amplitude scale.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of realizations.
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildMibTablesArgs {
    /// Modulation orders, e.g. 4,16,64.
    #[arg(long, value_delimiter = ',', default_values_t = [4u32, 16, 64])]
    pub orders: Vec<u32>,
    #[arg(long, default_value_t = -20.0)]
    pub start_db: f64,
    #[arg(long, default_value_t = 30.0)]
    pub stop_db: f64,
    #[arg(long, default_value_t = 0.25)]
    pub step_db: f64,
    /// Gauss-Hermite nodes per axis.
    #[arg(long, default_value_t = 16)]
    pub nodes: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenAwgnLutArgs {
    /// MCS indices, e.g. 9,17.
    #[arg(long, value_delimiter = ',', required = true)]
    pub mcs: Vec<u32>,
    #[arg(long, default_value_t = 48)]
    pub subcarriers: usize,
    #[arg(long, default_value_t = 1)]
    pub v1: usize,
    #[arg(long, default_value_t = -2.0)]
    pub start_db: f64,
    #[arg(long, default_value_t = 14.0)]
    pub stop_db: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step_db: f64,
    #[arg(long, default_value_t = 100)]
    pub min_block_errors: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_blocks: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Raw measurement log CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleScatterArgs {
    /// Channel dump JSON.
    #[arg(long)]
    pub channels: PathBuf,
    /// MIB table CSV for the serving modulation.
    #[arg(long)]
    pub mib_table: PathBuf,
    /// Interferer modulation order.
    #[arg(long, default_value_t = 4)]
    pub mod2: u32,
    /// Override the scenario noise variance with an SNR (dB).
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Noise draws per (bit, candidate) stratum.
    #[arg(long, default_value_t = 500)]
    pub noise_samples: usize,
    /// Serving layer under evaluation (1-based).
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub channels: PathBuf,
    #[arg(long)]
    pub mib_table: PathBuf,
    #[arg(long)]
    pub lut: PathBuf,
    #[arg(long)]
    pub mcs1: u32,
    #[arg(long, default_value_t = 4)]
    pub mod2: u32,
    /// Training SNR points (dB).
    #[arg(long, value_delimiter = ',', default_values_t = [-2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0])]
    pub snrs: Vec<f64>,
    /// Cached measured samples CSV (skips the live link simulation).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub min_block_errors: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_blocks: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fit the constrained static baseline (y0 = y1) instead.
    #[arg(long, default_value_t = false)]
    pub static_model: bool,
    /// Model table CSV (existing rows for other (mcs1, mod2) pairs are kept).
    #[arg(long)]
    pub out: PathBuf,
    /// Search trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Raw measurement log CSV (live source only).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Cache the measured samples to this CSV (live source only).
    #[arg(long)]
    pub cache_samples: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AbstractArgs {
    #[arg(long)]
    pub channels: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub mcs1: u32,
    #[arg(long, default_value_t = 4)]
    pub mod2: u32,
    #[arg(long)]
    pub mib_table: PathBuf,
    #[arg(long)]
    pub lut: PathBuf,
    /// Evaluation SNR points (dB).
    #[arg(long, value_delimiter = ',', required = true)]
    pub snrs: Vec<f64>,
    /// Also measure BLER with the link simulator (fills bler_monte and
    /// sinr_awgn_db).
    #[arg(long, default_value_t = false)]
    pub measure: bool,
    #[arg(long, default_value_t = 100)]
    pub min_block_errors: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_blocks: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Report CSV (repeatable; one stats row per report).
    #[arg(long, required = true)]
    pub report: Vec<PathBuf>,
    /// AWGN LUT used to recover sinr_awgn_db from bler_monte when the
    /// report lacks the column.
    #[arg(long)]
    pub lut: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Parses arguments and runs; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on its own with code 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_workers(cli.workers);
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_workers(flag: Option<usize>) {
    let from_env = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenChannels(args) => cmd_gen_channels(args),
        Command::BuildMibTables(args) => cmd_build_mib_tables(args),
        Command::GenAwgnLut(args) => cmd_gen_awgn_lut(args),
        Command::OracleScatter(args) => cmd_oracle_scatter(args),
        Command::Train(args) => cmd_train(args),
        Command::Abstract(args) => cmd_abstract(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".manifest.json");
    out.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    Ok(())
}

fn load_mcs(k: usize, v1: usize, index: u32) -> Result<McsEntry, CliError> {
    mcs_by_index(&default_mcs_table(k, v1), index)
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("unknown MCS index {index}")))
}

fn load_table_checked(path: &Path, serving_mod: u32) -> Result<MibTable, CliError> {
    let table = MibTable::read_csv(path)?;
    if table.modulation != serving_mod {
        return Err(CliError::Data(format!(
            "{}: table is for modulation {}, serving MCS uses {}",
            path.display(),
            table.modulation,
            serving_mod
        )));
    }
    Ok(table)
}

fn load_lut_checked(path: &Path, mcs1: u32) -> Result<AwgnLut, CliError> {
    let lut = AwgnLut::read_csv(path)?;
    if lut.mcs != mcs1 {
        return Err(CliError::Data(format!(
            "{}: LUT is for MCS {}, expected {}",
            path.display(),
            lut.mcs,
            mcs1
        )));
    }
    Ok(lut)
}

fn find_model(models: &[BetaModel], mcs1: u32, mod2: u32, path: &Path) -> Result<BetaModel, CliError> {
    models
        .iter()
        .find(|m| m.mcs1 == mcs1 && m.mod2 == mod2)
        .copied()
        .ok_or_else(|| {
            CliError::Data(format!(
                "{}: no model row for (mcs1 {mcs1}, mod2 {mod2})",
                path.display()
            ))
        })
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_gen_channels(args: GenChannelsArgs) -> Result<(), CliError> {
    if args.count < 1 {
        return Err(CliError::Usage("--count must be >= 1".to_string()));
    }
    let mut inputs = Vec::new();
    let config = match &args.config {
        Some(path) => {
            let text = io::read_to_string(path)?;
            inputs.push(digest_file(path)?);
            serde_json::from_str::<ScenarioConfig>(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig {
            n_rx: args.n_rx,
            v1: args.v1,
            v2: args.v2,
            n_subcarriers: args.subcarriers,
            noise_var: args.noise_var,
            interferer_scale: args.rho,
            seed: args.seed,
        },
    };
    config.validate()?;
    let core = ManifestCore::new(
        "gen-channels",
        RNG_ALGORITHM,
        Some(config.seed),
        serde_json::json!({ "scenario": config, "count": args.count }),
        inputs,
    );
    let digest = core.digest();
    let set = channels::generate_set(&config, args.count);
    ensure_parent(&args.out)?;
    channels::write_dump(&args.out, &config, &set, Some(&digest))?;
    write_manifest(&manifest_path(&args.out), core, vec![digest_file(&args.out)?])?;
    println!("wrote {} realizations to {}", set.len(), args.out.display());
    Ok(())
}

fn cmd_build_mib_tables(args: BuildMibTablesArgs) -> Result<(), CliError> {
    let grid = GridSpec {
        start_db: args.start_db,
        stop_db: args.stop_db,
        step_db: args.step_db,
    };
    let spec = IntegrationSpec::GaussHermite { nodes: args.nodes };
    let core = ManifestCore::new(
        "build-mib-tables",
        "deterministic",
        None,
        serde_json::json!({
            "orders": args.orders,
            "grid_start_db": grid.start_db,
            "grid_stop_db": grid.stop_db,
            "grid_step_db": grid.step_db,
            "generator": spec.descriptor(),
        }),
        vec![],
    );
    let digest = core.digest();
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let mut outputs = Vec::new();
    for &order in &args.orders {
        let table = build_mib_table(order, &grid, &spec)?;
        let path = args.out_dir.join(format!("mib_{order}.csv"));
        table.write_csv(&path, &[("manifest_digest", digest.clone())])?;
        outputs.push(digest_file(&path)?);
        println!("wrote {}", path.display());
    }
    write_manifest(&args.out_dir.join("mib_tables.manifest.json"), core, outputs)?;
    Ok(())
}

fn cmd_gen_awgn_lut(args: GenAwgnLutArgs) -> Result<(), CliError> {
    let grid = AwgnGridSpec {
        start_db: args.start_db,
        stop_db: args.stop_db,
        step_db: args.step_db,
        min_block_errors: args.min_block_errors,
        max_blocks: args.max_blocks,
    };
    let core = ManifestCore::new(
        "gen-awgn-lut",
        RNG_ALGORITHM,
        Some(args.seed),
        serde_json::json!({
            "mcs": args.mcs,
            "subcarriers": args.subcarriers,
            "v1": args.v1,
            "grid_start_db": grid.start_db,
            "grid_stop_db": grid.stop_db,
            "grid_step_db": grid.step_db,
            "min_block_errors": grid.min_block_errors,
            "max_blocks": grid.max_blocks,
        }),
        vec![],
    );
    let digest = core.digest();
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let mut outputs = Vec::new();
    let mut all_records = Vec::new();
    for &index in &args.mcs {
        let mcs = load_mcs(args.subcarriers, args.v1, index)?;
        let (lut, records) = gen_awgn_lut(&mcs, args.subcarriers * args.v1, &grid, args.seed)?;
        all_records.extend(records);
        let path = args.out_dir.join(format!("lut_mcs{index}.csv"));
        lut.write_csv(
            &path,
            &[
                ("manifest_digest", digest.clone()),
                ("min_block_errors", grid.min_block_errors.to_string()),
                ("max_blocks", grid.max_blocks.to_string()),
            ],
        )?;
        outputs.push(digest_file(&path)?);
        println!("wrote {}", path.display());
    }
    if let Some(log) = &args.log {
        ensure_parent(log)?;
        io::write_file(
            log,
            &lls::measurements_to_csv(&all_records, &[("manifest_digest", digest.clone())]),
        )?;
        outputs.push(digest_file(log)?);
    }
    write_manifest(&args.out_dir.join("awgn_luts.manifest.json"), core, outputs)?;
    Ok(())
}

fn cmd_oracle_scatter(args: OracleScatterArgs) -> Result<(), CliError> {
    let inputs = vec![digest_file(&args.channels)?, digest_file(&args.mib_table)?];
    let (mut scenario, set) = channels::read_dump(&args.channels)?;
    if let Some(snr_db) = args.snr_db {
        scenario.noise_var = crate::util::db_to_linear(-snr_db);
    }
    let table = MibTable::read_csv(&args.mib_table)?;
    let mod1 = make_constellation(table.modulation)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mod2 = make_constellation(args.mod2).map_err(|e| CliError::Usage(e.to_string()))?;
    let config = OracleConfig {
        n_noise_samples: args.noise_samples,
        seed: args.seed,
        layer: args.layer,
    };
    let core = ManifestCore::new(
        "oracle-scatter",
        RNG_ALGORITHM,
        Some(args.seed),
        serde_json::json!({
            "mod1": table.modulation,
            "mod2": args.mod2,
            "noise_var": scenario.noise_var,
            "noise_samples": args.noise_samples,
            "layer": args.layer,
        }),
        inputs,
    );
    let digest = core.digest();
    let result = beta_scatter(&set, &scenario, &table, &mod1, &mod2, &config)?;
    ensure_parent(&args.out)?;
    io::write_file(
        &args.out,
        &scatter_to_csv(&result, &[("manifest_digest", digest.clone())]),
    )?;
    write_manifest(&manifest_path(&args.out), core, vec![digest_file(&args.out)?])?;
    println!(
        "wrote {} points ({} degenerate) to {}",
        result.points.len(),
        result.n_degenerate,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut inputs = vec![
        digest_file(&args.channels)?,
        digest_file(&args.mib_table)?,
        digest_file(&args.lut)?,
    ];
    let (scenario, set) = channels::read_dump(&args.channels)?;
    let mcs = load_mcs(scenario.n_subcarriers, scenario.v1, args.mcs1)?;
    let table = load_table_checked(&args.mib_table, mcs.modulation)?;
    let lut = load_lut_checked(&args.lut, args.mcs1)?;

    let (samples, records) = match &args.samples {
        Some(path) => {
            inputs.push(digest_file(path)?);
            (read_samples_csv(path, &set)?, Vec::new())
        }
        None => measure_training_samples(
            &set,
            &args.snrs,
            &mcs,
            args.mod2,
            &scenario,
            args.min_block_errors,
            args.max_blocks,
            args.seed,
        )?,
    };

    let core = ManifestCore::new(
        "train",
        RNG_ALGORITHM,
        Some(args.seed),
        serde_json::json!({
            "mcs1": args.mcs1,
            "mod2": args.mod2,
            "snrs_db": args.snrs,
            "static": args.static_model,
            "samples": args.samples.as_ref().map(|p| p.display().to_string()),
            "min_block_errors": args.min_block_errors,
            "max_blocks": args.max_blocks,
            "n_samples": samples.len(),
        }),
        inputs,
    );
    let digest = core.digest();

    let fit = if args.static_model {
        fit_static_model(&samples, &table, &lut, args.mcs1, args.mod2)?
    } else {
        fit_beta_model(&samples, &table, &lut, args.mcs1, args.mod2)?
    };
    println!(
        "fitted (y0, y1, beta_min) = ({}, {}, {}) with mse {:.6}",
        fit.model.y0, fit.model.y1, fit.model.beta_min, fit.mse
    );

    // upsert into the model table so reruns are idempotent
    let mut models = if args.out.exists() {
        read_models(&args.out)?
    } else {
        Vec::new()
    };
    models.retain(|m| !(m.mcs1 == args.mcs1 && m.mod2 == args.mod2));
    models.push(fit.model);
    ensure_parent(&args.out)?;
    abstraction::write_models(&args.out, &models, &[("manifest_digest", digest.clone())])?;
    let mut outputs = vec![digest_file(&args.out)?];

    if let Some(path) = &args.trace {
        ensure_parent(path)?;
        io::write_file(
            path,
            &trace_to_csv(&fit.trace, &[("manifest_digest", digest.clone())]),
        )?;
        outputs.push(digest_file(path)?);
    }
    if let Some(path) = &args.log {
        if !records.is_empty() {
            ensure_parent(path)?;
            io::write_file(
                path,
                &lls::measurements_to_csv(&records, &[("manifest_digest", digest.clone())]),
            )?;
            outputs.push(digest_file(path)?);
        }
    }
    if let Some(path) = &args.cache_samples {
        if !records.is_empty() {
            let rows: Vec<(usize, f64, f64)> = set
                .iter()
                .enumerate()
                .flat_map(|(ri, _)| args.snrs.iter().map(move |&s| (ri, s)))
                .zip(samples.iter())
                .map(|((ri, snr), sample)| (ri, snr, sample.bler_monte))
                .collect();
            ensure_parent(path)?;
            io::write_file(
                path,
                &samples_to_csv(&rows, &[("manifest_digest", digest.clone())]),
            )?;
            outputs.push(digest_file(path)?);
        }
    }
    write_manifest(&manifest_path(&args.out), core, outputs)?;
    Ok(())
}

fn cmd_abstract(args: AbstractArgs) -> Result<(), CliError> {
    let mut inputs = vec![
        digest_file(&args.channels)?,
        digest_file(&args.model)?,
        digest_file(&args.mib_table)?,
        digest_file(&args.lut)?,
    ];
    inputs.sort_by(|a, b| a.path.cmp(&b.path));
    let (scenario, set) = channels::read_dump(&args.channels)?;
    let mcs = load_mcs(scenario.n_subcarriers, scenario.v1, args.mcs1)?;
    let table = load_table_checked(&args.mib_table, mcs.modulation)?;
    let lut = load_lut_checked(&args.lut, args.mcs1)?;
    let models = read_models(&args.model)?;
    let model = find_model(&models, args.mcs1, args.mod2, &args.model)?;

    let core = ManifestCore::new(
        "abstract",
        RNG_ALGORITHM,
        Some(args.seed),
        serde_json::json!({
            "mcs1": args.mcs1,
            "mod2": args.mod2,
            "snrs_db": args.snrs,
            "measure": args.measure,
            "min_block_errors": args.min_block_errors,
            "max_blocks": args.max_blocks,
            "model": { "y0": model.y0, "y1": model.y1, "beta_min": model.beta_min },
        }),
        inputs,
    );
    let digest = core.digest();

    let mut rows = Vec::new();
    for (ri, real) in set.iter().enumerate() {
        for &snr_db in &args.snrs {
            let noise_var = crate::util::db_to_linear(-snr_db);
            let out = abstract_link(
                real,
                noise_var,
                args.mcs1,
                mcs.modulation,
                args.mod2,
                &model,
                &table,
                &lut,
            )?;
            let (bler_monte, sinr_awgn_db) = if args.measure {
                let mut config = LlsConfig::new(
                    mcs.clone(),
                    args.mod2,
                    scenario.clone(),
                    args.seed.wrapping_add(ri as u64),
                );
                config.min_block_errors = args.min_block_errors;
                config.max_blocks = args.max_blocks;
                let m = measure_bler(&config, Some(real), snr_db)?;
                (Some(m.bler), Some(lut_inverse_snr(&lut, m.bler)))
            } else {
                (None, None)
            };
            rows.push(ReportRow {
                seed: ri as u64,
                rho: scenario.interferer_scale,
                snr_db,
                mean_isr: out.mean_isr,
                mmib: out.mmib,
                sinr_eff_db: out.sinr_eff_db,
                bler_est: out.bler_est,
                bler_monte,
                sinr_awgn_db,
            });
        }
    }
    ensure_parent(&args.out)?;
    io::write_file(
        &args.out,
        &report_to_csv(&rows, &[("manifest_digest", digest.clone())]),
    )?;
    write_manifest(&manifest_path(&args.out), core, vec![digest_file(&args.out)?])?;
    println!("wrote {} report rows to {}", rows.len(), args.out.display());
    Ok(())
}

/// Accuracy statistics of one report: per-point error
/// `delta = sinr_eff_db - sinr_awgn_db`.
pub struct ValidationStats {
    pub label: String,
    pub n_points: usize,
    pub n_skipped: usize,
    pub rms_db: f64,
    pub mean_db: f64,
    pub p10_db: f64,
    pub p50_db: f64,
    pub p90_db: f64,
    pub max_abs_db: f64,
}

pub fn validation_stats(
    label: &str,
    rows: &[ReportRow],
    lut: Option<&AwgnLut>,
) -> ValidationStats {
    let mut deltas = Vec::new();
    let mut skipped = 0usize;
    for row in rows {
        let sinr_awgn = row.sinr_awgn_db.or_else(|| {
            row.bler_monte
                .and_then(|b| lut.map(|l| lut_inverse_snr(l, b)))
        });
        match sinr_awgn {
            Some(reference) => deltas.push(row.sinr_eff_db - reference),
            None => skipped += 1,
        }
    }
    let abs: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let (rms, mean_v, p10, p50, p90, max_abs) = if deltas.is_empty() {
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    } else {
        (
            (deltas.iter().map(|d| d * d).sum::<f64>() / deltas.len() as f64).sqrt(),
            mean(&deltas),
            percentile(&deltas, 10.0),
            percentile(&deltas, 50.0),
            percentile(&deltas, 90.0),
            abs.iter().cloned().fold(0.0, f64::max),
        )
    };
    ValidationStats {
        label: label.to_string(),
        n_points: deltas.len(),
        n_skipped: skipped,
        rms_db: rms,
        mean_db: mean_v,
        p10_db: p10,
        p50_db: p50,
        p90_db: p90,
        max_abs_db: max_abs,
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    for path in &args.report {
        inputs.push(digest_file(path)?);
    }
    let lut = match &args.lut {
        Some(path) => {
            inputs.push(digest_file(path)?);
            Some(AwgnLut::read_csv(path)?)
        }
        None => None,
    };
    let core = ManifestCore::new(
        "validate",
        "deterministic",
        None,
        serde_json::json!({
            "reports": args.report.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }),
        inputs,
    );
    let digest = core.digest();

    let mut stats_rows = Vec::new();
    for path in &args.report {
        let rows = read_report(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let stats = validation_stats(&label, &rows, lut.as_ref());
        println!(
            "{}: n={} rms={:.3} dB mean={:+.3} dB p50={:+.3} dB max|d|={:.3} dB ({} skipped)",
            stats.label,
            stats.n_points,
            stats.rms_db,
            stats.mean_db,
            stats.p50_db,
            stats.max_abs_db,
            stats.n_skipped
        );
        stats_rows.push(stats);
    }
    let body: Vec<Vec<String>> = stats_rows
        .iter()
        .map(|s| {
            vec![
                s.label.clone(),
                s.n_points.to_string(),
                s.n_skipped.to_string(),
                io::fmt_f64(s.rms_db),
                io::fmt_f64(s.mean_db),
                io::fmt_f64(s.p10_db),
                io::fmt_f64(s.p50_db),
                io::fmt_f64(s.p90_db),
                io::fmt_f64(s.max_abs_db),
            ]
        })
        .collect();
    ensure_parent(&args.out)?;
    io::write_file(
        &args.out,
        &io::render_csv(
            STATS_SCHEMA,
            &[("manifest_digest", digest.clone())],
            &[
                "label",
                "n_points",
                "n_skipped",
                "rms_db",
                "mean_db",
                "p10_db",
                "p50_db",
                "p90_db",
                "max_abs_db",
            ],
            &body,
        ),
    )?;
    write_manifest(&manifest_path(&args.out), core, vec![digest_file(&args.out)?])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_stats_zero_when_prediction_matches() {
        let rows: Vec<ReportRow> = (0..5)
            .map(|i| ReportRow {
                seed: i,
                rho: 1.0,
                snr_db: 2.0,
                mean_isr: 0.5,
                mmib: 0.5,
                sinr_eff_db: 3.0 + i as f64,
                bler_est: 0.1,
                bler_monte: Some(0.1),
                sinr_awgn_db: Some(3.0 + i as f64),
            })
            .collect();
        let stats = validation_stats("t", &rows, None);
        assert_eq!(stats.n_points, 5);
        assert_eq!(stats.rms_db, 0.0);
        assert_eq!(stats.max_abs_db, 0.0);
    }

    #[test]
    fn validation_skips_rows_without_reference() {
        let rows = vec![ReportRow {
            seed: 0,
            rho: 1.0,
            snr_db: 2.0,
            mean_isr: 0.5,
            mmib: 0.5,
            sinr_eff_db: 3.0,
            bler_est: 0.1,
            bler_monte: None,
            sinr_awgn_db: None,
        }];
        let stats = validation_stats("t", &rows, None);
        assert_eq!(stats.n_points, 0);
        assert_eq!(stats.n_skipped, 1);
    }

    #[test]
    fn exit_codes_match_error_kinds() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 4);
    }
}
