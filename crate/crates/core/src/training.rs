//! Directed-search fitting of the combining-weight model against
//! measured BLER.
//!
//! The objective is the summed squared difference of log10 BLER between
//! the prediction pipeline and the measurement, over a set of (channel
//! realization, SNR) samples. The search walks a 0.01-granular lattice:
//! a 2D stage over (y0, y1) with step sizes 1, 0.1, 0.01 (the floor
//! parked at the -1 guard bound), then a 3D stage over
//! (y0, y1, beta_min) at fixed step 0.01. Neighborhoods are scanned in a
//! fixed order with per-axis offsets [0, -step, +step] (y0 outermost,
//! beta_min innermost) and a move is accepted only on strict improvement,
//! first-scanned winner on ties; coordinates are kept as integer lattice
//! units so grid-aligned minima are recovered exactly.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::abstraction::{
    bler_from_lut, combine_mib, AbstractionError, AwgnLut, BetaModel,
};
use crate::bounds::layer_bounds;
use crate::channels::{ChannelRealization, ScenarioConfig};
use crate::io::{self, FormatError};
use crate::lls::{measure_bler, LlsConfig, LlsError, McsEntry, MeasurementRecord};
use crate::mib::MibTable;
use crate::util::{db_to_linear, linear_to_db};

pub const SAMPLES_SCHEMA: &str = "linkabs/training-samples/v1";
const SAMPLES_KIND: &str = "linkabs/training-samples";
pub const TRACE_SCHEMA: &str = "linkabs/search-trace/v1";

/// Lattice granularity of the search (0.01 per unit).
const LATTICE: f64 = 0.01;
/// Guard bounds, in lattice units: |y0|, |y1| <= 3, beta_min in [-1, 1].
const Y_BOUND: i64 = 300;
const BMIN_BOUND: i64 = 100;
/// Floor used while the 3D stage has not run ("no floor"), in units.
const BMIN_OFF: i64 = -100;
/// Move guard for flat or degenerate surfaces.
const MAX_MOVES: usize = 100_000;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("directed search exceeded {MAX_MOVES} moves")]
    MaxIterationsExceeded,
    #[error("sample references realization {index} but the set has {len}")]
    BadSampleIndex { index: usize, len: usize },
    #[error(transparent)]
    Lls(#[from] LlsError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// One measured training point.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub channels: ChannelRealization,
    pub noise_var: f64,
    /// Measured BLER, floored upstream (never zero).
    pub bler_monte: f64,
}

/// Candidate model parameters during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub y0: f64,
    pub y1: f64,
    pub beta_min: f64,
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// Per-sample pipeline inputs that do not depend on the model parameters:
/// (mib_low, mib_up, isr) per (subcarrier, layer), plus the measured
/// log-BLER.
struct PreparedSample {
    points: Vec<(f64, f64, f64)>,
    log_bler_monte: f64,
}

/// Parameter-independent pipeline context for one fit.
pub struct FitContext<'a> {
    table: &'a MibTable,
    lut: &'a AwgnLut,
    prepared: Vec<PreparedSample>,
}

impl<'a> FitContext<'a> {
    /// Precomputes bounds and their MIB mappings for every sample.
    pub fn prepare(
        samples: &[TrainingSample],
        table: &'a MibTable,
        lut: &'a AwgnLut,
    ) -> Result<Self, TrainingError> {
        if samples.is_empty() {
            return Err(TrainingError::EmptyTrainingSet);
        }
        let prepared = samples
            .iter()
            .map(|s| {
                let mut points = Vec::new();
                for sub in &s.channels.subcarriers {
                    for layer in 1..=sub.h1.cols() {
                        let b = layer_bounds(&sub.h1, &sub.h2, s.noise_var, layer)
                            .map_err(AbstractionError::from)?;
                        points.push((
                            table.lookup(b.gamma_mmse),
                            table.lookup(b.gamma_if),
                            b.isr,
                        ));
                    }
                }
                Ok(PreparedSample {
                    points,
                    log_bler_monte: s.bler_monte.log10(),
                })
            })
            .collect::<Result<Vec<_>, TrainingError>>()?;
        Ok(FitContext {
            table,
            lut,
            prepared,
        })
    }

    /// Predicted BLER of one prepared sample under the given parameters.
    fn predict(&self, params: &BetaParams, sample: &PreparedSample) -> f64 {
        let mut sum = 0.0;
        for &(low, up, isr) in &sample.points {
            let beta = ((params.y1 - params.y0) * isr + params.y0)
                .min(1.0)
                .max(params.beta_min);
            sum += combine_mib(low, up, beta);
        }
        let mmib = sum / sample.points.len() as f64;
        let sinr_eff_db = linear_to_db(self.table.inverse(mmib));
        bler_from_lut(self.lut, sinr_eff_db)
    }
}

/// Summed squared log10-BLER prediction error over the samples.
pub fn mse_log_bler(params: &BetaParams, ctx: &FitContext) -> f64 {
    ctx.prepared
        .iter()
        .map(|s| {
            let est = self_floor(ctx.predict(params, s));
            let d = est.log10() - s.log_bler_monte;
            d * d
        })
        .sum()
}

/// The LUT never stores zero BLER, but guard the log anyway.
fn self_floor(bler: f64) -> f64 {
    bler.max(1e-300)
}

// ---------------------------------------------------------------------------
// Lattice descent
// ---------------------------------------------------------------------------

/// One accepted move (or stage marker) of a search.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub stage: &'static str,
    pub step: f64,
    pub y0: f64,
    pub y1: f64,
    pub beta_min: f64,
    pub mse: f64,
}

pub fn lattice_value(units: i64) -> f64 {
    units as f64 * LATTICE
}

fn in_bounds(coord: &[i64; 3]) -> bool {
    coord[0].abs() <= Y_BOUND && coord[1].abs() <= Y_BOUND && coord[2].abs() <= BMIN_BOUND
}

/// Greedy descent on the lattice. `active` marks the coordinates the
/// stage may move; per step size the walk continues until the center is
/// its own neighborhood minimum, then the next (smaller) step begins.
/// Ties go to the first-scanned neighbor; only strict improvements move.
fn lattice_descent(
    objective: &mut dyn FnMut(&[i64; 3]) -> f64,
    start: [i64; 3],
    steps: &[i64],
    active: [bool; 3],
    stage: &'static str,
    trace: &mut Vec<TraceRow>,
) -> Result<([i64; 3], f64), TrainingError> {
    let mut cache: HashMap<[i64; 3], f64> = HashMap::new();
    let eval = |coord: &[i64; 3], cache: &mut HashMap<[i64; 3], f64>,
                    objective: &mut dyn FnMut(&[i64; 3]) -> f64| {
        *cache.entry(*coord).or_insert_with(|| objective(coord))
    };
    let mut here = start;
    let mut best = eval(&here, &mut cache, objective);
    let mut moves = 0usize;
    for &step in steps {
        loop {
            let mut winner: Option<([i64; 3], f64)> = None;
            let offsets = [0i64, -step, step];
            for &d0 in offsets.iter().take(if active[0] { 3 } else { 1 }) {
                for &d1 in offsets.iter().take(if active[1] { 3 } else { 1 }) {
                    for &dm in offsets.iter().take(if active[2] { 3 } else { 1 }) {
                        if d0 == 0 && d1 == 0 && dm == 0 {
                            continue;
                        }
                        let cand = [here[0] + d0, here[1] + d1, here[2] + dm];
                        if !in_bounds(&cand) {
                            continue;
                        }
                        let m = eval(&cand, &mut cache, objective);
                        let threshold = winner.map(|(_, wm)| wm).unwrap_or(best);
                        if m < threshold {
                            winner = Some((cand, m));
                        }
                    }
                }
            }
            match winner {
                Some((cand, m)) => {
                    here = cand;
                    best = m;
                    moves += 1;
                    trace.push(TraceRow {
                        stage,
                        step: lattice_value(step),
                        y0: lattice_value(here[0]),
                        y1: lattice_value(here[1]),
                        beta_min: lattice_value(here[2]),
                        mse: best,
                    });
                    if moves > MAX_MOVES {
                        return Err(TrainingError::MaxIterationsExceeded);
                    }
                }
                None => break,
            }
        }
    }
    Ok((here, best))
}

/// 2D stage: fit (y0, y1) from the origin with the step schedule
/// 1 -> 0.1 -> 0.01 and no floor (beta_min parked at the -1 guard).
pub fn directed_search_2d(
    ctx: &FitContext,
    trace: &mut Vec<TraceRow>,
) -> Result<(f64, f64, f64), TrainingError> {
    directed_search_2d_surface(
        &mut |y0, y1| {
            mse_log_bler(
                &BetaParams {
                    y0,
                    y1,
                    beta_min: lattice_value(BMIN_OFF),
                },
                ctx,
            )
        },
        trace,
    )
}

/// The bare 2D search engine over an arbitrary objective surface,
/// walking the same schedule and scan order as the model fit. Minima
/// aligned to the 0.01 grid are returned exactly.
pub fn directed_search_2d_surface(
    objective: &mut dyn FnMut(f64, f64) -> f64,
    trace: &mut Vec<TraceRow>,
) -> Result<(f64, f64, f64), TrainingError> {
    let mut on_lattice =
        |coord: &[i64; 3]| objective(lattice_value(coord[0]), lattice_value(coord[1]));
    let (coord, mse) = lattice_descent(
        &mut on_lattice,
        [0, 0, BMIN_OFF],
        &[100, 10, 1],
        [true, true, false],
        "2d",
        trace,
    )?;
    Ok((lattice_value(coord[0]), lattice_value(coord[1]), mse))
}

/// 3D stage: refine (y0, y1, beta_min) from `(y0_hat, y1_hat, 0)` at the
/// fixed 0.01 step.
pub fn directed_search_3d(
    ctx: &FitContext,
    start: (f64, f64),
    trace: &mut Vec<TraceRow>,
) -> Result<(BetaParams, f64), TrainingError> {
    let mut objective = |coord: &[i64; 3]| {
        mse_log_bler(
            &BetaParams {
                y0: lattice_value(coord[0]),
                y1: lattice_value(coord[1]),
                beta_min: lattice_value(coord[2]),
            },
            ctx,
        )
    };
    let start_units = [
        (start.0 / LATTICE).round() as i64,
        (start.1 / LATTICE).round() as i64,
        0,
    ];
    let (coord, mse) = lattice_descent(
        &mut objective,
        start_units,
        &[1],
        [true, true, true],
        "3d",
        trace,
    )?;
    Ok((
        BetaParams {
            y0: lattice_value(coord[0]),
            y1: lattice_value(coord[1]),
            beta_min: lattice_value(coord[2]),
        },
        mse,
    ))
}

/// 1D stage for the conventional static baseline: y0 = y1 = beta, no
/// floor, same step schedule as the 2D stage.
pub fn directed_search_static(
    ctx: &FitContext,
    trace: &mut Vec<TraceRow>,
) -> Result<(f64, f64), TrainingError> {
    let mut objective = |coord: &[i64; 3]| {
        let beta = lattice_value(coord[0]);
        mse_log_bler(
            &BetaParams {
                y0: beta,
                y1: beta,
                beta_min: lattice_value(coord[2]),
            },
            ctx,
        )
    };
    let (coord, mse) = lattice_descent(
        &mut objective,
        [0, 0, BMIN_OFF],
        &[100, 10, 1],
        [true, false, false],
        "static",
        trace,
    )?;
    Ok((lattice_value(coord[0]), mse))
}

/// A completed fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: BetaModel,
    pub mse: f64,
    pub trace: Vec<TraceRow>,
}

/// Fits the adaptive model (2D stage then 3D stage) for one
/// (serving MCS, interferer modulation) pair.
pub fn fit_beta_model(
    samples: &[TrainingSample],
    table: &MibTable,
    lut: &AwgnLut,
    mcs1: u32,
    mod2: u32,
) -> Result<FitResult, TrainingError> {
    let ctx = FitContext::prepare(samples, table, lut)?;
    let mut trace = Vec::new();
    let (y0_hat, y1_hat, _mse2d) = directed_search_2d(&ctx, &mut trace)?;
    let (params, mse) = directed_search_3d(&ctx, (y0_hat, y1_hat), &mut trace)?;
    Ok(FitResult {
        model: BetaModel::new(params.y0, params.y1, params.beta_min, mcs1, mod2)?,
        mse,
        trace,
    })
}

/// Fits the constrained static baseline (y0 = y1) on the same data.
pub fn fit_static_model(
    samples: &[TrainingSample],
    table: &MibTable,
    lut: &AwgnLut,
    mcs1: u32,
    mod2: u32,
) -> Result<FitResult, TrainingError> {
    let ctx = FitContext::prepare(samples, table, lut)?;
    let mut trace = Vec::new();
    let (beta, mse) = directed_search_static(&ctx, &mut trace)?;
    Ok(FitResult {
        model: BetaModel::static_model(beta, mcs1, mod2),
        mse,
        trace,
    })
}

pub fn trace_to_csv(trace: &[TraceRow], extra_meta: &[(&str, String)]) -> String {
    let meta: Vec<(&str, String)> = extra_meta.iter().map(|(k, v)| (*k, v.clone())).collect();
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|t| {
            vec![
                t.stage.to_string(),
                io::fmt_f64(t.step),
                io::fmt_f64(t.y0),
                io::fmt_f64(t.y1),
                io::fmt_f64(t.beta_min),
                io::fmt_f64(t.mse),
            ]
        })
        .collect();
    io::render_csv(
        TRACE_SCHEMA,
        &meta,
        &["stage", "step", "y0", "y1", "beta_min", "mse"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// Sample acquisition (live LLS) and caching
// ---------------------------------------------------------------------------

fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Measures BLER for every (realization, SNR) pair with the link-level
/// simulator; this is the live BLER source for training.
#[allow(clippy::too_many_arguments)]
pub fn measure_training_samples(
    channel_set: &[ChannelRealization],
    snrs_db: &[f64],
    mcs: &McsEntry,
    mod2: u32,
    scenario: &ScenarioConfig,
    min_block_errors: usize,
    max_blocks: usize,
    seed: u64,
) -> Result<(Vec<TrainingSample>, Vec<MeasurementRecord>), TrainingError> {
    if channel_set.is_empty() || snrs_db.is_empty() {
        return Err(TrainingError::EmptyTrainingSet);
    }
    let tasks: Vec<(usize, f64)> = channel_set
        .iter()
        .enumerate()
        .flat_map(|(ri, _)| snrs_db.iter().map(move |&s| (ri, s)))
        .collect();
    let results: Vec<Result<(TrainingSample, MeasurementRecord), TrainingError>> = tasks
        .par_iter()
        .enumerate()
        .map(|(task_idx, &(ri, snr_db))| {
            let mut config = LlsConfig::new(
                mcs.clone(),
                mod2,
                scenario.clone(),
                derive_seed(seed, task_idx as u64),
            );
            config.min_block_errors = min_block_errors;
            config.max_blocks = max_blocks;
            let m = measure_bler(&config, Some(&channel_set[ri]), snr_db)?;
            Ok((
                TrainingSample {
                    channels: channel_set[ri].clone(),
                    noise_var: db_to_linear(-snr_db),
                    bler_monte: m.bler,
                },
                MeasurementRecord {
                    seed: config.seed,
                    snr_db,
                    rho: scenario.interferer_scale,
                    mcs: mcs.index,
                    mod2,
                    n_blocks: m.n_blocks,
                    n_errors: m.n_errors,
                    bler: m.bler,
                },
            ))
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        let (s, rec) = r?;
        samples.push(s);
        records.push(rec);
    }
    Ok((samples, records))
}

/// Cached-sample CSV: rows (realization, snr_db, bler).
pub fn samples_to_csv(
    rows: &[(usize, f64, f64)],
    extra_meta: &[(&str, String)],
) -> String {
    let meta: Vec<(&str, String)> = extra_meta.iter().map(|(k, v)| (*k, v.clone())).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(ri, snr, bler)| vec![ri.to_string(), io::fmt_f64(*snr), io::fmt_f64(*bler)])
        .collect();
    io::render_csv(
        SAMPLES_SCHEMA,
        &meta,
        &["realization", "snr_db", "bler"],
        &body,
    )
}

/// Loads cached samples, pairing each row with its realization from the
/// channel set.
pub fn read_samples_csv(
    path: &Path,
    channel_set: &[ChannelRealization],
) -> Result<Vec<TrainingSample>, TrainingError> {
    let doc = io::read_csv(path, SAMPLES_KIND, 1)?;
    let ri_col = doc.column_index("realization")?;
    let snr_col = doc.column_index("snr_db")?;
    let bler_col = doc.column_index("bler")?;
    let mut out = Vec::with_capacity(doc.rows.len());
    for (i, row) in doc.rows.iter().enumerate() {
        let line = i + 2;
        let ri = io::parse_usize(&row[ri_col], &doc.path, line)?;
        if ri >= channel_set.len() {
            return Err(TrainingError::BadSampleIndex {
                index: ri,
                len: channel_set.len(),
            });
        }
        let snr_db = io::parse_f64(&row[snr_col], &doc.path, line)?;
        out.push(TrainingSample {
            channels: channel_set[ri].clone(),
            noise_var: db_to_linear(-snr_db),
            bler_monte: io::parse_f64(&row[bler_col], &doc.path, line)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{abstract_link, AwgnLut, BetaModel};
    use crate::channels::{generate_set, ScenarioConfig};
    use crate::mib::{build_mib_table, GridSpec, IntegrationSpec, MibTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qpsk_table() -> MibTable {
        build_mib_table(
            4,
            &GridSpec {
                start_db: -20.0,
                stop_db: 30.0,
                step_db: 0.5,
            },
            &IntegrationSpec::default(),
        )
        .unwrap()
    }

    fn toy_lut() -> AwgnLut {
        let snr: Vec<f64> = (0..=24).map(|i| -4.0 + 0.75 * i as f64).collect();
        let bler: Vec<f64> = snr
            .iter()
            .map(|s| (10f64.powf(-(s - 1.0) / 1.6)).clamp(1e-5, 1.0))
            .collect();
        AwgnLut::new(9, snr, bler, 42, "test".to_string())
    }

    /// Synthetic samples whose measured BLER comes from the pipeline
    /// itself under a known model, optionally with log-domain noise.
    fn synthetic_samples(
        truth: &BetaModel,
        table: &MibTable,
        lut: &AwgnLut,
        rho_values: &[f64],
        noise_log10: f64,
        seed: u64,
    ) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        for (i, &rho) in rho_values.iter().enumerate() {
            let scenario = ScenarioConfig {
                n_rx: 2,
                v1: 1,
                v2: 1,
                n_subcarriers: 8,
                noise_var: 1.0,
                interferer_scale: rho,
                seed: seed.wrapping_add(i as u64),
            };
            for (j, real) in generate_set(&scenario, 4).into_iter().enumerate() {
                for snr_db in [0.0, 4.0, 8.0] {
                    let noise_var = db_to_linear(-snr_db);
                    let out = abstract_link(&real, noise_var, 9, 4, 4, truth, table, lut)
                        .unwrap();
                    let jitter = if noise_log10 > 0.0 {
                        (rng.random::<f64>() * 2.0 - 1.0) * noise_log10
                    } else {
                        0.0
                    };
                    let bler = 10f64.powf(out.bler_est.log10() + jitter).clamp(1e-8, 1.0);
                    let _ = j;
                    samples.push(TrainingSample {
                        channels: real.clone(),
                        noise_var,
                        bler_monte: bler,
                    });
                }
            }
        }
        samples
    }

    #[test]
    fn mse_zero_when_prediction_matches() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::new(0.2, 0.8, 0.0, 9, 4).unwrap();
        let samples = synthetic_samples(&truth, &table, &lut, &[1.0], 0.0, 1);
        let ctx = FitContext::prepare(&samples, &table, &lut).unwrap();
        let mse = mse_log_bler(
            &BetaParams {
                y0: 0.2,
                y1: 0.8,
                beta_min: 0.0,
            },
            &ctx,
        );
        assert!(mse < 1e-20, "mse {mse}");
    }

    #[test]
    fn mse_counts_log_ratio_squared() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::new(0.3, 0.3, -1.0, 9, 4).unwrap();
        let mut samples = synthetic_samples(&truth, &table, &lut, &[1.0], 0.0, 2);
        samples.truncate(1);
        // offset the measurement by exactly one decade
        samples[0].bler_monte = {
            let ctx = FitContext::prepare(&samples, &table, &lut).unwrap();
            let est = ctx.predict(
                &BetaParams {
                    y0: 0.3,
                    y1: 0.3,
                    beta_min: -1.0,
                },
                &ctx.prepared[0],
            );
            est * 10.0
        };
        let ctx = FitContext::prepare(&samples, &table, &lut).unwrap();
        let mse = mse_log_bler(
            &BetaParams {
                y0: 0.3,
                y1: 0.3,
                beta_min: -1.0,
            },
            &ctx,
        );
        assert!((mse - 1.0).abs() < 1e-9, "mse {mse}");
    }

    #[test]
    fn mse_is_permutation_invariant() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::new(0.1, 0.9, 0.05, 9, 4).unwrap();
        let samples = synthetic_samples(&truth, &table, &lut, &[0.5, 2.0], 0.02, 3);
        let params = BetaParams {
            y0: 0.4,
            y1: 0.6,
            beta_min: 0.0,
        };
        let a = mse_log_bler(&params, &FitContext::prepare(&samples, &table, &lut).unwrap());
        let mut reversed = samples.clone();
        reversed.reverse();
        let b = mse_log_bler(&params, &FitContext::prepare(&reversed, &table, &lut).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    /// Quadratic surface helper for the exactness tests.
    fn quadratic_objective(a: f64, b: f64) -> impl FnMut(&[i64; 3]) -> f64 {
        move |coord: &[i64; 3]| {
            let y0 = lattice_value(coord[0]);
            let y1 = lattice_value(coord[1]);
            (y0 - a).powi(2) + (y1 - b).powi(2)
        }
    }

    #[test]
    fn lattice_descent_exact_on_grid_aligned_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..25 {
            let a = (rng.random_range(-200i64..=200)) as f64 * 0.01;
            let b = (rng.random_range(-200i64..=200)) as f64 * 0.01;
            let mut objective = quadratic_objective(a, b);
            let mut trace = Vec::new();
            let (coord, mse) = lattice_descent(
                &mut objective,
                [0, 0, BMIN_OFF],
                &[100, 10, 1],
                [true, true, false],
                "2d",
                &mut trace,
            )
            .unwrap();
            assert_eq!(lattice_value(coord[0]), a, "a");
            assert_eq!(lattice_value(coord[1]), b, "b");
            assert_eq!(mse, 0.0);
        }
    }

    #[test]
    fn flat_surface_terminates_at_origin() {
        let mut objective = |_: &[i64; 3]| 1.0;
        let mut trace = Vec::new();
        let (coord, _) = lattice_descent(
            &mut objective,
            [0, 0, BMIN_OFF],
            &[100, 10, 1],
            [true, true, false],
            "2d",
            &mut trace,
        )
        .unwrap();
        assert_eq!(coord[0], 0);
        assert_eq!(coord[1], 0);
        assert!(trace.is_empty());
    }

    #[test]
    fn trace_mse_is_strictly_decreasing() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::new(0.1, 0.9, 0.05, 9, 4).unwrap();
        let samples = synthetic_samples(&truth, &table, &lut, &[0.3, 1.0, 3.0], 0.02, 5);
        let fit = fit_beta_model(&samples, &table, &lut, 9, 4).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1].mse < w[0].mse, "{} -> {}", w[0].mse, w[1].mse);
        }
    }

    #[test]
    fn recovers_constant_beta_surface() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::static_model(0.2, 9, 4);
        let samples = synthetic_samples(&truth, &table, &lut, &[0.5, 1.0, 2.0], 0.0, 6);
        let ctx = FitContext::prepare(&samples, &table, &lut).unwrap();
        let mut trace = Vec::new();
        let (y0, y1, mse) = directed_search_2d(&ctx, &mut trace).unwrap();
        let reference = mse_log_bler(
            &BetaParams {
                y0: 0.2,
                y1: 0.2,
                beta_min: -1.0,
            },
            &ctx,
        );
        assert!(
            mse <= reference + 1e-6,
            "mse {mse} vs reference {reference} at ({y0}, {y1})"
        );
    }

    #[test]
    fn recovers_active_floor() {
        let table = qpsk_table();
        let lut = toy_lut();
        // the line dips below the floor for low ISR, so beta_min binds
        let truth = BetaModel::new(-0.2, 0.9, 0.05, 9, 4).unwrap();
        let samples = synthetic_samples(&truth, &table, &lut, &[0.2, 0.5, 1.0, 3.0], 0.0, 7);
        let fit = fit_beta_model(&samples, &table, &lut, 9, 4).unwrap();
        assert!(
            (fit.model.beta_min - 0.05).abs() <= 0.01,
            "beta_min {} vs 0.05",
            fit.model.beta_min
        );
    }

    #[test]
    fn inactive_floor_stays_below_line_minimum() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::new(0.3, 0.8, -1.0, 9, 4).unwrap();
        let samples = synthetic_samples(&truth, &table, &lut, &[0.5, 1.0, 3.0], 0.0, 8);
        let fit = fit_beta_model(&samples, &table, &lut, 9, 4).unwrap();
        // line minimum over [0, 1] is min(y0, y1)
        let line_min = fit.model.y0.min(fit.model.y1);
        assert!(
            fit.model.beta_min <= line_min + 1e-12,
            "floor {} binds above line min {line_min}",
            fit.model.beta_min
        );
    }

    #[test]
    fn start_already_optimal_returns_start() {
        let mut objective = quadratic_objective(0.5, -0.25);
        let mut trace = Vec::new();
        let (coord, _) = lattice_descent(
            &mut objective,
            [50, -25, 0],
            &[1],
            [true, true, true],
            "3d",
            &mut trace,
        )
        .unwrap();
        assert_eq!(coord, [50, -25, 0]);
        assert!(trace.is_empty());
    }

    #[test]
    fn static_fit_never_beats_adaptive() {
        let table = qpsk_table();
        let lut = toy_lut();
        let truth = BetaModel::new(0.1, 0.9, 0.05, 9, 4).unwrap();
        let samples = synthetic_samples(&truth, &table, &lut, &[0.3, 1.0, 3.0], 0.02, 9);
        let adaptive = fit_beta_model(&samples, &table, &lut, 9, 4).unwrap();
        let static_fit = fit_static_model(&samples, &table, &lut, 9, 4).unwrap();
        assert!(
            adaptive.mse <= static_fit.mse + 1e-12,
            "adaptive {} vs static {}",
            adaptive.mse,
            static_fit.mse
        );
    }

    #[test]
    fn empty_inputs_rejected() {
        let table = qpsk_table();
        let lut = toy_lut();
        assert!(matches!(
            fit_beta_model(&[], &table, &lut, 9, 4),
            Err(TrainingError::EmptyTrainingSet)
        ));
        let scenario = ScenarioConfig::default_2x2(1.0, 1.0, 1);
        let mcs = crate::lls::McsEntry::for_frame(9, 4, crate::lls::CodeRate::R12, 48, 1);
        assert!(matches!(
            measure_training_samples(&[], &[0.0], &mcs, 4, &scenario, 20, 100, 1),
            Err(TrainingError::EmptyTrainingSet)
        ));
        let set = generate_set(&scenario, 1);
        assert!(matches!(
            measure_training_samples(&set, &[], &mcs, 4, &scenario, 20, 100, 1),
            Err(TrainingError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn samples_csv_roundtrip() {
        let scenario = ScenarioConfig::default_2x2(1.0, 1.0, 5);
        let set = generate_set(&scenario, 3);
        let rows = vec![(0usize, 2.0, 0.25), (2, 4.0, 0.03125)];
        let dir = std::env::temp_dir().join("linkabs_training_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.csv");
        io::write_file(&path, &samples_to_csv(&rows, &[])).unwrap();
        let samples = read_samples_csv(&path, &set).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].bler_monte, 0.25);
        assert_eq!(samples[1].channels, set[2]);
        // out-of-range realization index is rejected
        let bad_rows = vec![(7usize, 2.0, 0.1)];
        io::write_file(&path, &samples_to_csv(&bad_rows, &[])).unwrap();
        assert!(matches!(
            read_samples_csv(&path, &set),
            Err(TrainingError::BadSampleIndex { .. })
        ));
    }
}
