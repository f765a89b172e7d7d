//! Desk-scale BICM link-level simulator.
//!
//! One transport block is encoded, interleaved, Gray-mapped and spread
//! across the K subcarriers (and serving layers) of one OFDM channel
//! realization; the receiver runs the max-log joint-ML demodulator and a
//! soft Viterbi decoder. Block simulations use one ChaCha8 stream per
//! block index, so measured BLER is reproducible from the master seed
//! regardless of worker count.

mod convcode;
mod detector;

pub use convcode::{coded_len, decode, encode, CodeRate, CONSTRAINT_LENGTH, TAIL_BITS};
pub use detector::maxlog_joint_llr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::abstraction::AwgnLut;
use crate::channels::{ChannelRealization, ScenarioConfig};
use crate::constellation::{make_constellation, Constellation, ConstellationError};
use crate::io;
use crate::mib::draw_unit_complex_gaussian;
use crate::numerics::{CMatrix, CVector};
use crate::util::db_to_linear;

pub const MEASUREMENT_SCHEMA: &str = "linkabs/measurements/v1";

/// ChaCha8 stream reserved for the interleaver permutation; block
/// simulations use streams 0..n_blocks.
const INTERLEAVER_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum LlsError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("joint candidate set of {0} entries is too large")]
    CandidateSetTooLarge(usize),
    #[error("invalid LLS config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
}

// ---------------------------------------------------------------------------
// MCS table
// ---------------------------------------------------------------------------

/// One modulation-and-coding-scheme entry with its block framing.
#[derive(Debug, Clone, PartialEq)]
pub struct McsEntry {
    pub index: u32,
    pub modulation: u32,
    pub code_rate: CodeRate,
    /// Info bits per transport block (excludes the zero tail).
    pub info_bits: usize,
}

impl McsEntry {
    /// Builds an entry whose codeword exactly fills `k` subcarriers times
    /// `v1` layers: info_bits = rate * (k * v1 * bits_per_symbol) - 6 tail
    /// bits. Panics if the framing does not divide evenly.
    pub fn for_frame(index: u32, modulation: u32, code_rate: CodeRate, k: usize, v1: usize) -> Self {
        let bits_per_symbol = modulation.trailing_zeros() as usize;
        let coded_bits = k * v1 * bits_per_symbol;
        let (num, den) = code_rate.ratio();
        assert_eq!(
            coded_bits * num as usize % den as usize,
            0,
            "coded bits {coded_bits} not divisible for rate {num}/{den}"
        );
        let steps = coded_bits * num as usize / den as usize;
        assert!(steps > TAIL_BITS, "frame too small for the zero tail");
        let info_bits = steps - TAIL_BITS;
        let entry = McsEntry {
            index,
            modulation,
            code_rate,
            info_bits,
        };
        debug_assert_eq!(coded_len(code_rate, info_bits), coded_bits);
        entry
    }

    pub fn code_descriptor(&self) -> String {
        self.code_rate.descriptor()
    }

    /// Coded bits per block.
    pub fn coded_bits(&self) -> usize {
        coded_len(self.code_rate, self.info_bits)
    }
}

/// Default MCS table for a (k, v1) frame. Indices 9 and 17 mirror the
/// reference QPSK-1/2 and 16QAM-1/2 operating points; the rest add rate
/// coverage in spectral-efficiency order.
pub fn default_mcs_table(k: usize, v1: usize) -> Vec<McsEntry> {
    vec![
        McsEntry::for_frame(5, 4, CodeRate::R13, k, v1),
        McsEntry::for_frame(9, 4, CodeRate::R12, k, v1),
        McsEntry::for_frame(17, 16, CodeRate::R12, k, v1),
        McsEntry::for_frame(21, 16, CodeRate::R23, k, v1),
        McsEntry::for_frame(25, 64, CodeRate::R34, k, v1),
    ]
}

pub fn mcs_by_index(table: &[McsEntry], index: u32) -> Option<&McsEntry> {
    table.iter().find(|e| e.index == index)
}

// ---------------------------------------------------------------------------
// Interleaver
// ---------------------------------------------------------------------------

fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INTERLEAVER_STREAM);
    let mut perm: Vec<usize> = (0..len).collect();
    // Fisher-Yates
    for i in (1..len).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Seeded uniform random permutation of the input.
pub fn interleave<T: Copy>(xs: &[T], seed: u64) -> Vec<T> {
    let perm = permutation(xs.len(), seed);
    perm.iter().map(|&p| xs[p]).collect()
}

/// Inverse of `interleave` with the same seed and length.
pub fn deinterleave<T: Copy + Default>(xs: &[T], seed: u64) -> Vec<T> {
    let perm = permutation(xs.len(), seed);
    let mut out = vec![T::default(); xs.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = xs[i];
    }
    out
}

// ---------------------------------------------------------------------------
// Block-error measurement
// ---------------------------------------------------------------------------

/// Stop rule and seeding for one BLER measurement.
#[derive(Debug, Clone)]
pub struct LlsConfig {
    pub mcs: McsEntry,
    /// Interferer modulation order.
    pub mod2: u32,
    pub scenario: ScenarioConfig,
    pub min_block_errors: usize,
    pub max_blocks: usize,
    pub seed: u64,
}

impl LlsConfig {
    pub fn new(mcs: McsEntry, mod2: u32, scenario: ScenarioConfig, seed: u64) -> Self {
        LlsConfig {
            mcs,
            mod2,
            scenario,
            min_block_errors: 100,
            max_blocks: 20_000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), LlsError> {
        if self.min_block_errors < 20 {
            return Err(LlsError::InvalidConfig(format!(
                "min_block_errors {} below 20",
                self.min_block_errors
            )));
        }
        if self.max_blocks < 1 {
            return Err(LlsError::InvalidConfig("max_blocks must be >= 1".into()));
        }
        let capacity =
            self.scenario.n_subcarriers * self.scenario.v1 * self.mcs.modulation.trailing_zeros() as usize;
        let coded = self.mcs.coded_bits();
        if coded != capacity {
            return Err(LlsError::InvalidConfig(format!(
                "codeword of {coded} bits does not fill the {capacity}-bit frame"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerMeasurement {
    pub bler: f64,
    pub n_blocks: usize,
    pub n_errors: usize,
}

struct BlockContext<'a> {
    config: &'a LlsConfig,
    cons1: Constellation,
    cons2: Constellation,
    channels: Option<&'a ChannelRealization>,
    noise_var: f64,
    interleaver_seed: u64,
}

/// Simulates one transport block; returns true on a block error.
fn simulate_block(ctx: &BlockContext, block_idx: u64) -> bool {
    let cfg = ctx.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(block_idx);
    let info: Vec<u8> = (0..cfg.mcs.info_bits)
        .map(|_| rng.random::<bool>() as u8)
        .collect();
    let coded = encode(cfg.mcs.code_rate, &info);
    let interleaved = interleave(&coded, ctx.interleaver_seed);

    let bits_per_symbol = ctx.cons1.bits_per_symbol() as usize;
    let sigma = ctx.noise_var.sqrt();
    let v1 = if ctx.channels.is_some() { cfg.scenario.v1 } else { 1 };
    let n_slots = interleaved.len() / (bits_per_symbol * v1);
    let mut llrs = Vec::with_capacity(interleaved.len());
    let unit = CMatrix::identity(1);
    for slot in 0..n_slots {
        // serving symbols, layer-major
        let mut x1 = Vec::with_capacity(v1);
        for layer in 0..v1 {
            let offset = (slot * v1 + layer) * bits_per_symbol;
            x1.push(ctx.cons1.map_bits(&interleaved[offset..offset + bits_per_symbol]));
        }
        let slot_llrs = match ctx.channels {
            Some(real) => {
                let sub = &real.subcarriers[slot];
                let mut r = vec![Complex64::new(0.0, 0.0); sub.h1.rows()];
                for (layer, s) in x1.iter().enumerate() {
                    for (row, acc) in r.iter_mut().enumerate() {
                        *acc += sub.h1.get(row, layer) * s;
                    }
                }
                for layer in 0..sub.h2.cols() {
                    let idx = rng.random_range(0..ctx.cons2.order() as usize);
                    let s = ctx.cons2.points()[idx];
                    for (row, acc) in r.iter_mut().enumerate() {
                        *acc += sub.h2.get(row, layer) * s;
                    }
                }
                for acc in r.iter_mut() {
                    *acc += draw_unit_complex_gaussian(&mut rng) * sigma;
                }
                maxlog_joint_llr(
                    &CVector::new(r),
                    &sub.h1,
                    &ctx.cons1,
                    Some((&sub.h2, &ctx.cons2)),
                    ctx.noise_var,
                )
                .expect("candidate set validated by config")
            }
            None => {
                // AWGN reference: single stream, unit gain, no interferer
                let r = CVector::new(vec![
                    x1[0] + draw_unit_complex_gaussian(&mut rng) * sigma,
                ]);
                maxlog_joint_llr(&r, &unit, &ctx.cons1, None, ctx.noise_var)
                    .expect("single-stream candidate set is always small")
            }
        };
        llrs.extend(slot_llrs);
    }
    let deinterleaved = deinterleave(&llrs, ctx.interleaver_seed);
    let decoded = decode(cfg.mcs.code_rate, &deinterleaved, cfg.mcs.info_bits)
        .expect("framing validated by config");
    decoded != info
}

/// Blocks simulated per stop-rule check; fixed so results do not depend
/// on the worker count.
const BLOCK_BATCH: usize = 128;

/// Measures BLER at `snr_db` (average per-layer SNR = 1/noise_var).
///
/// With `channels` the block is sent over the interference scenario
/// (interferer symbols drawn uniformly from `mod2`); with `None` it runs
/// the single-stream AWGN reference. Simulation stops once
/// `min_block_errors` block errors are seen (checked at batch
/// granularity) or `max_blocks` blocks are spent; zero-error results are
/// floored at 0.5/n_blocks.
pub fn measure_bler(
    config: &LlsConfig,
    channels: Option<&ChannelRealization>,
    snr_db: f64,
) -> Result<BlerMeasurement, LlsError> {
    config.validate()?;
    if let Some(real) = channels {
        if real.subcarriers.len() != config.scenario.n_subcarriers {
            return Err(LlsError::LengthMismatch {
                expected: config.scenario.n_subcarriers,
                found: real.subcarriers.len(),
            });
        }
    }
    let ctx = BlockContext {
        config,
        cons1: make_constellation(config.mcs.modulation)?,
        cons2: make_constellation(config.mod2)?,
        channels,
        noise_var: db_to_linear(-snr_db),
        interleaver_seed: config.seed,
    };
    let mut n_blocks = 0usize;
    let mut n_errors = 0usize;
    while n_blocks < config.max_blocks && n_errors < config.min_block_errors {
        let batch = BLOCK_BATCH.min(config.max_blocks - n_blocks);
        let errors: usize = (n_blocks..n_blocks + batch)
            .into_par_iter()
            .map(|idx| simulate_block(&ctx, idx as u64) as usize)
            .sum();
        n_errors += errors;
        n_blocks += batch;
    }
    let bler = if n_errors == 0 {
        0.5 / n_blocks as f64
    } else {
        n_errors as f64 / n_blocks as f64
    };
    Ok(BlerMeasurement {
        bler,
        n_blocks,
        n_errors,
    })
}

// ---------------------------------------------------------------------------
// AWGN reference curves
// ---------------------------------------------------------------------------

/// One row of the raw measurement log.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub seed: u64,
    pub snr_db: f64,
    pub rho: f64,
    pub mcs: u32,
    pub mod2: u32,
    pub n_blocks: usize,
    pub n_errors: usize,
    pub bler: f64,
}

pub fn measurements_to_csv(records: &[MeasurementRecord], extra_meta: &[(&str, String)]) -> String {
    let meta: Vec<(&str, String)> = extra_meta.iter().map(|(k, v)| (*k, v.clone())).collect();
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                io::fmt_f64(r.snr_db),
                io::fmt_f64(r.rho),
                r.mcs.to_string(),
                r.mod2.to_string(),
                r.n_blocks.to_string(),
                r.n_errors.to_string(),
                io::fmt_f64(r.bler),
            ]
        })
        .collect();
    io::render_csv(
        MEASUREMENT_SCHEMA,
        &meta,
        &["seed", "snr_db", "rho", "mcs", "mod2", "n_blocks", "n_errors", "bler"],
        &rows,
    )
}

/// Stop rule for AWGN curve generation.
#[derive(Debug, Clone)]
pub struct AwgnGridSpec {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
    pub min_block_errors: usize,
    pub max_blocks: usize,
}

impl Default for AwgnGridSpec {
    fn default() -> Self {
        AwgnGridSpec {
            start_db: -2.0,
            stop_db: 14.0,
            step_db: 0.5,
            min_block_errors: 100,
            max_blocks: 20_000,
        }
    }
}

/// Auto-extension guards for AWGN curves.
const AWGN_MIN_SNR_DB: f64 = -30.0;
const AWGN_MAX_SNR_DB: f64 = 45.0;

/// Measures one AWGN reference curve. The grid auto-extends downward
/// until the curve reaches BLER >= 0.99 and upward until a point with
/// zero observed errors (the floor), so the waterfall is always captured.
/// Returns the isotonic-cleaned LUT plus the raw measurement log.
pub fn gen_awgn_lut(
    mcs: &McsEntry,
    k: usize,
    grid: &AwgnGridSpec,
    seed: u64,
) -> Result<(AwgnLut, Vec<MeasurementRecord>), LlsError> {
    let scenario = ScenarioConfig {
        n_rx: 1,
        v1: 1,
        v2: 1,
        n_subcarriers: k,
        noise_var: 1.0,
        interferer_scale: 0.0,
        seed,
    };
    let config = LlsConfig {
        mcs: mcs.clone(),
        mod2: 4,
        scenario,
        min_block_errors: grid.min_block_errors,
        max_blocks: grid.max_blocks,
        seed,
    };
    config.validate()?;

    let mut points: Vec<(f64, BlerMeasurement)> = Vec::new();
    let measure_at = |snr_db: f64, points: &mut Vec<(f64, BlerMeasurement)>| -> Result<(), LlsError> {
        let m = measure_bler(&config, None, snr_db)?;
        points.push((snr_db, m));
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(())
    };

    let mut snr = grid.start_db;
    while snr <= grid.stop_db + 1e-9 {
        measure_at(snr, &mut points)?;
        snr += grid.step_db;
    }
    // extend left until the head of the curve is captured
    while points[0].1.bler < 0.99 && points[0].0 - grid.step_db >= AWGN_MIN_SNR_DB {
        measure_at(points[0].0 - grid.step_db, &mut points)?;
    }
    // extend right until the floor (a zero-error point) is reached
    while points[points.len() - 1].1.n_errors > 0
        && points[points.len() - 1].0 + grid.step_db <= AWGN_MAX_SNR_DB
    {
        measure_at(points[points.len() - 1].0 + grid.step_db, &mut points)?;
    }

    let records: Vec<MeasurementRecord> = points
        .iter()
        .map(|(snr_db, m)| MeasurementRecord {
            seed,
            snr_db: *snr_db,
            rho: 0.0,
            mcs: mcs.index,
            mod2: 0,
            n_blocks: m.n_blocks,
            n_errors: m.n_errors,
            bler: m.bler,
        })
        .collect();
    let lut = AwgnLut::new(
        mcs.index,
        points.iter().map(|(s, _)| *s).collect(),
        points.iter().map(|(_, m)| m.bler).collect(),
        mcs.info_bits,
        mcs.code_descriptor(),
    );
    Ok((lut, records))
}
