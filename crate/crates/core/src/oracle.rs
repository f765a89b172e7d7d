//! Exact (Monte-Carlo) evaluation of the joint-ML bit-channel mutual
//! information and the optimal combining ratio it implies.
//!
//! The expectation over transmitted bits and symbols is taken by
//! exhaustive enumeration of the joint candidate set; only the noise is
//! sampled. Per (bit, transmitted-pair) stratum the per-draw terms are
//! accumulated with Welford's method, which yields the Monte-Carlo
//! standard error alongside the estimate. All candidate sums run through
//! log-sum-exp, so high-SNR exponents cannot overflow.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{layer_bounds, BoundsError};
use crate::channels::{ChannelRealization, ScenarioConfig};
use crate::constellation::Constellation;
use crate::io;
use crate::mib::{draw_unit_complex_gaussian, MibTable};
use crate::numerics::CMatrix;

pub const SCATTER_SCHEMA: &str = "linkabs/oracle-scatter/v1";

/// Joint candidate sets larger than this are rejected.
pub const MAX_CANDIDATES: usize = 1 << 16;

/// Bound spread below which the combining ratio is meaningless.
pub const DEGENERATE_BOUND_GAP: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("joint candidate set of {0} entries exceeds {MAX_CANDIDATES}")]
    CandidateSetTooLarge(usize),
    #[error("bounds are degenerate (gap {0:.3e} below {DEGENERATE_BOUND_GAP:.0e})")]
    DegenerateBounds(f64),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Monte-Carlo configuration for the exact-MIB evaluation.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Noise draws per (bit, transmitted-pair) stratum.
    pub n_noise_samples: usize,
    pub seed: u64,
    /// Serving layer under evaluation, 1-based.
    pub layer: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n_noise_samples: 500,
            seed: 0,
            layer: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub mib_exact: f64,
    pub std_error: f64,
}

/// Symbol-vector candidates as layer-major point-index tuples.
fn enumerate_candidates(cons: &Constellation, layers: usize) -> Vec<Vec<usize>> {
    let order = cons.order() as usize;
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..layers {
        let mut next = Vec::with_capacity(out.len() * order);
        for prefix in &out {
            for idx in 0..order {
                let mut v = prefix.clone();
                v.push(idx);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn received_mean(h: &CMatrix, cons: &Constellation, candidate: &[usize]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h.rows()];
    for (layer, &pt) in candidate.iter().enumerate() {
        let s = cons.points()[pt];
        for (row, o) in out.iter_mut().enumerate() {
            *o += h.get(row, layer) * s;
        }
    }
    out
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Exact per-layer MIB of the joint-ML bit channel for one subcarrier
/// channel pair, estimated by Monte-Carlo over the noise.
pub fn exact_mib(
    h1: &CMatrix,
    h2: &CMatrix,
    mod1: &Constellation,
    mod2: &Constellation,
    noise_var: f64,
    config: &OracleConfig,
) -> Result<OracleResult, OracleError> {
    assert!(config.n_noise_samples >= 100, "need at least 100 noise samples");
    assert!(noise_var > 0.0, "noise_var must be positive");
    let v1 = h1.cols();
    assert!(config.layer >= 1 && config.layer <= v1, "layer out of range");
    let cand1 = enumerate_candidates(mod1, v1);
    let cand2 = enumerate_candidates(mod2, h2.cols());
    let total = cand1.len() * cand2.len();
    if total > MAX_CANDIDATES {
        return Err(OracleError::CandidateSetTooLarge(total));
    }

    // Noise-free received vectors for every joint candidate, flattened as
    // p = p1 * |chi2| + p2.
    let n2 = cand2.len();
    let mean1: Vec<Vec<Complex64>> = cand1.iter().map(|c| received_mean(h1, mod1, c)).collect();
    let mean2: Vec<Vec<Complex64>> = cand2.iter().map(|c| received_mean(h2, mod2, c)).collect();
    let means: Vec<Vec<Complex64>> = (0..total)
        .map(|p| {
            let (p1, p2) = (p / n2, p % n2);
            mean1[p1]
                .iter()
                .zip(&mean2[p2])
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect();

    let bits = mod1.bits_per_symbol();
    let layer_idx = config.layer - 1;
    // For each bit position, the joint candidate indices whose serving
    // layer symbol carries bit value 0 / 1 at that position.
    let subsets: Vec<[Vec<usize>; 2]> = (0..bits)
        .map(|m| {
            let mut sets: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
            for (p1, cand) in cand1.iter().enumerate() {
                let label = mod1.label_of(cand[layer_idx]);
                let b = mod1.bit_of_label(label, m) as usize;
                for p2 in 0..n2 {
                    sets[b].push(p1 * n2 + p2);
                }
            }
            sets
        })
        .collect();

    let sigma = noise_var.sqrt();
    let n_strata = bits as usize * total;
    // Each stratum gets its own ChaCha8 stream; aggregation below is in
    // stratum order, so results do not depend on the worker count.
    let stats: Vec<(f64, f64)> = (0..n_strata)
        .into_par_iter()
        .map(|stratum| {
            let m = stratum / total;
            let tx = stratum % total;
            let tx1 = tx / n2;
            let label = mod1.label_of(cand1[tx1][layer_idx]);
            let b = mod1.bit_of_label(label, m as u32) as usize;
            let subset = &subsets[m][b];
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stratum as u64);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            let mut exponents = vec![0.0; total];
            let mut subset_expo = vec![0.0; subset.len()];
            for draw in 0..config.n_noise_samples {
                let r: Vec<Complex64> = means[tx]
                    .iter()
                    .map(|c| c + draw_unit_complex_gaussian(&mut rng) * sigma)
                    .collect();
                for (p, e) in exponents.iter_mut().enumerate() {
                    let d2: f64 = r
                        .iter()
                        .zip(&means[p])
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum();
                    *e = -d2 / noise_var;
                }
                for (slot, &p) in subset_expo.iter_mut().zip(subset.iter()) {
                    *slot = exponents[p];
                }
                let t = (log_sum_exp(&exponents) - log_sum_exp(&subset_expo))
                    / std::f64::consts::LN_2;
                let delta = t - mean;
                mean += delta / (draw + 1) as f64;
                m2 += delta * (t - mean);
            }
            let var = m2 / (config.n_noise_samples - 1) as f64;
            (mean, var)
        })
        .collect();

    let weight = 1.0 / n_strata as f64;
    let mut term_mean = 0.0;
    let mut est_var = 0.0;
    for (mean, var) in &stats {
        term_mean += weight * mean;
        est_var += weight * weight * var / config.n_noise_samples as f64;
    }
    Ok(OracleResult {
        mib_exact: (1.0 - term_mean).clamp(0.0, 1.0),
        std_error: est_var.sqrt(),
    })
}

/// Combining ratio that makes the affine bound combination reproduce the
/// exact MIB. Values outside [0, 1] are meaningful and not clamped.
pub fn optimal_beta(mib_exact: f64, mib_low: f64, mib_up: f64) -> Result<f64, OracleError> {
    assert!(mib_up >= mib_low - 1e-12, "bounds out of order");
    let gap = mib_up - mib_low;
    if gap < DEGENERATE_BOUND_GAP {
        return Err(OracleError::DegenerateBounds(gap));
    }
    Ok((mib_exact - mib_low) / gap)
}

/// One evaluated (channel, subcarrier) point of a combining-ratio scan.
#[derive(Debug, Clone)]
pub struct ScatterPoint {
    pub realization: usize,
    pub subcarrier: usize,
    pub isr: f64,
    pub mib_low: f64,
    pub mib_up: f64,
    pub mib_exact: f64,
    pub std_error: f64,
    /// None when the bounds are degenerate.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ScatterResult {
    pub points: Vec<ScatterPoint>,
    pub n_degenerate: usize,
}

impl ScatterResult {
    /// The non-degenerate (isr, beta) points.
    pub fn retained(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .filter_map(|p| p.beta.map(|b| (p.isr, b)))
    }
}

/// Per-point seed derivation for scatter scans (splitmix-style mix of the
/// master seed and the point index).
fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates bounds, exact MIB and optimal beta for every subcarrier of a
/// channel set. Degenerate-bound points are kept in the output with a
/// flag (and counted) but carry no beta.
pub fn beta_scatter(
    channel_set: &[ChannelRealization],
    scenario: &ScenarioConfig,
    table1: &MibTable,
    mod1: &Constellation,
    mod2: &Constellation,
    config: &OracleConfig,
) -> Result<ScatterResult, OracleError> {
    let mut tasks = Vec::new();
    for (ri, real) in channel_set.iter().enumerate() {
        for (ki, sub) in real.subcarriers.iter().enumerate() {
            tasks.push((ri, ki, sub));
        }
    }
    let points: Vec<Result<ScatterPoint, OracleError>> = tasks
        .par_iter()
        .enumerate()
        .map(|(idx, &(ri, ki, sub))| {
            let b = layer_bounds(&sub.h1, &sub.h2, scenario.noise_var, config.layer)?;
            let mib_low = table1.lookup(b.gamma_mmse);
            let mib_up = table1.lookup(b.gamma_if);
            let point_config = OracleConfig {
                seed: derive_seed(config.seed, idx as u64),
                ..config.clone()
            };
            let exact = exact_mib(
                &sub.h1,
                &sub.h2,
                mod1,
                mod2,
                scenario.noise_var,
                &point_config,
            )?;
            let beta = match optimal_beta(exact.mib_exact, mib_low, mib_up) {
                Ok(v) => Some(v),
                Err(OracleError::DegenerateBounds(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ScatterPoint {
                realization: ri,
                subcarrier: ki,
                isr: b.isr,
                mib_low,
                mib_up,
                mib_exact: exact.mib_exact,
                std_error: exact.std_error,
                beta,
            })
        })
        .collect();
    let mut result = ScatterResult::default();
    for p in points {
        let p = p?;
        if p.beta.is_none() {
            result.n_degenerate += 1;
        }
        result.points.push(p);
    }
    Ok(result)
}

/// Renders a scatter result as CSV (the `subcarrier` column is the global
/// running index across the set).
pub fn scatter_to_csv(result: &ScatterResult, extra_meta: &[(&str, String)]) -> String {
    let mut meta: Vec<(&str, String)> = vec![(
        "n_degenerate",
        result.n_degenerate.to_string(),
    )];
    meta.extend(extra_meta.iter().map(|(k, v)| (*k, v.clone())));
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            vec![
                idx.to_string(),
                io::fmt_f64(p.isr),
                io::fmt_f64(p.mib_low),
                io::fmt_f64(p.mib_up),
                io::fmt_f64(p.mib_exact),
                io::fmt_f64(p.std_error),
                p.beta.map(io::fmt_f64).unwrap_or_default(),
                if p.beta.is_none() { "1" } else { "0" }.to_string(),
            ]
        })
        .collect();
    io::render_csv(
        SCATTER_SCHEMA,
        &meta,
        &[
            "subcarrier",
            "isr",
            "mib_low",
            "mib_up",
            "mib_exact",
            "std_error",
            "beta",
            "degenerate_flag",
        ],
        &rows,
    )
}
