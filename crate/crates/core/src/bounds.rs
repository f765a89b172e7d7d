//! Closed-form per-layer post-processing SINR bounds and the ISR metric.
//!
//! The post-MLD SINR of a serving layer is sandwiched between the
//! unbiased-MMSE SINR (treating everything else as noise) and the
//! genie-aided interference-free SINR of the same layer. The ISR metric
//! `1 - exp(-||H2_eff||_F / ||h1_v||)` measures how far the two bounds
//! can spread; it drives the adaptive combining weight.

use thiserror::Error;

use crate::numerics::{gram, inverse_hermitian, CMatrix, CVector, NumericsError};

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("serving channel column is numerically zero (norm {0:.3e})")]
    ZeroServingChannel(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Per-layer SINR bounds plus the ISR of the layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerBounds {
    pub gamma_mmse: f64,
    pub gamma_if: f64,
    pub isr: f64,
}

/// Unbiased-MMSE post-processing SINR of serving layer `layer` (1-based).
///
/// Builds the stacked channel `[h1, h2]`, inverts
/// `I + (1/noise_var) H†H` (identity sized by the total column count
/// V1 + V2), and returns `1/mse - 1` from the layer's diagonal entry.
pub fn mmse_sinr(
    h1: &CMatrix,
    h2: &CMatrix,
    noise_var: f64,
    layer: usize,
) -> Result<f64, BoundsError> {
    assert!(layer >= 1 && layer <= h1.cols(), "layer out of range");
    assert!(noise_var > 0.0, "noise_var must be positive");
    let stacked = h1.hstack(h2);
    let a = gram(&stacked).scaled(1.0 / noise_var).plus_identity();
    let inv = inverse_hermitian(&a)?;
    let mse = inv.get(layer - 1, layer - 1).re;
    Ok((1.0 / mse - 1.0).max(0.0))
}

/// Genie-aided interference-free SINR of one serving column.
pub fn if_sinr(h_col: &CVector, noise_var: f64) -> f64 {
    assert!(noise_var > 0.0, "noise_var must be positive");
    h_col.norm_sqr() / noise_var
}

const ZERO_CHANNEL_TOL: f64 = 1e-12;

/// Frobenius norm of the effective interference seen by serving layer
/// `layer`: all other serving columns plus every interferer column.
fn effective_interference_norm(h1: &CMatrix, h2: &CMatrix, layer: usize) -> f64 {
    let mut sum = 0.0;
    for c in 0..h1.cols() {
        if c + 1 != layer {
            sum += h1.column(c).norm_sqr();
        }
    }
    for c in 0..h2.cols() {
        sum += h2.column(c).norm_sqr();
    }
    sum.sqrt()
}

/// ISR seen by serving layer `layer` (1-based):
/// `1 - exp(-||H2_eff||_F / ||h1_layer||)` with unsquared norms. For a
/// two-layer serving cell the other serving layer counts as interference.
/// Mathematically the value is below 1 for finite inputs; in f64 the
/// exponential underflows for ratios beyond ~745 and the ISR saturates
/// at exactly 1.0.
pub fn isr_for_layer(h1: &CMatrix, h2: &CMatrix, layer: usize) -> Result<f64, BoundsError> {
    assert!(layer >= 1 && layer <= h1.cols(), "layer out of range");
    let serving = h1.column(layer - 1).norm();
    if serving < ZERO_CHANNEL_TOL {
        return Err(BoundsError::ZeroServingChannel(serving));
    }
    let interference = effective_interference_norm(h1, h2, layer);
    Ok(1.0 - (-interference / serving).exp())
}

/// ISR from the first serving layer's perspective; `v1` is the serving
/// layer count and must match `h1.cols()`.
pub fn isr(h1: &CMatrix, h2: &CMatrix, v1: usize) -> Result<f64, BoundsError> {
    assert_eq!(h1.cols(), v1, "v1 must match the serving column count");
    isr_for_layer(h1, h2, 1)
}

/// Convenience composition: both SINR bounds plus the ISR for one layer.
pub fn layer_bounds(
    h1: &CMatrix,
    h2: &CMatrix,
    noise_var: f64,
    layer: usize,
) -> Result<LayerBounds, BoundsError> {
    let gamma_mmse = mmse_sinr(h1, h2, noise_var, layer)?;
    let gamma_if = if_sinr(&h1.column(layer - 1), noise_var);
    let isr = isr_for_layer(h1, h2, layer)?;
    Ok(LayerBounds {
        gamma_mmse,
        gamma_if,
        isr,
    })
}

/// Column vector as a single-column matrix (handy in tests and callers).
pub fn column_matrix(v: &CVector) -> CMatrix {
    CMatrix::from_fn(v.len(), 1, |r, _| v.get(r))
}
