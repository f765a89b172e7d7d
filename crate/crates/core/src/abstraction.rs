//! The BLER prediction pipeline: adaptive bound combining, mean MIB,
//! effective SINR and AWGN-curve lookup.
//!
//! Per subcarrier and serving layer the MMSE/IF SINR bounds are mapped
//! to MIB values, combined with the ISR-dependent weight
//! `beta = max(min((y1 - y0) * isr + y0, 1), beta_min)`, averaged into a
//! mean MIB across the codeword, inverted to an effective SINR and
//! finally looked up in the AWGN reference curve of the serving MCS.

use std::path::Path;

use thiserror::Error;

use crate::bounds::{layer_bounds, BoundsError};
use crate::channels::ChannelRealization;
use crate::io::{self, FormatError};
use crate::mib::MibTable;
use crate::util::{db_to_linear, interp_clamped, isotonic_non_increasing, linear_to_db, mean};

pub const BETA_MODEL_SCHEMA: &str = "linkabs/beta-model/v1";
const BETA_MODEL_KIND: &str = "linkabs/beta-model";
pub const AWGN_LUT_SCHEMA: &str = "linkabs/awgn-lut/v1";
const AWGN_LUT_KIND: &str = "linkabs/awgn-lut";
pub const REPORT_SCHEMA: &str = "linkabs/abstraction-report/v1";
const REPORT_KIND: &str = "linkabs/abstraction-report";

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("empty input")]
    EmptyInput,
    #[error("model trained for (mcs {model_mcs}, mod2 {model_mod2}) used with (mcs {mcs}, mod2 {mod2})")]
    ModelMismatch {
        model_mcs: u32,
        model_mod2: u32,
        mcs: u32,
        mod2: u32,
    },
    #[error("MIB table for modulation {table} used with serving modulation {serving}")]
    TableMismatch { table: u32, serving: u32 },
    #[error("AWGN LUT for MCS {lut} used with MCS {mcs}")]
    LutMismatch { lut: u32, mcs: u32 },
    #[error("beta_min {0} violates beta_min <= 1")]
    InvalidModel(f64),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

// ---------------------------------------------------------------------------
// Beta model
// ---------------------------------------------------------------------------

/// Trained combining-weight model for one (serving MCS, interferer
/// modulation) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaModel {
    pub y0: f64,
    pub y1: f64,
    pub beta_min: f64,
    pub mcs1: u32,
    pub mod2: u32,
}

impl BetaModel {
    pub fn new(y0: f64, y1: f64, beta_min: f64, mcs1: u32, mod2: u32) -> Result<Self, AbstractionError> {
        if beta_min.is_nan() || beta_min > 1.0 {
            return Err(AbstractionError::InvalidModel(beta_min));
        }
        Ok(BetaModel {
            y0,
            y1,
            beta_min,
            mcs1,
            mod2,
        })
    }

    /// A static (conventional) model: constant beta regardless of ISR.
    /// The floor is parked at the search-space bound so it never binds.
    pub fn static_model(beta: f64, mcs1: u32, mod2: u32) -> Self {
        BetaModel {
            y0: beta,
            y1: beta,
            beta_min: -1.0,
            mcs1,
            mod2,
        }
    }
}

/// Piecewise combining weight: linear in ISR, capped at 1, floored at
/// `beta_min`. May be negative when the model says the exact MIB sits
/// below the MMSE bound.
pub fn beta_of_isr(model: &BetaModel, isr: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&isr), "isr out of range: {isr}");
    ((model.y1 - model.y0) * isr + model.y0).min(1.0).max(model.beta_min)
}

/// Affine combination of the two MIB bounds, clamped to [0, 1] (negative
/// beta with a tiny lower bound can push the raw combination below zero).
pub fn combine_mib(mib_low: f64, mib_up: f64, beta: f64) -> f64 {
    debug_assert!(mib_low <= mib_up + 1e-12);
    ((1.0 - beta) * mib_low + beta * mib_up).clamp(0.0, 1.0)
}

/// Arithmetic mean of the per-(subcarrier, layer) MIB values.
pub fn mmib(values: &[f64]) -> Result<f64, AbstractionError> {
    if values.is_empty() {
        return Err(AbstractionError::EmptyInput);
    }
    Ok(mean(values))
}

// ---------------------------------------------------------------------------
// AWGN reference curve
// ---------------------------------------------------------------------------

/// Measured AWGN BLER reference curve for one MCS. The curve is made
/// non-increasing by isotonic regression (in log domain) at construction
/// and at load.
#[derive(Debug, Clone)]
pub struct AwgnLut {
    pub mcs: u32,
    pub snr_grid_db: Vec<f64>,
    pub bler: Vec<f64>,
    pub block_length: usize,
    pub code_descriptor: String,
}

impl AwgnLut {
    pub fn new(
        mcs: u32,
        snr_grid_db: Vec<f64>,
        bler: Vec<f64>,
        block_length: usize,
        code_descriptor: String,
    ) -> Self {
        assert_eq!(snr_grid_db.len(), bler.len());
        assert!(!bler.is_empty());
        assert!(bler.iter().all(|&b| b > 0.0 && b <= 1.0), "bler must be in (0, 1]");
        let log: Vec<f64> = bler.iter().map(|b| b.log10()).collect();
        let clean: Vec<f64> = isotonic_non_increasing(&log)
            .into_iter()
            .map(|l| 10f64.powf(l).min(1.0))
            .collect();
        AwgnLut {
            mcs,
            snr_grid_db,
            bler: clean,
            block_length,
            code_descriptor,
        }
    }

    fn log_bler(&self) -> Vec<f64> {
        self.bler.iter().map(|b| b.log10()).collect()
    }

    pub fn to_csv(&self, extra_meta: &[(&str, String)]) -> String {
        let mut meta: Vec<(&str, String)> = vec![
            ("mcs", self.mcs.to_string()),
            ("code", self.code_descriptor.clone()),
            ("block_length", self.block_length.to_string()),
        ];
        meta.extend(extra_meta.iter().map(|(k, v)| (*k, v.clone())));
        let rows: Vec<Vec<String>> = self
            .snr_grid_db
            .iter()
            .zip(&self.bler)
            .map(|(s, b)| vec![io::fmt_f64(*s), io::fmt_f64(*b)])
            .collect();
        io::render_csv(AWGN_LUT_SCHEMA, &meta, &["snr_db", "bler"], &rows)
    }

    pub fn write_csv(&self, path: &Path, extra_meta: &[(&str, String)]) -> Result<(), AbstractionError> {
        io::write_file(path, &self.to_csv(extra_meta))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<AwgnLut, AbstractionError> {
        let doc = io::read_csv(path, AWGN_LUT_KIND, 1)?;
        let mcs = io::parse_usize(doc.meta_value("mcs")?, &doc.path, 0)? as u32;
        let block_length = io::parse_usize(doc.meta_value("block_length")?, &doc.path, 0)?;
        let code = doc.meta_value("code")?.to_string();
        let scol = doc.column_index("snr_db")?;
        let bcol = doc.column_index("bler")?;
        let mut snr = Vec::with_capacity(doc.rows.len());
        let mut bler = Vec::with_capacity(doc.rows.len());
        for (i, row) in doc.rows.iter().enumerate() {
            snr.push(io::parse_f64(&row[scol], &doc.path, i + 2)?);
            bler.push(io::parse_f64(&row[bcol], &doc.path, i + 2)?);
        }
        Ok(AwgnLut::new(mcs, snr, bler, block_length, code))
    }
}

/// SNR (dB) to BLER: linear interpolation of log10(BLER) over dB,
/// clamped to the endpoint values outside the grid.
pub fn bler_from_lut(lut: &AwgnLut, sinr_eff_db: f64) -> f64 {
    let log = lut.log_bler();
    10f64.powf(interp_clamped(&lut.snr_grid_db, &log, sinr_eff_db))
}

/// Inverse of the AWGN curve: the SNR (dB) at which the curve crosses
/// `bler`. Values outside the measured range clamp to the grid edges.
pub fn lut_inverse_snr(lut: &AwgnLut, bler: f64) -> f64 {
    let log = lut.log_bler();
    let target = bler.log10();
    let first = log[0];
    let last = log[log.len() - 1];
    if target >= first {
        return lut.snr_grid_db[0];
    }
    if target <= last {
        return lut.snr_grid_db[lut.snr_grid_db.len() - 1];
    }
    let mut lo = lut.snr_grid_db[0];
    let mut hi = lut.snr_grid_db[lut.snr_grid_db.len() - 1];
    for _ in 0..200 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = interp_clamped(&lut.snr_grid_db, &log, mid);
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Direct MMIB-to-BLER table composed from a MIB table and an AWGN curve
/// of the same MCS.
#[derive(Debug, Clone)]
pub struct DirectLut {
    pub mcs: u32,
    mib_grid: Vec<f64>,
    log10_bler: Vec<f64>,
}

/// Composes the two-step path (MIB inverse, then AWGN lookup) into one
/// table. Both maps are piecewise linear, so sampling at the union of
/// their kink images (the MIB grid values and the MIB images of the LUT
/// grid) reproduces the composition exactly between nodes.
pub fn build_direct_lut(table: &MibTable, lut: &AwgnLut) -> DirectLut {
    let mut nodes: Vec<f64> = vec![0.0, 1.0];
    nodes.extend(table.mib.iter().copied());
    nodes.extend(
        lut.snr_grid_db
            .iter()
            .map(|&s| table.lookup(db_to_linear(s))),
    );
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes.dedup();
    let log10_bler: Vec<f64> = nodes
        .iter()
        .map(|&m| {
            let sinr_db = linear_to_db(table.inverse(m));
            bler_from_lut(lut, sinr_db).log10()
        })
        .collect();
    DirectLut {
        mcs: lut.mcs,
        mib_grid: nodes,
        log10_bler,
    }
}

/// Direct MMIB-to-BLER lookup.
pub fn bler_from_mmib(direct: &DirectLut, mmib: f64) -> f64 {
    10f64.powf(interp_clamped(&direct.mib_grid, &direct.log10_bler, mmib))
}

// ---------------------------------------------------------------------------
// Link abstraction
// ---------------------------------------------------------------------------

/// Per-(subcarrier, layer) intermediate values of one abstraction run.
#[derive(Debug, Clone, Copy)]
pub struct LayerEval {
    pub subcarrier: usize,
    pub layer: usize,
    pub isr: f64,
    pub gamma_mmse: f64,
    pub gamma_if: f64,
    pub mib_low: f64,
    pub mib_up: f64,
    pub beta: f64,
    pub mib_ml: f64,
}

/// Output of `abstract_link` for one (channel realization, noise) state.
#[derive(Debug, Clone)]
pub struct AbstractionOutcome {
    pub evals: Vec<LayerEval>,
    pub mean_isr: f64,
    pub mmib: f64,
    pub sinr_eff_db: f64,
    pub bler_est: f64,
}

/// Runs the prediction pipeline over one channel realization.
///
/// `mcs1_index` and `serving_mod` identify the serving MCS; the MIB table
/// must be for `serving_mod` and the LUT for `mcs1_index`. The per-layer
/// MIB values of all subcarriers and serving layers are averaged into a
/// single codeword MMIB (summation in fixed subcarrier-major order, so
/// reports are bit-for-bit reproducible).
#[allow(clippy::too_many_arguments)]
pub fn abstract_link(
    channels: &ChannelRealization,
    noise_var: f64,
    mcs1_index: u32,
    serving_mod: u32,
    mod2: u32,
    model: &BetaModel,
    table: &MibTable,
    lut: &AwgnLut,
) -> Result<AbstractionOutcome, AbstractionError> {
    if model.mcs1 != mcs1_index || model.mod2 != mod2 {
        return Err(AbstractionError::ModelMismatch {
            model_mcs: model.mcs1,
            model_mod2: model.mod2,
            mcs: mcs1_index,
            mod2,
        });
    }
    if table.modulation != serving_mod {
        return Err(AbstractionError::TableMismatch {
            table: table.modulation,
            serving: serving_mod,
        });
    }
    if lut.mcs != mcs1_index {
        return Err(AbstractionError::LutMismatch {
            lut: lut.mcs,
            mcs: mcs1_index,
        });
    }
    if channels.subcarriers.is_empty() {
        return Err(AbstractionError::EmptyInput);
    }
    let mut evals = Vec::new();
    for (k, sub) in channels.subcarriers.iter().enumerate() {
        for layer in 1..=sub.h1.cols() {
            let b = layer_bounds(&sub.h1, &sub.h2, noise_var, layer)?;
            let mib_low = table.lookup(b.gamma_mmse);
            let mib_up = table.lookup(b.gamma_if);
            let beta = beta_of_isr(model, b.isr);
            let mib_ml = combine_mib(mib_low, mib_up, beta);
            evals.push(LayerEval {
                subcarrier: k,
                layer,
                isr: b.isr,
                gamma_mmse: b.gamma_mmse,
                gamma_if: b.gamma_if,
                mib_low,
                mib_up,
                beta,
                mib_ml,
            });
        }
    }
    let values: Vec<f64> = evals.iter().map(|e| e.mib_ml).collect();
    let mmib_value = mmib(&values)?;
    let sinr_eff_db = linear_to_db(table.inverse(mmib_value));
    let bler_est = bler_from_lut(lut, sinr_eff_db);
    let isrs: Vec<f64> = evals.iter().map(|e| e.isr).collect();
    Ok(AbstractionOutcome {
        mean_isr: mean(&isrs),
        mmib: mmib_value,
        sinr_eff_db,
        bler_est,
        evals,
    })
}

// ---------------------------------------------------------------------------
// Beta-model table file
// ---------------------------------------------------------------------------

pub fn models_to_csv(models: &[BetaModel], extra_meta: &[(&str, String)]) -> String {
    let meta: Vec<(&str, String)> = extra_meta.iter().map(|(k, v)| (*k, v.clone())).collect();
    let rows: Vec<Vec<String>> = models
        .iter()
        .map(|m| {
            vec![
                m.mcs1.to_string(),
                m.mod2.to_string(),
                io::fmt_f64(m.y0),
                io::fmt_f64(m.y1),
                io::fmt_f64(m.beta_min),
            ]
        })
        .collect();
    io::render_csv(
        BETA_MODEL_SCHEMA,
        &meta,
        &["mcs1", "mod2", "y0", "y1", "beta_min"],
        &rows,
    )
}

pub fn write_models(
    path: &Path,
    models: &[BetaModel],
    extra_meta: &[(&str, String)],
) -> Result<(), AbstractionError> {
    io::write_file(path, &models_to_csv(models, extra_meta))?;
    Ok(())
}

pub fn read_models(path: &Path) -> Result<Vec<BetaModel>, AbstractionError> {
    let doc = io::read_csv(path, BETA_MODEL_KIND, 1)?;
    let cols = [
        doc.column_index("mcs1")?,
        doc.column_index("mod2")?,
        doc.column_index("y0")?,
        doc.column_index("y1")?,
        doc.column_index("beta_min")?,
    ];
    let mut out = Vec::with_capacity(doc.rows.len());
    for (i, row) in doc.rows.iter().enumerate() {
        let line = i + 2;
        out.push(BetaModel::new(
            io::parse_f64(&row[cols[2]], &doc.path, line)?,
            io::parse_f64(&row[cols[3]], &doc.path, line)?,
            io::parse_f64(&row[cols[4]], &doc.path, line)?,
            io::parse_usize(&row[cols[0]], &doc.path, line)? as u32,
            io::parse_usize(&row[cols[1]], &doc.path, line)? as u32,
        )?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Abstraction report
// ---------------------------------------------------------------------------

/// One row of the validation report: a (channel realization, SNR) state.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub seed: u64,
    pub rho: f64,
    pub snr_db: f64,
    pub mean_isr: f64,
    pub mmib: f64,
    pub sinr_eff_db: f64,
    pub bler_est: f64,
    pub bler_monte: Option<f64>,
    pub sinr_awgn_db: Option<f64>,
}

pub fn report_to_csv(rows: &[ReportRow], extra_meta: &[(&str, String)]) -> String {
    let meta: Vec<(&str, String)> = extra_meta.iter().map(|(k, v)| (*k, v.clone())).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                io::fmt_f64(r.rho),
                io::fmt_f64(r.snr_db),
                io::fmt_f64(r.mean_isr),
                io::fmt_f64(r.mmib),
                io::fmt_f64(r.sinr_eff_db),
                io::fmt_f64(r.bler_est),
                r.bler_monte.map(io::fmt_f64).unwrap_or_default(),
                r.sinr_awgn_db.map(io::fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    io::render_csv(
        REPORT_SCHEMA,
        &meta,
        &[
            "seed",
            "rho",
            "snr_db",
            "mean_isr",
            "mmib",
            "sinr_eff_db",
            "bler_est",
            "bler_monte",
            "sinr_awgn_db",
        ],
        &body,
    )
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>, AbstractionError> {
    let doc = io::read_csv(path, REPORT_KIND, 1)?;
    let idx = |name: &str| doc.column_index(name);
    let cols = [
        idx("seed")?,
        idx("rho")?,
        idx("snr_db")?,
        idx("mean_isr")?,
        idx("mmib")?,
        idx("sinr_eff_db")?,
        idx("bler_est")?,
        idx("bler_monte")?,
        idx("sinr_awgn_db")?,
    ];
    let mut out = Vec::with_capacity(doc.rows.len());
    for (i, row) in doc.rows.iter().enumerate() {
        let line = i + 2;
        let opt = |s: &str| -> Result<Option<f64>, FormatError> {
            if s.is_empty() {
                Ok(None)
            } else {
                io::parse_f64(s, &doc.path, line).map(Some)
            }
        };
        out.push(ReportRow {
            seed: io::parse_usize(&row[cols[0]], &doc.path, line)? as u64,
            rho: io::parse_f64(&row[cols[1]], &doc.path, line)?,
            snr_db: io::parse_f64(&row[cols[2]], &doc.path, line)?,
            mean_isr: io::parse_f64(&row[cols[3]], &doc.path, line)?,
            mmib: io::parse_f64(&row[cols[4]], &doc.path, line)?,
            sinr_eff_db: io::parse_f64(&row[cols[5]], &doc.path, line)?,
            bler_est: io::parse_f64(&row[cols[6]], &doc.path, line)?,
            bler_monte: opt(&row[cols[7]])?,
            sinr_awgn_db: opt(&row[cols[8]])?,
        });
    }
    Ok(out)
}
