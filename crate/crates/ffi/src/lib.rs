//! C ABI over the linkabs prediction pipeline.
//!
//! Tables and reference curves are opaque handles created from CSV files
//! (or built directly); the prediction entry point takes flattened
//! channel matrices. Every function returns a status code; the message
//! for the most recent failure on the calling thread is available via
//! `linkabs_last_error_message`. Panics are caught at the boundary and
//! reported as `LINKABS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use linkabs::abstraction::{
    abstract_link, beta_of_isr, bler_from_lut, lut_inverse_snr, read_models, AwgnLut, BetaModel,
};
use linkabs::channels::{ChannelRealization, SubcarrierChannel};
use linkabs::mib::{build_mib_table, GridSpec, IntegrationSpec, MibTable};
use linkabs::numerics::{CMatrix, Complex64};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkabsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numerical = 5,
    Panic = 6,
}

/// Opaque SNR-to-MIB table handle.
pub struct LinkabsMibTable(MibTable);

/// Opaque AWGN BLER reference curve handle.
pub struct LinkabsAwgnLut(AwgnLut);

/// Combining-weight model parameters for one (serving MCS, interferer
/// modulation) pair.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LinkabsBetaModel {
    pub y0: f64,
    pub y1: f64,
    pub beta_min: f64,
    pub mcs1: u32,
    pub mod2: u32,
}

/// Output of one BLER prediction.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LinkabsPrediction {
    pub mean_isr: f64,
    pub mmib: f64,
    pub sinr_eff_db: f64,
    pub bler_est: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn guard<F: FnOnce() -> LinkabsStatus>(f: F) -> LinkabsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&msg);
            LinkabsStatus::Panic
        }
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, LinkabsStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(LinkabsStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s).to_path_buf()),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(LinkabsStatus::InvalidArgument)
        }
    }
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn linkabs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the most recent error message of this thread into `buf`
/// (truncated, always nul-terminated when `len > 0`) and returns the full
/// message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn linkabs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Builds the SNR-to-MIB table for a modulation order (4, 16 or 64) on
/// the default -20..+30 dB grid with `nodes`-point Gauss-Hermite
/// quadrature per axis (16 is the standard choice).
#[no_mangle]
pub unsafe extern "C" fn linkabs_mib_table_build(
    order: u32,
    nodes: usize,
    out: *mut *mut LinkabsMibTable,
) -> LinkabsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return LinkabsStatus::NullArgument;
        }
        match build_mib_table(
            order,
            &GridSpec::default(),
            &IntegrationSpec::GaussHermite { nodes },
        ) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(LinkabsMibTable(table)));
                LinkabsStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                LinkabsStatus::InvalidArgument
            }
        }
    })
}

/// Loads a MIB table from its CSV file.
#[no_mangle]
pub unsafe extern "C" fn linkabs_mib_table_load(
    path: *const c_char,
    out: *mut *mut LinkabsMibTable,
) -> LinkabsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return LinkabsStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match MibTable::read_csv(&path) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(LinkabsMibTable(table)));
                LinkabsStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                LinkabsStatus::Format
            }
        }
    })
}

/// Releases a MIB table handle.
#[no_mangle]
pub unsafe extern "C" fn linkabs_mib_table_free(table: *mut LinkabsMibTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Modulation order a MIB table was built for.
#[no_mangle]
pub unsafe extern "C" fn linkabs_mib_table_modulation(
    table: *const LinkabsMibTable,
    out: *mut u32,
) -> LinkabsStatus {
    guard(|| {
        if table.is_null() || out.is_null() {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        *out = (*table).0.modulation;
        LinkabsStatus::Ok
    })
}

/// MIB at a linear SNR.
#[no_mangle]
pub unsafe extern "C" fn linkabs_mib_lookup(
    table: *const LinkabsMibTable,
    gamma_linear: f64,
    out: *mut f64,
) -> LinkabsStatus {
    guard(|| {
        if table.is_null() || out.is_null() {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        *out = (*table).0.lookup(gamma_linear);
        LinkabsStatus::Ok
    })
}

/// Linear SNR at a MIB value (the effective-SINR inverse).
#[no_mangle]
pub unsafe extern "C" fn linkabs_mib_inverse(
    table: *const LinkabsMibTable,
    mib: f64,
    out: *mut f64,
) -> LinkabsStatus {
    guard(|| {
        if table.is_null() || out.is_null() {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        if !(0.0..=1.0).contains(&mib) {
            set_error("mib outside [0, 1]");
            return LinkabsStatus::InvalidArgument;
        }
        *out = (*table).0.inverse(mib);
        LinkabsStatus::Ok
    })
}

/// Loads an AWGN BLER reference curve from its CSV file.
#[no_mangle]
pub unsafe extern "C" fn linkabs_awgn_lut_load(
    path: *const c_char,
    out: *mut *mut LinkabsAwgnLut,
) -> LinkabsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return LinkabsStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match AwgnLut::read_csv(&path) {
            Ok(lut) => {
                *out = Box::into_raw(Box::new(LinkabsAwgnLut(lut)));
                LinkabsStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                LinkabsStatus::Format
            }
        }
    })
}

/// Releases an AWGN curve handle.
#[no_mangle]
pub unsafe extern "C" fn linkabs_awgn_lut_free(lut: *mut LinkabsAwgnLut) {
    if !lut.is_null() {
        drop(Box::from_raw(lut));
    }
}

/// BLER at an SNR (dB) from the AWGN reference curve.
#[no_mangle]
pub unsafe extern "C" fn linkabs_bler_lookup(
    lut: *const LinkabsAwgnLut,
    sinr_db: f64,
    out: *mut f64,
) -> LinkabsStatus {
    guard(|| {
        if lut.is_null() || out.is_null() {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        *out = bler_from_lut(&(*lut).0, sinr_db);
        LinkabsStatus::Ok
    })
}

/// SNR (dB) at which the AWGN curve crosses a BLER value.
#[no_mangle]
pub unsafe extern "C" fn linkabs_bler_inverse(
    lut: *const LinkabsAwgnLut,
    bler: f64,
    out: *mut f64,
) -> LinkabsStatus {
    guard(|| {
        if lut.is_null() || out.is_null() {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        if !(bler > 0.0 && bler <= 1.0) {
            set_error("bler outside (0, 1]");
            return LinkabsStatus::InvalidArgument;
        }
        *out = lut_inverse_snr(&(*lut).0, bler);
        LinkabsStatus::Ok
    })
}

/// Loads the model row for (mcs1, mod2) from a beta-model CSV file.
#[no_mangle]
pub unsafe extern "C" fn linkabs_beta_model_load(
    path: *const c_char,
    mcs1: u32,
    mod2: u32,
    out: *mut LinkabsBetaModel,
) -> LinkabsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return LinkabsStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let models = match read_models(&path) {
            Ok(m) => m,
            Err(e) => {
                set_error(&e.to_string());
                return LinkabsStatus::Format;
            }
        };
        match models.iter().find(|m| m.mcs1 == mcs1 && m.mod2 == mod2) {
            Some(m) => {
                *out = LinkabsBetaModel {
                    y0: m.y0,
                    y1: m.y1,
                    beta_min: m.beta_min,
                    mcs1: m.mcs1,
                    mod2: m.mod2,
                };
                LinkabsStatus::Ok
            }
            None => {
                set_error("no model row for the requested (mcs1, mod2)");
                LinkabsStatus::Format
            }
        }
    })
}

fn model_from_c(model: &LinkabsBetaModel) -> Result<BetaModel, LinkabsStatus> {
    BetaModel::new(model.y0, model.y1, model.beta_min, model.mcs1, model.mod2).map_err(|e| {
        set_error(&e.to_string());
        LinkabsStatus::InvalidArgument
    })
}

/// ISR-dependent combining weight of a model.
#[no_mangle]
pub unsafe extern "C" fn linkabs_beta_of_isr(
    model: *const LinkabsBetaModel,
    isr: f64,
    out: *mut f64,
) -> LinkabsStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        if !(0.0..=1.0).contains(&isr) {
            set_error("isr outside [0, 1]");
            return LinkabsStatus::InvalidArgument;
        }
        let m = match model_from_c(&*model) {
            Ok(m) => m,
            Err(s) => return s,
        };
        *out = beta_of_isr(&m, isr);
        LinkabsStatus::Ok
    })
}

unsafe fn matrix_from_raw(data: *const f64, offset: usize, rows: usize, cols: usize) -> CMatrix {
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        let re = *data.add(offset + 2 * i);
        let im = *data.add(offset + 2 * i + 1);
        entries.push(Complex64::new(re, im));
    }
    CMatrix::new(rows, cols, entries)
}

/// Predicts instantaneous BLER for one channel realization.
///
/// `h1` holds `n_subcarriers` serving matrices of shape `n_rx x v1` and
/// `h2` the interfering matrices of shape `n_rx x v2`, subcarrier-major,
/// row-major within a matrix, each complex entry as (re, im) — so `h1`
/// carries `n_subcarriers * n_rx * v1 * 2` doubles. The table must match
/// the serving modulation of the LUT's MCS, and the model must be
/// trained for (lut MCS, mod2).
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn linkabs_predict(
    table: *const LinkabsMibTable,
    lut: *const LinkabsAwgnLut,
    model: *const LinkabsBetaModel,
    n_rx: usize,
    v1: usize,
    v2: usize,
    n_subcarriers: usize,
    h1: *const f64,
    h2: *const f64,
    noise_var: f64,
    out: *mut LinkabsPrediction,
) -> LinkabsStatus {
    guard(|| {
        if table.is_null()
            || lut.is_null()
            || model.is_null()
            || h1.is_null()
            || h2.is_null()
            || out.is_null()
        {
            set_error("null argument");
            return LinkabsStatus::NullArgument;
        }
        if n_rx == 0 || v1 == 0 || v2 == 0 || n_subcarriers == 0 {
            set_error("zero dimension");
            return LinkabsStatus::InvalidArgument;
        }
        if noise_var.is_nan() || noise_var <= 0.0 {
            set_error("noise_var must be positive");
            return LinkabsStatus::InvalidArgument;
        }
        let m = match model_from_c(&*model) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let mut subcarriers = Vec::with_capacity(n_subcarriers);
        for k in 0..n_subcarriers {
            subcarriers.push(SubcarrierChannel {
                h1: matrix_from_raw(h1, k * n_rx * v1 * 2, n_rx, v1),
                h2: matrix_from_raw(h2, k * n_rx * v2 * 2, n_rx, v2),
            });
        }
        let channels = ChannelRealization { subcarriers };
        let table_ref = &(*table).0;
        let lut_ref = &(*lut).0;
        match abstract_link(
            &channels,
            noise_var,
            lut_ref.mcs,
            table_ref.modulation,
            m.mod2,
            &m,
            table_ref,
            lut_ref,
        ) {
            Ok(res) => {
                *out = LinkabsPrediction {
                    mean_isr: res.mean_isr,
                    mmib: res.mmib,
                    sinr_eff_db: res.sinr_eff_db,
                    bler_est: res.bler_est,
                };
                LinkabsStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                LinkabsStatus::Numerical
            }
        }
    })
}
