//! Seeded Rayleigh-fading effective-channel realizations for the
//! two-cell interference scenario.
//!
//! Each subcarrier carries one serving matrix `h1` (N_r x V1) and one
//! interfering matrix `h2` (N_r x V2). Entries are i.i.d. circularly
//! symmetric complex Gaussian with unit variance; `h2` entries are then
//! scaled by the interferer amplitude factor `rho`, which stands in for
//! the distance-dependent pathloss folded into the effective channel.
//!
//! Generation uses ChaCha8 with one stream per realization, so sets are
//! reproducible from the master seed and realizations can be generated
//! in parallel.

use std::path::Path;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{self, FormatError};
use crate::mib::draw_unit_complex_gaussian;
use crate::numerics::CMatrix;

pub const CHANNEL_SCHEMA: &str = "linkabs/channels/v1";
/// Algorithm tag recorded in dump files.
pub const RNG_ALGORITHM: &str = "chacha8-polar-box-muller";

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid config: {field}: {msg}")]
    InvalidConfig { field: String, msg: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {msg}")]
    Dump { path: String, msg: String },
}

/// Two-cell scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Receive antenna count N_r.
    pub n_rx: usize,
    /// Serving layer count V1 (1 or 2).
    pub v1: usize,
    /// Interfering layer count V2 (1 or 2).
    pub v2: usize,
    /// Subcarriers per codeword K.
    pub n_subcarriers: usize,
    /// Noise variance (linear power).
    pub noise_var: f64,
    /// Interferer amplitude multiplier rho >= 0.
    pub interferer_scale: f64,
    /// Master RNG seed.
    pub seed: u64,
}

impl ScenarioConfig {
    /// A 2x2 single-layer-per-cell scenario with K = 48 subcarriers.
    pub fn default_2x2(noise_var: f64, rho: f64, seed: u64) -> Self {
        ScenarioConfig {
            n_rx: 2,
            v1: 1,
            v2: 1,
            n_subcarriers: 48,
            noise_var,
            interferer_scale: rho,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let err = |field: &str, msg: String| {
            Err(ChannelError::InvalidConfig {
                field: field.to_string(),
                msg,
            })
        };
        if !(1..=2).contains(&self.v1) {
            return err("v1", format!("{} not in {{1, 2}}", self.v1));
        }
        if !(1..=2).contains(&self.v2) {
            return err("v2", format!("{} not in {{1, 2}}", self.v2));
        }
        if self.n_rx < self.v1.max(self.v2) {
            return err("n_rx", format!("{} below max(v1, v2)", self.n_rx));
        }
        if self.n_subcarriers < 1 {
            return err("n_subcarriers", "must be >= 1".to_string());
        }
        if self.noise_var.is_nan() || self.noise_var <= 0.0 {
            return err("noise_var", format!("{} must be > 0", self.noise_var));
        }
        if self.interferer_scale.is_nan() || self.interferer_scale < 0.0 {
            return err(
                "interferer_scale",
                format!("{} must be >= 0", self.interferer_scale),
            );
        }
        Ok(())
    }
}

/// One OFDM channel realization: per-subcarrier serving and interfering
/// effective matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub subcarriers: Vec<SubcarrierChannel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierChannel {
    pub h1: CMatrix,
    pub h2: CMatrix,
}

fn draw_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(draw_unit_complex_gaussian(rng) * scale);
    }
    CMatrix::new(rows, cols, data)
}

fn generate_with_stream(config: &ScenarioConfig, stream: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let subcarriers = (0..config.n_subcarriers)
        .map(|_| {
            let h1 = draw_matrix(&mut rng, config.n_rx, config.v1, 1.0);
            let h2 = draw_matrix(&mut rng, config.n_rx, config.v2, config.interferer_scale);
            SubcarrierChannel { h1, h2 }
        })
        .collect();
    ChannelRealization { subcarriers }
}

/// Generates one realization (deterministic in the config seed).
pub fn generate(config: &ScenarioConfig) -> ChannelRealization {
    debug_assert!(config.validate().is_ok());
    generate_with_stream(config, 0)
}

/// Generates `count` independent realizations; realization `i` uses
/// ChaCha8 stream `i` of the master seed, so `count = 1` reproduces
/// `generate` exactly.
pub fn generate_set(config: &ScenarioConfig, count: usize) -> Vec<ChannelRealization> {
    debug_assert!(config.validate().is_ok());
    assert!(count >= 1, "count must be >= 1");
    (0..count as u64)
        .map(|stream| generate_with_stream(config, stream))
        .collect()
}

// ---------------------------------------------------------------------------
// JSON dump format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DumpRng {
    algorithm: String,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DumpRealization {
    stream: u64,
    subcarriers: Vec<DumpSubcarrier>,
}

#[derive(Serialize, Deserialize)]
struct DumpSubcarrier {
    h1: Vec<Vec<[f64; 2]>>,
    h2: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelDumpFile {
    schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest_digest: Option<String>,
    rng: DumpRng,
    config: ScenarioConfig,
    realizations: Vec<DumpRealization>,
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|r| {
            (0..m.cols())
                .map(|c| {
                    let z = m.get(r, c);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

fn matrix_from_rows(rows: &[Vec<[f64; 2]>], path: &str) -> Result<CMatrix, ChannelError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(ChannelError::Dump {
            path: path.to_string(),
            msg: "empty matrix in dump".to_string(),
        });
    }
    let cols = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for row in rows {
        if row.len() != cols {
            return Err(ChannelError::Dump {
                path: path.to_string(),
                msg: "ragged matrix in dump".to_string(),
            });
        }
        for &[re, im] in row {
            data.push(Complex64::new(re, im));
        }
    }
    Ok(CMatrix::new(rows.len(), cols, data))
}

/// Serializes a channel set to the JSON dump format. Floats are encoded
/// with shortest-round-trip decimals, so the dump is lossless.
pub fn dump_to_json(
    config: &ScenarioConfig,
    set: &[ChannelRealization],
    manifest_digest: Option<&str>,
) -> String {
    let file = ChannelDumpFile {
        schema: CHANNEL_SCHEMA.to_string(),
        manifest_digest: manifest_digest.map(|s| s.to_string()),
        rng: DumpRng {
            algorithm: RNG_ALGORITHM.to_string(),
            seed: config.seed,
        },
        config: config.clone(),
        realizations: set
            .iter()
            .enumerate()
            .map(|(i, r)| DumpRealization {
                stream: i as u64,
                subcarriers: r
                    .subcarriers
                    .iter()
                    .map(|s| DumpSubcarrier {
                        h1: matrix_to_rows(&s.h1),
                        h2: matrix_to_rows(&s.h2),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("dump serialization cannot fail")
}

pub fn write_dump(
    path: &Path,
    config: &ScenarioConfig,
    set: &[ChannelRealization],
    manifest_digest: Option<&str>,
) -> Result<(), ChannelError> {
    io::write_file(path, &dump_to_json(config, set, manifest_digest))?;
    Ok(())
}

/// Reads a channel dump, validating the schema version and the config.
pub fn read_dump(path: &Path) -> Result<(ScenarioConfig, Vec<ChannelRealization>), ChannelError> {
    let text = io::read_to_string(path)?;
    let path_str = path.display().to_string();
    let file: ChannelDumpFile =
        serde_json::from_str(&text).map_err(|e| ChannelError::Dump {
            path: path_str.clone(),
            msg: e.to_string(),
        })?;
    io::check_schema(&file.schema, "linkabs/channels", 1, &path_str)?;
    file.config.validate()?;
    let mut set = Vec::with_capacity(file.realizations.len());
    for real in &file.realizations {
        if real.subcarriers.len() != file.config.n_subcarriers {
            return Err(ChannelError::Dump {
                path: path_str.clone(),
                msg: format!(
                    "realization has {} subcarriers, config says {}",
                    real.subcarriers.len(),
                    file.config.n_subcarriers
                ),
            });
        }
        let subcarriers = real
            .subcarriers
            .iter()
            .map(|s| {
                Ok(SubcarrierChannel {
                    h1: matrix_from_rows(&s.h1, &path_str)?,
                    h2: matrix_from_rows(&s.h2, &path_str)?,
                })
            })
            .collect::<Result<Vec<_>, ChannelError>>()?;
        set.push(ChannelRealization { subcarriers });
    }
    Ok((file.config, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(rho: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_rx: 2,
            v1: 1,
            v2: 1,
            n_subcarriers: 4,
            noise_var: 1.0,
            interferer_scale: rho,
            seed,
        }
    }

    #[test]
    fn zero_rho_zeroes_interferer() {
        let real = generate(&config(0.0, 1));
        for s in &real.subcarriers {
            for z in s.h2.entries() {
                assert_eq!(*z, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = generate(&config(1.0, 99));
        let b = generate(&config(1.0, 99));
        assert_eq!(a, b);
    }

    #[test]
    fn count_one_matches_generate() {
        let cfg = config(0.7, 5);
        let single = generate(&cfg);
        let set = generate_set(&cfg, 1);
        assert_eq!(set.len(), 1);
        assert_eq!(set[0], single);
    }

    #[test]
    fn different_master_seeds_differ() {
        let a = generate_set(&config(1.0, 1), 3);
        let b = generate_set(&config(1.0, 2), 3);
        assert_ne!(a, b);
    }

    #[test]
    fn set_realizations_pairwise_distinct() {
        let set = generate_set(&config(1.0, 7), 100);
        assert_eq!(set.len(), 100);
        for i in 0..set.len() {
            for j in (i + 1)..set.len() {
                assert_ne!(set[i], set[j], "realizations {i} and {j} collide");
            }
        }
    }

    #[test]
    fn entry_power_near_unit_variance() {
        // 10^5 draws: sample mean power of h1 entries within 1 +- 0.02
        // (about 3 standard errors), h2 within rho^2 +- 3 SE.
        let rho = 0.5;
        let cfg = ScenarioConfig {
            n_rx: 2,
            v1: 1,
            v2: 1,
            n_subcarriers: 25_000,
            noise_var: 1.0,
            interferer_scale: rho,
            seed: 31,
        };
        let real = generate(&cfg);
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        let mut n = 0usize;
        for s in &real.subcarriers {
            for z in s.h1.entries() {
                p1 += z.norm_sqr();
            }
            for z in s.h2.entries() {
                p2 += z.norm_sqr();
            }
            n += 2;
        }
        let mean1 = p1 / n as f64;
        let mean2 = p2 / n as f64;
        // |h|^2 is Exp(1): std of the mean over n samples is 1/sqrt(n)
        let se = 1.0 / (n as f64).sqrt();
        assert!((mean1 - 1.0).abs() < 3.0 * se, "h1 power {mean1}");
        assert!(
            (mean2 - rho * rho).abs() < 3.0 * se * rho * rho,
            "h2 power {mean2}"
        );
    }

    #[test]
    fn invalid_config_reports_field() {
        let mut cfg = config(1.0, 1);
        cfg.v1 = 3;
        match cfg.validate() {
            Err(ChannelError::InvalidConfig { field, .. }) => assert_eq!(field, "v1"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn dump_roundtrip_lossless() {
        let cfg = config(1.3, 11);
        let set = generate_set(&cfg, 3);
        let dir = std::env::temp_dir().join("linkabs_channels_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dump.json");
        write_dump(&path, &cfg, &set, Some("deadbeef")).unwrap();
        let (cfg2, set2) = read_dump(&path).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(set, set2);
    }
}
