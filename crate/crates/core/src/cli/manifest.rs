//! Run manifests: every command records its resolved configuration, RNG
//! provenance and input digests; every output file carries the digest of
//! that record, so artifacts can be traced to the exact invocation that
//! produced them. Manifests contain no timestamps, so re-running a
//! command with identical inputs reproduces byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::FormatError;

pub const MANIFEST_SCHEMA: &str = "linkabs/manifest/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// The digested part of a manifest: everything that determines the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCore {
    pub schema: String,
    pub command: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub core: ManifestCore,
    pub digest: String,
    pub outputs: Vec<FileDigest>,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn digest_file(path: &Path) -> Result<FileDigest, FormatError> {
    let bytes = fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: digest_bytes(&bytes),
    })
}

impl ManifestCore {
    pub fn new(
        command: &str,
        rng_algorithm: &str,
        master_seed: Option<u64>,
        config: serde_json::Value,
        inputs: Vec<FileDigest>,
    ) -> Self {
        ManifestCore {
            schema: MANIFEST_SCHEMA.to_string(),
            command: command.to_string(),
            tool_version: crate::io::TOOL_VERSION.to_string(),
            rng_algorithm: rng_algorithm.to_string(),
            master_seed,
            config,
            inputs,
        }
    }

    /// Digest of the canonical JSON encoding of the core record. Output
    /// files embed this value.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serialization cannot fail");
        digest_bytes(&bytes)
    }
}

/// Writes the full manifest (core + its digest + output digests) next to
/// the outputs it describes.
pub fn write_manifest(
    path: &Path,
    core: ManifestCore,
    outputs: Vec<FileDigest>,
) -> Result<(), FormatError> {
    let digest = core.digest();
    let manifest = Manifest {
        core,
        digest,
        outputs,
    };
    let text =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    crate::io::write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_across_encodings() {
        let core = ManifestCore::new(
            "gen-channels",
            "chacha8",
            Some(7),
            serde_json::json!({"count": 3, "rho": 1.0}),
            vec![],
        );
        let a = core.digest();
        let b = core.clone().digest();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn digest_changes_with_config() {
        let mk = |count: u32| {
            ManifestCore::new(
                "gen-channels",
                "chacha8",
                Some(7),
                serde_json::json!({ "count": count }),
                vec![],
            )
            .digest()
        };
        assert_ne!(mk(3), mk(4));
    }

    #[test]
    fn manifest_file_roundtrip() {
        let dir = std::env::temp_dir().join("linkabs_manifest_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.manifest.json");
        let core = ManifestCore::new("test", "chacha8", None, serde_json::json!({}), vec![]);
        let digest = core.digest();
        write_manifest(&path, core, vec![]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.digest, digest);
        assert_eq!(back.core.schema, MANIFEST_SCHEMA);
    }
}
