//! Flat-file plumbing shared by all persisted formats.
//!
//! Every file this crate writes carries a schema tag of the form
//! `linkabs/<kind>/v<major>`; readers reject files whose major version
//! they do not understand. CSV files start with `# key = value` metadata
//! lines (the first one always being `schema`), followed by a column
//! header and data rows. Floats are written with Rust's shortest
//! round-trip formatting, so re-reading a file reproduces the exact
//! binary values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing schema tag")]
    MissingSchema { path: String },
    #[error("{path}: schema {found} not supported (expected {expected})")]
    SchemaMismatch {
        path: String,
        found: String,
        expected: String,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: missing metadata key {key}")]
    MissingKey { path: String, key: String },
}

/// Shortest round-trip decimal encoding of an f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn parse_f64(s: &str, path: &str, line: usize) -> Result<f64, FormatError> {
    s.trim().parse::<f64>().map_err(|_| FormatError::Malformed {
        path: path.to_string(),
        line,
        msg: format!("invalid float {s:?}"),
    })
}

pub fn parse_usize(s: &str, path: &str, line: usize) -> Result<usize, FormatError> {
    s.trim().parse::<usize>().map_err(|_| FormatError::Malformed {
        path: path.to_string(),
        line,
        msg: format!("invalid integer {s:?}"),
    })
}

/// In-memory form of a metadata-bearing CSV file.
#[derive(Debug, Clone)]
pub struct CsvDoc {
    pub schema: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub path: String,
}

impl CsvDoc {
    pub fn meta_value(&self, key: &str) -> Result<&str, FormatError> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| FormatError::MissingKey {
                path: self.path.clone(),
                key: key.to_string(),
            })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, FormatError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| FormatError::Malformed {
                path: self.path.clone(),
                line: 0,
                msg: format!("missing column {name:?}"),
            })
    }
}

/// Renders a CSV document to a string. `schema` must be the full tag,
/// e.g. `linkabs/mib-table/v1`.
pub fn render_csv(
    schema: &str,
    meta: &[(&str, String)],
    columns: &[&str],
    rows: &[Vec<String>],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schema = {schema}");
    for (k, v) in meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let _ = writeln!(out, "{}", columns.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_to_string(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Checks a schema tag against an expected `linkabs/<kind>` prefix and
/// major version.
pub fn check_schema(
    schema: &str,
    expected_kind: &str,
    expected_major: u32,
    path: &str,
) -> Result<(), FormatError> {
    let expected = format!("{expected_kind}/v{expected_major}");
    let ok = schema
        .strip_prefix(expected_kind)
        .and_then(|rest| rest.strip_prefix("/v"))
        .and_then(|v| v.split('.').next())
        .and_then(|v| v.parse::<u32>().ok())
        .map(|major| major == expected_major)
        .unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(FormatError::SchemaMismatch {
            path: path.to_string(),
            found: schema.to_string(),
            expected,
        })
    }
}

/// Parses a metadata-bearing CSV file and validates its schema tag.
pub fn read_csv(
    path: &Path,
    expected_kind: &str,
    expected_major: u32,
) -> Result<CsvDoc, FormatError> {
    let text = read_to_string(path)?;
    parse_csv(&text, &path.display().to_string(), expected_kind, expected_major)
}

pub fn parse_csv(
    text: &str,
    path: &str,
    expected_kind: &str,
    expected_major: u32,
) -> Result<CsvDoc, FormatError> {
    let mut schema: Option<String> = None;
    let mut meta = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let Some((k, v)) = comment.split_once('=') else {
                continue;
            };
            let key = k.trim().to_string();
            let value = v.trim().to_string();
            if key == "schema" {
                schema = Some(value);
            } else {
                meta.push((key, value));
            }
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        match &columns {
            None => columns = Some(fields),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(FormatError::Malformed {
                        path: path.to_string(),
                        line: idx + 1,
                        msg: format!("expected {} fields, found {}", cols.len(), fields.len()),
                    });
                }
                rows.push(fields);
            }
        }
    }
    let schema = schema.ok_or_else(|| FormatError::MissingSchema {
        path: path.to_string(),
    })?;
    check_schema(&schema, expected_kind, expected_major, path)?;
    Ok(CsvDoc {
        schema,
        meta,
        columns: columns.unwrap_or_default(),
        rows,
        path: path.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let text = render_csv(
            "linkabs/test/v1",
            &[("alpha", "1".to_string())],
            &["x", "y"],
            &[vec!["0.1".into(), "2".into()]],
        );
        let doc = parse_csv(&text, "mem", "linkabs/test", 1).unwrap();
        assert_eq!(doc.meta_value("alpha").unwrap(), "1");
        assert_eq!(doc.columns, vec!["x", "y"]);
        assert_eq!(doc.rows.len(), 1);
    }

    #[test]
    fn rejects_unknown_major() {
        let text = render_csv("linkabs/test/v2", &[], &["x"], &[]);
        assert!(parse_csv(&text, "mem", "linkabs/test", 1).is_err());
    }

    #[test]
    fn f64_text_roundtrip_is_exact() {
        for &v in &[0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 0.25] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s}");
        }
    }
}
