//! End-to-end exercise of the command-line pipeline at tiny sizes:
//! channel generation, table and curve building, training, abstraction
//! and validation, plus reproducibility and exit-code contracts.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_linkabs")
}

fn run(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .current_dir(dir)
        .env("LINKABS_WORKERS", "1")
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("linkabs_cli_test").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn invalid_configs_exit_with_usage_code() {
    let dir = workdir("usage");
    let (code, _, err) = run(
        &dir,
        &[
            "gen-channels",
            "--v1",
            "3",
            "--count",
            "2",
            "--out",
            "ch.json",
        ],
    );
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("v1"), "error should name the field: {err}");

    let (code, _, _) = run(
        &dir,
        &["gen-channels", "--count", "0", "--out", "ch.json"],
    );
    assert_eq!(code, 2);

    // unknown flag is a clap usage error
    let (code, _, _) = run(&dir, &["gen-channels", "--bogus"]);
    assert_eq!(code, 2);
}

#[test]
fn gen_channels_is_byte_reproducible() {
    let dir = workdir("repro");
    let args = [
        "gen-channels",
        "--subcarriers",
        "4",
        "--rho",
        "1.5",
        "--seed",
        "42",
        "--count",
        "3",
        "--out",
        "a.json",
    ];
    let (code, _, err) = run(&dir, &args);
    assert_eq!(code, 0, "{err}");
    let mut args_b = args;
    args_b[args.len() - 1] = "b.json";
    let (code, _, _) = run(&dir, &args_b);
    assert_eq!(code, 0);
    let a = std::fs::read(dir.join("a.json")).unwrap();
    let b = std::fs::read(dir.join("b.json")).unwrap();
    assert_eq!(a, b, "same invocation must produce identical bytes");
    assert!(dir.join("a.json.manifest.json").exists());
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("manifest_digest"));
    assert!(text.contains("chacha8"));
}

#[test]
fn full_small_pipeline_produces_all_artifacts() {
    let dir = workdir("pipeline");
    let k = "24";

    // channels for training and held-out evaluation
    for (seed, name) in [("7", "train.json"), ("8", "held.json")] {
        let (code, _, err) = run(
            &dir,
            &[
                "gen-channels",
                "--subcarriers",
                k,
                "--rho",
                "2.0",
                "--seed",
                seed,
                "--count",
                "6",
                "--out",
                name,
            ],
        );
        assert_eq!(code, 0, "{err}");
    }

    // MIB table (coarse grid still covers -20..30 dB)
    let (code, _, err) = run(
        &dir,
        &[
            "build-mib-tables",
            "--orders",
            "4",
            "--step-db",
            "1",
            "--out-dir",
            "tables",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let table_path = dir.join("tables/mib_4.csv");
    assert!(table_path.exists());
    let table_text = std::fs::read_to_string(&table_path).unwrap();
    assert!(table_text.starts_with("# schema = linkabs/mib-table/v1"));
    assert!(table_text.contains("manifest_digest"));

    // AWGN reference curve for MCS 9 at this frame size
    let (code, _, err) = run(
        &dir,
        &[
            "gen-awgn-lut",
            "--mcs",
            "9",
            "--subcarriers",
            k,
            "--start-db",
            "0",
            "--stop-db",
            "8",
            "--step-db",
            "1",
            "--min-block-errors",
            "25",
            "--max-blocks",
            "400",
            "--seed",
            "11",
            "--out-dir",
            "luts",
            "--log",
            "measurements.csv",
        ],
    );
    assert_eq!(code, 0, "{err}");
    assert!(dir.join("luts/lut_mcs9.csv").exists());
    assert!(dir.join("measurements.csv").exists());

    // oracle scatter on a small set
    let (code, out, err) = run(
        &dir,
        &[
            "oracle-scatter",
            "--channels",
            "held.json",
            "--mib-table",
            "tables/mib_4.csv",
            "--mod2",
            "4",
            "--snr-db",
            "4",
            "--noise-samples",
            "150",
            "--seed",
            "3",
            "--out",
            "scatter.csv",
        ],
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("points"));
    let scatter = std::fs::read_to_string(dir.join("scatter.csv")).unwrap();
    assert!(scatter.starts_with("# schema = linkabs/oracle-scatter/v1"));

    // train adaptive and static models
    for (flag, out_name) in [(None, "model_a.csv"), (Some("--static-model"), "model_s.csv")] {
        let mut args = vec![
            "train",
            "--channels",
            "train.json",
            "--mib-table",
            "tables/mib_4.csv",
            "--lut",
            "luts/lut_mcs9.csv",
            "--mcs1",
            "9",
            "--mod2",
            "4",
            "--snrs",
            "0,4,8",
            "--min-block-errors",
            "20",
            "--max-blocks",
            "300",
            "--seed",
            "5",
            "--out",
            out_name,
            "--trace",
            "trace.csv",
        ];
        if let Some(f) = flag {
            args.push(f);
        }
        let (code, out, err) = run(&dir, &args);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("fitted"), "{out}");
        assert!(dir.join(out_name).exists());
    }
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# schema = linkabs/search-trace/v1"));

    // abstraction reports with measured BLER on held-out channels
    for (model, report) in [("model_a.csv", "report_a.csv"), ("model_s.csv", "report_s.csv")] {
        let (code, _, err) = run(
            &dir,
            &[
                "abstract",
                "--channels",
                "held.json",
                "--model",
                model,
                "--mcs1",
                "9",
                "--mod2",
                "4",
                "--mib-table",
                "tables/mib_4.csv",
                "--lut",
                "luts/lut_mcs9.csv",
                "--snrs",
                "2,5",
                "--measure",
                "--min-block-errors",
                "20",
                "--max-blocks",
                "200",
                "--seed",
                "13",
                "--out",
                report,
            ],
        );
        assert_eq!(code, 0, "{err}");
        let text = std::fs::read_to_string(dir.join(report)).unwrap();
        assert!(text.starts_with("# schema = linkabs/abstraction-report/v1"));
        // 6 realizations x 2 SNRs = 12 rows with measured columns filled
        let rows: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("seed") && !l.is_empty())
            .collect();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| !r.ends_with(",,")), "measured columns empty");
    }

    // validation stats over both reports
    let (code, out, err) = run(
        &dir,
        &[
            "validate",
            "--report",
            "report_a.csv",
            "--report",
            "report_s.csv",
            "--lut",
            "luts/lut_mcs9.csv",
            "--out",
            "stats.csv",
        ],
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("rms"), "{out}");
    let stats = std::fs::read_to_string(dir.join("stats.csv")).unwrap();
    assert!(stats.starts_with("# schema = linkabs/validation-stats/v1"));
    let stat_rows: Vec<&str> = stats
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("label") && !l.is_empty())
        .collect();
    assert_eq!(stat_rows.len(), 2);

    // every command left a manifest next to its outputs
    for manifest in [
        "train.json.manifest.json",
        "tables/mib_tables.manifest.json",
        "luts/awgn_luts.manifest.json",
        "scatter.csv.manifest.json",
        "model_a.csv.manifest.json",
        "report_a.csv.manifest.json",
        "stats.csv.manifest.json",
    ] {
        assert!(dir.join(manifest).exists(), "missing {manifest}");
    }
}

#[test]
fn unknown_schema_majors_are_rejected() {
    let dir = workdir("schema");
    let (code, _, err) = run(
        &dir,
        &[
            "gen-channels",
            "--subcarriers",
            "4",
            "--count",
            "2",
            "--seed",
            "1",
            "--out",
            "ch.json",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.join("ch.json")).unwrap();
    let tampered = text.replace("linkabs/channels/v1", "linkabs/channels/v9");
    std::fs::write(dir.join("ch.json"), tampered).unwrap();
    let (code, _, err) = run(
        &dir,
        &[
            "oracle-scatter",
            "--channels",
            "ch.json",
            "--mib-table",
            "missing.csv",
            "--out",
            "s.csv",
        ],
    );
    // data/format error: either the tampered schema or the missing table
    assert_eq!(code, 3, "{err}");
}
