use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghostfield::samplers::dump::read_dump;
use ghostfield_cli::{RunManifest, EXIT_CAPACITY, EXIT_CONFIG, EXIT_FAILED, EXIT_IO, EXIT_USAGE};

fn ghostfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CORPUS: &str = r#"
spacings = [1.0, 0.5]
fields = [0.0, 0.7]

[[graphs]]
name = "1x2"
sites = [[0, 0], [1, 0]]

[[graphs]]
name = "2x2"
sites = [[0, 0], [1, 0], [0, 1], [1, 1]]
"#;

#[test]
fn verify_small_corpus_passes_and_writes_one_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", SMALL_CORPUS);
    let out = tmp.path().join("out");
    for _ in 0..2 {
        let o = ghostfield(&["verify", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.iter().filter(|n| n.contains("manifest")).count(), 1);
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.subcommand, "verify");
    assert_eq!(m.outputs, vec!["verify.json".to_string()]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    for check in ghostfield_cli::verify::check_names() {
        assert!(report["worst"][check]["deviation"].as_f64().unwrap() <= 1e-10, "{check}");
    }
}

#[test]
fn corrupted_coupling_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("internal_coupling = 0.45\n{SMALL_CORPUS}");
    let cfg = write_config(tmp.path(), "v.toml", &text);
    let o = ghostfield(&["verify", "--config", s(&cfg)]);
    assert_eq!(code(&o), EXIT_FAILED as i32);
    assert!(stderr(&o).contains("COUPLINGS"), "{}", stderr(&o));
}

#[test]
fn empty_corpus_reports_no_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "graphs = []\n");
    let o = ghostfield(&["verify", "--config", s(&cfg)]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("no graphs"), "{}", stderr(&o));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    for text in ["spacings = [1.0,", "colour = \"blue\"\n", "tolerance = \"tiny\"\n"] {
        let cfg = write_config(tmp.path(), "v.toml", text);
        let o = ghostfield(&["verify", "--config", s(&cfg)]);
        assert_eq!(code(&o), EXIT_USAGE as i32, "{text}: {}", stderr(&o));
    }
}

#[test]
fn capacity_error_names_the_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_CORPUS}\n[caps]\nspins = 3\n");
    let cfg = write_config(tmp.path(), "v.toml", &text);
    let o = ghostfield(&["verify", "--config", s(&cfg)]);
    assert_eq!(code(&o), EXIT_CAPACITY as i32, "{}", stderr(&o));
    assert!(stderr(&o).contains("`2x2`"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let o = ghostfield(&["verify", "--config", "/nonexistent/ghostfield.toml"]);
    assert_eq!(code(&o), EXIT_IO as i32);
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let o = ghostfield(&["experiment", "percolation", "--seed", "1"]);
    assert_eq!(code(&o), EXIT_USAGE as i32);
    assert!(stderr(&o).contains("unknown experiment"));
    let o = ghostfield(&["frobnicate"]);
    assert_eq!(code(&o), EXIT_USAGE as i32);
}

#[test]
fn experiment_requires_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = ghostfield(&["experiment", "rectangles", "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_CONFIG as i32);
    assert!(stderr(&o).contains("seed"));
    let cfg = write_config(tmp.path(), "e.toml", "kind = \"onearm\"\nseed = 3\n");
    let o = ghostfield(&["experiment", "rectangles", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_CONFIG as i32, "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = write_config(tmp.path(), "file", "");
    let out = blocker.join("sub");
    let o = ghostfield(&["experiment", "rectangles", "--seed", "1", "--budget-scale", "0.01", "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_IO as i32, "{}", stderr(&o));
}

const TINY_ONEARM: &str = r#"
seed = 17
spacings = [1.0]
radii = [4, 8]
sweeps = 40
burn_in = 10
batches = 4
"#;

#[test]
fn onearm_smoke_run_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "o.toml", TINY_ONEARM);
    let runs: Vec<PathBuf> = ["a", "b"]
        .iter()
        .zip(["1", "3"])
        .map(|(d, workers)| {
            let out = tmp.path().join(d);
            let o = ghostfield(&["experiment", "onearm", "--config", s(&cfg), "--out", s(&out), "--workers", workers]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            out
        })
        .collect();
    for f in ["onearm.csv", "onearm.json"] {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(runs[0].join("onearm.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "a,h,r,probability,se");
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((0.0..=1.0).contains(&v[3]) && v[4] > 0.0, "{line}");
    }
    let m = RunManifest::read(&runs[0]).unwrap();
    assert_eq!(m.seed, Some(17));
    assert_eq!(m.config["sweeps"], 40);
    assert_eq!(m.outputs, vec!["onearm.csv".to_string(), "onearm.json".to_string()]);
    assert!(!m.code_version.is_empty());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "o.toml", TINY_ONEARM);
    let out = tmp.path().join("o");
    let o = ghostfield(&[
        "experiment", "onearm", "--config", s(&cfg), "--out", s(&out), "--seed", "99", "--budget-scale", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.seed, Some(99));
    assert_eq!(m.config["sweeps"], 80);
    assert_eq!(m.config["radii"], serde_json::json!([4, 8]));
}

#[test]
fn decay_csv_has_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.toml",
        "seed = 5\nsize = 24\nfields = [0.0, 0.4]\ndistances = [1, 2, 3, 4]\nsweeps = 60\nburn_in = 20\nbatches = 6\n",
    );
    let out = tmp.path().join("d");
    let o = ghostfield(&["experiment", "decay", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("decay.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "h,distance,covariance,se");
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn sample_dumps_are_reproducible_and_readable() {
    let tmp = tempfile::tempdir().unwrap();
    for measure in ["fk", "trace"] {
        let cfg = write_config(
            tmp.path(),
            "s.toml",
            &format!("seed = 8\nmeasure = \"{measure}\"\nwidth = 6\nheight = 4\nsamples = 25\nburn_in = 10\nthin = 2\n"),
        );
        let dirs: Vec<PathBuf> = ["x", "y"]
            .iter()
            .map(|d| {
                let out = tmp.path().join(format!("{measure}-{d}"));
                let o = ghostfield(&["sample", "--config", s(&cfg), "--out", s(&out)]);
                assert_eq!(code(&o), 0, "{}", stderr(&o));
                out
            })
            .collect();
        for f in ["samples.bin", "samples.csv"] {
            assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap());
        }
        let (header, records) = read_dump(fs::File::open(dirs[0].join("samples.bin")).unwrap()).unwrap();
        assert_eq!(header.seed, 8);
        assert_eq!(records.len(), 25);
        assert_eq!(records.last().unwrap().0, 10 + 25 * 2);
        assert_eq!(fs::read_to_string(dirs[0].join("samples.csv")).unwrap().lines().count(), 26);
    }
}

#[test]
fn wired_traces_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", "seed = 1\nmeasure = \"trace\"\nboundary = \"wired\"\n");
    let o = ghostfield(&["sample", "--config", s(&cfg), "--out", s(&tmp.path().join("s"))]);
    assert_eq!(code(&o), EXIT_CONFIG as i32);
}
