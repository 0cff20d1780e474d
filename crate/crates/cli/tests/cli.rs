use std::path::Path;

use bcs_edge_cli::manifest::{manifest_path, parse_manifest};
use bcs_edge_cli::{parse_args, run, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

fn run_args(args: &[&str]) -> i32 {
    let mut argv = vec!["bcs-edge"];
    argv.extend_from_slice(args);
    run(argv)
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn missing_mu_is_a_usage_error() {
    assert_eq!(run_args(&["tc-bulk", "--v", "1"]), EXIT_USAGE);
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let code = run_args(&["ratio-curve", "--mu", "1", "--v-min", "1", "--v-max", "2", "--v-count", "0"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn unknown_flag_and_help() {
    assert_eq!(run_args(&["tc-bulk", "--mu", "1", "--nope"]), EXIT_USAGE);
    assert_eq!(run_args(&["--help"]), EXIT_OK);
    assert!(parse_args(["bcs-edge", "spectrum", "--mu", "-1", "--t", "1"]).is_ok());
}

#[test]
fn bulk_temperature_grows_with_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bulk.csv");
    let code = run_args(&["tc-bulk", "--mu", "1", "--v", "1", "--v", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v = column(&out, "v");
    let tc = column(&out, "tc");
    assert_eq!(v, vec![1.0, 2.0]);
    assert!(tc[0] < tc[1], "{tc:?}");
    assert!(manifest_path(&out).exists());
}

#[test]
fn negative_mu_rejected_where_required() {
    assert_eq!(run_args(&["trial-gap", "--mu", "-1", "--t", "0.1"]), EXIT_USAGE);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# bulk run\nmu = 1\nv = 1, 2\n").unwrap();
    let out = dir.path().join("a.csv");
    let code = run_args(&["tc-bulk", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(column(&out, "v"), vec![1.0, 2.0]);

    // the flag wins over the file
    let out2 = dir.path().join("b.csv");
    let code = run_args(&[
        "tc-bulk",
        "--config",
        cfg.to_str().unwrap(),
        "--v",
        "5",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(column(&out2, "v"), vec![5.0]);
    let m = parse_manifest(&std::fs::read_to_string(manifest_path(&out2)).unwrap()).unwrap();
    assert_eq!(m.config["v"], "5");
    assert!(!m.args.iter().any(|a| a == "--config"));

    std::fs::write(&cfg, "mu = 1\nwidth = 3\n").unwrap();
    assert_eq!(run_args(&["tc-bulk", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn verify_is_deterministic_and_detects_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let code = run_args(&["verify", "--mu", "1", "--samples", "2000", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    let code = run_args(&[
        "verify",
        "--mu",
        "1",
        "--samples",
        "2000",
        "--perturb-kernel",
        "1e-2",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_NUMERIC);
    let failed = read_csv(&c).iter().filter(|r| &r[6] == "false").count();
    assert!(failed >= 6, "{failed}");
}

#[test]
fn replay_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trial.json");
    let code = run_args(&[
        "trial-gap",
        "--mu",
        "1",
        "--b",
        "1",
        "--t",
        "1e-3",
        "--t",
        "0.5",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let again = dir.path().join("again.json");
    let code = run_args(&[
        "replay",
        manifest_path(&out).to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn corrupt_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bad.manifest.json");
    std::fs::write(&m, "{\"command\": 3}").unwrap();
    assert_eq!(run_args(&["replay", m.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn fuzz_corpus_seeds_parse_without_panicking() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let seeds = |target: &str| -> Vec<String> {
        std::fs::read_dir(root.join(target))
            .unwrap()
            .map(|e| std::fs::read_to_string(e.unwrap().path()).unwrap())
            .collect()
    };
    for text in seeds("parse_config") {
        let _ = bcs_edge_cli::config::parse_config(&text);
    }
    let manifests = seeds("parse_manifest");
    assert!(manifests.iter().filter(|t| parse_manifest(t).is_ok()).count() >= 2);
    for text in seeds("parse_args") {
        let _ = parse_args(std::iter::once("bcs-edge").chain(text.split('\0')));
    }
}
