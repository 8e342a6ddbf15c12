use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SMALL_CHAIN: [&str; 6] = ["--sample-size", "100", "--burnin", "200", "--interval", "2"];

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-influence"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["--out-dir", p(dir), "--seed", "5", "simulate", "--n", "30"];
    args.extend(extra);
    let out = cli(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn simulate_fit_and_adjust_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, &[]);
    for name in [
        "network1.dat",
        "network2.dat",
        "network3.dat",
        "behavior.dat",
        "covariate.dat",
        "sim.json",
    ] {
        assert!(d.join(name).exists(), "{name} missing");
    }

    for w in ["1", "2"] {
        let adj = d.join(format!("network{w}.dat"));
        let attr = format!("c={}:{w}", p(&d.join("covariate.dat")));
        let mut args = vec![
            "--out-dir",
            p(d),
            "fit-lsm",
            "--adj",
            p(&adj),
            "--wave",
            w,
            "--attrs",
            &attr,
        ];
        args.extend(SMALL_CHAIN);
        args.push("--draws-csv");
        let out = cli(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let fit = json(&d.join(format!("lsm-fit-w{w}.json")));
        assert_eq!(fit["positions"].as_array().unwrap().len(), 30);
        let draws = fs::read_to_string(d.join(format!("lsm-draws-w{w}.csv"))).unwrap();
        assert_eq!(draws.lines().count(), 101);
    }

    let behavior = format!("behavior={}", p(&d.join("behavior.dat")));
    let covariate = format!("covariate={}", p(&d.join("covariate.dat")));
    let adj: Vec<String> = (1..=3)
        .map(|w| p(&d.join(format!("network{w}.dat"))).to_string())
        .collect();
    let fits = [
        p(&d.join("lsm-fit-w1.json")).to_string(),
        p(&d.join("lsm-fit-w2.json")).to_string(),
    ];
    let mut base = vec!["--out-dir", p(d), "fit-influence", "--adj"];
    base.extend(adj.iter().map(String::as_str));
    base.extend([
        "--attr",
        &behavior,
        "--attr",
        &covariate,
        "--outcome",
        "behavior",
    ]);
    base.extend(["--covariates", "covariate"]);

    let out = cli(&base);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut adjusted = base.clone();
    adjusted.push("--adjust");
    adjusted.extend(fits.iter().map(String::as_str));
    adjusted.push("--panel-csv");
    let out = cli(&adjusted);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let naive = json(&d.join("influence-naive.json"));
    let adj_fit = json(&d.join("influence-adjusted.json"));
    let n_coef = |v: &Value| v["coefficients"].as_array().unwrap().len();
    assert_eq!(n_coef(&adj_fit), n_coef(&naive) + 2);
    assert_eq!(naive["df_resid"], 2 * 30 - 4);
    assert_eq!(naive["n_obs"], 60);
    let panel = fs::read_to_string(d.join("influence-adjusted-panel.csv")).unwrap();
    assert_eq!(panel.lines().count(), 61);
    assert!(fs::read_to_string(d.join("influence-adjusted.txt"))
        .unwrap()
        .contains("expo"));

    let manifest = json(&d.join("fit-influence-manifest.json"));
    assert_eq!(manifest["subcommand"], "fit-influence");
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 3 + 2 + 2);
    for input in inputs {
        assert_eq!(input["sha256"].as_str().unwrap().len(), 64);
    }
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o == "influence-adjusted.json"));
    for sub in ["simulate", "fit-lsm"] {
        assert!(d.join(format!("{sub}-manifest.json")).exists());
    }
    let leftovers: Vec<_> = fs::read_dir(d)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn same_seed_same_simulation() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path(), &[]);
    simulate(b.path(), &[]);
    for name in ["network2.dat", "behavior.dat", "sim.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn input_and_validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, &[]);
    let adj = d.join("network1.dat");

    let missing = cli(&[
        "--out-dir",
        p(d),
        "fit-lsm",
        "--adj",
        p(&d.join("nope.dat")),
    ]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("nope.dat"));

    assert_eq!(
        code(&cli(&[
            "--out-dir",
            p(d),
            "fit-lsm",
            "--adj",
            p(&adj),
            "--sample-size",
            "0"
        ])),
        1
    );
    assert_eq!(code(&cli(&["--out-dir", p(d), "study", "--reps", "0"])), 1);
    assert_eq!(
        code(&cli(&["--out-dir", p(d), "simulate", "--waves", "1"])),
        1
    );
    assert_eq!(code(&cli(&["frobnicate"])), 1);
    assert_eq!(code(&cli(&["--help"])), 0);

    let behavior = format!("behavior={}", p(&d.join("behavior.dat")));
    let one_wave = cli(&[
        "--out-dir",
        p(d),
        "fit-influence",
        "--adj",
        p(&adj),
        "--attr",
        &behavior,
        "--outcome",
        "behavior",
    ]);
    assert_eq!(code(&one_wave), 1);

    let bad_config = d.join("bad.toml");
    fs::write(&bad_config, "[simulate]\nnn = 3\n").unwrap();
    let out = cli(&["--config", p(&bad_config), "--out-dir", p(d), "simulate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("nn"));
}

#[test]
fn degenerate_regression_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, &[]);
    let constant = d.join("constant.dat");
    fs::write(&constant, "1 1 1\n".repeat(30)).unwrap();
    let adj: Vec<String> = (1..=3)
        .map(|w| p(&d.join(format!("network{w}.dat"))).to_string())
        .collect();
    let behavior = format!("behavior={}", p(&d.join("behavior.dat")));
    let constant = format!("k={}", p(&constant));
    let mut args = vec!["--out-dir", p(d), "fit-influence", "--adj"];
    args.extend(adj.iter().map(String::as_str));
    args.extend([
        "--attr",
        &behavior,
        "--attr",
        &constant,
        "--outcome",
        "behavior",
        "--covariates",
        "k",
    ]);
    let out = cli(&args);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("run.toml");
    fs::write(&config, "seed = 11\n[simulate]\nn = 12\nwaves = 4\n").unwrap();

    let out = cli(&[
        "--config",
        p(&config),
        "--out-dir",
        p(d),
        "simulate",
        "--waves",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = json(&d.join("simulate-manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["n"], 12);
    assert_eq!(manifest["config"]["waves"], 2);
    assert_eq!(manifest["config"]["noise_sd"], 0.5);
    assert!(d.join("network2.dat").exists() && !d.join("network3.dat").exists());
    assert_eq!(manifest["inputs"][0]["path"], p(&config));

    let out = cli(&[
        "--config",
        p(&config),
        "--seed",
        "3",
        "--out-dir",
        p(d),
        "simulate",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = json(&d.join("simulate-manifest.json"));
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["waves"], 4);
}

#[test]
fn study_is_reproducible_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |dir: &Path, workers: &str| {
        let mut args = vec![
            "--out-dir",
            p(dir),
            "--seed",
            "9",
            "--workers",
            workers,
            "study",
        ];
        args.extend(["--reps", "3", "--n", "20"]);
        args.extend(SMALL_CHAIN);
        let out = cli(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    };
    run(a.path(), "1");
    run(b.path(), "3");
    for name in ["study-report.json", "study-summary.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
    let report = json(&a.path().join("study-report.json"));
    assert_eq!(report["records"].as_array().unwrap().len(), 3);
    assert_eq!(report["records"][2]["seed"], 11);
}

/// Writes a synthetic cohort: simulated networks, alcohol from the simulated
/// behavior, and three independent integer attributes.
fn synthetic_cohort(dir: &Path) {
    let sim = dir.join("sim");
    fs::create_dir(&sim).unwrap();
    let out = cli(&["--out-dir", p(&sim), "--seed", "2", "simulate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for w in 1..=3 {
        fs::copy(
            sim.join(format!("network{w}.dat")),
            dir.join(format!("s50-network{w}.dat")),
        )
        .unwrap();
    }
    fs::copy(sim.join("behavior.dat"), dir.join("s50-alcohol.dat")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for stem in ["smoke", "sport", "drugs"] {
        let text: String = (0..50)
            .map(|_| {
                let row: Vec<String> = (0..3)
                    .map(|_| rng.random_range(1..=4).to_string())
                    .collect();
                row.join(" ") + "\n"
            })
            .collect();
        fs::write(dir.join(format!("s50-{stem}.dat")), text).unwrap();
    }
}

#[test]
fn cohort_pipeline_on_synthetic_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synthetic_cohort(d);
    let out_dir = d.join("out");
    let mut args = vec![
        "--out-dir",
        p(&out_dir),
        "--workers",
        "2",
        "s50",
        "--data-dir",
        p(d),
    ];
    args.extend(SMALL_CHAIN);
    let out = cli(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report = json(&out_dir.join("s50-report.json"));
    let names = |fit: &Value| -> Vec<String> {
        fit["coefficients"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["name"].as_str().unwrap().to_string())
            .collect()
    };
    let naive = names(&report["naive"]);
    let adjusted = names(&report["adjusted"]);
    assert_eq!(naive.len(), 6);
    assert_eq!(adjusted.len(), 8);
    for name in ["lag_alc", "expo", "smoke", "sport", "drug"] {
        assert!(naive.iter().any(|n| n == name), "{name} missing");
    }
    assert!(adjusted.iter().any(|n| n == "latent_pos1"));
    assert!(adjusted.iter().any(|n| n == "latent_pos2"));
    assert_eq!(report["lsm"].as_array().unwrap().len(), 2);
    let attenuation = fs::read_to_string(out_dir.join("s50-attenuation.txt")).unwrap();
    assert!(attenuation.contains("overestimation"));
    let manifest = json(&out_dir.join("s50-manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 7);
    assert_eq!(manifest["workers"], 2);
}

#[test]
fn cohort_pipeline_names_a_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synthetic_cohort(d);
    fs::remove_file(d.join("s50-drugs.dat")).unwrap();
    let out = cli(&["--out-dir", p(&d.join("out")), "s50", "--data-dir", p(d)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("s50-drugs.dat"), "{}", stderr(&out));
    assert!(!d.join("out").join("s50-manifest.json").exists());
}
