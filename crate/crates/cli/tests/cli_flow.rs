//! End-to-end exercises of the command surface: the full chain, both
//! conformal-set policies, exit codes, and the config file.

use std::fs;
use std::path::{Path, PathBuf};

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["survcal".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    survcal_cli::run(argv)
}

fn run_ok(args: &[&str]) {
    let code = run(args);
    assert_eq!(code, 0, "command failed: {args:?}");
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn metric_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} line in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn full_chain_with_both_policies() {
    let dir = workdir("flow");
    run_ok(&[
        "synth",
        "--n",
        "500",
        "--features",
        "2",
        "--censor-fraction",
        "0.3",
        "--seed",
        "4",
        "--out",
        &p(&dir, "data.csv"),
    ]);
    run_ok(&[
        "split",
        "--input",
        &p(&dir, "data.csv"),
        "--fractions",
        "0.7,0.15,0.15",
        "--seed",
        "2",
        "--out-prefix",
        &p(&dir, "part"),
    ]);
    run_ok(&[
        "fit",
        "--model",
        "weibull_aft",
        "--train",
        &p(&dir, "part_0.csv"),
        "--out",
        &p(&dir, "model.txt"),
    ]);
    for (data, out) in [
        ("part_0.csv", "train.isd"),
        ("part_1.csv", "conformal.isd"),
        ("part_2.csv", "test.isd"),
    ] {
        run_ok(&[
            "predict",
            "--model-file",
            &p(&dir, "model.txt"),
            "--data",
            &p(&dir, data),
            "--out",
            &p(&dir, out),
        ]);
    }

    run_ok(&[
        "conformalize",
        "--isd-conformal",
        &p(&dir, "conformal.isd"),
        "--labels-conformal",
        &p(&dir, "part_1.csv"),
        "--isd-test",
        &p(&dir, "test.isd"),
        "--train",
        &p(&dir, "part_0.csv"),
        "--handler",
        "km_sampling",
        "--grid",
        "19",
        "--repeat-r",
        "100",
        "--policy",
        "separate_validation",
        "--seed",
        "9",
        "--out",
        &p(&dir, "adjusted_sep.isd"),
    ]);
    run_ok(&[
        "conformalize",
        "--isd-conformal",
        &p(&dir, "conformal.isd"),
        "--labels-conformal",
        &p(&dir, "part_1.csv"),
        "--isd-test",
        &p(&dir, "test.isd"),
        "--train",
        &p(&dir, "part_0.csv"),
        "--handler",
        "km_sampling",
        "--grid",
        "19",
        "--repeat-r",
        "100",
        "--policy",
        "merged_train_and_validation",
        "--isd-train",
        &p(&dir, "train.isd"),
        "--seed",
        "9",
        "--out",
        &p(&dir, "adjusted_merged.isd"),
    ]);

    // The merged policy must consume train plus validation: rebuilding it by
    // hand as a separate conformal set gives the identical output, while the
    // validation-only run differs.
    let train_csv = fs::read_to_string(dir.join("part_0.csv")).unwrap();
    let val_csv = fs::read_to_string(dir.join("part_1.csv")).unwrap();
    let mut merged_csv = train_csv.trim_end().to_string();
    for line in val_csv.lines().skip(1) {
        merged_csv.push('\n');
        merged_csv.push_str(line);
    }
    merged_csv.push('\n');
    fs::write(dir.join("merged_labels.csv"), merged_csv).unwrap();
    let train_isd = fs::read_to_string(dir.join("train.isd")).unwrap();
    let val_isd = fs::read_to_string(dir.join("conformal.isd")).unwrap();
    let mut merged_isd = train_isd.trim_end().to_string();
    for line in val_isd.lines().skip(2) {
        merged_isd.push('\n');
        merged_isd.push_str(line);
    }
    merged_isd.push('\n');
    fs::write(dir.join("merged.isd"), merged_isd).unwrap();
    run_ok(&[
        "conformalize",
        "--isd-conformal",
        &p(&dir, "merged.isd"),
        "--labels-conformal",
        &p(&dir, "merged_labels.csv"),
        "--isd-test",
        &p(&dir, "test.isd"),
        "--train",
        &p(&dir, "part_0.csv"),
        "--handler",
        "km_sampling",
        "--grid",
        "19",
        "--repeat-r",
        "100",
        "--policy",
        "separate_validation",
        "--seed",
        "9",
        "--out",
        &p(&dir, "adjusted_manual.isd"),
    ]);
    let merged = fs::read_to_string(dir.join("adjusted_merged.isd")).unwrap();
    let manual = fs::read_to_string(dir.join("adjusted_manual.isd")).unwrap();
    let separate = fs::read_to_string(dir.join("adjusted_sep.isd")).unwrap();
    assert_eq!(merged, manual);
    assert_ne!(merged, separate);

    run_ok(&[
        "evaluate",
        "--isd",
        &p(&dir, "adjusted_merged.isd"),
        "--labels",
        &p(&dir, "part_2.csv"),
        "--train",
        &p(&dir, "part_0.csv"),
        "--out",
        &p(&dir, "metrics.txt"),
        "--pp-out",
        &p(&dir, "pp.csv"),
    ]);
    let metrics = fs::read_to_string(dir.join("metrics.txt")).unwrap();
    for key in ["c_index", "d_cal", "km_cal", "ibs", "mae_po"] {
        let v = metric_value(&metrics, key);
        assert!(v.is_finite(), "{key} not finite");
    }
    let pp = fs::read_to_string(dir.join("pp.csv")).unwrap();
    assert_eq!(pp.lines().count(), 10); // header + 9 deciles
}

#[test]
fn km_dummy_evaluates_to_exactly_half_cindex() {
    let dir = workdir("dummy");
    run_ok(&[
        "synth",
        "--n",
        "300",
        "--features",
        "1",
        "--censor-fraction",
        "0.25",
        "--seed",
        "8",
        "--out",
        &p(&dir, "data.csv"),
    ]);
    run_ok(&[
        "split",
        "--input",
        &p(&dir, "data.csv"),
        "--fractions",
        "0.8,0.2",
        "--seed",
        "1",
        "--out-prefix",
        &p(&dir, "part"),
    ]);
    run_ok(&[
        "fit",
        "--model",
        "km_dummy",
        "--train",
        &p(&dir, "part_0.csv"),
        "--out",
        &p(&dir, "dummy.model"),
    ]);
    run_ok(&[
        "predict",
        "--model-file",
        &p(&dir, "dummy.model"),
        "--data",
        &p(&dir, "part_1.csv"),
        "--out",
        &p(&dir, "dummy.isd"),
    ]);
    run_ok(&[
        "evaluate",
        "--isd",
        &p(&dir, "dummy.isd"),
        "--labels",
        &p(&dir, "part_1.csv"),
        "--train",
        &p(&dir, "part_0.csv"),
        "--out",
        &p(&dir, "metrics.txt"),
    ]);
    let metrics = fs::read_to_string(dir.join("metrics.txt")).unwrap();
    assert!(metrics.lines().any(|l| l == "c_index=0.5"), "{metrics}");
}

#[test]
fn report_aggregates_seed_files() {
    let dir = workdir("report");
    let mut files = Vec::new();
    for seed in 0..10 {
        let path = dir.join(format!("metrics_{seed}.txt"));
        fs::write(
            &path,
            format!(
                "c_index={}\nd_cal={}\nkm_cal={}\nibs={}\nmae_po={}\n",
                0.6 + seed as f64 * 0.01,
                0.002 + seed as f64 * 1e-4,
                1e-4,
                0.1,
                2.0
            ),
        )
        .unwrap();
        files.push(path.to_str().unwrap().to_string());
    }
    let mut args = vec!["report"];
    args.extend(files.iter().map(|s| s.as_str()));
    let out = p(&dir, "summary.txt");
    args.extend(["--out", &out]);
    run_ok(&args);
    let text = fs::read_to_string(&out).unwrap();
    for key in ["c_index", "d_cal", "km_cal", "ibs", "mae_po"] {
        assert!(text.contains(&format!("{key}.mean=")), "{text}");
        assert!(text.contains(&format!("{key}.ci95=")), "{text}");
    }
    assert!(text.contains("runs=10"));
}

#[test]
fn exit_codes_distinguish_usage_from_data_errors() {
    let dir = workdir("codes");
    // Unknown flag: usage.
    assert_eq!(
        run(&[
            "synth",
            "--n",
            "10",
            "--frobnicate",
            "x",
            "--out",
            &p(&dir, "d.csv")
        ]),
        1
    );
    // Disallowed grid size: usage.
    fs::write(dir.join("empty.isd"), "isd-format: time-grid\n0,1\n1,0\n").unwrap();
    fs::write(dir.join("l.csv"), "time,event\n1,1\n2,1\n").unwrap();
    assert_eq!(
        run(&[
            "conformalize",
            "--isd-conformal",
            &p(&dir, "empty.isd"),
            "--labels-conformal",
            &p(&dir, "l.csv"),
            "--isd-test",
            &p(&dir, "empty.isd"),
            "--train",
            &p(&dir, "l.csv"),
            "--grid",
            "17",
            "--out",
            &p(&dir, "x.isd")
        ]),
        1
    );
    // Missing file: data.
    assert_eq!(
        run(&[
            "split",
            "--input",
            &p(&dir, "nope.csv"),
            "--fractions",
            "0.5,0.5",
            "--out-prefix",
            &p(&dir, "part")
        ]),
        2
    );
    // Zero-time row: data.
    fs::write(dir.join("zero.csv"), "time,event\n0,1\n1,1\n").unwrap();
    assert_eq!(
        run(&[
            "fit",
            "--model",
            "km_dummy",
            "--train",
            &p(&dir, "zero.csv"),
            "--out",
            &p(&dir, "m.txt")
        ]),
        2
    );
    // Help exits zero.
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn bench_reports_all_handlers() {
    run_ok(&[
        "bench",
        "--n",
        "200",
        "--censor-fraction",
        "0.3",
        "--repeat-r",
        "20",
        "--seed",
        "2",
    ]);
}

#[test]
fn config_file_supplies_defaults_without_overriding_flags() {
    let dir = workdir("config");
    fs::write(
        dir.join("synth.conf"),
        "n = 40\ncensor-fraction = 0.2\nseed = 3\nfeatures = 1\n",
    )
    .unwrap();
    // --n on the command line wins over the config value.
    run_ok(&[
        "synth",
        "--config",
        &p(&dir, "synth.conf"),
        "--n",
        "25",
        "--out",
        &p(&dir, "data.csv"),
    ]);
    let text = fs::read_to_string(dir.join("data.csv")).unwrap();
    assert_eq!(text.lines().count(), 26); // header + 25 rows
}
