use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn forestseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forestseg"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = forestseg(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn key_value_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find(|l| l.starts_with("scenario="))
        .expect("key-value row")
        .to_string()
}

fn sorted_glob(dir: &Path, prefix: &str, ext: &str) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(prefix) && n.ends_with(ext))
        .collect();
    names.sort();
    names
}

/// Runs synth, SOR on each channel, merge, normalize and a 5x1 per-plot split.
fn prepare(dir: &Path) -> (Vec<String>, Vec<String>) {
    ok(
        dir,
        &[
            "synth", "--points", "60000", "--seed", "7", "--out", "scene",
        ],
    );
    for c in ["swir", "nir", "green"] {
        ok(
            dir,
            &[
                "sor",
                "--input",
                &format!("scene/{c}.bin"),
                "--out",
                &format!("{c}.sor.bin"),
            ],
        );
    }
    ok(
        dir,
        &[
            "merge",
            "--swir",
            "swir.sor.bin",
            "--nir",
            "nir.sor.bin",
            "--green",
            "green.sor.bin",
            "--radius-m",
            "0.25",
            "--out",
            "merged.bin",
        ],
    );
    ok(
        dir,
        &[
            "normalize",
            "--input",
            "merged.bin",
            "--cell-size-m",
            "1",
            "--out",
            "norm.bin",
        ],
    );
    ok(
        dir,
        &[
            "split", "--input", "norm.bin", "--tiles", "5x1", "--seed", "7", "--out", "plots",
        ],
    );
    let plots = dir.join("plots");
    let train = sorted_glob(&plots, "train_", ".bin")
        .iter()
        .map(|n| format!("plots/{n}"))
        .collect();
    let test = sorted_glob(&plots, "test_", ".bin")
        .iter()
        .map(|n| format!("plots/{n}"))
        .collect();
    (train, test)
}

#[test]
fn piped_pipeline_matches_single_ablation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (train, test) = prepare(dir);
    assert_eq!((train.len(), test.len()), (4, 1));
    let forest = [
        "--seed",
        "7",
        "--n-estimators",
        "15",
        "--max-samples",
        "4000",
    ];

    for (key, name) in [
        ("coordinates", "Coordinates"),
        ("swir+nir+green+vi", "+SWIR + NIR + Green + VI"),
    ] {
        let mut train_tables = Vec::new();
        for cloud in train.iter().chain(&test) {
            let table = cloud.replace(".bin", &format!(".{key}.tsv"));
            ok(
                dir,
                &[
                    "features",
                    "--input",
                    cloud,
                    "--scenario",
                    key,
                    "--out",
                    &table,
                ],
            );
            train_tables.push(table);
        }
        let test_table = train_tables.pop().unwrap();
        let mut args = vec!["train", "--features"];
        args.extend(train_tables.iter().map(String::as_str));
        args.extend(["--out", "model.bin"]);
        args.extend(forest);
        ok(dir, &args);
        ok(
            dir,
            &[
                "predict",
                "--model",
                "model.bin",
                "--features",
                &test_table,
                "--out",
                "pred.tsv",
            ],
        );
        ok(
            dir,
            &[
                "evaluate",
                "--predictions",
                "pred.tsv",
                "--truth",
                &test_table,
                "--name",
                name,
                "--out",
                "eval.txt",
            ],
        );

        let mut args = vec!["ablate", "--train"];
        args.extend(train.iter().map(String::as_str));
        args.push("--test");
        args.extend(test.iter().map(String::as_str));
        args.extend(["--scenarios", key, "--out", "ablate.txt"]);
        args.extend(forest);
        ok(dir, &args);

        assert_eq!(
            key_value_line(&dir.join("eval.txt")),
            key_value_line(&dir.join("ablate.txt"))
        );
    }
}

#[test]
fn ablate_all_gives_nine_rows_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (train, test) = prepare(dir);
    let run = |out: &str| {
        let mut args = vec!["ablate", "--train"];
        args.extend(train.iter().map(String::as_str));
        args.push("--test");
        args.extend(test.iter().map(String::as_str));
        args.extend([
            "--scenarios",
            "all",
            "--seed",
            "7",
            "--n-estimators",
            "5",
            "--max-samples",
            "2000",
        ]);
        args.extend(["--geometric", "none", "--out", out]);
        ok(dir, &args);
        fs::read_to_string(dir.join(out)).unwrap()
    };
    let (a, b) = (run("a.txt"), run("b.txt"));
    assert_eq!(a, b);
    assert_eq!(a.lines().filter(|l| l.starts_with("scenario=")).count(), 9);
    assert!(a.lines().nth(1).unwrap().starts_with("Coordinates"));
    let manifest = fs::read_to_string(dir.join("a.txt.manifest.txt")).unwrap();
    assert!(manifest.contains("subcommand: ablate"));
    assert!(manifest.contains("seed: 7"));
    assert!(manifest.contains("argv: "));
}

#[test]
fn synth_reads_config_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("spec.txt"),
        "n_points = 5000\nseed = 4\nterrain = tilted\nslope = 0.2\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        ok(
            dir,
            &[
                "synth", "--config", "spec.txt", "--format", "text", "--out", out,
            ],
        );
    }
    for name in ["swir.txt", "nir.txt", "green.txt", "reference.txt"] {
        let (a, b) = (
            fs::read(dir.join("a").join(name)).unwrap(),
            fs::read(dir.join("b").join(name)).unwrap(),
        );
        assert_eq!(a, b, "{name}");
    }
    let reference = fs::read_to_string(dir.join("a/reference.txt")).unwrap();
    assert!(reference.contains("# count 5000"));
    assert!(dir.join("a/manifest.txt").exists());
}

#[test]
fn vi_report_lists_every_index() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "synth", "--points", "20000", "--seed", "1", "--out", "scene",
        ],
    );
    ok(
        dir,
        &[
            "vi-report",
            "--input",
            "scene/reference.bin",
            "--out",
            "vi.txt",
        ],
    );
    let text = fs::read_to_string(dir.join("vi.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("score")).count(), 5);
    assert!(text.contains("NDVI_NIR-SWIR"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let code = |args: &[&str]| forestseg(dir, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["merge", "--bogus-flag"]), 1);
    assert_eq!(code(&["sor", "--out", "x.bin"]), 1);
    assert_eq!(
        code(&["sor", "--input", "missing.bin", "--out", "x.bin"]),
        2
    );
    ok(dir, &["synth", "--points", "3000", "--out", "scene"]);
    assert_eq!(
        code(&[
            "sor",
            "--input",
            "scene/nir.bin",
            "--k-neighbors",
            "0",
            "--out",
            "x.bin"
        ]),
        1
    );
    assert_eq!(
        code(&[
            "merge",
            "--swir",
            "scene/nir.bin",
            "--nir",
            "scene/nir.bin",
            "--green",
            "scene/green.bin",
            "--out",
            "m.bin"
        ]),
        1
    );
    assert_eq!(
        code(&[
            "normalize",
            "--input",
            "scene/reference.bin",
            "--cell-size-m",
            "-1",
            "--out",
            "n.bin"
        ]),
        1
    );
    assert!(!dir.join("x.bin").exists());
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "synth", "--points", "20000", "--seed", "2", "--out", "scene",
        ],
    );
    let run = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_forestseg"))
            .current_dir(dir)
            .env("FORESTSEG_THREADS", threads)
            .env("RUST_LOG", "warn")
            .args(["sor", "--input", "scene/green.bin", "--out", out])
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(dir.join(out)).unwrap()
    };
    assert_eq!(run("1", "one.bin"), run("3", "three.bin"));
}
