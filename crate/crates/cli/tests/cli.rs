use std::path::Path;
use std::process::{Command, Output};

use sau_core::activation::ActivationKind;
use sau_core::dataset::{write_idx, DatasetSplit, Targets};
use sau_core::nn::Tensor2D;

fn sau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sau"))
        .args(args)
        .env_remove("SAU_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn eval_grid_rows() {
    let o = sau(&[
        "eval",
        "--activation",
        "sau",
        "--alpha",
        "0.15",
        "--n",
        "20000",
        "--xmin",
        "-2",
        "--xmax",
        "2",
        "--step",
        "0.5",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x,value,d_dx,d_dalpha");
    assert_eq!(lines.len(), 10);
    let origin: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(origin[0], 0.0);
    assert!((origin[1] - 1.99471e-5).abs() < 1e-10);
}

#[test]
fn eval_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    for name in ActivationKind::NAMES {
        let o = sau(&[
            "eval",
            "--activation",
            name,
            "--n",
            "3",
            "--xmin",
            "-1",
            "--xmax",
            "1",
            "--step",
            "0.125",
            "-o",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{name}");
        let kind = ActivationKind::from_name(name, None, Some(3.0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            let e = kind.eval(v[0]);
            assert_eq!((v[1], v[2], v[3]), (e.value, e.d_dx, e.d_dalpha), "{name} at {}", v[0]);
        }
    }
}

#[test]
fn relu_has_no_alpha_derivative() {
    let o = sau(&[
        "eval",
        "--activation",
        "relu",
        "--xmin",
        "-3",
        "--xmax",
        "3",
        "--step",
        "0.25",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn eval_rejects_bad_input() {
    assert_eq!(code(&sau(&["eval", "--xmin", "1", "--xmax", "1"])), 2);
    assert_eq!(code(&sau(&["eval", "--step", "0"])), 2);
    assert_eq!(code(&sau(&["eval", "--activation", "tanhh"])), 2);
    let o = sau(&["eval", "--output", "/nonexistent-dir/x.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent-dir/x.csv"));
}

#[test]
fn verify_suites() {
    assert_eq!(code(&sau(&["verify", "oracle", "--tol", "1e-8"])), 0);
    assert_eq!(code(&sau(&["verify", "grad", "--h", "1e-5", "--tol", "1e-6"])), 0);
    assert_eq!(code(&sau(&["verify", "convergence"])), 0);
    let o = sau(&["verify", "mollifier"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("PASS gaussian") && stdout(&o).contains("PASS bump"));
}

#[test]
fn verify_failures_exit_one_with_points() {
    let o = sau(&["verify", "mollifier", "--fixture", "doubled-gaussian"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("UnitMass"));
    let o = sau(&["verify", "grad", "--tol", "1e-14"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("alpha=") && stdout(&o).contains("n="));
}

#[test]
fn verify_rejects_flags_for_other_suites() {
    assert_eq!(code(&sau(&["verify", "mollifier", "--h", "1e-3"])), 2);
    assert_eq!(code(&sau(&["verify", "oracle", "--fixture", "doubled-gaussian"])), 2);
    assert_eq!(code(&sau(&["verify", "nonsense"])), 2);
    assert_eq!(code(&sau(&["verify", "grad", "--h", "-1"])), 2);
}

#[test]
fn xor_training_reaches_full_accuracy() {
    let o = sau(&[
        "train",
        "--dataset",
        "xor",
        "--activation",
        "sau",
        "--epochs",
        "2000",
        "--lr",
        "1e-2",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("epoch,train_loss,train_acc,test_loss,test_acc,alpha_layer_0\n"));
    assert_eq!(out.lines().count(), 2001);
    let last: Vec<&str> = out.lines().last().unwrap().split(',').collect();
    assert_eq!(last[2], "1");
    assert!(stderr(&o).contains("train_acc 1"));
}

#[test]
fn zero_epochs_writes_header_only() {
    let o = sau(&["train", "--dataset", "xor", "--activation", "relu", "--epochs", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "epoch,train_loss,train_acc,test_loss,test_acc\n");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = sau(&[
            "train",
            "--dataset",
            "sine",
            "--activation",
            "sau",
            "--arch",
            "16",
            "--epochs",
            "20",
            "--batch",
            "32",
            "--lr",
            "1e-2",
            "--seed",
            "7",
            "-o",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        assert!(stdout(&o).starts_with("final epoch 20"));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    // regression rows leave accuracy empty
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().nth(1).unwrap().split(',').nth(2) == Some(""));
}

#[test]
fn missing_mnist_names_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = sau(&["train", "--dataset", "mnist", "--data-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for f in [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ] {
        assert!(err.contains(f), "{err}");
    }
}

fn write_fixture(dir: &Path, prefix: &str, count: usize) {
    let data = (0..count * 16).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
    let split = DatasetSplit::new(
        "fixture",
        Tensor2D::new(count, 16, data).unwrap(),
        Targets::Classes {
            labels: (0..count).map(|i| i % 10).collect(),
            class_count: 10,
        },
    )
    .unwrap();
    write_idx(
        &split,
        &dir.join(format!("{prefix}-images-idx3-ubyte.gz")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        4,
        4,
    )
    .unwrap();
}

#[test]
fn mnist_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "train", 40);
    write_fixture(dir.path(), "t10k", 20);
    let o = Command::new(env!("CARGO_BIN_EXE_sau"))
        .args([
            "train",
            "--dataset",
            "mnist",
            "--arch",
            "8",
            "--epochs",
            "2",
            "--batch",
            "16",
            "--activation",
            "prelu",
        ])
        .env("SAU_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(stdout(&o).starts_with("epoch,train_loss,train_acc,test_loss,test_acc,alpha_layer_0\n"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# xor run\ndataset = xor\nactivation = relu\nepochs = 7\nlr = 1e-2\n").unwrap();
    let o = sau(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 8);
    assert!(!stdout(&o).contains("alpha_layer"));

    let o = sau(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--epochs",
        "3",
        "--activation",
        "sau",
    ]);
    assert_eq!(stdout(&o).lines().count(), 4);
    assert!(stdout(&o).contains("alpha_layer_0"));

    std::fs::write(&cfg, "dataset = xor\nlearning_rate = 0.1\n").unwrap();
    let o = sau(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("learning-rate"));
}

#[test]
fn bad_training_flags_are_rejected_before_running() {
    assert_eq!(code(&sau(&["train", "--dataset", "cifar"])), 2);
    assert_eq!(code(&sau(&["train", "--dataset", "xor", "--arch", "8,0"])), 2);
    assert_eq!(code(&sau(&["train", "--dataset", "xor", "--batch", "0"])), 2);
    assert_eq!(code(&sau(&["train", "--dataset", "xor", "--lr", "-1"])), 2);
    assert_eq!(code(&sau(&["train", "--dataset", "xor", "--momentum", "0.5"])), 2);
    assert_eq!(code(&sau(&["train", "--dataset", "xor", "--n", "0"])), 2);
}

#[test]
fn compare_two_activations_on_xor() {
    let o = sau(&[
        "compare",
        "--activations",
        "relu,sau",
        "--dataset",
        "xor",
        "--epochs",
        "2000",
        "--lr",
        "1e-2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "activation,final_test_acc,final_test_loss,wall_seconds,final_alpha");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("relu,1,"));
    assert!(lines[2].starts_with("sau,1,"));
    assert!(lines[1].ends_with(','));
}

#[test]
fn compare_with_repeats_reports_mean_and_std() {
    let o = sau(&[
        "compare",
        "--activations",
        "relu,elu",
        "--dataset",
        "xor",
        "--epochs",
        "50",
        "--lr",
        "1e-2",
        "--repeats",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].ends_with(",repeats,test_acc_mean,test_acc_std,test_loss_mean,test_loss_std"));
    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 10);
        assert_eq!(f[5], "3");
        let std: f64 = f[7].parse().unwrap();
        assert!(std >= 0.0);
    }
}

#[test]
fn compare_rejects_duplicates_and_single_lists() {
    let o = sau(&["compare", "--activations", "sau,relu,sau", "--dataset", "xor"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("twice"));
    assert_eq!(code(&sau(&["compare", "--activations", "sau", "--dataset", "xor"])), 2);
}
