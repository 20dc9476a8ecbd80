//! End-to-end tests of the `semcom` binary: train a tiny system through the
//! real CLI, then attack, evaluate, sweep, and re-plot it, checking output
//! shapes and exit codes.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Output};

fn semcom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semcom"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SEMCOM_DATA_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes an IDX image/label pair in the canonical byte layout.
fn write_idx_pair(
    dir: &Path,
    img_name: &str,
    lbl_name: &str,
    images: &[Vec<u8>],
    labels: &[u8],
    rows: u32,
    cols: u32,
) {
    let mut img = Vec::new();
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lbl = Vec::new();
    lbl.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lbl.extend_from_slice(labels);
    fs::File::create(dir.join(img_name)).unwrap().write_all(&img).unwrap();
    fs::File::create(dir.join(lbl_name)).unwrap().write_all(&lbl).unwrap();
}

/// A 12-pixel, 3-class dataset that a tiny system can learn in a couple of
/// rounds: one of three pixel blocks is bright, the rest are dim.
fn write_tiny_data(dir: &Path, n_train: usize, n_test: usize) {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / (u32::MAX as f64 + 1.0)
    };
    let mut gen = |n: usize| -> (Vec<Vec<u8>>, Vec<u8>) {
        let mut images = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = (i % 3) as u8;
            labels.push(class);
            let mut px = vec![0u8; 12];
            for (j, p) in px.iter_mut().enumerate() {
                let base: f64 = if j / 4 == class as usize { 0.85 } else { 0.12 };
                let v = (base + 0.2 * next() - 0.1).clamp(0.0, 1.0);
                *p = (v * 255.0).round() as u8;
            }
            images.push(px);
        }
        (images, labels)
    };
    let (ti, tl) = gen(n_train);
    write_idx_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", &ti, &tl, 3, 4);
    let (ei, el) = gen(n_test);
    write_idx_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", &ei, &el, 3, 4);
}

fn training_run_config(root: &Path) -> String {
    format!(
        r#"
kind = "training_run"
seed = 11
out_dir = "{out}"
data_dir = "{data}"

[training]
snr_db = 12.0
n_uses = 6
rounds = 2
ae_epochs = 10
classifier_epochs = 2
pretrain_epochs = 6
batch_size = 32
learning_rate = 3e-3
eval_samples = 0

[training.arch]
input_dim = 12
num_classes = 3
encoder_hidden = [16]
decoder_hidden = [16]
classifier_hidden = [10]
"#,
        out = root.join("out").display(),
        data = root.join("data").display()
    )
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = semcom(&[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = semcom(&["attack", "--domain", "image"], dir.path());
    assert_eq!(out.status.code(), Some(2), "missing required --checkpoint");
}

#[test]
fn missing_and_malformed_inputs_are_distinguished() {
    let dir = tempfile::tempdir().unwrap();
    // Absent config file: a data problem, exit 3.
    let out = semcom(&["sweep", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));

    // Present but invalid config: a config problem, exit 2.
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "kind = \"accuracy_grid\"\nout_dir = \"x\"\nbogus = true\n").unwrap();
    let out = semcom(&["sweep", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));

    // Attacking a nonexistent checkpoint: exit 3.
    let out = semcom(
        &["attack", "--checkpoint", "missing", "--domain", "image"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));

    // Targeted mode without a target: exit 2.
    let out = semcom(
        &["attack", "--checkpoint", "missing", "--domain", "image", "--mode", "t"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn train_attack_eval_and_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir_all(root.join("data")).unwrap();
    write_tiny_data(&root.join("data"), 600, 240);
    fs::write(root.join("exp.toml"), training_run_config(root)).unwrap();

    // Train through the CLI.
    let out = semcom(&["train", "--config", "exp.toml"], root);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(root.join("out/results.csv").is_file());
    assert!(root.join("out/checkpoint/manifest.toml").is_file());

    // `train` refuses non-training configs.
    let grid = training_run_config(root).replace("training_run", "accuracy_grid");
    fs::write(root.join("grid.toml"), grid).unwrap();
    let out = semcom(&["train", "--config", "grid.toml"], root);
    assert_eq!(out.status.code(), Some(2));

    // Single-point attack: header plus one row with the documented columns.
    let out = semcom(
        &[
            "attack",
            "--checkpoint",
            "out/checkpoint",
            "--domain",
            "image",
            "--eps",
            "0.4",
            "--samples",
            "0",
            "--data-dir",
            "data",
        ],
        root,
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "domain,mode,eps,pnr_db,success,accuracy,mse");
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "image");
    assert_eq!(cells[1], "nt");
    assert_eq!(cells[2], "0.4");
    let success: f64 = cells[4].parse().unwrap();
    assert!((0.0..=1.0).contains(&success));

    // Axis sweep: one row per grid value, other axis held fixed.
    let out = semcom(
        &[
            "attack",
            "--checkpoint",
            "out/checkpoint",
            "--domain",
            "jam",
            "--sweep",
            "pnr=-5,5",
            "--samples",
            "0",
            "--data-dir",
            "data",
        ],
        root,
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.trim().lines().count(), 3);
    assert!(text.contains("jam,nt,0.3,-5,"));
    assert!(text.contains("jam,nt,0.3,5,"));

    // Clean evaluation of the same checkpoint.
    let out = semcom(
        &["eval", "--checkpoint", "out/checkpoint", "--samples", "0", "--data-dir", "data"],
        root,
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "snr_db,samples,accuracy,mse");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "12"); // falls back to the training SNR
    assert_eq!(cells[1], "240");
    let acc: f64 = cells[2].parse().unwrap();
    assert!(acc > 0.5, "trained system should beat chance, got {}", acc);

    // Re-plot reproduces the SVG from the CSV alone.
    let original = fs::read(root.join("out/plot.svg")).unwrap();
    fs::remove_file(root.join("out/plot.svg")).unwrap();
    let out = semcom(&["plot", "--dir", "out"], root);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(fs::read(root.join("out/plot.svg")).unwrap(), original);
}
