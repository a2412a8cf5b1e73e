//! Drives the `gaze2class` binary end to end on small cohorts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaze2class::checkpoint;
use gaze2class::imageio::read_gzimg;
use gaze2class_core::classifier::{init_params, ModelParams, CLASSES, CONV2_FILTERS};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gaze2class"));
    c.env_remove("GAZE2CLASS_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

/// 28 recordings rendered as scan paths into `r/`.
fn rendered(dir: &Path) {
    ok(
        dir,
        &["generate", "--per-class", "14", "--seed", "5", "--out-dir", "g", "-q"],
    );
    ok(
        dir,
        &[
            "render",
            "-i",
            "g/gaze.csv",
            "--rep",
            "scanpath",
            "--out-dir",
            "r",
            "-q",
        ],
    );
}

fn recording_count(csv: &Path) -> usize {
    let text = fs::read_to_string(csv).unwrap();
    let mut keys: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    keys.sort();
    keys.dedup();
    keys.len()
}

#[test]
fn generate_is_byte_identical_and_sized() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["generate", "--per-class", "300", "--seed", "1", "-o", "a.csv", "-q"],
    );
    ok(
        d.path(),
        &["generate", "--per-class", "300", "--seed", "1", "-o", "b.csv", "-q"],
    );
    let a = fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.csv")).unwrap());
    assert_eq!(recording_count(&d.path().join("a.csv")), 600);

    let out = run(d.path(), &["generate", "--per-class", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_precedence_through_the_binary() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("run.cfg"), "# cohort size\nper_class = 5\n").unwrap();
    ok(
        d.path(),
        &["generate", "-o", "default.csv", "--set", "fixations_max=8", "-q"],
    );
    ok(d.path(), &["--config", "run.cfg", "generate", "-o", "file.csv", "-q"]);
    ok(
        d.path(),
        &[
            "--config",
            "run.cfg",
            "generate",
            "--per-class",
            "7",
            "-o",
            "flag.csv",
            "-q",
        ],
    );
    assert_eq!(recording_count(&d.path().join("default.csv")), 600);
    assert_eq!(recording_count(&d.path().join("file.csv")), 10);
    assert_eq!(recording_count(&d.path().join("flag.csv")), 14);
}

#[test]
fn render_one_image_per_recording_deterministically() {
    let d = tempfile::tempdir().unwrap();
    rendered(d.path());
    ok(
        d.path(),
        &[
            "render",
            "-i",
            "g/gaze.csv",
            "--rep",
            "scanpath",
            "--out-dir",
            "r2",
            "-q",
        ],
    );
    let first = files_with_ext(&d.path().join("r"), "gzimg");
    assert_eq!(first.len(), 28);
    assert_eq!(files_with_ext(&d.path().join("r"), "pgm").len(), 28);
    assert!(first[0]
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .ends_with(".scanpath.gzimg"));
    for p in first {
        let twin = d.path().join("r2").join(p.file_name().unwrap());
        assert_eq!(fs::read(&p).unwrap(), fs::read(twin).unwrap());
    }

    let out = run(d.path(), &["render", "-i", "g/gaze.csv", "--rep", "foo"]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("heatmap") && msg.contains("fixationmap"), "{msg}");

    let out = run(d.path(), &["render", "-i", "missing.csv", "--rep", "heatmap"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn transforms_on_disk() {
    let d = tempfile::tempdir().unwrap();
    rendered(d.path());
    for t in ["identity", "haar", "fft"] {
        ok(
            d.path(),
            &["transform", "-i", "r", "--transform", t, "--out-dir", t, "-q"],
        );
    }
    let inputs = files_with_ext(&d.path().join("r"), "gzimg");

    // Identity: raw files byte-identical to the inputs.
    for p in &inputs {
        let stem = p.file_stem().unwrap().to_str().unwrap();
        let out = d.path().join("identity").join(format!("{stem}.identity.gzimg"));
        assert_eq!(fs::read(p).unwrap(), fs::read(out).unwrap());
    }

    // Haar: one tiled output of unchanged size per input.
    let haar = files_with_ext(&d.path().join("haar"), "gzimg");
    assert_eq!(haar.len(), 28);
    for p in &haar {
        assert_eq!(read_gzimg(p).unwrap().dims(), (64, 64));
    }

    // FFT of a real image: shifted magnitudes are point-symmetric about the center.
    for p in files_with_ext(&d.path().join("fft"), "gzimg") {
        let img = read_gzimg(&p).unwrap();
        let (w, h) = img.dims();
        for y in 0..h {
            for x in 0..w {
                let mirror = img.get((w - x) % w, (h - y) % h);
                assert!((img.get(x, y) - mirror).abs() < 1e-9, "{} at ({x},{y})", p.display());
            }
        }
    }

    let empty = d.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = run(
        d.path(),
        &["transform", "-i", "empty", "--transform", "haar", "--out-dir", "x"],
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn train_zero_learning_rate_and_reruns() {
    let d = tempfile::tempdir().unwrap();
    rendered(d.path());
    let log = ok(
        d.path(),
        &[
            "train",
            "-i",
            "r",
            "--epochs",
            "2",
            "--lr",
            "0",
            "--seed",
            "9",
            "--out-dir",
            "m0",
        ],
    );
    assert!(log.contains("3 iterations per epoch"), "{log}");
    let saved = fs::read(d.path().join("m0/model.gzmdl")).unwrap();
    assert_eq!(saved, checkpoint::encode(&init_params(9, 64).unwrap()));

    ok(
        d.path(),
        &[
            "train",
            "-i",
            "r",
            "--epochs",
            "2",
            "--seed",
            "9",
            "--out-dir",
            "m1",
            "-q",
        ],
    );
    ok(
        d.path(),
        &[
            "train",
            "-i",
            "r",
            "--epochs",
            "2",
            "--seed",
            "9",
            "--out-dir",
            "m2",
            "-q",
        ],
    );
    for f in ["curve.csv", "model.gzmdl", "split.csv"] {
        assert_eq!(
            fs::read(d.path().join("m1").join(f)).unwrap(),
            fs::read(d.path().join("m2").join(f)).unwrap(),
            "{f}"
        );
    }
    let curve = fs::read_to_string(d.path().join("m1/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 2 * 3);

    let out = run(d.path(), &["train", "-i", "r", "--lr", "1e300", "--out-dir", "m3"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

/// A model that outputs ASD for every input: zero weights, bias favoring unit 0.
fn always_asd(side: usize) -> ModelParams {
    let mut p = ModelParams::zeros(side).unwrap();
    p.dense_b = vec![1.0, 0.0];
    assert_eq!(p.dense_b.len(), CLASSES);
    p
}

#[test]
fn evaluate_reports_and_recounts() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["generate", "--per-class", "30", "--seed", "2", "--out-dir", "g", "-q"],
    );
    ok(
        d.path(),
        &["render", "-i", "g/gaze.csv", "--rep", "heatmap", "--out-dir", "r", "-q"],
    );
    checkpoint::save(&d.path().join("asd.gzmdl"), &always_asd(64)).unwrap();

    ok(
        d.path(),
        &[
            "evaluate",
            "--checkpoint",
            "asd.gzmdl",
            "-i",
            "r",
            "--all",
            "--out-dir",
            "e",
            "-q",
        ],
    );
    let report = fs::read_to_string(d.path().join("e/report.csv")).unwrap();
    assert_eq!(report.lines().nth(1).unwrap(), "heatmap:identity,50.00,30,0,30,0,");
    let confusion = fs::read_to_string(d.path().join("e/confusion.csv")).unwrap();
    assert_eq!(confusion, "true_label,pred_ASD,pred_TD\nASD,30,0\nTD,30,0\n");

    // Trained model: accuracy equals a recount of the prediction log.
    ok(d.path(), &["train", "-i", "r", "--epochs", "3", "--out-dir", "m", "-q"]);
    ok(
        d.path(),
        &[
            "evaluate",
            "--checkpoint",
            "m/model.gzmdl",
            "-i",
            "r",
            "--out-dir",
            "e2",
            "-q",
        ],
    );
    let preds = fs::read_to_string(d.path().join("e2/predictions.csv")).unwrap();
    let rows: Vec<Vec<&str>> = preds.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    let correct = rows.iter().filter(|r| r[1] == r[2]).count();
    let report = fs::read_to_string(d.path().join("e2/report.csv")).unwrap();
    let acc: f64 = report
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(
        format!("{acc:.2}"),
        format!("{:.2}", 100.0 * correct as f64 / rows.len() as f64)
    );
    assert!(d.path().join("e2/curve.dat").exists());
    assert!(d.path().join("e2/report.md").exists());

    let out = run(d.path(), &["evaluate", "--checkpoint", "nope.gzmdl", "-i", "r"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.gzmdl"));

    let mut bytes = checkpoint::encode(&always_asd(64));
    bytes[14..18].copy_from_slice(&(CONV2_FILTERS as u32 + 1).to_le_bytes());
    fs::write(d.path().join("bad.gzmdl"), bytes).unwrap();
    let out = run(d.path(), &["evaluate", "--checkpoint", "bad.gzmdl", "-i", "r"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("architecture"));
}

#[test]
fn pipeline_grid_subset_and_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let log = ok(
        d.path(),
        &[
            "pipeline",
            "--grid",
            "scanpath:haar",
            "--per-class",
            "20",
            "--epochs",
            "2",
            "--out-dir",
            "p",
        ],
    );
    assert!(log.contains("scanpath:haar"), "{log}");
    let report = fs::read_to_string(d.path().join("p/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    let cells: Vec<_> = fs::read_dir(d.path().join("p/cells")).unwrap().collect();
    assert_eq!(cells.len(), 1);
    for f in [
        "model.gzmdl",
        "curve.csv",
        "curve.dat",
        "confusion.csv",
        "predictions.csv",
    ] {
        assert!(d.path().join("p/cells/scanpath-haar").join(f).exists(), "{f}");
    }
    let split = fs::read_to_string(d.path().join("p/split.csv")).unwrap();
    assert_eq!(split.lines().filter(|l| l.ends_with(",train")).count(), 32);
    assert_eq!(split.lines().filter(|l| l.ends_with(",test")).count(), 8);

    fs::write(d.path().join("bad.cfg"), "seed = 1\nlearning_rat = 0.5\n").unwrap();
    let out = run(d.path(), &["--config", "bad.cfg", "pipeline"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));

    let out = run(d.path(), &["pipeline", "--grid", "scanpath:wavelet"]);
    assert_eq!(code(&out), 2);

    let out = bin()
        .current_dir(d.path())
        .env("GAZE2CLASS_THREADS", "many")
        .args(["pipeline", "--per-class", "5"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn pipeline_failure_names_cell_and_stage() {
    let d = tempfile::tempdir().unwrap();
    let out = run(
        d.path(),
        &[
            "pipeline",
            "--grid",
            "scanpath:identity",
            "--per-class",
            "14",
            "--epochs",
            "3",
            "--lr",
            "1e300",
            "--out-dir",
            "p",
        ],
    );
    assert_eq!(code(&out), 4);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("scanpath:identity") && msg.contains("train"), "{msg}");
}
