//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p gaze2class --test acceptance`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gaze2class_core::classifier::{backward, cross_entropy, forward, init_params, ModelParams};
use gaze2class_core::eval::{evaluate_detailed, run_matrix, GridCell, MatrixSettings};
use gaze2class_core::gaze::{
    generate_cohort, CohortSpec, Diagnosis, FixationPoint, GazeRecording, LabeledDataset, Sample,
};
use gaze2class_core::image::{GrayImage, Plane};
use gaze2class_core::render::{gaussian_kernel, render_heatmap, RenderSpec, Representation};
use gaze2class_core::transforms::{haar_decompose, haar_reconstruct, magnitude_raw, TransformKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
    Plane::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

// 1. Heatmap vs direct double loop over pixels and fixations.
fn heatmap_oracle() -> Result<String, String> {
    const SIDE: usize = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for r in 0..100 {
        let n = rng.gen_range(1..=10);
        let sigma = rng.gen_range(0.75..4.0);
        let points: Vec<FixationPoint> = (0..n)
            .map(|i| FixationPoint {
                x: rng.gen_range(0.0..SIDE as f64),
                y: rng.gen_range(0.0..SIDE as f64),
                onset_ms: 500.0 * i as f64,
                duration_ms: rng.gen_range(100.0..400.0),
            })
            .collect();
        // Screen and grid coincide, so screen coordinates are pixel coordinates.
        let rec = GazeRecording {
            subject_id: "s".into(),
            stimulus_id: "t".into(),
            label: Diagnosis::Asd,
            screen_width: SIDE as f64,
            screen_height: SIDE as f64,
            points,
        };
        let spec = RenderSpec {
            representation: Representation::Heatmap,
            out_width: SIDE,
            out_height: SIDE,
            sigma,
            exact: true,
            ..RenderSpec::default()
        };
        let img = render_heatmap(&rec, &spec).map_err(|e| e.to_string())?;
        for py in 0..SIDE {
            for px in 0..SIDE {
                let mut want = 0.0;
                for p in &rec.points {
                    let (dx, dy) = (px as f64 - p.x, py as f64 - p.y);
                    want += (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma);
                }
                let got = img.get(px, py);
                let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
                ensure(rel <= 1e-9, || {
                    format!("recording {r}, pixel ({px},{py}): {got} vs {want}")
                })?;
            }
        }
    }
    Ok(format!("100 recordings, worst relative error {worst:.1e}"))
}

// 2. Kernel spot values.
fn kernel_values() -> Result<String, String> {
    let g00 = gaussian_kernel(0.0, 0.0, 1.0).map_err(|e| e.to_string())?;
    let g10 = gaussian_kernel(1.0, 0.0, 1.0).map_err(|e| e.to_string())?;
    let (w00, w10) = (1.0 / (2.0 * PI), (-0.5f64).exp() / (2.0 * PI));
    ensure((g00 - w00).abs() < 1e-12 && (g00 - 0.1591549).abs() < 1e-7, || {
        format!("G(0,0;1) = {g00}")
    })?;
    ensure((g10 - w10).abs() < 1e-12 && (g10 - 0.0965324).abs() < 1e-7, || {
        format!("G(1,0;1) = {g10}")
    })?;
    Ok(format!("G(0,0;1) = {g00:.7}, G(1,0;1) = {g10:.7}"))
}

// 3. Haar round trip, energy, and the 2x2 averages of the approximation band.
fn haar_round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_rt: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for i in 0..1000 {
        let (w, h) = (2 * rng.gen_range(1..=32), 2 * rng.gen_range(1..=32));
        let img = random_plane(&mut rng, w, h);
        let dec = haar_decompose(&img, 1).map_err(|e| e.to_string())?;
        let back = haar_reconstruct(&dec).map_err(|e| e.to_string())?;
        for (a, b) in img.values().iter().zip(back.values()) {
            worst_rt = worst_rt.max((a - b).abs());
        }
        let rel = (dec.energy() - img.energy()).abs() / img.energy();
        worst_energy = worst_energy.max(rel);
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let s = img.get(2 * x, 2 * y)
                    + img.get(2 * x + 1, 2 * y)
                    + img.get(2 * x, 2 * y + 1)
                    + img.get(2 * x + 1, 2 * y + 1);
                ensure((dec.ll.get(x, y) - s / 2.0).abs() < 1e-12, || {
                    format!("image {i}: LL({x},{y})")
                })?;
            }
        }
        ensure(worst_rt < 1e-9, || {
            format!("image {i} ({w}x{h}): round-trip error {worst_rt:e}")
        })?;
        ensure(worst_energy <= 1e-9, || {
            format!("image {i} ({w}x{h}): energy error {worst_energy:e}")
        })?;
    }
    Ok(format!(
        "1000 images, round-trip {worst_rt:.1e}, energy {worst_energy:.1e}"
    ))
}

// 4. FFT magnitudes vs textbook DFT, and Parseval.
fn fft_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for h in 2..=16 {
        for w in 2..=16 {
            let img = random_plane(&mut rng, w, h);
            let fast = magnitude_raw(&img);
            for v in 0..h {
                for u in 0..w {
                    let (mut re, mut im) = (0.0, 0.0);
                    for y in 0..h {
                        for x in 0..w {
                            let phase = -2.0 * PI * (((u * x) % w) as f64 / w as f64 + ((v * y) % h) as f64 / h as f64);
                            re += img.get(x, y) * phase.cos();
                            im += img.get(x, y) * phase.sin();
                        }
                    }
                    let err = (fast.get(u, v) - re.hypot(im)).abs();
                    worst = worst.max(err);
                    ensure(err < 1e-8, || format!("{w}x{h} at ({u},{v}): error {err:e}"))?;
                }
            }
        }
    }
    let mut worst_parseval: f64 = 0.0;
    for i in 0..100 {
        let img = random_plane(&mut rng, 32, 32);
        let spectral: f64 = magnitude_raw(&img).values().iter().map(|m| m * m).sum();
        let spatial = 1024.0 * img.energy();
        let rel = (spectral - spatial).abs() / spatial;
        worst_parseval = worst_parseval.max(rel);
        ensure(rel < 1e-8, || format!("image {i}: Parseval error {rel:e}"))?;
    }
    Ok(format!(
        "sizes 2..16 max error {worst:.1e}, Parseval {worst_parseval:.1e}"
    ))
}

// 5. Backprop vs central differences.
fn gradient_check() -> Result<String, String> {
    const EPS: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let loss = |p: &ModelParams, img: &GrayImage, label| cross_entropy(&forward(p, img).unwrap().0, label);
    let mut worst: f64 = 0.0;
    let (mut accepted, mut rejected, mut draw) = (0, 0, 0u64);
    while accepted < 5 {
        draw += 1;
        let mut params = init_params(500 + draw, 16).map_err(|e| e.to_string())?;
        for (_, t) in params.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.gen_range(-0.05..0.05);
            }
        }
        let img = GrayImage::new(16, 16, (0..256).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let label = Diagnosis::ALL[accepted % 2];
        let (_, cache) = forward(&params, &img).map_err(|e| e.to_string())?;
        // Central differences straddling a ReLU or pooling switch measure
        // neither one-sided derivative, so such draws are skipped.
        if cache.smoothness_margin() < 10.0 * EPS {
            rejected += 1;
            continue;
        }
        accepted += 1;
        let pair = draw;
        let analytic = backward(&params, &cache, label).map_err(|e| e.to_string())?;
        let mut work = params.clone();
        for t in 0..6 {
            let (name, a) = analytic.tensors()[t];
            let mut diff2 = 0.0;
            let (mut a2, mut n2) = (0.0, 0.0);
            for (i, &ai) in a.iter().enumerate() {
                let orig = params.tensors()[t].1[i];
                work.tensors_mut()[t].1[i] = orig + EPS;
                let up = loss(&work, &img, label);
                work.tensors_mut()[t].1[i] = orig - EPS;
                let down = loss(&work, &img, label);
                work.tensors_mut()[t].1[i] = orig;
                let ni = (up - down) / (2.0 * EPS);
                diff2 += (ai - ni) * (ai - ni);
                a2 += ai * ai;
                n2 += ni * ni;
            }
            let rel = diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(1e-300);
            worst = worst.max(rel);
            ensure(rel < 1e-6, || format!("pair {pair}, {name}: relative error {rel:e}"))?;
        }
    }
    Ok(format!(
        "5 pairs x 6 tensors, worst relative error {worst:.1e} ({rejected} draws within 10 eps of a kink skipped)"
    ))
}

// 6. Separable cohort, scan paths, default training.
fn training_sanity() -> Result<String, String> {
    let recordings = generate_cohort(&CohortSpec::separable(0)).map_err(|e| e.to_string())?;
    ensure(recordings.len() == 200, || format!("{} recordings", recordings.len()))?;
    let cell = GridCell::new(Representation::ScanPath, TransformKind::Identity);
    let outcome = run_matrix(&recordings, &[cell], &MatrixSettings::default())
        .map_err(|e| e.to_string())?
        .remove(0);
    let acc = outcome.report.accuracy_percent;
    let (first, last) = (outcome.curve.epoch_loss[0], *outcome.curve.epoch_loss.last().unwrap());
    ensure(outcome.curve.epoch_loss.len() == 10, || "expected 10 epochs".into())?;
    ensure(acc >= 90.0, || format!("test accuracy {acc:.2}% < 90%"))?;
    ensure(last < first, || format!("final loss {last} not below first {first}"))?;
    Ok(format!("test accuracy {acc:.2}%, epoch loss {first:.4} -> {last:.4}"))
}

struct PipelineRun {
    dir: PathBuf,
    log: String,
}

fn pipeline(root: &Path, name: &str, threads: &str) -> Result<PipelineRun, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gaze2class"))
        .current_dir(root)
        .env("GAZE2CLASS_THREADS", threads)
        .args(["pipeline", "--seed", "7", "--out-dir", name])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("pipeline {name} failed: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(PipelineRun {
        dir: root.join(name),
        log: String::from_utf8_lossy(&out.stdout).into_owned(),
    })
}

struct Runs {
    _root: tempfile::TempDir,
    runs: [PipelineRun; 2],
    elapsed: Duration,
}

/// Two default pipeline runs with the same seed and different worker counts.
fn runs() -> &'static Result<Runs, String> {
    static RUNS: OnceLock<Result<Runs, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        let start = Instant::now();
        let a = pipeline(root.path(), "run-a", "1")?;
        let b = pipeline(root.path(), "run-b", "0")?;
        Ok(Runs {
            _root: root,
            runs: [a, b],
            elapsed: start.elapsed(),
        })
    })
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

// 7. 80/20 membership, 48 iterations per epoch, accuracy by integer recount.
fn protocol_fidelity() -> Result<String, String> {
    let run = &runs().as_ref().map_err(Clone::clone)?.runs[0];
    ensure(
        run.log.contains("split: 480 train / 120 test; 48 iterations per epoch"),
        || format!("log lacks the expected split line:\n{}", run.log),
    )?;
    let split = csv_rows(&run.dir.join("split.csv"))?;
    let count = |set: &str, label: &str| split.iter().filter(|r| r[3] == set && r[2] == label).count();
    ensure(
        (
            count("train", "ASD"),
            count("train", "TD"),
            count("test", "ASD"),
            count("test", "TD"),
        ) == (240, 240, 60, 60),
        || "split.csv is not 240/240 train, 60/60 test".into(),
    )?;
    let report = csv_rows(&run.dir.join("report.csv"))?;
    ensure(report.len() == 9, || format!("{} report rows", report.len()))?;
    for row in &report {
        let cell: GridCell = row[0].parse().map_err(|e| format!("{e}"))?;
        let dir = run
            .dir
            .join("cells")
            .join(format!("{}-{}", cell.representation, cell.transform));
        let curve = csv_rows(&dir.join("curve.csv"))?;
        for epoch in 1..=10 {
            let n = curve.iter().filter(|r| r[0] == epoch.to_string()).count();
            ensure(n == 48, || format!("{}: epoch {epoch} has {n} iterations", row[0]))?;
        }
        // Integer recount from the per-sample prediction log.
        let preds = csv_rows(&dir.join("predictions.csv"))?;
        ensure(preds.len() == 120, || {
            format!("{}: {} predictions", row[0], preds.len())
        })?;
        let mut counts = BTreeMap::new();
        for p in &preds {
            *counts.entry((p[1].clone(), p[2].clone())).or_insert(0u64) += 1;
        }
        let get = |t: &str, p: &str| counts.get(&(t.to_string(), p.to_string())).copied().unwrap_or(0);
        let (tp, fn_, fp, tn) = (get("ASD", "ASD"), get("ASD", "TD"), get("TD", "ASD"), get("TD", "TD"));
        let reported: Vec<u64> = row[2..6].iter().map(|v| v.parse().unwrap()).collect();
        ensure(reported == [tp, fn_, fp, tn], || {
            format!("{}: confusion {reported:?} vs recount", row[0])
        })?;
        let recount = format!("{:.2}", 100.0 * (tp + tn) as f64 / 120.0);
        ensure(row[1] == recount, || {
            format!("{}: accuracy {} vs recount {recount}", row[0], row[1])
        })?;
    }

    // The library path agrees with an independent count as well.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = init_params(7, 16).map_err(|e| e.to_string())?;
    let set = LabeledDataset::new(
        (0..120)
            .map(|i| Sample {
                sample_id: format!("s{i}"),
                subject_id: format!("s{i}"),
                label: Diagnosis::ALL[i % 2],
                image: GrayImage::new(16, 16, (0..256).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap(),
            })
            .collect(),
    );
    let (report, preds) = evaluate_detailed(&params, &set).map_err(|e| e.to_string())?;
    let correct = preds
        .iter()
        .zip(&set.samples)
        .filter(|(p, s)| p.label == s.label)
        .count() as u64;
    let trace = report.confusion.counts[0][0] + report.confusion.counts[1][1];
    ensure(
        trace == correct && report.accuracy_percent == 100.0 * correct as f64 / 120.0,
        || "evaluate disagrees with recount".into(),
    )?;
    Ok("480/120 split, 48 iterations/epoch in all 9 cells, accuracies match recounts".into())
}

fn tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).map_err(|e| e.to_string())?;
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

// 8. Byte-identical artifacts across two runs.
fn determinism() -> Result<String, String> {
    let runs = runs().as_ref().map_err(Clone::clone)?;
    let a = tree(&runs.runs[0].dir)?;
    let b = tree(&runs.runs[1].dir)?;
    ensure(a.keys().eq(b.keys()), || "runs produced different file sets".into())?;
    let mut compared = 0;
    for (path, bytes) in &a {
        // config.txt records the output directory, which differs between the runs.
        if path == Path::new("config.txt") {
            continue;
        }
        ensure(&b[path] == bytes, || format!("{} differs", path.display()))?;
        compared += 1;
    }
    let kinds = |name: &str| a.keys().filter(|p| p.file_name().is_some_and(|f| f == name)).count();
    ensure(
        kinds("model.gzmdl") == 9 && kinds("curve.csv") == 9 && kinds("report.csv") == 1,
        || "missing checkpoints, curves or report".into(),
    )?;
    ensure(runs.elapsed < Duration::from_secs(2 * 15 * 60), || {
        format!("two runs took {:.0} s", runs.elapsed.as_secs_f64())
    })?;
    Ok(format!(
        "{compared} files identical across runs (9 checkpoints, 9 curves), {:.0} s per run",
        runs.elapsed.as_secs_f64() / 2.0
    ))
}

fn main() {
    let criteria: [(&str, Check, Duration); 8] = [
        ("heatmap oracle equivalence", heatmap_oracle, Duration::from_secs(5)),
        ("gaussian kernel spot values", kernel_values, Duration::from_secs(1)),
        ("haar round-trip and energy", haar_round_trip, Duration::from_secs(10)),
        ("fft correctness", fft_correctness, Duration::from_secs(30)),
        ("gradient check", gradient_check, Duration::from_secs(60)),
        ("training sanity", training_sanity, Duration::from_secs(120)),
        ("protocol fidelity", protocol_fidelity, Duration::from_secs(2 * 15 * 60)),
        ("end-to-end determinism", determinism, Duration::from_secs(2 * 15 * 60)),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= *budget {
                Ok(detail)
            } else {
                Err(format!(
                    "{detail}; took {:.1} s, budget {:.0} s",
                    elapsed.as_secs_f64(),
                    budget.as_secs_f64()
                ))
            }
        });
        match result {
            Ok(detail) => println!(
                "criterion {} PASS  {name}: {detail} ({:.2} s)",
                i + 1,
                elapsed.as_secs_f64()
            ),
            Err(reason) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
