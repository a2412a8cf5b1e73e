//! The `gaze2class` subcommands as library functions. Progress goes to the
//! `log` writer; every output file is written under the given directories.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use gaze2class_core::classifier::{predict_batch, train_with_observer, ModelParams, TrainingCurve};
use gaze2class_core::eval::{
    classifier_input, evaluate, evaluate_detailed, prepare_run, run_cell, CellOutcome, EvalReport, GridCell,
};
use gaze2class_core::gaze::{
    generate_cohort, split_indices, Diagnosis, GazeRecording, LabeledDataset, SplitIndices, SplitKey,
};
use gaze2class_core::render::{render, Representation};
use gaze2class_core::transforms::{apply_transform, TransformKind};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::manifest::{self, ManifestEntry};
use crate::reports::{self, SummaryRow};
use crate::{checkpoint, gaze_csv, imageio};

pub const THREADS_ENV: &str = "GAZE2CLASS_THREADS";
pub const MODEL_FILE: &str = "model.gzmdl";
pub const CURVE_CSV: &str = "curve.csv";
pub const CURVE_DAT: &str = "curve.dat";

macro_rules! log {
    ($w:expr, $($arg:tt)*) => {
        // Progress output is best effort.
        let _ = writeln!($w, $($arg)*);
    };
}

/// Worker pool sized by `GAZE2CLASS_THREADS` (unset or 0: one per core).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker threads: {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

fn class_counts(labels: impl IntoIterator<Item = Diagnosis>) -> [usize; 2] {
    let mut counts = [0; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Generate the configured synthetic cohort and write it as gaze CSV.
pub fn cmd_generate(cfg: &PipelineConfig, output: &Path, log: &mut dyn Write) -> Result<Vec<GazeRecording>> {
    let recordings = generate_cohort(&cfg.cohort_spec())?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    gaze_csv::save_recordings(output, &recordings)?;
    let [asd, td] = class_counts(recordings.iter().map(|r| r.label));
    log!(
        log,
        "wrote {} recordings (ASD {asd}, TD {td}) to {}",
        recordings.len(),
        output.display()
    );
    Ok(recordings)
}

fn check_unique_files(entries: &[ManifestEntry]) -> Result<()> {
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.file.as_str()) {
            return Err(Error::Core(gaze2class_core::Error::Validation(format!(
                "two samples map to the same file name `{}`",
                e.file
            ))));
        }
    }
    Ok(())
}

/// Render every recording of `input` into `out_dir` as
/// `<subject>_<stimulus>.<rep>.pgm` plus the lossless `.gzimg`.
pub fn cmd_render(
    cfg: &PipelineConfig,
    input: &Path,
    representation: Representation,
    out_dir: &Path,
    log: &mut dyn Write,
) -> Result<Vec<ManifestEntry>> {
    let recordings = gaze_csv::load_recordings(input, cfg.screen())?;
    let spec = cfg.render_spec(representation);
    let entries: Vec<ManifestEntry> = recordings
        .iter()
        .map(|r| ManifestEntry::for_recording(r, format!("{}.{}.gzimg", r.sample_id(), representation)))
        .collect();
    check_unique_files(&entries)?;
    create_dir(out_dir)?;
    thread_pool()?.install(|| {
        recordings
            .par_iter()
            .zip(&entries)
            .try_for_each(|(rec, entry)| -> Result<()> {
                let img = render(rec, &spec)?;
                write_image_pair(out_dir, &entry.file, &img)
            })
    })?;
    manifest::write(out_dir, &entries)?;
    log!(
        log,
        "rendered {} {} images into {}",
        entries.len(),
        representation,
        out_dir.display()
    );
    Ok(entries)
}

fn write_image_pair(dir: &Path, raw_name: &str, img: &gaze2class_core::GrayImage) -> Result<()> {
    let stem = raw_name.strip_suffix(".gzimg").unwrap_or(raw_name);
    imageio::write_gzimg(&dir.join(raw_name), img)?;
    imageio::write_pgm(&dir.join(format!("{stem}.pgm")), img)
}

/// Apply `kind` to every image listed in `in_dir`'s manifest, appending the
/// transform name to each file name.
pub fn cmd_transform(
    cfg: &PipelineConfig,
    in_dir: &Path,
    kind: TransformKind,
    out_dir: &Path,
    log: &mut dyn Write,
) -> Result<Vec<ManifestEntry>> {
    let items = manifest::load_images(in_dir)?;
    let entries: Vec<ManifestEntry> = items
        .iter()
        .map(|(e, _)| {
            let stem = e.file.strip_suffix(".gzimg").unwrap_or(&e.file);
            ManifestEntry {
                file: format!("{stem}.{kind}.gzimg"),
                ..e.clone()
            }
        })
        .collect();
    check_unique_files(&entries)?;
    create_dir(out_dir)?;
    let levels = cfg.haar_levels;
    thread_pool()?.install(|| {
        items
            .par_iter()
            .zip(&entries)
            .try_for_each(|((_, img), entry)| -> Result<()> {
                let out = apply_transform(img, kind, levels)?;
                write_image_pair(out_dir, &entry.file, &out)
            })
    })?;
    manifest::write(out_dir, &entries)?;
    log!(
        log,
        "applied {kind} to {} images into {}",
        entries.len(),
        out_dir.display()
    );
    Ok(entries)
}

fn split_for(items: &[(ManifestEntry, gaze2class_core::GrayImage)], cfg: &PipelineConfig) -> Result<SplitIndices> {
    let keys: Vec<SplitKey<'_>> = items
        .iter()
        .map(|(e, _)| SplitKey {
            subject_id: &e.subject_id,
            label: e.label,
        })
        .collect();
    Ok(split_indices(&keys, &cfg.split_spec())?)
}

fn split_rows<'a>(
    ids: impl IntoIterator<Item = (&'a str, &'a str, Diagnosis)>,
    split: &SplitIndices,
) -> Vec<(String, String, Diagnosis, bool)> {
    let train: HashSet<usize> = split.train.iter().copied().collect();
    ids.into_iter()
        .enumerate()
        .filter(|(i, _)| train.contains(i) || split.test.binary_search(i).is_ok())
        .map(|(i, (sample, subject, label))| (sample.to_string(), subject.to_string(), label, train.contains(&i)))
        .collect()
}

fn model_dataset(items: &[(ManifestEntry, gaze2class_core::GrayImage)], side: usize) -> Result<LabeledDataset> {
    // Images on disk are already transformed; only resize and rescale.
    manifest::dataset(items, |img| classifier_input(img, TransformKind::Identity, 1, side))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub curve: TrainingCurve,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy_percent: f64,
    pub test_accuracy_percent: f64,
}

/// Split the images of `in_dir`, train on the training part and write
/// `model.gzmdl`, `curve.csv`, `curve.dat` and `split.csv` to `out_dir`.
pub fn cmd_train(cfg: &PipelineConfig, in_dir: &Path, out_dir: &Path, log: &mut dyn Write) -> Result<TrainOutcome> {
    let items = manifest::load_images(in_dir)?;
    let train_cfg = cfg.train_config();
    let all = model_dataset(&items, train_cfg.input_side)?;
    let split = split_for(&items, cfg)?;
    let train_set = all.select(&split.train);
    let test_set = all.select(&split.test);
    log!(
        log,
        "split: {} train / {} test; {} iterations per epoch",
        train_set.len(),
        test_set.len(),
        train_cfg.iterations_per_epoch(train_set.len())
    );
    let (params, curve) = train_with_observer(&train_set, &train_cfg, |s| {
        log!(
            log,
            "epoch {}: {} iterations, mean loss {:.6}, train accuracy {:.2}%",
            s.epoch,
            s.iterations,
            s.mean_loss,
            100.0 * s.accuracy
        );
    })?;
    let train_acc = evaluate(&params, &train_set)?.accuracy_percent;
    let test_acc = if test_set.is_empty() {
        f64::NAN
    } else {
        evaluate(&params, &test_set)?.accuracy_percent
    };

    create_dir(out_dir)?;
    checkpoint::save(&out_dir.join(MODEL_FILE), &params)?;
    reports::write_text(&out_dir.join(CURVE_CSV), &reports::curve_csv(&curve))?;
    reports::write_text(&out_dir.join(CURVE_DAT), &reports::curve_dat(&curve))?;
    let ids = items
        .iter()
        .map(|(e, _)| (e.sample_id.as_str(), e.subject_id.as_str(), e.label));
    reports::write_text(&out_dir.join("split.csv"), &reports::split_csv(split_rows(ids, &split)))?;
    log!(log, "final accuracy: train {train_acc:.2}%, test {test_acc:.2}%");
    log!(
        log,
        "wrote {} and {}",
        out_dir.join(MODEL_FILE).display(),
        out_dir.join(CURVE_CSV).display()
    );
    Ok(TrainOutcome {
        params,
        train_size: train_set.len(),
        test_size: test_set.len(),
        train_accuracy_percent: train_acc,
        test_accuracy_percent: test_acc,
        curve,
    })
}

/// Which samples `evaluate` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSubset {
    /// The held-out part of the configured split.
    Test,
    /// Every sample in the directory.
    All,
}

/// `<rep>:<transform>` recovered from file names such as
/// `ASD0001_stim01.scanpath.haar.gzimg`.
fn config_id_from(items: &[(ManifestEntry, gaze2class_core::GrayImage)]) -> Option<String> {
    let (e, _) = items.first()?;
    let tags = e
        .file
        .strip_prefix(&e.sample_id)?
        .strip_prefix('.')?
        .strip_suffix(".gzimg")?;
    let mut parts = tags.split('.');
    let rep: Representation = parts.next()?.parse().ok()?;
    let transform: TransformKind = parts.next().map_or(Some(TransformKind::Identity), |t| t.parse().ok())?;
    Some(GridCell::new(rep, transform).id())
}

/// Score a checkpoint on the images of `in_dir`. Writes `report.csv`,
/// `confusion.csv`, `predictions.csv` and `report.md`, plus `curve.dat` when
/// a `curve.csv` sits next to the checkpoint.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    checkpoint_path: &Path,
    in_dir: &Path,
    subset: EvalSubset,
    out_dir: &Path,
    log: &mut dyn Write,
) -> Result<EvalReport> {
    let params = checkpoint::load(checkpoint_path, None)?;
    let items = manifest::load_images(in_dir)?;
    let all = model_dataset(&items, params.input_side())?;
    let (eval_set, train_set) = match subset {
        EvalSubset::All => (all, None),
        EvalSubset::Test => {
            let split = split_for(&items, cfg)?;
            (all.select(&split.test), Some(all.select(&split.train)))
        }
    };
    let (mut report, predictions) = evaluate_detailed(&params, &eval_set)?;
    let cell = config_id_from(&items).and_then(|id| id.parse::<GridCell>().ok());
    report.config_id = cell.map_or_else(|| "unknown".to_string(), |c| c.id());
    if let Some(train_set) = train_set.filter(|s| !s.is_empty()) {
        let preds = predict_batch(
            &params,
            &train_set.samples.iter().map(|s| s.image.clone()).collect::<Vec<_>>(),
        )?;
        let correct = preds
            .iter()
            .zip(&train_set.samples)
            .filter(|(p, s)| p.label == s.label)
            .count();
        report.train_accuracy_percent = Some(100.0 * correct as f64 / train_set.len() as f64);
    }

    create_dir(out_dir)?;
    reports::write_text(
        &out_dir.join("report.csv"),
        &reports::report_csv(std::slice::from_ref(&report)),
    )?;
    reports::write_text(
        &out_dir.join("confusion.csv"),
        &reports::confusion_csv(&report.confusion),
    )?;
    reports::write_text(
        &out_dir.join("predictions.csv"),
        &reports::predictions_csv(
            eval_set.samples.iter().map(|s| (s.sample_id.as_str(), s.label)),
            &predictions,
        ),
    )?;

    let curve_path = checkpoint_path.with_file_name(CURVE_CSV);
    let curve = match fs::read_to_string(&curve_path) {
        Ok(text) => Some(reports::parse_curve_csv(&text, &curve_path)?),
        Err(_) => None,
    };
    if let Some(curve) = &curve {
        reports::write_text(&out_dir.join(CURVE_DAT), &reports::curve_dat(curve))?;
    }
    let (epochs, ipe) = curve
        .as_ref()
        .map_or((cfg.train.epochs, 0), |c| (c.epoch_loss.len(), c.iterations_per_epoch));
    if let Some(cell) = cell {
        let row = SummaryRow {
            cell,
            report: report.clone(),
            epochs,
            iterations_per_epoch: ipe,
        };
        let train_size = match subset {
            EvalSubset::Test => items.len() - eval_set.len(),
            EvalSubset::All => 0,
        };
        reports::write_text(
            &out_dir.join("report.md"),
            &reports::summary_markdown(&[row], train_size, eval_set.len()),
        )?;
    }
    log!(
        log,
        "{}: accuracy {:.2}% on {} samples ({} correct)",
        report.config_id,
        report.accuracy_percent,
        report.confusion.total(),
        report.confusion.correct()
    );
    Ok(report)
}

/// Directory of one grid cell's artifacts, e.g. `cells/scanpath-haar`.
pub fn cell_dir(out_dir: &Path, cell: GridCell) -> PathBuf {
    out_dir
        .join("cells")
        .join(format!("{}-{}", cell.representation, cell.transform))
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub outcomes: Vec<CellOutcome>,
    pub train_size: usize,
    pub test_size: usize,
}

/// Load or generate recordings, then render, transform, train and evaluate
/// every configured grid cell on one shared split. Cells run in parallel;
/// the first failing cell in grid order aborts the run.
pub fn cmd_pipeline(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<PipelineOutcome> {
    let out = &cfg.out_dir;
    create_dir(out)?;
    reports::write_text(&out.join("config.txt"), &cfg.to_text())?;
    let recordings = match &cfg.input_csv {
        Some(path) => {
            let recs = gaze_csv::load_recordings(path, cfg.screen())?;
            log!(log, "loaded {} recordings from {}", recs.len(), path.display());
            gaze_csv::save_recordings(&out.join("gaze.csv"), &recs)?;
            recs
        }
        None => cmd_generate(cfg, &out.join("gaze.csv"), log)?,
    };

    let settings = cfg.matrix_settings();
    let prepared = prepare_run(&recordings, &cfg.grid, &settings)?;
    let split = &prepared.split;
    let ids = prepared
        .sample_ids
        .iter()
        .zip(&prepared.subject_ids)
        .zip(&prepared.labels)
        .map(|((s, j), l)| (s.as_str(), j.as_str(), *l));
    reports::write_text(&out.join("split.csv"), &reports::split_csv(split_rows(ids, split)))?;
    log!(
        log,
        "split: {} train / {} test; {} iterations per epoch",
        split.train.len(),
        split.test.len(),
        settings.train.iterations_per_epoch(split.train.len())
    );

    let results: Vec<Result<CellOutcome>> = thread_pool()?.install(|| {
        cfg.grid
            .par_iter()
            .map(|&cell| run_cell(&prepared, cell, &settings).map_err(Error::from))
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;

    let test_set: Vec<(String, Diagnosis)> = split
        .test
        .iter()
        .map(|&i| (prepared.sample_ids[i].clone(), prepared.labels[i]))
        .collect();
    for o in &outcomes {
        let dir = cell_dir(out, o.cell);
        create_dir(&dir)?;
        checkpoint::save(&dir.join(MODEL_FILE), &o.params)?;
        reports::write_text(&dir.join(CURVE_CSV), &reports::curve_csv(&o.curve))?;
        reports::write_text(&dir.join(CURVE_DAT), &reports::curve_dat(&o.curve))?;
        reports::write_text(&dir.join("confusion.csv"), &reports::confusion_csv(&o.report.confusion))?;
        reports::write_text(
            &dir.join("predictions.csv"),
            &reports::predictions_csv(test_set.iter().map(|(s, l)| (s.as_str(), *l)), &o.test_predictions),
        )?;
        log!(
            log,
            "{:<22} test {:6.2}%  train {:6.2}%",
            o.cell.id(),
            o.report.accuracy_percent,
            o.report.train_accuracy_percent.unwrap_or(f64::NAN)
        );
    }
    let reports_list: Vec<EvalReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    reports::write_text(&out.join("report.csv"), &reports::report_csv(&reports_list))?;
    let rows: Vec<SummaryRow> = outcomes
        .iter()
        .map(|o| SummaryRow {
            cell: o.cell,
            report: o.report.clone(),
            epochs: settings.train.epochs,
            iterations_per_epoch: o.curve.iterations_per_epoch,
        })
        .collect();
    reports::write_text(
        &out.join("report.md"),
        &reports::summary_markdown(&rows, split.train.len(), split.test.len()),
    )?;
    log!(log, "wrote reports to {}", out.display());
    Ok(PipelineOutcome {
        outcomes,
        train_size: split.train.len(),
        test_size: split.test.len(),
    })
}
