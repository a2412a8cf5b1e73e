//! Report and log files: training curves, evaluation tables, prediction logs
//! and split membership.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gaze2class_core::classifier::Prediction;
use gaze2class_core::classifier::TrainingCurve;
use gaze2class_core::eval::{best_report, ConfusionMatrix, EvalReport, GridCell};
use gaze2class_core::gaze::Diagnosis;

use crate::error::{Error, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::io(path))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing to memory cannot fail.
    w.write_record(header).unwrap();
    for row in rows {
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// One row per iteration; `train_accuracy` (percent) only on the last
/// iteration of each epoch.
pub fn curve_csv(curve: &TrainingCurve) -> String {
    let mut out = String::from("epoch,iteration,loss,train_accuracy\n");
    for (i, rec) in curve.iterations.iter().enumerate() {
        let last_of_epoch = curve.iterations.get(i + 1).is_none_or(|next| next.epoch != rec.epoch);
        let acc = if last_of_epoch {
            format!("{:.2}", 100.0 * curve.epoch_accuracy[rec.epoch - 1])
        } else {
            String::new()
        };
        let _ = writeln!(out, "{},{},{},{}", rec.epoch, rec.iteration, rec.loss, acc);
    }
    out
}

/// Gnuplot data: block 0 holds per-iteration loss, block 1 per-epoch mean
/// loss and training accuracy, e.g. `plot 'curve.dat' index 0 using 1:2 with lines`.
pub fn curve_dat(curve: &TrainingCurve) -> String {
    let mut out = String::from("# iteration loss\n");
    for rec in &curve.iterations {
        let _ = writeln!(out, "{} {}", rec.iteration, rec.loss);
    }
    out.push_str("\n\n# epoch iteration mean_loss train_accuracy_percent\n");
    for (e, (loss, acc)) in curve.epoch_loss.iter().zip(&curve.epoch_accuracy).enumerate() {
        let _ = writeln!(
            out,
            "{} {} {} {:.2}",
            e + 1,
            (e + 1) * curve.iterations_per_epoch,
            loss,
            100.0 * acc
        );
    }
    out
}

/// Rebuild a curve from `curve.csv` text; used to emit plot data for a
/// checkpoint trained by an earlier command.
pub fn parse_curve_csv(text: &str, path: &Path) -> Result<TrainingCurve> {
    let mut curve = TrainingCurve::default();
    let mut epoch_losses: Vec<(f64, usize)> = Vec::new();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = || {
            Error::format(
                path,
                format!("malformed curve row `{}`", record.iter().collect::<Vec<_>>().join(",")),
            )
        };
        let epoch: usize = record[0].parse().map_err(|_| bad())?;
        let iteration: usize = record[1].parse().map_err(|_| bad())?;
        let loss: f64 = record[2].parse().map_err(|_| bad())?;
        if epoch == 0 || epoch > epoch_losses.len() + 1 {
            return Err(bad());
        }
        if epoch > epoch_losses.len() {
            epoch_losses.push((0.0, 0));
        }
        curve
            .iterations
            .push(gaze2class_core::classifier::IterationRecord { epoch, iteration, loss });
        let slot = &mut epoch_losses[epoch - 1];
        slot.0 += loss;
        slot.1 += 1;
        if !record[3].is_empty() {
            let acc: f64 = record[3].parse().map_err(|_| bad())?;
            curve.epoch_accuracy.push(acc / 100.0);
        }
    }
    curve.iterations_per_epoch = epoch_losses.first().map_or(0, |e| e.1);
    // Batch means averaged with equal weight; exact unless the last batch is partial.
    curve.epoch_loss = epoch_losses.iter().map(|(s, n)| s / *n as f64).collect();
    Ok(curve)
}

pub fn report_csv(reports: &[EvalReport]) -> String {
    csv_string(
        &[
            "config_id",
            "accuracy_percent",
            "tp",
            "fn",
            "fp",
            "tn",
            "train_accuracy_percent",
        ],
        reports.iter().map(|r| {
            let (tp, fn_, fp, tn) = r.confusion.tp_fn_fp_tn();
            vec![
                r.config_id.clone(),
                format!("{:.2}", r.accuracy_percent),
                tp.to_string(),
                fn_.to_string(),
                fp.to_string(),
                tn.to_string(),
                r.train_accuracy_percent.map(|a| format!("{a:.2}")).unwrap_or_default(),
            ]
        }),
    )
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    csv_string(
        &["true_label", "pred_ASD", "pred_TD"],
        Diagnosis::ALL.iter().map(|&t| {
            vec![
                t.as_str().to_string(),
                cm.counts[t.index()][0].to_string(),
                cm.counts[t.index()][1].to_string(),
            ]
        }),
    )
}

/// `samples` yields `(sample_id, true label)` in the same order as `predictions`.
pub fn predictions_csv<'a>(
    samples: impl IntoIterator<Item = (&'a str, Diagnosis)>,
    predictions: &[Prediction],
) -> String {
    csv_string(
        &["sample_id", "true_label", "predicted_label", "p_asd", "p_td"],
        samples.into_iter().zip(predictions).map(|((id, label), p)| {
            vec![
                id.to_string(),
                label.as_str().to_string(),
                p.label.as_str().to_string(),
                p.probabilities[0].to_string(),
                p.probabilities[1].to_string(),
            ]
        }),
    )
}

/// `sample_id,subject_id,label,set` with `set` either `train` or `test`.
pub fn split_csv(rows: impl IntoIterator<Item = (String, String, Diagnosis, bool)>) -> String {
    csv_string(
        &["sample_id", "subject_id", "label", "set"],
        rows.into_iter().map(|(sample, subject, label, is_train)| {
            vec![
                sample,
                subject,
                label.as_str().to_string(),
                if is_train { "train" } else { "test" }.to_string(),
            ]
        }),
    )
}

/// One row of the Markdown summary.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub cell: GridCell,
    pub report: EvalReport,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
}

fn confusion_table(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("| true \\ predicted | ASD | TD |\n|---|---:|---:|\n");
    for t in Diagnosis::ALL {
        let row = cm.counts[t.index()];
        let _ = writeln!(out, "| {} | {} | {} |", t, row[0], row[1]);
    }
    out
}

/// Results table, best configuration and its confusion matrix.
pub fn summary_markdown(rows: &[SummaryRow], train_size: usize, test_size: usize) -> String {
    let mut out = String::from("# Training results summary\n\n");
    let _ = writeln!(out, "Train samples: {train_size}. Test samples: {test_size}.\n");
    out.push_str(
        "| Input data | Config | Test accuracy (%) | Train accuracy (%) | Epochs | Iterations/epoch |\n\
         |---|---|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let train = r
            .report
            .train_accuracy_percent
            .map(|a| format!("{a:.2}"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            out,
            "| {} | `{}` | {:.2} | {} | {} | {} |",
            r.cell.title(),
            r.cell.id(),
            r.report.accuracy_percent,
            train,
            r.epochs,
            r.iterations_per_epoch
        );
    }
    let reports: Vec<EvalReport> = rows.iter().map(|r| r.report.clone()).collect();
    if let Some(best) = best_report(&reports) {
        let title = rows
            .iter()
            .find(|r| r.report.config_id == best.config_id)
            .map_or(best.config_id.clone(), |r| r.cell.title());
        let _ = writeln!(
            out,
            "\n## Best configuration: {} (`{}`), {:.2}% test accuracy\n",
            title, best.config_id, best.accuracy_percent
        );
        out.push_str(&confusion_table(&best.confusion));
        out.push('\n');
        out.push_str("| class | recall | precision |\n|---|---:|---:|\n");
        for t in Diagnosis::ALL {
            let _ = writeln!(
                out,
                "| {} | {:.4} | {:.4} |",
                t,
                best.per_class_recall[t.index()],
                best.per_class_precision[t.index()]
            );
        }
    }
    out
}
