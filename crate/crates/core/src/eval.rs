//! Test-set evaluation and the representation x transform comparison grid.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::classifier::{predict, train, ModelParams, Prediction, TrainConfig, TrainingCurve};
use crate::error::{Error, Result};
use crate::gaze::{split_indices, Diagnosis, GazeRecording, LabeledDataset, Sample, SplitIndices, SplitKey, SplitSpec};
use crate::image::GrayImage;
use crate::render::{render, RenderSpec, Representation};
use crate::seed;
use crate::transforms::{apply_transform, resize_bilinear, TransformKind};

/// Counts indexed `[true class][predicted class]`, class order ASD, TD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Diagnosis, Diagnosis)>) -> Self {
        let mut cm = Self::default();
        for (truth, predicted) in pairs {
            cm.counts[truth.index()][predicted.index()] += 1;
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn row_total(&self, truth: Diagnosis) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn column_total(&self, predicted: Diagnosis) -> u64 {
        self.counts[0][predicted.index()] + self.counts[1][predicted.index()]
    }

    /// `100 * correct / total`; zero for an empty matrix.
    pub fn accuracy_percent(&self) -> f64 {
        percent(self.correct(), self.total())
    }

    /// With ASD as the positive class: `(tp, fn, fp, tn)`.
    pub fn tp_fn_fp_tn(&self) -> (u64, u64, u64, u64) {
        let c = self.counts;
        (c[0][0], c[0][1], c[1][0], c[1][1])
    }
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config_id: String,
    pub accuracy_percent: f64,
    pub confusion: ConfusionMatrix,
    /// Indexed by class; zero when the class has no true samples.
    pub per_class_recall: [f64; 2],
    /// Indexed by class; zero when the class was never predicted.
    pub per_class_precision: [f64; 2],
    /// Accuracy on the training set, when known.
    pub train_accuracy_percent: Option<f64>,
}

impl EvalReport {
    pub fn from_confusion(config_id: impl Into<String>, confusion: ConfusionMatrix) -> Self {
        let per = |f: &dyn Fn(Diagnosis) -> f64| [f(Diagnosis::Asd), f(Diagnosis::Td)];
        Self {
            config_id: config_id.into(),
            accuracy_percent: confusion.accuracy_percent(),
            confusion,
            per_class_recall: per(&|c| ratio(confusion.counts[c.index()][c.index()], confusion.row_total(c))),
            per_class_precision: per(&|c| ratio(confusion.counts[c.index()][c.index()], confusion.column_total(c))),
            train_accuracy_percent: None,
        }
    }
}

/// Predict every sample; the report's accuracy is `100 * correct / total`.
pub fn evaluate(params: &ModelParams, test_set: &LabeledDataset) -> Result<EvalReport> {
    evaluate_detailed(params, test_set).map(|(r, _)| r)
}

/// [`evaluate`] plus the per-sample predictions, in dataset order.
pub fn evaluate_detailed(params: &ModelParams, test_set: &LabeledDataset) -> Result<(EvalReport, Vec<Prediction>)> {
    if test_set.is_empty() {
        return Err(Error::EmptyInput("test set is empty"));
    }
    let predictions = test_set
        .samples
        .iter()
        .map(|s| predict(params, &s.image))
        .collect::<Result<Vec<_>>>()?;
    let confusion = ConfusionMatrix::from_pairs(
        test_set
            .samples
            .iter()
            .zip(&predictions)
            .map(|(s, p)| (s.label, p.label)),
    );
    Ok((EvalReport::from_confusion("", confusion), predictions))
}

/// One (representation, transform) configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridCell {
    pub representation: Representation,
    pub transform: TransformKind,
}

impl GridCell {
    pub fn new(representation: Representation, transform: TransformKind) -> Self {
        Self {
            representation,
            transform,
        }
    }

    /// `<representation>:<transform>`, e.g. `scanpath:haar`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.representation, self.transform)
    }

    pub fn title(&self) -> String {
        format!("{}{}", self.transform.title_prefix(), self.representation.title())
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.representation, self.transform)
    }
}

impl FromStr for GridCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (rep, transform) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("grid cell `{s}` is not <representation>:<transform>")))?;
        Ok(Self::new(rep.trim().parse()?, transform.trim().parse()?))
    }
}

/// All nine cells, representation-major.
pub fn full_grid() -> Vec<GridCell> {
    Representation::ALL
        .iter()
        .flat_map(|&r| TransformKind::ALL.iter().map(move |&t| GridCell::new(r, t)))
        .collect()
}

/// Highest test accuracy; ties go to the lexicographically smallest id.
pub fn best_report(reports: &[EvalReport]) -> Option<&EvalReport> {
    reports.iter().min_by(|a, b| {
        b.accuracy_percent
            .partial_cmp(&a.accuracy_percent)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.config_id.cmp(&b.config_id))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSettings {
    /// Base render settings; the representation field is overridden per cell.
    pub render: RenderSpec,
    pub haar_levels: usize,
    pub train: TrainConfig,
    pub split: SplitSpec,
}

impl Default for MatrixSettings {
    fn default() -> Self {
        Self {
            render: RenderSpec::default(),
            haar_levels: 1,
            train: TrainConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

/// State shared by every grid cell: one split and one rendering per
/// representation.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub sample_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    pub labels: Vec<Diagnosis>,
    pub split: SplitIndices,
    pub rendered: BTreeMap<Representation, Vec<GrayImage>>,
}

impl PreparedRun {
    /// Checksum over every rendered image of one representation.
    pub fn render_checksum(&self, rep: Representation) -> Option<u64> {
        self.rendered.get(&rep).map(|imgs| {
            imgs.iter().fold(seed::fnv1a(rep.name().as_bytes()), |h, img| {
                seed::splitmix64(h ^ img.fingerprint())
            })
        })
    }
}

/// Split once and render each representation the grid needs, once.
pub fn prepare_run(recordings: &[GazeRecording], grid: &[GridCell], settings: &MatrixSettings) -> Result<PreparedRun> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("comparison grid is empty"));
    }
    if recordings.is_empty() {
        return Err(Error::EmptyInput("no recordings"));
    }
    let keys: Vec<SplitKey<'_>> = recordings
        .iter()
        .map(|r| SplitKey {
            subject_id: &r.subject_id,
            label: r.label,
        })
        .collect();
    let split = split_indices(&keys, &settings.split)?;
    let mut rendered = BTreeMap::new();
    for cell in grid {
        if rendered.contains_key(&cell.representation) {
            continue;
        }
        let spec = settings.render.with_representation(cell.representation);
        let images = recordings
            .iter()
            .map(|r| render(r, &spec))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_cell(&cell.id(), "render"))?;
        rendered.insert(cell.representation, images);
    }
    Ok(PreparedRun {
        sample_ids: recordings.iter().map(|r| r.sample_id()).collect(),
        subject_ids: recordings.iter().map(|r| r.subject_id.clone()).collect(),
        labels: recordings.iter().map(|r| r.label).collect(),
        split,
        rendered,
    })
}

/// Transform, resize to the model input and rescale to unit maximum.
pub fn classifier_input(
    img: &GrayImage,
    transform: TransformKind,
    haar_levels: usize,
    side: usize,
) -> Result<GrayImage> {
    let t = apply_transform(img, transform, haar_levels)?;
    Ok(resize_bilinear(&t, side, side)?.normalize_unit())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: GridCell,
    pub report: EvalReport,
    pub params: ModelParams,
    pub curve: TrainingCurve,
    /// Predictions for the test split, in `PreparedRun::split.test` order.
    pub test_predictions: Vec<Prediction>,
    pub render_checksum: u64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Build the cell's dataset from a prepared run, train, and evaluate on the
/// shared test split.
pub fn run_cell(prepared: &PreparedRun, cell: GridCell, settings: &MatrixSettings) -> Result<CellOutcome> {
    let id = cell.id();
    let images = prepared.rendered.get(&cell.representation).ok_or_else(|| {
        Error::Config(format!("representation {} was not rendered", cell.representation)).in_cell(&id, "render")
    })?;
    let side = settings.train.input_side;
    let samples = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            Ok(Sample {
                sample_id: prepared.sample_ids[i].clone(),
                subject_id: prepared.subject_ids[i].clone(),
                label: prepared.labels[i],
                image: classifier_input(img, cell.transform, settings.haar_levels, side)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_cell(&id, "transform"))?;
    let all = LabeledDataset::new(samples);
    let train_set = all.select(&prepared.split.train);
    let test_set = all.select(&prepared.split.test);

    let (params, curve) = train(&train_set, &settings.train).map_err(|e| e.in_cell(&id, "train"))?;
    let (mut report, test_predictions) =
        evaluate_detailed(&params, &test_set).map_err(|e| e.in_cell(&id, "evaluate"))?;
    let train_report = evaluate(&params, &train_set).map_err(|e| e.in_cell(&id, "evaluate"))?;
    report.config_id = id;
    report.train_accuracy_percent = Some(train_report.accuracy_percent);
    Ok(CellOutcome {
        cell,
        report,
        params,
        curve,
        test_predictions,
        render_checksum: prepared.render_checksum(cell.representation).unwrap_or_default(),
        train_size: train_set.len(),
        test_size: test_set.len(),
    })
}

/// Render, transform, split, train and evaluate every grid cell, in grid
/// order, with one split shared by all cells.
pub fn run_matrix(
    recordings: &[GazeRecording],
    grid: &[GridCell],
    settings: &MatrixSettings,
) -> Result<Vec<CellOutcome>> {
    let prepared = prepare_run(recordings, grid, settings)?;
    grid.iter().map(|&cell| run_cell(&prepared, cell, settings)).collect()
}
