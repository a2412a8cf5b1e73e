//! Fixation recordings, the synthetic cohort generator and dataset splitting.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::seed;

pub const DEFAULT_SCREEN_WIDTH: f64 = 1280.0;
pub const DEFAULT_SCREEN_HEIGHT: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Diagnosis {
    Asd,
    Td,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 2] = [Diagnosis::Asd, Diagnosis::Td];

    /// Output-unit index in the classifier head.
    pub fn index(self) -> usize {
        match self {
            Diagnosis::Asd => 0,
            Diagnosis::Td => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::Asd => "ASD",
            Diagnosis::Td => "TD",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Diagnosis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ASD" => Ok(Diagnosis::Asd),
            "TD" => Ok(Diagnosis::Td),
            other => Err(Error::Validation(format!("label `{other}` is not ASD or TD"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationPoint {
    pub x: f64,
    pub y: f64,
    pub onset_ms: f64,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeRecording {
    pub subject_id: String,
    pub stimulus_id: String,
    pub label: Diagnosis,
    pub screen_width: f64,
    pub screen_height: f64,
    pub points: Vec<FixationPoint>,
}

impl GazeRecording {
    /// Sample name used for file naming: `<subject>_<stimulus>`.
    pub fn sample_id(&self) -> String {
        format!("{}_{}", self.subject_id, self.stimulus_id)
    }

    /// Checks screen bounds, positive durations and strictly increasing onsets.
    pub fn validate(&self) -> Result<()> {
        if !(self.screen_width > 0.0 && self.screen_height > 0.0) {
            return Err(Error::Validation(format!(
                "recording {}: screen dimensions must be positive",
                self.sample_id()
            )));
        }
        let mut last_onset = f64::NEG_INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let in_bounds = (0.0..self.screen_width).contains(&p.x) && (0.0..self.screen_height).contains(&p.y);
            if !in_bounds {
                return Err(Error::Validation(format!(
                    "recording {}: fixation {i} at ({}, {}) outside {}x{} screen",
                    self.sample_id(),
                    p.x,
                    p.y,
                    self.screen_width,
                    self.screen_height
                )));
            }
            if !(p.duration_ms > 0.0) || !p.duration_ms.is_finite() {
                return Err(Error::Validation(format!(
                    "recording {}: fixation {i} has non-positive duration",
                    self.sample_id()
                )));
            }
            if !(p.onset_ms > last_onset) || !p.onset_ms.is_finite() {
                return Err(Error::Validation(format!(
                    "recording {}: onsets not strictly increasing at fixation {i}",
                    self.sample_id()
                )));
            }
            last_onset = p.onset_ms;
        }
        Ok(())
    }
}

/// Mean Euclidean distance over all unordered fixation pairs; zero for fewer
/// than two fixations.
pub fn mean_pairwise_distance(points: &[FixationPoint]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (points[i].x - points[j].x, points[i].y - points[j].y);
            total += libm::sqrt(dx * dx + dy * dy);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Parameters of the synthetic cohort generator.
///
/// Fixations are drawn from isotropic Gaussians around `n_aoi` attractor
/// regions placed uniformly in the central 80% of the screen. Between
/// fixations the gaze moves to another attractor with probability
/// `BASE_TRANSITION_PROBABILITY`, scaled by `1 - path_restriction` for the
/// ASD class. The two classes differ only through `dispersion_*` and
/// `path_restriction_asd`.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub n_per_class: usize,
    pub dispersion_asd: f64,
    pub dispersion_td: f64,
    pub n_aoi: usize,
    pub path_restriction_asd: f64,
    /// Inclusive range of fixation counts per recording.
    pub fixations_per_recording: (usize, usize),
    /// When set, recordings of a class are assigned round-robin to this many
    /// subjects, each recording getting its own stimulus id. When unset every
    /// recording is its own subject.
    pub subjects_per_class: Option<usize>,
    pub screen_width: f64,
    pub screen_height: f64,
    pub seed: u64,
}

pub const BASE_TRANSITION_PROBABILITY: f64 = 0.6;

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_per_class: 300,
            dispersion_asd: 110.0,
            dispersion_td: 35.0,
            n_aoi: 4,
            path_restriction_asd: 0.6,
            fixations_per_recording: (8, 24),
            subjects_per_class: None,
            screen_width: DEFAULT_SCREEN_WIDTH,
            screen_height: DEFAULT_SCREEN_HEIGHT,
            seed: 0,
        }
    }
}

impl CohortSpec {
    /// The 200-recording, well separated cohort used for training sanity runs.
    pub fn separable(seed: u64) -> Self {
        Self {
            n_per_class: 100,
            dispersion_asd: 150.0,
            dispersion_td: 30.0,
            path_restriction_asd: 0.8,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::Config(format!("cohort: {m}")));
        if self.n_per_class == 0 {
            return invalid("n_per_class must be at least 1");
        }
        if !(self.dispersion_asd > 0.0 && self.dispersion_td > 0.0) {
            return invalid("dispersion values must be positive");
        }
        if self.n_aoi == 0 {
            return invalid("n_aoi must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.path_restriction_asd) {
            return invalid("path_restriction_asd must lie in [0, 1]");
        }
        let (lo, hi) = self.fixations_per_recording;
        if lo == 0 || lo > hi {
            return invalid("fixations_per_recording must be a non-empty range starting at 1 or more");
        }
        if self.subjects_per_class == Some(0) {
            return invalid("subjects_per_class must be at least 1");
        }
        if !(self.screen_width >= 1.0 && self.screen_height >= 1.0) {
            return invalid("screen dimensions must be at least 1 pixel");
        }
        Ok(())
    }
}

/// Attractor centers for a cohort; a pure function of `spec.seed` and the
/// screen geometry.
pub fn aoi_layout(spec: &CohortSpec) -> Vec<(f64, f64)> {
    let mut rng = seed::rng(spec.seed, seed::stage::AOI_LAYOUT);
    (0..spec.n_aoi)
        .map(|_| {
            let x = rng.gen_range(0.1..0.9) * spec.screen_width;
            let y = rng.gen_range(0.1..0.9) * spec.screen_height;
            (x, y)
        })
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; `1 - u` keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

fn clamp_to_screen(v: f64, extent: f64) -> f64 {
    // Largest double strictly below `extent`.
    let upper = f64::from_bits(extent.to_bits() - 1);
    v.clamp(0.0, upper)
}

/// Generate `2 * n_per_class` recordings: ASD first, then TD.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<GazeRecording>> {
    spec.validate()?;
    let aois = aoi_layout(spec);
    let mut rng = seed::rng(spec.seed, seed::stage::COHORT);
    let mut out = Vec::with_capacity(2 * spec.n_per_class);
    for label in Diagnosis::ALL {
        let (dispersion, restriction) = match label {
            Diagnosis::Asd => (spec.dispersion_asd, spec.path_restriction_asd),
            Diagnosis::Td => (spec.dispersion_td, 0.0),
        };
        let p_move = BASE_TRANSITION_PROBABILITY * (1.0 - restriction);
        for i in 0..spec.n_per_class {
            let (subject_id, stimulus_id) = match spec.subjects_per_class {
                None => (format!("{label}{i:04}"), String::from("stim01")),
                Some(k) => (format!("{label}{:04}", i % k), format!("stim{:03}", i / k + 1)),
            };
            let (lo, hi) = spec.fixations_per_recording;
            let n = rng.gen_range(lo..=hi);
            let mut aoi = rng.gen_range(0..aois.len());
            let mut onset = rng.gen_range(0.0..200.0);
            let mut points = Vec::with_capacity(n);
            for k in 0..n {
                if k > 0 && aois.len() > 1 && rng.gen::<f64>() < p_move {
                    let step = rng.gen_range(1..aois.len());
                    aoi = (aoi + step) % aois.len();
                }
                let (cx, cy) = aois[aoi];
                let x = clamp_to_screen(cx + dispersion * standard_normal(&mut rng), spec.screen_width);
                let y = clamp_to_screen(cy + dispersion * standard_normal(&mut rng), spec.screen_height);
                let duration_ms = rng.gen_range(120.0..600.0);
                points.push(FixationPoint {
                    x,
                    y,
                    onset_ms: onset,
                    duration_ms,
                });
                onset += duration_ms + rng.gen_range(20.0..80.0);
            }
            out.push(GazeRecording {
                subject_id,
                stimulus_id,
                label,
                screen_width: spec.screen_width,
                screen_height: spec.screen_height,
                points,
            });
        }
    }
    Ok(out)
}

/// One labeled image plus the provenance needed for splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub subject_id: String,
    pub label: Diagnosis,
    pub image: GrayImage,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    /// Subset by index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub group_by_subject: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            stratified: true,
            group_by_subject: false,
            seed: 0,
        }
    }
}

/// What the splitter needs to know about a sample.
#[derive(Debug, Clone, Copy)]
pub struct SplitKey<'a> {
    pub subject_id: &'a str,
    pub label: Diagnosis,
}

/// Train/test membership as ascending index lists into the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class train counts by largest remainder so that they add up to
/// `round(fraction * N)`. Ties go to the class listed first.
fn stratum_quotas(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = libm::round(fraction * total as f64) as usize;
    let mut quotas: Vec<usize> = sizes
        .iter()
        .map(|&n| libm::floor(fraction * n as f64) as usize)
        .collect();
    let mut remaining = target.saturating_sub(quotas.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    let frac = |i: usize| fraction * sizes[i] as f64 - quotas[i] as f64;
    // Stable sort keeps enumeration order among equal remainders.
    order.sort_by(|&a, &b| frac(b).partial_cmp(&frac(a)).unwrap_or(core::cmp::Ordering::Equal));
    for i in order {
        if remaining == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            remaining -= 1;
        }
    }
    quotas
}

pub fn split_indices(keys: &[SplitKey<'_>], spec: &SplitSpec) -> Result<SplitIndices> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction {} must lie strictly between 0 and 1",
            spec.train_fraction
        )));
    }
    if keys.is_empty() {
        return Err(Error::EmptyInput("nothing to split"));
    }
    let mut rng = seed::rng(spec.seed, seed::stage::SPLIT);

    // Units are the things that get shuffled and assigned: single samples,
    // or every sample of one subject.
    let mut units: Vec<(Diagnosis, Vec<usize>)> = Vec::new();
    if spec.group_by_subject {
        let mut by_subject: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, k) in keys.iter().enumerate() {
            match by_subject.get(k.subject_id) {
                Some(&u) => units[u].1.push(i),
                None => {
                    by_subject.insert(k.subject_id, units.len());
                    units.push((k.label, alloc::vec![i]));
                }
            }
        }
    } else {
        units = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.label, alloc::vec![i]))
            .collect();
    }

    let strata: Vec<Vec<usize>> = if spec.stratified {
        let mut strata = alloc::vec![Vec::new(); 2];
        for (u, (label, _)) in units.iter().enumerate() {
            strata[label.index()].push(u);
        }
        for class in Diagnosis::ALL {
            if strata[class.index()].is_empty() {
                return Err(Error::Stratification(class.as_str()));
            }
        }
        strata
    } else {
        alloc::vec![(0..units.len()).collect()]
    };

    let sample_counts: Vec<usize> = strata
        .iter()
        .map(|s| s.iter().map(|&u| units[u].1.len()).sum())
        .collect();
    let quotas = stratum_quotas(&sample_counts, spec.train_fraction);

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (mut stratum, quota) in strata.into_iter().zip(quotas) {
        stratum.shuffle(&mut rng);
        let mut taken = 0;
        for u in stratum {
            let members = &units[u].1;
            if taken < quota {
                taken += members.len();
                train.extend_from_slice(members);
            } else {
                test.extend_from_slice(members);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split_dataset(samples: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let keys: Vec<SplitKey<'_>> = samples
        .samples
        .iter()
        .map(|s| SplitKey {
            subject_id: &s.subject_id,
            label: s.label,
        })
        .collect();
    let idx = split_indices(&keys, spec)?;
    Ok((samples.select(&idx.train), samples.select(&idx.test)))
}
