//! Flat `key = value` run configuration.
//!
//! Values are resolved in three layers: built-in defaults, then a config
//! file, then command-line flags. Every layer goes through [`PipelineConfig::set`],
//! so the same keys and parsing rules apply everywhere and unknown keys are
//! rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gaze2class_core::classifier::TrainConfig;
use gaze2class_core::eval::{full_grid, GridCell, MatrixSettings};
use gaze2class_core::gaze::{CohortSpec, SplitSpec};
use gaze2class_core::render::{RenderSpec, Representation};
use gaze2class_core::transforms::TransformKind;
use gaze2class_core::Error as CoreError;

use crate::error::{Error, Result};
use crate::gaze_csv::Screen;

pub const KEYS: [&str; 30] = [
    "seed",
    "per_class",
    "dispersion_asd",
    "dispersion_td",
    "n_aoi",
    "path_restriction_asd",
    "fixations_min",
    "fixations_max",
    "subjects_per_class",
    "screen_width",
    "screen_height",
    "input_csv",
    "representation",
    "render_size",
    "sigma",
    "line_thickness",
    "marker_scale",
    "duration_weighted",
    "exact_heatmap",
    "transform",
    "haar_levels",
    "epochs",
    "batch_size",
    "learning_rate",
    "input_side",
    "train_fraction",
    "stratified",
    "group_by_subject",
    "grid",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    pub cohort: CohortSpec,
    /// Load recordings from this CSV instead of generating a cohort.
    pub input_csv: Option<PathBuf>,
    pub render: RenderSpec,
    pub transform: TransformKind,
    pub haar_levels: usize,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub grid: Vec<GridCell>,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cohort: CohortSpec::default(),
            input_csv: None,
            render: RenderSpec::default(),
            transform: TransformKind::Identity,
            haar_levels: 1,
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            grid: full_grid(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn config_err(message: String) -> Error {
    Error::Core(CoreError::Config(message))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn parse_grid(value: &str) -> Result<Vec<GridCell>> {
    if value.trim() == "all" {
        return Ok(full_grid());
    }
    let mut cells = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let cell: GridCell = part.parse()?;
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    if cells.is_empty() {
        return Err(config_err("`grid`: no cells given".into()));
    }
    Ok(cells)
}

impl PipelineConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse(key, value)?,
            "per_class" => self.cohort.n_per_class = parse(key, value)?,
            "dispersion_asd" => self.cohort.dispersion_asd = parse(key, value)?,
            "dispersion_td" => self.cohort.dispersion_td = parse(key, value)?,
            "n_aoi" => self.cohort.n_aoi = parse(key, value)?,
            "path_restriction_asd" => self.cohort.path_restriction_asd = parse(key, value)?,
            "fixations_min" => self.cohort.fixations_per_recording.0 = parse(key, value)?,
            "fixations_max" => self.cohort.fixations_per_recording.1 = parse(key, value)?,
            "subjects_per_class" => {
                let n: usize = parse(key, value)?;
                self.cohort.subjects_per_class = (n > 0).then_some(n);
            }
            "screen_width" => self.cohort.screen_width = parse(key, value)?,
            "screen_height" => self.cohort.screen_height = parse(key, value)?,
            "input_csv" => self.input_csv = (!value.is_empty()).then(|| PathBuf::from(value)),
            "representation" => self.render.representation = value.parse()?,
            "render_size" => {
                let n: usize = parse(key, value)?;
                self.render.out_width = n;
                self.render.out_height = n;
            }
            "sigma" => self.render.sigma = parse(key, value)?,
            "line_thickness" => self.render.line_thickness = parse(key, value)?,
            "marker_scale" => self.render.marker_radius_ms_scale = parse(key, value)?,
            "duration_weighted" => self.render.duration_weighted = parse_bool(key, value)?,
            "exact_heatmap" => self.render.exact = parse_bool(key, value)?,
            "transform" => self.transform = value.parse()?,
            "haar_levels" => self.haar_levels = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "input_side" => self.train.input_side = parse(key, value)?,
            "train_fraction" => self.split.train_fraction = parse(key, value)?,
            "stratified" => self.split.stratified = parse_bool(key, value)?,
            "group_by_subject" => self.split.group_by_subject = parse_bool(key, value)?,
            "grid" => self.grid = parse_grid(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => {
                return Err(config_err(format!(
                    "unknown key `{key}` (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Apply `key = value` lines. Blank lines and `#` comments are skipped;
    /// `path` is only used in error messages.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let located = |message: String| config_err(format!("{}:{}: {message}", path.display(), i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| located(format!("expected `key = value`, got `{line}`")))?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Core(CoreError::Config(m)) => located(m),
                other => located(other.to_string()),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        self.apply_text(&text, path)
    }

    /// Defaults, then the optional file, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort_spec().validate()?;
        self.render.validate()?;
        self.train_config().validate()?;
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(config_err(format!(
                "train_fraction must lie strictly between 0 and 1, got {f}"
            )));
        }
        if self.haar_levels == 0 {
            return Err(config_err("haar_levels must be at least 1".into()));
        }
        Ok(())
    }

    pub fn screen(&self) -> Screen {
        Screen {
            width: self.cohort.screen_width,
            height: self.cohort.screen_height,
        }
    }

    pub fn cohort_spec(&self) -> CohortSpec {
        CohortSpec {
            seed: self.seed,
            ..self.cohort.clone()
        }
    }

    pub fn render_spec(&self, representation: Representation) -> RenderSpec {
        self.render.with_representation(representation)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.seed,
            ..self.split.clone()
        }
    }

    pub fn matrix_settings(&self) -> MatrixSettings {
        MatrixSettings {
            render: self.render.clone(),
            haar_levels: self.haar_levels,
            train: self.train_config(),
            split: self.split_spec(),
        }
    }

    /// The resolved configuration in the same format `apply_text` reads.
    pub fn to_text(&self) -> String {
        let c = &self.cohort;
        let grid: Vec<String> = self.grid.iter().map(GridCell::id).collect();
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("seed", self.seed.to_string());
        line("per_class", c.n_per_class.to_string());
        line("dispersion_asd", c.dispersion_asd.to_string());
        line("dispersion_td", c.dispersion_td.to_string());
        line("n_aoi", c.n_aoi.to_string());
        line("path_restriction_asd", c.path_restriction_asd.to_string());
        line("fixations_min", c.fixations_per_recording.0.to_string());
        line("fixations_max", c.fixations_per_recording.1.to_string());
        line("subjects_per_class", c.subjects_per_class.unwrap_or(0).to_string());
        line("screen_width", c.screen_width.to_string());
        line("screen_height", c.screen_height.to_string());
        line(
            "input_csv",
            self.input_csv
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        line("representation", self.render.representation.to_string());
        line("render_size", self.render.out_width.to_string());
        line("sigma", self.render.sigma.to_string());
        line("line_thickness", self.render.line_thickness.to_string());
        line("marker_scale", self.render.marker_radius_ms_scale.to_string());
        line("duration_weighted", self.render.duration_weighted.to_string());
        line("exact_heatmap", self.render.exact.to_string());
        line("transform", self.transform.to_string());
        line("haar_levels", self.haar_levels.to_string());
        line("epochs", self.train.epochs.to_string());
        line("batch_size", self.train.batch_size.to_string());
        line("learning_rate", self.train.learning_rate.to_string());
        line("input_side", self.train.input_side.to_string());
        line("train_fraction", self.split.train_fraction.to_string());
        line("stratified", self.split.stratified.to_string());
        line("group_by_subject", self.split.group_by_subject.to_string());
        line("grid", grid.join(","));
        line("out_dir", self.out_dir.display().to_string());
        out
    }
}
