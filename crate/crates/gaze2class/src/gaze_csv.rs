//! Fixation CSV files.
//!
//! ```text
//! subject_id,stimulus_id,label,onset_ms,x,y,duration_ms
//! P01,img03,ASD,0,640.5,512,230
//! ```
//!
//! Rows may come in any order; each `(subject_id, stimulus_id)` pair becomes
//! one recording, sorted by onset. Recordings keep the order in which their
//! first row appears.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use gaze2class_core::gaze::{Diagnosis, FixationPoint, GazeRecording};

use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = [
    "subject_id",
    "stimulus_id",
    "label",
    "onset_ms",
    "x",
    "y",
    "duration_ms",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Screen {
    pub width: f64,
    pub height: f64,
}

impl Default for Screen {
    fn default() -> Self {
        Self {
            width: gaze2class_core::gaze::DEFAULT_SCREEN_WIDTH,
            height: gaze2class_core::gaze::DEFAULT_SCREEN_HEIGHT,
        }
    }
}

pub fn load_recordings(path: &Path, screen: Screen) -> Result<Vec<GazeRecording>> {
    let file = File::open(path).map_err(Error::io(path))?;
    read_recordings(file, path, screen)
}

/// Parse from any reader; `path` is only used in error messages.
pub fn read_recordings(reader: impl Read, path: &Path, screen: Screen) -> Result<Vec<GazeRecording>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(parse_err(1, format!("header must be `{}`", HEADER.join(","))));
    }

    let mut order: Vec<(String, String)> = Vec::new();
    // Per recording: label and (source line, fixation) pairs.
    type Group = (Diagnosis, Vec<(u64, FixationPoint)>);
    let mut groups: HashMap<(String, String), Group> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("{} `{}` is not a number", HEADER[i], &row[i])))
        };
        let label: Diagnosis = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("label `{}` is not ASD or TD", &row[2])))?;
        let point = FixationPoint {
            onset_ms: num(3)?,
            x: num(4)?,
            y: num(5)?,
            duration_ms: num(6)?,
        };
        let key = (row[0].to_string(), row[1].to_string());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            (label, Vec::new())
        });
        if entry.0 != label {
            return Err(parse_err(
                line,
                format!("label {label} conflicts with earlier rows of {}_{}", key.0, key.1),
            ));
        }
        entry.1.push((line, point));
    }
    if order.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }

    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let (label, mut rows) = groups.remove(&key).expect("every ordered key has a group");
        rows.sort_by(|a, b| a.1.onset_ms.total_cmp(&b.1.onset_ms));
        let rec = GazeRecording {
            subject_id: key.0,
            stimulus_id: key.1,
            label,
            screen_width: screen.width,
            screen_height: screen.height,
            points: rows.iter().map(|(_, p)| *p).collect(),
        };
        if let Err(e) = rec.validate() {
            // Point at the first offending row where we can.
            let line = rows
                .iter()
                .find(|(_, p)| {
                    !(0.0..screen.width).contains(&p.x) || !(0.0..screen.height).contains(&p.y) || p.duration_ms <= 0.0
                })
                .map_or(0, |(l, _)| *l);
            return Err(match line {
                0 => Error::Core(e),
                l => parse_err(l, e.to_string()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn save_recordings(path: &Path, recordings: &[GazeRecording]) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    write_recordings(file, recordings).map_err(Error::io(path))
}

pub fn write_recordings(writer: impl Write, recordings: &[GazeRecording]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in recordings {
        for p in &r.points {
            w.write_record([
                r.subject_id.clone(),
                r.stimulus_id.clone(),
                r.label.to_string(),
                p.onset_ms.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.duration_ms.to_string(),
            ])?;
        }
    }
    w.flush()
}
