//! `manifest.csv`: the index of an image directory, carrying the labels and
//! ids that image files alone do not.

use std::fs::File;
use std::path::{Path, PathBuf};

use gaze2class_core::gaze::{Diagnosis, GazeRecording, LabeledDataset, Sample};
use gaze2class_core::GrayImage;

use crate::error::{Error, Result};
use crate::imageio;

pub const FILE_NAME: &str = "manifest.csv";
pub const HEADER: [&str; 5] = ["sample_id", "subject_id", "stimulus_id", "label", "file"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub subject_id: String,
    pub stimulus_id: String,
    pub label: Diagnosis,
    /// Raw (`.gzimg`) image file, relative to the manifest's directory.
    pub file: String,
}

impl ManifestEntry {
    pub fn for_recording(rec: &GazeRecording, file: String) -> Self {
        Self {
            sample_id: rec.sample_id(),
            subject_id: rec.subject_id.clone(),
            stimulus_id: rec.stimulus_id.clone(),
            label: rec.label,
            file,
        }
    }
}

pub fn path_in(dir: &Path) -> PathBuf {
    dir.join(FILE_NAME)
}

pub fn write(dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let path = path_in(dir);
    let to_err = |e: csv::Error| Error::format(&path, e.to_string());
    let mut w = csv::Writer::from_path(&path).map_err(to_err)?;
    w.write_record(HEADER).map_err(to_err)?;
    for e in entries {
        w.write_record([
            e.sample_id.as_str(),
            &e.subject_id,
            &e.stimulus_id,
            e.label.as_str(),
            &e.file,
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(Error::io(&path))
}

pub fn read(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = path_in(dir);
    let file = File::open(&path).map_err(Error::io(&path))?;
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(parse_err(1, format!("header must be `{}`", HEADER.join(","))));
    }
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record[3]
            .parse()
            .map_err(|_| parse_err(line, format!("label must be ASD or TD, got `{}`", &record[3])))?;
        entries.push(ManifestEntry {
            sample_id: record[0].to_string(),
            subject_id: record[1].to_string(),
            stimulus_id: record[2].to_string(),
            label,
            file: record[4].to_string(),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyFile { path });
    }
    Ok(entries)
}

/// Every entry of `dir`'s manifest with its raw image loaded.
pub fn load_images(dir: &Path) -> Result<Vec<(ManifestEntry, GrayImage)>> {
    read(dir)?
        .into_iter()
        .map(|e| {
            let img = imageio::read_gzimg(&dir.join(&e.file))?;
            Ok((e, img))
        })
        .collect()
}

/// A dataset from manifest entries, with `prepare` applied to every image.
pub fn dataset(
    items: &[(ManifestEntry, GrayImage)],
    prepare: impl Fn(&GrayImage) -> gaze2class_core::Result<GrayImage>,
) -> Result<LabeledDataset> {
    let samples = items
        .iter()
        .map(|(e, img)| {
            Ok(Sample {
                sample_id: e.sample_id.clone(),
                subject_id: e.subject_id.clone(),
                label: e.label,
                image: prepare(img)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset::new(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            ManifestEntry {
                sample_id: "A_s".into(),
                subject_id: "A".into(),
                stimulus_id: "s".into(),
                label: Diagnosis::Asd,
                file: "A_s.heatmap.gzimg".into(),
            },
            ManifestEntry {
                sample_id: "B,1_s".into(),
                subject_id: "B,1".into(),
                stimulus_id: "s".into(),
                label: Diagnosis::Td,
                file: "B,1_s.heatmap.gzimg".into(),
            },
        ];
        write(dir.path(), &entries).unwrap();
        assert_eq!(read(dir.path()).unwrap(), entries);
    }

    #[test]
    fn missing_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read(dir.path()), Err(Error::Io { .. })));
        write(dir.path(), &[]).unwrap();
        assert!(matches!(read(dir.path()), Err(Error::EmptyFile { .. })));
    }
}
