//! On-disk recording format.
//!
//! A recording is a CSV file plus a JSON sidecar. The CSV's first column is
//! `time_s`, followed by one column per channel in sidecar order. Channels
//! may have different rates: row `i` holds sample `i` of every channel that
//! has one, cells past a channel's last sample are empty, and `time_s` is
//! `i / max_rate`. Samples are written in shortest round-trip form, so a
//! write/read cycle is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotation::AnnotationTrack;
use super::recording::{Channel, ChannelKind, Recording};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub label: String,
    #[serde(flatten)]
    pub kind: ChannelKind,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub subject_id: String,
    pub duration_s: f64,
    pub channels: Vec<ChannelMeta>,
}

impl Sidecar {
    pub fn of(rec: &Recording) -> Self {
        Sidecar {
            subject_id: rec.subject_id.clone(),
            duration_s: rec.duration_s,
            channels: rec
                .channels
                .iter()
                .map(|c| ChannelMeta {
                    label: c.label.clone(),
                    kind: c.kind.clone(),
                    rate_hz: c.rate_hz,
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Paths of the CSV and sidecar for `subject_id` inside `dir`.
pub fn recording_paths(dir: &Path, subject_id: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{subject_id}.csv")),
        dir.join(format!("{subject_id}.json")),
    )
}

pub fn annotation_path(dir: &Path, subject_id: &str) -> PathBuf {
    dir.join(format!("{subject_id}.annotations.json"))
}

pub fn write_recording(dir: &Path, rec: &Recording) -> Result<()> {
    let (csv_path, json_path) = recording_paths(dir, &rec.subject_id);
    write_json(&json_path, &Sidecar::of(rec))?;

    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = BufWriter::new(file);
    let header: Vec<&str> = std::iter::once("time_s")
        .chain(rec.channels.iter().map(|c| c.label.as_str()))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(&csv_path, e))?;

    let max_rate = rec
        .channels
        .iter()
        .map(|c| c.rate_hz)
        .fold(0.0f64, f64::max);
    let rows = rec.channels.iter().map(|c| c.samples.len()).max().unwrap_or(0);
    let mut line = String::new();
    for i in 0..rows {
        line.clear();
        line.push_str(&format!("{:?}", i as f64 / max_rate));
        for ch in &rec.channels {
            line.push(',');
            if let Some(v) = ch.samples.get(i) {
                line.push_str(&format!("{v:?}"));
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))
}

pub fn load_recording(csv_path: &Path, sidecar: &Sidecar) -> Result<Recording> {
    let format_err = |reason: String| Error::Format {
        path: csv_path.to_path_buf(),
        reason,
    };
    for meta in &sidecar.channels {
        if !(meta.rate_hz.is_finite() && meta.rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "channel `{}` declares invalid rate {} Hz",
                meta.label, meta.rate_hz
            )));
        }
    }

    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("time_s")
        .chain(sidecar.channels.iter().map(|c| c.label.as_str()))
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format_err(format!(
            "malformed header: expected [{}], found [{}]",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); sidecar.channels.len()];
    let mut ended = vec![false; sidecar.channels.len()];
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while reader.read_record(&mut record)? {
        for (c, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                ended[c] = true;
                continue;
            }
            if ended[c] {
                return Err(format_err(format!(
                    "channel `{}` has a value at row {row} after its last sample",
                    sidecar.channels[c].label
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                format_err(format!(
                    "unparseable value `{cell}` in channel `{}` at row {row}",
                    sidecar.channels[c].label
                ))
            })?;
            samples[c].push(v);
        }
        row += 1;
    }

    let channels = sidecar
        .channels
        .iter()
        .zip(samples)
        .map(|(meta, s)| Channel::new(meta.label.clone(), meta.kind.clone(), meta.rate_hz, s))
        .collect::<Result<Vec<_>>>()?;
    Recording::new(sidecar.subject_id.clone(), channels, sidecar.duration_s)
}

/// Reads the sidecar next to `csv_path` (same stem, `.json`) and loads the CSV.
pub fn load_recording_pair(dir: &Path, subject_id: &str) -> Result<Recording> {
    let (csv_path, json_path) = recording_paths(dir, subject_id);
    let sidecar = Sidecar::read(&json_path)?;
    load_recording(&csv_path, &sidecar)
}

pub fn write_annotations(path: &Path, tracks: &[AnnotationTrack]) -> Result<()> {
    write_json(path, &tracks)
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationTrack>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let tracks: Vec<AnnotationTrack> =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    for t in &tracks {
        t.validate()?;
    }
    Ok(tracks)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalio::recording::{Axis, EogAxis, Placement};

    fn sample_recording() -> Recording {
        let eog = Channel::new(
            "EOG_H",
            ChannelKind::Eog {
                axis: EogAxis::Horizontal,
            },
            500.0,
            (0..1000).map(|i| (i as f64 * 0.013).sin() * 1e-4).collect(),
        )
        .unwrap();
        let acc = Channel::new(
            "ACC_LK_X",
            ChannelKind::Accel {
                placement: Placement::LeftKnee,
                axis: Axis::X,
            },
            512.0,
            (0..1024).map(|i| 1.0 / (i as f64 + 3.0)).collect(),
        )
        .unwrap();
        Recording::new("S01", vec![eog, acc], 2.0).unwrap()
    }

    #[test]
    fn multirate_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let rec = sample_recording();
        write_recording(dir.path(), &rec).unwrap();
        let back = load_recording_pair(dir.path(), "S01").unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn sidecar_kind_is_flattened() {
        let rec = sample_recording();
        let json = serde_json::to_value(Sidecar::of(&rec)).unwrap();
        let ch = &json["channels"][1];
        assert_eq!(ch["kind"], "accel");
        assert_eq!(ch["placement"], "left_knee");
        assert_eq!(ch["axis"], "x");
        assert_eq!(ch["rate_hz"], 512.0);
    }

    #[test]
    fn malformed_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let rec = sample_recording();
        write_recording(dir.path(), &rec).unwrap();
        let (csv_path, _) = recording_paths(dir.path(), "S01");
        let text = std::fs::read_to_string(&csv_path).unwrap();
        std::fs::write(&csv_path, text.replacen("ACC_LK_X", "ACC_RK_X", 1)).unwrap();
        let err = load_recording_pair(dir.path(), "S01").unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }

    #[test]
    fn nan_cell_is_validation_error_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let rec = sample_recording();
        write_recording(dir.path(), &rec).unwrap();
        let (csv_path, _) = recording_paths(dir.path(), "S01");
        let mut lines: Vec<String> = std::fs::read_to_string(&csv_path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        // Row index 5 is line 6 (after header).
        let mut cells: Vec<String> = lines[6].split(',').map(String::from).collect();
        cells[1] = "NaN".into();
        lines[6] = cells.join(",");
        std::fs::write(&csv_path, lines.join("\n") + "\n").unwrap();
        match load_recording_pair(dir.path(), "S01").unwrap_err() {
            Error::NonFiniteSample { channel, index } => {
                assert_eq!(channel, "EOG_H");
                assert_eq!(index, 5);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_rate_in_sidecar_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rec = sample_recording();
        write_recording(dir.path(), &rec).unwrap();
        let (csv_path, json_path) = recording_paths(dir.path(), "S01");
        let mut sc = Sidecar::read(&json_path).unwrap();
        sc.channels[0].rate_hz = 0.0;
        assert!(matches!(
            load_recording(&csv_path, &sc).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn annotations_round_trip() {
        use crate::signalio::annotation::Episode;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        let tracks = vec![AnnotationTrack::new(
            "r1",
            vec![Episode::fog(1.25, 3.5), Episode::other_stop(10.0, 11.0)],
        )
        .unwrap()];
        write_annotations(&path, &tracks).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"OTHER_STOP\""));
        assert_eq!(read_annotations(&path).unwrap(), tracks);
    }
}
