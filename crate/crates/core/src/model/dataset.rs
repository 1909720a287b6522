use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EpochLabel {
    Normal,
    Fog,
}

impl EpochLabel {
    pub fn is_fog(self) -> bool {
        self == EpochLabel::Fog
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EpochLabel::Normal => "NORMAL",
            EpochLabel::Fog => "FOG",
        }
    }
}

impl fmt::Display for EpochLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EpochLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NORMAL" => Ok(EpochLabel::Normal),
            "FOG" => Ok(EpochLabel::Fog),
            other => Err(Error::Validation(format!("unknown epoch label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub subject_id: String,
    pub start_s: f64,
    pub features: Vec<Option<f64>>,
    pub label: EpochLabel,
}

impl Epoch {
    pub fn end_s(&self, window_s: f64) -> f64 {
        self.start_s + window_s
    }
}

/// Epoch feature vectors with labels, possibly spanning several subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDataset {
    pub feature_names: Vec<String>,
    pub window_s: f64,
    pub epochs: Vec<Epoch>,
}

impl EpochDataset {
    pub fn new(feature_names: Vec<String>, window_s: f64) -> Self {
        EpochDataset { feature_names, window_s, epochs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> Vec<EpochLabel> {
        self.epochs.iter().map(|e| e.label).collect()
    }

    /// Sorted, de-duplicated subject ids.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.epochs.iter().map(|e| e.subject_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn filter(&self, keep: impl Fn(&Epoch) -> bool) -> EpochDataset {
        EpochDataset {
            feature_names: self.feature_names.clone(),
            window_s: self.window_s,
            epochs: self.epochs.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn subject(&self, id: &str) -> EpochDataset {
        self.filter(|e| e.subject_id == id)
    }

    /// Appends epochs of another dataset with identical columns.
    pub fn extend(&mut self, other: EpochDataset) -> Result<()> {
        if other.feature_names != self.feature_names || other.window_s != self.window_s {
            return Err(Error::Shape {
                expected: self.feature_names.len(),
                got: other.feature_names.len(),
            });
        }
        self.epochs.extend(other.epochs);
        Ok(())
    }

    /// Defined values of one column, for selection and imputation.
    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.epochs.iter().map(|e| e.features[j]).collect()
    }

    /// CSV: `subject_id, start_s, label, <features...>`, `NA` for missing.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["subject_id".to_string(), "start_s".into(), "label".into()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for e in &self.epochs {
            let mut rec = vec![e.subject_id.clone(), format!("{:?}", e.start_s), e.label.to_string()];
            rec.extend(e.features.iter().map(|v| v.map_or("NA".to_string(), |v| format!("{v:?}"))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, window_s: f64) -> Result<Self> {
        let fmt_err = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "subject_id" || &header[1] != "start_s" || &header[2] != "label" {
            return Err(fmt_err("expected columns subject_id,start_s,label,...".into()));
        }
        let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut ds = EpochDataset::new(names, window_s);
        let parse = |s: &str| -> Result<f64> { s.parse().map_err(|_| fmt_err(format!("bad number {s:?}"))) };
        for rec in r.records() {
            let rec = rec?;
            let features = rec
                .iter()
                .skip(3)
                .map(|s| if s == "NA" { Ok(None) } else { parse(s).map(Some) })
                .collect::<Result<Vec<_>>>()?;
            ds.epochs.push(Epoch {
                subject_id: rec[0].to_string(),
                start_s: parse(&rec[1])?,
                label: rec[2].parse()?,
                features,
            });
        }
        Ok(ds)
    }
}

/// Median imputation fitted on training rows. Every column also gets a
/// missingness bit appended after the value columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub medians: Vec<f64>,
}

impl Imputer {
    pub fn fit(rows: &[&[Option<f64>]], n_cols: usize) -> Self {
        let medians = (0..n_cols)
            .map(|j| {
                let mut v: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
                if v.is_empty() {
                    0.0
                } else {
                    crate::features::median(&mut v)
                }
            })
            .collect();
        Imputer { medians }
    }

    pub fn transform(&self, row: &[Option<f64>]) -> Vec<f64> {
        let mut out: Vec<f64> = row.iter().zip(&self.medians).map(|(v, m)| v.unwrap_or(*m)).collect();
        out.extend(row.iter().map(|v| if v.is_some() { 0.0 } else { 1.0 }));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut ds = EpochDataset::new(vec!["a".into(), "b".into()], 2.56);
        ds.epochs.push(Epoch {
            subject_id: "s01".into(),
            start_s: 1.28,
            features: vec![Some(0.1 + 0.2), None],
            label: EpochLabel::Fog,
        });
        ds.epochs.push(Epoch {
            subject_id: "s02".into(),
            start_s: 0.0,
            features: vec![Some(-1e-300), Some(7.0)],
            label: EpochLabel::Normal,
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        ds.write_csv(&p).unwrap();
        assert_eq!(EpochDataset::read_csv(&p, 2.56).unwrap(), ds);
    }

    #[test]
    fn imputer_uses_medians_and_flags() {
        let rows: Vec<Vec<Option<f64>>> = vec![vec![Some(1.0), None], vec![Some(3.0), None], vec![Some(2.0), None]];
        let refs: Vec<&[Option<f64>]> = rows.iter().map(Vec::as_slice).collect();
        let imp = Imputer::fit(&refs, 2);
        assert_eq!(imp.medians, vec![2.0, 0.0]);
        assert_eq!(imp.transform(&[None, Some(5.0)]), vec![2.0, 5.0, 1.0, 0.0]);
    }
}
