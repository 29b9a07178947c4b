//! Report documents written by the evaluation commands, and their plot
//! data as `x,y,series` CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use mu2x_core::eval::{BootstrapReport, ModalityReport, RobustReport, TrustReport};
use mu2x_core::{Label, Modality, ModalityTag, TokenAttribution};
use serde::Serialize;

use crate::error::DataError;
use crate::io::create;

pub fn label_name(l: Label) -> &'static str {
    match l {
        Label::Misinformation => "misinformation",
        Label::Fact => "fact",
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(std::io::Error::from)
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| DataError::io(path, e))
}

/// `report.json` → `report.csv`.
pub fn csv_path(json: &Path) -> PathBuf {
    json.with_extension("csv")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub x: String,
    pub y: f64,
    pub series: String,
}

impl PlotRow {
    pub fn new(x: impl ToString, y: f64, series: impl Into<String>) -> Self {
        PlotRow {
            x: x.to_string(),
            y,
            series: series.into(),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.into()
    }
}

pub fn write_csv<W: Write>(mut w: W, rows: &[PlotRow]) -> std::io::Result<()> {
    writeln!(w, "x,y,series")?;
    for r in rows {
        writeln!(w, "{},{},{}", csv_field(&r.x), r.y, csv_field(&r.series))?;
    }
    w.flush()
}

pub fn save_csv(path: &Path, rows: &[PlotRow]) -> Result<(), DataError> {
    write_csv(create(path)?, rows).map_err(|e| DataError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Entry {
    pub modality: Modality,
    pub n_test: usize,
    #[serde(flatten)]
    pub bootstrap: BootstrapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Report {
    pub seed: u64,
    pub entries: Vec<F1Entry>,
}

impl F1Report {
    pub fn plot(&self) -> Vec<PlotRow> {
        let mut rows = Vec::new();
        for e in &self.entries {
            let m = e.modality.as_str();
            rows.push(PlotRow::new(m, e.bootstrap.mean_f1, "mean_f1"));
            rows.push(PlotRow::new(m, e.bootstrap.ci_low, "ci_low"));
            rows.push(PlotRow::new(m, e.bootstrap.ci_high, "ci_high"));
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpretEntry {
    pub modality: Modality,
    pub n_explained: usize,
    pub distribution: ModalityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpretReport {
    pub seed: u64,
    pub entries: Vec<InterpretEntry>,
}

impl InterpretReport {
    /// Frequency of each modality per explanation-length bucket.
    pub fn plot(&self) -> Vec<PlotRow> {
        let mut rows = Vec::new();
        for e in &self.entries {
            for (bucket, counts) in e.distribution.buckets() {
                for tag in ModalityTag::ALL {
                    let series = format!("{}/{}", e.modality.as_str(), tag.as_str());
                    rows.push(PlotRow::new(bucket, counts.frequency(tag), series));
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustEntry {
    pub modality: Modality,
    pub report: TrustReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustSummary {
    pub seed: u64,
    pub entries: Vec<TrustEntry>,
}

impl TrustSummary {
    /// User-vs-oracle F1 against K, one series per modality plus its
    /// standard deviation.
    pub fn plot(&self) -> Vec<PlotRow> {
        let mut rows = Vec::new();
        for e in &self.entries {
            // K values with an undefined F1 in every round have no point
            for s in &e.report.summary {
                if let (Some(m), Some(sd)) = (s.mean_f1, s.std_f1) {
                    rows.push(PlotRow::new(s.k, m, e.modality.as_str()));
                    rows.push(PlotRow::new(s.k, sd, format!("{}_std", e.modality.as_str())));
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustSummary {
    pub modality: Modality,
    pub report: RobustReport,
}

impl RobustSummary {
    /// Mean noise percentage against p, plus one histogram series per p.
    pub fn plot(&self) -> Vec<PlotRow> {
        let mut rows = Vec::new();
        for s in &self.report.per_p {
            rows.push(PlotRow::new(s.p, s.mean_percentage, "mean_percentage"));
        }
        for s in &self.report.per_p {
            for b in &s.histogram {
                rows.push(PlotRow::new(b.noisy, b.count as f64, format!("histogram_p{}", s.p)));
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub id: String,
    pub label: &'static str,
    pub p_misinformation: f64,
    pub gold: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub dim: usize,
    pub name: String,
    pub modality: ModalityTag,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSide {
    pub k: usize,
    pub rho: f64,
    pub n_neighbors: usize,
    pub n_selected: usize,
    pub top: Vec<RankedFeature>,
}

/// A classification with its graph explanation and word importance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainReport {
    pub node: String,
    pub modality: Modality,
    pub label: &'static str,
    pub p_misinformation: f64,
    pub gold: Option<&'static str>,
    pub graph: GraphSide,
    pub text: Option<TokenAttribution>,
    /// Why `text` is missing, when it is.
    pub text_note: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_only_when_needed() {
        let mut buf = Vec::new();
        let rows = [PlotRow::new(0.5, 2.0, "a"), PlotRow::new("x,y", 0.25, "say \"hi\"")];
        write_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,series\n0.5,2,a\n\"x,y\",0.25,\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn csv_path_swaps_extension() {
        assert_eq!(csv_path(Path::new("out/r.json")), PathBuf::from("out/r.csv"));
        assert_eq!(csv_path(Path::new("r")), PathBuf::from("r.csv"));
    }
}
