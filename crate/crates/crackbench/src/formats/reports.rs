//! Evaluation reports (JSON document plus a flat CSV row) and comparison
//! tables (CSV and plot data).

use crackbench_core::metrics::{Averaging, Interpolation};
use crackbench_core::report::{percent_1dp, ComparisonRow, ComparisonTable, Metric};
use crackbench_core::EvalReport;
use serde::{Deserialize, Serialize};

use super::FormatError;

pub const REPORT_SUFFIX: &str = ".report.json";

pub fn write_report_json(report: &EvalReport) -> Result<String, FormatError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn read_report_json(text: &str) -> Result<EvalReport, FormatError> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub technique: String,
    pub model: String,
    pub split: String,
    pub images: usize,
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
    pub averaging: String,
    pub interpolation: String,
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ReportRow {
    pub fn new(technique: &str, model: &str, r: &EvalReport) -> Self {
        Self {
            technique: technique.into(),
            model: model.into(),
            split: r.split.to_string(),
            images: r.images,
            iou_threshold: r.config.iou_threshold,
            confidence_threshold: r.config.confidence_threshold,
            averaging: match r.config.averaging {
                Averaging::Macro => "macro",
                Averaging::Micro => "micro",
            }
            .into(),
            interpolation: match r.config.interpolation {
                Interpolation::AllPoint => "all-point",
                Interpolation::Point101 => "point101",
            }
            .into(),
            map: r.map,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            macro_precision: r.macro_avg.precision,
            macro_recall: r.macro_avg.recall,
            macro_f1: r.macro_avg.f1,
            micro_precision: r.micro.precision,
            micro_recall: r.micro.recall,
            micro_f1: r.micro.f1,
            tp: r.counts.tp,
            fp: r.counts.fp,
            fn_: r.counts.fn_,
        }
    }
}

pub fn write_report_csv(rows: &[ReportRow]) -> Result<String, FormatError> {
    write_rows(rows)
}

/// Splits `<technique>_<model>.report.json` at the last underscore.
pub fn run_name(file_name: &str) -> Option<(&str, &str)> {
    let stem = file_name.strip_suffix(REPORT_SUFFIX)?;
    let (technique, model) = stem.rsplit_once('_')?;
    (!technique.is_empty() && !model.is_empty()).then_some((technique, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ComparisonCsvRow {
    technique: String,
    model: String,
    map: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    delta_map: f64,
    delta_precision: f64,
    delta_recall: f64,
    delta_f1: f64,
}

/// Full-precision values and deltas; [`read_comparison_csv`] recovers them
/// bit for bit.
pub fn write_comparison_csv(tables: &[ComparisonTable]) -> Result<String, FormatError> {
    let rows: Vec<ComparisonCsvRow> = tables
        .iter()
        .flat_map(|t| &t.rows)
        .map(|r| ComparisonCsvRow {
            technique: r.technique.clone(),
            model: r.model.clone(),
            map: r.values[0],
            precision: r.values[1],
            recall: r.values[2],
            f1: r.values[3],
            delta_map: r.deltas[0],
            delta_precision: r.deltas[1],
            delta_recall: r.deltas[2],
            delta_f1: r.deltas[3],
        })
        .collect();
    write_rows(&rows)
}

pub fn read_comparison_csv(text: &str) -> Result<Vec<ComparisonRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize::<ComparisonCsvRow>()
        .map(|row| {
            let row = row?;
            Ok(ComparisonRow {
                technique: row.technique,
                model: row.model,
                values: [row.map, row.precision, row.recall, row.f1],
                deltas: [row.delta_map, row.delta_precision, row.delta_recall, row.delta_f1],
            })
        })
        .collect()
}

#[derive(Serialize)]
struct PlotRow<'a> {
    technique: &'a str,
    model: &'a str,
    metric: &'a str,
    percent: f64,
    delta_pp: f64,
}

/// Long-format rows for external plotting, values in percent rounded to one
/// decimal.
pub fn write_plot_csv(tables: &[ComparisonTable]) -> Result<String, FormatError> {
    let mut rows = Vec::new();
    for r in tables.iter().flat_map(|t| &t.rows) {
        for (i, m) in Metric::ALL.iter().enumerate() {
            rows.push(PlotRow {
                technique: &r.technique,
                model: &r.model,
                metric: m.name(),
                percent: percent_1dp(r.values[i]),
                delta_pp: percent_1dp(r.deltas[i]),
            });
        }
    }
    write_rows(&rows)
}

fn write_rows<T: Serialize>(rows: &[T]) -> Result<String, FormatError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
