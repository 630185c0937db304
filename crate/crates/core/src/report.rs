//! Baseline-versus-technique comparison tables and their narration.
//!
//! Metrics are held as fractions in `[0, 1]`; deltas are exact differences of
//! those fractions. Percentages and percentage points only appear at display
//! time, rounded half away from zero to one decimal.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write;

use crate::metrics::EvalReport;

/// Band, in percentage points, inside which a change reads as "almost the same".
pub const SAME_BAND_PP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum ReportError {
    ConfigMismatch { technique: String, model: String, reason: &'static str },
    DuplicateRun { technique: String, model: String },
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConfigMismatch { technique, model, reason } => {
                write!(f, "run {technique}/{model} was evaluated with a different {reason} than the baseline")
            }
            Self::DuplicateRun { technique, model } => {
                write!(f, "run {technique}/{model} appears more than once")
            }
        }
    }
}

impl core::error::Error for ReportError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Map,
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Map, Metric::Precision, Metric::Recall, Metric::F1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Map => "MAP",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "F1-score",
        }
    }

    pub fn of(self, report: &EvalReport) -> f64 {
        match self {
            Metric::Map => report.map,
            Metric::Precision => report.precision,
            Metric::Recall => report.recall,
            Metric::F1 => report.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Improved,
    Decreased,
    AlmostSame,
}

impl Direction {
    /// Classifies a delta given in fraction units.
    pub fn classify(delta: f64) -> Self {
        let pp = delta * 100.0;
        if libm::fabs(pp) < SAME_BAND_PP {
            Direction::AlmostSame
        } else if pp > 0.0 {
            Direction::Improved
        } else {
            Direction::Decreased
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Improved => "improved",
            Direction::Decreased => "decreased",
            Direction::AlmostSame => "almost the same",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueRun {
    pub technique: String,
    pub model: String,
    pub report: EvalReport,
}

impl TechniqueRun {
    pub fn new(technique: impl Into<String>, model: impl Into<String>, report: EvalReport) -> Self {
        Self { technique: technique.into(), model: model.into(), report }
    }

    pub fn metrics(&self) -> [f64; 4] {
        Metric::ALL.map(|m| m.of(&self.report))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub technique: String,
    pub model: String,
    /// mAP, precision, recall, F1 as fractions.
    pub values: [f64; 4],
    /// Exact differences from the baseline, in fraction units.
    pub deltas: [f64; 4],
}

impl ComparisonRow {
    pub fn delta_pp(&self, metric: Metric) -> f64 {
        self.deltas[metric as usize] * 100.0
    }

    pub fn direction(&self, metric: Metric) -> Direction {
        Direction::classify(self.deltas[metric as usize])
    }
}

/// Baseline first, then variants in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn baseline(&self) -> &ComparisonRow {
        &self.rows[0]
    }

    pub fn variants(&self) -> &[ComparisonRow] {
        &self.rows[1..]
    }
}

pub fn compare(baseline: &TechniqueRun, variants: &[TechniqueRun]) -> Result<ComparisonTable, ReportError> {
    let base = baseline.metrics();
    let mut rows = Vec::with_capacity(variants.len() + 1);
    rows.push(ComparisonRow {
        technique: baseline.technique.clone(),
        model: baseline.model.clone(),
        values: base,
        deltas: [0.0; 4],
    });
    for run in variants {
        check_config(baseline, run)?;
        if rows.iter().any(|r| r.technique == run.technique && r.model == run.model) {
            return Err(ReportError::DuplicateRun { technique: run.technique.clone(), model: run.model.clone() });
        }
        let values = run.metrics();
        let mut deltas = [0.0; 4];
        for i in 0..4 {
            deltas[i] = values[i] - base[i];
        }
        rows.push(ComparisonRow { technique: run.technique.clone(), model: run.model.clone(), values, deltas });
    }
    Ok(ComparisonTable { rows })
}

fn check_config(baseline: &TechniqueRun, run: &TechniqueRun) -> Result<(), ReportError> {
    let (a, b) = (&baseline.report, &run.report);
    let reason = if a.config.iou_threshold != b.config.iou_threshold {
        Some("IoU threshold")
    } else if a.config.confidence_threshold != b.config.confidence_threshold {
        Some("confidence threshold")
    } else if a.config.averaging != b.config.averaging {
        Some("averaging mode")
    } else if a.config.interpolation != b.config.interpolation {
        Some("AP interpolation")
    } else if a.classes != b.classes {
        Some("class set")
    } else {
        None
    };
    match reason {
        Some(reason) => {
            Err(ReportError::ConfigMismatch { technique: run.technique.clone(), model: run.model.clone(), reason })
        }
        None => Ok(()),
    }
}

/// `value` (a fraction) as a percentage rounded half away from zero to one
/// decimal.
pub fn percent_1dp(value: f64) -> f64 {
    libm::round(value * 1000.0) / 10.0
}

fn fmt_pct(value: f64) -> String {
    format!("{:.1}", percent_1dp(value))
}

fn fmt_delta(delta: f64) -> String {
    let pp = percent_1dp(delta);
    if pp > 0.0 {
        format!("+{pp:.1}")
    } else if pp < 0.0 {
        format!("{pp:.1}")
    } else {
        String::from("0.0")
    }
}

/// Markdown with the Technique/Model/MAP/Precision/Recall/F1-Score layout,
/// followed by a delta table in percentage points.
pub fn render_markdown(table: &ComparisonTable) -> String {
    render_markdown_grouped(core::slice::from_ref(table))
}

/// One table per model rendered together: rows are grouped by technique, in
/// order of first appearance, then by model in the order of `tables`. Each
/// delta is against the baseline of its own table.
pub fn render_markdown_grouped(tables: &[ComparisonTable]) -> String {
    let mut techniques: Vec<&str> = Vec::new();
    for row in tables.iter().flat_map(|t| &t.rows) {
        if !techniques.contains(&row.technique.as_str()) {
            techniques.push(&row.technique);
        }
    }
    let rows: Vec<&ComparisonRow> = techniques
        .iter()
        .flat_map(|&t| tables.iter().flat_map(move |table| table.rows.iter().filter(move |r| r.technique == t)))
        .collect();

    let mut out = String::new();
    out.push_str("| Technique | Model | MAP | Precision | Recall | F1-Score |\n");
    out.push_str("|---|---|---:|---:|---:|---:|\n");
    for row in &rows {
        let _ = writeln!(
            out,
            "| {} | {} | {}% | {}% | {}% | {} |",
            row.technique,
            row.model,
            fmt_pct(row.values[0]),
            fmt_pct(row.values[1]),
            fmt_pct(row.values[2]),
            fmt_pct(row.values[3]),
        );
    }
    out.push('\n');
    match tables {
        [] => return out,
        [only] => {
            let base = only.baseline();
            let _ = writeln!(out, "Change vs {} / {} (percentage points):", base.technique, base.model);
        }
        [first, ..] => {
            let _ = writeln!(out, "Change vs {} of the same model (percentage points):", first.baseline().technique);
        }
    }
    out.push('\n');
    out.push_str("| Technique | Model | ΔMAP | ΔPrecision | ΔRecall | ΔF1-Score |\n");
    out.push_str("|---|---|---:|---:|---:|---:|\n");
    for row in &rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            row.technique,
            row.model,
            fmt_delta(row.deltas[0]),
            fmt_delta(row.deltas[1]),
            fmt_delta(row.deltas[2]),
            fmt_delta(row.deltas[3]),
        );
    }
    out
}

/// One sentence per variant naming which metrics improved, decreased or
/// stayed almost the same.
pub fn narrate(table: &ComparisonTable) -> String {
    let mut out = String::new();
    for row in table.variants() {
        out.push_str(&narrate_row(row, table.baseline()));
        out.push('\n');
    }
    out
}

pub fn narrate_row(row: &ComparisonRow, baseline: &ComparisonRow) -> String {
    let mut clauses: Vec<String> = Vec::new();
    for (direction, verb) in [
        (Direction::Improved, "improved"),
        (Direction::Decreased, "decreased"),
        (Direction::AlmostSame, "stayed almost the same"),
    ] {
        let names: Vec<&str> =
            Metric::ALL.iter().filter(|&&m| row.direction(m) == direction).map(|m| m.name()).collect();
        if !names.is_empty() {
            clauses.push(format!("{} {verb}", join_and(&names)));
        }
    }
    format!("{} ({}) vs {}: {}.", row.technique, row.model, baseline.technique, clauses.join("; "))
}

fn join_and(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => String::from(*one),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}
