use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub keyword: String,
    pub perceptual_candidate: f64,
    pub perceptual_baseline: f64,
    pub similarity_candidate: f64,
    pub similarity_baseline: f64,
}

impl ReportRow {
    pub fn new(keyword: impl Into<String>, values: [f64; 4]) -> Self {
        Self {
            keyword: keyword.into(),
            perceptual_candidate: values[0],
            perceptual_baseline: values[1],
            similarity_candidate: values[2],
            similarity_baseline: values[3],
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [
            self.perceptual_candidate,
            self.perceptual_baseline,
            self.similarity_candidate,
            self.similarity_baseline,
        ]
    }

    /// Lower perceptual loss and higher similarity for the candidate.
    pub fn candidate_wins_both(&self) -> bool {
        self.perceptual_candidate < self.perceptual_baseline && self.similarity_candidate > self.similarity_baseline
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub num_generated: usize,
    pub seed: u64,
    pub steps: usize,
    pub guidance: f64,
    pub candidate_digest: String,
    pub baseline_digest: String,
    pub embedder: String,
    pub extractor: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub config: ReportConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Self::Text),
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?} (text, markdown, csv)")),
        }
    }
}

/// Up to two decimals, trailing zeros trimmed but at least one decimal kept.
pub fn format_metric(v: f64) -> String {
    let mut s = format!("{v:.2}");
    if s.ends_with('0') {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}

const HEADERS: [&str; 5] = [
    "Keyword",
    "Perceptual loss (candidate)",
    "Perceptual loss (baseline)",
    "Similarity (candidate)",
    "Similarity (baseline)",
];

const CSV_HEADERS: [&str; 5] = [
    "keyword",
    "perceptual_candidate",
    "perceptual_baseline",
    "similarity_candidate",
    "similarity_baseline",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl EvalReport {
    pub fn validate(&self) -> Result<(), EvalError> {
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            if !seen.insert(&r.keyword) {
                return Err(EvalError::InvalidReport(format!("duplicate keyword {:?}", r.keyword)));
            }
            if r.values().iter().any(|v| !v.is_finite()) {
                return Err(EvalError::InvalidReport(format!("non-finite value in row {:?}", r.keyword)));
            }
            if !(-100.0..=100.0).contains(&r.similarity_candidate) || !(-100.0..=100.0).contains(&r.similarity_baseline) {
                return Err(EvalError::InvalidReport(format!("similarity out of range in row {:?}", r.keyword)));
            }
            if r.perceptual_candidate < 0.0 || r.perceptual_baseline < 0.0 {
                return Err(EvalError::InvalidReport(format!("negative perceptual loss in row {:?}", r.keyword)));
            }
        }
        Ok(())
    }

    pub fn wins(&self) -> usize {
        self.rows.iter().filter(|r| r.candidate_wins_both()).count()
    }

    /// JSON lines: a config header, then one line per row.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&serde_json::json!({ "config": self.config })).expect("config");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("row"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EvalError> {
        #[derive(Deserialize)]
        struct Header {
            config: ReportConfig,
        }
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Header = serde_json::from_str(lines.next().ok_or_else(|| EvalError::Malformed("empty report".into()))?)?;
        let rows = lines.map(serde_json::from_str).collect::<Result<Vec<ReportRow>, _>>()?;
        Ok(Self {
            rows,
            config: header.config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Renders the four metric columns (perceptual candidate, perceptual
/// baseline, similarity candidate, similarity baseline) per keyword.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Text => {
            out.push_str(&HEADERS.join(" | "));
            out.push('\n');
            for r in &report.rows {
                let cells: Vec<String> = r.values().iter().map(|&v| format_metric(v)).collect();
                writeln!(out, "{} | {}", r.keyword, cells.join(" | ")).expect("string write");
            }
        }
        ReportFormat::Markdown => {
            writeln!(out, "| {} |", HEADERS.join(" | ")).expect("string write");
            out.push_str("|---|---:|---:|---:|---:|\n");
            for r in &report.rows {
                let cells: Vec<String> = r.values().iter().map(|&v| format_metric(v)).collect();
                writeln!(out, "| {} | {} |", r.keyword.replace('|', "\\|"), cells.join(" | ")).expect("string write");
            }
        }
        ReportFormat::Csv => {
            out.push_str(&CSV_HEADERS.join(","));
            out.push('\n');
            for r in &report.rows {
                let cells: Vec<String> = r.values().iter().map(|&v| format_metric(v)).collect();
                writeln!(out, "{},{}", csv_field(&r.keyword), cells.join(",")).expect("string write");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn published() -> EvalReport {
        let rows = [
            ("Calico Pattern", [30.13, 71.08, 65.31, 57.0]),
            ("Traditional Japanese Patterns", [67.042, 175.88, 82.75, 72.0]),
            ("Aboriginal Patterns", [165.04, 189.88, 86.25, 75.37]),
            ("Oriental Patterns", [49.70, 115.76, 78.0, 73.87]),
        ];
        EvalReport {
            rows: rows.iter().map(|(k, v)| ReportRow::new(*k, *v)).collect(),
            config: ReportConfig::default(),
        }
    }

    #[test]
    fn text_rows_match_the_published_table() {
        let text = render_report(&published(), ReportFormat::Text);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "Calico Pattern | 30.13 | 71.08 | 65.31 | 57.0");
        assert_eq!(lines[2], "Traditional Japanese Patterns | 67.04 | 175.88 | 82.75 | 72.0");
        assert_eq!(lines[3], "Aboriginal Patterns | 165.04 | 189.88 | 86.25 | 75.37");
        assert_eq!(lines[4], "Oriental Patterns | 49.7 | 115.76 | 78.0 | 73.87");
    }

    #[test]
    fn empty_report_is_headers_only() {
        let e = EvalReport::default();
        assert_eq!(render_report(&e, ReportFormat::Text).lines().count(), 1);
        assert_eq!(render_report(&e, ReportFormat::Markdown).lines().count(), 2);
        assert_eq!(render_report(&e, ReportFormat::Csv).lines().count(), 1);
    }

    #[test]
    fn markdown_and_csv() {
        let md = render_report(&published(), ReportFormat::Markdown);
        assert!(md.contains("| Calico Pattern | 30.13 | 71.08 | 65.31 | 57.0 |"));
        let csv = render_report(&published(), ReportFormat::Csv);
        assert!(csv.lines().nth(1).unwrap() == "Calico Pattern,30.13,71.08,65.31,57.0");
        let r = EvalReport {
            rows: vec![ReportRow::new("a, \"b\"", [1.0; 4])],
            ..Default::default()
        };
        assert!(render_report(&r, ReportFormat::Csv).contains("\"a, \"\"b\"\"\",1.0"));
    }

    #[test]
    fn metric_formatting() {
        assert_eq!(format_metric(57.0), "57.0");
        assert_eq!(format_metric(78.0), "78.0");
        assert_eq!(format_metric(0.001), "0.0");
        assert_eq!(format_metric(-0.001), "0.0");
        assert_eq!(format_metric(12.345678), "12.35");
        assert_eq!(format_metric(-3.5), "-3.5");
    }

    #[test]
    fn jsonl_round_trip() {
        let r = published();
        assert_eq!(EvalReport::from_jsonl(&r.to_jsonl()).unwrap(), r);
    }

    #[test]
    fn validation() {
        published().validate().unwrap();
        let mut bad = published();
        bad.rows[1].keyword = bad.rows[0].keyword.clone();
        assert!(bad.validate().is_err());
        let mut bad = published();
        bad.rows[0].similarity_baseline = 101.0;
        assert!(bad.validate().is_err());
        assert_eq!(published().wins(), 4);
    }
}
