use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::experiments::{BarrierResult, FlatnessResult, GradientBoundResult, RescaleTable};
use crate::io::config::RunConfig;
use crate::oracles::{InequalityReport, ResidualReport};
use crate::{Error, Result};

pub const NO_CHECKS_MARKER: &str = "no checks enabled";

/// Pass/fail outcome that is neither a residual nor an inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CheckEntry {
    Residual(ResidualReport),
    Inequality(InequalityReport),
    Flag(FlagReport),
}

impl CheckEntry {
    pub fn name(&self) -> &str {
        match self {
            Self::Residual(r) => &r.name,
            Self::Inequality(r) => &r.name,
            Self::Flag(r) => &r.name,
        }
    }

    pub fn pass(&self) -> bool {
        match self {
            Self::Residual(r) => r.pass,
            Self::Inequality(r) => r.pass,
            Self::Flag(r) => r.pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum ExperimentOutput {
    Barrier(BarrierResult),
    Gradient(GradientBoundResult),
    Flatness(FlatnessResult),
    Rescale {
        flatness: FlatnessResult,
        table: RescaleTable,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub checks: Vec<CheckEntry>,
    pub experiment: Option<ExperimentOutput>,
    pub wall_clock_seconds: f64,
    pub steps: usize,
    /// Notes such as the boundary-condition stand-in used for far-field runs.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            checks: Vec::new(),
            experiment: None,
            wall_clock_seconds: 0.0,
            steps: 0,
            notes: Vec::new(),
        }
    }

    /// Adds a check; a second check with the same name is rejected.
    pub fn push(&mut self, entry: CheckEntry) -> Result<()> {
        if self.checks.iter().any(|c| c.name() == entry.name()) {
            return Err(Error::Validation(format!("check `{}` reported twice", entry.name())));
        }
        self.checks.push(entry);
        Ok(())
    }

    pub fn residual(&mut self, r: ResidualReport) -> Result<()> {
        self.push(CheckEntry::Residual(r))
    }

    pub fn inequality(&mut self, r: InequalityReport) -> Result<()> {
        self.push(CheckEntry::Inequality(r))
    }

    pub fn flag(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> Result<()> {
        self.push(CheckEntry::Flag(FlagReport {
            name: name.into(),
            pass,
            detail: detail.into(),
        }))
    }

    pub fn summary(&self) -> Summary {
        let passed = self.checks.iter().filter(|c| c.pass()).count();
        Summary {
            checks: self.checks.len(),
            passed,
            failed: self.checks.len() - passed,
            all_pass: passed == self.checks.len(),
            note: self.checks.is_empty().then(|| NO_CHECKS_MARKER.to_string()),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary().all_pass
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a Report,
    summary: Summary,
}

pub fn report_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(&ReportFile {
        report,
        summary: report.summary(),
    })
    .map_err(|e| Error::Io(e.to_string()))
}

fn series_csv(s: &[f64], values: &[f64]) -> String {
    let mut out = String::from("s,value\n");
    for (a, b) in s.iter().zip(values) {
        writeln!(out, "{a},{b}").unwrap();
    }
    out
}

/// CSV files for the experiment tables, as `(file name, contents)`.
pub fn experiment_csvs(output: &ExperimentOutput) -> Vec<(String, String)> {
    let mut files = Vec::new();
    match output {
        ExperimentOutput::Barrier(b) => {
            let mut csv = String::from("s,w0,bound_3s\n");
            for ((s, w), u) in b.s.iter().zip(&b.w0).zip(&b.bound) {
                writeln!(csv, "{s},{w},{u}").unwrap();
            }
            files.push(("barrier.csv".into(), csv));
            let (s, v): (Vec<f64>, Vec<f64>) = b.translation.iter().map(|t| (t.s, t.slack)).unzip();
            files.push(("barrier_translation_slack.csv".into(), series_csv(&s, &v)));
        }
        ExperimentOutput::Gradient(g) => {
            let (s, v): (Vec<f64>, Vec<f64>) = g
                .s
                .iter()
                .zip(&g.sup_v)
                .filter_map(|(s, v)| v.map(|v| (*s, v)))
                .unzip();
            files.push(("gradient_sup_v.csv".into(), series_csv(&s, &v)));
        }
        ExperimentOutput::Flatness(f) => files.extend(flatness_csvs(f)),
        ExperimentOutput::Rescale { flatness, table } => {
            files.extend(flatness_csvs(flatness));
            files.push(("convergence.csv".into(), table_csv(table)));
        }
    }
    files
}

fn flatness_csvs(f: &FlatnessResult) -> Vec<(String, String)> {
    vec![
        ("flatness_sup_v_minus_one.csv".into(), series_csv(&f.s, &f.sup_v_minus_one)),
        ("flatness_sup_deviation.csv".into(), series_csv(&f.s, &f.sup_deviation)),
    ]
}

pub fn table_csv(table: &RescaleTable) -> String {
    let mut csv = String::from("lambda,sup_u_err,sup_v_err\n");
    for r in &table.rows {
        writeln!(csv, "{},{},{}", r.lambda, r.sup_u_err, r.sup_v_err).unwrap();
    }
    csv
}

/// Writes `report.json` and the experiment CSVs into `dir`; returns the paths written.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    std::fs::write(&path, report_json(report)?)?;
    written.push(path);
    if let Some(out) = &report.experiment {
        for (name, contents) in experiment_csvs(out) {
            let path = dir.join(name);
            std::fs::write(&path, contents)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::RescaleRow;
    use crate::io::config::parse_config;

    fn config() -> RunConfig {
        parse_config("kind = \"verify\"\n[grid]\nmode = \"radial\"\nextent = 1.0\nresolution = 9\n").unwrap()
    }

    #[test]
    fn empty_report_carries_marker() {
        let r = Report::new(config());
        let json = report_json(&r).unwrap();
        assert!(json.contains(NO_CHECKS_MARKER));
        assert!(r.all_pass());
    }

    #[test]
    fn duplicate_checks_are_rejected() {
        let mut r = Report::new(config());
        r.flag("a", true, "").unwrap();
        assert!(r.flag("a", false, "").is_err());
        r.flag("b", false, "broken").unwrap();
        let s = r.summary();
        assert_eq!((s.checks, s.passed, s.failed, s.all_pass), (2, 1, 1, false));
        assert!(s.note.is_none());
    }

    #[test]
    fn convergence_csv_has_one_row_per_lambda() {
        let table = RescaleTable {
            rho: 1.0,
            rows: (1..=3)
                .map(|k| RescaleRow {
                    lambda: k as f64,
                    sup_u_err: 1.0 / k as f64,
                    sup_v_err: 0.5 / k as f64,
                    points: 10,
                })
                .collect(),
            decreasing: true,
        };
        let csv = table_csv(&table);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,sup_u_err,sup_v_err");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn emit_writes_report_file() {
        let dir = tempfile::tempdir().unwrap();
        let r = Report::new(config());
        let paths = emit_report(&r, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(!text.is_empty());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["summary"]["note"], NO_CHECKS_MARKER);
        assert_eq!(v["config"]["kind"], "verify");
    }
}
