//! Report serialization.
//!
//! JSON is the whole report. CSV has two `#` comment lines (config, then
//! criteria, each as JSON) followed by one row per cell.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Cell, Criterion, ExperimentConfig, ExperimentReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidInput(format!("unknown report format {other:?}"))),
        }
    }

    /// From a file extension, defaulting to JSON.
    pub fn from_path(path: &str) -> Self {
        if path.ends_with(".csv") {
            ReportFormat::Csv
        } else {
            ReportFormat::Json
        }
    }
}

const CONFIG_PREFIX: &str = "# config ";
const CRITERIA_PREFIX: &str = "# criteria ";
const RUNTIME_PREFIX: &str = "# runtime_seconds ";

pub fn write_report<W: Write>(report: &ExperimentReport, format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            writeln!(out, "{CONFIG_PREFIX}{}", serde_json::to_string(&report.config)?)?;
            writeln!(out, "{CRITERIA_PREFIX}{}", serde_json::to_string(&report.criteria)?)?;
            if let Some(rt) = report.runtime_seconds {
                writeln!(out, "{RUNTIME_PREFIX}{rt}")?;
            }
            let mut wtr = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            wtr.write_record(["label", "param", "n", "hits", "fraction", "stderr", "failures", "value"])?;
            for c in &report.cells {
                wtr.write_record([
                    c.label.clone(),
                    c.param.to_string(),
                    c.n.to_string(),
                    c.hits.to_string(),
                    c.fraction.to_string(),
                    c.stderr.to_string(),
                    c.failures.to_string(),
                    c.value.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidInput(format!("bad report field {i} in {rec:?}")))
}

pub fn read_report<R: Read>(input: R, format: ReportFormat) -> Result<ExperimentReport> {
    match format {
        ReportFormat::Json => Ok(serde_json::from_reader(input)?),
        ReportFormat::Csv => {
            let mut reader = BufReader::new(input);
            let mut config: Option<ExperimentConfig> = None;
            let mut criteria: Vec<Criterion> = Vec::new();
            let mut runtime = None;
            let mut body = String::new();
            let mut line = String::new();
            while reader.read_line(&mut line)? > 0 {
                if let Some(rest) = line.strip_prefix(CONFIG_PREFIX) {
                    config = Some(serde_json::from_str(rest.trim_end())?);
                } else if let Some(rest) = line.strip_prefix(CRITERIA_PREFIX) {
                    criteria = serde_json::from_str(rest.trim_end())?;
                } else if let Some(rest) = line.strip_prefix(RUNTIME_PREFIX) {
                    runtime = rest.trim_end().parse().ok();
                } else {
                    body.push_str(&line);
                }
                line.clear();
            }
            let config = config.ok_or_else(|| Error::InvalidInput("report has no config line".into()))?;
            let mut rdr = csv::Reader::from_reader(body.as_bytes());
            let mut cells = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                let value = match rec.get(7) {
                    Some("") | None => None,
                    Some(_) => Some(parse_field(&rec, 7)?),
                };
                cells.push(Cell {
                    label: rec.get(0).unwrap_or_default().to_string(),
                    param: parse_field(&rec, 1)?,
                    n: parse_field(&rec, 2)?,
                    hits: parse_field(&rec, 3)?,
                    fraction: parse_field(&rec, 4)?,
                    stderr: parse_field(&rec, 5)?,
                    failures: parse_field(&rec, 6)?,
                    value,
                });
            }
            Ok(ExperimentReport {
                kind: config.kind,
                seed: config.seed,
                cells,
                criteria,
                runtime_seconds: runtime,
                config,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    fn empty_report() -> ExperimentReport {
        let config = ExperimentConfig::new(ExperimentKind::Equidistribution, 9);
        ExperimentReport {
            kind: config.kind,
            seed: 9,
            cells: vec![],
            criteria: vec![],
            runtime_seconds: None,
            config,
        }
    }

    #[test]
    fn empty_report_csv() {
        let mut buf = Vec::new();
        write_report(&empty_report(), ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("# config {\"kind\":\"equidistribution\""));
        assert!(lines[0].contains("\"seed\":9"));
        assert_eq!(lines[2], "label,param,n,hits,fraction,stderr,failures,value");
        let back = read_report(text.as_bytes(), ReportFormat::Csv).unwrap();
        assert_eq!(back, empty_report());
    }

    #[test]
    fn round_trips_are_exact() {
        let mut rep = empty_report();
        let mut c = Cell::new("s", 6.0, 10_000, 3_317, 0);
        c.value = Some(0.1 + 0.2);
        rep.cells = vec![c, Cell::new("s", 9.0, 9_999, 1, 1)];
        rep.criteria = vec![Criterion {
            name: "x".into(),
            passed: true,
            detail: "a, \"b\"".into(),
        }];
        rep.runtime_seconds = Some(1.25);
        for fmt in [ReportFormat::Json, ReportFormat::Csv] {
            let mut buf = Vec::new();
            write_report(&rep, fmt, &mut buf).unwrap();
            assert_eq!(read_report(buf.as_slice(), fmt).unwrap(), rep);
        }
    }

    #[test]
    fn formats() {
        assert_eq!(ReportFormat::from_path("out.csv"), ReportFormat::Csv);
        assert_eq!(ReportFormat::from_path("out.json"), ReportFormat::Json);
        assert!(ReportFormat::parse("xml").is_err());
    }
}
