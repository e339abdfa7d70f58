//! Metrics emission: a per-round CSV stream and an end-of-run JSON summary.
//!
//! The CSV is written header-first and flushed after every round, so the
//! file is valid even when a run is interrupted. All numbers use fixed
//! 6-decimal formatting so regression runs diff cleanly.

use crate::error::{Error, Result};
use crate::orchestrator::{RoundRecord, RunConfig, RunReport};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Streaming metrics writer. Rows must arrive in round order.
pub struct MetricsSink {
    csv: Option<CsvSink>,
    json_path: Option<PathBuf>,
}

struct CsvSink {
    path: PathBuf,
    writer: BufWriter<File>,
    wrote_header: bool,
}

impl MetricsSink {
    pub fn new(csv_path: Option<&Path>, json_path: Option<&Path>) -> Result<MetricsSink> {
        let csv = match csv_path {
            Some(p) => {
                let file = File::create(p).map_err(|e| Error::io(p, e))?;
                Some(CsvSink {
                    path: p.to_path_buf(),
                    writer: BufWriter::new(file),
                    wrote_header: false,
                })
            }
            None => None,
        };
        Ok(MetricsSink {
            csv,
            json_path: json_path.map(Path::to_path_buf),
        })
    }

    /// Append one CSV row: `round, mean_acc, acc_client_0.., loss_client_0..`,
    /// writing the header before the first row and flushing afterwards.
    pub fn emit_round(&mut self, record: &RoundRecord) -> Result<()> {
        let Some(csv) = &mut self.csv else {
            return Ok(());
        };
        let io_err = |e| Error::io(&csv.path, e);
        if !csv.wrote_header {
            let mut header = String::from("round,mean_acc");
            for i in 0..record.accuracy.len() {
                header.push_str(&format!(",acc_client_{i}"));
            }
            for i in 0..record.train_loss.len() {
                header.push_str(&format!(",loss_client_{i}"));
            }
            writeln!(csv.writer, "{header}").map_err(io_err)?;
            csv.wrote_header = true;
        }
        let mut row = format!("{},{:.6}", record.round, record.mean_accuracy);
        for a in &record.accuracy {
            row.push_str(&format!(",{a:.6}"));
        }
        for l in &record.train_loss {
            row.push_str(&format!(",{l:.6}"));
        }
        writeln!(csv.writer, "{row}").map_err(io_err)?;
        csv.writer.flush().map_err(io_err)
    }

    /// Write the end-of-run JSON summary.
    pub fn emit_summary(&mut self, report: &RunReport) -> Result<()> {
        let Some(path) = &self.json_path else {
            return Ok(());
        };
        let summary = RunSummary::from_report(report);
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &summary)?;
        Ok(())
    }
}

/// The JSON summary schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub best_mean_accuracy: f64,
    pub best_round: usize,
    pub final_mean_accuracy: f64,
    pub per_client_best: Vec<f64>,
    pub seed: u64,
    pub wall_clock_seconds: f64,
}

impl RunSummary {
    pub fn from_report(report: &RunReport) -> RunSummary {
        RunSummary {
            config: report.config.clone(),
            best_mean_accuracy: report.best_mean_accuracy,
            best_round: report.best_round,
            final_mean_accuracy: report.final_mean_accuracy(),
            per_client_best: report.per_client_best(),
            seed: report.config.seed,
            wall_clock_seconds: report.wall_clock_seconds,
        }
    }
}

/// Rows parsed back from a metrics CSV (participants are not stored there).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub round: usize,
    pub mean_accuracy: f64,
    pub accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
}

/// Parse a metrics CSV produced by [`MetricsSink::emit_round`].
pub fn parse_metrics_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Dataset(format!("{}: empty csv", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let n_acc = columns
        .iter()
        .filter(|c| c.starts_with("acc_client_"))
        .count();
    let n_loss = columns
        .iter()
        .filter(|c| c.starts_with("loss_client_"))
        .count();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + n_acc + n_loss {
            return Err(Error::Dataset(format!(
                "{}: row has {} fields, header implies {}",
                path.display(),
                fields.len(),
                2 + n_acc + n_loss
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Dataset(format!("{}: bad number {s:?}", path.display())))
        };
        rows.push(CsvRow {
            round: fields[0]
                .parse()
                .map_err(|_| Error::Dataset(format!("{}: bad round {:?}", path.display(), fields[0])))?,
            mean_accuracy: parse(fields[1])?,
            accuracy: fields[2..2 + n_acc]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?,
            train_loss: fields[2 + n_acc..]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(round: usize, accs: &[f64], losses: &[f64]) -> RoundRecord {
        RoundRecord {
            round,
            accuracy: accs.to_vec(),
            mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            train_loss: losses.to_vec(),
            participants: (0..accs.len()).collect(),
        }
    }

    #[test]
    fn header_once_then_one_row_per_round() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut sink = MetricsSink::new(Some(&path), None).unwrap();
        for r in 0..3 {
            sink.emit_round(&record(r, &[0.5, 0.75], &[1.25, 0.5]))
                .unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "round,mean_acc,acc_client_0,acc_client_1,loss_client_0,loss_client_1"
        );
        assert_eq!(lines[1], "0,0.625000,0.500000,0.750000,1.250000,0.500000");
    }

    #[test]
    fn csv_round_trips_to_one_part_in_a_million() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut sink = MetricsSink::new(Some(&path), None).unwrap();
        let records = [
            record(0, &[0.123456789, 0.5], &[2.718281828, 0.1]),
            record(1, &[0.987654321, 0.25], &[0.333333333, 0.2]),
        ];
        for r in &records {
            sink.emit_round(r).unwrap();
        }
        let rows = parse_metrics_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, rec) in rows.iter().zip(&records) {
            assert_eq!(row.round, rec.round);
            assert!((row.mean_accuracy - rec.mean_accuracy).abs() < 1e-6);
            for (a, b) in row.accuracy.iter().zip(&rec.accuracy) {
                assert!((a - b).abs() < 1e-6);
            }
            for (a, b) in row.train_loss.iter().zip(&rec.train_loss) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sink_without_paths_is_a_no_op() {
        let mut sink = MetricsSink::new(None, None).unwrap();
        sink.emit_round(&record(0, &[1.0], &[0.0])).unwrap();
    }
}
