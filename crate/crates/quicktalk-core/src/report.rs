//! Report rows and percentile summaries.
//!
//! One CSV row per transaction, fixed column order, header always present.
//! All float formatting goes through one place so identical runs render
//! byte-identical files.

use std::fmt::Write as _;

use crate::sim_engine::{percentile, EngineError, TransactionRecord};

/// Column order is frozen; consumers index by position.
pub const CSV_HEADER: &str = "scenario_name,seed,txn_id,t_search_ms,t_command_ms,t_e2e_ms,retx_count,success,bg_sessions,bg_interval_s,download_mbps";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario_name: String,
    pub seed: u64,
    pub txn_id: u32,
    pub t_search_ms: f64,
    pub t_command_ms: f64,
    pub t_e2e_ms: f64,
    pub retx_count: u32,
    pub success: bool,
    pub bg_sessions: usize,
    pub bg_interval_s: f64,
    pub download_mbps: f64,
}

impl ReportRow {
    #[must_use]
    pub fn from_record(
        scenario_name: &str,
        record: &TransactionRecord,
        bg_sessions: usize,
        bg_interval_s: f64,
        download_mbps: f64,
    ) -> Self {
        ReportRow {
            scenario_name: scenario_name.to_owned(),
            seed: record.seed,
            txn_id: record.txn_id,
            t_search_ms: record.t_search_ms,
            t_command_ms: record.t_command_ms,
            t_e2e_ms: record.t_e2e_ms,
            retx_count: record.retx_count,
            success: record.success,
            bg_sessions,
            bg_interval_s,
            download_mbps,
        }
    }

    #[must_use]
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{:.3},{},{},{},{:.3},{:.3}",
            self.scenario_name,
            self.seed,
            self.txn_id,
            self.t_search_ms,
            self.t_command_ms,
            self.t_e2e_ms,
            self.retx_count,
            self.success,
            self.bg_sessions,
            self.bg_interval_s,
            self.download_mbps,
        )
    }
}

/// Full CSV document: header plus one line per row, trailing newline.
#[must_use]
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Nearest-rank percentile block over one population of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub transactions: usize,
    pub success_rate: f64,
    pub search_ms: Percentiles,
    pub command_ms: Percentiles,
    pub e2e_ms: Percentiles,
    pub download_mbps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p10: f64,
    pub p50: f64,
    pub p80: f64,
    pub p90: f64,
    pub max: f64,
}

fn percentiles(samples: &[f64]) -> Result<Percentiles, EngineError> {
    Ok(Percentiles {
        p10: percentile(samples, 10.0)?,
        p50: percentile(samples, 50.0)?,
        p80: percentile(samples, 80.0)?,
        p90: percentile(samples, 90.0)?,
        max: percentile(samples, 100.0)?,
    })
}

impl Summary {
    /// Errors on an empty population.
    pub fn from_rows(label: &str, rows: &[ReportRow]) -> Result<Self, EngineError> {
        let search: Vec<f64> = rows.iter().map(|r| r.t_search_ms).collect();
        let command: Vec<f64> = rows.iter().map(|r| r.t_command_ms).collect();
        let e2e: Vec<f64> = rows.iter().map(|r| r.t_e2e_ms).collect();
        let successes = rows.iter().filter(|r| r.success).count();
        let download = rows.first().and_then(|r| {
            (r.download_mbps > 0.0).then_some(r.download_mbps)
        });
        Ok(Summary {
            label: label.to_owned(),
            transactions: rows.len(),
            success_rate: successes as f64 / rows.len() as f64,
            search_ms: percentiles(&search)?,
            command_ms: percentiles(&command)?,
            e2e_ms: percentiles(&e2e)?,
            download_mbps: download,
        })
    }

    /// Human-readable block, one metric per line.
    #[must_use]
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "[{}] {} transactions, success rate {:.4}",
            self.label, self.transactions, self.success_rate
        );
        for (name, p) in [
            ("t_search_ms", &self.search_ms),
            ("t_command_ms", &self.command_ms),
            ("t_e2e_ms", &self.e2e_ms),
        ] {
            let _ = writeln!(
                out,
                "  {name}: p10={:.3} p50={:.3} p80={:.3} p90={:.3} max={:.3}",
                p.p10, p.p50, p.p80, p.p90, p.max
            );
        }
        if let Some(mbps) = self.download_mbps {
            let _ = writeln!(out, "  download_mbps: {mbps:.3}");
        }
        out
    }
}
