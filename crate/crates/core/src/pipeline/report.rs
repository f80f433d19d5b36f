use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::filters::FilterName;
use crate::metrics::{pass_rate, PassRate};
use crate::model::PairRecord;

/// Mean metrics over the records that have them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub records: usize,
    pub measured: usize,
    pub errors: usize,
    pub missing_embeddings: usize,
    pub clip_i_mean: Option<f64>,
    pub ssim_mean: Option<f64>,
    pub l2m_mean: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MetricsSummary {
    /// Aggregates in record order, so the result is independent of how the
    /// records were computed.
    pub fn of(records: &[PairRecord]) -> Self {
        let rows: Vec<_> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        Self {
            records: records.len(),
            measured: rows.len(),
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            missing_embeddings: 0,
            clip_i_mean: mean(rows.iter().filter_map(|m| m.clip_i)),
            ssim_mean: mean(rows.iter().map(|m| m.ssim)),
            l2m_mean: mean(rows.iter().map(|m| m.l2m)),
        }
    }

    /// One-row table with CLIP-I, SSIM and L2-M columns.
    pub fn render_table(&self, label: &str) -> String {
        let cell = |v: Option<f64>, digits: usize| {
            v.map_or_else(|| "-".to_owned(), |v| format!("{v:.digits$}"))
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "| {:<12} | {:>7} | {:>7} | {:>7} |",
            "Dataset", "CLIP-I", "SSIM", "L2-M"
        );
        let _ = writeln!(out, "|{:-<14}|{:->9}|{:->9}|{:->9}|", "", "", "", "");
        let _ = writeln!(
            out,
            "| {:<12} | {:>7} | {:>7} | {:>7} |",
            label,
            cell(self.clip_i_mean, 3),
            cell(self.ssim_mean, 3),
            cell(self.l2m_mean, 2)
        );
        out
    }
}

/// Pass rate from manual inspection labels, reported next to the automatic one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManualPassRate {
    pub labeled: usize,
    pub passed: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub total: usize,
    pub valid: usize,
    pub errors: usize,
    pub passed: usize,
    /// `passed / valid`; absent when there are no valid records.
    pub pass_rate: Option<f64>,
    /// `pass_rate` as a percentage with one decimal, exactly as printed.
    pub pass_rate_percent: Option<String>,
    pub rejections: crate::metrics::RejectionBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manual: Option<ManualPassRate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSummary>,
}

fn percent(rate: f64) -> String {
    format!("{:.1}", rate * 100.0)
}

/// Summarizes a filtered manifest.
pub fn report(records: &[PairRecord]) -> Result<Report> {
    let pr = match pass_rate(records) {
        Ok(pr) => Some(pr),
        Err(ForgeError::EmptyManifest) => None,
        Err(e) => return Err(e),
    };
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let labeled: Vec<bool> = records.iter().filter_map(|r| r.manual_pass).collect();
    let manual = (!labeled.is_empty()).then(|| {
        let passed = labeled.iter().filter(|&&p| p).count();
        ManualPassRate {
            labeled: labeled.len(),
            passed,
            rate: passed as f64 / labeled.len() as f64,
        }
    });
    let metrics = records
        .iter()
        .any(|r| r.metrics.is_some())
        .then(|| MetricsSummary::of(records));
    let PassRate {
        valid,
        passed,
        rate,
        breakdown,
        ..
    } = pr.unwrap_or(PassRate {
        total: records.len(),
        valid: 0,
        errors,
        passed: 0,
        rate: f64::NAN,
        breakdown: Default::default(),
    });
    let has_rate = valid > 0;
    Ok(Report {
        total: records.len(),
        valid,
        errors,
        passed,
        pass_rate: has_rate.then_some(rate),
        pass_rate_percent: has_rate.then(|| percent(rate)),
        rejections: breakdown,
        manual,
        metrics,
    })
}

impl Report {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if self.total == 0 {
            out.push_str("0 pairs\n");
            return out;
        }
        let _ = writeln!(
            out,
            "{} pairs ({} valid, {} errors)",
            self.total, self.valid, self.errors
        );
        match &self.pass_rate_percent {
            Some(p) => {
                let _ = writeln!(out, "PR: {p}% ({} / {})", self.passed, self.valid);
            }
            None => out.push_str("PR: n/a (no valid pairs)\n"),
        }
        out.push_str("rejections:");
        for f in FilterName::ALL {
            let _ = write!(out, " {}={}", f, self.rejections.get(f));
        }
        out.push('\n');
        if let Some(m) = &self.manual {
            let _ = writeln!(
                out,
                "manual PR: {}% ({} / {} labeled)",
                percent(m.rate),
                m.passed,
                m.labeled
            );
        }
        if let Some(m) = &self.metrics {
            out.push_str(&m.render_table("pairs"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("Report serializes")
    }
}
