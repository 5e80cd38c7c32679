//! Match-result reporting: a structured JSON document and a fixed-width
//! text table (ranked identifications, one column per sample peak).

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::matcher::{MatchResult, PeakLabel};
use crate::peaklist::{CompoundCatalog, SamplePeaks};

#[derive(Serialize)]
struct ReportEntry<'a> {
    rank: usize,
    msr: f64,
    ssr_std: f64,
    trajectory: usize,
    labels: Vec<String>,
    interferents: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residuals: Option<&'a Vec<Option<f64>>>,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    sample_rts: &'a [f64],
    standards: Vec<(u32, f64)>,
    results: Vec<ReportEntry<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<&'a String>,
}

fn label_text(label: &PeakLabel, catalog: &CompoundCatalog) -> String {
    match label {
        PeakLabel::Target(id) => {
            let name = catalog.name(*id);
            if name == "Unknown" {
                format!("id{id}")
            } else {
                name.to_string()
            }
        }
        PeakLabel::Interferent => "Interferent".to_string(),
    }
}

/// Structured report: sample peaks, standards, and every ranked result
/// with its score breakdown.
pub fn to_json(
    result: &MatchResult,
    sample: &SamplePeaks,
    catalog: &CompoundCatalog,
) -> Result<String> {
    let doc = ReportDocument {
        sample_rts: &sample.unknowns,
        standards: sample.standards.iter().map(|(&k, &v)| (k, v)).collect(),
        results: result
            .ranked
            .iter()
            .enumerate()
            .map(|(i, e)| ReportEntry {
                rank: i + 1,
                msr: e.score.msr,
                ssr_std: e.score.ssr_std,
                trajectory: e.score.lib_index,
                labels: e
                    .assignment
                    .labels
                    .iter()
                    .map(|l| label_text(l, catalog))
                    .collect(),
                interferents: e.score.interferents.iter().copied().collect(),
                residuals: Some(&e.score.residuals),
            })
            .collect(),
        diagnostic: result.diagnostic.as_ref(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Fixed-width table: a retention-time header row, then one row per ranked
/// result with per-peak labels and the MSR.
pub fn to_text(
    result: &MatchResult,
    sample: &SamplePeaks,
    catalog: &CompoundCatalog,
) -> String {
    let mut out = String::new();
    let col = 14usize;

    let _ = write!(out, "{:<8}", "rank");
    for rt in &sample.unknowns {
        let _ = write!(out, "{:>col$.1}", rt);
    }
    let _ = writeln!(out, "{:>12}", "MSR (s^2)");
    let rule_len = 8 + col * sample.unknowns.len() + 12;
    let _ = writeln!(out, "{}", "-".repeat(rule_len));

    for (i, entry) in result.ranked.iter().enumerate() {
        let _ = write!(out, "{:<8}", i + 1);
        for label in &entry.assignment.labels {
            let mut text = label_text(label, catalog);
            text.truncate(col - 1);
            let _ = write!(out, "{text:>col$}");
        }
        let _ = writeln!(out, "{:>12.4}", entry.score.msr);
    }
    if result.ranked.is_empty() {
        let _ = writeln!(
            out,
            "(no admissible assignment{})",
            result
                .diagnostic
                .as_ref()
                .map(|d| format!("; {d}"))
                .unwrap_or_default()
        );
    }
    out
}
