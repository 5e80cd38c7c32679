//! Pruned enumeration of admissible peak-to-compound assignments.
//!
//! Enumeration is depth-first over the sample peaks in rt order. Each peak
//! carries a precomputed candidate set (targets inside its rt window and
//! its standards-delimited region), so injectivity, elution order, region
//! consistency and the rt cutoff are enforced during generation rather
//! than by post-filtering. A peak whose candidate set is empty can be no
//! target and is force-flagged as an interferent.

use crate::library::Rtt;
use crate::matcher::{Assignment, MatchConfig, PeakLabel};
use crate::peaklist::{CompoundCatalog, SamplePeaks};

pub(crate) struct CandidateSets {
    /// Per unknown peak: admissible target catalog ids, ascending.
    pub per_peak: Vec<Vec<u32>>,
    /// Closest |rt_lib - rt_peak| observed for peaks with an empty window,
    /// for the "nothing matched" diagnostic.
    pub min_window_miss: Option<f64>,
}

pub(crate) fn candidate_sets(
    sample: &SamplePeaks,
    rtt: &Rtt,
    catalog: &CompoundCatalog,
    cfg: &MatchConfig,
) -> CandidateSets {
    let targets = catalog.target_ids();
    let mut per_peak = Vec::with_capacity(sample.unknowns.len());
    let mut min_window_miss: Option<f64> = None;

    for &rt in &sample.unknowns {
        // Standards partition both the sample rt axis and the catalog order:
        // a peak eluting between two standards can only be a compound that
        // elutes between them.
        let mut lo: i64 = -1;
        let mut hi: i64 = catalog.len() as i64;
        for (&sid, &std_rt) in &sample.standards {
            if rt > std_rt {
                lo = lo.max(sid as i64);
            } else {
                hi = hi.min(sid as i64);
            }
        }
        let mut cands = Vec::new();
        let mut closest = f64::INFINITY;
        for &t in &targets {
            let dist = (rtt.rt(t) - rt).abs();
            closest = closest.min(dist);
            if dist <= cfg.delta_t && (t as i64) > lo && (t as i64) < hi {
                cands.push(t);
            }
        }
        if cands.is_empty() && closest.is_finite() {
            min_window_miss = Some(match min_window_miss {
                Some(m) => m.min(closest),
                None => closest,
            });
        }
        per_peak.push(cands);
    }
    CandidateSets {
        per_peak,
        min_window_miss,
    }
}

/// Can peaks `from..` still be assigned with all ids strictly above `last`?
/// Greedy smallest-valid pick is exact for existence.
fn suffix_feasible(per_peak: &[Vec<u32>], from: usize, last: i64) -> bool {
    let mut cur = last;
    for cands in &per_peak[from..] {
        if cands.is_empty() {
            continue; // forced interferent, consumes no compound
        }
        match cands.iter().find(|&&c| (c as i64) > cur) {
            Some(&c) => cur = c as i64,
            None => return false,
        }
    }
    true
}

fn dfs(
    per_peak: &[Vec<u32>],
    peak: usize,
    last: i64,
    labels: &mut Vec<PeakLabel>,
    visit: &mut dyn FnMut(Assignment),
) {
    if peak == per_peak.len() {
        visit(Assignment {
            labels: labels.clone(),
        });
        return;
    }
    if !suffix_feasible(per_peak, peak, last) {
        return;
    }
    let cands = &per_peak[peak];
    if cands.is_empty() {
        labels.push(PeakLabel::Interferent);
        dfs(per_peak, peak + 1, last, labels, visit);
        labels.pop();
        return;
    }
    for &c in cands.iter().filter(|&&c| (c as i64) > last) {
        labels.push(PeakLabel::Target(c));
        dfs(per_peak, peak + 1, c as i64, labels, visit);
        labels.pop();
    }
}

pub(crate) fn dfs_entry(
    per_peak: &[Vec<u32>],
    labels: &mut Vec<PeakLabel>,
    visit: &mut dyn FnMut(Assignment),
) {
    dfs(per_peak, 0, -1, labels, visit);
}

/// Drive `visit` over every admissible assignment of the sample's unknown
/// peaks against one trajectory. Emits nothing when no admissible
/// assignment exists.
pub fn for_each_candidate(
    sample: &SamplePeaks,
    rtt: &Rtt,
    catalog: &CompoundCatalog,
    cfg: &MatchConfig,
    mut visit: impl FnMut(Assignment),
) {
    let cands = candidate_sets(sample, rtt, catalog, cfg);
    let mut labels = Vec::with_capacity(sample.unknowns.len());
    dfs(&cands.per_peak, 0, -1, &mut labels, &mut visit);
}

/// Collecting wrapper around [`for_each_candidate`].
pub fn enumerate_candidates(
    sample: &SamplePeaks,
    rtt: &Rtt,
    catalog: &CompoundCatalog,
    cfg: &MatchConfig,
) -> Vec<Assignment> {
    let mut out = Vec::new();
    for_each_candidate(sample, rtt, catalog, cfg, |a| out.push(a));
    out
}
