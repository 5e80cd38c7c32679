//! Trajectory matching: standards screening (squared-residual sum over the
//! internal standards), mean-squared-residual ranking over all admissible
//! assignments, and interferent detection.

mod enumerate;

pub use enumerate::{enumerate_candidates, for_each_candidate};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::library::{Rtt, RttLibrary};
use crate::peaklist::{Peak, PeakList, SamplePeaks};

/// How many trajectories survive the standards screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScreenKeep {
    All,
    /// Keep this fraction of the library (in (0, 1]).
    Fraction(f64),
    /// Keep the best k.
    TopK(usize),
    /// The more permissive of "the first half" and "the top 20".
    HalfOrTop20,
}

impl ScreenKeep {
    fn count(&self, n_lib: usize) -> usize {
        let k = match *self {
            ScreenKeep::All => n_lib,
            ScreenKeep::Fraction(f) => (f * n_lib as f64).ceil() as usize,
            ScreenKeep::TopK(k) => k,
            ScreenKeep::HalfOrTop20 => n_lib.div_ceil(2).max(20),
        };
        k.clamp(1, n_lib.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Half-width of the admissible rt window around a sample peak, seconds.
    /// `f64::INFINITY` disables the cutoff (exhaustive mode).
    pub delta_t: f64,
    pub screen_keep: ScreenKeep,
    /// Interferent criterion 2 threshold: flag a pair whose squared residual
    /// exceeds `kappa * msr`.
    pub kappa: f64,
    /// Repeat criterion-2 flagging to a fixed point instead of one pass.
    pub interferent_iterate: bool,
    pub max_results: usize,
    pub require_standards: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            delta_t: 30.0,
            screen_keep: ScreenKeep::HalfOrTop20,
            kappa: 2.0,
            interferent_iterate: false,
            max_results: 10,
            require_standards: false,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0) {
            return Err(Error::validation("delta_t must be > 0"));
        }
        if !(self.kappa > 1.0) {
            return Err(Error::validation("kappa must be > 1"));
        }
        if let ScreenKeep::Fraction(f) = self.screen_keep {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::validation("screen fraction must be in (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeakLabel {
    /// Catalog id of the assigned target compound.
    Target(u32),
    Interferent,
}

impl PeakLabel {
    /// Sort key placing interferents after every compound id.
    fn order_key(&self) -> u32 {
        match *self {
            PeakLabel::Target(id) => id,
            PeakLabel::Interferent => u32::MAX,
        }
    }
}

/// One candidate identification: a label per unknown sample peak, in rt
/// order. Target ids are injective and strictly increasing across the
/// non-interferent peaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<PeakLabel>,
}

impl Assignment {
    pub fn n_interferents(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| **l == PeakLabel::Interferent)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub lib_index: usize,
    /// Standards-only sum of squared residuals, s^2 (Eq. 1 shape).
    pub ssr_std: f64,
    /// SSR over standards plus non-interferent pairs, s^2.
    pub ssr_total: f64,
    /// N_std + N_sample - N_interf.
    pub n_paired: usize,
    pub msr: f64,
    /// Indices (into the unknowns) of peaks labeled interferent.
    pub interferents: BTreeSet<usize>,
    /// Per-peak squared residual, `None` for interferents.
    pub residuals: Vec<Option<f64>>,
}

/// Standards-only screening statistic between one trajectory and the sample.
pub fn ssr_std(rtt: &Rtt, sample: &SamplePeaks) -> f64 {
    sample
        .standards
        .iter()
        .map(|(&sid, &rt)| {
            let d = rtt.rt(sid) - rt;
            d * d
        })
        .sum()
}

/// Rank trajectories ascending by standards-only SSR and keep the top slice.
/// With no standards configured every trajectory survives in library order.
pub fn screen_by_standards(
    sample: &SamplePeaks,
    lib: &RttLibrary,
    cfg: &MatchConfig,
) -> Result<Vec<usize>> {
    if lib.trajectories.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if sample.standards.is_empty() {
        if cfg.require_standards {
            return Err(Error::validation(
                "standards required by config but none present in sample",
            ));
        }
        return Ok((0..lib.n_lib()).collect());
    }
    let scores = exec::map_indexed(&lib.trajectories, |_, rtt| ssr_std(rtt, sample));
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    order.truncate(cfg.screen_keep.count(lib.n_lib()));
    Ok(order)
}

/// Score one assignment against one trajectory (Eq. 2 with the interferent
/// re-normalization): msr = (SSR_std + SSR over assigned pairs) divided by
/// N_std + N_sample - N_interf.
pub fn score(
    lib_index: usize,
    assignment: &Assignment,
    rtt: &Rtt,
    sample: &SamplePeaks,
) -> Result<MatchScore> {
    let s_std = ssr_std(rtt, sample);
    let mut residuals = Vec::with_capacity(assignment.labels.len());
    let mut interferents = BTreeSet::new();
    let mut ssr_pairs = 0.0;
    for (j, (label, &rt)) in assignment.labels.iter().zip(&sample.unknowns).enumerate() {
        match *label {
            PeakLabel::Target(id) => {
                let d = rtt.rt(id) - rt;
                residuals.push(Some(d * d));
                ssr_pairs += d * d;
            }
            PeakLabel::Interferent => {
                residuals.push(None);
                interferents.insert(j);
            }
        }
    }
    let n_paired = sample.standards.len() + sample.unknowns.len() - interferents.len();
    if n_paired == 0 {
        return Err(Error::Unscorable);
    }
    let ssr_total = s_std + ssr_pairs;
    Ok(MatchScore {
        lib_index,
        ssr_std: s_std,
        ssr_total,
        n_paired,
        msr: ssr_total / n_paired as f64,
        interferents,
        residuals,
    })
}

/// Interferent criterion 2: flag every paired peak whose squared residual
/// exceeds `kappa * msr`, then rescore with those pairs excluded. Returns
/// the re-flagged variant, or `None` when nothing gets flagged or the
/// variant degenerates (every peak flagged).
pub fn detect_interferents(
    assignment: &Assignment,
    start: &MatchScore,
    cfg: &MatchConfig,
    rtt: &Rtt,
    sample: &SamplePeaks,
) -> Option<(Assignment, MatchScore)> {
    let mut current = assignment.clone();
    let mut current_score = start.clone();
    let mut changed = false;
    loop {
        let threshold = cfg.kappa * current_score.msr;
        let flagged: Vec<usize> = current_score
            .residuals
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, Some(sq) if *sq > threshold))
            .map(|(j, _)| j)
            .collect();
        if flagged.is_empty() {
            break;
        }
        changed = true;
        for j in flagged {
            current.labels[j] = PeakLabel::Interferent;
        }
        if current.n_interferents() == current.labels.len() {
            return None; // all peaks flagged: degenerate variant
        }
        current_score = match score(start.lib_index, &current, rtt, sample) {
            Ok(s) => s,
            Err(_) => return None,
        };
        if !cfg.interferent_iterate {
            break;
        }
    }
    changed.then_some((current, current_score))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub assignment: Assignment,
    pub score: MatchScore,
}

impl RankedEntry {
    /// Deterministic rank order: ascending msr, then fewer interferents,
    /// then lexicographically smallest compound-id tuple, then lower
    /// trajectory index.
    fn rank_key(&self) -> (f64, usize, Vec<u32>, usize) {
        (
            self.score.msr,
            self.score.interferents.len(),
            self.assignment.labels.iter().map(|l| l.order_key()).collect(),
            self.score.lib_index,
        )
    }
}

fn cmp_entries(a: &RankedEntry, b: &RankedEntry) -> std::cmp::Ordering {
    let (am, ai, at, al) = a.rank_key();
    let (bm, bi, bt, bl) = b.rank_key();
    am.partial_cmp(&bm)
        .unwrap()
        .then(ai.cmp(&bi))
        .then(at.cmp(&bt))
        .then(al.cmp(&bl))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Ranked identifications, ascending msr. The first entry is the
    /// identification.
    pub ranked: Vec<RankedEntry>,
    /// Set when no admissible assignment could be scored anywhere.
    pub diagnostic: Option<String>,
}

impl MatchResult {
    pub fn top(&self) -> Option<&RankedEntry> {
        self.ranked.first()
    }
}

/// Full pipeline for one sample: screen trajectories by standards,
/// enumerate and score candidates per surviving trajectory, add the
/// criterion-2 interferent variants, and merge into one ranked list.
pub fn match_sample(
    sample: &SamplePeaks,
    lib: &RttLibrary,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    cfg.validate()?;
    if lib.trajectories.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let surviving = screen_by_standards(sample, lib, cfg)?;

    // Per-trajectory work is independent; the merge below fixes the order.
    let per_traj: Vec<(Vec<RankedEntry>, Option<f64>)> =
        exec::map_indexed(&surviving, |_, &lib_index| {
            let rtt = &lib.trajectories[lib_index];
            let cands = enumerate::candidate_sets(sample, rtt, &lib.catalog, cfg);
            let mut entries = Vec::new();
            let mut labels = Vec::new();
            enumerate_for(&cands.per_peak, &mut labels, &mut |assignment: Assignment| {
                if let Ok(s) = score(lib_index, &assignment, rtt, sample) {
                    if let Some((va, vs)) = detect_interferents(&assignment, &s, cfg, rtt, sample)
                    {
                        entries.push(RankedEntry {
                            assignment: va,
                            score: vs,
                        });
                    }
                    entries.push(RankedEntry {
                        assignment,
                        score: s,
                    });
                }
            });
            (entries, cands.min_window_miss)
        });

    let mut all: Vec<RankedEntry> = Vec::new();
    let mut min_miss: Option<f64> = None;
    for (entries, miss) in per_traj {
        all.extend(entries);
        if let Some(m) = miss {
            min_miss = Some(min_miss.map_or(m, |c: f64| c.min(m)));
        }
    }
    all.sort_by(cmp_entries);
    // Criterion-2 variants from different parents can coincide; keep one.
    all.dedup_by(|a, b| {
        a.score.lib_index == b.score.lib_index && a.assignment == b.assignment
    });
    all.truncate(cfg.max_results);

    let diagnostic = if all.is_empty() {
        Some(match min_miss {
            Some(m) => format!(
                "no admissible assignment; closest window miss was {m:.4} s (delta_t = {} s)",
                cfg.delta_t
            ),
            None => "no admissible assignment".to_string(),
        })
    } else {
        None
    };
    Ok(MatchResult {
        ranked: all,
        diagnostic,
    })
}

// Small shim so match_sample can reuse the DFS without recomputing
// candidate sets per visit.
fn enumerate_for(
    per_peak: &[Vec<u32>],
    labels: &mut Vec<PeakLabel>,
    visit: &mut dyn FnMut(Assignment),
) {
    enumerate::dfs_entry(per_peak, labels, visit);
}

/// Replace each identified peak's rt with the reference rt of its assigned
/// compound (the aligning mode of the matcher). Interferent peaks keep
/// their rts; standards land on the reference standard rts.
pub fn align_to_reference(
    sample: &SamplePeaks,
    result: &MatchResult,
    reference: &Rtt,
    lib: &RttLibrary,
) -> Result<PeakList> {
    let top = result
        .top()
        .ok_or_else(|| Error::NoAssignment("empty match result".into()))?;
    let mut peaks = Vec::new();
    for (&sid, _) in &sample.standards {
        peaks.push(Peak {
            rt: reference.rt(sid),
            height: None,
            label: Some(lib.catalog.name(sid).to_string()),
            compound: Some(sid),
        });
    }
    for (label, &rt) in top.assignment.labels.iter().zip(&sample.unknowns) {
        match *label {
            PeakLabel::Target(id) => peaks.push(Peak {
                rt: reference.rt(id),
                height: None,
                label: Some(lib.catalog.name(id).to_string()),
                compound: Some(id),
            }),
            PeakLabel::Interferent => peaks.push(Peak {
                rt,
                height: None,
                label: Some("INTERFERENT".to_string()),
                compound: None,
            }),
        }
    }
    PeakList::new("aligned", peaks)
}
