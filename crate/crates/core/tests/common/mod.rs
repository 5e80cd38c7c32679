//! Shared test support: a naive generate-filter-score-sort matcher used as
//! an oracle against the pruned production matcher, plus seeded random
//! instance generation.
//!
//! The oracle deliberately avoids the production code paths: candidate
//! filtering is done by post-filtering a full cartesian product, scoring is
//! re-derived from the definitions, and ranking is an independent sort.

// Each integration test binary uses a different subset of this module.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rttmatch::library::RttLibrary;
use rttmatch::matcher::{MatchConfig, PeakLabel, ScreenKeep};
use rttmatch::peaklist::{CatalogEntry, CompoundCatalog, CompoundRole, SamplePeaks};

/// One ranked oracle entry: trajectory index, per-peak labels, msr.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub lib_index: usize,
    pub labels: Vec<PeakLabel>,
    pub msr: f64,
}

fn keep_count(keep: ScreenKeep, n_lib: usize) -> usize {
    let k = match keep {
        ScreenKeep::All => n_lib,
        ScreenKeep::Fraction(f) => (f * n_lib as f64).ceil() as usize,
        ScreenKeep::TopK(k) => k,
        ScreenKeep::HalfOrTop20 => ((n_lib + 1) / 2).max(20),
    };
    k.max(1).min(n_lib.max(1))
}

fn ssr_std(rts: &[f64], sample: &SamplePeaks) -> f64 {
    sample
        .standards
        .iter()
        .map(|(&sid, &rt)| (rts[sid as usize] - rt).powi(2))
        .sum()
}

/// Score labels directly from the definitions; returns (msr, per-peak
/// squared residuals, interferent count) or None when nothing is paired.
fn naive_score(
    rts: &[f64],
    labels: &[PeakLabel],
    sample: &SamplePeaks,
) -> Option<(f64, Vec<Option<f64>>, usize)> {
    let mut ssr = ssr_std(rts, sample);
    let mut residuals = Vec::new();
    let mut n_interf = 0;
    for (label, &rt) in labels.iter().zip(&sample.unknowns) {
        match label {
            PeakLabel::Target(id) => {
                let sq = (rts[*id as usize] - rt).powi(2);
                residuals.push(Some(sq));
                ssr += sq;
            }
            PeakLabel::Interferent => {
                residuals.push(None);
                n_interf += 1;
            }
        }
    }
    let n_paired = sample.standards.len() + sample.unknowns.len() - n_interf;
    if n_paired == 0 {
        return None;
    }
    Some((ssr / n_paired as f64, residuals, n_interf))
}

/// Criterion-2 re-flagging, reimplemented: flag squared residuals above
/// kappa*msr, rescore; single pass unless `iterate`.
fn naive_variant(
    rts: &[f64],
    labels: &[PeakLabel],
    sample: &SamplePeaks,
    cfg: &MatchConfig,
) -> Option<(Vec<PeakLabel>, f64)> {
    let mut current = labels.to_vec();
    let (mut msr, mut residuals, _) = naive_score(rts, labels, sample)?;
    let mut changed = false;
    loop {
        let over: Vec<usize> = residuals
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, Some(sq) if *sq > cfg.kappa * msr))
            .map(|(j, _)| j)
            .collect();
        if over.is_empty() {
            break;
        }
        changed = true;
        for j in over {
            current[j] = PeakLabel::Interferent;
        }
        if current.iter().all(|l| *l == PeakLabel::Interferent) {
            return None;
        }
        match naive_score(rts, &current, sample) {
            Some((m, r, _)) => {
                msr = m;
                residuals = r;
            }
            None => return None,
        }
        if !cfg.interferent_iterate {
            break;
        }
    }
    changed.then_some((current, msr))
}

/// All label vectors admissible for one trajectory: full cartesian product
/// of per-peak options, post-filtered for strictly increasing target ids.
/// A peak with no in-window, region-consistent target has the single
/// option Interferent.
fn naive_assignments(
    rts: &[f64],
    sample: &SamplePeaks,
    catalog: &CompoundCatalog,
    cfg: &MatchConfig,
) -> Vec<Vec<PeakLabel>> {
    let targets = catalog.target_ids();
    let options: Vec<Vec<PeakLabel>> = sample
        .unknowns
        .iter()
        .map(|&rt| {
            let mut region_lo = -1i64;
            let mut region_hi = catalog.len() as i64;
            for (&sid, &std_rt) in &sample.standards {
                if rt > std_rt {
                    region_lo = region_lo.max(sid as i64);
                } else {
                    region_hi = region_hi.min(sid as i64);
                }
            }
            let opts: Vec<PeakLabel> = targets
                .iter()
                .filter(|&&t| {
                    (rts[t as usize] - rt).abs() <= cfg.delta_t
                        && (t as i64) > region_lo
                        && (t as i64) < region_hi
                })
                .map(|&t| PeakLabel::Target(t))
                .collect();
            if opts.is_empty() {
                vec![PeakLabel::Interferent]
            } else {
                opts
            }
        })
        .collect();

    // Cartesian product in lexicographic option order.
    let mut out = Vec::new();
    let mut idx = vec![0usize; options.len()];
    'outer: loop {
        let labels: Vec<PeakLabel> = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
        let mut last = -1i64;
        let mut ok = true;
        for l in &labels {
            if let PeakLabel::Target(id) = l {
                if (*id as i64) <= last {
                    ok = false;
                    break;
                }
                last = *id as i64;
            }
        }
        if ok {
            out.push(labels);
        }
        if options.is_empty() {
            break;
        }
        // Odometer increment.
        let mut pos = options.len();
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    out
}

/// The full oracle pipeline: screen, enumerate, score, add criterion-2
/// variants, rank deterministically, dedupe, truncate.
pub fn oracle_match(
    sample: &SamplePeaks,
    lib: &RttLibrary,
    cfg: &MatchConfig,
) -> Vec<OracleEntry> {
    let surviving: Vec<usize> = if sample.standards.is_empty() {
        (0..lib.n_lib()).collect()
    } else {
        let mut order: Vec<usize> = (0..lib.n_lib()).collect();
        let scores: Vec<f64> = lib
            .trajectories
            .iter()
            .map(|t| ssr_std(&t.rts, sample))
            .collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
        order.truncate(keep_count(cfg.screen_keep, lib.n_lib()));
        order
    };

    let mut all: Vec<OracleEntry> = Vec::new();
    for &lib_index in &surviving {
        let rts = &lib.trajectories[lib_index].rts;
        for labels in naive_assignments(rts, sample, &lib.catalog, cfg) {
            if let Some((msr, _, _)) = naive_score(rts, &labels, sample) {
                if let Some((vl, vm)) = naive_variant(rts, &labels, sample, cfg) {
                    all.push(OracleEntry {
                        lib_index,
                        labels: vl,
                        msr: vm,
                    });
                }
                all.push(OracleEntry {
                    lib_index,
                    labels,
                    msr,
                });
            }
        }
    }

    let key = |e: &OracleEntry| {
        let n_interf = e
            .labels
            .iter()
            .filter(|l| **l == PeakLabel::Interferent)
            .count();
        let tuple: Vec<u32> = e
            .labels
            .iter()
            .map(|l| match l {
                PeakLabel::Target(id) => *id,
                PeakLabel::Interferent => u32::MAX,
            })
            .collect();
        (n_interf, tuple, e.lib_index)
    };
    all.sort_by(|a, b| {
        a.msr
            .partial_cmp(&b.msr)
            .unwrap()
            .then_with(|| key(a).cmp(&key(b)))
    });
    all.dedup_by(|a, b| a.lib_index == b.lib_index && a.labels == b.labels);
    all.truncate(cfg.max_results);
    all
}

/// A random matching instance: interleaved target/standard catalog, a
/// small library of drifted trajectories, and a sample drawn from a
/// held-out drift of the same base (optionally with injected foreign
/// peaks).
pub struct RandomInstance {
    pub lib: RttLibrary,
    pub sample: SamplePeaks,
}

pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_targets = rng.gen_range(2..=8usize);
    let n_stds = rng.gen_range(1..=3usize);
    let n_total = n_targets + n_stds;

    // Interleave standards at random catalog positions.
    let mut std_positions: Vec<usize> = (0..n_total).collect();
    for i in (1..std_positions.len()).rev() {
        let j = rng.gen_range(0..=i);
        std_positions.swap(i, j);
    }
    let std_positions = &std_positions[..n_stds];
    let catalog = CompoundCatalog::new(
        (0..n_total)
            .map(|i| CatalogEntry {
                id: i as u32,
                name: format!("c{i}"),
                role: if std_positions.contains(&i) {
                    CompoundRole::Standard
                } else {
                    CompoundRole::Target
                },
            })
            .collect(),
    )
    .unwrap();

    // Base rts with random gaps, then up to 5 drifted trajectories.
    let mut base = Vec::with_capacity(n_total);
    let mut t = rng.gen_range(20.0..40.0);
    for _ in 0..n_total {
        base.push(t);
        t += rng.gen_range(15.0..60.0);
    }
    let n_lib = rng.gen_range(1..=5usize);
    let runs: Vec<rttmatch::PeakList> = (0..n_lib)
        .map(|k| {
            let a = rng.gen_range(0.97..1.03);
            let b = rng.gen_range(-3.0..3.0);
            let rts: Vec<f64> = base
                .iter()
                .map(|&x| a * x + b + rng.gen_range(-1.0..1.0))
                .collect();
            let mut rts = rts;
            rts.sort_by(|p, q| p.partial_cmp(q).unwrap());
            for i in 1..rts.len() {
                if rts[i] <= rts[i - 1] {
                    rts[i] = rts[i - 1] + 0.1;
                }
            }
            rttmatch::PeakList::from_rts(format!("r{k}"), &rts).unwrap()
        })
        .collect();
    let lib = rttmatch::library::build_library(&runs, &catalog).unwrap();

    // Sample: held-out drift of the base, a random subset of targets plus
    // every standard, with a chance of one foreign peak.
    let a = rng.gen_range(0.97..1.03);
    let b = rng.gen_range(-3.0..3.0);
    let drifted: Vec<f64> = base.iter().map(|&x| a * x + b).collect();
    let mut standards = BTreeMap::new();
    for &p in std_positions {
        standards.insert(p as u32, drifted[p]);
    }
    let mut unknowns = Vec::new();
    for id in catalog.target_ids() {
        if rng.gen_bool(0.6) {
            unknowns.push(drifted[id as usize] + rng.gen_range(-2.0..2.0));
        }
    }
    if rng.gen_bool(0.3) {
        unknowns.push(rng.gen_range(30.0..400.0));
    }
    unknowns.sort_by(|p, q| p.partial_cmp(q).unwrap());
    unknowns.dedup_by(|p, q| (*p - *q).abs() < 1e-9);
    // Drop unknowns colliding with a standard rt (standards are bound
    // separately in this representation).
    unknowns.retain(|u| standards.values().all(|s| (u - s).abs() > 1e-9));
    if unknowns.is_empty() {
        unknowns.push(drifted[catalog.target_ids()[0] as usize]);
    }

    RandomInstance {
        lib,
        sample: SamplePeaks::new(standards, unknowns).unwrap(),
    }
}
