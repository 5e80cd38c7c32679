//! Validation-suite machinery: exact combinatorial test counting, subset
//! test generation with interferent injection, nonlinear drift simulation,
//! and batch accuracy evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::library::{Provenance, Rtt, RttLibrary};
use crate::matcher::{match_sample, MatchConfig, PeakLabel};
use crate::peaklist::{CompoundCatalog, PeakList, SamplePeaks};

/// Refuse exhaustive generation beyond this many tests; the counting path
/// stays exact at any scale.
pub const DEFAULT_GENERATION_BUDGET: u128 = 10_000_000;

/// One synthetic identification problem with known ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub sample: SamplePeaks,
    /// Expected label per unknown peak, in rt order.
    pub ground_truth: Vec<PeakLabel>,
    pub source: String,
}

impl TestCase {
    pub fn new(sample: SamplePeaks, ground_truth: Vec<PeakLabel>, source: String) -> Result<Self> {
        if ground_truth.len() != sample.unknowns.len() {
            return Err(Error::validation(format!(
                "{} ground-truth labels for {} unknown peaks",
                ground_truth.len(),
                sample.unknowns.len()
            )));
        }
        let ids: Vec<u32> = ground_truth
            .iter()
            .filter_map(|l| match l {
                PeakLabel::Target(id) => Some(*id),
                PeakLabel::Interferent => None,
            })
            .collect();
        for w in ids.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::OrderViolation(format!(
                    "ground-truth compounds {} and {} out of elution order",
                    w[0], w[1]
                )));
            }
        }
        Ok(TestCase {
            sample,
            ground_truth,
            source,
        })
    }
}

/// C(n, k) in exact u128 arithmetic (stepwise products divide exactly).
fn binomial(n: u32, k: u32) -> Result<u128> {
    if k > n {
        return Err(Error::validation(format!("subset size {k} exceeds {n} targets")));
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c
            .checked_mul(n as u128 - k as u128 + i)
            .ok_or_else(|| Error::validation("test count overflows 128 bits"))?
            / i;
    }
    Ok(c)
}

/// Exact test count: `n_chroms * sum over sizes of C(n_tgt, size)`.
pub fn count_tests(n_tgt: u32, sizes: &[u32], n_chroms: u64) -> Result<u128> {
    let mut total: u128 = 0;
    for &size in sizes {
        if size == 0 || size > n_tgt {
            return Err(Error::validation(format!(
                "subset size {size} outside 1..={n_tgt}"
            )));
        }
        total = total
            .checked_add(binomial(n_tgt, size)?)
            .ok_or_else(|| Error::validation("test count overflows 128 bits"))?;
    }
    total
        .checked_mul(n_chroms as u128)
        .ok_or_else(|| Error::validation("test count overflows 128 bits"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Every subset of every requested size, lexicographic order.
    Exhaustive,
    /// `n` subsets drawn uniformly without replacement (capped at the
    /// population when it is smaller), ChaCha-seeded.
    Random { n: usize, seed: u64 },
}

fn test_from_subset(
    labeled: &PeakList,
    catalog: &CompoundCatalog,
    subset: &[u32],
) -> Result<TestCase> {
    let rt_of: BTreeMap<u32, f64> = labeled
        .peaks
        .iter()
        .filter_map(|p| p.compound.map(|c| (c, p.rt)))
        .collect();
    let standards: BTreeMap<u32, f64> = catalog
        .standard_ids()
        .iter()
        .map(|&sid| (sid, rt_of[&sid]))
        .collect();
    let unknowns: Vec<f64> = subset.iter().map(|id| rt_of[id]).collect();
    let ground_truth: Vec<PeakLabel> = subset.iter().map(|&id| PeakLabel::Target(id)).collect();
    TestCase::new(
        SamplePeaks::new(standards, unknowns)?,
        ground_truth,
        format!("{}:{:?}", labeled.source_id, subset),
    )
}

/// Visit the chosen subset tests one at a time (exhaustive subsets in
/// lexicographic order, per size in the given order). `labeled` must carry
/// a compound label for every catalog entry.
pub fn for_each_subset_test(
    labeled: &PeakList,
    catalog: &CompoundCatalog,
    sizes: &[u32],
    sampling: &Sampling,
    mut visit: impl FnMut(TestCase) -> Result<()>,
) -> Result<()> {
    let targets = catalog.target_ids();
    for entry in &catalog.entries {
        if !labeled.peaks.iter().any(|p| p.compound == Some(entry.id)) {
            return Err(Error::validation(format!(
                "run `{}` carries no peak for compound {}",
                labeled.source_id, entry.id
            )));
        }
    }
    for &size in sizes {
        if size == 0 || size as usize > targets.len() {
            return Err(Error::validation(format!(
                "subset size {size} outside 1..={}",
                targets.len()
            )));
        }
    }

    match sampling {
        Sampling::Exhaustive => {
            for &size in sizes {
                let k = size as usize;
                // Lexicographic k-combinations of target indices.
                let mut idx: Vec<usize> = (0..k).collect();
                loop {
                    let subset: Vec<u32> = idx.iter().map(|&i| targets[i]).collect();
                    visit(test_from_subset(labeled, catalog, &subset)?)?;
                    if !next_combination(&mut idx, targets.len()) {
                        break;
                    }
                }
            }
            Ok(())
        }
        Sampling::Random { n, seed } => {
            let population = count_tests(targets.len() as u32, sizes, 1)?;
            let n = (*n as u128).min(population) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut seen = std::collections::BTreeSet::new();
            let mut sizes_pool: Vec<u32> = sizes.to_vec();
            while seen.len() < n {
                sizes_pool.shuffle(&mut rng);
                let k = sizes_pool[0] as usize;
                let mut pool = targets.clone();
                pool.shuffle(&mut rng);
                let mut subset: Vec<u32> = pool[..k].to_vec();
                subset.sort_unstable();
                if seen.insert(subset.clone()) {
                    visit(test_from_subset(labeled, catalog, &subset)?)?;
                }
            }
            Ok(())
        }
    }
}

/// Advance `idx` to the next lexicographic k-combination of `0..n`;
/// returns false when the last combination has been visited.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] != i + n - k {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Collect subset tests, refusing exhaustive generation beyond `budget`
/// (default `DEFAULT_GENERATION_BUDGET`) with a hint to sample instead.
pub fn subset_tests(
    labeled: &PeakList,
    catalog: &CompoundCatalog,
    sizes: &[u32],
    sampling: &Sampling,
    budget: Option<u128>,
) -> Result<Vec<TestCase>> {
    if matches!(sampling, Sampling::Exhaustive) {
        let total = count_tests(catalog.n_targets() as u32, sizes, 1)?;
        let budget = budget.unwrap_or(DEFAULT_GENERATION_BUDGET);
        if total > budget {
            return Err(Error::validation(format!(
                "exhaustive generation of {total} tests exceeds the budget of \
                 {budget}; use random sampling with a seed instead"
            )));
        }
    }
    let mut out = Vec::new();
    for_each_subset_test(labeled, catalog, sizes, sampling, |t| {
        out.push(t);
        Ok(())
    })?;
    Ok(out)
}

/// Merge extra peaks into a test as ground-truth interferents.
pub fn inject_interferents(test: &TestCase, rts: &[f64]) -> Result<TestCase> {
    if rts.is_empty() {
        return Ok(test.clone());
    }
    let mut merged: Vec<(f64, PeakLabel)> = test
        .sample
        .unknowns
        .iter()
        .copied()
        .zip(test.ground_truth.iter().copied())
        .collect();
    for &rt in rts {
        let collides = merged.iter().any(|&(r, _)| r == rt)
            || test.sample.standards.values().any(|&r| r == rt);
        if collides {
            return Err(Error::validation(format!(
                "injected rt {rt} collides with an existing peak"
            )));
        }
        merged.push((rt, PeakLabel::Interferent));
    }
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (unknowns, ground_truth): (Vec<f64>, Vec<PeakLabel>) = merged.into_iter().unzip();
    TestCase::new(
        SamplePeaks::new(test.sample.standards.clone(), unknowns)?,
        ground_truth,
        format!("{}+interferents", test.source),
    )
}

/// Smooth nonlinear drift: `t -> a*t + b + sum of Gaussian bumps`. Stands
/// in for run-to-run variation; must be strictly increasing over the rt
/// range it is applied to (checked at use, never silently reordered).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    pub scale: f64,
    /// Offset in seconds.
    pub offset: f64,
    /// (center s, amplitude s, width s) Gaussian bumps.
    pub bumps: Vec<(f64, f64, f64)>,
    pub seed: u64,
}

impl DriftModel {
    pub fn identity() -> Self {
        DriftModel {
            scale: 1.0,
            offset: 0.0,
            bumps: Vec::new(),
            seed: 0,
        }
    }

    /// Seeded random model: scale within ±1%, offset within ±2 s, and two
    /// bumps with amplitude about 1% of the covered rt range.
    pub fn random(seed: u64, rt_lo: f64, rt_hi: f64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = rt_hi - rt_lo;
        let bumps = (0..2)
            .map(|_| {
                (
                    rng.gen_range(rt_lo..rt_hi),
                    rng.gen_range(-0.01..0.01) * span,
                    rng.gen_range(0.1..0.3) * span,
                )
            })
            .collect();
        DriftModel {
            scale: rng.gen_range(0.99..1.01),
            offset: rng.gen_range(-2.0..2.0),
            bumps,
            seed,
        }
    }

    pub fn apply(&self, t: f64) -> f64 {
        let mut out = self.scale * t + self.offset;
        for &(c, amp, w) in &self.bumps {
            out += amp * (-(t - c) * (t - c) / (2.0 * w * w)).exp();
        }
        out
    }
}

/// Map every compound rt of `base` through the drift model. The result is
/// re-validated; a model that inverts any adjacent pair is rejected with
/// the offending compounds named.
pub fn drift_simulate(base: &Rtt, model: &DriftModel) -> Result<Rtt> {
    let rts: Vec<f64> = base.rts.iter().map(|&t| model.apply(t)).collect();
    for (i, w) in rts.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(Error::OrderViolation(format!(
                "drift model inverts compounds {i} and {} ({} >= {})",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    Rtt::new(
        rts,
        Provenance::Measured {
            source_id: format!("drift(seed={})", model.seed),
        },
    )
}

/// Aggregate identification accuracy over a test suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_tests: usize,
    /// Mean per-peak accuracy of the rank-r result, r = 1..=4; tests
    /// without an r-th result contribute 0.
    pub per_rank_accuracy: Vec<f64>,
    /// Fraction of tests whose top result labels every peak correctly.
    pub top1_exact: f64,
    pub interferent_precision: f64,
    pub interferent_recall: f64,
    /// Tests whose top result flagged every peak as interferent.
    pub all_interferent_tests: usize,
    pub elapsed_seconds: f64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tests evaluated      {:>10}", self.n_tests);
        let _ = writeln!(s, "top-1 exact          {:>10.4}", self.top1_exact);
        for (r, acc) in self.per_rank_accuracy.iter().enumerate() {
            let _ = writeln!(s, "rank {} peak accuracy {:>10.4}", r + 1, acc);
        }
        let _ = writeln!(s, "interferent precision{:>10.4}", self.interferent_precision);
        let _ = writeln!(s, "interferent recall   {:>10.4}", self.interferent_recall);
        let _ = writeln!(s, "all-interferent tests{:>10}", self.all_interferent_tests);
        let _ = writeln!(s, "elapsed seconds      {:>10.3}", self.elapsed_seconds);
        s
    }
}

const EVAL_RANKS: usize = 4;

/// Match every test against the library and aggregate accuracy. Work is
/// parallel across tests; the merge is order-independent counting so the
/// report is deterministic.
pub fn evaluate(lib: &RttLibrary, tests: &[TestCase], cfg: &MatchConfig) -> Result<EvalReport> {
    for t in tests {
        for l in &t.ground_truth {
            if let PeakLabel::Target(id) = l {
                if *id as usize >= lib.catalog.len() {
                    return Err(Error::validation(format!(
                        "test `{}` references compound {id} outside the catalog",
                        t.source
                    )));
                }
            }
        }
    }
    let start = Instant::now();

    struct PerTest {
        rank_hits: [f64; EVAL_RANKS],
        exact: bool,
        all_interferent: bool,
        tp: usize,
        fp: usize,
        fn_: usize,
    }

    let per_test: Vec<Result<PerTest>> = exec::map_indexed(tests, |_, test| {
        let result = match_sample(&test.sample, lib, cfg)?;
        let n = test.ground_truth.len();
        let mut rank_hits = [0.0; EVAL_RANKS];
        for (r, hit) in rank_hits.iter_mut().enumerate() {
            if let Some(entry) = result.ranked.get(r) {
                let correct = entry
                    .assignment
                    .labels
                    .iter()
                    .zip(&test.ground_truth)
                    .filter(|(a, b)| a == b)
                    .count();
                *hit = correct as f64 / n as f64;
            }
        }
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        let mut all_interferent = false;
        if let Some(top) = result.top() {
            for (got, want) in top.assignment.labels.iter().zip(&test.ground_truth) {
                match (got, want) {
                    (PeakLabel::Interferent, PeakLabel::Interferent) => tp += 1,
                    (PeakLabel::Interferent, _) => fp += 1,
                    (_, PeakLabel::Interferent) => fn_ += 1,
                    _ => {}
                }
            }
            all_interferent = top.assignment.n_interferents() == n;
        } else {
            fn_ += test
                .ground_truth
                .iter()
                .filter(|l| **l == PeakLabel::Interferent)
                .count();
        }
        Ok(PerTest {
            rank_hits,
            exact: (rank_hits[0] - 1.0).abs() < 1e-12,
            all_interferent,
            tp,
            fp,
            fn_,
        })
    });

    let mut per_rank = [0.0; EVAL_RANKS];
    let (mut exact, mut all_interf) = (0usize, 0usize);
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for r in per_test {
        let r = r?;
        for (acc, hit) in per_rank.iter_mut().zip(&r.rank_hits) {
            *acc += hit;
        }
        exact += r.exact as usize;
        all_interf += r.all_interferent as usize;
        tp += r.tp;
        fp += r.fp;
        fn_ += r.fn_;
    }
    let n = tests.len().max(1) as f64;
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(EvalReport {
        n_tests: tests.len(),
        per_rank_accuracy: per_rank.iter().map(|a| a / n).collect(),
        top1_exact: exact as f64 / n,
        interferent_precision: ratio(tp, tp + fp),
        interferent_recall: ratio(tp, tp + fn_),
        all_interferent_tests: all_interf,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::build_library;
    use crate::peaklist::{assign_by_elution, CatalogEntry, CompoundRole};

    fn catalog(n_targets: usize, standards: &[usize]) -> CompoundCatalog {
        CompoundCatalog::new(
            (0..n_targets + standards.len())
                .map(|i| CatalogEntry {
                    id: i as u32,
                    name: format!("c{i}"),
                    role: if standards.contains(&i) {
                        CompoundRole::Standard
                    } else {
                        CompoundRole::Target
                    },
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn count_identity_c20_10() {
        assert_eq!(count_tests(20, &[10], 1).unwrap(), 184_756);
    }

    #[test]
    fn count_identity_large_suite() {
        // 16 * [C(40,40)+C(40,30)+C(40,20)+C(40,10)+C(40,5)], the 2.23e12
        // suite, exactly.
        let total = count_tests(40, &[40, 30, 20, 10, 5], 16).unwrap();
        assert_eq!(total, 2_232_680_126_160);
        assert!((total as f64 / 1e12 * 100.0).round() / 100.0 == 2.23);
    }

    #[test]
    fn count_identity_all_sizes_nine_runs() {
        let sizes: Vec<u32> = (1..=13).collect();
        assert_eq!(count_tests(13, &sizes, 9).unwrap(), 73_719);
    }

    #[test]
    fn count_all_sizes_is_power_of_two_minus_one() {
        for n in 1..=30u32 {
            let sizes: Vec<u32> = (1..=n).collect();
            assert_eq!(count_tests(n, &sizes, 1).unwrap(), (1u128 << n) - 1);
        }
    }

    #[test]
    fn count_rejects_out_of_range_size() {
        assert!(count_tests(5, &[6], 1).is_err());
        assert!(count_tests(5, &[0], 1).is_err());
    }

    fn labeled_run(rts: &[f64], catalog: &CompoundCatalog) -> PeakList {
        let list = PeakList::from_rts("run", rts).unwrap();
        assign_by_elution(&list, catalog).unwrap()
    }

    #[test]
    fn full_size_subset_is_the_whole_run() {
        let cat = catalog(3, &[3]);
        let run = labeled_run(&[10.0, 20.0, 30.0, 40.0], &cat);
        let tests = subset_tests(&run, &cat, &[3], &Sampling::Exhaustive, None).unwrap();
        assert_eq!(tests.len(), 1);
        assert_eq!(tests[0].sample.unknowns, vec![10.0, 20.0, 30.0]);
        assert_eq!(tests[0].sample.standards[&3], 40.0);
    }

    #[test]
    fn singletons_on_three_targets() {
        let cat = catalog(3, &[]);
        let run = labeled_run(&[10.0, 20.0, 30.0], &cat);
        let tests = subset_tests(&run, &cat, &[1], &Sampling::Exhaustive, None).unwrap();
        assert_eq!(tests.len(), 3);
        assert_eq!(tests[0].sample.unknowns, vec![10.0]);
        assert_eq!(tests[2].ground_truth, vec![PeakLabel::Target(2)]);
    }

    #[test]
    fn stream_length_matches_count() {
        let cat = catalog(7, &[7]);
        let run = labeled_run(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], &cat);
        for sizes in [vec![1u32], vec![3], vec![1, 2, 3], (1..=7).collect()] {
            let tests = subset_tests(&run, &cat, &sizes, &Sampling::Exhaustive, None).unwrap();
            assert_eq!(tests.len() as u128, count_tests(7, &sizes, 1).unwrap());
        }
    }

    /// Chrom8 rts: the subset of compounds {7,9,14,16,18} (ids 6,8,13,15,17)
    /// reproduces the five rts of the drifted five-target fixture.
    #[test]
    fn chrom8_subset_reproduces_fixture_rts() {
        let standards = [15usize, 20];
        let cat = catalog(20, &standards);
        let rts = [
            14.1, 19.2, 23.9, 34.1, 44.6, 54.6, 87.9, 96.2, 111.4, 118.2, 142.9,
            188.4, 200.4, 218.6, 270.3, 281.4, 384.8, 416.6, 432.6, 445.4, 494.5,
            620.3,
        ];
        let run = labeled_run(&rts, &cat);
        let tests = subset_tests(&run, &cat, &[5], &Sampling::Exhaustive, None).unwrap();
        let want_ids = [6u32, 8, 13, 16, 18];
        let hit = tests
            .iter()
            .find(|t| {
                t.ground_truth
                    == want_ids.iter().map(|&i| PeakLabel::Target(i)).collect::<Vec<_>>()
            })
            .expect("subset present in exhaustive stream");
        assert_eq!(hit.sample.unknowns, vec![87.9, 111.4, 218.6, 384.8, 432.6]);
        assert_eq!(hit.sample.standards[&15], 281.4);
        assert_eq!(hit.sample.standards[&20], 494.5);
    }

    #[test]
    fn random_sampling_is_seeded_and_capped() {
        let cat = catalog(4, &[]);
        let run = labeled_run(&[1.0, 2.0, 3.0, 4.0], &cat);
        let a = subset_tests(&run, &cat, &[2], &Sampling::Random { n: 3, seed: 9 }, None).unwrap();
        let b = subset_tests(&run, &cat, &[2], &Sampling::Random { n: 3, seed: 9 }, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        // n beyond the population (C(4,2)=6) is capped, not an error.
        let capped =
            subset_tests(&run, &cat, &[2], &Sampling::Random { n: 100, seed: 9 }, None).unwrap();
        assert_eq!(capped.len(), 6);
    }

    #[test]
    fn exhaustive_budget_is_enforced() {
        let cat = catalog(30, &[]);
        let rts: Vec<f64> = (1..=30).map(|i| i as f64 * 10.0).collect();
        let run = labeled_run(&rts, &cat);
        let sizes: Vec<u32> = (1..=30).collect();
        let err = subset_tests(&run, &cat, &sizes, &Sampling::Exhaustive, None).unwrap_err();
        assert!(err.to_string().contains("budget"));
    }

    #[test]
    fn inject_builds_interferent_fixture() {
        let cat = catalog(20, &[15, 20]);
        let rts = [
            14.1, 19.2, 23.9, 34.1, 44.6, 54.6, 87.9, 96.2, 111.4, 118.2, 142.9,
            188.4, 200.4, 218.6, 270.3, 281.4, 384.8, 416.6, 432.6, 445.4, 494.5,
            620.3,
        ];
        let run = labeled_run(&rts, &cat);
        let base = test_from_subset(&run, &cat, &[6, 8, 13, 16, 18]).unwrap();
        let with = inject_interferents(&base, &[340.0]).unwrap();
        assert_eq!(
            with.sample.unknowns,
            vec![87.9, 111.4, 218.6, 340.0, 384.8, 432.6]
        );
        assert_eq!(with.ground_truth[3], PeakLabel::Interferent);
    }

    #[test]
    fn inject_empty_is_identity() {
        let cat = catalog(2, &[]);
        let run = labeled_run(&[10.0, 20.0], &cat);
        let base = test_from_subset(&run, &cat, &[0, 1]).unwrap();
        assert_eq!(inject_interferents(&base, &[]).unwrap(), base);
    }

    #[test]
    fn inject_collision_errors() {
        let cat = catalog(2, &[]);
        let run = labeled_run(&[10.0, 20.0], &cat);
        let base = test_from_subset(&run, &cat, &[0, 1]).unwrap();
        assert!(inject_interferents(&base, &[20.0]).is_err());
    }

    #[test]
    fn drift_identity_and_offset() {
        let rtt = Rtt::new(
            vec![10.0, 20.0, 30.0],
            Provenance::Measured { source_id: "a".into() },
        )
        .unwrap();
        let same = drift_simulate(&rtt, &DriftModel::identity()).unwrap();
        assert_eq!(same.rts, rtt.rts);
        let mut shift = DriftModel::identity();
        shift.offset = 2.0;
        let moved = drift_simulate(&rtt, &shift).unwrap();
        assert_eq!(moved.rts, vec![12.0, 22.0, 32.0]);
    }

    #[test]
    fn drift_rejects_inversion() {
        let rtt = Rtt::new(
            vec![10.0, 10.2],
            Provenance::Measured { source_id: "a".into() },
        )
        .unwrap();
        // A sharp negative bump on the second compound flips the pair.
        let model = DriftModel {
            scale: 1.0,
            offset: 0.0,
            bumps: vec![(10.2, -1.0, 0.05)],
            seed: 0,
        };
        let err = drift_simulate(&rtt, &model).unwrap_err();
        assert!(matches!(err, Error::OrderViolation(_)));
    }

    #[test]
    fn drift_matches_direct_formula() {
        let model = DriftModel::random(42, 10.0, 600.0);
        let rtt = Rtt::new(
            vec![15.0, 120.0, 480.0],
            Provenance::Measured { source_id: "a".into() },
        )
        .unwrap();
        let out = drift_simulate(&rtt, &model).unwrap();
        for (i, &t) in rtt.rts.iter().enumerate() {
            let mut want = model.scale * t + model.offset;
            for &(c, a, w) in &model.bumps {
                want += a * (-(t - c) * (t - c) / (2.0 * w * w)).exp();
            }
            assert!((out.rts[i] - want).abs() < 1e-12);
        }
    }

    fn small_library() -> (RttLibrary, CompoundCatalog) {
        let cat = catalog(4, &[4]);
        let runs: Vec<PeakList> = (0..3)
            .map(|k| {
                let shift = k as f64 * 1.5;
                PeakList::from_rts(
                    format!("lib{k}"),
                    &[
                        50.0 + shift,
                        100.0 + shift,
                        150.0 + shift,
                        200.0 + shift,
                        300.0 + shift,
                    ],
                )
                .unwrap()
            })
            .collect();
        (build_library(&runs, &cat).unwrap(), cat)
    }

    #[test]
    fn evaluate_self_match_family_is_exact() {
        let (lib, cat) = small_library();
        let run = labeled_run(&[50.0, 100.0, 150.0, 200.0, 300.0], &cat);
        let sizes: Vec<u32> = (1..=4).collect();
        let tests = subset_tests(&run, &cat, &sizes, &Sampling::Exhaustive, None).unwrap();
        assert_eq!(tests.len(), 15);
        let report = evaluate(&lib, &tests, &MatchConfig::default()).unwrap();
        assert_eq!(report.top1_exact, 1.0);
        assert_eq!(report.per_rank_accuracy[0], 1.0);
        assert_eq!(report.all_interferent_tests, 0);
    }

    #[test]
    fn evaluate_window_starvation_flags_all_interferent() {
        let (lib, cat) = small_library();
        // Sample far outside any 0.01 s window.
        let run = labeled_run(&[60.0, 110.0, 160.0, 210.0, 300.0], &cat);
        let tests = subset_tests(&run, &cat, &[4], &Sampling::Exhaustive, None).unwrap();
        let cfg = MatchConfig {
            delta_t: 0.01,
            ..MatchConfig::default()
        };
        let report = evaluate(&lib, &tests, &cfg).unwrap();
        assert_eq!(report.top1_exact, 0.0);
        assert_eq!(report.all_interferent_tests, 1);
    }

    #[test]
    fn evaluate_rejects_foreign_compound_ids() {
        let (lib, _) = small_library();
        let test = TestCase::new(
            SamplePeaks::new(BTreeMap::new(), vec![50.0]).unwrap(),
            vec![PeakLabel::Target(99)],
            "bad".into(),
        )
        .unwrap();
        assert!(evaluate(&lib, &[test], &MatchConfig::default()).is_err());
    }

    #[test]
    fn report_text_renders() {
        let (lib, cat) = small_library();
        let run = labeled_run(&[50.0, 100.0, 150.0, 200.0, 300.0], &cat);
        let tests = subset_tests(&run, &cat, &[2], &Sampling::Exhaustive, None).unwrap();
        let report = evaluate(&lib, &tests, &MatchConfig::default()).unwrap();
        let text = report.to_text();
        assert!(text.contains("top-1 exact"));
        assert!(text.contains("interferent recall"));
    }
}
