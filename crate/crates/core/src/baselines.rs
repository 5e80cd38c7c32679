//! Reference aligners for comparison against trajectory matching:
//! internal-standard piecewise-linear warping and segment-wise
//! correlation optimized warping (COW).

use crate::error::{Error, Result};
use crate::peaklist::PeakList;
use crate::preprocess::Chromatogram;

/// Piecewise-affine retention-time map through standard anchor points.
/// The origin (0,0) is an implicit first anchor, so the first segment is a
/// pure rescale; times past the last anchor extrapolate with the last
/// interior segment's slope.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWarp {
    /// (sample rt, reference rt) pairs, including the leading (0,0).
    pub anchors: Vec<(f64, f64)>,
}

impl LinearWarp {
    pub fn from_standards(sample_stds: &[f64], ref_stds: &[f64]) -> Result<Self> {
        if sample_stds.is_empty() || sample_stds.len() != ref_stds.len() {
            return Err(Error::validation(format!(
                "need equal, nonempty standard lists (got {} and {})",
                sample_stds.len(),
                ref_stds.len()
            )));
        }
        let mut anchors = vec![(0.0, 0.0)];
        anchors.extend(sample_stds.iter().copied().zip(ref_stds.iter().copied()));
        for w in anchors.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 < w[1].1) {
                return Err(Error::OrderViolation(format!(
                    "standard anchors not strictly increasing: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(LinearWarp { anchors })
    }

    pub fn apply(&self, rt: f64) -> f64 {
        let n = self.anchors.len();
        // Segment index: the last anchor at or below rt, clamped so that
        // times past the final anchor reuse the last interior slope.
        let mut k = 0;
        while k + 2 < n && rt > self.anchors[k + 1].0 {
            k += 1;
        }
        let (x0, y0) = self.anchors[k];
        let (x1, y1) = self.anchors[k + 1];
        y0 + (rt - x0) * (y1 - y0) / (x1 - x0)
    }
}

/// Warp every peak rt through the standards-anchored piecewise map.
pub fn linear_warp(peaks: &[f64], sample_stds: &[f64], ref_stds: &[f64]) -> Result<Vec<f64>> {
    let warp = LinearWarp::from_standards(sample_stds, ref_stds)?;
    Ok(peaks.iter().map(|&rt| warp.apply(rt)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CowConfig {
    /// Reference segment length in samples.
    pub segment_length: usize,
    /// Maximum boundary shift in samples.
    pub slack: usize,
    /// Correlation power p: benefit per segment is corr^p.
    pub power: u32,
}

impl Default for CowConfig {
    fn default() -> Self {
        CowConfig {
            segment_length: 50,
            slack: 5,
            power: 1,
        }
    }
}

impl CowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_length <= 2 * self.slack {
            return Err(Error::validation(format!(
                "segment_length {} must exceed 2*slack ({})",
                self.segment_length,
                2 * self.slack
            )));
        }
        if self.power == 0 {
            return Err(Error::validation("correlation power must be >= 1"));
        }
        Ok(())
    }
}

/// Pearson correlation of two equal-length slices; degenerate segments fall
/// back to 1 (both constant) or 0 (one constant) so flat baselines neither
/// reward nor punish a shift.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let eps = 1e-12 * n;
    match (saa <= eps, sbb <= eps) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => sab / (saa * sbb).sqrt(),
    }
}

/// Linear resample of `signal[from..=to]` onto `len` points.
fn resample(signal: &[f64], from: usize, to: usize, len: usize) -> Vec<f64> {
    debug_assert!(to > from && len >= 2);
    let span = (to - from) as f64;
    (0..len)
        .map(|i| {
            let x = from as f64 + span * i as f64 / (len - 1) as f64;
            let j = (x.floor() as usize).min(signal.len() - 2);
            let frac = x - j as f64;
            signal[j] * (1.0 - frac) + signal[j + 1] * frac
        })
        .collect()
}

pub struct CowResult {
    pub warped: Chromatogram,
    /// Sample indices chosen for each reference segment boundary.
    pub path: Vec<usize>,
    pub benefit: f64,
}

/// Correlation optimized warping by dynamic programming. The reference is
/// cut into fixed segments; each interior sample boundary may deviate from
/// its nominal position by at most `slack` samples. The warped sample is the
/// piecewise-linear resampling along the best boundary path; endpoints are
/// pinned.
pub fn cow_align(
    sample: &Chromatogram,
    reference: &Chromatogram,
    cfg: CowConfig,
) -> Result<CowResult> {
    cfg.validate()?;
    let n_ref = reference.len();
    let n_samp = sample.len();
    if n_ref < cfg.segment_length + 1 {
        return Err(Error::validation(format!(
            "reference ({n_ref} samples) shorter than one segment ({})",
            cfg.segment_length
        )));
    }

    // Reference boundaries: multiples of segment_length, last boundary at
    // the end (final segment may be shorter, but must stay > 2*slack).
    let mut ref_bounds = vec![0usize];
    let mut b = cfg.segment_length;
    while b < n_ref - 1 {
        ref_bounds.push(b);
        b += cfg.segment_length;
    }
    ref_bounds.push(n_ref - 1);
    let n_seg = ref_bounds.len() - 1;
    if ref_bounds[n_seg] - ref_bounds[n_seg - 1] <= 2 * cfg.slack {
        // Merge a too-short tail into the previous segment.
        ref_bounds.remove(n_seg - 1);
    }
    let n_seg = ref_bounds.len() - 1;

    // Nominal sample boundaries scale the whole sample onto the reference.
    let nominal: Vec<f64> = ref_bounds
        .iter()
        .map(|&rb| rb as f64 * (n_samp - 1) as f64 / (n_ref - 1) as f64)
        .collect();
    let slack = cfg.slack as isize;

    // Allowed sample positions per boundary (endpoints fixed).
    let positions: Vec<Vec<usize>> = (0..=n_seg)
        .map(|k| {
            if k == 0 {
                vec![0]
            } else if k == n_seg {
                vec![n_samp - 1]
            } else {
                let base = nominal[k].round() as isize;
                (-slack..=slack)
                    .map(|d| base + d)
                    .filter(|&p| p > 0 && (p as usize) < n_samp - 1)
                    .map(|p| p as usize)
                    .collect()
            }
        })
        .collect();
    if positions.iter().any(|v| v.is_empty()) {
        return Err(Error::validation(
            "slack window leaves a boundary with no feasible sample position",
        ));
    }

    // DP over boundaries: value[k][i] = best benefit reaching position i of
    // boundary k from the start.
    let neg = f64::NEG_INFINITY;
    let mut value: Vec<Vec<f64>> = positions.iter().map(|v| vec![neg; v.len()]).collect();
    let mut back: Vec<Vec<usize>> = positions.iter().map(|v| vec![0; v.len()]).collect();
    value[0][0] = 0.0;
    for k in 1..=n_seg {
        let seg_len = ref_bounds[k] - ref_bounds[k - 1] + 1;
        let ref_seg = &reference.signal[ref_bounds[k - 1]..=ref_bounds[k]];
        for (i, &pi) in positions[k].iter().enumerate() {
            for (j, &pj) in positions[k - 1].iter().enumerate() {
                if pj >= pi || value[k - 1][j] == neg {
                    continue;
                }
                let warped_seg = resample(&sample.signal, pj, pi, seg_len);
                let corr = pearson(&warped_seg, ref_seg);
                let gain = corr.powi(cfg.power as i32);
                let total = value[k - 1][j] + gain;
                if total > value[k][i] {
                    value[k][i] = total;
                    back[k][i] = j;
                }
            }
        }
    }
    if value[n_seg][0] == neg {
        return Err(Error::NoAssignment(
            "no monotone boundary path fits the slack constraints".into(),
        ));
    }

    // Trace the path and build the warped signal segment by segment.
    let mut idx = vec![0usize; n_seg + 1];
    for k in (1..=n_seg).rev() {
        idx[k - 1] = back[k][idx[k]];
    }
    let path: Vec<usize> = idx
        .iter()
        .enumerate()
        .map(|(k, &i)| positions[k][i])
        .collect();

    let mut warped = vec![0.0; n_ref];
    for k in 1..=n_seg {
        let seg_len = ref_bounds[k] - ref_bounds[k - 1] + 1;
        let seg = resample(&sample.signal, path[k - 1], path[k], seg_len);
        warped[ref_bounds[k - 1]..=ref_bounds[k]].copy_from_slice(&seg);
    }
    Ok(CowResult {
        warped: Chromatogram::new(reference.t0, reference.dt, warped)?,
        path,
        benefit: value[n_seg][0],
    })
}

/// Per-peak identification outcome after a baseline warp.
#[derive(Debug, Clone, PartialEq)]
pub enum WarpIdent {
    /// Inherited the label of the unique reference peak within tolerance.
    Compound(u32),
    /// No reference peak within tolerance.
    Interferent,
    /// Two or more reference peaks within tolerance; counts as a miss.
    Ambiguous,
}

/// Label warped peaks by proximity to a labeled reference run: a peak
/// inherits the compound of the unique reference peak within ±tol, becomes
/// an interferent when none is near, and is a misidentification when the
/// tolerance window holds several reference peaks.
pub fn identify_after_warp(
    warped_peaks: &[f64],
    reference: &PeakList,
    tol: f64,
) -> Result<Vec<WarpIdent>> {
    if !(tol > 0.0) {
        return Err(Error::validation("tolerance must be > 0"));
    }
    let labeled: Vec<(f64, u32)> = reference
        .peaks
        .iter()
        .filter_map(|p| p.compound.map(|c| (p.rt, c)))
        .collect();
    if labeled.is_empty() {
        return Err(Error::validation("reference peak list carries no labels"));
    }
    Ok(warped_peaks
        .iter()
        .map(|&rt| {
            let near: Vec<u32> = labeled
                .iter()
                .filter(|(r, _)| (r - rt).abs() <= tol)
                .map(|&(_, c)| c)
                .collect();
            match near.len() {
                0 => WarpIdent::Interferent,
                1 => WarpIdent::Compound(near[0]),
                _ => WarpIdent::Ambiguous,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::peaklist::{assign_by_elution, CatalogEntry, CompoundCatalog, CompoundRole, PeakList};

    const STDS_SAMPLE: [f64; 2] = [281.4, 494.5];
    const STDS_REF: [f64; 2] = [275.8, 490.5];

    #[test]
    fn first_segment_is_pure_rescale() {
        let out = linear_warp(&[87.9], &STDS_SAMPLE, &STDS_REF).unwrap();
        let expected = 87.9 * 275.8 / 281.4;
        assert!((out[0] - expected).abs() < 1e-12);
        assert!((out[0] - 86.15).abs() < 0.005, "got {}", out[0]);
    }

    #[test]
    fn interior_interpolation() {
        let out = linear_warp(&[384.8, 340.0], &STDS_SAMPLE, &STDS_REF).unwrap();
        assert!((out[0] - 380.0).abs() < 0.05, "got {}", out[0]);
        assert!((out[1] - 334.84).abs() < 0.005, "got {}", out[1]);
    }

    #[test]
    fn standards_map_exactly() {
        let warp = LinearWarp::from_standards(&STDS_SAMPLE, &STDS_REF).unwrap();
        assert_eq!(warp.apply(281.4), 275.8);
        assert_eq!(warp.apply(494.5), 490.5);
    }

    #[test]
    fn identity_when_standards_agree() {
        let peaks = [10.0, 100.0, 300.0, 600.0];
        let out = linear_warp(&peaks, &[200.0, 500.0], &[200.0, 500.0]).unwrap();
        for (a, b) in out.iter().zip(&peaks) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn extrapolation_uses_last_interior_slope() {
        // Past 494.5, slope stays (490.5-275.8)/(494.5-281.4).
        let warp = LinearWarp::from_standards(&STDS_SAMPLE, &STDS_REF).unwrap();
        let slope = (490.5 - 275.8) / (494.5 - 281.4);
        let expected = 490.5 + (600.0 - 494.5) * slope;
        assert!((warp.apply(600.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn monotone_on_random_inputs() {
        let warp = LinearWarp::from_standards(&STDS_SAMPLE, &STDS_REF).unwrap();
        let mut prev = f64::NEG_INFINITY;
        let mut t = 1.0;
        while t < 700.0 {
            let w = warp.apply(t);
            assert!(w > prev);
            prev = w;
            t += 0.7;
        }
    }

    #[test]
    fn non_monotone_standards_rejected() {
        assert!(matches!(
            linear_warp(&[1.0], &[300.0, 200.0], &[300.0, 400.0]),
            Err(Error::OrderViolation(_))
        ));
    }

    fn gaussian_trace(center: f64, n: usize) -> Chromatogram {
        let signal: Vec<f64> = (0..n)
            .map(|i| (-((i as f64 - center) / 6.0).powi(2) / 2.0).exp())
            .collect();
        Chromatogram::new(0.0, 1.0, signal).unwrap()
    }

    #[test]
    fn cow_identity_path_for_equal_traces() {
        let r = gaussian_trace(100.0, 200);
        let cfg = CowConfig { segment_length: 50, slack: 5, power: 1 };
        let out = cow_align(&r, &r, cfg).unwrap();
        let n_seg = out.path.len() - 1;
        assert!((out.benefit - n_seg as f64).abs() < 1e-9, "benefit {}", out.benefit);
        for w in out.path.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn cow_zero_slack_is_plain_resample() {
        let r = gaussian_trace(100.0, 200);
        let s = gaussian_trace(103.0, 200);
        let cfg = CowConfig { segment_length: 50, slack: 0, power: 1 };
        let out = cow_align(&s, &r, cfg).unwrap();
        // Same length: no freedom, warped equals the input.
        for (a, b) in out.warped.signal.iter().zip(&s.signal) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cow_recovers_three_sample_shift() {
        let r = gaussian_trace(100.0, 200);
        let s = gaussian_trace(103.0, 200);
        let cfg = CowConfig { segment_length: 50, slack: 5, power: 1 };
        let out = cow_align(&s, &r, cfg).unwrap();
        let argmax = |c: &Chromatogram| {
            c.signal
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let err = (argmax(&out.warped) as isize - argmax(&r) as isize).abs();
        assert!(err <= 1, "apex error {err} samples");
    }

    /// Exhaustive path-search oracle on a small instance: the DP optimum
    /// must equal the best benefit over every monotone boundary choice.
    #[test]
    fn cow_dp_matches_exhaustive_oracle() {
        let r = gaussian_trace(60.0, 120);
        let s = gaussian_trace(63.0, 120);
        let cfg = CowConfig { segment_length: 40, slack: 3, power: 1 };
        let out = cow_align(&s, &r, cfg).unwrap();

        // Rebuild boundary structure exactly as cow_align does.
        let ref_bounds = vec![0usize, 40, 80, 119];
        let n_samp = s.len();
        let n_ref = r.len();
        let mut best = f64::NEG_INFINITY;
        let nominal: Vec<f64> = ref_bounds
            .iter()
            .map(|&rb| rb as f64 * (n_samp - 1) as f64 / (n_ref - 1) as f64)
            .collect();
        let opts = |k: usize| -> Vec<usize> {
            if k == 0 {
                vec![0]
            } else if k == 3 {
                vec![n_samp - 1]
            } else {
                let base = nominal[k].round() as isize;
                (-3..=3isize)
                    .map(|d| base + d)
                    .filter(|&p| p > 0 && (p as usize) < n_samp - 1)
                    .map(|p| p as usize)
                    .collect()
            }
        };
        for &b1 in &opts(1) {
            for &b2 in &opts(2) {
                if !(0 < b1 && b1 < b2 && b2 < n_samp - 1) {
                    continue;
                }
                let path = [0usize, b1, b2, n_samp - 1];
                let mut benefit = 0.0;
                for k in 1..4 {
                    let seg_len = ref_bounds[k] - ref_bounds[k - 1] + 1;
                    let seg = resample(&s.signal, path[k - 1], path[k], seg_len);
                    benefit += pearson(&seg, &r.signal[ref_bounds[k - 1]..=ref_bounds[k]]);
                }
                best = best.max(benefit);
            }
        }
        assert!((out.benefit - best).abs() < 1e-9, "{} vs {}", out.benefit, best);
    }

    #[test]
    fn cow_invalid_config_rejected() {
        let r = gaussian_trace(50.0, 100);
        let cfg = CowConfig { segment_length: 10, slack: 5, power: 1 };
        assert!(cow_align(&r, &r, cfg).is_err());
    }

    fn chrom1_reference() -> PeakList {
        let rts = [
            13.9, 19.0, 23.7, 33.6, 43.9, 53.6, 86.2, 94.4, 109.2, 115.9, 140.2,
            184.8, 196.5, 214.4, 265.2, 275.8, 382.1, 413.4, 429.3, 441.8, 490.5,
            617.6,
        ];
        let catalog = CompoundCatalog::new(
            (0..22)
                .map(|i| CatalogEntry {
                    id: i as u32,
                    name: format!("c{i}"),
                    role: if i == 15 || i == 20 {
                        CompoundRole::Standard
                    } else {
                        CompoundRole::Target
                    },
                })
                .collect(),
        )
        .unwrap();
        let list = PeakList::from_rts("chrom1", &rts).unwrap();
        assign_by_elution(&list, &catalog).unwrap()
    }

    #[test]
    fn exact_hit_inherits_label() {
        let reference = chrom1_reference();
        let idents = identify_after_warp(&[86.2], &reference, 0.5).unwrap();
        assert_eq!(idents, vec![WarpIdent::Compound(6)]);
    }

    #[test]
    fn far_peak_is_interferent() {
        let reference = chrom1_reference();
        let idents = identify_after_warp(&[70.0], &reference, 0.5).unwrap();
        assert_eq!(idents, vec![WarpIdent::Interferent]);
    }

    #[test]
    fn crowded_window_is_ambiguous() {
        let reference = chrom1_reference();
        // 16.45 sits within 3 s of both 13.9 and 19.0.
        let idents = identify_after_warp(&[16.45], &reference, 3.0).unwrap();
        assert_eq!(idents, vec![WarpIdent::Ambiguous]);
    }

    /// Linear warping of a strongly drifted run only recovers the standards
    /// themselves: 2 of 7 peaks identified (28.6%). Identification here
    /// compares RTs for equality (tight tolerance), the protocol under
    /// which every warped target misses its reference RT.
    #[test]
    fn strong_drift_only_standards_survive() {
        let reference = chrom1_reference();
        // Five targets plus both standards from a later, drifted run.
        let sample = [87.9, 111.4, 218.6, 281.4, 384.8, 432.6, 494.5];
        let warped = linear_warp(&sample, &STDS_SAMPLE, &STDS_REF).unwrap();
        let idents = identify_after_warp(&warped, &reference, 0.01).unwrap();
        let hits = idents
            .iter()
            .filter(|i| matches!(i, WarpIdent::Compound(_)))
            .count();
        assert_eq!(hits, 2, "idents {idents:?}");
        // And the two survivors are exactly the standards.
        assert_eq!(idents[3], WarpIdent::Compound(15));
        assert_eq!(idents[6], WarpIdent::Compound(20));
        let accuracy = hits as f64 / sample.len() as f64;
        assert!((accuracy - 0.286).abs() < 0.001);
    }
}
