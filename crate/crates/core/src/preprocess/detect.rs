//! Apex detection: local-maximum scan with a robust noise gate, 3-point
//! parabolic apex refinement, and endpoints at the surrounding minima.

use crate::error::Result;
use crate::peaklist::{Peak, PeakList};
use crate::preprocess::Chromatogram;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedPeak {
    /// Parabola-refined apex retention time, seconds.
    pub rt: f64,
    pub apex_index: usize,
    pub height: f64,
    /// Sample index of the nearest minimum left of the apex.
    pub left: usize,
    /// Sample index of the nearest minimum right of the apex.
    pub right: usize,
}

/// Robust noise scale: MAD of the first difference, scaled to the standard
/// deviation of the underlying noise (the difference doubles the variance).
fn noise_estimate(signal: &[f64]) -> f64 {
    if signal.len() < 3 {
        return 0.0;
    }
    let mut diffs: Vec<f64> = signal.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = diffs[diffs.len() / 2];
    let mut devs: Vec<f64> = diffs.iter().map(|d| (d - median).abs()).collect();
    devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    devs[devs.len() / 2] * 1.4826 / std::f64::consts::SQRT_2
}

/// Scan for local maxima above `min_snr * noise`, at least `min_separation`
/// seconds apart (higher apex wins).
pub fn detect_peaks(
    chrom: &Chromatogram,
    min_snr: f64,
    min_separation: f64,
) -> Vec<DetectedPeak> {
    let y = &chrom.signal;
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let threshold = min_snr * noise_estimate(y);

    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1] && y[i] > threshold && y[i] > 0.0)
        .collect();
    // Separation: keep the taller apex of any conflicting pair.
    candidates.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap().then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for i in candidates {
        let t_i = chrom.time(i);
        if accepted
            .iter()
            .all(|&j| (chrom.time(j) - t_i).abs() >= min_separation)
        {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();

    accepted
        .into_iter()
        .map(|i| {
            // 3-point parabola for sub-sample apex position.
            let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
            let delta = if denom.abs() > 0.0 {
                (0.5 * (y[i - 1] - y[i + 1]) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let mut left = i;
            while left > 0 && y[left - 1] < y[left] {
                left -= 1;
            }
            let mut right = i;
            while right + 1 < n && y[right + 1] < y[right] {
                right += 1;
            }
            DetectedPeak {
                rt: chrom.t0 + (i as f64 + delta) * chrom.dt,
                apex_index: i,
                height: y[i],
                left,
                right,
            }
        })
        .collect()
}

/// Detected apexes as a peak list (heights kept, labels empty).
pub fn to_peaklist(source_id: &str, peaks: &[DetectedPeak]) -> Result<PeakList> {
    PeakList::new(
        source_id,
        peaks
            .iter()
            .map(|p| Peak {
                rt: p.rt,
                height: Some(p.height),
                label: None,
                compound: None,
            })
            .collect(),
    )
}
