//! Exponentially modified Gaussian peaks: evaluation, least-squares
//! fitting, reconstruction, and apex-shifting chromatogram alignment.
//!
//! The EMG is an area-parameterized Gaussian convolved with a one-sided
//! exponential decay of time constant `tau`. Evaluation uses the scaled
//! complementary error function on the leading flank so small `tau`
//! (nearly symmetric peaks) stays finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::Rtt;
use crate::matcher::{MatchResult, PeakLabel};
use crate::peaklist::SamplePeaks;
use crate::preprocess::{detect_peaks, Chromatogram, DetectedPeak};

/// Complementary error function (rational Chebyshev fit, |rel err| < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.5 * x.abs());
    let poly = -1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277))))))));
    let ans = t * (-x * x + poly).exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// exp(x^2) * erfc(x) for x >= 0, without forming exp(x^2).
fn erfcx_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let t = 1.0 / (1.0 + 0.5 * x);
    let poly = -1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277))))))));
    t * poly.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgPeak {
    /// Peak area, signal * seconds.
    pub area: f64,
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl EmgPeak {
    pub fn new(area: f64, mu: f64, sigma: f64, tau: f64) -> Result<Self> {
        if !(area > 0.0 && sigma > 0.0 && tau > 0.0) && mu.is_finite() {
            return Err(Error::validation(format!(
                "EMG parameters must be positive (area {area}, sigma {sigma}, tau {tau})"
            )));
        }
        Ok(EmgPeak {
            area,
            mu,
            sigma,
            tau,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let d = (t - self.mu) / self.sigma;
        let v = (self.sigma / self.tau - d) / std::f64::consts::SQRT_2;
        let k = self.area / (2.0 * self.tau);
        if v >= 0.0 {
            // exp(u)*erfc(v) == exp(-d^2/2)*erfcx(v); finite for any tau.
            k * (-d * d / 2.0).exp() * erfcx_nonneg(v)
        } else {
            // Trailing flank: u < 0 here, so the direct form is safe.
            let u = self.sigma * self.sigma / (2.0 * self.tau * self.tau)
                - (t - self.mu) / self.tau;
            k * u.exp() * erfc(v)
        }
    }

    /// Apex position, found numerically (the EMG mode has no closed form).
    pub fn mode(&self) -> f64 {
        let lo = self.mu - 2.0 * self.sigma;
        let hi = self.mu + 2.0 * (self.sigma + self.tau);
        // Golden-section on the unimodal peak.
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (self.eval(c), self.eval(d));
        for _ in 0..200 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.eval(d);
            }
            if (b - a).abs() < 1e-10 * (1.0 + self.sigma) {
                break;
            }
        }
        (a + b) / 2.0
    }

    /// Copy translated so the apex lands at `target_apex`.
    pub fn shifted_to(&self, target_apex: f64) -> EmgPeak {
        let mut out = self.clone();
        out.mu += target_apex - self.mode();
        out
    }
}

/// Output grid for reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    pub fn of(chrom: &Chromatogram) -> Grid {
        Grid {
            t0: chrom.t0,
            dt: chrom.dt,
            n: chrom.len(),
        }
    }
}

/// Pointwise sum of EMG evaluations over the grid.
pub fn reconstruct(peaks: &[EmgPeak], grid: Grid) -> Result<Chromatogram> {
    let signal: Vec<f64> = (0..grid.n)
        .map(|i| {
            let t = grid.t0 + grid.dt * i as f64;
            peaks.iter().map(|p| p.eval(t)).sum()
        })
        .collect();
    Chromatogram::new(grid.t0, grid.dt, signal)
}

pub struct EmgFit {
    pub peak: EmgPeak,
    pub residual_rms: f64,
}

fn sse(params: &[f64; 4], ts: &[f64], ys: &[f64]) -> f64 {
    let peak = EmgPeak {
        mu: params[0],
        sigma: params[1].exp(),
        tau: params[2].exp(),
        area: params[3].exp(),
    };
    ts.iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let r = peak.eval(t) - y;
            r * r
        })
        .sum()
}

/// Nelder-Mead over (mu, ln sigma, ln tau, ln area).
fn nelder_mead(
    start: [f64; 4],
    ts: &[f64],
    ys: &[f64],
    max_iter: usize,
) -> ([f64; 4], f64) {
    let n = 4;
    let mut simplex: Vec<[f64; 4]> = vec![start];
    for i in 0..n {
        let mut v = start;
        v[i] += if i == 0 { 0.5 * start[1].exp() } else { 0.25 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| sse(p, ts, ys)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (values[worst] - values[best]).abs()
            <= 1e-14 * (values[best].abs() + 1e-300)
        {
            break;
        }
        let mut centroid = [0.0; 4];
        for &i in &order[..n] {
            for k in 0..n {
                centroid[k] += simplex[i][k] / n as f64;
            }
        }
        let mut reflect = [0.0; 4];
        for k in 0..n {
            reflect[k] = centroid[k] + (centroid[k] - simplex[worst][k]);
        }
        let fr = sse(&reflect, ts, ys);
        if fr < values[best] {
            let mut expand = [0.0; 4];
            for k in 0..n {
                expand[k] = centroid[k] + 2.0 * (centroid[k] - simplex[worst][k]);
            }
            let fe = sse(&expand, ts, ys);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let mut contract = [0.0; 4];
            for k in 0..n {
                contract[k] = centroid[k] + 0.5 * (simplex[worst][k] - centroid[k]);
            }
            let fc = sse(&contract, ts, ys);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best];
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for k in 0..n {
                        simplex[i][k] = anchor[k] + 0.5 * (simplex[i][k] - anchor[k]);
                    }
                    values[i] = sse(&simplex[i], ts, ys);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best], values[best])
}

/// Least-squares EMG fit over a sample-index region containing one apex.
pub fn fit_emg(
    chrom: &Chromatogram,
    region: std::ops::Range<usize>,
) -> Result<EmgFit> {
    let lo = region.start;
    let hi = region.end.min(chrom.len());
    if hi.saturating_sub(lo) < 5 {
        return Err(Error::validation("fit region needs at least 5 samples"));
    }
    let ts: Vec<f64> = (lo..hi).map(|i| chrom.time(i)).collect();
    let ys: Vec<f64> = chrom.signal[lo..hi].to_vec();
    let n_pts = ys.len() as f64;

    let area: f64 = ys.iter().sum::<f64>() * chrom.dt;
    let max_y = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(area > 0.0) || !(max_y > 0.0) {
        return Err(Error::NonConvergence {
            msg: "region has no positive signal mass".into(),
            rms: (ys.iter().map(|y| y * y).sum::<f64>() / n_pts).sqrt(),
        });
    }

    // Moment-based start: mean = mu + tau, var = sigma^2 + tau^2,
    // third central moment = 2 tau^3.
    let mass: f64 = ys.iter().sum();
    let mean: f64 = ts.iter().zip(&ys).map(|(t, y)| t * y).sum::<f64>() / mass;
    let var: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (t - mean) * (t - mean) * y)
        .sum::<f64>()
        / mass;
    let m3: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (t - mean).powi(3) * y)
        .sum::<f64>()
        / mass;
    let tau0 = (m3.max(1e-12) / 2.0).cbrt().max(chrom.dt * 0.05);
    let sigma0 = (var - tau0 * tau0).max(chrom.dt * chrom.dt * 0.01).sqrt();
    let start = [mean - tau0, sigma0.ln(), tau0.ln(), area.ln()];

    let (params, best_sse) = nelder_mead(start, &ts, &ys, 4000);
    // Polish from the first optimum; NM can stall on a flat valley.
    let (params, best_sse2) = {
        let (p2, s2) = nelder_mead(params, &ts, &ys, 4000);
        if s2 < best_sse {
            (p2, s2)
        } else {
            (params, best_sse)
        }
    };

    let peak = EmgPeak::new(
        params[3].exp(),
        params[0],
        params[1].exp(),
        params[2].exp(),
    )?;
    let rms = (best_sse2 / n_pts).sqrt();
    if !rms.is_finite() || rms > 0.25 * max_y {
        return Err(Error::NonConvergence {
            msg: format!(
                "best parameters area={:.4} mu={:.4} sigma={:.4} tau={:.4}",
                peak.area, peak.mu, peak.sigma, peak.tau
            ),
            rms,
        });
    }
    Ok(EmgFit {
        peak,
        residual_rms: rms,
    })
}

/// Fit every detected peak of the sample trace, shift each identified
/// peak's apex onto the reference rt of its assigned compound, and
/// reconstruct on `grid`. Interferent peaks are not shifted; peaks that
/// resist EMG fitting are passed through as symmetric Gaussians built
/// from apex, height and endpoint width.
pub fn align_chromatogram(
    sample_chrom: &Chromatogram,
    sample: &SamplePeaks,
    result: &MatchResult,
    reference: &Rtt,
    grid: Grid,
) -> Result<Chromatogram> {
    let top = result
        .top()
        .ok_or_else(|| Error::NoAssignment("empty match result".into()))?;
    let detected = detect_peaks(sample_chrom, 3.0, sample_chrom.dt);
    if detected.is_empty() {
        return Err(Error::validation("no peaks detected in sample chromatogram"));
    }

    // Target apex per detected peak: standards and identified targets move
    // to the reference rt; interferents and unmatched detections stay put.
    let mut shifted = Vec::with_capacity(detected.len());
    for det in &detected {
        let target_apex = apex_target(det.rt, sample, top, reference);
        let emg = match fit_emg(sample_chrom, det.left..det.right + 1) {
            Ok(fit) => fit.peak,
            Err(_) => gaussian_fallback(det, sample_chrom),
        };
        shifted.push(match target_apex {
            Some(rt) => emg.shifted_to(rt),
            None => emg,
        });
    }
    reconstruct(&shifted, grid)
}

fn apex_target(
    rt: f64,
    sample: &SamplePeaks,
    top: &crate::matcher::RankedEntry,
    reference: &Rtt,
) -> Option<f64> {
    let eps = 1e-6;
    for (&sid, &std_rt) in &sample.standards {
        if (rt - std_rt).abs() < eps {
            return Some(reference.rt(sid));
        }
    }
    for (label, &u_rt) in top.assignment.labels.iter().zip(&sample.unknowns) {
        if (rt - u_rt).abs() < eps {
            return match *label {
                PeakLabel::Target(id) => Some(reference.rt(id)),
                PeakLabel::Interferent => None,
            };
        }
    }
    None
}

fn gaussian_fallback(det: &DetectedPeak, chrom: &Chromatogram) -> EmgPeak {
    let width = ((det.right - det.left).max(2) as f64) * chrom.dt;
    let sigma = width / 6.0;
    EmgPeak {
        area: det.height * sigma * (2.0 * std::f64::consts::PI).sqrt(),
        mu: det.rt,
        sigma,
        tau: sigma / 100.0,
    }
}
