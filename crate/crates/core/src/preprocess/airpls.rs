//! Baseline estimation by adaptive iteratively reweighted penalized least
//! squares (airPLS). Each iterate solves `(W + lambda * D'D) z = W y` with
//! a second-difference penalty, then shifts weight onto points below the
//! current baseline.

use crate::error::Result;
use crate::preprocess::Chromatogram;

pub struct BaselineResult {
    /// Signal minus the estimated baseline.
    pub corrected: Chromatogram,
    pub baseline: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Symmetric pentadiagonal LDL^T solve for `(diag(w) + lambda * D'D) z = w.*y`.
fn smooth_solve(y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    // Bands of W + lambda*D'D (D = second difference operator).
    let mut a0 = vec![0.0; n];
    let mut a1 = vec![0.0; n.saturating_sub(1)];
    let mut a2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n {
        let stencil = if n < 3 {
            0.0
        } else if i == 0 || i == n - 1 {
            1.0
        } else if i == 1 || i == n - 2 {
            5.0
        } else {
            6.0
        };
        a0[i] = w[i] + lambda * stencil;
    }
    for (i, v) in a1.iter_mut().enumerate() {
        let stencil = if n < 3 {
            0.0
        } else if i == 0 || i == n - 2 {
            -2.0
        } else {
            -4.0
        };
        *v = lambda * stencil;
    }
    for v in a2.iter_mut() {
        *v = lambda;
    }

    // LDL^T with bandwidth 2.
    let mut d = vec![0.0; n];
    let mut l1 = vec![0.0; n.saturating_sub(1)];
    let mut l2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n {
        let mut di = a0[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        d[i] = di;
        if i + 1 < n {
            let mut v = a1[i];
            if i >= 1 {
                v -= l2[i - 1] * l1[i - 1] * d[i - 1];
            }
            l1[i] = v / d[i];
        }
        if i + 2 < n {
            l2[i] = a2[i] / d[i];
        }
    }

    // Solve L u = w.*y, then D, then L^T.
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut v = w[i] * y[i];
        if i >= 1 {
            v -= l1[i - 1] * z[i - 1];
        }
        if i >= 2 {
            v -= l2[i - 2] * z[i - 2];
        }
        z[i] = v;
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    for i in (0..n).rev() {
        if i + 1 < n {
            z[i] -= l1[i] * z[i + 1];
        }
        if i + 2 < n {
            z[i] -= l2[i] * z[i + 2];
        }
    }
    z
}

/// Subtract an airPLS-estimated baseline. On non-convergence the best
/// iterate is still returned, flagged in the result.
pub fn baseline_correct(
    chrom: &Chromatogram,
    lambda: f64,
    max_iter: usize,
) -> Result<BaselineResult> {
    if !(lambda > 0.0) {
        return Err(crate::error::Error::validation("lambda must be > 0"));
    }
    let y = &chrom.signal;
    let n = y.len();
    let abs_total: f64 = y.iter().map(|v| v.abs()).sum();
    let mut w = vec![1.0; n];
    let mut z = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=max_iter.max(1) {
        iterations = iter;
        z = smooth_solve(y, &w, lambda);
        let d: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| yi - zi).collect();
        let neg_sum: f64 = d.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
        if neg_sum < 0.001 * abs_total || abs_total == 0.0 {
            converged = true;
            break;
        }
        let max_neg = d
            .iter()
            .filter(|v| **v < 0.0)
            .fold(0.0_f64, |m, v| m.max(-v));
        for (wi, di) in w.iter_mut().zip(&d) {
            *wi = if *di >= 0.0 {
                0.0
            } else {
                ((iter as f64) * (-di) / neg_sum).exp()
            };
        }
        w[0] = ((iter as f64) * max_neg / neg_sum).exp();
        w[n - 1] = w[0];
    }

    let corrected: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| yi - zi).collect();
    Ok(BaselineResult {
        corrected: Chromatogram::new(chrom.t0, chrom.dt, corrected)?,
        baseline: z,
        converged,
        iterations,
    })
}
