//! Locally weighted scatterplot smoothing (tricube-weighted local linear
//! regression over a sliding nearest-neighbor window).

use crate::error::{Error, Result};
use crate::preprocess::Chromatogram;

/// Smooth with window `span` (fraction of points, (0, 1]). The grid is
/// uniform so the nearest-neighbor window is contiguous.
pub fn smooth(chrom: &Chromatogram, span: f64) -> Result<Chromatogram> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::validation("span must be in (0, 1]"));
    }
    let n = chrom.len();
    let k = ((span * n as f64).ceil() as usize).min(n);
    if k < 3 {
        return Err(Error::validation(format!(
            "span {span} covers only {k} point(s); at least 3 required"
        )));
    }
    let y = &chrom.signal;
    let mut out = vec![0.0; n];
    for i in 0..n {
        // Contiguous window of k points centered on i, clamped to bounds.
        let half = k / 2;
        let lo = i.saturating_sub(half).min(n - k);
        let hi = lo + k;
        let xi = i as f64;
        let max_dist = ((i - lo).max(hi - 1 - i)) as f64;
        let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in lo..hi {
            let xj = j as f64;
            let u = if max_dist > 0.0 {
                ((xj - xi).abs() / max_dist).min(1.0)
            } else {
                0.0
            };
            let w = (1.0 - u * u * u).powi(3);
            sw += w;
            swx += w * xj;
            swy += w * y[j];
            swxx += w * xj * xj;
            swxy += w * xj * y[j];
        }
        let denom = sw * swxx - swx * swx;
        out[i] = if denom.abs() > 1e-12 * sw.max(1.0) {
            let slope = (sw * swxy - swx * swy) / denom;
            let intercept = (swy - slope * swx) / sw;
            intercept + slope * xi
        } else {
            swy / sw
        };
    }
    Chromatogram::new(chrom.t0, chrom.dt, out)
}
