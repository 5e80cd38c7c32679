//! Raw-trace preprocessing: baseline correction, smoothing, apex detection,
//! EMG peak fitting, and chromatogram reconstruction/aligning.

mod airpls;
mod detect;
mod emg;
mod lowess;

pub use airpls::{baseline_correct, BaselineResult};
pub use detect::{detect_peaks, to_peaklist, DetectedPeak};
pub use emg::{align_chromatogram, fit_emg, reconstruct, EmgFit, EmgPeak, Grid};
pub use lowess::smooth;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled detector trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromatogram {
    pub t0: f64,
    pub dt: f64,
    pub signal: Vec<f64>,
}

impl Chromatogram {
    pub fn new(t0: f64, dt: f64, signal: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::validation("dt must be > 0"));
        }
        if signal.len() < 2 {
            return Err(Error::validation("chromatogram needs at least 2 samples"));
        }
        if signal.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("chromatogram contains non-finite values"));
        }
        Ok(Chromatogram { t0, dt, signal })
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Parse the two-column `t,signal` format; the time grid must be
    /// uniform within 1e-6 relative.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ts = Vec::new();
        let mut ys = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('t') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (t, y) = (parts.next(), parts.next());
            let (t, y) = match (t, y) {
                (Some(t), Some(y)) => (t, y),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected `t,signal`, got `{line}`"),
                    })
                }
            };
            ts.push(t.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid time `{t}`"),
            })?);
            ys.push(y.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid signal `{y}`"),
            })?);
        }
        if ts.len() < 2 {
            return Err(Error::Format("chromatogram needs at least 2 samples".into()));
        }
        let dt = ts[1] - ts[0];
        for (i, w) in ts.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > 1e-6 * dt.abs().max(1.0) {
                return Err(Error::Format(format!(
                    "non-uniform time grid near sample {i}: step {step} vs {dt}"
                )));
            }
        }
        Chromatogram::new(ts[0], dt, ys)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,signal\n");
        for (i, y) in self.signal.iter().enumerate() {
            let _ = writeln!(out, "{:.6},{}", self.time(i), y);
        }
        out
    }
}
