//! Retention time trajectory (RTT) matching for targeted chromatographic analysis.
//!
//! A chromatogram is reduced to a list of peak retention times. Each measured
//! full-composition run defines a trajectory over a fixed compound catalog;
//! a library of such trajectories (optionally enriched by affine hybridization)
//! captures the drift envelope of the instrument. A sample's peaks are
//! identified by enumerating order-preserving assignments of peaks to target
//! compounds and ranking them by mean squared residual against the library.
//!
//! The crate also carries the supporting machinery: signal preprocessing
//! (baseline correction, smoothing, peak detection, EMG fitting), the
//! reference aligners used for comparison (internal-standard linear warping
//! and correlation optimized warping), validation test generation, and SVG
//! plotting.
//!
//! With the default `parallel` feature, library screening, enrichment and
//! batch evaluation distribute over a rayon thread pool; without it every
//! code path is sequential with identical (byte-deterministic) output.

pub mod baselines;
pub mod error;
mod exec;
pub mod library;
pub mod matcher;
pub mod peaklist;
pub mod plot;
pub mod preprocess;
pub mod report;
pub mod testgen;

pub use error::{Error, Result};
pub use exec::with_jobs;
pub use library::{Rtt, RttLibrary};
pub use matcher::{Assignment, MatchConfig, MatchResult, MatchScore, PeakLabel};
pub use peaklist::{CompoundCatalog, CompoundRole, Peak, PeakList, SamplePeaks};
pub use preprocess::{Chromatogram, EmgPeak};
