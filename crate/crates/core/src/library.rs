//! The trajectory library: measured retention-time trajectories over the
//! catalog plus affine hybrids synthesized from pairs of measured runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::peaklist::{assign_by_elution, CompoundCatalog, PeakList};

pub const LIBRARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Measured { source_id: String },
    Hybridized { terms: Vec<(usize, f64)> },
}

/// One retention-time trajectory: one rt per catalog compound, in catalog
/// (elution) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rtt {
    pub rts: Vec<f64>,
    pub provenance: Provenance,
}

impl Rtt {
    pub fn new(rts: Vec<f64>, provenance: Provenance) -> Result<Self> {
        validate_monotone(&rts)?;
        Ok(Rtt { rts, provenance })
    }

    pub fn rt(&self, compound: u32) -> f64 {
        self.rts[compound as usize]
    }

    pub fn is_measured(&self) -> bool {
        matches!(self.provenance, Provenance::Measured { .. })
    }
}

fn validate_monotone(rts: &[f64]) -> Result<()> {
    for (i, &rt) in rts.iter().enumerate() {
        if !rt.is_finite() || rt <= 0.0 {
            return Err(Error::validation(format!(
                "trajectory rt[{i}] = {rt} is not finite and positive"
            )));
        }
    }
    for (i, w) in rts.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(Error::OrderViolation(format!(
                "compounds {i} and {} have rts {} and {}",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttLibrary {
    pub catalog: CompoundCatalog,
    pub trajectories: Vec<Rtt>,
}

impl RttLibrary {
    pub fn n_lib(&self) -> usize {
        self.trajectories.len()
    }
}

/// Build a library from full-composition runs: each run is labeled by
/// elution order and becomes one measured trajectory.
pub fn build_library(runs: &[PeakList], catalog: &CompoundCatalog) -> Result<RttLibrary> {
    let mut trajectories = Vec::with_capacity(runs.len());
    for run in runs {
        let labeled = assign_by_elution(run, catalog)
            .map_err(|e| Error::validation(format!("run `{}`: {e}", run.source_id)))?;
        let rtt = Rtt::new(
            labeled.rts(),
            Provenance::Measured {
                source_id: run.source_id.clone(),
            },
        )
        .map_err(|e| Error::validation(format!("run `{}`: {e}", run.source_id)))?;
        trajectories.push(rtt);
    }
    Ok(RttLibrary {
        catalog: catalog.clone(),
        trajectories,
    })
}

/// Affine combination of library trajectories: per-compound
/// `rt = sum(c_i * rts_i)`. Coefficients must sum to 1 so that all weight
/// on one trajectory is the identity. A combination that breaks elution
/// order is rejected, not clamped.
pub fn hybridize(lib: &RttLibrary, terms: &[(usize, f64)]) -> Result<Rtt> {
    if terms.is_empty() {
        return Err(Error::validation("hybridize needs at least one term"));
    }
    let coeff_sum: f64 = terms.iter().map(|(_, c)| c).sum();
    if (coeff_sum - 1.0).abs() > 1e-9 {
        return Err(Error::NonAffine(coeff_sum));
    }
    for &(idx, _) in terms {
        if idx >= lib.trajectories.len() {
            return Err(Error::validation(format!(
                "trajectory index {idx} out of range (library has {})",
                lib.trajectories.len()
            )));
        }
    }
    let n = lib.catalog.len();
    let mut rts = vec![0.0; n];
    for &(idx, c) in terms {
        for (out, &rt) in rts.iter_mut().zip(&lib.trajectories[idx].rts) {
            *out += c * rt;
        }
    }
    Rtt::new(
        rts,
        Provenance::Hybridized {
            terms: terms.to_vec(),
        },
    )
}

/// Result of `enrich`: the extended library plus how many candidate hybrids
/// were dropped for breaking elution order.
pub struct Enriched {
    pub library: RttLibrary,
    pub skipped: usize,
}

/// Pairwise hybridization formulas, in fixed emission order.
const PAIR_FORMULAS: [(f64, f64); 3] = [(0.5, 0.5), (2.0, -1.0), (-1.0, 2.0)];

/// Append, for every unordered pair of measured trajectories, the midpoint
/// and the two extrapolants. Hybrids that break elution order are skipped
/// (counted). Originals are retained; hybrids of hybrids are not formed.
pub fn enrich(lib: &RttLibrary) -> Enriched {
    let measured: Vec<usize> = (0..lib.trajectories.len())
        .filter(|&i| lib.trajectories[i].is_measured())
        .collect();
    let mut pairs = Vec::new();
    for (pi, &a) in measured.iter().enumerate() {
        for &b in &measured[pi + 1..] {
            pairs.push((a, b));
        }
    }
    // Parallel over pairs; output order is fixed by the pair list so the
    // enriched library is identical either way.
    let hybrids = exec::map_indexed(&pairs, |_, &(a, b)| {
        PAIR_FORMULAS
            .iter()
            .map(|&(ca, cb)| hybridize(lib, &[(a, ca), (b, cb)]))
            .collect::<Vec<_>>()
    });

    let mut library = lib.clone();
    let mut skipped = 0;
    for group in hybrids {
        for h in group {
            match h {
                Ok(rtt) => library.trajectories.push(rtt),
                Err(_) => skipped += 1,
            }
        }
    }
    Enriched { library, skipped }
}

#[derive(Serialize, Deserialize)]
struct LibraryDocument {
    version: u32,
    catalog: CompoundCatalog,
    trajectories: Vec<Rtt>,
}

pub fn save_library(lib: &RttLibrary) -> Result<String> {
    let doc = LibraryDocument {
        version: LIBRARY_FORMAT_VERSION,
        catalog: lib.catalog.clone(),
        trajectories: lib.trajectories.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn load_library(text: &str) -> Result<RttLibrary> {
    let doc: LibraryDocument = serde_json::from_str(text)?;
    if doc.version != LIBRARY_FORMAT_VERSION {
        return Err(Error::UnknownVersion(doc.version));
    }
    let catalog = CompoundCatalog::new(doc.catalog.entries)?;
    for (i, t) in doc.trajectories.iter().enumerate() {
        if t.rts.len() != catalog.len() {
            return Err(Error::validation(format!(
                "trajectory {i} has {} rts but the catalog has {} compounds",
                t.rts.len(),
                catalog.len()
            )));
        }
        validate_monotone(&t.rts)
            .map_err(|e| Error::validation(format!("trajectory {i}: {e}")))?;
    }
    Ok(RttLibrary {
        catalog,
        trajectories: doc.trajectories,
    })
}
