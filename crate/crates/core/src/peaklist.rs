//! Peak lists, the compound catalog, and sample ingestion.
//!
//! The catalog fixes the elution order once for the whole artifact: catalog
//! ids are `0..n-1` in elution order and every trajectory, assignment and
//! report indexes compounds by these ids.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompoundRole {
    Target,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: u32,
    pub name: String,
    pub role: CompoundRole,
}

/// Ordered compound catalog. Entry `i` has id `i`; order is elution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl CompoundCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("catalog has no entries"));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return Err(Error::validation(format!(
                    "catalog ids must be 0..n-1 in order; entry {i} has id {}",
                    e.id
                )));
            }
        }
        if !entries.iter().any(|e| e.role == CompoundRole::Target) {
            return Err(Error::validation("catalog must contain at least one target"));
        }
        Ok(CompoundCatalog { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.entries[id as usize].name
    }

    /// Catalog ids of targets, in elution order.
    pub fn target_ids(&self) -> Vec<u32> {
        self.entries
            .iter()
            .filter(|e| e.role == CompoundRole::Target)
            .map(|e| e.id)
            .collect()
    }

    /// Catalog ids of internal standards, in elution order.
    pub fn standard_ids(&self) -> Vec<u32> {
        self.entries
            .iter()
            .filter(|e| e.role == CompoundRole::Standard)
            .map(|e| e.id)
            .collect()
    }

    pub fn n_targets(&self) -> usize {
        self.target_ids().len()
    }

    pub fn n_standards(&self) -> usize {
        self.standard_ids().len()
    }

    /// Parse the catalog file format: ordered rows `id,name,role`,
    /// `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("id,") {
                continue;
            }
            let parts: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected `id,name,role`, got `{line}`"),
                });
            }
            let id: u32 = parts[0].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid id `{}`", parts[0]),
            })?;
            let role = match parts[2] {
                "target" => CompoundRole::Target,
                "standard" => CompoundRole::Standard,
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("unknown role `{other}` (expected target|standard)"),
                    })
                }
            };
            entries.push(CatalogEntry {
                id,
                name: parts[1].to_string(),
                role,
            });
        }
        CompoundCatalog::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# id,name,role\n");
        for e in &self.entries {
            let role = match e.role {
                CompoundRole::Target => "target",
                CompoundRole::Standard => "standard",
            };
            let _ = writeln!(out, "{},{},{}", e.id, e.name, role);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Retention time in seconds; finite and positive.
    pub rt: f64,
    pub height: Option<f64>,
    /// Raw text label from the input file (`std<k>` or a catalog name).
    pub label: Option<String>,
    /// Resolved catalog id, filled by `assign_by_elution`.
    pub compound: Option<u32>,
}

impl Peak {
    pub fn at(rt: f64) -> Self {
        Peak {
            rt,
            height: None,
            label: None,
            compound: None,
        }
    }
}

/// Ordered retention-time peak list extracted from one chromatogram run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    pub source_id: String,
    pub peaks: Vec<Peak>,
}

impl PeakList {
    /// Build from peaks, sorting by rt and rejecting ties and non-finite rts.
    pub fn new(source_id: impl Into<String>, mut peaks: Vec<Peak>) -> Result<Self> {
        for p in &peaks {
            if !p.rt.is_finite() || p.rt <= 0.0 {
                return Err(Error::validation(format!(
                    "retention time must be finite and positive, got {}",
                    p.rt
                )));
            }
        }
        peaks.sort_by(|a, b| a.rt.partial_cmp(&b.rt).unwrap());
        for w in peaks.windows(2) {
            if w[0].rt == w[1].rt {
                return Err(Error::validation(format!(
                    "duplicate retention time {} (co-elution is not supported)",
                    w[0].rt
                )));
            }
        }
        Ok(PeakList {
            source_id: source_id.into(),
            peaks,
        })
    }

    pub fn from_rts(source_id: impl Into<String>, rts: &[f64]) -> Result<Self> {
        Self::new(source_id, rts.iter().map(|&rt| Peak::at(rt)).collect())
    }

    pub fn rts(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.rt).collect()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Parse the peak-list file format: header `rt,height,label`, `rt`
    /// required, the rest optional; `#` comments and blank lines ignored.
    pub fn parse(source_id: impl Into<String>, text: &str) -> Result<Self> {
        let mut peaks = Vec::new();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen && line.starts_with("rt") {
                header_seen = true;
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.is_empty() || parts.len() > 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected `rt[,height[,label]]`, got `{line}`"),
                });
            }
            let rt: f64 = parts[0].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid rt `{}`", parts[0]),
            })?;
            let height = match parts.get(1) {
                Some(&"") | None => None,
                Some(h) => Some(h.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("invalid height `{h}`"),
                })?),
            };
            let label = match parts.get(2) {
                Some(&"") | None => None,
                Some(l) => Some(l.to_string()),
            };
            peaks.push(Peak {
                rt,
                height,
                label,
                compound: None,
            });
        }
        PeakList::new(source_id, peaks)
    }

    /// Serialize back to the peak-list file format. Retention times are
    /// written with 4 decimal places so parse -> serialize -> parse
    /// round-trips bit-identically.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rt,height,label\n");
        for p in &self.peaks {
            let height = p.height.map(|h| format!("{h}")).unwrap_or_default();
            let label = p.label.clone().unwrap_or_default();
            let _ = writeln!(out, "{:.4},{},{}", p.rt, height, label);
        }
        out
    }
}

/// A sample's peaks split into bound internal standards and unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePeaks {
    /// standard catalog id -> retention time in the sample.
    pub standards: BTreeMap<u32, f64>,
    /// Strictly increasing retention times of the peaks to identify.
    pub unknowns: Vec<f64>,
}

impl SamplePeaks {
    pub fn new(standards: BTreeMap<u32, f64>, unknowns: Vec<f64>) -> Result<Self> {
        for w in unknowns.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::validation(format!(
                    "unknown peak rts must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(SamplePeaks { standards, unknowns })
    }

    /// N_sample: number of detected peaks excluding internal standards.
    pub fn n_sample(&self) -> usize {
        self.unknowns.len()
    }
}

/// Bind each catalog standard to exactly one peak and return the rest as
/// unknowns. A standard binds to the explicitly labeled peak when one
/// exists, otherwise to the unique peak within `std_window` of its hint.
/// Zero or multiple candidates is a hard error: silently misbinding an
/// anchor poisons every downstream score.
pub fn extract_sample(
    peaks: &PeakList,
    catalog: &CompoundCatalog,
    std_hints: &BTreeMap<u32, f64>,
    std_window: f64,
) -> Result<SamplePeaks> {
    let std_ids = catalog.standard_ids();
    let mut bound: BTreeMap<u32, usize> = BTreeMap::new();

    for (ordinal, &sid) in std_ids.iter().enumerate() {
        let std_label = format!("std{}", ordinal + 1);
        let name = catalog.name(sid);
        let labeled: Vec<usize> = peaks
            .peaks
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                p.compound == Some(sid)
                    || p.label.as_deref() == Some(std_label.as_str())
                    || p.label.as_deref() == Some(name)
            })
            .map(|(i, _)| i)
            .collect();
        let idx = match labeled.len() {
            1 => labeled[0],
            0 => {
                let hint = *std_hints.get(&sid).ok_or_else(|| {
                    Error::validation(format!(
                        "standard `{name}` (id {sid}) has neither a labeled peak nor an rt hint"
                    ))
                })?;
                let candidates: Vec<usize> = peaks
                    .peaks
                    .iter()
                    .enumerate()
                    .filter(|(i, p)| {
                        (p.rt - hint).abs() <= std_window && !bound.values().any(|&b| b == *i)
                    })
                    .map(|(i, _)| i)
                    .collect();
                if candidates.len() != 1 {
                    return Err(Error::AmbiguousStandard {
                        std: name.to_string(),
                        hint,
                        window: std_window,
                        candidates: candidates.len(),
                    });
                }
                candidates[0]
            }
            n => {
                return Err(Error::AmbiguousStandard {
                    std: name.to_string(),
                    hint: std_hints.get(&sid).copied().unwrap_or(f64::NAN),
                    window: std_window,
                    candidates: n,
                })
            }
        };
        if bound.values().any(|&b| b == idx) {
            return Err(Error::AmbiguousStandard {
                std: name.to_string(),
                hint: peaks.peaks[idx].rt,
                window: std_window,
                candidates: 2,
            });
        }
        bound.insert(sid, idx);
    }

    let standards: BTreeMap<u32, f64> = bound
        .iter()
        .map(|(&sid, &idx)| (sid, peaks.peaks[idx].rt))
        .collect();
    let unknowns: Vec<f64> = peaks
        .peaks
        .iter()
        .enumerate()
        .filter(|(i, _)| !bound.values().any(|&b| b == *i))
        .map(|(_, p)| p.rt)
        .collect();
    SamplePeaks::new(standards, unknowns)
}

/// Label a full-composition library run by elution order: the i-th peak is
/// the i-th catalog compound. Only valid when the run contains every
/// catalog compound.
pub fn assign_by_elution(peaks: &PeakList, catalog: &CompoundCatalog) -> Result<PeakList> {
    if peaks.len() != catalog.len() {
        return Err(Error::validation(format!(
            "run `{}` has {} peaks but the catalog has {} compounds",
            peaks.source_id,
            peaks.len(),
            catalog.len()
        )));
    }
    let mut labeled = peaks.clone();
    for (i, p) in labeled.peaks.iter_mut().enumerate() {
        p.compound = Some(i as u32);
        p.label = Some(catalog.name(i as u32).to_string());
    }
    Ok(labeled)
}
