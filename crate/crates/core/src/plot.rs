//! Dependency-free SVG rendering of trajectory diagrams, retention-time
//! deviation curves, and chromatogram traces. Output is standalone SVG
//! meant for structural assertions (element counts), not pixel fidelity.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::library::RttLibrary;
use crate::preprocess::Chromatogram;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 50.0;

/// Line colors cycled per series.
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Result<Axes> {
        let mut a = Axes {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for &(x, y) in points {
            a.x_min = a.x_min.min(x);
            a.x_max = a.x_max.max(x);
            a.y_min = a.y_min.min(y);
            a.y_max = a.y_max.max(y);
        }
        if !(a.x_min.is_finite() && a.y_min.is_finite()) {
            return Err(Error::validation("nothing to plot"));
        }
        // Degenerate ranges still need nonzero extent to map onto pixels.
        if a.x_max - a.x_min < 1e-12 {
            a.x_min -= 0.5;
            a.x_max += 0.5;
        }
        if a.y_max - a.y_min < 1e-12 {
            a.y_min -= 0.5;
            a.y_max += 0.5;
        }
        Ok(a)
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<title>{title}</title>\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    )
}

fn axes_frame(out: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"black\"/>",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{x_label}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 16 {})\">{y_label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn polyline(out: &mut String, axes: &Axes, pts: &[(f64, f64)], color: &str, dashed: bool) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
        .collect();
    let dash = if dashed { " stroke-dasharray=\"5,3\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
        coords.join(" ")
    );
}

fn dots(out: &mut String, axes: &Axes, pts: &[(f64, f64)], color: &str) {
    for &(x, y) in pts {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
            axes.px(x),
            axes.py(y)
        );
    }
}

/// Trajectory diagram: for each library trajectory, the polyline of
/// (reference rt, trajectory rt) per compound, with dots at compounds.
/// Measured trajectories are solid; hybridized ones dashed. The reference
/// is the trajectory at `reference_index` (its own curve is the identity
/// diagonal).
pub fn rtt_diagram(lib: &RttLibrary, reference_index: usize) -> Result<String> {
    let reference = lib
        .trajectories
        .get(reference_index)
        .ok_or_else(|| Error::validation(format!("no trajectory {reference_index} in library")))?;
    let mut all: Vec<(f64, f64)> = Vec::new();
    let series: Vec<Vec<(f64, f64)>> = lib
        .trajectories
        .iter()
        .map(|t| {
            reference
                .rts
                .iter()
                .copied()
                .zip(t.rts.iter().copied())
                .collect()
        })
        .collect();
    for s in &series {
        all.extend_from_slice(s);
    }
    let axes = Axes::from_points(all.iter())?;

    let mut out = svg_open("retention time trajectories");
    axes_frame(&mut out, "reference rt (s)", "trajectory rt (s)");
    for (i, (pts, t)) in series.iter().zip(&lib.trajectories).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, &axes, pts, color, !t.is_measured());
        dots(&mut out, &axes, pts, color);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Deviation curves: rt - reference rt against reference rt, one polyline
/// per trajectory. The reference's own curve is flat zero.
pub fn delta_rt(lib: &RttLibrary, reference_index: usize) -> Result<String> {
    let reference = lib
        .trajectories
        .get(reference_index)
        .ok_or_else(|| Error::validation(format!("no trajectory {reference_index} in library")))?
        .clone();
    let series: Vec<Vec<(f64, f64)>> = lib
        .trajectories
        .iter()
        .map(|t| {
            reference
                .rts
                .iter()
                .zip(&t.rts)
                .map(|(&r, &x)| (r, x - r))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flatten().copied().collect();
    let axes = Axes::from_points(all.iter())?;

    let mut out = svg_open("retention time deviation");
    axes_frame(&mut out, "reference rt (s)", "delta rt (s)");
    for (i, (pts, t)) in series.iter().zip(&lib.trajectories).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, &axes, pts, color, !t.is_measured());
        dots(&mut out, &axes, pts, color);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Overlaid chromatogram traces, one polyline per (name, trace) pair.
pub fn chromatogram_traces(traces: &[(String, Chromatogram)]) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::validation("no traces to plot"));
    }
    let all: Vec<(f64, f64)> = traces
        .iter()
        .flat_map(|(_, c)| {
            c.signal
                .iter()
                .enumerate()
                .map(|(i, &y)| (c.time(i), y))
                .collect::<Vec<_>>()
        })
        .collect();
    let axes = Axes::from_points(all.iter())?;

    let mut out = svg_open("chromatograms");
    axes_frame(&mut out, "time (s)", "signal");
    for (i, (name, c)) in traces.iter().enumerate() {
        let pts: Vec<(f64, f64)> = c
            .signal
            .iter()
            .enumerate()
            .map(|(j, &y)| (c.time(j), y))
            .collect();
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, &axes, &pts, color, false);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            WIDTH - MARGIN - 120.0,
            MARGIN + 16.0 * (i + 1) as f64
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{build_library, enrich};
    use crate::peaklist::{CatalogEntry, CompoundCatalog, CompoundRole, PeakList};

    fn lib(n_runs: usize) -> RttLibrary {
        let catalog = CompoundCatalog::new(
            (0..4)
                .map(|i| CatalogEntry {
                    id: i as u32,
                    name: format!("c{i}"),
                    role: CompoundRole::Target,
                })
                .collect(),
        )
        .unwrap();
        let runs: Vec<PeakList> = (0..n_runs)
            .map(|k| {
                PeakList::from_rts(
                    format!("r{k}"),
                    &[
                        10.0 + k as f64,
                        20.0 + 2.0 * k as f64,
                        30.0 + k as f64,
                        40.0 + 0.5 * k as f64,
                    ],
                )
                .unwrap()
            })
            .collect();
        build_library(&runs, &catalog).unwrap()
    }

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    #[test]
    fn rtt_diagram_one_polyline_per_trajectory() {
        let library = lib(3);
        let svg = rtt_diagram(&library, 0).unwrap();
        assert_eq!(count(&svg, "<polyline"), 3);
        // One dot per compound per trajectory.
        assert_eq!(count(&svg, "<circle"), 3 * 4);
    }

    #[test]
    fn hybrids_styled_distinctly() {
        let library = enrich(&lib(3)).library;
        let svg = rtt_diagram(&library, 0).unwrap();
        assert_eq!(count(&svg, "<polyline"), library.n_lib());
        let hybrids = library.trajectories.iter().filter(|t| !t.is_measured()).count();
        assert!(hybrids > 0);
        assert_eq!(count(&svg, "stroke-dasharray"), hybrids);
    }

    #[test]
    fn delta_rt_of_reference_is_flat_zero() {
        let library = lib(1);
        let svg = delta_rt(&library, 0).unwrap();
        assert_eq!(count(&svg, "<polyline"), 1);
        // All deviations are zero, so every plotted y is the same pixel row.
        let ys: Vec<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<circle"))
            .map(|l| l.split("cy=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(ys.len(), 4);
        assert!(ys.iter().all(|y| *y == ys[0]));
    }

    #[test]
    fn rtt_diagram_reference_is_diagonal() {
        let library = lib(1);
        let svg = rtt_diagram(&library, 0).unwrap();
        // Self-trajectory: plotted x pixels equal y-distance from frame
        // edges, i.e. the polyline is the 45-degree line. Check the two
        // corner points map to opposite frame corners.
        assert!(svg.contains("<polyline"));
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts: Vec<(f64, f64)> = line
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap()
            .split(' ')
            .map(|p| {
                let mut it = p.split(',');
                (
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                )
            })
            .collect();
        assert_eq!(pts.len(), 4);
        // Monotone rising line in screen space (y decreases as x grows).
        for w in pts.windows(2) {
            assert!(w[1].0 > w[0].0 && w[1].1 < w[0].1);
        }
    }

    #[test]
    fn missing_reference_errors() {
        let library = lib(2);
        assert!(rtt_diagram(&library, 5).is_err());
        assert!(delta_rt(&library, 5).is_err());
    }

    #[test]
    fn chromatogram_traces_counted() {
        let c1 = Chromatogram::new(0.0, 1.0, vec![0.0, 1.0, 0.0, 2.0]).unwrap();
        let c2 = Chromatogram::new(0.0, 1.0, vec![1.0, 0.0, 3.0, 0.0]).unwrap();
        let svg = chromatogram_traces(&[("a".into(), c1), ("b".into(), c2)]).unwrap();
        assert_eq!(count(&svg, "<polyline"), 2);
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
        assert!(chromatogram_traces(&[]).is_err());
    }
}
