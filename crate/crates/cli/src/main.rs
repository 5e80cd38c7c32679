//! `rtt` — retention-time-trajectory matching from the command line.
//!
//! One subcommand per pipeline stage: library construction and
//! hybridization enrichment, sample matching, raw-trace preprocessing,
//! reference warping, validation-test generation/counting/evaluation, and
//! SVG plotting. Diagnostics go to stderr; data goes to `--out` or stdout.
//! Exit codes: 0 success, 1 domain error, 2 usage or I/O error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rttmatch::error::Error;
use rttmatch::library::{build_library, enrich, load_library, save_library};
use rttmatch::matcher::{match_sample, MatchConfig, ScreenKeep};
use rttmatch::peaklist::{extract_sample, CompoundCatalog, PeakList, SamplePeaks};
use rttmatch::preprocess::{
    baseline_correct, detect_peaks, smooth, to_peaklist, Chromatogram,
};
use rttmatch::testgen::{
    count_tests, evaluate, inject_interferents, subset_tests, Sampling, TestCase,
};
use rttmatch::{baselines, plot, report, with_jobs};

#[derive(Parser)]
#[command(name = "rtt", version, about = "Retention time trajectory matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum WarpMethod {
    Linear,
    Cow,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    RttDiagram,
    DeltaRt,
    Chromatogram,
}

#[derive(Args)]
struct MatchFlags {
    /// Admissible rt window half-width around each sample peak, seconds.
    #[arg(long = "delta-t", default_value_t = 30.0)]
    delta_t: f64,
    /// Trajectories kept after standards screening: `all`, a fraction in
    /// (0,1], or an integer top-k. Default keeps half, at least 20.
    #[arg(long = "screen-keep")]
    screen_keep: Option<String>,
    /// Interferent criterion 2 threshold multiplier on the MSR.
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    /// Repeat criterion-2 flagging to a fixed point instead of one pass.
    #[arg(long = "iterate-interferents")]
    iterate_interferents: bool,
    #[arg(long = "max-results", default_value_t = 10)]
    max_results: usize,
    /// Ignore internal standards: no screening, no region constraints.
    #[arg(long = "no-standards")]
    no_standards: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build a trajectory library from full-composition runs.
    BuildLib {
        #[arg(long)]
        catalog: PathBuf,
        /// Peak-list CSVs, one per run, each containing every compound.
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend a library with pairwise affine hybrids of its measured runs.
    Enrich {
        #[arg(long)]
        lib: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify a sample's peaks against a library.
    Match {
        #[arg(long)]
        lib: PathBuf,
        /// Sample peak-list CSV.
        #[arg(long)]
        sample: PathBuf,
        #[command(flatten)]
        flags: MatchFlags,
        /// Window for binding unlabeled standards to their library rts.
        #[arg(long = "std-window", default_value_t = 30.0)]
        std_window: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a raw chromatogram trace into a peak list.
    Preprocess {
        /// Chromatogram CSV (`t,signal`).
        #[arg(long)]
        sample: PathBuf,
        /// airPLS smoothness weight.
        #[arg(long, default_value_t = 1e5)]
        lambda: f64,
        #[arg(long = "max-iter", default_value_t = 15)]
        max_iter: usize,
        /// LOWESS span as a fraction of points; 0 disables smoothing.
        #[arg(long, default_value_t = 0.01)]
        span: f64,
        #[arg(long = "min-snr", default_value_t = 5.0)]
        min_snr: f64,
        /// Minimum apex separation, seconds.
        #[arg(long = "min-separation", default_value_t = 1.0)]
        min_separation: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align a sample to a reference with a baseline warping method.
    Warp {
        #[arg(long, value_enum)]
        method: WarpMethod,
        /// Sample input: peak-list CSV (linear) or chromatogram CSV (cow).
        #[arg(long)]
        sample: PathBuf,
        /// Reference input: labeled peak-list CSV (linear) or chromatogram
        /// CSV (cow).
        #[arg(long)]
        reference: PathBuf,
        /// Catalog CSV; required by `linear` to locate the standards.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// COW boundary slack, samples.
        #[arg(long, default_value_t = 5)]
        slack: usize,
        /// COW correlation power.
        #[arg(long, default_value_t = 1)]
        power: u32,
        /// COW reference segment length, samples.
        #[arg(long, default_value_t = 50)]
        segment: usize,
        /// Identification tolerance after warping, seconds.
        #[arg(long, default_value_t = 0.5)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate subset validation tests from a labeled full run.
    GenTests {
        #[arg(long)]
        catalog: PathBuf,
        /// Labeled full-composition peak-list CSV.
        #[arg(long)]
        sample: PathBuf,
        /// Subset sizes, e.g. `1,2,3`.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u32>,
        /// Sample this many random subsets instead of exhausting.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Interferent rts injected into every test.
        #[arg(long = "inject", value_delimiter = ',')]
        inject: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the exact number of subset tests without generating them.
    CountTests {
        #[arg(long = "n-targets")]
        n_targets: u32,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u32>,
        #[arg(long = "n-chroms", default_value_t = 1)]
        n_chroms: u64,
    },
    /// Run a generated test suite against a library and report accuracy.
    Evaluate {
        #[arg(long)]
        lib: PathBuf,
        /// Test-suite JSON from `gen-tests`.
        #[arg(long)]
        tests: PathBuf,
        #[command(flatten)]
        flags: MatchFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a library or traces as a standalone SVG.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        /// Library JSON (rtt-diagram / delta-rt).
        #[arg(long)]
        lib: Option<PathBuf>,
        /// Reference trajectory index within the library.
        #[arg(long, default_value_t = 0)]
        reference: usize,
        /// Chromatogram CSVs (chromatogram kind).
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Domain failures exit 1; usage and file-format/IO problems exit 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_)) | Some(Error::Format(_)) | Some(Error::Parse { .. }) => 2,
        Some(_) => 1,
        None => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(|e| anyhow::Error::from(Error::Io(e)).context(format!("reading {}", path.display())))
}

fn emit(out: &Option<PathBuf>, data: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, data)
            .map_err(|e| anyhow::Error::from(Error::Io(e)).context(format!("writing {}", path.display()))),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}

fn source_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn parse_screen_keep(text: Option<&str>) -> anyhow::Result<ScreenKeep> {
    let Some(text) = text else {
        return Ok(ScreenKeep::HalfOrTop20);
    };
    if text == "all" {
        return Ok(ScreenKeep::All);
    }
    if let Ok(k) = text.parse::<usize>() {
        return Ok(ScreenKeep::TopK(k));
    }
    if let Ok(f) = text.parse::<f64>() {
        if f > 0.0 && f <= 1.0 {
            return Ok(ScreenKeep::Fraction(f));
        }
    }
    Err(Error::validation(format!(
        "--screen-keep must be `all`, a fraction in (0,1], or an integer (got `{text}`)"
    ))
    .into())
}

fn match_config(flags: &MatchFlags) -> anyhow::Result<MatchConfig> {
    Ok(MatchConfig {
        delta_t: flags.delta_t,
        screen_keep: parse_screen_keep(flags.screen_keep.as_deref())?,
        kappa: flags.kappa,
        interferent_iterate: flags.iterate_interferents,
        max_results: flags.max_results,
        require_standards: false,
    })
}

/// Bind the sample's standards: explicit labels win; otherwise hint each
/// standard at its mean library rt within `std_window`.
fn sample_peaks(
    peaks: &PeakList,
    lib: &rttmatch::RttLibrary,
    no_standards: bool,
    std_window: f64,
) -> anyhow::Result<SamplePeaks> {
    if no_standards {
        return Ok(SamplePeaks::new(BTreeMap::new(), peaks.rts())?);
    }
    let mut hints = BTreeMap::new();
    for sid in lib.catalog.standard_ids() {
        let mean = lib
            .trajectories
            .iter()
            .map(|t| t.rt(sid))
            .sum::<f64>()
            / lib.trajectories.len().max(1) as f64;
        hints.insert(sid, mean);
    }
    Ok(extract_sample(peaks, &lib.catalog, &hints, std_window)?)
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::BuildLib { catalog, runs, out } => {
            let catalog = CompoundCatalog::parse(&read(&catalog)?)?;
            if runs.is_empty() {
                return Err(Error::validation("build-lib needs at least one run").into());
            }
            let runs = runs
                .iter()
                .map(|p| Ok(PeakList::parse(source_id(p), &read(p)?)?))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let lib = build_library(&runs, &catalog)?;
            eprintln!("built library with {} trajectories", lib.n_lib());
            emit(&out, &save_library(&lib)?)
        }
        Command::Enrich { lib, out } => {
            let library = load_library(&read(&lib)?)?;
            let enriched = enrich(&library);
            eprintln!(
                "enriched {} -> {} trajectories ({} order-breaking hybrids skipped)",
                library.n_lib(),
                enriched.library.n_lib(),
                enriched.skipped
            );
            emit(&out, &save_library(&enriched.library)?)
        }
        Command::Match {
            lib,
            sample,
            flags,
            std_window,
            format,
            out,
        } => {
            let library = load_library(&read(&lib)?)?;
            let peaks = PeakList::parse(source_id(&sample), &read(&sample)?)?;
            let sample = sample_peaks(&peaks, &library, flags.no_standards, std_window)?;
            let cfg = match_config(&flags)?;
            let result = with_jobs(flags.jobs, || match_sample(&sample, &library, &cfg))?;
            if let Some(d) = &result.diagnostic {
                eprintln!("note: {d}");
            }
            let rendered = match format {
                Format::Text => report::to_text(&result, &sample, &library.catalog),
                Format::Structured => report::to_json(&result, &sample, &library.catalog)?,
            };
            emit(&out, &rendered)
        }
        Command::Preprocess {
            sample,
            lambda,
            max_iter,
            span,
            min_snr,
            min_separation,
            out,
        } => {
            let raw = Chromatogram::parse(&read(&sample)?)?;
            let corrected = baseline_correct(&raw, lambda, max_iter)?;
            if !corrected.converged {
                eprintln!(
                    "warning: baseline did not converge in {} iterations; using best iterate",
                    corrected.iterations
                );
            }
            let trace = if span > 0.0 {
                smooth(&corrected.corrected, span)?
            } else {
                corrected.corrected
            };
            let detected = detect_peaks(&trace, min_snr, min_separation);
            eprintln!("detected {} peaks", detected.len());
            let list = to_peaklist(&source_id(&sample), &detected)?;
            emit(&out, &list.to_csv())
        }
        Command::Warp {
            method,
            sample,
            reference,
            catalog,
            slack,
            power,
            segment,
            tol,
            out,
        } => match method {
            WarpMethod::Linear => {
                let catalog = catalog.ok_or_else(|| {
                    Error::validation("--catalog is required for linear warping")
                })?;
                let catalog = CompoundCatalog::parse(&read(&catalog)?)?;
                let sample = PeakList::parse(source_id(&sample), &read(&sample)?)?;
                let reference =
                    PeakList::parse(source_id(&reference), &read(&reference)?)?;
                let reference = rttmatch::peaklist::assign_by_elution(&reference, &catalog)?;
                let ref_stds: Vec<f64> = catalog
                    .standard_ids()
                    .iter()
                    .map(|&sid| {
                        reference
                            .peaks
                            .iter()
                            .find(|p| p.compound == Some(sid))
                            .map(|p| p.rt)
                            .expect("labeled reference covers the catalog")
                    })
                    .collect();
                let hints: BTreeMap<u32, f64> = catalog
                    .standard_ids()
                    .iter()
                    .copied()
                    .zip(ref_stds.iter().copied())
                    .collect();
                let split = extract_sample(&sample, &catalog, &hints, 30.0)?;
                let sample_stds: Vec<f64> = split.standards.values().copied().collect();
                let all_rts = sample.rts();
                let warped = baselines::linear_warp(&all_rts, &sample_stds, &ref_stds)?;
                let idents = baselines::identify_after_warp(&warped, &reference, tol)?;
                let mut text = String::from("rt,warped_rt,identification\n");
                for ((rt, w), ident) in all_rts.iter().zip(&warped).zip(&idents) {
                    let label = match ident {
                        baselines::WarpIdent::Compound(id) => catalog.name(*id).to_string(),
                        baselines::WarpIdent::Interferent => "INTERFERENT".into(),
                        baselines::WarpIdent::Ambiguous => "AMBIGUOUS".into(),
                    };
                    text.push_str(&format!("{rt:.4},{w:.4},{label}\n"));
                }
                emit(&out, &text)
            }
            WarpMethod::Cow => {
                let sample = Chromatogram::parse(&read(&sample)?)?;
                let reference = Chromatogram::parse(&read(&reference)?)?;
                let cfg = baselines::CowConfig {
                    segment_length: segment,
                    slack,
                    power,
                };
                let result = baselines::cow_align(&sample, &reference, cfg)?;
                eprintln!(
                    "benefit {:.4} over {} boundaries",
                    result.benefit,
                    result.path.len()
                );
                emit(&out, &result.warped.to_csv())
            }
        },
        Command::GenTests {
            catalog,
            sample,
            sizes,
            random,
            seed,
            inject,
            out,
        } => {
            let catalog = CompoundCatalog::parse(&read(&catalog)?)?;
            let run = PeakList::parse(source_id(&sample), &read(&sample)?)?;
            let run = rttmatch::peaklist::assign_by_elution(&run, &catalog)?;
            let sampling = match random {
                Some(n) => Sampling::Random { n, seed },
                None => Sampling::Exhaustive,
            };
            let mut tests = subset_tests(&run, &catalog, &sizes, &sampling, None)?;
            if let Some(n) = random {
                if tests.len() < n {
                    eprintln!(
                        "warning: population smaller than requested; capped at {} tests",
                        tests.len()
                    );
                }
            }
            if !inject.is_empty() {
                tests = tests
                    .iter()
                    .map(|t| inject_interferents(t, &inject))
                    .collect::<Result<_, _>>()?;
            }
            eprintln!("generated {} tests", tests.len());
            emit(&out, &serde_json::to_string_pretty(&tests)?)
        }
        Command::CountTests {
            n_targets,
            sizes,
            n_chroms,
        } => {
            let total = count_tests(n_targets, &sizes, n_chroms)?;
            println!("{total}");
            Ok(())
        }
        Command::Evaluate {
            lib,
            tests,
            flags,
            format,
            out,
        } => {
            let library = load_library(&read(&lib)?)?;
            let suite: Vec<TestCase> = serde_json::from_str(&read(&tests)?).map_err(Error::Json)?;
            let cfg = match_config(&flags)?;
            let report = with_jobs(flags.jobs, || evaluate(&library, &suite, &cfg))?;
            let rendered = match format {
                Format::Text => report.to_text(),
                Format::Structured => serde_json::to_string_pretty(&report)?,
            };
            emit(&out, &rendered)
        }
        Command::Plot {
            kind,
            lib,
            reference,
            inputs,
            out,
        } => {
            let svg = match kind {
                PlotKind::RttDiagram | PlotKind::DeltaRt => {
                    let lib = lib.ok_or_else(|| {
                        Error::validation("--lib is required for trajectory plots")
                    })?;
                    let library = load_library(&read(&lib)?)?;
                    match kind {
                        PlotKind::RttDiagram => plot::rtt_diagram(&library, reference)?,
                        _ => plot::delta_rt(&library, reference)?,
                    }
                }
                PlotKind::Chromatogram => {
                    let traces = inputs
                        .iter()
                        .map(|p| Ok((source_id(p), Chromatogram::parse(&read(p)?)?)))
                        .collect::<anyhow::Result<Vec<_>>>()?;
                    plot::chromatogram_traces(&traces)?
                }
            };
            emit(&Some(out), &svg)
        }
    }
}
