//! End-to-end experiment: generate → mix → estimate → separate → score.
//!
//! Every stage has an in-memory form and a file form. `run_experiment`
//! calls the same writers the stand-alone stage commands use, and the
//! signal CSVs round-trip exactly, so chaining the stages reproduces the
//! monolithic run byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Settings};
use crate::csvio;
use crate::error::{Error, Result};
use crate::eval::{align_and_score, pair_diagnostics, PairDiagnostics, SeparationReport};
use crate::matrix_est::{build_histogram, compute_ratios, estimate_mixing, export_bar_graph, EstimatedMatrix, RatioHistogram};
use crate::recovery::{separate_detailed, Separation};
use crate::signal::SignalMatrix;
use crate::signal_gen::{generate_sources, mix};
use crate::svg;

pub const SOURCES_CSV: &str = "sources.csv";
pub const SOURCES_SVG: &str = "sources.svg";
pub const MIXTURES_CSV: &str = "mixtures.csv";
pub const MIXTURES_SVG: &str = "mixtures.svg";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const BAR_GRAPH_SVG: &str = "bar_graph.svg";
pub const ESTIMATED_MATRIX_CSV: &str = "estimated_matrix.csv";
pub const SEPARATED_CSV: &str = "separated.csv";
pub const SEPARATED_SVG: &str = "separated.svg";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

pub fn generate_stage(cfg: &ExperimentConfig) -> Result<SignalMatrix> {
    generate_sources(&cfg.th_uwb, &cfg.pulses).map_err(|e| e.in_stage("generate"))
}

pub fn mix_stage(cfg: &ExperimentConfig, sources: &SignalMatrix) -> Result<SignalMatrix> {
    cfg.mixing_matrix()
        .and_then(|a| mix(sources, &a))
        .map_err(|e| e.in_stage("mix"))
}

pub fn estimate_stage(mixtures: &SignalMatrix, settings: &Settings) -> Result<(RatioHistogram, EstimatedMatrix)> {
    let run = || -> Result<_> {
        if mixtures.cols() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "estimation requires exactly 2 mixture channels, got {}",
                mixtures.cols()
            )));
        }
        let peak = mixtures.column_peak(0);
        if peak == 0.0 {
            return Err(Error::NoActiveSamples);
        }
        let ratios = compute_ratios(mixtures, settings.activity_eps * peak)?;
        let hist = build_histogram(&ratios, settings.quantum)?;
        let est = estimate_mixing(&hist, settings.selection)?;
        Ok((hist, est))
    };
    run().map_err(|e| e.in_stage("estimate"))
}

/// Absolute separation threshold: `activity_eps` times the mixture peak.
pub fn separation_eps(mixtures: &SignalMatrix, settings: &Settings) -> f64 {
    let eps = settings.activity_eps * mixtures.peak();
    if eps > 0.0 {
        eps
    } else {
        f64::MIN_POSITIVE
    }
}

pub fn separate_stage(mixtures: &SignalMatrix, est: &EstimatedMatrix, settings: &Settings) -> Result<Separation> {
    separate_detailed(mixtures, est, separation_eps(mixtures, settings)).map_err(|e| e.in_stage("separate"))
}

pub fn score_stage(
    sources: &SignalMatrix,
    estimates: &SignalMatrix,
    pairs: &[Option<crate::recovery::BasePair>],
) -> Result<(SeparationReport, PairDiagnostics)> {
    let run = || -> Result<_> {
        let report = align_and_score(sources, estimates)?;
        let diagnostics = pair_diagnostics(sources, pairs, &report.permutation())?;
        Ok((report, diagnostics))
    };
    run().map_err(|e| e.in_stage("score"))
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub sources: SignalMatrix,
    pub mixtures: SignalMatrix,
    pub histogram: RatioHistogram,
    pub estimate: EstimatedMatrix,
    pub separation: Separation,
    pub report: SeparationReport,
    pub diagnostics: PairDiagnostics,
}

/// Runs every stage in memory without touching the filesystem.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let sources = generate_stage(cfg)?;
    let mixtures = mix_stage(cfg, &sources)?;
    let (histogram, estimate) = estimate_stage(&mixtures, &cfg.settings)?;
    let separation = separate_stage(&mixtures, &estimate, &cfg.settings)?;
    let (report, diagnostics) = score_stage(&sources, &separation.estimates, &separation.pairs)?;
    Ok(ExperimentOutcome {
        sources,
        mixtures,
        histogram,
        estimate,
        separation,
        report,
        diagnostics,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn write_generate(dir: &Path, sources: &SignalMatrix) -> Result<()> {
    ensure_dir(dir)?;
    csvio::write_signal(&dir.join(SOURCES_CSV), "s", sources)?;
    write_text(dir.join(SOURCES_SVG), &svg::waveform_svg("source signals", "s", sources))
}

pub fn write_mix(dir: &Path, mixtures: &SignalMatrix) -> Result<()> {
    ensure_dir(dir)?;
    csvio::write_signal(&dir.join(MIXTURES_CSV), "x", mixtures)?;
    write_text(dir.join(MIXTURES_SVG), &svg::waveform_svg("mixed signals", "x", mixtures))
}

pub fn write_estimate(dir: &Path, hist: &RatioHistogram, est: &EstimatedMatrix) -> Result<()> {
    ensure_dir(dir)?;
    export_bar_graph(hist, &dir.join(HISTOGRAM_CSV))?;
    write_text(dir.join(BAR_GRAPH_SVG), &svg::bar_graph_svg("mixture ratio bar graph", hist))?;
    csvio::write_estimated_matrix(&dir.join(ESTIMATED_MATRIX_CSV), est)
}

pub fn write_separate(dir: &Path, separation: &Separation) -> Result<()> {
    ensure_dir(dir)?;
    csvio::write_signal(&dir.join(SEPARATED_CSV), "y", &separation.estimates)?;
    write_text(
        dir.join(SEPARATED_SVG),
        &svg::waveform_svg("separated signals", "y", &separation.estimates),
    )
}

pub fn write_score(
    dir: &Path,
    est: &EstimatedMatrix,
    report: &SeparationReport,
    diagnostics: &PairDiagnostics,
) -> Result<()> {
    ensure_dir(dir)?;
    csvio::write_report(&dir.join(REPORT_CSV), report)?;
    write_text(dir.join(REPORT_TXT), &summary(est, report, diagnostics))
}

/// Human-readable run summary (also printed by the CLI).
pub fn summary(est: &EstimatedMatrix, report: &SeparationReport, diagnostics: &PairDiagnostics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sources (true): {}", report.n_sources_true);
    let _ = writeln!(s, "sources (estimated): {}", est.n_sources());
    let ratios: Vec<String> = est.ratios().iter().map(|r| format!("{r:.4}")).collect();
    let _ = writeln!(s, "estimated ratios: {}", ratios.join(" "));
    let _ = writeln!(s, "matched correlations:");
    for m in &report.matches {
        let _ = writeln!(s, "  y{} -> s{}  C = {:.4}", m.estimate + 1, m.truth + 1, m.correlation);
    }
    let _ = writeln!(
        s,
        "wrong-pair samples: {} of {} active (max simultaneous sources: {})",
        diagnostics.wrong_pair,
        diagnostics.active_samples,
        diagnostics.max_simultaneous()
    );
    s
}

/// Runs the whole experiment and writes every artifact into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let outcome = run_pipeline(cfg)?;
    write_generate(out_dir, &outcome.sources)?;
    write_mix(out_dir, &outcome.mixtures)?;
    write_estimate(out_dir, &outcome.histogram, &outcome.estimate)?;
    write_separate(out_dir, &outcome.separation)?;
    write_score(out_dir, &outcome.estimate, &outcome.report, &outcome.diagnostics)?;
    Ok(outcome)
}

/// File-driven stage runners used by the CLI subcommands.
pub mod stages {
    use super::*;

    pub fn generate(cfg: &ExperimentConfig, dir: &Path) -> Result<SignalMatrix> {
        cfg.validate()?;
        let sources = generate_stage(cfg)?;
        write_generate(dir, &sources)?;
        Ok(sources)
    }

    pub fn mix(cfg: &ExperimentConfig, dir: &Path) -> Result<SignalMatrix> {
        cfg.validate()?;
        let sources = csvio::read_signal(&dir.join(SOURCES_CSV))?;
        let mixtures = mix_stage(cfg, &sources)?;
        write_mix(dir, &mixtures)?;
        Ok(mixtures)
    }

    pub fn estimate(settings: &Settings, dir: &Path) -> Result<EstimatedMatrix> {
        let mixtures = csvio::read_signal(&dir.join(MIXTURES_CSV))?;
        let (hist, est) = estimate_stage(&mixtures, settings)?;
        write_estimate(dir, &hist, &est)?;
        Ok(est)
    }

    pub fn separate(settings: &Settings, dir: &Path) -> Result<Separation> {
        let mixtures = csvio::read_signal(&dir.join(MIXTURES_CSV))?;
        let est = csvio::read_estimated_matrix(&dir.join(ESTIMATED_MATRIX_CSV))?;
        let separation = separate_stage(&mixtures, &est, settings)?;
        write_separate(dir, &separation)?;
        Ok(separation)
    }

    /// Scores `separated.csv` against `sources.csv`; base pairs are
    /// recomputed from the mixtures and the estimated matrix.
    pub fn score(settings: &Settings, dir: &Path) -> Result<String> {
        let sources = csvio::read_signal(&dir.join(SOURCES_CSV))?;
        let mixtures = csvio::read_signal(&dir.join(MIXTURES_CSV))?;
        let est = csvio::read_estimated_matrix(&dir.join(ESTIMATED_MATRIX_CSV))?;
        let estimates = csvio::read_signal(&dir.join(SEPARATED_CSV))?;
        let pairs = separate_stage(&mixtures, &est, settings)?.pairs;
        let (report, diagnostics) = score_stage(&sources, &estimates, &pairs)?;
        write_score(dir, &est, &report, &diagnostics)?;
        Ok(summary(&est, &report, &diagnostics))
    }
}
