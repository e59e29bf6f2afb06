//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ubss::config::MixingSource;
use ubss::eval::pair_diagnostics;
use ubss::pipeline::{self, run_pipeline};
use ubss::recovery::separate_detailed;
use ubss::{
    correlation, generate_sources, mix, EstimatedMatrix, ExperimentConfig, MixingMatrix, OverlapMode, PulseSpec,
    Quantum, SignalMatrix,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("experiment-2 matrix estimation", criterion_1),
        ("experiment-1 ratio set", criterion_2),
        ("experiment-1 separation quality", criterion_3),
        ("single-source oracle", criterion_4),
        ("remix consistency", criterion_5),
        ("two-active exactness", criterion_6),
        ("correlation properties", criterion_7),
        ("experiment-2 overlap degradation", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn explicit_matrix(cfg: &ExperimentConfig) -> MixingMatrix {
    match &cfg.mixing {
        MixingSource::Explicit(a) => a.clone(),
        MixingSource::Random { .. } => panic!("built-in experiments use explicit matrices"),
    }
}

fn true_ratios(a: &MixingMatrix) -> Vec<f64> {
    (0..a.cols()).map(|k| a.get(1, k) / a.get(0, k)).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

/// Estimated ratios must equal the quantized true ratios exactly.
fn check_ratio_set(cfg: &ExperimentConfig, expected: &[f64]) -> Verdict {
    let sources = pipeline::generate_stage(cfg).map_err(|e| e.to_string())?;
    let mixtures = pipeline::mix_stage(cfg, &sources).map_err(|e| e.to_string())?;
    let (_, est) = pipeline::estimate_stage(&mixtures, &cfg.settings).map_err(|e| e.to_string())?;
    let q = Quantum::new(1e-4).unwrap();
    let want: Vec<f64> = sorted(expected.iter().map(|r| q.value(q.index(*r) as i64)).collect());
    let got = sorted(est.ratios().to_vec());
    if got != want || est.n_sources() != expected.len() {
        return Err(format!("estimated {{{}}} (N={}), expected {{{}}}", fmt_list(&got), est.n_sources(), fmt_list(&want)));
    }
    Ok(format!("{{{}}}, N={}", fmt_list(&got), est.n_sources()))
}

fn criterion_1() -> Verdict {
    let cfg = ExperimentConfig::experiment_two();
    let start = Instant::now();
    let detail = check_ratio_set(&cfg, &[0.5, 2.0, 1.8])?;
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("{detail} but took {elapsed:?}"));
    }
    Ok(format!("{detail} in {elapsed:?}"))
}

fn criterion_2() -> Verdict {
    let cfg = ExperimentConfig::experiment_one();
    let a = explicit_matrix(&cfg);
    let arithmetic = true_ratios(&a);
    let detail = check_ratio_set(&cfg, &arithmetic)?;
    let want = sorted(vec![2.0, 0.1667, 1.6667]);
    let got: Vec<f64> = sorted(arithmetic.iter().map(|r| (r * 1e4).round() / 1e4).collect());
    if got != want {
        return Err(format!("arithmetic ratios {{{}}}", fmt_list(&got)));
    }
    Ok(detail)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut minima = Vec::new();
    for seed in 1..=20 {
        let mut cfg = ExperimentConfig::experiment_one();
        cfg.th_uwb.seed = seed;
        cfg.th_uwb.overlap = OverlapMode::AtMostTwo;
        let out = run_pipeline(&cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        if out.report.n_sources_estimated != 3 {
            return Err(format!("seed {seed}: estimated {} sources", out.report.n_sources_estimated));
        }
        let coeffs = out.report.coefficients();
        if let Some(c) = coeffs.iter().find(|c| **c < 0.99) {
            return Err(format!("seed {seed}: matched correlation {c:.4} < 0.99"));
        }
        minima.push(out.report.min_abs_coefficient());
    }
    let elapsed = start.elapsed();
    let mean = minima.iter().sum::<f64>() / minima.len() as f64;
    let worst = minima.iter().copied().fold(f64::INFINITY, f64::min);
    let detail = format!("mean min C {mean:.4}, worst {worst:.4} over 20 seeds in {elapsed:?}");
    if mean < 0.99 || elapsed >= Duration::from_secs(10) {
        return Err(detail);
    }
    Ok(detail)
}

fn criterion_4() -> Verdict {
    let mut checked = 0usize;
    for base in [ExperimentConfig::experiment_one(), ExperimentConfig::experiment_two()] {
        let a = explicit_matrix(&base);
        let est = EstimatedMatrix::new(true_ratios(&a)).unwrap();
        for seed in 1..=5 {
            let mut cfg = base.clone();
            cfg.th_uwb.seed = seed;
            let sources = generate_sources(&cfg.th_uwb, &cfg.pulses).unwrap();
            for k in 0..sources.cols() {
                let mut cols = vec![vec![0.0; sources.rows()]; sources.cols()];
                cols[k] = sources.column(k);
                let single = SignalMatrix::from_columns(&cols).unwrap();
                let x = mix(&single, &a).unwrap();
                let eps = x.peak() * 1e-6;
                let sep = separate_detailed(&x, &est, eps).map_err(|e| e.to_string())?;
                for t in 0..x.rows() {
                    if sep.pairs[t].is_none() {
                        continue;
                    }
                    checked += 1;
                    let want = a.get(0, k) * single.get(t, k);
                    let got = sep.estimates.get(t, k);
                    if (got - want).abs() > 1e-10 * want.abs() {
                        return Err(format!("seed {seed} source {k} sample {t}: {got} vs {want}"));
                    }
                    for j in (0..est.n_sources()).filter(|&j| j != k) {
                        if sep.estimates.get(t, j) != 0.0 {
                            return Err(format!(
                                "seed {seed} source {k} sample {t}: column {j} holds {}",
                                sep.estimates.get(t, j)
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checked} active samples exact, other columns identically zero"))
}

/// Random ratios in [-10, 10] at least 0.01 apart.
fn random_ratios(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    while out.len() < n {
        let r = rng.gen_range(-10.0..10.0);
        if out.iter().all(|o| (o - r).abs() >= 0.01) {
            out.push(r);
        }
    }
    out
}

fn remix_error(est: &EstimatedMatrix, s: &[f64], x1: f64, x2: f64) -> f64 {
    let (mut r1, mut r2) = (0.0, 0.0);
    for (k, v) in s.iter().enumerate() {
        r1 += v;
        r2 += est.ratios()[k] * v;
    }
    ((r1 - x1).powi(2) + (r2 - x2).powi(2)).sqrt() / (x1 * x1 + x2 * x2).sqrt()
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut samples = 0usize;
    // 100 random runs of 100 samples.
    for run in 0..100 {
        let n = rng.gen_range(2..=6);
        let est = EstimatedMatrix::new(random_ratios(&mut rng, n)).unwrap();
        let data: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = SignalMatrix::from_row_major(100, 2, data).unwrap();
        let sep = separate_detailed(&x, &est, 1e-9).map_err(|e| e.to_string())?;
        for t in 0..x.rows() {
            if sep.pairs[t].is_none() {
                continue;
            }
            samples += 1;
            let err = remix_error(&est, sep.estimates.row(t), x.get(t, 0), x.get(t, 1));
            if err > 1e-10 {
                return Err(format!("run {run} sample {t}: relative remix error {err:e}"));
            }
            worst = worst.max(err);
        }
    }
    // The two built-in experiments, with estimated matrices.
    for cfg in [ExperimentConfig::experiment_one(), ExperimentConfig::experiment_two()] {
        let out = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        for t in 0..out.mixtures.rows() {
            if out.separation.pairs[t].is_none() {
                continue;
            }
            samples += 1;
            let err = remix_error(
                &out.estimate,
                out.separation.estimates.row(t),
                out.mixtures.get(t, 0),
                out.mixtures.get(t, 1),
            );
            if err > 1e-10 {
                return Err(format!("experiment sample {t}: relative remix error {err:e}"));
            }
            worst = worst.max(err);
        }
    }
    if samples < 10_000 {
        return Err(format!("only {samples} active samples checked"));
    }
    Ok(format!("{samples} active samples, worst relative error {worst:.2e}"))
}

/// Brute-force minimum-angle pair: smallest summed angular distance,
/// ties to the lexicographically first pair.
fn brute_force_pair(theta: f64, angles: &[f64]) -> (usize, usize) {
    let mut best = (0, 1);
    let mut best_cost = f64::INFINITY;
    for i in 0..angles.len() {
        for j in i + 1..angles.len() {
            let cost = (theta - angles[i]).abs() + (theta - angles[j]).abs();
            if cost < best_cost {
                best_cost = cost;
                best = (i, j);
            }
        }
    }
    best
}

fn criterion_6() -> Verdict {
    let wave = PulseSpec::new(0, 161, 1.0).unwrap().waveform();
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for (label, cfg) in [("exp-1", ExperimentConfig::experiment_one()), ("exp-2", ExperimentConfig::experiment_two())] {
        let a = explicit_matrix(&cfg);
        let ratios = true_ratios(&a);
        let est = EstimatedMatrix::new(ratios.clone()).unwrap();
        let angles: Vec<f64> = ratios.iter().map(|r| r.atan()).collect();
        let (mut total, mut wrong) = (0usize, 0usize);
        for i in 0..3 {
            for j in i + 1..3 {
                let mut rows = Vec::with_capacity(wave.len() * wave.len() * 2);
                let mut truth = Vec::new();
                for &u in &wave {
                    for &v in &wave {
                        let (si, sj) = (a.get(0, i) * u, a.get(0, j) * v);
                        rows.push(si + sj);
                        rows.push(ratios[i] * si + ratios[j] * sj);
                        truth.push((si, sj));
                    }
                }
                let x = SignalMatrix::from_row_major(truth.len(), 2, rows).unwrap();
                let sep = separate_detailed(&x, &est, 1e-300).map_err(|e| e.to_string())?;
                for (t, &(si, sj)) in truth.iter().enumerate() {
                    total += 1;
                    let theta = (x.get(t, 1) / x.get(t, 0)).atan();
                    let oracle = brute_force_pair(theta, &angles);
                    let chosen = sep.pairs[t].map(|p| (p.first(), p.second()));
                    if chosen != Some(oracle) {
                        return Err(format!("{label}: pair selection {chosen:?} disagrees with brute force {oracle:?}"));
                    }
                    if oracle != (i, j) {
                        wrong += 1;
                        continue;
                    }
                    let got = sep.estimates.row(t);
                    let err = ((got[i] - si).powi(2) + (got[j] - sj).powi(2)).sqrt() / (si * si + sj * sj).sqrt();
                    if err > 1e-6 {
                        return Err(format!("{label}: recovery error {err:e} on a correctly paired sample"));
                    }
                }
            }
        }
        let rate = wrong as f64 / total as f64;
        report.push(format!("{label} wrong-pair rate {rate:.4} ({wrong}/{total})"));
        if wrong > 0 {
            failures.push(label);
        }
    }
    let detail = format!("correct pairs recovered to 1e-6; {}", report.join(", "));
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; expected 0"))
    }
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..1000 {
        let n = rng.gen_range(2..200);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let c = correlation(&x, &y).map_err(|e| e.to_string())?;
        if c.abs() > 1.0 + 1e-12 {
            return Err(format!("trial {trial}: |C| = {}", c.abs()));
        }
        let cxx = correlation(&x, &x).map_err(|e| e.to_string())?;
        if (cxx - 1.0).abs() > 1e-12 {
            return Err(format!("trial {trial}: C(x,x) = {cxx}"));
        }
        let mut scale = || {
            let m = rng.gen_range(0.01..100.0);
            if rng.gen::<bool>() { m } else { -m }
        };
        let (alpha, beta) = (scale(), scale());
        let xs: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let ys: Vec<f64> = y.iter().map(|v| beta * v).collect();
        let cs = correlation(&xs, &ys).map_err(|e| e.to_string())?;
        let want = (alpha * beta).signum() * c;
        if (cs - want).abs() > 1e-12 {
            return Err(format!("trial {trial}: C(ax,by) = {cs}, expected {want}"));
        }
    }
    Ok("1000 random signal pairs".into())
}

fn criterion_8() -> Verdict {
    let three = ExperimentConfig::experiment_two();
    let mut two = three.clone();
    two.th_uwb.overlap = OverlapMode::AtMostTwo;
    let mut problems = Vec::new();
    let mut lines = Vec::new();
    let mut per_mode = Vec::new();
    for (label, cfg) in [("allow_three", &three), ("at_most_two", &two)] {
        let out = run_pipeline(cfg).map_err(|e| format!("{label}: {e}"))?;
        let diag = pair_diagnostics(&out.sources, &out.separation.pairs, &out.report.permutation())
            .map_err(|e| e.to_string())?;
        let coeffs: Vec<f64> = (0..3)
            .map(|k| out.report.coefficient_for_truth(k).unwrap_or(0.0))
            .collect();
        lines.push(format!(
            "{label} C=[{}] wrong pairs {} max simultaneous {}",
            fmt_list(&coeffs),
            diag.wrong_pair,
            diag.max_simultaneous()
        ));
        if (diag.wrong_pair > 0) != (diag.max_simultaneous() >= 3) {
            problems.push(format!(
                "{label}: {} wrong-pair samples with at most {} sources active",
                diag.wrong_pair,
                diag.max_simultaneous()
            ));
        }
        per_mode.push(coeffs);
    }
    for (k, (c3, c2)) in per_mode[0].iter().zip(&per_mode[1]).enumerate() {
        if c3 >= c2 {
            problems.push(format!("source {}: allow_three C not below at_most_two", k + 1));
        }
        if *c3 < 0.8 {
            problems.push(format!("source {}: allow_three C {c3:.4} < 0.8", k + 1));
        }
    }
    let detail = lines.join("; ");
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn criterion_9() -> Verdict {
    let mut compared = 0;
    for cfg in [ExperimentConfig::experiment_one(), ExperimentConfig::experiment_two()] {
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        pipeline::run_experiment(&cfg, first.path()).map_err(|e| e.to_string())?;
        pipeline::run_experiment(&cfg, second.path()).map_err(|e| e.to_string())?;
        let (a, b) = (csv_files(first.path()), csv_files(second.path()));
        if a.len() < 6 || a != b {
            return Err(format!("artifacts differ ({} vs {} csv files)", a.len(), b.len()));
        }
        compared += a.len();
    }
    Ok(format!("{compared} csv artifacts byte-identical across repeated runs"))
}
