//! Separation quality: correlation index, permutation alignment and
//! base-pair diagnostics against known ground truth.

use crate::error::{Error, Result};
use crate::recovery::BasePair;
use crate::signal::SignalMatrix;

/// Largest estimate count accepted by [`align_exhaustive`].
pub const EXHAUSTIVE_MAX: usize = 6;

/// Normalized covariance `cov(x,y) / (sqrt(cov(x,x)) sqrt(cov(y,y)))`,
/// with mean removal and `1/(T-1)` normalization.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "correlation of sequences with lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DimensionMismatch(
            "correlation needs at least 2 samples".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_flat(sxx, x) || is_flat(syy, y) {
        return Err(Error::DegenerateSignal);
    }
    let d = n - 1.0;
    Ok((sxy / d) / ((sxx / d).sqrt() * (syy / d).sqrt()))
}

/// Centered energy indistinguishable from rounding residue of a constant.
fn is_flat(centered: f64, v: &[f64]) -> bool {
    let raw: f64 = v.iter().map(|a| a * a).sum();
    centered <= f64::EPSILON * f64::EPSILON * v.len() as f64 * raw
}

/// One estimated column matched to one true source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub estimate: usize,
    pub truth: usize,
    /// Signed correlation; 0 when the estimate has zero variance.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Matched pairs ordered by estimate index; `min(N̂, N)` entries.
    pub matches: Vec<Match>,
    pub n_sources_estimated: usize,
    pub n_sources_true: usize,
}

impl SeparationReport {
    /// Estimated column → true source index (`None` if unmatched).
    pub fn permutation(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.n_sources_estimated];
        for m in &self.matches {
            p[m.estimate] = Some(m.truth);
        }
        p
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.matches.iter().map(|m| m.correlation).collect()
    }

    /// Correlation of the estimate matched to true source `k`.
    pub fn coefficient_for_truth(&self, k: usize) -> Option<f64> {
        self.matches.iter().find(|m| m.truth == k).map(|m| m.correlation)
    }

    pub fn min_abs_coefficient(&self) -> f64 {
        self.matches
            .iter()
            .map(|m| m.correlation.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// `C[e][k]` for every estimate/truth column pair, `None` when degenerate.
fn correlation_table(truth: &SignalMatrix, estimates: &SignalMatrix) -> Result<Vec<Vec<Option<f64>>>> {
    if truth.rows() != estimates.rows() {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} samples, estimates have {}",
            truth.rows(),
            estimates.rows()
        )));
    }
    let truth_cols: Vec<Vec<f64>> = (0..truth.cols()).map(|k| truth.column(k)).collect();
    (0..estimates.cols())
        .map(|e| {
            let est = estimates.column(e);
            truth_cols
                .iter()
                .map(|t| match correlation(&est, t) {
                    Ok(c) => Ok(Some(c)),
                    Err(Error::DegenerateSignal) => Ok(None),
                    Err(other) => Err(other),
                })
                .collect()
        })
        .collect()
}

fn report(mut matches: Vec<Match>, n_est: usize, n_true: usize) -> SeparationReport {
    matches.sort_by_key(|m| m.estimate);
    SeparationReport {
        matches,
        n_sources_estimated: n_est,
        n_sources_true: n_true,
    }
}

/// Greedy max-|C| matching of estimated columns to true sources.
///
/// Pairs are taken by decreasing |C| (lower estimate, then lower truth
/// index on ties); columns with zero variance are matched last with C = 0.
pub fn align_and_score(truth: &SignalMatrix, estimates: &SignalMatrix) -> Result<SeparationReport> {
    let table = correlation_table(truth, estimates)?;
    let (n_est, n_true) = (estimates.cols(), truth.cols());
    let mut used_e = vec![false; n_est];
    let mut used_t = vec![false; n_true];
    let mut matches = Vec::new();
    for _ in 0..n_est.min(n_true) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (e, row) in table.iter().enumerate().filter(|(e, _)| !used_e[*e]) {
            for (k, c) in row.iter().enumerate().filter(|(k, _)| !used_t[*k]) {
                let score = c.map_or(-1.0, f64::abs);
                if best.is_none_or(|(_, _, s)| score > s) {
                    best = Some((e, k, score));
                }
            }
        }
        let (e, k, _) = best.expect("unmatched columns remain");
        used_e[e] = true;
        used_t[k] = true;
        matches.push(Match {
            estimate: e,
            truth: k,
            correlation: table[e][k].unwrap_or(0.0),
        });
    }
    Ok(report(matches, n_est, n_true))
}

/// Matching that maximizes the total |C| over all injective assignments.
pub fn align_exhaustive(truth: &SignalMatrix, estimates: &SignalMatrix) -> Result<SeparationReport> {
    if estimates.cols() > EXHAUSTIVE_MAX {
        return Err(Error::config(format!(
            "exhaustive alignment supports at most {EXHAUSTIVE_MAX} estimates"
        )));
    }
    let table = correlation_table(truth, estimates)?;
    let (n_est, n_true) = (estimates.cols(), truth.cols());
    let score = |e: usize, k: usize| table[e][k].map_or(0.0, f64::abs);

    // Assign each estimate a distinct truth index or leave it unmatched,
    // keeping exactly min(n_est, n_true) matches.
    fn search(
        e: usize,
        n_est: usize,
        n_true: usize,
        want: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        best: &mut (f64, Vec<(usize, usize)>),
        score: &dyn Fn(usize, usize) -> f64,
    ) {
        let remaining = n_est - e;
        if current.len() + remaining < want {
            return;
        }
        if e == n_est {
            let total: f64 = current.iter().map(|&(e, k)| score(e, k)).sum();
            if total > best.0 {
                *best = (total, current.clone());
            }
            return;
        }
        for k in 0..n_true {
            if !used[k] {
                used[k] = true;
                current.push((e, k));
                search(e + 1, n_est, n_true, want, used, current, best, score);
                current.pop();
                used[k] = false;
            }
        }
        search(e + 1, n_est, n_true, want, used, current, best, score);
    }

    let want = n_est.min(n_true);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    search(0, n_est, n_true, want, &mut vec![false; n_true], &mut Vec::new(), &mut best, &score);
    let matches = best
        .1
        .into_iter()
        .map(|(e, k)| Match {
            estimate: e,
            truth: k,
            correlation: table[e][k].unwrap_or(0.0),
        })
        .collect();
    Ok(report(matches, n_est, n_true))
}

/// How often the chosen base pair failed to cover the truly active sources.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairDiagnostics {
    /// Samples where a pair was chosen.
    pub active_samples: usize,
    /// Active samples whose true active set is not inside the chosen pair.
    pub wrong_pair: usize,
    /// Histogram of simultaneously active true sources per sample, index = count.
    pub by_active_count: Vec<usize>,
    /// Wrong-pair samples split by true active count.
    pub wrong_by_active_count: Vec<usize>,
}

impl PairDiagnostics {
    pub fn max_simultaneous(&self) -> usize {
        self.by_active_count.iter().rposition(|&c| c > 0).unwrap_or(0)
    }

    pub fn wrong_pair_rate(&self) -> f64 {
        if self.active_samples == 0 {
            0.0
        } else {
            self.wrong_pair as f64 / self.active_samples as f64
        }
    }
}

/// Compares chosen pairs with the true support of `truth` (a source is
/// active where its sample is nonzero). `permutation` maps estimated
/// column → true source, as from [`SeparationReport::permutation`].
pub fn pair_diagnostics(
    truth: &SignalMatrix,
    pairs: &[Option<BasePair>],
    permutation: &[Option<usize>],
) -> Result<PairDiagnostics> {
    if truth.rows() != pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} pair entries for {} samples",
            pairs.len(),
            truth.rows()
        )));
    }
    let mut d = PairDiagnostics {
        by_active_count: vec![0; truth.cols() + 1],
        wrong_by_active_count: vec![0; truth.cols() + 1],
        ..Default::default()
    };
    for (row, pair) in truth.iter_rows().zip(pairs) {
        let active: Vec<usize> = (0..row.len()).filter(|&k| row[k] != 0.0).collect();
        d.by_active_count[active.len()] += 1;
        let Some(pair) = pair else { continue };
        d.active_samples += 1;
        let covered = |k: usize| {
            [pair.first(), pair.second()]
                .iter()
                .any(|&e| permutation.get(e).copied().flatten() == Some(k))
        };
        if !active.iter().all(|&k| covered(k)) {
            d.wrong_pair += 1;
            d.wrong_by_active_count[active.len()] += 1;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn signal(n: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    #[test]
    fn self_correlation_is_one() {
        let x = signal(64, |t| (t as f64 * 0.3).sin() + 0.1);
        assert!((correlation(&x, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_scaling_is_minus_one() {
        let x = signal(64, |t| (t as f64 * 0.3).cos());
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v).collect();
        assert!((correlation(&x, &y).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_value() {
        // Centered sums: Sxy = 4, Sxx = Syy = 5.
        let c = correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((c - 0.8).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateSignal)));
        assert!(matches!(correlation(&[0.1; 50], &[0.0; 50]), Err(Error::DegenerateSignal)));
        assert!(correlation(&[1.0], &[1.0]).is_err());
        assert!(correlation(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    fn columns(cols: &[Vec<f64>]) -> SignalMatrix {
        SignalMatrix::from_columns(cols).unwrap()
    }

    fn three_sources() -> Vec<Vec<f64>> {
        vec![
            signal(100, |t| (t as f64 * 0.21).sin()),
            signal(100, |t| if t % 7 == 0 { 1.0 } else { 0.0 }),
            signal(100, |t| (t as f64 * 0.05).cos().powi(3)),
        ]
    }

    #[test]
    fn identity_alignment() {
        let s = columns(&three_sources());
        let r = align_and_score(&s, &s).unwrap();
        assert_eq!(r.permutation(), vec![Some(0), Some(1), Some(2)]);
        for c in r.coefficients() {
            assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swapped_and_negated_columns() {
        let src = three_sources();
        let truth = columns(&src);
        let est = columns(&[
            src[2].clone(),
            src[0].iter().map(|v| -2.0 * v).collect(),
            src[1].clone(),
        ]);
        for r in [align_and_score(&truth, &est).unwrap(), align_exhaustive(&truth, &est).unwrap()] {
            assert_eq!(r.permutation(), vec![Some(2), Some(0), Some(1)]);
            let c = r.coefficients();
            assert!((c[0] - 1.0).abs() < 1e-12);
            assert!((c[1] + 1.0).abs() < 1e-12);
            assert!((c[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_estimate_is_matched_last_with_zero() {
        let src = three_sources();
        let truth = columns(&src[..2]);
        let est = columns(&[vec![0.0; 100], src[1].clone(), src[0].clone()]);
        let r = align_and_score(&truth, &est).unwrap();
        assert_eq!(r.matches.len(), 2);
        assert_eq!(r.permutation(), vec![None, Some(1), Some(0)]);

        let truth = columns(&src);
        let est = columns(&[src[0].clone(), vec![0.0; 100]]);
        let r = align_and_score(&truth, &est).unwrap();
        assert_eq!(r.matches[1].correlation, 0.0);
    }

    #[test]
    fn sample_count_mismatch() {
        let a = SignalMatrix::zeros(10, 2).unwrap();
        let b = SignalMatrix::zeros(11, 2).unwrap();
        assert!(align_and_score(&a, &b).is_err());
    }

    #[test]
    fn exhaustive_total_at_least_greedy() {
        let base = signal(400, |t| ((t * 7919) % 101) as f64 / 50.0 - 1.0);
        let other = signal(400, |t| ((t * 104729) % 97) as f64 / 48.0 - 1.0);
        let truth = columns(&[base.clone(), other.clone()]);
        let mixed = |a: f64| base.iter().zip(&other).map(|(x, y)| a * x + (1.0 - a) * y).collect::<Vec<_>>();
        let est = columns(&[mixed(0.75), mixed(0.55)]);
        let g = align_and_score(&truth, &est).unwrap();
        let x = align_exhaustive(&truth, &est).unwrap();
        let total = |r: &SeparationReport| r.coefficients().iter().map(|c| c.abs()).sum::<f64>();
        assert!(total(&x) >= total(&g) - 1e-12);
    }

    #[test]
    fn diagnostics_count_uncovered_sources() {
        let truth = SignalMatrix::from_row_major(
            4,
            3,
            vec![
                1.0, 0.0, 0.0, //
                1.0, 1.0, 0.0, //
                1.0, 1.0, 1.0, //
                0.0, 0.0, 0.0,
            ],
        )
        .unwrap();
        let p01 = BasePair::new(0, 1).unwrap();
        let p12 = BasePair::new(1, 2).unwrap();
        let pairs = vec![Some(p01), Some(p12), Some(p01), None];
        let perm = vec![Some(0), Some(1), Some(2)];
        let d = pair_diagnostics(&truth, &pairs, &perm).unwrap();
        assert_eq!(d.active_samples, 3);
        assert_eq!(d.wrong_pair, 2);
        assert_eq!(d.by_active_count, vec![1, 1, 1, 1]);
        assert_eq!(d.wrong_by_active_count, vec![0, 0, 1, 1]);
        assert_eq!(d.max_simultaneous(), 3);
    }

    proptest! {
        #[test]
        fn correlation_properties(
            x in proptest::collection::vec(-100.0f64..100.0, 8..64),
            seed in any::<u64>(),
            alpha in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
            beta in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        ) {
            let y: Vec<f64> = x.iter().enumerate()
                .map(|(i, v)| v * 0.3 + ((seed.wrapping_add(i as u64 * 2654435761) % 1000) as f64 - 500.0) / 10.0)
                .collect();
            prop_assume!(correlation(&x, &y).is_ok());
            let c = correlation(&x, &y).unwrap();
            prop_assert!(c.abs() <= 1.0 + 1e-12);
            prop_assert_eq!(c, correlation(&y, &x).unwrap());
            let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let by: Vec<f64> = y.iter().map(|v| beta * v).collect();
            let scaled = correlation(&ax, &by).unwrap();
            prop_assert!((scaled - (alpha * beta).signum() * c).abs() <= 1e-12);
        }
    }
}
