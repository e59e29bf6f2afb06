//! Per-sample source recovery with the minimum-intersection-angle rule.
//!
//! Each active mixture sample is attributed to the two estimated columns
//! whose line angles `arctan(a_k)` lie closest to the sample's own angle
//! `arctan(x2/x1)`, then split between them with an exact 2×2 solve. The
//! two columns do not have to bracket the sample angle.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::matrix_est::{EstimatedMatrix, DEGENERATE_PAIR_TOL};
use crate::signal::SignalMatrix;

/// Line angles of the estimated columns, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    angles: Vec<f64>,
}

impl AngleSet {
    pub fn from_estimate(est: &EstimatedMatrix) -> Result<Self> {
        let angles: Vec<f64> = est.ratios().iter().map(|r| r.atan()).collect();
        for i in 0..angles.len() {
            for j in i + 1..angles.len() {
                if angles[i] == angles[j] {
                    return Err(Error::DegeneratePair { first: i, second: j });
                }
            }
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Two distinct column indices, `first < second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasePair {
    first: usize,
    second: usize,
}

impl BasePair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::config("base pair needs two distinct columns"));
        }
        Ok(Self {
            first: a.min(b),
            second: a.max(b),
        })
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn second(&self) -> usize {
        self.second
    }

    pub fn contains(&self, k: usize) -> bool {
        self.first == k || self.second == k
    }
}

/// Line angle of a mixture sample in `(-π/2, π/2]`.
///
/// Returns [`Error::InactiveSample`] when both channels are within
/// `activity_eps` of zero. `x1 == 0` maps to `π/2`.
pub fn sample_angle(x1: f64, x2: f64, activity_eps: f64) -> Result<f64> {
    if x1.abs().max(x2.abs()) <= activity_eps {
        return Err(Error::InactiveSample);
    }
    if x1 == 0.0 {
        return Ok(FRAC_PI_2);
    }
    Ok((x2 / x1).atan())
}

/// The two columns with the smallest intersection angle `|θ_t − θ_k|`.
/// Equal angles go to the lower column index.
pub fn select_base_pair(theta_t: f64, angles: &AngleSet) -> Result<BasePair> {
    if angles.len() < 2 {
        return Err(Error::InsufficientColumns {
            needed: 2,
            got: angles.len(),
        });
    }
    let mut best = (usize::MAX, f64::INFINITY);
    let mut next = (usize::MAX, f64::INFINITY);
    for (k, theta) in angles.angles.iter().enumerate() {
        let d = (theta_t - theta).abs();
        if d < best.1 {
            next = best;
            best = (k, d);
        } else if d < next.1 {
            next = (k, d);
        }
    }
    BasePair::new(best.0, next.0)
}

/// Relative residual below which a sample counts as lying on one column's line.
const COLLINEAR_TOL: f64 = 1e-12;

/// Splits `(x1, x2)` onto columns `(1, a_i)` and `(1, a_j)`.
///
/// A sample on one column's line to within rounding is assigned wholly to
/// that column, so the partner gets an exact zero instead of rounding residue.
fn solve_two(a_i: f64, a_j: f64, x1: f64, x2: f64) -> (f64, f64) {
    let on_line = |a: f64| (x2 - a * x1).abs() <= COLLINEAR_TOL * (x2.abs() + (a * x1).abs());
    if on_line(a_i) {
        return (x1, 0.0);
    }
    if on_line(a_j) {
        return (0.0, x1);
    }
    let det = a_j - a_i;
    ((a_j * x1 - x2) / det, (x2 - a_i * x1) / det)
}

/// Source estimates for one sample: the pair's two values, zeros elsewhere.
pub fn solve_pair(est: &EstimatedMatrix, pair: BasePair, x1: f64, x2: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; est.n_sources()];
    solve_pair_into(est.ratios(), pair, x1, x2, &mut out)?;
    Ok(out)
}

fn solve_pair_into(ratios: &[f64], pair: BasePair, x1: f64, x2: f64, out: &mut [f64]) -> Result<()> {
    let (i, j) = (pair.first, pair.second);
    if j >= ratios.len() {
        return Err(Error::InsufficientColumns {
            needed: j + 1,
            got: ratios.len(),
        });
    }
    if (ratios[j] - ratios[i]).abs() < DEGENERATE_PAIR_TOL {
        return Err(Error::DegeneratePair { first: i, second: j });
    }
    let (si, sj) = solve_two(ratios[i], ratios[j], x1, x2);
    out[i] = si;
    out[j] = sj;
    Ok(())
}

/// Separated sources plus the base pair chosen at each sample
/// (`None` for inactive samples).
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub estimates: SignalMatrix,
    pub pairs: Vec<Option<BasePair>>,
}

/// Recovers N̂ source estimates from two-channel mixtures.
///
/// Column `k` estimates the source with ratio `a_k`, scaled by that
/// source's unknown first-row mixing coefficient.
pub fn separate(mixtures: &SignalMatrix, est: &EstimatedMatrix, activity_eps: f64) -> Result<SignalMatrix> {
    separate_detailed(mixtures, est, activity_eps).map(|s| s.estimates)
}

pub fn separate_detailed(
    mixtures: &SignalMatrix,
    est: &EstimatedMatrix,
    activity_eps: f64,
) -> Result<Separation> {
    if mixtures.cols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "separation requires exactly 2 mixture channels, got {}",
            mixtures.cols()
        )));
    }
    if est.n_sources() < 2 {
        return Err(Error::InsufficientColumns {
            needed: 2,
            got: est.n_sources(),
        });
    }
    let angles = AngleSet::from_estimate(est)?;
    let mut estimates = SignalMatrix::zeros(mixtures.rows(), est.n_sources())?;
    let mut pairs = Vec::with_capacity(mixtures.rows());
    for (t, x) in mixtures.iter_rows().enumerate() {
        let theta = match sample_angle(x[0], x[1], activity_eps) {
            Ok(theta) => theta,
            Err(Error::InactiveSample) => {
                pairs.push(None);
                continue;
            }
            Err(e) => return Err(e.at_sample(t)),
        };
        let pair = select_base_pair(theta, &angles).map_err(|e| e.at_sample(t))?;
        solve_pair_into(est.ratios(), pair, x[0], x[1], estimates.row_mut(t))
            .map_err(|e| e.at_sample(t))?;
        pairs.push(Some(pair));
    }
    Ok(Separation { estimates, pairs })
}
