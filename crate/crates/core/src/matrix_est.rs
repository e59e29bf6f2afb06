//! Mixing-matrix estimation from two-channel mixtures.
//!
//! At a sample where only source `i` is active, `x2/x1 = a_{2,i}/a_{1,i}`
//! regardless of the source value. Quantizing the per-sample ratios and
//! counting them turns every such sample into a vote for its column, so the
//! dominant bins of the histogram are the column ratios and their number is
//! the source count.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::SignalMatrix;

/// Ratios whose quantized index does not fit this bound are rejected.
const MAX_BIN_INDEX: f64 = 9.0e15;

/// Per-sample `x2/x1` for every sample with `|x1| > activity_eps`, in time order.
pub fn compute_ratios(mixtures: &SignalMatrix, activity_eps: f64) -> Result<Vec<f64>> {
    if mixtures.cols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "ratio estimation requires exactly 2 mixture channels, got {}",
            mixtures.cols()
        )));
    }
    if !(activity_eps > 0.0) {
        return Err(Error::config("activity_eps must be positive"));
    }
    Ok(mixtures
        .iter_rows()
        .filter(|x| x[0].abs() > activity_eps)
        .map(|x| x[1] / x[0])
        .collect())
}

/// Bin step used to quantize ratios. Decimal steps (1e-4 and friends) are
/// handled through their exact integer reciprocal so bin centers print
/// without representation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantum {
    step: f64,
    reciprocal: Option<f64>,
}

impl Quantum {
    pub fn new(step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config("quantum must be positive and finite"));
        }
        let inv = 1.0 / step;
        let reciprocal = (inv >= 1.0 && (inv - inv.round()).abs() <= 1e-9 * inv)
            .then(|| inv.round());
        Ok(Self { step, reciprocal })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Nearest bin index, ties away from zero.
    pub fn index(&self, value: f64) -> f64 {
        match self.reciprocal {
            Some(inv) => (value * inv).round(),
            None => (value / self.step).round(),
        }
    }

    pub fn value(&self, index: i64) -> f64 {
        match self.reciprocal {
            Some(inv) => index as f64 / inv,
            None => index as f64 * self.step,
        }
    }

    /// Decimal places needed to print a bin value; never fewer than four.
    pub fn decimals(&self) -> usize {
        let d = (-self.step.log10()).ceil();
        if d.is_finite() && d > 4.0 {
            d as usize
        } else {
            4
        }
    }
}

/// Occurrence counts of quantized ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioHistogram {
    quantum: Quantum,
    bins: BTreeMap<i64, u64>,
    active_samples: u64,
}

impl RatioHistogram {
    pub fn empty(quantum: Quantum) -> Self {
        Self {
            quantum,
            bins: BTreeMap::new(),
            active_samples: 0,
        }
    }

    pub fn quantum(&self) -> Quantum {
        self.quantum
    }

    pub fn active_samples(&self) -> u64 {
        self.active_samples
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    /// `(ratio, count)` pairs in ascending ratio order.
    pub fn bins(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.bins.iter().map(|(&k, &c)| (self.quantum.value(k), c))
    }

    pub fn count_of(&self, ratio: f64) -> u64 {
        let k = self.quantum.index(ratio) as i64;
        self.bins.get(&k).copied().unwrap_or(0)
    }

    fn insert(&mut self, index: i64, count: u64) {
        *self.bins.entry(index).or_default() += count;
        self.active_samples += count;
    }

    /// Sums counts of two histograms with the same quantum.
    pub fn merge(&mut self, other: &RatioHistogram) -> Result<()> {
        if self.quantum != other.quantum {
            return Err(Error::config("cannot merge histograms with different quanta"));
        }
        for (&k, &c) in &other.bins {
            self.insert(k, c);
        }
        Ok(())
    }

    /// Folds every bin into a heavier neighbor exactly one quantum away.
    /// Bins are visited by descending count (lower ratio first on ties); each
    /// unabsorbed bin absorbs its still-free immediate neighbors.
    fn merged_neighbors(&self) -> Vec<(i64, u64)> {
        let mut order: Vec<(i64, u64)> = self.bins.iter().map(|(&k, &c)| (k, c)).collect();
        order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut owner: BTreeMap<i64, i64> = BTreeMap::new();
        let mut totals: BTreeMap<i64, u64> = BTreeMap::new();
        for &(k, c) in &order {
            if owner.contains_key(&k) {
                continue;
            }
            owner.insert(k, k);
            let mut total = c;
            for n in [k - 1, k + 1] {
                if let (Some(&nc), false) = (self.bins.get(&n), owner.contains_key(&n)) {
                    owner.insert(n, k);
                    total += nc;
                }
            }
            totals.insert(k, total);
        }
        totals.into_iter().collect()
    }
}

/// Quantizes ratios to the nearest multiple of `quantum` and counts them.
pub fn build_histogram(ratios: &[f64], quantum: Quantum) -> Result<RatioHistogram> {
    let mut hist = RatioHistogram::empty(quantum);
    for (index, &r) in ratios.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::NonFinite { index });
        }
        let k = quantum.index(r);
        if k.abs() > MAX_BIN_INDEX {
            return Err(Error::NonFinite { index });
        }
        hist.insert(k as i64, 1);
    }
    Ok(hist)
}

/// Rule for picking the dominant bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakSelection {
    /// Keep every bin with `count >= fraction * max_count`.
    Fraction(f64),
    /// Keep the `k` heaviest bins plus anything tied with the k-th.
    TopK(usize),
}

impl Default for PeakSelection {
    fn default() -> Self {
        PeakSelection::Fraction(0.1)
    }
}

/// Normalized estimate `A' = [1 … 1; a_1 … a_N̂]` of the mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedMatrix {
    ratios: Vec<f64>,
}

/// Minimum separation between two estimated ratios.
pub const DEGENERATE_PAIR_TOL: f64 = 1e-12;

impl EstimatedMatrix {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InsufficientColumns { needed: 1, got: 0 });
        }
        if let Some(index) = ratios.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        for i in 0..ratios.len() {
            for j in i + 1..ratios.len() {
                if (ratios[i] - ratios[j]).abs() < DEGENERATE_PAIR_TOL {
                    return Err(Error::DegeneratePair { first: i, second: j });
                }
            }
        }
        Ok(Self { ratios })
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// Source-count estimate N̂.
    pub fn n_sources(&self) -> usize {
        self.ratios.len()
    }

    /// Column `k` of A′, i.e. `(1, a_k)`.
    pub fn column(&self, k: usize) -> [f64; 2] {
        [1.0, self.ratios[k]]
    }
}

/// Picks the dominant ratio modes, heaviest first.
pub fn estimate_mixing(hist: &RatioHistogram, selection: PeakSelection) -> Result<EstimatedMatrix> {
    if hist.is_empty() {
        return Err(Error::NoActiveSamples);
    }
    let mut merged = hist.merged_neighbors();
    merged.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let cutoff = match selection {
        PeakSelection::Fraction(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config("peak_fraction must lie in (0, 1)"));
            }
            let max = merged[0].1 as f64;
            merged
                .iter()
                .take_while(|(_, c)| *c as f64 >= f * max)
                .count()
        }
        PeakSelection::TopK(k) => {
            if k == 0 {
                return Err(Error::config("top_k must be at least 1"));
            }
            let k = k.min(merged.len());
            let kth = merged[k - 1].1;
            merged.iter().take_while(|(_, c)| *c >= kth).count()
        }
    };
    EstimatedMatrix::new(
        merged[..cutoff]
            .iter()
            .map(|&(k, _)| hist.quantum.value(k))
            .collect(),
    )
}

/// Writes the histogram as `ratio,count` CSV in ascending ratio order.
pub fn write_bar_graph<W: Write>(hist: &RatioHistogram, mut out: W) -> std::io::Result<()> {
    let decimals = hist.quantum.decimals();
    writeln!(out, "ratio,count")?;
    for (ratio, count) in hist.bins() {
        writeln!(out, "{ratio:.decimals$},{count}")?;
    }
    out.flush()
}

pub fn export_bar_graph(hist: &RatioHistogram, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_bar_graph(hist, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
