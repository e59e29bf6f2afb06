//! Sparse time-hopping UWB source synthesis and instantaneous mixing.
//!
//! Each source is a train of Gaussian-derivative pulses, at most one per
//! frame, placed in a chip slot drawn from a seeded ChaCha8 stream. Every
//! frame has its own stream keyed by `(seed, frame index)`, so the two
//! [`OverlapMode`]s see identical draws wherever no redraw was needed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::{MixingMatrix, SignalMatrix};

/// Slot redraws attempted in [`OverlapMode::AtMostTwo`] before a pulse is dropped.
const MAX_REDRAWS: usize = 16;

/// Stream id reserved for random mixing matrices (frames use 0, 1, 2, ...).
const MIXING_STREAM: u64 = u64::MAX;

/// One Gaussian-derivative pulse shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    order: u8,
    width_samples: usize,
    amplitude: f64,
}

impl PulseSpec {
    pub fn new(order: u8, width_samples: usize, amplitude: f64) -> Result<Self> {
        if order > 2 {
            return Err(Error::config(format!(
                "pulse order must be 0, 1 or 2, got {order}"
            )));
        }
        if width_samples == 0 {
            return Err(Error::config("pulse width must be at least one sample"));
        }
        if !amplitude.is_finite() || amplitude == 0.0 {
            return Err(Error::config("pulse amplitude must be finite and nonzero"));
        }
        Ok(Self {
            order,
            width_samples,
            amplitude,
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn width_samples(&self) -> usize {
        self.width_samples
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Unnormalized k-th derivative of `exp(-2π u²)` at integer offset `t_rel`.
    fn raw(&self, t_rel: usize) -> f64 {
        let center = (self.width_samples as f64 - 1.0) / 2.0;
        let u = (t_rel as f64 - center) / (self.width_samples as f64 / 4.0);
        let bell = (-2.0 * PI * u * u).exp();
        match self.order {
            0 => bell,
            1 => -4.0 * PI * u * bell,
            _ => (16.0 * PI * PI * u * u - 4.0 * PI) * bell,
        }
    }

    /// The whole pulse, peak-normalized so the largest sample magnitude
    /// equals `amplitude`.
    pub fn waveform(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.width_samples).map(|t| self.raw(t)).collect();
        let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return raw;
        }
        raw.into_iter().map(|v| v / peak * self.amplitude).collect()
    }
}

/// Pulse value at offset `t_rel` within its support `[0, width)`.
pub fn gaussian_pulse(spec: &PulseSpec, t_rel: usize) -> Result<f64> {
    if t_rel >= spec.width_samples {
        return Err(Error::config(format!(
            "pulse offset {t_rel} outside width {}",
            spec.width_samples
        )));
    }
    Ok(spec.waveform()[t_rel])
}

/// How simultaneous pulses from different sources are allowed to overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapMode {
    /// Pairwise support overlap limited to a quarter chip (tails only);
    /// no sample is covered by three supports.
    AtMostTwo,
    /// Independent hopping; any number of sources may coincide.
    #[default]
    AllowThree,
}

impl std::str::FromStr for OverlapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "at_most_two" => Ok(Self::AtMostTwo),
            "allow_three" => Ok(Self::AllowThree),
            other => Err(Error::config(format!(
                "unknown overlap mode `{other}` (expected at_most_two or allow_three)"
            ))),
        }
    }
}

impl std::fmt::Display for OverlapMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AtMostTwo => "at_most_two",
            Self::AllowThree => "allow_three",
        })
    }
}

/// Time-hopping generator settings. Lengths are in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ThUwbConfig {
    pub chip_len: usize,
    pub frame_len: usize,
    pub total_len: usize,
    pub n_sources: usize,
    pub seed: u64,
    /// Probability that a frame carries a pulse.
    pub occupancy: f64,
    pub overlap: OverlapMode,
}

impl ThUwbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chip_len == 0 {
            return Err(Error::config("chip_len must be positive"));
        }
        if self.frame_len == 0 || !self.frame_len.is_multiple_of(self.chip_len) {
            return Err(Error::config(
                "frame_len must be a positive multiple of chip_len",
            ));
        }
        if self.total_len < self.frame_len {
            return Err(Error::config("total_len must be at least frame_len"));
        }
        if self.n_sources == 0 {
            return Err(Error::config("n_sources must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.occupancy) {
            return Err(Error::config("occupancy must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn slots_per_frame(&self) -> usize {
        self.frame_len / self.chip_len
    }

    /// Per-source frame phase offset in samples.
    pub fn phase(&self, source: usize) -> usize {
        source * (self.chip_len / self.n_sources)
    }
}

#[derive(Debug, Clone, Copy)]
struct Placement {
    start: usize,
    end: usize,
    source: usize,
}

fn overlap_len(a: (usize, usize), b: (usize, usize)) -> usize {
    a.1.min(b.1).saturating_sub(a.0.max(b.0))
}

struct Occupancy {
    placed: Vec<Placement>,
    cover: Vec<u8>,
    max_pair_overlap: usize,
}

impl Occupancy {
    fn new(total_len: usize, chip_len: usize) -> Self {
        Self {
            placed: Vec::new(),
            cover: vec![0; total_len],
            max_pair_overlap: chip_len / 4,
        }
    }

    fn admits(&self, source: usize, start: usize, end: usize) -> bool {
        if self.cover[start..end].iter().any(|&c| c >= 2) {
            return false;
        }
        self.placed
            .iter()
            .filter(|p| p.source != source)
            .all(|p| overlap_len((p.start, p.end), (start, end)) <= self.max_pair_overlap)
    }

    fn place(&mut self, source: usize, start: usize, end: usize) {
        for c in &mut self.cover[start..end] {
            *c = c.saturating_add(1);
        }
        self.placed.push(Placement { start, end, source });
    }
}

struct Draw {
    slot: usize,
    emit: bool,
    sign: f64,
}

/// Generates an N-column matrix of sparse TH-UWB pulse trains.
pub fn generate_sources(cfg: &ThUwbConfig, pulses: &[PulseSpec]) -> Result<SignalMatrix> {
    cfg.validate()?;
    if pulses.len() != cfg.n_sources {
        return Err(Error::config(format!(
            "{} pulse specs given for {} sources",
            pulses.len(),
            cfg.n_sources
        )));
    }
    if let Some(p) = pulses.iter().find(|p| p.width_samples > cfg.chip_len) {
        return Err(Error::config(format!(
            "pulse width {} exceeds chip length {}",
            p.width_samples, cfg.chip_len
        )));
    }

    let waveforms: Vec<Vec<f64>> = pulses.iter().map(PulseSpec::waveform).collect();
    let slots = cfg.slots_per_frame();
    let mut out = SignalMatrix::zeros(cfg.total_len, cfg.n_sources)?;
    let mut occupancy = Occupancy::new(cfg.total_len, cfg.chip_len);

    let n_frames = cfg.total_len.div_ceil(cfg.frame_len);
    for frame in 0..n_frames {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(frame as u64);
        let draws: Vec<Draw> = (0..cfg.n_sources)
            .map(|_| Draw {
                slot: rng.gen_range(0..slots),
                emit: rng.gen::<f64>() < cfg.occupancy,
                sign: if rng.gen::<bool>() { 1.0 } else { -1.0 },
            })
            .collect();

        let frame_start = frame * cfg.frame_len;
        let chip_start = |k: usize, slot: usize| frame_start + slot * cfg.chip_len + cfg.phase(k);
        let fits = |start: usize| start + cfg.chip_len <= cfg.total_len;

        for (k, draw) in draws.iter().enumerate() {
            if !draw.emit {
                continue;
            }
            let width = waveforms[k].len();
            let mut start = chip_start(k, draw.slot);
            if cfg.overlap == OverlapMode::AtMostTwo {
                let mut attempts = 0;
                while fits(start) && !occupancy.admits(k, start, start + width) {
                    if attempts == MAX_REDRAWS {
                        break;
                    }
                    start = chip_start(k, rng.gen_range(0..slots));
                    attempts += 1;
                }
                if fits(start) && !occupancy.admits(k, start, start + width) {
                    continue;
                }
            }
            if !fits(start) {
                continue;
            }
            occupancy.place(k, start, start + width);
            for (i, v) in waveforms[k].iter().enumerate() {
                out.set(start + i, k, draw.sign * v);
            }
        }
    }
    Ok(out)
}

/// Noiseless instantaneous mixture `x(t) = A s(t)`.
pub fn mix(sources: &SignalMatrix, a: &MixingMatrix) -> Result<SignalMatrix> {
    if sources.cols() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} source columns for a {}x{} mixing matrix",
            sources.cols(),
            a.rows(),
            a.cols()
        )));
    }
    let mut out = SignalMatrix::zeros(sources.rows(), a.rows())?;
    for t in 0..sources.rows() {
        let s = sources.row(t);
        for (m, x) in out.row_mut(t).iter_mut().enumerate() {
            *x = s.iter().enumerate().map(|(n, v)| a.get(m, n) * v).sum();
        }
    }
    Ok(out)
}

/// Random positive mixing matrix with entries in [0.1, 1.0] rounded to four
/// decimals; redrawn until its column ratios are at least 1e-3 apart.
pub fn random_mixing(rows: usize, cols: usize, seed: u64) -> Result<MixingMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::config("random mixing matrix must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MIXING_STREAM);
    loop {
        let entries: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| (rng.gen_range(0.1..=1.0_f64) * 1e4).round() / 1e4)
                    .collect()
            })
            .collect();
        let Ok(a) = MixingMatrix::new(entries) else {
            continue;
        };
        if rows < 2 {
            return Ok(a);
        }
        let ratios = a.column_ratios()?;
        let separated = ratios
            .iter()
            .enumerate()
            .all(|(i, r)| ratios[i + 1..].iter().all(|q| (r - q).abs() >= 1e-3));
        if separated {
            return Ok(a);
        }
    }
}
