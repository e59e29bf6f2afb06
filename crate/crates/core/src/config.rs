//! Experiment configuration files.
//!
//! Flat `key = value` lines grouped under `[section]` headers; `#` starts a
//! comment. Lists are comma-separated and matrix rows are separated by `;`:
//!
//! ```text
//! [signal]
//! chip_len = 161
//! frame_len = 644
//! total_len = 2898
//! seed = 1
//! overlap_mode = at_most_two
//!
//! [pulses]
//! orders = 0, 1, 2
//!
//! [mixing]
//! matrix = 0.4, 0.6, 0.3; 0.8, 0.1, 0.5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix_est::{PeakSelection, Quantum};
use crate::signal::MixingMatrix;
use crate::signal_gen::{random_mixing, OverlapMode, PulseSpec, ThUwbConfig};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_QUANTUM: f64 = 1e-4;
pub const DEFAULT_ACTIVITY_EPS: f64 = 1e-6;
pub const DEFAULT_PEAK_FRACTION: f64 = 0.1;
pub const DEFAULT_OUTPUT_DIR: &str = "ubss-out";

/// Where the mixing matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingSource {
    Explicit(MixingMatrix),
    /// Drawn from the experiment seed with [`random_mixing`].
    Random { rows: usize },
}

/// Estimation/separation knobs shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub quantum: Quantum,
    /// Activity threshold as a fraction of the mixture peak.
    pub activity_eps: f64,
    pub selection: PeakSelection,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            quantum: Quantum::new(DEFAULT_QUANTUM).expect("valid default quantum"),
            activity_eps: DEFAULT_ACTIVITY_EPS,
            selection: PeakSelection::Fraction(DEFAULT_PEAK_FRACTION),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub th_uwb: ThUwbConfig,
    pub pulses: Vec<PulseSpec>,
    pub mixing: MixingSource,
    pub settings: Settings,
    pub output_dir: PathBuf,
}

/// Command-line style overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub quantum: Option<f64>,
    pub peak_fraction: Option<f64>,
    pub top_k: Option<usize>,
    pub activity_eps: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply_settings(&self, settings: &mut Settings) -> Result<()> {
        if let Some(q) = self.quantum {
            settings.quantum = Quantum::new(q)?;
        }
        if let Some(f) = self.peak_fraction {
            settings.selection = PeakSelection::Fraction(f);
        }
        if let Some(k) = self.top_k {
            settings.selection = PeakSelection::TopK(k);
        }
        if let Some(eps) = self.activity_eps {
            settings.activity_eps = eps;
        }
        validate_settings(settings)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.th_uwb.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        self.apply_settings(&mut cfg.settings)
    }
}

fn validate_settings(s: &Settings) -> Result<()> {
    if !(s.activity_eps > 0.0 && s.activity_eps < 1.0) {
        return Err(Error::config("activity_eps must lie in (0, 1)"));
    }
    match s.selection {
        PeakSelection::Fraction(f) if !(f > 0.0 && f < 1.0) => {
            Err(Error::config("peak_fraction must lie in (0, 1)"))
        }
        PeakSelection::TopK(0) => Err(Error::config("top_k must be at least 1")),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses config text; `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let doc = Document::parse(text, origin)?;
        let cfg = doc.build()?;
        doc.reject_unused()?;
        Ok(cfg)
    }

    pub fn mixing_matrix(&self) -> Result<MixingMatrix> {
        match &self.mixing {
            MixingSource::Explicit(a) => Ok(a.clone()),
            MixingSource::Random { rows } => {
                random_mixing(*rows, self.th_uwb.n_sources, self.th_uwb.seed)
            }
        }
    }

    /// Checks cross-component constraints (pulse count, channel count).
    pub fn validate(&self) -> Result<()> {
        self.th_uwb.validate()?;
        if self.pulses.len() != self.th_uwb.n_sources {
            return Err(Error::config("one pulse spec per source is required"));
        }
        let (rows, cols) = match &self.mixing {
            MixingSource::Explicit(a) => {
                a.check_estimable()?;
                (a.rows(), a.cols())
            }
            MixingSource::Random { rows } => (*rows, self.th_uwb.n_sources),
        };
        if rows != 2 {
            return Err(Error::config(format!(
                "estimation requires exactly 2 mixture channels, mixing matrix has {rows} rows"
            )));
        }
        if cols != self.th_uwb.n_sources {
            return Err(Error::config(format!(
                "mixing matrix has {cols} columns for {} sources",
                self.th_uwb.n_sources
            )));
        }
        validate_settings(&self.settings)
    }

    fn standard_setup(a: Vec<Vec<f64>>, overlap: OverlapMode, dir: &str) -> Self {
        Self {
            th_uwb: ThUwbConfig {
                chip_len: 161,
                frame_len: 644,
                total_len: 2898,
                n_sources: 3,
                seed: DEFAULT_SEED,
                occupancy: 1.0,
                overlap,
            },
            pulses: (0..3)
                .map(|o| PulseSpec::new(o, 161, 1.0).expect("valid pulse"))
                .collect(),
            mixing: MixingSource::Explicit(MixingMatrix::new(a).expect("valid matrix")),
            settings: Settings::default(),
            output_dir: PathBuf::from(dir),
        }
    }

    /// Three Gaussian-family TH-UWB sources, at most two overlapping.
    pub fn experiment_one() -> Self {
        Self::standard_setup(
            vec![vec![0.4, 0.6, 0.3], vec![0.8, 0.1, 0.5]],
            OverlapMode::AtMostTwo,
            "out/experiment1",
        )
    }

    /// Same sources with independent hopping, so all three may overlap.
    pub fn experiment_two() -> Self {
        Self::standard_setup(
            vec![vec![0.5, 0.4, 0.3], vec![0.9, 0.2, 0.6]],
            OverlapMode::AllowThree,
            "out/experiment2",
        )
    }
}

struct Entry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

struct Document {
    origin: PathBuf,
    entries: BTreeMap<(String, String), Entry>,
}

const SECTIONS: [&str; 5] = ["signal", "pulses", "mixing", "estimation", "output"];

impl Document {
    fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut doc = Document {
            origin: origin.to_path_buf(),
            entries: BTreeMap::new(),
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| doc.err(line_no, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(doc.err(line_no, format!("unknown section [{name}]")));
                }
                section = Some(name.to_owned());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(doc.err(line_no, "expected `key = value`"));
            };
            let Some(sec) = &section else {
                return Err(doc.err(line_no, "key outside of any [section]"));
            };
            let key = key.trim().to_owned();
            let entry = Entry {
                line: line_no,
                value: value.trim().to_owned(),
                used: std::cell::Cell::new(false),
            };
            if let Some(prev) = doc.entries.insert((sec.clone(), key.clone()), entry) {
                return Err(doc.err(
                    line_no,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        Ok(doc)
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line,
            message: message.into(),
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.entries.get(&(section.to_owned(), key.to_owned()))?;
        e.used.set(true);
        Some(e)
    }

    fn parse_one<T: FromStr>(&self, e: &Entry, text: &str, what: &str) -> Result<T> {
        text.trim()
            .parse()
            .map_err(|_| self.err(e.line, format!("invalid {what} `{}`", text.trim())))
    }

    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.raw(section, key)
            .map(|e| self.parse_one(e, &e.value, key))
            .transpose()
    }

    fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?.ok_or_else(|| {
            self.err(0, format!("missing required key `{key}` in [{section}]"))
        })
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<(usize, Vec<T>)>> {
        let Some(e) = self.raw(section, key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(',')
            .map(|v| self.parse_one(e, v, key))
            .collect::<Result<Vec<T>>>()?;
        Ok(Some((e.line, items)))
    }

    /// Wraps a component validation error with the line of `key`.
    fn at<T>(&self, section: &str, key: &str, r: Result<T>) -> Result<T> {
        let line = self
            .entries
            .get(&(section.to_owned(), key.to_owned()))
            .map_or(0, |e| e.line);
        r.map_err(|e| self.err(line, e.to_string()))
    }

    fn build(&self) -> Result<ExperimentConfig> {
        let chip_len: usize = self.require("signal", "chip_len")?;
        let frame_len: usize = self.require("signal", "frame_len")?;
        let total_len: usize = self.require("signal", "total_len")?;
        let seed = self.get("signal", "seed")?.unwrap_or(DEFAULT_SEED);
        let occupancy = self.get("signal", "occupancy")?.unwrap_or(1.0);
        let overlap = self.get("signal", "overlap_mode")?.unwrap_or_default();

        let (orders_line, orders) = self
            .list::<u8>("pulses", "orders")?
            .ok_or_else(|| self.err(0, "missing required key `orders` in [pulses]"))?;
        let n = orders.len();
        let widths = self
            .list::<usize>("pulses", "widths")?
            .map_or(vec![chip_len; n], |(_, w)| w);
        let amplitudes = self
            .list::<f64>("pulses", "amplitudes")?
            .map_or(vec![1.0; n], |(_, a)| a);
        if widths.len() != n || amplitudes.len() != n {
            return Err(self.err(orders_line, "orders, widths and amplitudes differ in length"));
        }
        let pulses = orders
            .iter()
            .zip(&widths)
            .zip(&amplitudes)
            .map(|((&o, &w), &a)| PulseSpec::new(o, w, a))
            .collect::<Result<Vec<_>>>();
        let pulses = self.at("pulses", "orders", pulses)?;

        let matrix = self.raw("mixing", "matrix").ok_or_else(|| {
            self.err(0, "missing required key `matrix` in [mixing]")
        })?;
        let mixing = if matrix.value == "random" {
            MixingSource::Random {
                rows: self.get("mixing", "rows")?.unwrap_or(2),
            }
        } else {
            let rows = matrix
                .value
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|v| self.parse_one(matrix, v, "matrix entry"))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            MixingSource::Explicit(self.at("mixing", "matrix", MixingMatrix::new(rows))?)
        };

        let mut settings = Settings::default();
        if let Some(q) = self.get::<f64>("estimation", "quantum")? {
            settings.quantum = self.at("estimation", "quantum", Quantum::new(q))?;
        }
        if let Some(eps) = self.get("estimation", "activity_eps")? {
            settings.activity_eps = eps;
        }
        if let Some(f) = self.get("estimation", "peak_fraction")? {
            settings.selection = PeakSelection::Fraction(f);
        }
        if let Some(k) = self.get("estimation", "top_k")? {
            settings.selection = PeakSelection::TopK(k);
        }

        let output_dir = self
            .get::<String>("output", "dir")?
            .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), PathBuf::from);

        let cfg = ExperimentConfig {
            th_uwb: ThUwbConfig {
                chip_len,
                frame_len,
                total_len,
                n_sources: n,
                seed,
                occupancy,
                overlap,
            },
            pulses,
            mixing,
            settings,
            output_dir,
        };
        cfg.validate().map_err(|e| match e {
            parse @ Error::Parse { .. } => parse,
            other => self.err(0, other.to_string()),
        })?;
        Ok(cfg)
    }

    fn reject_unused(&self) -> Result<()> {
        match self.entries.iter().find(|(_, e)| !e.used.get()) {
            Some(((sec, key), e)) => Err(self.err(e.line, format!("unknown key `{key}` in [{sec}]"))),
            None => Ok(()),
        }
    }
}
