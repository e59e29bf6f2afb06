//! Two-step underdetermined blind source separation for sparse signals.
//!
//! 1. [`matrix_est`]: the mixing matrix and the number of sources are read
//!    off the dominant modes of the quantized mixture ratio `x2/x1`.
//! 2. [`recovery`]: each sample is split between the two estimated columns
//!    with the smallest intersection angle to it.
//!
//! [`signal_gen`] synthesizes sparse time-hopping UWB sources to test the
//! method on, [`eval`] scores separations by correlation, and [`pipeline`]
//! wires everything into reproducible experiments driven by [`config`].

pub mod config;
pub mod csvio;
pub mod error;
pub mod eval;
pub mod matrix_est;
pub mod pipeline;
pub mod recovery;
pub mod signal;
pub mod signal_gen;
pub mod svg;

pub use config::{ExperimentConfig, Overrides, Settings};
pub use error::{Error, Result};
pub use eval::{align_and_score, correlation, SeparationReport};
pub use matrix_est::{build_histogram, compute_ratios, estimate_mixing, EstimatedMatrix, PeakSelection, Quantum, RatioHistogram};
pub use recovery::{sample_angle, select_base_pair, separate, solve_pair, AngleSet, BasePair};
pub use signal::{MixingMatrix, SignalMatrix};
pub use signal_gen::{generate_sources, mix, OverlapMode, PulseSpec, ThUwbConfig};
