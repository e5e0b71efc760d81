//! Monte Carlo experiment runner: configuration, energy bookkeeping,
//! trial loop, sweeps and CSV output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod sim;

pub use config::{ChannelModel, IerRule, PrecoderChoice, ResolvedSystem, SimConfig, CONFIG_KEYS};
pub use metrics::{bit_energy, snr_to_noise, wilson, PowerMoments, RateEstimate};
pub use output::{coherence_csv, summary_csv, waveform_csv, waveform_samples, write_summary, SUMMARY_HEADER};
pub use sim::{apply_axis, block_bit_errors, run_point, run_sweep, trial_rng, PointFailure, RunRow, RunSummary, SweepAxis};
