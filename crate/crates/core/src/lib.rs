//! Single-carrier index modulation (SCIM) with faster-than-Nyquist and
//! multi-access precoding, sparse-recovery detectors and a Monte Carlo
//! link-level harness.

pub mod channel;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod imcodec;
pub mod linalg;
pub mod oracle;
pub mod precoding;

pub use channel::{draw_channel, transmit, ChannelRealization, NoiseSpec};
pub use detectors::{DetectionInput, DetectionResult, Detector, DetectorKind};
pub use error::{Result, ScimError};
pub use harness::{run_point, run_sweep, RunRow, RunSummary, SimConfig, SweepAxis};
pub use imcodec::{BitPayload, Constellation, ImConfig, ImMode, SparseBlock};
pub use linalg::{CMatrix, CVector, C64};
pub use precoding::{compose_measurement, MeasurementModel, Precoder, PrecoderKind, TimeSqueeze};
