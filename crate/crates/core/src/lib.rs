//! Spatio-temporal MIMO radar waveform synthesis for low-resolution,
//! phase-only DACs.
//!
//! The waveform `x` (N antennas by T samples, every entry drawn from a
//! `b`-bit phase alphabet) is chosen so that the field radiated towards `K`
//! probing directions matches a desired per-frequency intensity profile.
//! The non-convex least-squares fit is solved with a damped min-sum GAMP
//! iteration on top of an FFT-structured beam operator.

pub mod cli;
pub mod gamp;
pub mod metrics;
pub mod model;
pub mod operator;
pub mod oracle;

pub use gamp::{solve, GampParams, GampState, SolverError, SynthesisResult};
pub use metrics::{evaluate, MetricsError, MetricsReport};
pub use model::{ConfigError, Constellation, DesiredPattern, Passband, RadarConfig};
pub use operator::{BeamOperator, DenseMatrix, OperatorError, SteeringMatrixSet};
pub use oracle::{brute_force_solve, OracleError, OracleResult};
