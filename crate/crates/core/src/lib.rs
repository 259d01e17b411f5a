//! Integrated sensing and backscatter communication (ISABC) workbench.
//!
//! A full-duplex base station serves a single-antenna user, powers a set of
//! passive backscatter tags through RF energy harvesting and senses those same
//! tags from their reflections. This crate generates the channels, evaluates
//! SINRs and harvested energy, minimizes the transmit power with an
//! alternating optimizer (MMSE receivers, semidefinite relaxation for the
//! transmit covariance, slack LP for the reflection coefficients) and runs the
//! benchmark schemes through a seeded Monte Carlo harness.

pub mod ao;
pub mod beampattern;
pub mod benchmarks;
pub mod channel;
mod error;
pub mod harness;
pub mod impairments;
pub mod linalg;
pub mod metrics;
pub mod sdp;

pub use ao::{ao_solve, AoConfig, AoStatus, ConvergenceTrace};
pub use benchmarks::{run_scheme, Scheme, SchemeConfig, SchemeFlags};
pub use channel::{build_channel_set, ChannelSet, FadingModel, FadingSpec, Scenario};
pub use error::{Error, Result};
pub use metrics::{BeamformingSolution, EhModel, EhParams, MetricsReport, NoiseSpec, SystemParams, Thresholds};
pub use sdp::{solve_sdp, SdpProblem, SdpSolution, SdpStatus, TraceConstraint};
