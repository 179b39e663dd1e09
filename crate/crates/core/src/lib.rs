//! State-dependent Hawkes modelling of bid-ask spread dynamics.
//!
//! The spread is an integer number of ticks that changes by signed jumps of
//! size `±1..=±K`. Each jump type `e` arrives with intensity
//! `f^e(S_{t-}) (μ^e + Σ_{e'} ∫ φ^{e,e'}(t-s) dS^{e'}_s)`, where the kernels
//! are sums of exponentials on a shared decay grid and the state functions
//! `f^e` modulate activity by the current spread.
//!
//! | module | purpose |
//! |---|---|
//! | [`model`] | domain types, excitation state, intensities |
//! | [`simulate`] | Ogata thinning, warm-start simulation, reduced presets |
//! | [`likelihood`] | exact log-likelihood, gradient, compensators |
//! | [`fit`] | maximum-likelihood estimation |
//! | [`stability`] | sufficient ergodicity conditions |
//! | [`stats`] | distributional and correlation diagnostics |
//! | [`forecast`] | Monte-Carlo forecaster, ACDP benchmark, evaluation |
//! | [`io`] | dataset files and synthetic data |

pub mod catalog;
pub mod error;
pub mod fit;
pub mod forecast;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod optim;
pub mod simulate;
pub mod stability;
pub mod stats;
pub mod workflow;

pub use error::{Error, Result};
pub use model::{EventType, ExcitationState, JumpEvent, ModelSpec, SpreadPath};
