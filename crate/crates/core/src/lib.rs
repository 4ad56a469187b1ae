//! Distributed binary hypothesis detection over one-bit sensor messages.
//!
//! Each of `K` sensors observes a noisy version of a binary state, maps the
//! observation through a probability controller `G(x)` and emits a single
//! dithered bit with `P(u = 1 | x) = G(x)`. The fusion center only needs the
//! count of ones to make the MAP decision. Both halves of the system can be
//! learned from data with closed-form losses:
//!
//! * the controller minimizes the exact MAP error probability of the binary
//!   channel it induces ([`training::loss_phi`]);
//! * the detector minimizes the expected KL divergence between the exact
//!   posterior and its own output ([`training::loss_theta`]).
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`hypothesis`] | priors, Gaussian observation model, datasets |
//! | [`neural`] | tiny MLP, reverse-mode gradients, Adam |
//! | [`quantizer`] | probability controllers and dithered quantization |
//! | [`metrics`] | MAP error, Chernoff information, KL, log-binomials |
//! | [`fusion`] | count-based fusion, detectors, Monte Carlo evaluation |
//! | [`training`] | the two-stage training pipeline |
//! | [`experiments`] | config, on-disk artifacts, sweeps and self-checks |

pub mod error;
pub mod experiments;
pub mod fusion;
pub mod hypothesis;
pub mod metrics;
pub mod neural;
pub mod optimize;
pub mod quantizer;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use fusion::{BitCount, Detector, EvaluationReport};
pub use hypothesis::{Dataset, GaussianModel, Hypothesis, Priors};
pub use metrics::{ChernoffResult, DiscreteChannel};
pub use neural::{Adam, Gradients, Head, Mlp};
pub use quantizer::{Controller, GammaPair};
pub use training::{LossCurve, Stage, TrainingConfig};
