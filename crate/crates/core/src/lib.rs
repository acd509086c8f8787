//! Energy beamforming for wirelessly powered backscatter networks.
//!
//! A multi-antenna reader estimates the rank-one backscatter channel of each
//! tag, steers a weighted energy beam toward the tags and decodes their
//! reflected data with an MRC or ZF detector. The crate provides the channel
//! and estimation models, closed-form energy and rate expressions with their
//! bounds, a max-min rate designer, and a Monte Carlo oracle for all of them.

pub mod analytics;
pub mod channel;
pub mod cli;
pub mod estimation;
pub mod montecarlo;
pub mod optimizer;
pub mod scenario;

pub use analytics::{DesignVariables, Model, Receiver};
pub use estimation::Estimator;
pub use scenario::SystemConfig;
