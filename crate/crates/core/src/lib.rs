//! Alpha-stable modeling of image quality score distributions (IQSDs).
//!
//! The crate fits a four-parameter alpha-stable law to per-image opinion
//! score histograms, extracts a 24-dimensional structural + statistical
//! feature vector from images, regresses the four distribution parameters
//! with epsilon-SVRs, and evaluates predicted score distributions against
//! empirical histograms.

pub mod cli;
pub mod dists;
pub mod features;
pub mod hist;
pub mod pipeline;
pub mod scores;
pub mod stable;
pub mod svr;

mod quad;
mod simplex;

pub use hist::ScoreHistogram;
pub use stable::{StableFit, StableParams};
