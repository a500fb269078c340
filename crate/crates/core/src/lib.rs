//! Discrete muscle-state tokens for multichannel surface EMG.
//!
//! The pipeline turns a [`Recording`] into one [`TokenSequence`] per channel:
//!
//! 1. [`preprocess::bandpass_filter`]: zero-phase Butterworth bandpass (20-450 Hz by default).
//! 2. [`preprocess::segment_channel`]: 50 ms windows at a 25 ms stride.
//! 3. [`features::extract_feature_vector`]: RMS, ZC, SSC, WL, MAV, WAMP, ARC, MNF, MDF, PSR.
//! 4. [`codebook::Codebook::assign`]: nearest K-means centroid in z-scored feature space.
//!
//! Tokens are ranked by activation: token `A` (id 0) is the centroid with the
//! largest RMS and the last letter is the resting state. On top of the token
//! sequences the crate provides model selection ([`selection`]), agreement
//! between independent clusterings ([`consistency`]), sequence statistics and
//! DTW movement-quality scoring ([`quality`]), and a synthetic signal
//! generator with ground truth ([`synth`]).

pub mod cli;
pub mod codebook;
pub mod config;
pub mod consistency;
pub mod error;
pub mod features;
pub mod preprocess;
pub mod quality;
pub mod selection;
pub mod signal;
pub mod synth;

pub use codebook::{Codebook, TokenSequence};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use features::{FeatureVector, Normalizer};
pub use signal::{Recording, RecordingFormat};
