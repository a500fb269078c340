//! Pipeline configuration.
//!
//! [`PipelineConfig`] holds every tunable parameter of the tokenizer, from the
//! bandpass corners through the K-means schedule. It is serialized verbatim
//! into every codebook so a token file can always be traced back to the
//! settings that produced it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest codebook size: tokens are the letters `A..=Z`.
pub const MAX_TOKENS: usize = 26;

/// Tunable parameters for filtering, segmentation, features and clustering.
///
/// Missing keys in a JSON config fall back to [`PipelineConfig::default`]:
///
/// ```
/// let cfg: semg_tokens::PipelineConfig =
///     serde_json::from_str(r#"{ "k_clusters": 8, "rng_seed": 3 }"#).unwrap();
/// assert_eq!(cfg.window_ms, 50.0);
/// assert_eq!(cfg.k_clusters, 8);
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Lower bandpass corner in Hz. Default: `20`.
    pub band_low_hz: f64,
    /// Upper bandpass corner in Hz. Default: `450`.
    pub band_high_hz: f64,
    /// Butterworth prototype order. Default: `4`.
    pub filter_order: usize,

    /// Segment length in milliseconds. Default: `50`.
    pub window_ms: f64,
    /// Hop between segment starts in milliseconds. Default: `25`.
    pub stride_ms: f64,

    /// Amplitude deadzone for zero crossings. Default: `0`.
    pub zc_threshold: f64,
    /// Threshold on the slope-sign product. Default: `0`.
    pub ssc_threshold: f64,
    /// Willison amplitude threshold in mV. Default: `0.02`.
    pub wamp_threshold: f64,
    /// Autoregressive model order; only the first coefficient is kept. Default: `4`.
    pub ar_order: usize,
    /// Periodogram length (power of two). Default: `128`.
    pub fft_size: usize,
    /// Half-width of the peak band used by the power spectrum ratio. Default: `10` Hz.
    pub psr_halfband_hz: f64,

    /// Codebook size K. Default: `13`.
    pub k_clusters: usize,
    /// Independent k-means++ restarts; the lowest-SSE run wins. Default: `10`.
    pub kmeans_restarts: usize,
    /// Lloyd iteration cap per restart. Default: `300`.
    pub kmeans_max_iter: usize,
    /// Stop once the relative SSE improvement drops below this. Default: `1e-6`.
    pub kmeans_rel_tol: f64,
    /// Seed of the first restart; restart `r` uses `rng_seed + r`.
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            band_low_hz: 20.0,
            band_high_hz: 450.0,
            filter_order: 4,
            window_ms: 50.0,
            stride_ms: 25.0,
            zc_threshold: 0.0,
            ssc_threshold: 0.0,
            wamp_threshold: 0.02,
            ar_order: 4,
            fft_size: 128,
            psr_halfband_hz: 10.0,
            k_clusters: 13,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
            kmeans_rel_tol: 1e-6,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Checks the invariants that do not depend on a sample rate.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.window_ms > 0.0 && self.stride_ms > 0.0) {
            return bad("window_ms and stride_ms must be positive".into());
        }
        if self.stride_ms > self.window_ms {
            return bad(format!(
                "stride_ms {} exceeds window_ms {}",
                self.stride_ms, self.window_ms
            ));
        }
        if !(2..=MAX_TOKENS).contains(&self.k_clusters) {
            return bad(format!("k_clusters {} not in 2..=26", self.k_clusters));
        }
        if self.filter_order == 0 {
            return bad("filter_order must be at least 1".into());
        }
        if self.ar_order == 0 {
            return bad("ar_order must be at least 1".into());
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < 8 {
            return bad(format!("fft_size {} is not a power of two >= 8", self.fft_size));
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 {
            return bad("kmeans_restarts and kmeans_max_iter must be positive".into());
        }
        let thresholds = [
            self.zc_threshold,
            self.ssc_threshold,
            self.wamp_threshold,
            self.psr_halfband_hz,
            self.kmeans_rel_tol,
        ];
        if thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("thresholds must be finite and non-negative".into());
        }
        Ok(())
    }

    /// Window length in samples at the given rate (floor of the ms conversion).
    pub fn window_samples(&self, sample_rate_hz: f64) -> usize {
        ms_to_samples(self.window_ms, sample_rate_hz)
    }

    /// Stride in samples at the given rate (floor of the ms conversion).
    pub fn stride_samples(&self, sample_rate_hz: f64) -> usize {
        ms_to_samples(self.stride_ms, sample_rate_hz)
    }

    /// Describes every setting that changes the meaning of a feature vector
    /// and differs between `self` and `other`. Clustering settings are ignored.
    pub fn feature_differences(&self, other: &PipelineConfig) -> Vec<String> {
        let mut diffs = Vec::new();
        macro_rules! cmp {
            ($($field:ident),*) => {$(
                if self.$field != other.$field {
                    diffs.push(format!(
                        "{}: {:?} vs {:?}",
                        stringify!($field),
                        self.$field,
                        other.$field
                    ));
                }
            )*};
        }
        cmp!(
            band_low_hz,
            band_high_hz,
            filter_order,
            window_ms,
            stride_ms,
            zc_threshold,
            ssc_threshold,
            wamp_threshold,
            ar_order,
            fft_size,
            psr_halfband_hz
        );
        diffs
    }
}

// 50 ms at 1000 Hz is exactly 50 samples; the epsilon keeps that from
// flooring to 49 when the product lands one ulp low.
pub(crate) fn ms_to_samples(ms: f64, sample_rate_hz: f64) -> usize {
    (sample_rate_hz * ms / 1000.0 + 1e-9).floor().max(0.0) as usize
}
