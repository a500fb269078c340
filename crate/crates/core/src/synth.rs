//! Synthetic multichannel EMG with known activation levels.
//!
//! Each channel is Gaussian noise band-limited to a carrier band, rescaled to
//! unit RMS, then multiplied sample by sample by
//! `noise_floor_mv + level * gain_mv`. Levels are piecewise constant and
//! returned alongside the signal as ground truth.
//!
//! Profiles are TOML:
//!
//! ```toml
//! seed = 7
//! sample_rate_hz = 1259.0   # optional, default 1259
//! duration_ms = 4000.0      # optional, default: longest channel schedule
//! noise_floor_mv = 0.01
//! gain_mv = 1.0             # optional, default 1
//! carrier_low_hz = 20.0     # optional, default 20
//! carrier_high_hz = 450.0   # optional, default 450
//!
//! [[channels]]
//! label = "biceps"
//! levels = [0.0, 0.5, 1.0]
//! durations_ms = [1000.0, 1000.0, 2000.0]
//! cycle = false             # optional: repeat the schedule instead of holding the last level
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{butterworth_bandpass, segment_count};
use crate::signal::Recording;

fn default_rate() -> f64 {
    1259.0
}
fn default_gain() -> f64 {
    1.0
}
fn default_low() -> f64 {
    20.0
}
fn default_high() -> f64 {
    450.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSchedule {
    pub label: String,
    /// Activation levels in `[0, 1]`.
    pub levels: Vec<f64>,
    pub durations_ms: Vec<f64>,
    #[serde(default)]
    pub cycle: bool,
}

impl ChannelSchedule {
    pub fn total_ms(&self) -> f64 {
        self.durations_ms.iter().sum()
    }

    /// Level at time `t_ms`.
    pub fn level_at(&self, t_ms: f64) -> f64 {
        let total = self.total_ms();
        let mut t = if self.cycle { t_ms % total } else { t_ms };
        for (level, d) in self.levels.iter().zip(&self.durations_ms) {
            if t < *d {
                return *level;
            }
            t -= d;
        }
        *self.levels.last().expect("validated non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationProfile {
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub duration_ms: Option<f64>,
    pub noise_floor_mv: f64,
    #[serde(default = "default_gain")]
    pub gain_mv: f64,
    #[serde(default = "default_low")]
    pub carrier_low_hz: f64,
    #[serde(default = "default_high")]
    pub carrier_high_hz: f64,
    pub channels: Vec<ChannelSchedule>,
}

impl ActivationProfile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let profile: Self = toml::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        if !(self.noise_floor_mv >= 0.0 && self.noise_floor_mv.is_finite()) {
            return bad(format!("noise_floor_mv {} must be >= 0", self.noise_floor_mv));
        }
        if !(self.gain_mv > 0.0 && self.gain_mv.is_finite()) {
            return bad(format!("gain_mv {} must be > 0", self.gain_mv));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample_rate_hz {} must be > 0", self.sample_rate_hz));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(0.0 < self.carrier_low_hz
            && self.carrier_low_hz < self.carrier_high_hz
            && self.carrier_high_hz < nyquist)
        {
            return bad(format!(
                "carrier band {}-{} Hz must lie inside (0, {nyquist})",
                self.carrier_low_hz, self.carrier_high_hz
            ));
        }
        if let Some(d) = self.duration_ms {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("duration_ms {d} must be > 0"));
            }
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.levels.is_empty() || ch.levels.len() != ch.durations_ms.len() {
                return bad(format!(
                    "channel {:?}: {} levels for {} durations",
                    ch.label,
                    ch.levels.len(),
                    ch.durations_ms.len()
                ));
            }
            if let Some(l) = ch.levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
                return bad(format!("channel {:?}: level {l} outside [0, 1]", ch.label));
            }
            if let Some(d) = ch.durations_ms.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
                return bad(format!("channel {:?}: duration {d} must be > 0", ch.label));
            }
            if self.channels[..i].iter().any(|c| c.label == ch.label) {
                return bad(format!("duplicate channel label {:?}", ch.label));
            }
        }
        Ok(())
    }

    /// `duration_ms` if set, else the longest channel schedule.
    pub fn effective_duration_ms(&self) -> f64 {
        self.duration_ms.unwrap_or_else(|| {
            self.channels
                .iter()
                .map(ChannelSchedule::total_ms)
                .fold(0.0, f64::max)
        })
    }
}

/// Output of [`generate`]: the recording and, per channel, the activation
/// level of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub recording: Recording,
    pub levels: Vec<Vec<f64>>,
}

/// Unit-RMS band-limited Gaussian noise from its own random stream.
fn carrier(profile: &ActivationProfile, channel: usize, sample_rate_hz: f64, n: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(channel as u64);
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let filter = butterworth_bandpass(4, profile.carrier_low_hz, profile.carrier_high_hz, sample_rate_hz)?;
    let mut band = filter.filtfilt(&white).map_err(|_| {
        Error::InvalidProfile(format!("{n} samples is too short to band-limit the carrier"))
    })?;
    let rms = (band.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        band.iter_mut().for_each(|v| *v /= rms);
    }
    Ok(band)
}

/// Generates `duration_ms` of signal at `sample_rate_hz`; channels are
/// independent and reproducible from the profile seed.
pub fn generate(
    profile: &ActivationProfile,
    sample_rate_hz: f64,
    duration_ms: f64,
) -> Result<SyntheticRecording> {
    profile.validate()?;
    let checked = ActivationProfile {
        sample_rate_hz,
        duration_ms: Some(duration_ms),
        ..profile.clone()
    };
    checked.validate()?;
    let n = (duration_ms * sample_rate_hz / 1000.0).round() as usize;
    let (channels, levels): (Vec<Vec<f64>>, Vec<Vec<f64>>) = profile
        .channels
        .par_iter()
        .enumerate()
        .map(|(c, schedule)| {
            let noise = carrier(profile, c, sample_rate_hz, n)?;
            let levels: Vec<f64> = (0..n)
                .map(|t| schedule.level_at(t as f64 * 1000.0 / sample_rate_hz))
                .collect();
            let signal = noise
                .iter()
                .zip(&levels)
                .map(|(x, l)| x * (profile.noise_floor_mv + l * profile.gain_mv))
                .collect();
            Ok((signal, levels))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let labels = profile.channels.iter().map(|c| c.label.clone()).collect();
    let recording = Recording::new(channels, sample_rate_hz, labels)
        .map_err(|e| Error::InvalidProfile(e.to_string()))?;
    Ok(SyntheticRecording { recording, levels })
}

/// [`generate`] at the profile's own rate and duration.
pub fn generate_default(profile: &ActivationProfile) -> Result<SyntheticRecording> {
    generate(profile, profile.sample_rate_hz, profile.effective_duration_ms())
}

/// Mean ground-truth level of every window, per channel.
pub fn segment_levels(levels: &[Vec<f64>], window: usize, stride: usize) -> Vec<Vec<f64>> {
    levels
        .iter()
        .map(|ch| {
            (0..segment_count(ch.len(), window, stride))
                .map(|i| {
                    let w = &ch[i * stride..i * stride + window];
                    w.iter().sum::<f64>() / window as f64
                })
                .collect()
        })
        .collect()
}

/// `channel,segment,start_sample,level` rows.
pub fn segment_levels_csv(labels: &[String], levels: &[Vec<f64>], stride: usize) -> String {
    let mut out = String::from("channel,segment,start_sample,level\n");
    for (label, ch) in labels.iter().zip(levels) {
        for (i, l) in ch.iter().enumerate() {
            out.push_str(&format!("{label},{i},{},{l}\n", i * stride));
        }
    }
    out
}
