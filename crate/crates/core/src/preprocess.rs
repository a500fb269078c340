//! Bandpass filtering and fixed-window segmentation.
//!
//! The filter is a Butterworth bandpass designed at run time: analog
//! low-pass prototype, low-pass to band-pass transform at pre-warped corner
//! frequencies, then the bilinear transform. It is realized as a cascade of
//! second-order sections and applied forward and backward, so the effective
//! magnitude response is the square of the designed one and the phase is zero.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::signal::Recording;

/// One second-order section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Direct form II transposed state for a unit step at steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let s2 = self.b[2] - self.a[2] * g;
        let s1 = self.b[1] - self.a[1] * g + s2;
        [s1, s2]
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Causal filtering, optionally starting from the steady state of a
    /// constant input equal to `initial`.
    pub fn filter(&self, input: &[f64], initial: Option<f64>) -> Vec<f64> {
        let mut signal = input.to_vec();
        let mut level = initial.unwrap_or(0.0);
        for section in &self.sections {
            let [mut s1, mut s2] = if initial.is_some() {
                let zi = section.step_state();
                [zi[0] * level, zi[1] * level]
            } else {
                [0.0, 0.0]
            };
            let Biquad { b, a } = *section;
            for x in signal.iter_mut() {
                let xin = *x;
                let y = b[0] * xin + s1;
                s1 = b[1] * xin - a[1] * y + s2;
                s2 = b[2] * xin - a[2] * y;
                *x = y;
            }
            level *= section.dc_gain();
        }
        signal
    }

    /// Number of samples of odd extension added at each end by [`Self::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * 2 * self.sections.len()
    }

    /// Zero-phase forward-backward filtering with odd (reflect-and-negate)
    /// edge extension and steady-state initial conditions.
    ///
    /// A single forward-backward pass is not exactly symmetric under time
    /// reversal near the edges, so the result is the mean of the
    /// forward-backward and backward-forward passes.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return Err(Error::RecordingTooShort {
                samples: n,
                required: pad,
            });
        }
        let forward = self.forward_backward(x);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let backward = self.forward_backward(&rev);
        Ok(forward
            .iter()
            .zip(backward.iter().rev())
            .map(|(a, b)| 0.5 * (a + b))
            .collect())
    }

    fn forward_backward(&self, x: &[f64]) -> Vec<f64> {
        let pad = self.pad_len();
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let forward = self.filter(&ext, Some(ext[0]));
        let mut reversed: Vec<f64> = forward.into_iter().rev().collect();
        let start = reversed[0];
        reversed = self.filter(&reversed, Some(start));
        reversed.reverse();
        reversed[pad..pad + n].to_vec()
    }
}

/// Designs an `order`-th order Butterworth bandpass between `low_hz` and
/// `high_hz`. The result has `order` sections and unit gain at the
/// band center.
pub fn butterworth_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    sample_rate_hz: f64,
) -> Result<SosFilter> {
    let nyquist = sample_rate_hz / 2.0;
    if !(order >= 1 && 0.0 < low_hz && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::InvalidBand {
            low_hz,
            high_hz,
            sample_rate_hz,
        });
    }
    let fs2 = 2.0 * sample_rate_hz;
    let warp = |f: f64| fs2 * (PI * f / sample_rate_hz).tan();
    let (w_lo, w_hi) = (warp(low_hz), warp(high_hz));
    let w0 = (w_lo * w_hi).sqrt();
    let bw = w_hi - w_lo;

    let n = order as f64;
    let mut poles = Vec::with_capacity(2 * order);
    for k in 1..=order {
        let theta = PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n);
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let tol = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    real.sort_by(f64::total_cmp);

    // Every section carries one zero at z = 1 and one at z = -1.
    let b = [1.0, 0.0, -1.0];
    let mut sections: Vec<Biquad> = complex
        .iter()
        .map(|p| Biquad {
            b,
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        })
        .collect();
    for pair in real.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(Biquad {
            b,
            a: [1.0, -(r1 + r2), r1 * r2],
        });
    }
    if sections.len() != order {
        return Err(Error::InvalidBand {
            low_hz,
            high_hz,
            sample_rate_hz,
        });
    }

    let mut filter = SosFilter { sections };
    let center_hz = sample_rate_hz / PI * (w0 / fs2).atan();
    let gain = filter.response(center_hz, sample_rate_hz).norm();
    for v in filter.sections[0].b.iter_mut() {
        *v /= gain;
    }
    Ok(filter)
}

/// Zero-phase Butterworth bandpass of every channel using the corners and
/// order from `cfg`.
pub fn bandpass_filter(rec: &Recording, cfg: &PipelineConfig) -> Result<Recording> {
    let filter = butterworth_bandpass(
        cfg.filter_order,
        cfg.band_low_hz,
        cfg.band_high_hz,
        rec.sample_rate_hz(),
    )?;
    let channels = rec
        .channels()
        .par_iter()
        .map(|ch| filter.filtfilt(ch))
        .collect::<Result<Vec<_>>>()?;
    rec.with_channels(channels)
}

/// One fixed-length window of a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub values: Vec<f64>,
    pub channel_index: usize,
    pub start_sample: usize,
}

impl Segment {
    /// A free-standing segment, mostly useful in tests.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            channel_index: 0,
            start_sample: 0,
        }
    }
}

/// Number of windows of `window` samples at hop `stride` that fit in `len`.
pub fn segment_count(len: usize, window: usize, stride: usize) -> usize {
    if window == 0 || stride == 0 || len < window {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// `(window, stride)` in samples, validated against the configuration.
pub fn window_geometry(cfg: &PipelineConfig, sample_rate_hz: f64) -> Result<(usize, usize)> {
    let window = cfg.window_samples(sample_rate_hz);
    let stride = cfg.stride_samples(sample_rate_hz);
    if window == 0 || stride == 0 {
        return Err(Error::InvalidConfig(format!(
            "window {} ms / stride {} ms is under one sample at {sample_rate_hz} Hz",
            cfg.window_ms, cfg.stride_ms
        )));
    }
    Ok((window, stride))
}

/// Splits one channel into windows starting at 0; trailing samples that do
/// not fill a window are dropped.
pub fn segment_channel(
    rec: &Recording,
    channel_index: usize,
    cfg: &PipelineConfig,
) -> Result<Vec<Segment>> {
    let samples = rec.channel(channel_index)?;
    let (window, stride) = window_geometry(cfg, rec.sample_rate_hz())?;
    if samples.len() < window {
        return Err(Error::RecordingShorterThanWindow {
            samples: samples.len(),
            window,
        });
    }
    let count = segment_count(samples.len(), window, stride);
    Ok((0..count)
        .map(|i| {
            let start = i * stride;
            Segment {
                values: samples[start..start + window].to_vec(),
                channel_index,
                start_sample: start,
            }
        })
        .collect())
}
