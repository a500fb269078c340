//! The ten per-segment descriptors and their z-score normalizer.
//!
//! Index `k` of a [`FeatureVector`] always names the same feature; the order
//! is fixed by [`FEATURE_NAMES`] and is part of the public file formats.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::preprocess::{self, Segment};
use crate::signal::Recording;
use rayon::prelude::*;

pub const FEATURE_COUNT: usize = 10;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "RMS", "ZC", "SSC", "WL", "MAV", "WAMP", "ARC", "MNF", "MDF", "PSR",
];

pub const RMS: usize = 0;
pub const ZC: usize = 1;
pub const SSC: usize = 2;
pub const WL: usize = 3;
pub const MAV: usize = 4;
pub const WAMP: usize = 5;
pub const ARC: usize = 6;
pub const MNF: usize = 7;
pub const MDF: usize = 8;
pub const PSR: usize = 9;

/// Which features fell back to their degenerate definition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degeneracy {
    /// Zero-variance segment: ARC reported as 0.
    pub singular_autocorrelation: bool,
    /// No spectral power after mean removal: MNF, MDF and PSR reported as 0.
    pub zero_power: bool,
}

impl Degeneracy {
    pub fn any(&self) -> bool {
        self.singular_autocorrelation || self.zero_power
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub degeneracy: Degeneracy,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT]) -> Self {
        Self {
            values,
            degeneracy: Degeneracy::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDomainFeatures {
    pub rms: f64,
    pub zc: usize,
    pub ssc: usize,
    pub wl: f64,
    pub mav: f64,
    pub wamp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub mnf: f64,
    pub mdf: f64,
    pub psr: f64,
    pub zero_power: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArCoefficient {
    pub value: f64,
    pub singular: bool,
}

pub fn time_domain_features(seg: &Segment, cfg: &PipelineConfig) -> Result<TimeDomainFeatures> {
    let x = &seg.values;
    let n = x.len();
    if n < 3 {
        return Err(Error::SegmentTooShort { len: n, required: 3 });
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let mav = x.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let mut wl = 0.0;
    let mut zc = 0;
    let mut wamp = 0;
    for w in x.windows(2) {
        let step = (w[1] - w[0]).abs();
        wl += step;
        if step > cfg.wamp_threshold {
            wamp += 1;
        }
        if w[0] * w[1] < 0.0 && w[0].abs() > cfg.zc_threshold && w[1].abs() > cfg.zc_threshold {
            zc += 1;
        }
    }
    let ssc = x
        .windows(3)
        .filter(|w| (w[1] - w[0]) * (w[1] - w[2]) > cfg.ssc_threshold)
        .count();
    Ok(TimeDomainFeatures {
        rms,
        zc,
        ssc,
        wl,
        mav,
        wamp,
    })
}

/// Mean-removed copy of `x`, or `None` when the segment has no variation
/// beyond rounding noise relative to its own scale.
fn centered(x: &[f64]) -> Option<Vec<f64>> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spread = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread <= 1e-12 * scale || spread == 0.0 {
        None
    } else {
        Some(centered)
    }
}

/// First coefficient of an order-`order` autoregressive fit, using the
/// Yule-Walker equations on the biased autocorrelation of the mean-removed
/// segment (Levinson-Durbin recursion). The sign convention is
/// `x[t] = a1 x[t-1] + ... + ap x[t-p] + e[t]`.
pub fn ar_coefficient(seg: &Segment, order: usize) -> Result<ArCoefficient> {
    let n = seg.values.len();
    if order == 0 || n <= order {
        return Err(Error::SegmentTooShort {
            len: n,
            required: order.max(1) + 1,
        });
    }
    let singular = ArCoefficient {
        value: 0.0,
        singular: true,
    };
    let Some(x) = centered(&seg.values) else {
        return Ok(singular);
    };
    let r: Vec<f64> = (0..=order)
        .map(|lag| (lag..n).map(|t| x[t] * x[t - lag]).sum::<f64>() / n as f64)
        .collect();
    if r[0] <= 0.0 {
        return Ok(singular);
    }
    let mut a = vec![0.0; order + 1];
    let mut err = r[0];
    for m in 1..=order {
        let acc = r[m] - (1..m).map(|j| a[j] * r[m - j]).sum::<f64>();
        let reflection = acc / err;
        let prev = a.clone();
        a[m] = reflection;
        for j in 1..m {
            a[j] = prev[j] - reflection * prev[m - j];
        }
        err *= 1.0 - reflection * reflection;
        if err <= 0.0 {
            // Perfectly predictable: the coefficients found so far are exact.
            break;
        }
    }
    Ok(ArCoefficient {
        value: a[1],
        singular: false,
    })
}

/// Periodogram length actually used: `cfg.fft_size`, grown to the next power
/// of two when a segment is longer than that.
pub fn spectrum_length(segment_len: usize, cfg: &PipelineConfig) -> usize {
    cfg.fft_size.max(segment_len.next_power_of_two())
}

/// Hann window of length `n` (symmetric form).
pub(crate) fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// One-sided power of the Hann-windowed, zero-padded periodogram of the
/// mean-removed segment, bins `1..=nfft/2`. Returns `(freqs, power)`, or
/// `None` when the segment has no variation.
pub fn power_spectrum(
    seg: &Segment,
    cfg: &PipelineConfig,
    sample_rate_hz: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let x = centered(&seg.values)?;
    let nfft = spectrum_length(x.len(), cfg);
    let window = hann(x.len());
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .zip(&window)
        .map(|(v, w)| Complex::new(v * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let half = nfft / 2;
    let freqs = (1..=half)
        .map(|j| j as f64 * sample_rate_hz / nfft as f64)
        .collect();
    let power = buf[1..=half].iter().map(|c| c.norm_sqr()).collect();
    Some((freqs, power))
}

pub fn spectral_features(
    seg: &Segment,
    cfg: &PipelineConfig,
    sample_rate_hz: f64,
) -> Result<SpectralFeatures> {
    let n = seg.values.len();
    if n < 8 {
        return Err(Error::SegmentTooShort { len: n, required: 8 });
    }
    let degenerate = SpectralFeatures {
        mnf: 0.0,
        mdf: 0.0,
        psr: 0.0,
        zero_power: true,
    };
    let Some((freqs, power)) = power_spectrum(seg, cfg, sample_rate_hz) else {
        return Ok(degenerate);
    };
    Ok(summarize_spectrum(&freqs, &power, cfg.psr_halfband_hz).unwrap_or(degenerate))
}

/// MNF, MDF and PSR of a one-sided power spectrum.
pub fn summarize_spectrum(freqs: &[f64], power: &[f64], halfband_hz: f64) -> Option<SpectralFeatures> {
    let total: f64 = power.iter().sum();
    if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let mnf = freqs.iter().zip(power).map(|(f, p)| f * p).sum::<f64>() / total;
    let mut cumulative = 0.0;
    let mut mdf = freqs[freqs.len() - 1];
    for (f, p) in freqs.iter().zip(power) {
        cumulative += p;
        if cumulative >= 0.5 * total {
            mdf = *f;
            break;
        }
    }
    let peak = power
        .iter()
        .enumerate()
        .fold(0, |best, (j, p)| if *p > power[best] { j } else { best });
    let peak_hz = freqs[peak];
    let band: f64 = freqs
        .iter()
        .zip(power)
        .filter(|(f, _)| (*f - peak_hz).abs() <= halfband_hz)
        .map(|(_, p)| p)
        .sum();
    Some(SpectralFeatures {
        mnf,
        mdf,
        psr: (band / total).clamp(0.0, 1.0),
        zero_power: false,
    })
}

pub fn extract_feature_vector(
    seg: &Segment,
    cfg: &PipelineConfig,
    sample_rate_hz: f64,
) -> Result<FeatureVector> {
    let td = time_domain_features(seg, cfg)?;
    let ar = ar_coefficient(seg, cfg.ar_order)?;
    let sp = spectral_features(seg, cfg, sample_rate_hz)?;
    let mut values = [0.0; FEATURE_COUNT];
    values[RMS] = td.rms;
    values[ZC] = td.zc as f64;
    values[SSC] = td.ssc as f64;
    values[WL] = td.wl;
    values[MAV] = td.mav;
    values[WAMP] = td.wamp as f64;
    values[ARC] = ar.value;
    values[MNF] = sp.mnf;
    values[MDF] = sp.mdf;
    values[PSR] = sp.psr;
    Ok(FeatureVector {
        values,
        degeneracy: Degeneracy {
            singular_autocorrelation: ar.singular,
            zero_power: sp.zero_power,
        },
    })
}

/// Per-dimension z-score statistics fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
    /// Dimensions whose training variance was zero; their deviation is 1.
    pub zero_variance: [bool; FEATURE_COUNT],
}

impl Normalizer {
    pub fn fit(features: &[FeatureVector]) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::InsufficientData {
                required: 2,
                got: features.len(),
            });
        }
        if let Some(index) = features.iter().position(|f| !f.is_finite()) {
            return Err(Error::NonFiniteFeature { index });
        }
        let n = features.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for f in features {
            for (m, v) in mean.iter_mut().zip(&f.values) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; FEATURE_COUNT];
        for f in features {
            for d in 0..FEATURE_COUNT {
                let dev = f.values[d] - mean[d];
                var[d] += dev * dev;
            }
        }
        let mut std = [1.0; FEATURE_COUNT];
        let mut zero_variance = [false; FEATURE_COUNT];
        for d in 0..FEATURE_COUNT {
            let s = (var[d] / n).sqrt();
            if s > 1e-12 * mean[d].abs().max(1.0) {
                std[d] = s;
            } else {
                zero_variance[d] = true;
            }
        }
        Ok(Self {
            mean,
            std,
            zero_variance,
        })
    }

    pub fn apply(&self, f: &FeatureVector) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|d| (f.values[d] - self.mean[d]) / self.std[d])
    }

    pub fn invert(&self, z: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|d| z[d] * self.std[d] + self.mean[d])
    }
}

pub fn fit_normalizer(features: &[FeatureVector]) -> Result<Normalizer> {
    Normalizer::fit(features)
}

/// Normalized copy of `f`; degeneracy flags are carried over.
pub fn apply_normalizer(nz: &Normalizer, f: &FeatureVector) -> FeatureVector {
    FeatureVector {
        values: nz.apply(f),
        degeneracy: f.degeneracy,
    }
}

/// Feature rows of one channel, as exported to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub channel: usize,
    pub start_sample: usize,
    pub features: FeatureVector,
}

/// Filters `rec`, segments every channel and extracts one feature vector
/// per segment. The outer vector is indexed by channel.
pub fn recording_features(rec: &Recording, cfg: &PipelineConfig) -> Result<Vec<Vec<FeatureRow>>> {
    cfg.validate()?;
    let filtered = preprocess::bandpass_filter(rec, cfg)?;
    let fs = rec.sample_rate_hz();
    (0..filtered.num_channels())
        .into_par_iter()
        .map(|c| {
            preprocess::segment_channel(&filtered, c, cfg)?
                .iter()
                .map(|seg| {
                    Ok(FeatureRow {
                        channel: c,
                        start_sample: seg.start_sample,
                        features: extract_feature_vector(seg, cfg, fs)?,
                    })
                })
                .collect()
        })
        .collect()
}

/// CSV with a header `channel,start_sample,RMS,...,PSR`.
pub fn feature_rows_csv(rows: &[FeatureRow]) -> String {
    let mut out = String::from("channel,start_sample");
    for name in FEATURE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}", row.channel, row.start_sample));
        for v in row.features.values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
