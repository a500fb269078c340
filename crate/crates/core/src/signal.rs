//! Multichannel recordings and their on-disk formats.
//!
//! Two layouts are supported:
//!
//! * `csv`: one row per time sample, one column per channel, with an
//!   optional single header row naming the channels. The first row is taken
//!   as a header when any of its cells fails to parse as a number.
//! * `raw_f32le`: channel-interleaved little-endian `f32` values with no
//!   header; the channel count comes from the caller.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated multichannel recording, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channels: Vec<Vec<f64>>,
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
}

impl Recording {
    /// Builds a recording from per-channel sample vectors.
    pub fn new(
        channels: Vec<Vec<f64>>,
        sample_rate_hz: f64,
        channel_labels: Vec<String>,
    ) -> Result<Self> {
        if channels.is_empty() || channels[0].is_empty() {
            return Err(Error::EmptyRecording);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "sample rate {sample_rate_hz} must be positive"
            )));
        }
        let len = channels[0].len();
        if let Some(c) = channels.iter().position(|ch| ch.len() != len) {
            return Err(Error::InvalidRecording(format!(
                "channel {c} has {} samples, channel 0 has {len}",
                channels[c].len()
            )));
        }
        if channel_labels.len() != channels.len() {
            return Err(Error::InvalidRecording(format!(
                "{} labels for {} channels",
                channel_labels.len(),
                channels.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = channel_labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidRecording(format!("duplicate channel label {dup:?}")));
        }
        for (column, ch) in channels.iter().enumerate() {
            if let Some(row) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample { row, column });
            }
        }
        Ok(Self {
            channels,
            sample_rate_hz,
            channel_labels,
        })
    }

    /// Builds a recording from time-major rows (`rows[t][c]`).
    pub fn from_rows(
        rows: &[Vec<f64>],
        sample_rate_hz: f64,
        channel_labels: Vec<String>,
    ) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or(Error::EmptyRecording)?;
        let mut channels = vec![Vec::with_capacity(rows.len()); width];
        for (row, values) in rows.iter().enumerate() {
            if values.len() != width {
                return Err(Error::MalformedRow {
                    row,
                    expected: width,
                    found: values.len(),
                });
            }
            for (ch, v) in channels.iter_mut().zip(values) {
                ch.push(*v);
            }
        }
        Self::new(channels, sample_rate_hz, channel_labels)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, index: usize) -> Result<&[f64]> {
        self.channels
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::NoSuchChannel(index))
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }

    /// Sample `t` of channel `c`.
    pub fn sample(&self, t: usize, c: usize) -> f64 {
        self.channels[c][t]
    }

    /// Same labels and rate, new channel data. Used by filters.
    pub(crate) fn with_channels(&self, channels: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(channels, self.sample_rate_hz, self.channel_labels.clone())
    }
}

/// `ch0`, `ch1`, ... for recordings without named channels.
pub fn default_labels(channels: usize) -> Vec<String> {
    (0..channels).map(|c| format!("ch{c}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingFormat {
    Csv,
    RawF32le,
}

impl RecordingFormat {
    /// `.csv` is CSV; `.f32`, `.raw` and `.bin` are raw little-endian floats.
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "f32" | "raw" | "bin" => Some(Self::RawF32le),
            _ => None,
        }
    }
}

impl FromStr for RecordingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "raw_f32le" | "raw" | "f32" => Ok(Self::RawF32le),
            other => Err(Error::Parse(format!("unknown recording format {other:?}"))),
        }
    }
}

impl fmt::Display for RecordingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::RawF32le => "raw_f32le",
        })
    }
}

/// Loads a recording from `path`.
///
/// For CSV, explicit `channel_labels` override any header row. For
/// `raw_f32le`, the number of labels fixes the channel count (one channel
/// when `None`).
pub fn load_recording(
    path: &Path,
    format: RecordingFormat,
    sample_rate_hz: f64,
    channel_labels: Option<Vec<String>>,
) -> Result<Recording> {
    let bytes = fs::read(path).map_err(|source| Error::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    match format {
        RecordingFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| Error::UnreadableFile {
                path: path.to_owned(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })?;
            parse_csv(&text, sample_rate_hz, channel_labels)
        }
        RecordingFormat::RawF32le => {
            let labels = channel_labels.unwrap_or_else(|| default_labels(1));
            parse_raw_f32le(&bytes, sample_rate_hz, labels)
        }
    }
}

pub fn parse_csv(
    text: &str,
    sample_rate_hz: f64,
    channel_labels: Option<Vec<String>>,
) -> Result<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("csv line {}: {e}", line + 1)))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::MalformedRow {
                row: line,
                expected,
                found: record.len(),
            });
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|s| s.parse().ok()).collect();
        if line == 0 && parsed.iter().any(Option::is_none) {
            header = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let mut values = Vec::with_capacity(expected);
        for (column, (value, text)) in parsed.into_iter().zip(record.iter()).enumerate() {
            let value = value.ok_or_else(|| Error::InvalidNumber {
                row: line,
                column,
                text: text.to_owned(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteSample { row: line, column });
            }
            values.push(value);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyRecording);
    }
    let labels = channel_labels
        .or(header)
        .unwrap_or_else(|| default_labels(rows[0].len()));
    Recording::from_rows(&rows, sample_rate_hz, labels)
}

pub fn parse_raw_f32le(
    bytes: &[u8],
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
) -> Result<Recording> {
    let channels = channel_labels.len();
    if channels == 0 {
        return Err(Error::InvalidRecording("no channels declared".into()));
    }
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::InvalidRecording(format!(
            "{} bytes is not a whole number of f32 values",
            bytes.len()
        )));
    }
    let values = bytes.len() / 4;
    if values == 0 {
        return Err(Error::EmptyRecording);
    }
    if !values.is_multiple_of(channels) {
        return Err(Error::ChannelCountMismatch { values, channels });
    }
    let mut data = vec![Vec::with_capacity(values / channels); channels];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let (row, column) = (i / channels, i % channels);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { row, column });
        }
        data[column].push(f64::from(v));
    }
    Recording::new(data, sample_rate_hz, channel_labels)
}

/// Serializes a recording. CSV writes a header row and shortest round-trip
/// decimal values; `raw_f32le` narrows samples to `f32`.
pub fn encode_recording(rec: &Recording, format: RecordingFormat) -> Vec<u8> {
    match format {
        RecordingFormat::Csv => {
            let mut out = String::new();
            out.push_str(&rec.channel_labels.join(","));
            out.push('\n');
            for t in 0..rec.num_samples() {
                for c in 0..rec.num_channels() {
                    if c > 0 {
                        out.push(',');
                    }
                    out.push_str(&rec.channels[c][t].to_string());
                }
                out.push('\n');
            }
            out.into_bytes()
        }
        RecordingFormat::RawF32le => {
            let mut out = Vec::with_capacity(rec.num_samples() * rec.num_channels() * 4);
            for t in 0..rec.num_samples() {
                for ch in &rec.channels {
                    out.extend_from_slice(&(ch[t] as f32).to_le_bytes());
                }
            }
            out
        }
    }
}

pub fn write_recording(rec: &Recording, path: &Path, format: RecordingFormat) -> Result<()> {
    fs::write(path, encode_recording(rec, format)).map_err(|source| Error::UnwritableFile {
        path: path.to_owned(),
        source,
    })
}
