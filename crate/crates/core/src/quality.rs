//! Token-sequence analyses: multichannel encoding, DTW similarity scoring,
//! per-channel statistics, padding, transition matrices and centroid
//! distances.
//!
//! Numeric token values run from rest to full activation: `value(id) =
//! K - 1 - id`, so the rest token is 0 and token `A` is `K - 1`. Files
//! always carry ids and letters, never these values.

use crate::codebook::{token_letter, Codebook, TokenSequence};
use crate::error::{Error, Result};

/// Activation value of token `id` in a `k`-token alphabet.
pub fn token_value(id: usize, k: usize) -> usize {
    k - 1 - id
}

/// Token ids of several channels of one action, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTokenMatrix {
    /// `tokens[i][m]`: token id of channel `m` at step `i`.
    tokens: Vec<Vec<usize>>,
    channel_labels: Vec<String>,
    k: usize,
    fingerprint: String,
}

impl ActionTokenMatrix {
    pub fn new(
        tokens: Vec<Vec<usize>>,
        channel_labels: Vec<String>,
        k: usize,
        fingerprint: String,
    ) -> Result<Self> {
        for row in &tokens {
            if row.len() != channel_labels.len() {
                return Err(Error::ChannelMismatch(format!(
                    "row has {} values for {} channels",
                    row.len(),
                    channel_labels.len()
                )));
            }
            if let Some(&label) = row.iter().find(|&&t| t >= k) {
                return Err(Error::LabelOutOfRange { label, k });
            }
        }
        Ok(Self {
            tokens,
            channel_labels,
            k,
            fingerprint,
        })
    }

    /// Builds a matrix from activation values (`0` = rest) rather than ids;
    /// channels are labelled `ch0`, `ch1`, ...
    pub fn from_values(values: &[Vec<usize>], k: usize) -> Result<Self> {
        let channels = values.first().map_or(0, Vec::len);
        let mut tokens = Vec::with_capacity(values.len());
        for row in values {
            let mut ids = Vec::with_capacity(row.len());
            for &v in row {
                if v >= k {
                    return Err(Error::LabelOutOfRange { label: v, k });
                }
                ids.push(token_value(v, k));
            }
            tokens.push(ids);
        }
        Self::new(tokens, crate::signal::default_labels(channels), k, String::new())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn token(&self, step: usize, channel: usize) -> usize {
        self.tokens[step][channel]
    }

    pub fn value(&self, step: usize, channel: usize) -> usize {
        token_value(self.tokens[step][channel], self.k)
    }

    /// Keeps only the named channels, in the order given.
    pub fn select_channels(&self, labels: &[String]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| {
                self.channel_labels
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| Error::ChannelMismatch(format!("no channel named {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tokens: self
                .tokens
                .iter()
                .map(|row| idx.iter().map(|&i| row[i]).collect())
                .collect(),
            channel_labels: labels.to_vec(),
            k: self.k,
            fingerprint: self.fingerprint.clone(),
        })
    }
}

/// Stacks per-channel sequences into a matrix, columns in channel order.
pub fn encode_action(sequences: &[TokenSequence]) -> Result<ActionTokenMatrix> {
    let first = sequences.first().ok_or(Error::EmptySequence)?;
    for s in sequences {
        if s.fingerprint != first.fingerprint || s.k != first.k {
            return Err(Error::CodebookMismatch);
        }
        crate::error::check_lengths(first.len(), s.len())?;
    }
    let mut ordered: Vec<&TokenSequence> = sequences.iter().collect();
    ordered.sort_by_key(|s| s.channel_index);
    let tokens = (0..first.len())
        .map(|i| ordered.iter().map(|s| s.tokens[i]).collect())
        .collect();
    ActionTokenMatrix::new(
        tokens,
        ordered.iter().map(|s| s.channel_label.clone()).collect(),
        first.k,
        first.fingerprint.clone(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub distance: f64,
    /// Optimal warping path from `(0, 0)` to `(len_a - 1, len_b - 1)`.
    pub path: Vec<(usize, usize)>,
}

impl DtwResult {
    pub fn path_length(&self) -> usize {
        self.path.len()
    }
}

fn check_comparable(a: &ActionTokenMatrix, b: &ActionTokenMatrix) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    if a.channel_labels != b.channel_labels {
        return Err(Error::ChannelMismatch(format!(
            "{:?} vs {:?}",
            a.channel_labels, b.channel_labels
        )));
    }
    if a.k != b.k || a.fingerprint != b.fingerprint {
        return Err(Error::CodebookMismatch);
    }
    Ok(())
}

fn step_cost(a: &ActionTokenMatrix, i: usize, b: &ActionTokenMatrix, j: usize) -> u64 {
    // |value_a - value_b| equals |id_a - id_b| since values are K-1-id.
    a.tokens[i]
        .iter()
        .zip(&b.tokens[j])
        .map(|(x, y)| x.abs_diff(*y) as u64)
        .sum()
}

/// Multichannel DTW with L1 step cost on activation values and the
/// three-predecessor recursion, no window constraint. Backtracking prefers
/// the diagonal, then `(i - 1, j)`.
pub fn dtw_distance(a: &ActionTokenMatrix, b: &ActionTokenMatrix) -> Result<DtwResult> {
    check_comparable(a, b)?;
    let (la, lb) = (a.len(), b.len());
    let mut table = vec![0u64; la * lb];
    for i in 0..la {
        for j in 0..lb {
            let prev = match (i, j) {
                (0, 0) => 0,
                (0, _) => table[j - 1],
                (_, 0) => table[(i - 1) * lb],
                _ => table[(i - 1) * lb + j - 1]
                    .min(table[(i - 1) * lb + j])
                    .min(table[i * lb + j - 1]),
            };
            table[i * lb + j] = step_cost(a, i, b, j) + prev;
        }
    }
    let d = |i: usize, j: usize| table[i * lb + j];
    let (mut i, mut j) = (la - 1, lb - 1);
    let mut path = vec![(i, j)];
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = d(i - 1, j - 1);
                let up = d(i - 1, j);
                let left = d(i, j - 1);
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult {
        distance: d(la - 1, lb - 1) as f64,
        path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub dtw_distance: f64,
    pub path_length: usize,
    /// `1 - distance / ((K - 1) * C * path_length)`, clamped to `[0, 1]`.
    pub similarity_score: f64,
    pub channel_labels: Vec<String>,
    /// Mean absolute activation difference along the path, per channel.
    pub channel_mean_abs_difference: Vec<f64>,
}

pub fn similarity_score(a: &ActionTokenMatrix, b: &ActionTokenMatrix) -> Result<SimilarityReport> {
    if a.k < 2 {
        return Err(Error::InvalidConfig(format!("K = {} < 2", a.k)));
    }
    let dtw = dtw_distance(a, b)?;
    let channels = a.num_channels();
    let max_error = (a.k - 1) as f64;
    let path_length = dtw.path_length();
    let score = 1.0 - dtw.distance / (max_error * channels as f64 * path_length as f64);
    let channel_mean_abs_difference = (0..channels)
        .map(|m| {
            dtw.path
                .iter()
                .map(|&(i, j)| a.value(i, m).abs_diff(b.value(j, m)) as f64)
                .sum::<f64>()
                / path_length as f64
        })
        .collect();
    Ok(SimilarityReport {
        dtw_distance: dtw.distance,
        path_length,
        similarity_score: score.clamp(0.0, 1.0),
        channel_labels: a.channel_labels.clone(),
        channel_mean_abs_difference,
    })
}

impl SimilarityReport {
    pub fn percent(&self) -> String {
        format!("{:.2}%", 100.0 * self.similarity_score)
    }

    pub fn summary_line(&self) -> String {
        format!(
            "dtw_distance={} path_length={} similarity={}",
            self.dtw_distance,
            self.path_length,
            self.percent()
        )
    }

    /// `metric,value` rows; per-channel diagnostics as `channel:<label>`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "metric,value\ndtw_distance,{}\npath_length,{}\nsimilarity_score,{}\n",
            self.dtw_distance, self.path_length, self.similarity_score
        );
        for (label, v) in self.channel_labels.iter().zip(&self.channel_mean_abs_difference) {
            out.push_str(&format!("channel:{label},{v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenStatistics {
    pub k: usize,
    pub length: usize,
    /// Share of each token id.
    pub ratios: Vec<f64>,
    /// Fraction of adjacent pairs that differ.
    pub transition_frequency: f64,
    /// Mean length of maximal runs of each token; 0 when absent.
    pub mean_run_length: Vec<f64>,
    pub max_run_length: Vec<usize>,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    /// Variance is zero, so skewness and kurtosis are reported as 0.
    pub degenerate_moments: bool,
}

/// Statistics of one channel's token ids; moments are over activation
/// values and use `1/L` normalization throughout.
pub fn token_statistics(tokens: &[usize], k: usize) -> Result<TokenStatistics> {
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(&label) = tokens.iter().find(|&&t| t >= k) {
        return Err(Error::LabelOutOfRange { label, k });
    }
    let len = tokens.len();
    let n = len as f64;
    let mut counts = vec![0usize; k];
    for &t in tokens {
        counts[t] += 1;
    }
    let ratios = counts.iter().map(|&c| c as f64 / n).collect();

    let changes = tokens.windows(2).filter(|w| w[0] != w[1]).count();
    let transition_frequency = if len > 1 {
        changes as f64 / (len - 1) as f64
    } else {
        0.0
    };

    let mut run_count = vec![0usize; k];
    let mut max_run_length = vec![0usize; k];
    for run in tokens.chunk_by(|x, y| x == y) {
        run_count[run[0]] += 1;
        max_run_length[run[0]] = max_run_length[run[0]].max(run.len());
    }
    let mean_run_length = (0..k)
        .map(|t| {
            if run_count[t] == 0 {
                0.0
            } else {
                counts[t] as f64 / run_count[t] as f64
            }
        })
        .collect();

    let values: Vec<f64> = tokens.iter().map(|&t| token_value(t, k) as f64).collect();
    let mean = values.iter().sum::<f64>() / n;
    let central = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let variance = central(2);
    let degenerate_moments = variance <= 0.0;
    let (skewness, kurtosis) = if degenerate_moments {
        (0.0, 0.0)
    } else {
        (central(3) / variance.powf(1.5), central(4) / (variance * variance) - 3.0)
    };

    Ok(TokenStatistics {
        k,
        length: len,
        ratios,
        transition_frequency,
        mean_run_length,
        max_run_length,
        mean,
        variance,
        skewness,
        kurtosis,
        degenerate_moments,
    })
}

pub fn sequence_statistics(seq: &TokenSequence) -> Result<TokenStatistics> {
    token_statistics(&seq.tokens, seq.k)
}

impl TokenStatistics {
    /// `3K + 5` values: ratios, transition frequency, mean runs, max runs,
    /// mean, variance, skewness, kurtosis.
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut v = self.ratios.clone();
        v.push(self.transition_frequency);
        v.extend(&self.mean_run_length);
        v.extend(self.max_run_length.iter().map(|&m| m as f64));
        v.extend([self.mean, self.variance, self.skewness, self.kurtosis]);
        v
    }

    pub fn feature_names(k: usize) -> Vec<String> {
        let letters = || (0..k).map(token_letter);
        let mut names: Vec<String> = letters().map(|l| format!("ratio_{l}")).collect();
        names.push("transition_frequency".into());
        names.extend(letters().map(|l| format!("mean_run_{l}")));
        names.extend(letters().map(|l| format!("max_run_{l}")));
        names.extend(["mean", "variance", "skewness", "kurtosis"].map(String::from));
        names
    }
}

/// One row per `(channel label, statistics)`, columns as
/// [`TokenStatistics::feature_names`] plus `length` and `degenerate_moments`.
pub fn statistics_csv(rows: &[(String, TokenStatistics)]) -> String {
    let k = rows.first().map_or(0, |(_, s)| s.k);
    let mut out = format!(
        "channel,length,{},degenerate_moments\n",
        TokenStatistics::feature_names(k).join(",")
    );
    for (label, s) in rows {
        let values: Vec<String> = s.feature_vector().iter().map(|v| v.to_string()).collect();
        out.push_str(&format!(
            "{label},{},{},{}\n",
            s.length,
            values.join(","),
            s.degenerate_moments
        ));
    }
    out
}

/// Fixes a sequence's length: repeats the last token when short, keeps the
/// head when long.
pub fn replication_pad(seq: &TokenSequence, target: usize) -> Result<TokenSequence> {
    let last = *seq.tokens.last().ok_or(Error::EmptySequence)?;
    if target == 0 {
        return Err(Error::InvalidConfig("padding target must be at least 1".into()));
    }
    let mut tokens = seq.tokens.clone();
    tokens.resize(target, last);
    Ok(TokenSequence {
        tokens,
        ..seq.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub counts: Vec<Vec<usize>>,
    /// Row-stochastic; rows without outgoing transitions are uniform.
    pub probabilities: Vec<Vec<f64>>,
    pub uniform_rows: Vec<bool>,
}

/// Pools `s[t] -> s[t + 1]` pairs over all sequences.
pub fn transition_matrix(sequences: &[TokenSequence], k: usize) -> Result<TransitionMatrix> {
    if sequences.iter().all(TokenSequence::is_empty) {
        return Err(Error::EmptySequence);
    }
    if sequences
        .iter()
        .any(|s| s.k != k || s.fingerprint != sequences[0].fingerprint)
    {
        return Err(Error::CodebookMismatch);
    }
    let mut counts = vec![vec![0usize; k]; k];
    for s in sequences {
        if let Some(&label) = s.tokens.iter().find(|&&t| t >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        for w in s.tokens.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
    }
    let mut uniform_rows = vec![false; k];
    let probabilities = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                uniform_rows[i] = true;
                vec![1.0 / k as f64; k]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok(TransitionMatrix {
        counts,
        probabilities,
        uniform_rows,
    })
}

impl TransitionMatrix {
    /// Probability matrix with letter headers and a trailing `uniform` column.
    pub fn to_csv(&self) -> String {
        let k = self.probabilities.len();
        let mut out = String::from("from\\to");
        for j in 0..k {
            out.push(',');
            out.push(token_letter(j));
        }
        out.push_str(",uniform\n");
        for (i, row) in self.probabilities.iter().enumerate() {
            out.push(token_letter(i));
            for p in row {
                out.push_str(&format!(",{p}"));
            }
            out.push_str(&format!(",{}\n", self.uniform_rows[i]));
        }
        out
    }
}

/// Pairwise Euclidean distances between centroids in normalized space.
pub fn report_centroid_distances(cb: &Codebook) -> Vec<Vec<f64>> {
    let c = cb.centroids();
    c.iter()
        .map(|p| {
            c.iter()
                .map(|q| crate::codebook::squared_distance(p, q).sqrt())
                .collect()
        })
        .collect()
}

pub fn square_matrix_csv(m: &[Vec<f64>]) -> String {
    let mut out = String::from("token");
    for j in 0..m.len() {
        out.push(',');
        out.push(token_letter(j));
    }
    out.push('\n');
    for (i, row) in m.iter().enumerate() {
        out.push(token_letter(i));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Size of a token representation relative to the raw samples it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionReduction {
    pub tokens: usize,
    /// Samples spanned by `tokens` windows: `((L - 1) * stride + window) * fs`.
    pub raw_samples: usize,
    /// `1 - tokens / raw_samples`.
    pub reduction: f64,
}

pub fn dimension_reduction(
    tokens: usize,
    window_ms: f64,
    stride_ms: f64,
    sample_rate_hz: f64,
) -> DimensionReduction {
    let span_ms = tokens.saturating_sub(1) as f64 * stride_ms + window_ms;
    let raw_samples = (span_ms * sample_rate_hz / 1000.0).round() as usize;
    DimensionReduction {
        tokens,
        raw_samples,
        reduction: 1.0 - tokens as f64 / raw_samples.max(1) as f64,
    }
}
