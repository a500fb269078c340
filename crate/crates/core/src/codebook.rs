//! K-means codebook training, activation ordering, token assignment and
//! persistence.
//!
//! Centroids live in z-scored feature space. After training the clusters are
//! relabeled by descending denormalized centroid RMS (ties: MAV, then the
//! original index), so token `A` is always the most active state and the
//! highest id is the resting state.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, MAX_TOKENS};
use crate::error::{Error, Result};
use crate::features::{self, FeatureVector, Normalizer, FEATURE_COUNT, MAV, RMS};
use crate::signal::Recording;

pub const FORMAT_VERSION: u64 = 1;

pub type Point = [f64; FEATURE_COUNT];

/// Letter for a token id: 0 is `A`.
pub fn token_letter(id: usize) -> char {
    assert!(id < MAX_TOKENS, "token id {id} has no letter");
    (b'A' + id as u8) as char
}

/// Inverse of [`token_letter`].
pub fn token_from_letter(letter: char) -> Option<usize> {
    letter
        .is_ascii_uppercase()
        .then(|| (letter as u8 - b'A') as usize)
}

pub(crate) fn squared_distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest index.
pub fn nearest(point: &Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, squared_distance(point, &centroids[0]));
    for (k, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Training metadata stored with a codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rng_seed: u64,
    pub restarts: usize,
    /// Seed of the restart that won.
    pub best_seed: u64,
    pub iterations_used: usize,
    pub training_sse: f64,
    pub training_vectors: usize,
    /// Sample rate shared by every training recording, when known.
    pub sample_rate_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookBody {
    format_version: u64,
    k: usize,
    centroids: Vec<Point>,
    normalizer: Normalizer,
    activation_rank: Vec<usize>,
    config: PipelineConfig,
    provenance: Provenance,
}

/// A trained, activation-ordered set of K centroids plus the normalizer that
/// maps raw features into centroid space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    body: CodebookBody,
    fingerprint: String,
}

impl Codebook {
    /// Assembles a codebook from normalized centroids, in the given order.
    /// Call [`Codebook::order_tokens`] to apply the activation ordering.
    pub fn from_parts(
        centroids: Vec<Point>,
        normalizer: Normalizer,
        config: PipelineConfig,
        provenance: Provenance,
    ) -> Result<Self> {
        let k = centroids.len();
        if !(2..=MAX_TOKENS).contains(&k) {
            return Err(Error::InvalidConfig(format!("codebook size {k} not in 2..=26")));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::CorruptCodebook("non-finite centroid".into()));
        }
        for i in 0..k {
            for j in i + 1..k {
                if squared_distance(&centroids[i], &centroids[j]) == 0.0 {
                    return Err(Error::CorruptCodebook(format!(
                        "centroids {i} and {j} coincide"
                    )));
                }
            }
        }
        let mut cb = Self {
            body: CodebookBody {
                format_version: FORMAT_VERSION,
                k,
                centroids,
                normalizer,
                activation_rank: (0..k).collect(),
                config,
                provenance,
            },
            fingerprint: String::new(),
        };
        cb.fingerprint = cb.content_hash();
        Ok(cb)
    }

    pub fn k(&self) -> usize {
        self.body.k
    }

    /// Normalized centroids in token order.
    pub fn centroids(&self) -> &[Point] {
        &self.body.centroids
    }

    /// Centroids mapped back to raw feature units.
    pub fn denormalized_centroids(&self) -> Vec<Point> {
        self.body
            .centroids
            .iter()
            .map(|c| self.body.normalizer.invert(c))
            .collect()
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.body.normalizer
    }

    /// `activation_rank()[token]` is the raw training cluster index of `token`.
    pub fn activation_rank(&self) -> &[usize] {
        &self.body.activation_rank
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.body.config
    }

    pub fn provenance(&self) -> &Provenance {
        &self.body.provenance
    }

    pub fn training_sse(&self) -> f64 {
        self.body.provenance.training_sse
    }

    /// Content hash (hex SHA-256) of the serialized codebook.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn letters(&self) -> String {
        (0..self.k()).map(token_letter).collect()
    }

    fn canonical_value(&self) -> serde_json::Value {
        serde_json::to_value(&self.body).expect("codebook body serializes")
    }

    fn content_hash(&self) -> String {
        hash_value(&self.canonical_value())
    }

    /// Relabels tokens by descending denormalized RMS. Idempotent.
    pub fn order_tokens(mut self) -> Self {
        let perm = activation_order(&self.body.centroids, &self.body.normalizer);
        self.body.centroids = perm.iter().map(|&i| self.body.centroids[i]).collect();
        self.body.activation_rank = perm.iter().map(|&i| self.body.activation_rank[i]).collect();
        self.fingerprint = self.content_hash();
        self
    }

    /// Nearest token for a raw feature vector.
    pub fn assign(&self, f: &FeatureVector) -> Result<usize> {
        if !f.is_finite() {
            return Err(Error::NonFiniteFeature { index: 0 });
        }
        Ok(self.assign_normalized(&self.body.normalizer.apply(f)).0)
    }

    /// Nearest token and squared distance for a point already in normalized space.
    pub fn assign_normalized(&self, z: &Point) -> (usize, f64) {
        nearest(z, &self.body.centroids)
    }

    /// Serialized JSON document, including `content_hash`.
    pub fn to_json(&self) -> String {
        let mut value = self.canonical_value();
        value
            .as_object_mut()
            .expect("object")
            .insert("content_hash".into(), self.fingerprint.clone().into());
        let mut text = serde_json::to_string_pretty(&value).expect("codebook serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::CorruptCodebook(format!("not a codebook document: {e}")))?;
        let object = value
            .as_object_mut()
            .ok_or_else(|| Error::CorruptCodebook("top level is not an object".into()))?;
        let version = object
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptCodebook("missing format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let stored = match object.remove("content_hash") {
            Some(serde_json::Value::String(h)) => h,
            _ => return Err(Error::CorruptCodebook("missing content_hash".into())),
        };
        let actual = hash_value(&value);
        if actual != stored {
            return Err(Error::CorruptCodebook(format!(
                "content hash mismatch: stored {stored}, computed {actual}"
            )));
        }
        let body: CodebookBody = serde_json::from_value(value)
            .map_err(|e| Error::CorruptCodebook(format!("invalid fields: {e}")))?;
        if body.centroids.len() != body.k || body.activation_rank.len() != body.k {
            return Err(Error::CorruptCodebook("inconsistent K".into()));
        }
        Ok(Self {
            body,
            fingerprint: stored,
        })
    }
}

fn hash_value(value: &serde_json::Value) -> String {
    // serde_json maps are sorted by key, so this text is canonical.
    let text = serde_json::to_string(value).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Permutation `perm` with `perm[new_token] = old_index`, sorting centroids by
/// descending denormalized RMS, then descending MAV, then ascending index.
pub fn activation_order(centroids: &[Point], normalizer: &Normalizer) -> Vec<usize> {
    let raw: Vec<Point> = centroids.iter().map(|c| normalizer.invert(c)).collect();
    let mut perm: Vec<usize> = (0..centroids.len()).collect();
    perm.sort_by(|&a, &b| {
        raw[b][RMS]
            .total_cmp(&raw[a][RMS])
            .then(raw[b][MAV].total_cmp(&raw[a][MAV]))
            .then(a.cmp(&b))
    });
    perm
}

pub fn order_tokens(cb: Codebook) -> Codebook {
    cb.order_tokens()
}

pub fn assign_token(f: &FeatureVector, cb: &Codebook) -> Result<usize> {
    cb.assign(f)
}

/// One Lloyd run from one k-means++ seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub seed: u64,
    pub centroids: Vec<Point>,
    /// Nearest-centroid assignment under the final centroids.
    pub assignments: Vec<usize>,
    pub sse: f64,
    /// SSE after seeding, then after every iteration.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
pub fn kmeans_plus_plus(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 {
                    acc += d;
                    chosen = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            chosen.expect("positive mass")
        } else {
            rng.random_range(0..n)
        };
        let center = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &center));
        }
        centers.push(center);
    }
    centers
}

fn assign_all(points: &[Point], centroids: &[Point]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let assignments = points
        .iter()
        .map(|p| {
            let (k, d) = nearest(p, centroids);
            sse += d;
            k
        })
        .collect();
    (assignments, sse)
}

/// Cluster means, summed in point order. Empty clusters are reseeded with
/// the point farthest from its (updated) centroid.
fn update_centroids(points: &[Point], assignments: &mut [usize], k: usize) -> Vec<Point> {
    let mut sums = vec![[0.0; FEATURE_COUNT]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments.iter()) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut centroids: Vec<Point> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c == 0 {
                [0.0; FEATURE_COUNT]
            } else {
                s.map(|v| v / c as f64)
            }
        })
        .collect();
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return centroids;
    }
    let mut dist: Vec<f64> = points
        .iter()
        .zip(assignments.iter())
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .collect();
    for c in empty {
        let far = dist
            .iter()
            .enumerate()
            .fold(0, |best, (i, d)| if *d > dist[best] { i } else { best });
        centroids[c] = points[far];
        assignments[far] = c;
        dist[far] = 0.0;
    }
    centroids
}

/// Lloyd's algorithm from a k-means++ start seeded with `seed`. Stops when
/// the relative SSE improvement falls to `rel_tol` or after `max_iter`
/// iterations.
pub fn lloyd(points: &[Point], k: usize, seed: u64, max_iter: usize, rel_tol: f64) -> KMeansRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let (mut assignments, mut sse) = assign_all(points, &centroids);
    let mut history = vec![sse];
    let mut iterations = 0;
    while iterations < max_iter && sse > 0.0 {
        centroids = update_centroids(points, &mut assignments, k);
        let (next_assignments, next_sse) = assign_all(points, &centroids);
        iterations += 1;
        history.push(next_sse);
        let improvement = sse - next_sse;
        let previous = sse;
        assignments = next_assignments;
        sse = next_sse;
        if improvement <= rel_tol * previous {
            break;
        }
    }
    KMeansRun {
        seed,
        centroids,
        assignments,
        sse,
        sse_history: history,
        iterations,
    }
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub codebook: Codebook,
    /// Token id of every training vector under the final (ordered) codebook.
    pub assignments: Vec<usize>,
    /// All restarts, in seed order.
    pub runs: Vec<KMeansRun>,
}

fn count_distinct(points: &[Point]) -> usize {
    let mut keys: Vec<[u64; FEATURE_COUNT]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Trains a codebook and also returns the training assignments and every
/// restart's trajectory.
pub fn fit_codebook(features: &[FeatureVector], cfg: &PipelineConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let k = cfg.k_clusters;
    if let Some(index) = features.iter().position(|f| !f.is_finite()) {
        return Err(Error::NonFiniteFeature { index });
    }
    if features.len() < k.max(2) {
        return Err(Error::TooFewSamples {
            k,
            got: features.len(),
        });
    }
    let normalizer = Normalizer::fit(features)?;
    let points: Vec<Point> = features.iter().map(|f| normalizer.apply(f)).collect();
    let distinct = count_distinct(&points);
    if distinct < k {
        return Err(Error::TooFewSamples { k, got: distinct });
    }

    let runs: Vec<KMeansRun> = (0..cfg.kmeans_restarts as u64)
        .into_par_iter()
        .map(|r| {
            lloyd(
                &points,
                k,
                cfg.rng_seed.wrapping_add(r),
                cfg.kmeans_max_iter,
                cfg.kmeans_rel_tol,
            )
        })
        .collect();
    let best = runs
        .iter()
        .min_by(|a, b| a.sse.total_cmp(&b.sse).then(a.seed.cmp(&b.seed)))
        .expect("at least one restart");

    let provenance = Provenance {
        rng_seed: cfg.rng_seed,
        restarts: cfg.kmeans_restarts,
        best_seed: best.seed,
        iterations_used: best.iterations,
        training_sse: best.sse,
        training_vectors: features.len(),
        sample_rate_hz: None,
    };
    let codebook =
        Codebook::from_parts(best.centroids.clone(), normalizer, cfg.clone(), provenance)?
            .order_tokens();
    let mut to_token = vec![0; k];
    for (token, &raw) in codebook.activation_rank().iter().enumerate() {
        to_token[raw] = token;
    }
    let assignments = best.assignments.iter().map(|&a| to_token[a]).collect();
    Ok(TrainingOutcome {
        codebook,
        assignments,
        runs,
    })
}

pub fn train_codebook(features: &[FeatureVector], cfg: &PipelineConfig) -> Result<Codebook> {
    fit_codebook(features, cfg).map(|o| o.codebook)
}

impl Codebook {
    /// Records the training sample rate; part of the hashed content.
    pub fn with_sample_rate(mut self, sample_rate_hz: Option<f64>) -> Self {
        self.body.provenance.sample_rate_hz = sample_rate_hz;
        self.fingerprint = self.content_hash();
        self
    }
}

pub fn save_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    fs::write(path, cb.to_json()).map_err(|source| Error::UnwritableFile {
        path: path.to_owned(),
        source,
    })
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let text = fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    Codebook::from_json(&text)
}

/// Token ids of one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<usize>,
    pub channel_index: usize,
    pub channel_label: String,
    pub k: usize,
    /// Fingerprint of the codebook that produced the tokens.
    pub fingerprint: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn letters(&self) -> String {
        self.tokens.iter().map(|&t| token_letter(t)).collect()
    }
}

/// Filter, segment, featurize and assign every channel of `rec`.
pub fn tokenize_recording(
    rec: &Recording,
    cb: &Codebook,
    cfg: &PipelineConfig,
) -> Result<Vec<TokenSequence>> {
    let diffs = cfg.feature_differences(cb.config());
    if !diffs.is_empty() {
        return Err(Error::ConfigMismatch(diffs.join("; ")));
    }
    let per_channel = features::recording_features(rec, cfg)?;
    per_channel
        .into_iter()
        .enumerate()
        .map(|(c, rows)| {
            let tokens = rows
                .iter()
                .map(|r| cb.assign(&r.features))
                .collect::<Result<Vec<_>>>()?;
            Ok(TokenSequence {
                tokens,
                channel_index: c,
                channel_label: rec.channel_labels()[c].clone(),
                k: cb.k(),
                fingerprint: cb.fingerprint().to_owned(),
            })
        })
        .collect()
}

/// CSV with columns `channel,segment_index,token_id,token_letter`.
pub fn tokens_csv(sequences: &[TokenSequence]) -> String {
    let mut out = String::from("channel,segment_index,token_id,token_letter\n");
    for seq in sequences {
        for (i, &t) in seq.tokens.iter().enumerate() {
            out.push_str(&format!("{},{i},{t},{}\n", seq.channel_label, token_letter(t)));
        }
    }
    out
}

/// Parses the output of [`tokens_csv`]. Channels keep their order of first
/// appearance; the fingerprint is left empty.
pub fn parse_tokens_csv(text: &str, k: usize) -> Result<Vec<TokenSequence>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut sequences: Vec<TokenSequence> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("token csv row {row}: {e}")))?;
        if record.len() < 3 {
            return Err(Error::MalformedRow {
                row,
                expected: 4,
                found: record.len(),
            });
        }
        let label = &record[0];
        let index: usize = record[1]
            .parse()
            .map_err(|_| Error::Parse(format!("token csv row {row}: bad segment_index")))?;
        let token: usize = record[2]
            .parse()
            .map_err(|_| Error::Parse(format!("token csv row {row}: bad token_id")))?;
        if token >= k {
            return Err(Error::LabelOutOfRange { label: token, k });
        }
        let pos = match sequences.iter().position(|s| s.channel_label == label) {
            Some(p) => p,
            None => {
                sequences.push(TokenSequence {
                    tokens: Vec::new(),
                    channel_index: sequences.len(),
                    channel_label: label.to_owned(),
                    k,
                    fingerprint: String::new(),
                });
                sequences.len() - 1
            }
        };
        let seq = &mut sequences[pos];
        if index != seq.tokens.len() {
            return Err(Error::Parse(format!(
                "token csv row {row}: segment_index {index} out of order"
            )));
        }
        seq.tokens.push(token);
    }
    Ok(sequences)
}
