//! Agreement between two token labelings of the same segments, typically a
//! codebook trained elsewhere (strategy A) against one clustered directly on
//! the data (strategy B).
//!
//! Independent K-means runs name their clusters arbitrarily, so B's labels
//! are first mapped onto A's by optimal assignment on the co-occurrence
//! counts. Overlap, Cohen's kappa and tolerant agreement are then computed
//! on the aligned labels.

use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::codebook::fit_codebook;
use crate::config::PipelineConfig;
use crate::error::{check_lengths, Error, Result};
use crate::features::FeatureVector;

fn check_range(labels: &[usize], k: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= k) {
        Some(&label) => Err(Error::LabelOutOfRange { label, k }),
        None => Ok(()),
    }
}

/// `K x K` counts; rows are labels of `b`, columns labels of `a`.
pub fn confusion_matrix(a: &[usize], b: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(a.len(), b.len())?;
    check_range(a, k)?;
    check_range(b, k)?;
    let mut m = vec![vec![0; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        m[y][x] += 1;
    }
    Ok(m)
}

/// Permutation `pi` (indexed by B's label) maximizing the number of
/// positions with `a[t] == pi[b[t]]`. Among optimal permutations the one
/// keeping the most labels fixed is preferred, so equal inputs give the
/// identity.
pub fn align_labels(a: &[usize], b: &[usize], k: usize) -> Result<Vec<usize>> {
    let counts = confusion_matrix(a, b, k)?;
    // Agreement dominates; the diagonal bonus (< k + 1 in total) only
    // separates permutations that agree equally often.
    let scale = k as i64 + 1;
    let weights = Matrix::from_rows(counts.iter().enumerate().map(|(row, r)| {
        r.iter()
            .enumerate()
            .map(move |(col, &c)| c as i64 * scale + i64::from(row == col))
    }))
    .expect("square matrix");
    Ok(kuhn_munkres(&weights).1)
}

pub fn apply_alignment(labels: &[usize], pi: &[usize]) -> Vec<usize> {
    labels.iter().map(|&l| pi[l]).collect()
}

/// Fraction of positions where the labels are equal.
pub fn overlap_rate(a: &[usize], b: &[usize]) -> Result<f64> {
    tolerant_agreement(a, b, 0)
}

/// Fraction of positions with `|a[t] - b[t]| <= tolerance`.
pub fn tolerant_agreement(a: &[usize], b: &[usize], tolerance: usize) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    let hits = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.abs_diff(**y) <= tolerance)
        .count();
    Ok(hits as f64 / a.len() as f64)
}

/// Cohen's kappa; 1 when chance agreement is already 1.
pub fn cohens_kappa(a: &[usize], b: &[usize], k: usize) -> Result<f64> {
    let m = confusion_matrix(a, b, k)?;
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    let total = a.len() as f64;
    let observed = (0..k).map(|i| m[i][i]).sum::<usize>() as f64 / total;
    let expected: f64 = (0..k)
        .map(|i| {
            let row = m[i].iter().sum::<usize>() as f64;
            let col = m.iter().map(|r| r[i]).sum::<usize>() as f64;
            (row / total) * (col / total)
        })
        .sum();
    if expected >= 1.0 {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub k: usize,
    /// Rows are B's labels before alignment, columns A's labels.
    pub raw_confusion: Vec<Vec<usize>>,
    /// Rows are B's aligned labels, columns A's labels.
    pub confusion: Vec<Vec<usize>>,
    /// `alignment[b] = a`.
    pub alignment: Vec<usize>,
    pub overlap_rate: f64,
    pub kappa: f64,
    pub tolerance: usize,
    pub tolerant_agreement: f64,
}

/// Aligns `b` to `a` and computes every agreement statistic.
pub fn compare_labelings(
    a: &[usize],
    b: &[usize],
    k: usize,
    tolerance: usize,
) -> Result<ConsistencyReport> {
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    let raw_confusion = confusion_matrix(a, b, k)?;
    let alignment = align_labels(a, b, k)?;
    let aligned = apply_alignment(b, &alignment);
    Ok(ConsistencyReport {
        k,
        raw_confusion,
        confusion: confusion_matrix(a, &aligned, k)?,
        overlap_rate: overlap_rate(a, &aligned)?,
        kappa: cohens_kappa(a, &aligned, k)?,
        tolerance,
        tolerant_agreement: tolerant_agreement(a, &aligned, tolerance)?,
        alignment,
    })
}

impl ConsistencyReport {
    pub fn is_identity_alignment(&self) -> bool {
        self.alignment.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Aligned confusion matrix with a header row of A's letters and a
    /// leading column of B's letters.
    pub fn confusion_csv(&self) -> String {
        matrix_csv(&self.confusion, self.k)
    }

    pub fn raw_confusion_csv(&self) -> String {
        matrix_csv(&self.raw_confusion, self.k)
    }

    pub fn summary_line(&self) -> String {
        let alignment: Vec<String> = self.alignment.iter().map(|p| p.to_string()).collect();
        format!(
            "overlap={:.6} kappa={:.6} tolerant_agreement={:.6} tolerance={} alignment={}",
            self.overlap_rate,
            self.kappa,
            self.tolerant_agreement,
            self.tolerance,
            alignment.join(";")
        )
    }
}

fn matrix_csv(m: &[Vec<usize>], k: usize) -> String {
    use crate::codebook::token_letter;
    let mut out = String::from("B\\A");
    for a in 0..k {
        out.push(',');
        out.push(token_letter(a));
    }
    out.push('\n');
    for (b, row) in m.iter().enumerate() {
        out.push(token_letter(b));
        for c in row {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}

/// Trains codebook A on `train` and labels `test` with it; clusters `test`
/// independently for B; both codebooks are activation-ordered before the
/// comparison (tolerance 1).
pub fn run_consistency_experiment(
    train: &[FeatureVector],
    test: &[FeatureVector],
    cfg: &PipelineConfig,
) -> Result<ConsistencyReport> {
    let (a, b) = rayon::join(|| fit_codebook(train, cfg), || fit_codebook(test, cfg));
    let (a, b) = (a?.codebook, b?);
    let labels_a = test
        .iter()
        .map(|f| a.assign(f))
        .collect::<Result<Vec<_>>>()?;
    compare_labelings(&labels_a, &b.assignments, cfg.k_clusters, 1)
}
