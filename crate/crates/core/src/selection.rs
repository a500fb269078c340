//! Choosing K: clustering compactness (SSE) and phone-normalized mutual
//! information (PNMI) against a reference labeling, swept over K with
//! K-fold cross-validation.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::codebook::{fit_codebook, Codebook};
use crate::config::PipelineConfig;
use crate::error::{check_lengths, Error, Result};
use crate::features::FeatureVector;

/// Sum of squared distances from each feature (normalized with the
/// codebook's statistics) to its nearest centroid.
pub fn compute_sse(features: &[FeatureVector], cb: &Codebook) -> Result<f64> {
    let mut sse = 0.0;
    for (index, f) in features.iter().enumerate() {
        if !f.is_finite() {
            return Err(Error::NonFiniteFeature { index });
        }
        sse += cb.assign_normalized(&cb.normalizer().apply(f)).1;
    }
    Ok(sse)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pnmi {
    pub value: f64,
    /// The reference was constant (zero entropy); `value` is 1 by convention.
    pub degenerate: bool,
}

/// `1 - H(y|t) / H(y)` from co-occurrence counts, natural log, `0 log 0 = 0`.
/// Not symmetric in its arguments.
pub fn compute_pnmi(reference: &[usize], predicted: &[usize]) -> Result<Pnmi> {
    check_lengths(reference.len(), predicted.len())?;
    if reference.is_empty() {
        return Err(Error::EmptySequence);
    }
    let total = reference.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ref_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pred_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (&y, &t) in reference.iter().zip(predicted) {
        *joint.entry((y, t)).or_default() += 1;
        *ref_counts.entry(y).or_default() += 1;
        *pred_counts.entry(t).or_default() += 1;
    }
    let h_ref: f64 = -ref_counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>();
    if h_ref <= 0.0 {
        return Ok(Pnmi {
            value: 1.0,
            degenerate: true,
        });
    }
    let h_cond: f64 = -joint
        .iter()
        .map(|(&(_, t), &c)| (c as f64 / total) * (c as f64 / pred_counts[&t] as f64).ln())
        .sum::<f64>();
    Ok(Pnmi {
        value: (1.0 - h_cond / h_ref).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Metrics for one (K, fold) cell of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub k: usize,
    pub fold: usize,
    pub sse: f64,
    pub pnmi: Option<f64>,
}

/// Mean and (population) standard deviation across folds for one K.
#[derive(Debug, Clone, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub sse_mean: f64,
    pub sse_std: f64,
    pub pnmi_mean: Option<f64>,
    pub pnmi_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepReport {
    /// Ordered by K, then fold.
    pub rows: Vec<FoldMetrics>,
    /// One entry per K, strictly increasing.
    pub summary: Vec<KSummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl KSweepReport {
    /// The K with the largest mean PNMI; the smallest such K on ties.
    pub fn best_pnmi_k(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for s in &self.summary {
            let p = s.pnmi_mean?;
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((s.k, p));
            }
        }
        best.map(|(k, _)| k)
    }

    /// `K,fold,sse,pnmi`; `pnmi` is empty for SSE-only sweeps.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,fold,sse,pnmi\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.k, r.fold, r.sse, opt(r.pnmi)));
        }
        out
    }

    /// `K,sse_mean,sse_std,pnmi_mean,pnmi_std`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("K,sse_mean,sse_std,pnmi_mean,pnmi_std\n");
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.k,
                s.sse_mean,
                s.sse_std,
                opt(s.pnmi_mean),
                opt(s.pnmi_std)
            ));
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Cross-validated sweep over `k_min..=k_max`.
///
/// `folds[f]` is the validation set of fold `f`; its training set is the
/// union of all other folds. `references`, when given, holds one reference
/// label per validation vector and enables PNMI.
pub fn sweep_k(
    folds: &[Vec<FeatureVector>],
    references: Option<&[Vec<usize>]>,
    k_min: usize,
    k_max: usize,
    cfg: &PipelineConfig,
) -> Result<KSweepReport> {
    if folds.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {}",
            folds.len()
        )));
    }
    if k_min < 2 || k_min > k_max {
        return Err(Error::InvalidConfig(format!("invalid K range {k_min}..={k_max}")));
    }
    if let Some(refs) = references {
        check_lengths(refs.len(), folds.len())?;
        for (r, f) in refs.iter().zip(folds) {
            check_lengths(r.len(), f.len())?;
        }
    }
    let cells: Vec<(usize, usize)> = (k_min..=k_max)
        .flat_map(|k| (0..folds.len()).map(move |f| (k, f)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(k, fold)| {
            let train: Vec<FeatureVector> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != fold)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let cfg_k = PipelineConfig {
                k_clusters: k,
                ..cfg.clone()
            };
            let cb = fit_codebook(&train, &cfg_k)?.codebook;
            let validation = &folds[fold];
            let sse = compute_sse(validation, &cb)?;
            let pnmi = match references {
                Some(refs) => {
                    let predicted = validation
                        .iter()
                        .map(|f| cb.assign(f))
                        .collect::<Result<Vec<_>>>()?;
                    Some(compute_pnmi(&refs[fold], &predicted)?.value)
                }
                None => None,
            };
            Ok(FoldMetrics { k, fold, sse, pnmi })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = (k_min..=k_max)
        .map(|k| {
            let cell: Vec<&FoldMetrics> = rows.iter().filter(|r| r.k == k).collect();
            let sse: Vec<f64> = cell.iter().map(|r| r.sse).collect();
            let (sse_mean, sse_std) = mean_std(&sse);
            let pnmi: Option<Vec<f64>> = cell.iter().map(|r| r.pnmi).collect();
            let (pnmi_mean, pnmi_std) = match pnmi {
                Some(p) => {
                    let (m, s) = mean_std(&p);
                    (Some(m), Some(s))
                }
                None => (None, None),
            };
            KSummary {
                k,
                sse_mean,
                sse_std,
                pnmi_mean,
                pnmi_std,
            }
        })
        .collect();
    Ok(KSweepReport { rows, summary })
}

/// Like [`sweep_k`] but fails with [`Error::MissingReference`] when no
/// reference labels are supplied.
pub fn sweep_k_with_pnmi(
    folds: &[Vec<FeatureVector>],
    references: Option<&[Vec<usize>]>,
    k_min: usize,
    k_max: usize,
    cfg: &PipelineConfig,
) -> Result<KSweepReport> {
    if references.is_none() {
        return Err(Error::MissingReference);
    }
    sweep_k(folds, references, k_min, k_max, cfg)
}
