//! Acceptance gate: one line per criterion, non-zero exit if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semg_tokens::codebook::{fit_codebook, lloyd, tokenize_recording, Point};
use semg_tokens::consistency::{compare_labelings, run_consistency_experiment};
use semg_tokens::features::{self, extract_feature_vector, FEATURE_COUNT};
use semg_tokens::preprocess::{bandpass_filter, Segment};
use semg_tokens::quality::{dimension_reduction, dtw_distance, similarity_score, ActionTokenMatrix};
use semg_tokens::selection::{compute_pnmi, sweep_k};
use semg_tokens::synth::{generate, segment_levels, ActivationProfile, ChannelSchedule};
use semg_tokens::{PipelineConfig, Recording};

use common::{blobs, naive, permutations, spearman};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

// ---------------------------------------------------------------- 1

fn feature_oracles() -> Outcome {
    let fs = 1259.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut checked = 0;
    for case in 0..100 {
        let n = rng.random_range(62..=160);
        let scale = 10f64.powf(rng.random_range(-2.0..0.5));
        let offset = rng.random_range(-0.05..0.05);
        let x: Vec<f64> = (0..n)
            .map(|_| offset + scale * noise.sample(&mut rng))
            .collect();
        let mut cfg = PipelineConfig::default();
        if case % 2 == 1 {
            cfg.zc_threshold = 0.2 * scale;
            cfg.ssc_threshold = 0.05 * scale * scale;
            cfg.wamp_threshold = 0.5 * scale;
        }
        let f = extract_feature_vector(&Segment::from_values(x.clone()), &cfg, fs)
            .map_err(|e| format!("case {case}: {e}"))?;
        let v = f.values;
        let (mnf, mdf, psr) = naive::spectral(&x, cfg.fft_size, fs, cfg.psr_halfband_hz);
        let counts = [
            (features::ZC, naive::zc(&x, cfg.zc_threshold)),
            (features::SSC, naive::ssc(&x, cfg.ssc_threshold)),
            (features::WAMP, naive::wamp(&x, cfg.wamp_threshold)),
        ];
        for (idx, want) in counts {
            ensure(v[idx] == want as f64, || {
                format!("case {case}: {} = {} vs {want}", features::FEATURE_NAMES[idx], v[idx])
            })?;
        }
        let reals = [
            (features::RMS, naive::rms(&x), 1e-9),
            (features::MAV, naive::mav(&x), 1e-9),
            (features::WL, naive::wl(&x), 1e-9),
            (features::ARC, naive::arc(&x, cfg.ar_order), 1e-6),
            (features::MNF, mnf, 1e-6),
            (features::MDF, mdf, 1e-6),
            (features::PSR, psr, 1e-6),
        ];
        for (idx, want, rel) in reals {
            ensure(rel_close(v[idx], want, rel), || {
                format!("case {case}: {} = {} vs {want}", features::FEATURE_NAMES[idx], v[idx])
            })?;
        }
        checked += FEATURE_COUNT;
    }
    Ok(format!("{checked} feature values on 100 segments match the loop oracles"))
}

// ---------------------------------------------------------------- 2

fn filter_contract() -> Outcome {
    let fs = 1259.0;
    let cfg = PipelineConfig::default();
    let n = (2.0 * fs) as usize;
    let mut details = Vec::new();
    for (freq, pass) in [(100.0, true), (5.0, false), (600.0, false)] {
        let tone: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * freq * t as f64 / fs).sin())
            .collect();
        let rec = Recording::new(vec![tone.clone()], fs, vec!["x".into()]).map_err(|e| e.to_string())?;
        let out = bandpass_filter(&rec, &cfg).map_err(|e| e.to_string())?;
        let mid = n / 4..3 * n / 4;
        let gain_db = 20.0 * (naive::rms(&out.channels()[0][mid.clone()]) / naive::rms(&tone[mid])).log10();
        details.push(format!("{freq} Hz {gain_db:+.2} dB"));
        let ok = if pass { gain_db.abs() <= 1.0 } else { gain_db <= -20.0 };
        ensure(ok, || format!("{freq} Hz tone: {gain_db:.3} dB"))?;
    }
    Ok(details.join(", "))
}

// ---------------------------------------------------------------- 3

fn sq(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of `truth` recovered by the best relabeling of `pred`.
fn best_permutation_accuracy(truth: &[usize], pred: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|p| truth.iter().zip(pred).filter(|(t, q)| p[**q] == **t).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}

fn kmeans_correctness() -> Outcome {
    let mut iterations = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let k = rng.random_range(2..=8);
        let (f, _) = blobs(seed, seed + 1, 6, 40, 2.5);
        let points: Vec<Point> = f.iter().map(|v| v.values).collect();
        let run = lloyd(&points, k, seed, 300, 0.0);
        iterations += run.iterations;
        for (i, w) in run.sse_history.windows(2).enumerate() {
            ensure(w[1] <= w[0], || format!("seed {seed}: SSE rose at step {i}: {} -> {}", w[0], w[1]))?;
        }
        for (p, &a) in points.iter().zip(&run.assignments) {
            let d: Vec<f64> = run.centroids.iter().map(|c| sq(p, c)).collect();
            let best = (0..k).fold(0, |b, j| if d[j] < d[b] { j } else { b });
            ensure(a == best, || format!("seed {seed}: assigned {a}, nearest {best}"))?;
        }
    }
    for seed in 0..20u64 {
        let (f, truth) = blobs(1000 + seed, seed, 3, 100, 1.0);
        let cfg = PipelineConfig {
            k_clusters: 3,
            rng_seed: seed,
            ..PipelineConfig::default()
        };
        let out = fit_codebook(&f, &cfg).map_err(|e| e.to_string())?;
        let acc = best_permutation_accuracy(&truth, &out.assignments, 3);
        ensure(acc == 1.0, || format!("3-blob seed {seed}: accuracy {acc}"))?;
    }
    Ok(format!(
        "20 runs monotone and exactly nearest ({iterations} Lloyd iterations); 3 blobs recovered 20/20"
    ))
}

// ---------------------------------------------------------------- 4

fn model_selection() -> Outcome {
    let (k_min, k_max, n_folds) = (2, 10, 5);
    let mut peaks = Vec::new();
    let (mut violations, mut pairs) = (0, 0);
    for seed in 0..20u64 {
        let (f, truth) = blobs(2000 + seed, seed, 5, 60, 1.0);
        let size = f.len() / n_folds;
        let folds: Vec<_> = f.chunks(size).map(<[_]>::to_vec).collect();
        let refs: Vec<_> = truth.chunks(size).map(<[_]>::to_vec).collect();
        let cfg = PipelineConfig {
            rng_seed: seed,
            ..PipelineConfig::default()
        };
        let report = sweep_k(&folds, Some(&refs), k_min, k_max, &cfg).map_err(|e| e.to_string())?;
        peaks.push(report.best_pnmi_k().unwrap());
        for w in report.summary.windows(2) {
            pairs += 1;
            if w[1].sse_mean > w[0].sse_mean {
                violations += 1;
            }
        }
    }
    let hits = peaks.iter().filter(|k| (4..=6).contains(*k)).count();
    let summary = format!("PNMI peak in 4..=6 for {hits}/20 seeds {peaks:?}; SSE increases {violations}/{pairs}");
    ensure(hits >= 18, || summary.clone())?;
    ensure(violations as f64 <= 0.01 * pairs as f64, || summary.clone())?;
    Ok(summary)
}

// ---------------------------------------------------------------- 5

fn pnmi_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..10_000 {
        let n = rng.random_range(1..200);
        let ky = rng.random_range(1..8);
        let kt = rng.random_range(1..8);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..ky)).collect();
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
        let p = compute_pnmi(&y, &t).map_err(|e| e.to_string())?.value;
        ensure((0.0..=1.0).contains(&p), || format!("case {case}: PNMI {p}"))?;
        let perm = {
            let mut q: Vec<usize> = (0..ky).map(|i| i + 10).collect();
            for i in (1..q.len()).rev() {
                q.swap(i, rng.random_range(0..=i));
            }
            q
        };
        let relabeled: Vec<usize> = y.iter().map(|&v| perm[v]).collect();
        let p = compute_pnmi(&y, &relabeled).map_err(|e| e.to_string())?.value;
        ensure(p == 1.0, || format!("case {case}: bijective relabeling gave {p}"))?;
    }
    let independent = compute_pnmi(&[0, 0, 1, 1, 2, 2], &[0, 1, 0, 1, 0, 1])
        .map_err(|e| e.to_string())?
        .value;
    ensure(independent == 0.0, || format!("independent example gave {independent}"))?;
    // y = [0,0,1,1], t = [0,1,1,1]: H(y) = ln 2, H(y|t) = 3/4 * H(1/3, 2/3).
    let h_y = 2f64.ln();
    let h_cond = 0.75 * -((1.0f64 / 3.0) * (1.0f64 / 3.0).ln() + (2.0f64 / 3.0) * (2.0f64 / 3.0).ln());
    let want = 1.0 - h_cond / h_y;
    let got = compute_pnmi(&[0, 0, 1, 1], &[0, 1, 1, 1]).map_err(|e| e.to_string())?.value;
    ensure((got - want).abs() <= 1e-12, || format!("fixture {got} vs {want}"))?;
    Ok(format!("bounds and relabeling on 1e4 pairs; independent = 0; fixture {got:.12}"))
}

// ---------------------------------------------------------------- 6

fn consistency_protocol() -> Outcome {
    let mut worst = (f64::INFINITY, f64::INFINITY);
    for seed in 0..10u64 {
        let (train, _) = blobs(3000 + seed, 2 * seed, 5, 100, 1.0);
        let (test, _) = blobs(3000 + seed, 2 * seed + 1, 5, 100, 1.0);
        let cfg = PipelineConfig {
            k_clusters: 5,
            rng_seed: seed,
            ..PipelineConfig::default()
        };
        let r = run_consistency_experiment(&train, &test, &cfg).map_err(|e| e.to_string())?;
        ensure(r.kappa >= 0.9 && r.overlap_rate >= 0.9, || {
            format!("seed {seed}: kappa {} overlap {}", r.kappa, r.overlap_rate)
        })?;
        ensure(r.tolerant_agreement >= r.overlap_rate, || format!("seed {seed}: tolerant < overlap"))?;
        worst = (worst.0.min(r.kappa), worst.1.min(r.overlap_rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..1000 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..100);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let r = compare_labelings(&a, &b, k, 1).map_err(|e| e.to_string())?;
        ensure(r.tolerant_agreement >= r.overlap_rate, || format!("random case {case}"))?;
    }
    for case in 0..100 {
        let k = 2 + case % 5;
        let n = rng.random_range(k..60);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let shuffle = {
            let mut q: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                q.swap(i, rng.random_range(0..=i));
            }
            q
        };
        let b: Vec<usize> = a
            .iter()
            .map(|&v| if rng.random_bool(0.3) { rng.random_range(0..k) } else { shuffle[v] })
            .collect();
        let r = compare_labelings(&a, &b, k, 0).map_err(|e| e.to_string())?;
        let hungarian = a.iter().zip(&b).filter(|(x, y)| r.alignment[**y] == **x).count();
        let brute = permutations(k)
            .iter()
            .map(|p| a.iter().zip(&b).filter(|(x, y)| p[**y] == **x).count())
            .max()
            .unwrap();
        ensure(hungarian == brute, || format!("case {case} K={k}: {hungarian} vs {brute}"))?;
    }
    Ok(format!(
        "min kappa {:.3}, min overlap {:.3} over 10 seeds; tolerant >= overlap; Hungarian = brute force on 100",
        worst.0, worst.1
    ))
}

// ---------------------------------------------------------------- 7

const SYMBOLS: usize = 4;

/// All sequences of length `len` over `0..SYMBOLS`, first element most
/// significant, so index `c` spells `c` in base 4.
fn sequences(len: usize) -> Vec<Vec<usize>> {
    (0..SYMBOLS.pow(len as u32))
        .map(|mut c| {
            let mut s = vec![0; len];
            for slot in s.iter_mut().rev() {
                *slot = c % SYMBOLS;
                c /= SYMBOLS;
            }
            s
        })
        .collect()
}

/// Every monotone warping path from `(0, 0)` to `(la-1, lb-1)`. With
/// `corner_free`, paths that take a vertical step directly followed by a
/// horizontal one (or vice versa) are skipped: swapping that corner for a
/// diagonal drops one cell and, with non-negative costs, never costs more,
/// so the minimum over the remaining paths is unchanged.
fn warping_paths(la: usize, lb: usize, corner_free: bool) -> Vec<Vec<(usize, usize)>> {
    fn walk(
        cell: (usize, usize),
        last: u8,
        end: (usize, usize),
        corner_free: bool,
        path: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        path.push(cell);
        if cell == end {
            out.push(path.clone());
        } else {
            let (i, j) = cell;
            if i < end.0 && j < end.1 {
                walk((i + 1, j + 1), 0, end, corner_free, path, out);
            }
            if i < end.0 && !(corner_free && last == 2) {
                walk((i + 1, j), 1, end, corner_free, path, out);
            }
            if j < end.1 && !(corner_free && last == 1) {
                walk((i, j + 1), 2, end, corner_free, path, out);
            }
        }
        path.pop();
    }
    let mut out = Vec::new();
    walk((0, 0), 0, (la - 1, lb - 1), corner_free, &mut Vec::new(), &mut out);
    out
}

fn dtw_suite() -> Outcome {
    let max_len = 6;
    let k = SYMBOLS;
    let seqs: Vec<Vec<Vec<usize>>> = (0..=max_len).map(sequences).collect();
    let matrices: Vec<Vec<ActionTokenMatrix>> = seqs
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|s| {
                    let rows: Vec<Vec<usize>> = s.iter().map(|&v| vec![v]).collect();
                    ActionTokenMatrix::from_values(&rows, k).unwrap()
                })
                .collect()
        })
        .collect();

    // Plain enumeration of every path, and validity of the returned path.
    let mut small_pairs = 0usize;
    for la in 1..=4 {
        for lb in 1..=4 {
            let paths = warping_paths(la, lb, false);
            for (ai, a) in seqs[la].iter().enumerate() {
                for (bi, b) in seqs[lb].iter().enumerate() {
                    let cost = |p: &[(usize, usize)]| -> u64 {
                        p.iter().map(|&(i, j)| a[i].abs_diff(b[j]) as u64).sum()
                    };
                    let want = paths.iter().map(|p| cost(p)).min().unwrap();
                    let got = dtw_distance(&matrices[la][ai], &matrices[lb][bi]).map_err(|e| e.to_string())?;
                    ensure(got.distance == want as f64, || {
                        format!("{a:?} vs {b:?}: {} vs {want}", got.distance)
                    })?;
                    ensure(paths.contains(&got.path) && cost(&got.path) == want, || {
                        format!("{a:?} vs {b:?}: invalid path {:?}", got.path)
                    })?;
                    small_pairs += 1;
                }
            }
        }
    }

    // Every pair up to `max_len`. For a fixed `a` and path the cost is a sum
    // of per-column terms over `b`, so all `b` are priced by one pass over
    // the base-4 digit tree.
    let mut pairs = 0usize;
    let (mut level, mut next) = (Vec::new(), Vec::new());
    for la in 1..=max_len {
        for lb in 1..=max_len {
            let paths = warping_paths(la, lb, true);
            for (ai, a) in seqs[la].iter().enumerate() {
                let mut best = vec![u64::MAX; seqs[lb].len()];
                for p in &paths {
                    let mut column = vec![[0u64; SYMBOLS]; lb];
                    for &(i, j) in p {
                        for (v, c) in column[j].iter_mut().enumerate() {
                            *c += a[i].abs_diff(v) as u64;
                        }
                    }
                    level.clear();
                    level.push(0u64);
                    for col in &column {
                        next.clear();
                        for &partial in &level {
                            next.extend(col.iter().map(|c| partial + c));
                        }
                        std::mem::swap(&mut level, &mut next);
                    }
                    for (b, c) in best.iter_mut().zip(&level) {
                        *b = (*b).min(*c);
                    }
                }
                for (bi, want) in best.iter().enumerate() {
                    let got = dtw_distance(&matrices[la][ai], &matrices[lb][bi])
                        .map_err(|e| e.to_string())?
                        .distance;
                    ensure(got == *want as f64, || {
                        format!("{a:?} vs {:?}: {got} vs {want}", seqs[lb][bi])
                    })?;
                }
                pairs += best.len();
            }
        }
    }

    for level in &matrices[1..] {
        for m in level {
            let r = similarity_score(m, m).map_err(|e| e.to_string())?;
            ensure(r.similarity_score == 1.0 && r.percent() == "100.00%", || {
                format!("self-similarity {}", r.similarity_score)
            })?;
        }
    }
    let rest = ActionTokenMatrix::from_values(&[vec![0]], k).unwrap();
    let peak = ActionTokenMatrix::from_values(&[vec![k - 1]], k).unwrap();
    let zero = similarity_score(&rest, &peak).map_err(|e| e.to_string())?.similarity_score;
    ensure(zero == 0.0, || format!("maximal-error fixture scored {zero}"))?;
    Ok(format!(
        "{pairs} pairs match path enumeration ({small_pairs} against all paths); self-score 100%; max-error fixture 0"
    ))
}

// ---------------------------------------------------------------- CLI helpers

fn cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_semg-tokens"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`{}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    fs::write(dir.join(name), text).map_err(|e| e.to_string())
}

fn stat<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

// ---------------------------------------------------------------- 8

fn dimension_reduction_stat() -> Outcome {
    let fs = 1269.0;
    let dr = dimension_reduction(256, 50.0, 25.0, fs);
    ensure(dr.reduction >= 0.96, || format!("library arithmetic gives {}", dr.reduction))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    write(
        d,
        "profile.toml",
        "seed = 8\nnoise_floor_mv = 0.02\n\n[[channels]]\nlabel = \"m\"\nlevels = [0.0, 1.0]\ndurations_ms = [500.0, 500.0]\ncycle = true\n",
    )?;
    // 7980 samples: (7980 - 63) / 31 + 1 = 256 windows at 1269 Hz.
    let duration_ms = format!("{}", 7980.0 / fs * 1000.0);
    cli(d, &["synth", "--profile", "profile.toml", "--out", "rec.csv", "--sample-rate-hz", "1269", "--duration-ms", &duration_ms])?;
    write(d, "manifest.csv", "path,sample_rate_hz\nrec.csv,1269\n")?;
    write(d, "cfg.json", "{\"k_clusters\": 4}")?;
    cli(d, &["train", "--manifest", "manifest.csv", "--config", "cfg.json", "--out", "cb.json"])?;
    let line = cli(d, &["tokenize", "--codebook", "cb.json", "--input", "rec.csv", "--out", "tokens.csv"])?;
    let tokens = stat(&line, "tokens_per_channel").ok_or("no tokens_per_channel")?;
    let reduction: f64 = stat(&line, "dimension_reduction")
        .ok_or("no dimension_reduction")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    ensure(tokens == "256", || format!("tokenize produced {tokens} tokens"))?;
    ensure(reduction >= 0.96, || format!("tokenize reported {reduction}"))?;
    Ok(format!(
        "L=256 at {fs} Hz: T={} reduction={:.4}; tokenize reported {reduction}",
        dr.raw_samples, dr.reduction
    ))
}

// ---------------------------------------------------------------- 9

fn walkthrough(d: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let profile = |seed: u64| {
        format!(
            "seed = {seed}\nnoise_floor_mv = 0.02\nduration_ms = 20000.0\n\n\
             [[channels]]\nlabel = \"biceps\"\nlevels = [0.0, 0.25, 0.5, 0.75, 1.0]\ndurations_ms = [800.0, 800.0, 800.0, 800.0, 800.0]\ncycle = true\n\n\
             [[channels]]\nlabel = \"triceps\"\nlevels = [1.0, 0.5, 0.0, 0.75, 0.25]\ndurations_ms = [600.0, 700.0, 800.0, 500.0, 900.0]\ncycle = true\n"
        )
    };
    write(d, "p1.toml", &profile(11))?;
    write(d, "p2.toml", &profile(12))?;
    write(d, "cfg.json", "{\"k_clusters\": 5, \"kmeans_restarts\": 4, \"rng_seed\": 7}")?;
    write(d, "train.csv", "path,sample_rate_hz,subject\nrec1.csv,1259,s1\n")?;
    write(d, "test.csv", "path,sample_rate_hz,subject\nrec2.csv,1259,s2\n")?;
    let mut stdout = String::new();
    let steps: [&[&str]; 8] = [
        &["synth", "--profile", "p1.toml", "--out", "rec1.csv", "--truth", "truth1.csv"],
        &["synth", "--profile", "p2.toml", "--out", "rec2.csv"],
        &["train", "--manifest", "train.csv", "--config", "cfg.json", "--out", "cb.json"],
        &["select-k", "--manifest", "train.csv", "--config", "cfg.json", "--kmin", "2", "--kmax", "6", "--folds", "3", "--reference", "truth1.csv", "--out", "sweep.csv"],
        &["tokenize", "--codebook", "cb.json", "--input", "rec1.csv", "--out", "tok1.csv", "--features-out", "feat1.csv"],
        &["tokenize", "--codebook", "cb.json", "--input", "rec2.csv", "--out", "tok2.csv"],
        &["score", "--codebook", "cb.json", "--standard", "rec1.csv", "--candidate", "rec2.csv", "--out", "score.csv"],
        &["consistency", "--train-manifest", "train.csv", "--test-manifest", "test.csv", "--config", "cfg.json", "--out", "consistency"],
    ];
    for args in steps {
        stdout.push_str(&cli(d, args)?);
    }
    let mut files = vec![("stdout".to_owned(), stdout.into_bytes())];
    let mut stack = vec![d.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in fs::read_dir(&p).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(d).unwrap().display().to_string();
                files.push((name, fs::read(&path).map_err(|e| e.to_string())?));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = walkthrough(a.path())?;
    let second = walkthrough(b.path())?;
    let names = |f: &[(String, Vec<u8>)]| f.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    ensure(names(&first) == names(&second), || "different output file sets".into())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    let bytes: usize = first.iter().map(|(_, x)| x.len()).sum();
    Ok(format!("{} outputs ({bytes} bytes) identical across two runs", first.len()))
}

// ---------------------------------------------------------------- 10

fn activation_monotonicity() -> Outcome {
    let fs = 1259.0;
    let k = 5;
    let mut rhos = Vec::new();
    for seed in 0..5u64 {
        let profile = ActivationProfile {
            seed,
            sample_rate_hz: fs,
            duration_ms: None,
            noise_floor_mv: 0.02,
            gain_mv: 1.0,
            carrier_low_hz: 20.0,
            carrier_high_hz: 450.0,
            channels: vec![
                ChannelSchedule {
                    label: "a".into(),
                    levels: vec![0.0, 0.5, 0.125, 1.0, 0.25],
                    durations_ms: vec![700.0, 500.0, 600.0, 400.0, 800.0],
                    cycle: true,
                },
                ChannelSchedule {
                    label: "b".into(),
                    levels: vec![1.0, 0.0, 0.25, 0.125, 0.5],
                    durations_ms: vec![500.0, 900.0, 400.0, 600.0, 700.0],
                    cycle: true,
                },
            ],
        };
        let synth = generate(&profile, fs, 30_000.0).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig {
            k_clusters: k,
            rng_seed: seed,
            ..PipelineConfig::default()
        };
        let per_channel = features::recording_features(&synth.recording, &cfg).map_err(|e| e.to_string())?;
        let training: Vec<_> = per_channel.iter().flatten().map(|r| r.features).collect();
        let cb = fit_codebook(&training, &cfg).map_err(|e| e.to_string())?.codebook;
        let tokens = tokenize_recording(&synth.recording, &cb, &cfg).map_err(|e| e.to_string())?;
        let (w, s) = (cfg.window_samples(fs), cfg.stride_samples(fs));
        let levels = segment_levels(&synth.levels, w, s);
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for (seq, lv) in tokens.iter().zip(&levels) {
            for (&t, &l) in seq.tokens.iter().zip(lv) {
                sum[t] += l;
                count[t] += 1;
            }
        }
        let (activation, mean_level): (Vec<f64>, Vec<f64>) = (0..k)
            .filter(|&t| count[t] > 0)
            .map(|t| ((k - 1 - t) as f64, sum[t] / count[t] as f64))
            .unzip();
        rhos.push(spearman(&activation, &mean_level));
    }
    let summary = format!("Spearman per seed {:?}", rhos.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>());
    ensure(rhos.iter().all(|&r| r >= 0.95), || summary.clone())?;
    Ok(summary)
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 10] = [
        ("feature oracles", feature_oracles, Some(Duration::from_secs(5))),
        ("filter contract", filter_contract, None),
        ("k-means correctness", kmeans_correctness, None),
        ("model selection", model_selection, Some(Duration::from_secs(120))),
        ("PNMI properties", pnmi_properties, None),
        ("consistency protocol", consistency_protocol, None),
        ("DTW and score", dtw_suite, Some(Duration::from_secs(30))),
        ("dimension reduction", dimension_reduction_stat, None),
        ("end-to-end determinism", determinism, Some(Duration::from_secs(300))),
        ("activation monotonicity", activation_monotonicity, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| match budget {
                Some(b) if start.elapsed() > b => Err(format!("{detail}; over the {}s budget", b.as_secs())),
                _ => Ok(detail),
            });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
