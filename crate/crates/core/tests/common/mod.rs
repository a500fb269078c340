#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semg_tokens::features::FEATURE_COUNT;
use semg_tokens::FeatureVector;

/// Isotropic Gaussian blobs in feature space. Centers come from
/// `center_seed`, points from `point_seed`; states are drawn in random order
/// so every contiguous slice sees all of them.
pub fn blobs(
    center_seed: u64,
    point_seed: u64,
    states: usize,
    per_state: usize,
    spread: f64,
) -> (Vec<FeatureVector>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(center_seed);
    let centers: Vec<[f64; FEATURE_COUNT]> = (0..states)
        .map(|_| std::array::from_fn(|_| rng.random_range(-10.0..10.0)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
    let noise = Normal::new(0.0, spread).unwrap();
    let mut labels: Vec<usize> = (0..states).flat_map(|s| std::iter::repeat_n(s, per_state)).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let points = labels
        .iter()
        .map(|&s| FeatureVector::new(std::array::from_fn(|d| centers[s][d] + noise.sample(&mut rng))))
        .collect();
    (points, labels)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Every permutation of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Straightforward loop implementations of the ten features.
pub mod naive {
    use std::f64::consts::PI;

    pub struct Thresholds {
        pub zc: f64,
        pub ssc: f64,
        pub wamp: f64,
    }

    pub fn rms(x: &[f64]) -> f64 {
        let mut s = 0.0;
        for v in x {
            s += v * v;
        }
        (s / x.len() as f64).sqrt()
    }

    pub fn mav(x: &[f64]) -> f64 {
        let mut s = 0.0;
        for v in x {
            s += v.abs();
        }
        s / x.len() as f64
    }

    pub fn wl(x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 1..x.len() {
            s += (x[i] - x[i - 1]).abs();
        }
        s
    }

    pub fn zc(x: &[f64], thr: f64) -> usize {
        let mut c = 0;
        for i in 0..x.len() - 1 {
            let up = x[i] < -thr && x[i + 1] > thr;
            let down = x[i] > thr && x[i + 1] < -thr;
            if up || down {
                c += 1;
            }
        }
        c
    }

    pub fn ssc(x: &[f64], thr: f64) -> usize {
        let mut c = 0;
        for i in 1..x.len() - 1 {
            if (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > thr {
                c += 1;
            }
        }
        c
    }

    pub fn wamp(x: &[f64], thr: f64) -> usize {
        let mut c = 0;
        for i in 0..x.len() - 1 {
            if (x[i + 1] - x[i]).abs() > thr {
                c += 1;
            }
        }
        c
    }

    fn demean(x: &[f64]) -> Vec<f64> {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| v - m).collect()
    }

    /// First Yule-Walker coefficient by Gaussian elimination on the full
    /// Toeplitz system.
    pub fn arc(x: &[f64], order: usize) -> f64 {
        let x = demean(x);
        let n = x.len();
        let mut r = vec![0.0; order + 1];
        for (lag, rl) in r.iter_mut().enumerate() {
            for t in lag..n {
                *rl += x[t] * x[t - lag];
            }
            *rl /= n as f64;
        }
        let mut m: Vec<Vec<f64>> = (0..order)
            .map(|i| {
                let mut row: Vec<f64> = (0..order).map(|j| r[i.abs_diff(j)]).collect();
                row.push(r[i + 1]);
                row
            })
            .collect();
        for col in 0..order {
            let pivot = (col..order)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            let pivot_row = m[col].clone();
            for (row, r) in m.iter_mut().enumerate() {
                if row != col {
                    let f = r[col] / pivot_row[col];
                    for (x, p) in r.iter_mut().zip(&pivot_row).skip(col) {
                        *x -= f * p;
                    }
                }
            }
        }
        m[0][order] / m[0][0]
    }

    /// `(freqs, power)` over bins `1..=nfft/2` by direct DFT.
    pub fn spectrum(x: &[f64], fft_size: usize, fs: f64) -> (Vec<f64>, Vec<f64>) {
        let x = demean(x);
        let n = x.len();
        let mut nfft = 1;
        while nfft < n {
            nfft *= 2;
        }
        let nfft = nfft.max(fft_size);
        let mut freqs = Vec::new();
        let mut power = Vec::new();
        for k in 1..=nfft / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let w = (PI * t as f64 / (n - 1) as f64).sin().powi(2);
                let ang = -2.0 * PI * (k * t) as f64 / nfft as f64;
                re += w * v * ang.cos();
                im += w * v * ang.sin();
            }
            freqs.push(k as f64 * fs / nfft as f64);
            power.push(re * re + im * im);
        }
        (freqs, power)
    }

    /// `(MNF, MDF, PSR)`.
    pub fn spectral(x: &[f64], fft_size: usize, fs: f64, halfband: f64) -> (f64, f64, f64) {
        let (f, p) = spectrum(x, fft_size, fs);
        let total: f64 = p.iter().sum();
        let mut mnf = 0.0;
        for i in 0..f.len() {
            mnf += f[i] * p[i];
        }
        mnf /= total;
        let mut acc = 0.0;
        let mut mdf = 0.0;
        for i in 0..f.len() {
            acc += p[i];
            if acc >= total / 2.0 {
                mdf = f[i];
                break;
            }
        }
        let mut peak = 0;
        for i in 1..p.len() {
            if p[i] > p[peak] {
                peak = i;
            }
        }
        let mut band = 0.0;
        for i in 0..f.len() {
            if (f[i] - f[peak]).abs() <= halfband {
                band += p[i];
            }
        }
        (mnf, mdf, band / total)
    }
}
