// Sweep the codebook size with cross-validation and print the SSE and PNMI
// curves. The reference labels are the synthetic activation levels.
//
// ```text
// cargo run --example model_selection
// ```

use semg_tokens::features::recording_features;
use semg_tokens::synth::{generate_default, segment_levels, ActivationProfile};
use semg_tokens::selection::sweep_k;
use semg_tokens::PipelineConfig;

const PROFILE: &str = r#"
seed = 3
noise_floor_mv = 0.02
duration_ms = 12000.0

[[channels]]
label = "deltoid"
levels = [0.0, 0.2, 1.0, 0.5]
durations_ms = [500.0, 400.0, 300.0, 400.0]
cycle = true
"#;

pub fn run_example() -> semg_tokens::Result<()> {
    let synth = generate_default(&ActivationProfile::from_toml(PROFILE)?)?;
    let fs = synth.recording.sample_rate_hz();
    let cfg = PipelineConfig {
        kmeans_restarts: 3,
        ..PipelineConfig::default()
    };
    let features: Vec<_> = recording_features(&synth.recording, &cfg)?
        .remove(0)
        .into_iter()
        .map(|r| r.features)
        .collect();
    // Reference label: index of the nearest profile level.
    let levels = [0.0, 0.2, 0.5, 1.0];
    let reference: Vec<usize> = segment_levels(&synth.levels, cfg.window_samples(fs), cfg.stride_samples(fs))[0]
        .iter()
        .map(|l| {
            (0..levels.len())
                .min_by(|&a, &b| (levels[a] - l).abs().total_cmp(&(levels[b] - l).abs()))
                .unwrap()
        })
        .collect();

    let folds = 4;
    let size = features.len().div_ceil(folds);
    let feature_folds: Vec<_> = features.chunks(size).map(<[_]>::to_vec).collect();
    let reference_folds: Vec<_> = reference.chunks(size).map(<[_]>::to_vec).collect();
    let report = sweep_k(&feature_folds, Some(&reference_folds), 2, 8, &cfg)?;

    println!("{:>3} {:>10} {:>8}", "K", "SSE", "PNMI");
    for s in &report.summary {
        println!("{:>3} {:>10.1} {:>8.3}", s.k, s.sse_mean, s.pnmi_mean.unwrap_or(f64::NAN));
    }
    println!("best PNMI at K={}", report.best_pnmi_k().unwrap());
    Ok(())
}

#[allow(dead_code)]
fn main() -> semg_tokens::Result<()> {
    run_example()
}
