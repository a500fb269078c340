// Train a five-token codebook on synthetic data and print each channel as a
// token string (A = strongest contraction).
//
// ```text
// cargo run --example tokenize_synthetic
// ```

use semg_tokens::codebook::{fit_codebook, tokenize_recording};
use semg_tokens::features::recording_features;
use semg_tokens::quality::dimension_reduction;
use semg_tokens::synth::{generate_default, ActivationProfile};
use semg_tokens::PipelineConfig;

const PROFILE: &str = r#"
seed = 7
noise_floor_mv = 0.02
duration_ms = 8000.0

[[channels]]
label = "biceps"
levels = [0.0, 0.125, 0.25, 0.5, 1.0]
durations_ms = [400.0, 400.0, 400.0, 400.0, 400.0]
cycle = true

[[channels]]
label = "triceps"
levels = [1.0, 0.0, 0.5]
durations_ms = [300.0, 600.0, 300.0]
cycle = true
"#;

pub fn run_example() -> semg_tokens::Result<()> {
    let rec = generate_default(&ActivationProfile::from_toml(PROFILE)?)?.recording;
    let cfg = PipelineConfig {
        k_clusters: 5,
        rng_seed: 1,
        ..PipelineConfig::default()
    };
    let training: Vec<_> = recording_features(&rec, &cfg)?
        .into_iter()
        .flatten()
        .map(|r| r.features)
        .collect();
    let outcome = fit_codebook(&training, &cfg)?;
    let cb = outcome.codebook.with_sample_rate(Some(rec.sample_rate_hz()));
    println!("K={} fingerprint={} sse={:.2}", cb.k(), &cb.fingerprint()[..12], cb.training_sse());

    let sequences = tokenize_recording(&rec, &cb, &cfg)?;
    for seq in &sequences {
        let letters = seq.letters();
        println!("{:<8} {}...", seq.channel_label, &letters[..80.min(letters.len())]);
    }

    let dr = dimension_reduction(sequences[0].len(), cfg.window_ms, cfg.stride_ms, rec.sample_rate_hz());
    println!(
        "{} tokens stand for {} samples per channel: {:.2}% smaller",
        dr.tokens,
        dr.raw_samples,
        100.0 * dr.reduction
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> semg_tokens::Result<()> {
    run_example()
}
