// Score two candidate movements against a standard one by multichannel DTW
// over token activation values.
//
// ```text
// cargo run --example movement_quality
// ```

use semg_tokens::codebook::{train_codebook, tokenize_recording};
use semg_tokens::features::recording_features;
use semg_tokens::quality::{encode_action, similarity_score};
use semg_tokens::synth::{generate_default, ActivationProfile};
use semg_tokens::{Codebook, PipelineConfig, Recording};

/// A reach: rest, strong flexor burst with a weaker extensor brake, rest.
fn movement(seed: u64, tempo: f64, effort: f64) -> semg_tokens::Result<Recording> {
    let d = |ms: f64| ms * tempo;
    let profile = ActivationProfile::from_toml(&format!(
        r#"
seed = {seed}
noise_floor_mv = 0.02
duration_ms = {total}

[[channels]]
label = "flexor"
levels = [0.0, {f}, {h}, 0.0]
durations_ms = [{a}, {b}, {c}, {a}]

[[channels]]
label = "extensor"
levels = [0.0, {h}, {f}, 0.0]
durations_ms = [{a}, {c}, {b}, {a}]
"#,
        total = d(2600.0),
        f = effort,
        h = 0.4 * effort,
        a = d(500.0),
        b = d(900.0),
        c = d(700.0),
    ))?;
    Ok(generate_default(&profile)?.recording)
}

fn tokens(rec: &Recording, cb: &Codebook, cfg: &PipelineConfig) -> semg_tokens::Result<semg_tokens::quality::ActionTokenMatrix> {
    encode_action(&tokenize_recording(rec, cb, cfg)?)
}

pub fn run_example() -> semg_tokens::Result<()> {
    let cfg = PipelineConfig {
        k_clusters: 6,
        kmeans_restarts: 4,
        ..PipelineConfig::default()
    };
    let standard = movement(1, 1.0, 1.0)?;
    let training: Vec<_> = recording_features(&standard, &cfg)?
        .into_iter()
        .flatten()
        .map(|r| r.features)
        .collect();
    let cb = train_codebook(&training, &cfg)?;
    let reference = tokens(&standard, &cb, &cfg)?;

    for (name, rec) in [
        ("same movement, 25% slower", movement(2, 1.25, 1.0)?),
        ("half-hearted, 40% effort", movement(3, 1.0, 0.4)?),
    ] {
        let report = similarity_score(&reference, &tokens(&rec, &cb, &cfg)?)?;
        println!("{name:<28} {}", report.summary_line());
        for (label, diff) in report.channel_labels.iter().zip(&report.channel_mean_abs_difference) {
            println!("    {label:<10} mean |activation difference| {diff:.2}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> semg_tokens::Result<()> {
    run_example()
}
