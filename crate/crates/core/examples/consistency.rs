// Train codebooks on two independent synthetic "subjects" and measure how
// often they agree after Hungarian label alignment.
//
// ```text
// cargo run --example consistency
// ```

use semg_tokens::consistency::run_consistency_experiment;
use semg_tokens::features::recording_features;
use semg_tokens::synth::{generate_default, ActivationProfile};
use semg_tokens::{FeatureVector, PipelineConfig};

fn subject(seed: u64, cfg: &PipelineConfig) -> semg_tokens::Result<Vec<FeatureVector>> {
    let profile = ActivationProfile::from_toml(&format!(
        r#"
seed = {seed}
noise_floor_mv = 0.02
duration_ms = 10000.0

[[channels]]
label = "flexor"
levels = [0.0, 0.15, 1.0]
durations_ms = [600.0, 500.0, 400.0]
cycle = true
"#
    ))?;
    let rec = generate_default(&profile)?.recording;
    Ok(recording_features(&rec, cfg)?
        .into_iter()
        .flatten()
        .map(|r| r.features)
        .collect())
}

pub fn run_example() -> semg_tokens::Result<()> {
    let cfg = PipelineConfig {
        k_clusters: 3,
        kmeans_restarts: 4,
        ..PipelineConfig::default()
    };
    let report = run_consistency_experiment(&subject(1, &cfg)?, &subject(2, &cfg)?, &cfg)?;
    println!("{}", report.summary_line());
    println!("aligned confusion (rows: subject B, columns: subject A)");
    print!("{}", report.confusion_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> semg_tokens::Result<()> {
    run_example()
}
