// Turn token sequences into fixed-length statistics for a downstream
// classifier, and inspect the codebook itself.
//
// ```text
// cargo run --example token_statistics
// ```

use semg_tokens::codebook::{train_codebook, tokenize_recording};
use semg_tokens::features::recording_features;
use semg_tokens::quality::{
    replication_pad, report_centroid_distances, sequence_statistics, square_matrix_csv,
    statistics_csv, transition_matrix, TokenStatistics,
};
use semg_tokens::synth::{generate_default, ActivationProfile};
use semg_tokens::PipelineConfig;

const PROFILE: &str = r#"
seed = 5
noise_floor_mv = 0.02
duration_ms = 6000.0

[[channels]]
label = "wrist_flexor"
levels = [0.0, 0.3, 1.0, 0.3]
durations_ms = [500.0, 250.0, 500.0, 250.0]
cycle = true

[[channels]]
label = "wrist_extensor"
levels = [0.2, 0.0]
durations_ms = [700.0, 800.0]
cycle = true
"#;

pub fn run_example() -> semg_tokens::Result<()> {
    let rec = generate_default(&ActivationProfile::from_toml(PROFILE)?)?.recording;
    let cfg = PipelineConfig {
        k_clusters: 4,
        kmeans_restarts: 4,
        ..PipelineConfig::default()
    };
    let training: Vec<_> = recording_features(&rec, &cfg)?
        .into_iter()
        .flatten()
        .map(|r| r.features)
        .collect();
    let cb = train_codebook(&training, &cfg)?;
    let sequences = tokenize_recording(&rec, &cb, &cfg)?;

    // Pad every channel to a common length before computing statistics.
    let target = 256;
    let mut rows = Vec::new();
    for seq in &sequences {
        let padded = replication_pad(seq, target)?;
        rows.push((seq.channel_label.clone(), sequence_statistics(&padded)?));
    }
    println!("{} statistics per channel:", TokenStatistics::feature_names(cb.k()).len());
    print!("{}", statistics_csv(&rows));

    let transitions = transition_matrix(&sequences, cb.k())?;
    println!("\ntoken transition probabilities (row: from, column: to)");
    print!("{}", transitions.to_csv());

    println!("\ncentroid distances in feature space");
    print!("{}", square_matrix_csv(&report_centroid_distances(&cb)));
    Ok(())
}

#[allow(dead_code)]
fn main() -> semg_tokens::Result<()> {
    run_example()
}
