// Filter a synthetic two-channel recording, cut it into 50 ms windows and
// print the ten features of the first few windows.
//
// ```text
// cargo run --example feature_extraction
// ```

use semg_tokens::features::{recording_features, FEATURE_NAMES};
use semg_tokens::preprocess::window_geometry;
use semg_tokens::synth::{generate_default, ActivationProfile};
use semg_tokens::{Normalizer, PipelineConfig};

const PROFILE: &str = r#"
seed = 42
noise_floor_mv = 0.02
duration_ms = 2000.0

[[channels]]
label = "flexor"
levels = [0.0, 0.8]
durations_ms = [1000.0, 1000.0]

[[channels]]
label = "extensor"
levels = [0.5]
durations_ms = [2000.0]
"#;

pub fn run_example() -> semg_tokens::Result<()> {
    let profile = ActivationProfile::from_toml(PROFILE)?;
    let rec = generate_default(&profile)?.recording;
    let cfg = PipelineConfig::default();
    let (window, stride) = window_geometry(&cfg, rec.sample_rate_hz())?;
    println!(
        "{} channels x {} samples at {} Hz; window {window}, stride {stride}",
        rec.num_channels(),
        rec.num_samples(),
        rec.sample_rate_hz()
    );

    let rows = recording_features(&rec, &cfg)?;
    print!("{:<10}{:>7}", "channel", "start");
    for name in FEATURE_NAMES {
        print!("{name:>9}");
    }
    println!();
    for (label, channel) in rec.channel_labels().iter().zip(&rows) {
        // One window from rest, one from the contraction.
        for row in [&channel[5], &channel[50]] {
            print!("{label:<10}{:>7}", row.start_sample);
            for v in row.features.values {
                print!("{v:>9.3}");
            }
            println!();
        }
    }

    // Codebooks store this normalizer so tokenization reuses the training scale.
    let all: Vec<_> = rows.iter().flatten().map(|r| r.features).collect();
    let nz = Normalizer::fit(&all)?;
    let z = nz.apply(&all[0]);
    println!("first window, z-scored RMS: {:.3}", z[0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> semg_tokens::Result<()> {
    run_example()
}
