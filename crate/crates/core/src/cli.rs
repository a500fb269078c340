//! Batch front end: `semg-tokens <command>`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal or output error. Failures print exactly one line to stderr:
//! `error kind=<Kind> message=<text>`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::codebook::{
    fit_codebook, load_codebook, parse_tokens_csv, save_codebook, tokenize_recording, tokens_csv,
    Codebook, TokenSequence,
};
use crate::config::PipelineConfig;
use crate::consistency::run_consistency_experiment;
use crate::error::{Error, Result};
use crate::features::{feature_rows_csv, recording_features, FeatureVector, FEATURE_NAMES};
use crate::quality::{
    dimension_reduction, encode_action, replication_pad, report_centroid_distances,
    sequence_statistics, similarity_score, square_matrix_csv, statistics_csv, transition_matrix,
};
use crate::selection::sweep_k;
use crate::signal::{load_recording, write_recording, Recording, RecordingFormat};
use crate::synth::{generate, segment_levels, ActivationProfile};

const CONFIG_HELP: &str = "Pipeline config: a JSON object with any of band_low_hz, band_high_hz, \
filter_order, window_ms, stride_ms, zc_threshold, ssc_threshold, wamp_threshold, ar_order, \
fft_size, psr_halfband_hz, k_clusters, kmeans_restarts, kmeans_max_iter, kmeans_rel_tol, \
rng_seed. Omitted keys take their defaults.";

const MANIFEST_HELP: &str = "Manifest: CSV with header. Required columns: path (relative to the \
manifest), sample_rate_hz. Optional: format (csv | raw_f32le, default from extension), channels \
(';'-separated labels, needed to split raw_f32le files), action, subject, channel_subset \
(';'-separated labels to keep).";

const RECORDING_HELP: &str = "Recordings: CSV with one column per channel and one row per sample \
(optional header row of channel labels), or raw_f32le: interleaved little-endian f32 samples.";

#[derive(Debug, Parser)]
#[command(name = "semg-tokens", version, about = "Discrete muscle-state tokens for surface EMG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a codebook on every recording of a manifest.
    #[command(after_help = format!("{MANIFEST_HELP}\n\n{CONFIG_HELP}\n\nOutput: codebook JSON with a content_hash."))]
    Train(TrainArgs),
    /// Assign a token to every window of every channel.
    #[command(after_help = format!("{RECORDING_HELP}\n\nOutput: CSV channel,segment_index,token_id,token_letter."))]
    Tokenize(TokenizeArgs),
    /// Cross-validated SSE / PNMI sweep over K.
    #[command(name = "select-k", after_help = format!("{MANIFEST_HELP}\n\n{CONFIG_HELP}\n\nReference labels: CSV with columns recording,channel,segment,label; recording is the manifest path (or its file name), label any string.\n\nOutput: CSV K,fold,sse,pnmi and a summary CSV K,sse_mean,sse_std,pnmi_mean,pnmi_std."))]
    SelectK(SelectKArgs),
    /// Compare a transferred codebook with independent clustering of the test set.
    #[command(after_help = format!("{MANIFEST_HELP}\n\n{CONFIG_HELP}\n\nOutput directory: confusion.csv, confusion_raw.csv (rows strategy B, columns strategy A), summary.txt, config.json."))]
    Consistency(ConsistencyArgs),
    /// DTW similarity between a standard and a candidate execution.
    #[command(after_help = format!("{RECORDING_HELP}\n\nPrints dtw_distance, path_length and similarity in percent; --out writes metric,value CSV."))]
    Score(ScoreArgs),
    /// Per-channel token statistics.
    #[command(after_help = format!("{RECORDING_HELP}\n\nOutput: CSV with one row per channel: ratios, transition frequency, mean/max run lengths, mean, variance, skewness, kurtosis."))]
    Stats(StatsArgs),
    /// Centroid table, centroid distances and (optionally) transition matrix.
    #[command(after_help = "Output directory: centroids.csv (denormalized features per token), centroid_distances.csv, transitions.csv (with --tokens: every *.csv token file in the directory), config.json.")]
    Report(ReportArgs),
    /// Generate a synthetic recording from an activation profile.
    #[command(after_help = format!("Profile: TOML with seed, noise_floor_mv, optional sample_rate_hz, duration_ms, gain_mv, carrier_low_hz, carrier_high_hz, and [[channels]] tables with label, levels (in [0,1]), durations_ms, optional cycle.\n\n{RECORDING_HELP}\n\nTruth: CSV recording,channel,segment,start_sample,level,label, where label indexes the profile's distinct levels (0 = lowest)."))]
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Pipeline config JSON.
    #[arg(long, env = "SEMG_TOKENS_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Recording format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<RecordingFormat>,
    /// Sample rate; defaults to the codebook's training rate.
    #[arg(long)]
    sample_rate_hz: Option<f64>,
    /// Channel labels (comma separated); fixes the channel count of raw_f32le input.
    #[arg(long, value_delimiter = ',')]
    channel_labels: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    /// Codebook JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TokenizeArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    input_args: InputArgs,
    /// Token CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the feature matrix (channel,start_sample,RMS..PSR).
    #[arg(long)]
    features_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectKArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 2)]
    kmin: usize,
    #[arg(long, default_value_t = 25)]
    kmax: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Reference labels enabling PNMI.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Per-fold CSV.
    #[arg(long)]
    out: PathBuf,
    /// Summary CSV; defaults to `<out stem>_summary.csv`.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[arg(long)]
    train_manifest: PathBuf,
    #[arg(long)]
    test_manifest: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    standard: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    /// Only score these channels (comma separated), e.g. the primary muscles.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<String>>,
    #[command(flatten)]
    input_args: InputArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    input_args: InputArgs,
    /// Replication-pad or truncate every channel to this many tokens first.
    #[arg(long)]
    pad_to: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    codebook: PathBuf,
    /// Directory of token CSV files for the transition matrix.
    #[arg(long)]
    tokens: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<RecordingFormat>,
    /// Overrides the profile's sample rate.
    #[arg(long)]
    sample_rate_hz: Option<f64>,
    /// Overrides the profile's duration.
    #[arg(long)]
    duration_ms: Option<f64>,
    /// Per-window ground truth CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Window geometry for --truth.
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn report_failure(kind: &str, message: &str) {
    let message = message.replace(['\n', '\r'], " ");
    eprintln!("error kind={kind} message={message}");
}

/// Runs the CLI with the process arguments and returns the exit code.
pub fn main() -> i32 {
    // Panics are reported as a single `kind=Internal` line instead.
    std::panic::set_hook(Box::new(|_| {}));
    run(std::env::args_os())
}

/// Runs the CLI with explicit arguments (the first is the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            report_failure("Usage", first.trim_start_matches("error: "));
            return 1;
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(Failure::Usage(m))) => {
            report_failure("Usage", &m);
            1
        }
        Ok(Err(Failure::Pipeline(e))) => {
            report_failure(e.kind(), &e.to_string());
            match e {
                Error::UnwritableFile { .. } | Error::OutputLocked(_) => 3,
                _ => 2,
            }
        }
        Err(_) => {
            report_failure("Internal", "unexpected panic");
            3
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Tokenize(a) => tokenize(a),
        Command::SelectK(a) => select_k(a),
        Command::Consistency(a) => consistency(a),
        Command::Score(a) => score(a),
        Command::Stats(a) => stats(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    }
}

/// Exclusive claim on an output path, released on drop.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(out: &Path) -> Result<Self> {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".lock");
        let lock = out.with_file_name(name);
        if let Some(parent) = lock.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| Error::UnwritableFile {
                path: parent.to_owned(),
                source,
            })?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(Self(lock)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::OutputLocked(out.to_owned()))
            }
            Err(source) => Err(Error::UnwritableFile { path: lock, source }),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::UnwritableFile {
            path: parent.to_owned(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::UnwritableFile {
        path: path.to_owned(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
        path: path.to_owned(),
        source,
    })
}

/// Reads a JSON pipeline config; defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let cfg = match path {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn config_json(cfg: &PipelineConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serializes");
    s.push('\n');
    s
}

/// One row of a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path as written in the manifest.
    pub name: String,
    /// Path resolved against the manifest's directory.
    pub path: PathBuf,
    pub format: RecordingFormat,
    pub sample_rate_hz: f64,
    pub channel_labels: Option<Vec<String>>,
    pub action: Option<String>,
    pub subject: Option<String>,
    pub channel_subset: Option<Vec<String>>,
}

impl ManifestEntry {
    /// Loads the recording, keeping only `channel_subset` when set.
    pub fn load(&self) -> Result<Recording> {
        let rec = load_recording(
            &self.path,
            self.format,
            self.sample_rate_hz,
            self.channel_labels.clone(),
        )?;
        match &self.channel_subset {
            Some(subset) => select_recording_channels(&rec, subset),
            None => Ok(rec),
        }
    }
}

fn split_labels(s: &str) -> Option<Vec<String>> {
    let labels: Vec<String> = s
        .split(';')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    (!labels.is_empty()).then_some(labels)
}

/// Parses manifest text; relative paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let bad = |m: String| Error::InvalidManifest(m);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let path_col = col("path").ok_or_else(|| bad("missing column path".into()))?;
    let rate_col = col("sample_rate_hz").ok_or_else(|| bad("missing column sample_rate_hz".into()))?;
    let optional = ["format", "channels", "action", "subject", "channel_subset"].map(col);

    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(format!("row {row}: {e}")))?;
        let field = |c: Option<usize>| {
            c.and_then(|c| record.get(c))
                .map(str::to_owned)
                .filter(|s| !s.is_empty())
        };
        let name = field(Some(path_col)).ok_or_else(|| bad(format!("row {row}: empty path")))?;
        if entries.iter().any(|e| e.name == name) {
            return Err(bad(format!("duplicate path {name:?}")));
        }
        let path = base_dir.join(&name);
        let sample_rate_hz: f64 = field(Some(rate_col))
            .and_then(|s| s.parse().ok())
            .filter(|r: &f64| *r > 0.0 && r.is_finite())
            .ok_or_else(|| bad(format!("row {row}: invalid sample_rate_hz")))?;
        let format = match field(optional[0]) {
            Some(f) => f.parse()?,
            None => RecordingFormat::from_extension(&path)
                .ok_or_else(|| bad(format!("row {row}: cannot infer format of {name:?}")))?,
        };
        entries.push(ManifestEntry {
            name,
            path,
            format,
            sample_rate_hz,
            channel_labels: field(optional[1]).and_then(|s| split_labels(&s)),
            action: field(optional[2]),
            subject: field(optional[3]),
            channel_subset: field(optional[4]).and_then(|s| split_labels(&s)),
        });
    }
    if entries.is_empty() {
        return Err(bad("manifest lists no recordings".into()));
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&read_text(path)?, base)
}

/// A recording restricted to the named channels, in the order given.
pub fn select_recording_channels(rec: &Recording, labels: &[String]) -> Result<Recording> {
    let channels = labels
        .iter()
        .map(|l| {
            rec.channel_index(l)
                .map(|i| rec.channels()[i].clone())
                .ok_or_else(|| Error::ChannelMismatch(format!("no channel named {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Recording::new(channels, rec.sample_rate_hz(), labels.to_vec())
}

/// Feature vector of one window, keyed by where it came from.
#[derive(Debug, Clone)]
struct PooledFeature {
    recording: usize,
    channel: String,
    segment: usize,
    features: FeatureVector,
}

/// Features of every window of every channel, ordered by manifest row,
/// then channel, then window.
fn pooled_features(entries: &[ManifestEntry], cfg: &PipelineConfig) -> Result<Vec<PooledFeature>> {
    let per_entry = entries
        .par_iter()
        .enumerate()
        .map(|(r, entry)| {
            let rec = entry.load()?;
            let rows = recording_features(&rec, cfg)?;
            Ok(rows
                .into_iter()
                .enumerate()
                .flat_map(|(c, channel_rows)| {
                    let label = rec.channel_labels()[c].clone();
                    channel_rows
                        .into_iter()
                        .enumerate()
                        .map(move |(segment, row)| PooledFeature {
                            recording: r,
                            channel: label.clone(),
                            segment,
                            features: row.features,
                        })
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

fn common_sample_rate(entries: &[ManifestEntry]) -> Option<f64> {
    let first = entries.first()?.sample_rate_hz;
    entries
        .iter()
        .all(|e| e.sample_rate_hz == first)
        .then_some(first)
}

fn train(a: TrainArgs) -> CliResult<()> {
    let cfg = load_config(a.config.config.as_deref())?;
    let entries = load_manifest(&a.manifest)?;
    let pooled = pooled_features(&entries, &cfg)?;
    let features: Vec<FeatureVector> = pooled.iter().map(|p| p.features).collect();
    let outcome = fit_codebook(&features, &cfg)?;
    let cb = outcome.codebook.with_sample_rate(common_sample_rate(&entries));
    let _lock = OutputLock::acquire(&a.out)?;
    save_codebook(&cb, &a.out)?;
    let p = cb.provenance();
    println!(
        "K={} sse={} iterations={} best_seed={} vectors={} fingerprint={}",
        cb.k(),
        p.training_sse,
        p.iterations_used,
        p.best_seed,
        p.training_vectors,
        cb.fingerprint()
    );
    Ok(())
}

fn load_input(path: &Path, args: &InputArgs, cb: &Codebook) -> CliResult<Recording> {
    let format = match args.format {
        Some(f) => f,
        None => RecordingFormat::from_extension(path).ok_or_else(|| {
            Failure::Usage(format!("cannot infer the format of {}; pass --format", path.display()))
        })?,
    };
    let fs = args
        .sample_rate_hz
        .or(cb.provenance().sample_rate_hz)
        .ok_or_else(|| Failure::Usage("the codebook records no sample rate; pass --sample-rate-hz".into()))?;
    Ok(load_recording(path, format, fs, args.channel_labels.clone())?)
}

fn tokenize(a: TokenizeArgs) -> CliResult<()> {
    let cb = load_codebook(&a.codebook)?;
    let rec = load_input(&a.input, &a.input_args, &cb)?;
    let cfg = cb.config().clone();
    let sequences = tokenize_recording(&rec, &cb, &cfg)?;
    let _lock = OutputLock::acquire(&a.out)?;
    write_file(&a.out, tokens_csv(&sequences))?;
    if let Some(path) = &a.features_out {
        let rows: Vec<_> = recording_features(&rec, &cfg)?.into_iter().flatten().collect();
        write_file(path, feature_rows_csv(&rows))?;
    }
    let tokens = sequences.first().map_or(0, TokenSequence::len);
    let dr = dimension_reduction(tokens, cfg.window_ms, cfg.stride_ms, rec.sample_rate_hz());
    println!(
        "channels={} tokens_per_channel={} span_samples={} recording_samples={} dimension_reduction={:.4}",
        sequences.len(),
        tokens,
        dr.raw_samples,
        rec.num_samples(),
        dr.reduction
    );
    Ok(())
}

/// `(recording, channel, segment) -> label id`, ids in order of first
/// appearance of each label string.
fn load_reference(
    path: &Path,
    entries: &[ManifestEntry],
) -> Result<BTreeMap<(usize, String, usize), usize>> {
    let text = read_text(path)?;
    let bad = |m: String| Error::InvalidManifest(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (rc, cc, sc, lc) = (col("recording")?, col("channel")?, col("segment")?, col("label")?);
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut order = 0;
    let mut out = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(format!("row {row}: {e}")))?;
        let name = &record[rc];
        let recording = entries
            .iter()
            .position(|e| {
                e.name == name || e.path.file_name().is_some_and(|f| f == std::ffi::OsStr::new(name))
            })
            .ok_or_else(|| bad(format!("row {row}: recording {name:?} is not in the manifest")))?;
        let segment: usize = record[sc]
            .parse()
            .map_err(|_| bad(format!("row {row}: bad segment index")))?;
        let label = record[lc].to_owned();
        let id = *ids.entry(label).or_insert_with(|| {
            order += 1;
            order - 1
        });
        out.insert((recording, record[cc].to_owned(), segment), id);
    }
    Ok(out)
}

fn select_k(a: SelectKArgs) -> CliResult<()> {
    if a.kmin < 2 || a.kmin > a.kmax || a.kmax > crate::config::MAX_TOKENS {
        return Err(Failure::Usage(format!(
            "need 2 <= kmin <= kmax <= {}, got kmin={} kmax={}",
            crate::config::MAX_TOKENS,
            a.kmin,
            a.kmax
        )));
    }
    if a.folds < 2 {
        return Err(Failure::Usage(format!("need at least 2 folds, got {}", a.folds)));
    }
    let cfg = load_config(a.config.config.as_deref())?;
    let entries = load_manifest(&a.manifest)?;
    let pooled = pooled_features(&entries, &cfg)?;
    let n = pooled.len();
    if n < a.folds {
        return Err(Error::InsufficientData {
            required: a.folds,
            got: n,
        }
        .into());
    }
    // Contiguous folds keep overlapping neighbor windows together.
    let bounds: Vec<usize> = (0..=a.folds).map(|f| f * n / a.folds).collect();
    let folds: Vec<Vec<FeatureVector>> = bounds
        .windows(2)
        .map(|w| pooled[w[0]..w[1]].iter().map(|p| p.features).collect())
        .collect();
    let references = match &a.reference {
        Some(path) => {
            let table = load_reference(path, &entries)?;
            let labels = bounds
                .windows(2)
                .map(|w| {
                    pooled[w[0]..w[1]]
                        .iter()
                        .map(|p| {
                            table
                                .get(&(p.recording, p.channel.clone(), p.segment))
                                .copied()
                                .ok_or_else(|| {
                                    Error::InvalidManifest(format!(
                                        "no reference label for {} channel {} segment {}",
                                        entries[p.recording].name, p.channel, p.segment
                                    ))
                                })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Some(labels)
        }
        None => None,
    };
    let report = sweep_k(&folds, references.as_deref(), a.kmin, a.kmax, &cfg)?;
    let summary_path = a.summary_out.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().unwrap_or_default().to_string_lossy();
        a.out.with_file_name(format!("{stem}_summary.csv"))
    });
    let _lock = OutputLock::acquire(&a.out)?;
    write_file(&a.out, report.to_csv())?;
    write_file(&summary_path, report.summary_csv())?;
    for s in &report.summary {
        match s.pnmi_mean {
            Some(p) => println!("K={} sse_mean={} pnmi_mean={}", s.k, s.sse_mean, p),
            None => println!("K={} sse_mean={}", s.k, s.sse_mean),
        }
    }
    if let Some(k) = report.best_pnmi_k() {
        println!("best_pnmi_k={k}");
    }
    Ok(())
}

fn consistency(a: ConsistencyArgs) -> CliResult<()> {
    let cfg = load_config(a.config.config.as_deref())?;
    let train = load_manifest(&a.train_manifest)?;
    let test = load_manifest(&a.test_manifest)?;
    let features = |entries: &[ManifestEntry]| -> Result<Vec<FeatureVector>> {
        Ok(pooled_features(entries, &cfg)?.into_iter().map(|p| p.features).collect())
    };
    let report = run_consistency_experiment(&features(&train)?, &features(&test)?, &cfg)?;
    let _lock = OutputLock::acquire(&a.out)?;
    write_file(&a.out.join("confusion.csv"), report.confusion_csv())?;
    write_file(&a.out.join("confusion_raw.csv"), report.raw_confusion_csv())?;
    write_file(
        &a.out.join("summary.txt"),
        format!("k={} {}\n", report.k, report.summary_line()),
    )?;
    write_file(&a.out.join("config.json"), config_json(&cfg))?;
    println!("{}", report.summary_line());
    Ok(())
}

fn score(a: ScoreArgs) -> CliResult<()> {
    let cb = load_codebook(&a.codebook)?;
    let action = |path: &Path| -> CliResult<_> {
        let rec = load_input(path, &a.input_args, &cb)?;
        let m = encode_action(&tokenize_recording(&rec, &cb, cb.config())?)?;
        Ok(match &a.channels {
            Some(subset) => m.select_channels(subset)?,
            None => m,
        })
    };
    let report = similarity_score(&action(&a.standard)?, &action(&a.candidate)?)?;
    if let Some(out) = &a.out {
        let _lock = OutputLock::acquire(out)?;
        write_file(out, report.to_csv())?;
    }
    println!("{}", report.summary_line());
    Ok(())
}

fn stats(a: StatsArgs) -> CliResult<()> {
    let cb = load_codebook(&a.codebook)?;
    let rec = load_input(&a.input, &a.input_args, &cb)?;
    let mut sequences = tokenize_recording(&rec, &cb, cb.config())?;
    if let Some(target) = a.pad_to {
        sequences = sequences
            .iter()
            .map(|s| replication_pad(s, target))
            .collect::<Result<_>>()?;
    }
    let rows = sequences
        .iter()
        .map(|s| Ok((s.channel_label.clone(), sequence_statistics(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let _lock = OutputLock::acquire(&a.out)?;
    write_file(&a.out, statistics_csv(&rows))?;
    println!("channels={} tokens_per_channel={}", rows.len(), rows[0].1.length);
    Ok(())
}

fn centroid_table(cb: &Codebook) -> String {
    let mut out = format!("token_id,token_letter,{}\n", FEATURE_NAMES.join(","));
    for (id, c) in cb.denormalized_centroids().iter().enumerate() {
        let values: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!(
            "{id},{},{}\n",
            crate::codebook::token_letter(id),
            values.join(",")
        ));
    }
    out
}

fn report(a: ReportArgs) -> CliResult<()> {
    let cb = load_codebook(&a.codebook)?;
    let transitions = match &a.tokens {
        Some(dir) => {
            let mut files: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|source| Error::UnreadableFile {
                    path: dir.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            let mut sequences = Vec::new();
            for f in &files {
                sequences.extend(parse_tokens_csv(&read_text(f)?, cb.k())?);
            }
            Some(transition_matrix(&sequences, cb.k())?)
        }
        None => None,
    };
    let _lock = OutputLock::acquire(&a.out)?;
    write_file(&a.out.join("centroids.csv"), centroid_table(&cb))?;
    write_file(
        &a.out.join("centroid_distances.csv"),
        square_matrix_csv(&report_centroid_distances(&cb)),
    )?;
    if let Some(t) = &transitions {
        write_file(&a.out.join("transitions.csv"), t.to_csv())?;
    }
    write_file(&a.out.join("config.json"), config_json(cb.config()))?;
    println!("K={} fingerprint={} letters={}", cb.k(), cb.fingerprint(), cb.letters());
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let profile = ActivationProfile::load(&a.profile)?;
    let fs = a.sample_rate_hz.unwrap_or(profile.sample_rate_hz);
    let duration = a.duration_ms.unwrap_or_else(|| profile.effective_duration_ms());
    let format = match a.format {
        Some(f) => f,
        None => RecordingFormat::from_extension(&a.out).ok_or_else(|| {
            Failure::Usage(format!("cannot infer the format of {}; pass --format", a.out.display()))
        })?,
    };
    let generated = generate(&profile, fs, duration)?;
    let truth = match &a.truth {
        Some(_) => {
            let cfg = load_config(a.config.config.as_deref())?;
            let window = cfg.window_samples(fs);
            let stride = cfg.stride_samples(fs);
            let mut distinct: Vec<f64> = profile
                .channels
                .iter()
                .flat_map(|c| c.levels.iter().copied())
                .collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let name = a.out.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let mut csv = String::from("recording,channel,segment,start_sample,level,label\n");
            let labels = generated.recording.channel_labels();
            for (label, levels) in labels
                .iter()
                .zip(segment_levels(&generated.levels, window, stride))
            {
                for (i, level) in levels.iter().enumerate() {
                    let state = distinct
                        .iter()
                        .enumerate()
                        .min_by(|x, y| (x.1 - level).abs().total_cmp(&(y.1 - level).abs()))
                        .map_or(0, |(s, _)| s);
                    csv.push_str(&format!("{name},{label},{i},{},{level},{state}\n", i * stride));
                }
            }
            Some(csv)
        }
        None => None,
    };
    let _lock = OutputLock::acquire(&a.out)?;
    write_recording(&generated.recording, &a.out, format)?;
    if let (Some(path), Some(csv)) = (&a.truth, truth) {
        write_file(path, csv)?;
    }
    println!(
        "channels={} samples={} sample_rate_hz={}",
        generated.recording.num_channels(),
        generated.recording.num_samples(),
        fs
    );
    Ok(())
}
