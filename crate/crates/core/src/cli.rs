//! Command-line front end.
//!
//! Every subcommand writes its outputs plus a [`RunManifest`] into the
//! directory given by `--out`; `rerun` replays a manifest. Exit codes: 0
//! success, 1 usage, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::connectivity::multiview_degree_stats;
use crate::error::{Error, Result};
use crate::features::{
    context_concat, frame_energies, label_ground_truth, load_video_features, load_wav,
    measured_snr_db, mfcc_features, mix_interference, read_labels, synth_multiview, write_labels,
    FrameSpec, MfccConfig, SynthConfig, WavOptions,
};
use crate::kernel::FeatureMatrix;
use crate::manifest::{write_json, RunManifest};
use crate::matrix::{read_numeric_csv, write_csv_rows};
use crate::spectral::EigenMethod;
use crate::vad::{
    detect, linear_grid, roc, sweep_c, BandwidthMode, DetectorConfig, FusionMode, RocCurve, View,
};

/// Environment variable capping internal parallelism.
pub const THREADS_ENV: &str = "KERNELFUSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kernelfuse", version, about = "Multi-view kernel fusion for voice activity detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-view recording.
    Synth(SynthArgs),
    /// Extract audio and video features from a recording.
    Features(FeaturesArgs),
    /// Run the detector and evaluate it against labels.
    Vad(VadArgs),
    /// AUC as a function of the audio bandwidth multiplier.
    Sweep(SweepArgs),
    /// Monte Carlo check of the random-graph connectivity model.
    Simulate(SimulateArgs),
    /// Replay the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON generator configuration; defaults are used for missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_frames: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FeaturesArgs {
    /// Clean 16-bit PCM mono recording; ground truth comes from it.
    #[arg(long)]
    pub wav: PathBuf,
    /// Per-frame motion vectors, one row per audio frame.
    #[arg(long)]
    pub motion: PathBuf,
    /// Background noise, tiled to the recording length.
    #[arg(long, requires = "snr")]
    pub noise: Option<PathBuf>,
    /// Transient interference, scaled to the clean peak amplitude.
    #[arg(long)]
    pub transients: Option<PathBuf>,
    /// Noise level in dB relative to the clean signal.
    #[arg(long, allow_negative_numbers = true)]
    pub snr: Option<f64>,
    /// Resample inputs whose rate differs from 8 kHz.
    #[arg(long)]
    pub resample: bool,
    #[arg(long, default_value_t = 634)]
    pub frame_len: usize,
    #[arg(long, default_value_t = 317)]
    pub hop: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Audio feature CSV.
    #[arg(long)]
    pub v: PathBuf,
    /// Video feature CSV.
    #[arg(long)]
    pub w: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Per-frame energy CSV used to orient the score.
    #[arg(long)]
    pub energy: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "alternating")]
    pub fusion: FusionMode,
    #[arg(long, default_value_t = 2.0)]
    pub c_single: f64,
    #[arg(long, default_value_t = 40)]
    pub grid_size: usize,
    #[arg(long, value_enum, default_value = "direct")]
    pub eigen: EigenMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VadArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_enum, default_value = "algorithm1")]
    pub bandwidth: BandwidthMode,
    /// Views the bandwidth search applies to.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "audio")]
    pub algorithm1_views: Vec<View>,
    /// Fixed audio multiplier, overriding --bandwidth for the audio view.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, default_value_t = 0.1)]
    pub c_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long)]
    pub s_v: f64,
    #[arg(long, default_value_t = 0.0)]
    pub s_w: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write simulate.json and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Output directory replacing the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Vad(_) => "vad",
            Command::Sweep(_) => "sweep",
            Command::Simulate(_) => "simulate",
            Command::Rerun(_) => "rerun",
        }
    }

    fn set_out(&mut self, dir: PathBuf) {
        match self {
            Command::Synth(a) => a.out = dir,
            Command::Features(a) => a.out = dir,
            Command::Vad(a) => a.detector.out = dir,
            Command::Sweep(a) => a.detector.out = dir,
            Command::Simulate(a) => a.out = Some(dir),
            Command::Rerun(a) => a.out = Some(dir),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|()| run(cli.command, &argv)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    faer::set_global_parallelism(if n == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    });
    Ok(())
}

pub fn run(command: Command, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let mut manifest = RunManifest::new(command.name(), argv);
    let out = match command {
        Command::Synth(a) => cmd_synth(&a, &mut manifest)?,
        Command::Features(a) => cmd_features(&a, &mut manifest)?,
        Command::Vad(a) => cmd_vad(&a, &mut manifest)?,
        Command::Sweep(a) => cmd_sweep(&a, &mut manifest)?,
        Command::Simulate(a) => cmd_simulate(&a, &mut manifest)?,
        Command::Rerun(a) => return cmd_rerun(&a),
    };
    if let Some(dir) = out {
        manifest.duration_secs = start.elapsed().as_secs_f64();
        manifest.write(&dir)?;
    }
    Ok(())
}

fn cmd_rerun(args: &RerunArgs) -> Result<()> {
    let recorded = RunManifest::read(&args.manifest)?;
    let cli = Cli::try_parse_from(&recorded.argv)
        .map_err(|e| Error::format(&args.manifest, format!("recorded arguments do not parse: {e}")))?;
    let mut command = cli.command;
    if matches!(command, Command::Rerun(_)) {
        return Err(Error::format(&args.manifest, "a manifest cannot replay rerun"));
    }
    let mut argv = recorded.argv.clone();
    if let Some(dir) = &args.out {
        command.set_out(dir.clone());
        replace_out_flag(&mut argv, dir);
    }
    run(command, &argv)
}

fn replace_out_flag(argv: &mut Vec<String>, dir: &Path) {
    let dir = dir.to_string_lossy().into_owned();
    if let Some(i) = argv.iter().position(|a| a == "--out") {
        if i + 1 < argv.len() {
            argv[i + 1] = dir;
            return;
        }
    }
    if let Some(i) = argv.iter().position(|a| a.starts_with("--out=")) {
        argv[i] = format!("--out={dir}");
        return;
    }
    argv.push("--out".into());
    argv.push(dir);
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data serializes")
}

fn write_column(path: &Path, name: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    let rows: Vec<[f64; 1]> = values.map(|v| [v]).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_rows(path, BufWriter::new(file), &[name.to_string()], rows.iter().map(|r| &r[..]))
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    read_numeric_csv(path)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::format(path, format!("row {} must have one value", i + 1))),
        })
        .collect()
}

fn cmd_synth(args: &SynthArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            manifest.inputs.push(path.clone());
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_frames {
        cfg.n_frames = n;
    }
    let data = synth_multiview(&cfg)?;
    create_dir(&args.out)?;
    let paths = ["v.csv", "w.csv", "labels.csv", "energy.csv"].map(|f| args.out.join(f));
    data.v.write_csv(&paths[0])?;
    data.w.write_csv(&paths[1])?;
    write_labels(&paths[2], &data.labels)?;
    write_column(&paths[3], "energy", data.energy.iter().copied())?;
    manifest.config = to_json(&cfg);
    manifest.seed = Some(cfg.seed);
    manifest.outputs.extend(paths);
    Ok(Some(args.out.clone()))
}

fn cmd_features(args: &FeaturesArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>> {
    let spec = FrameSpec {
        frame_len: args.frame_len,
        hop: args.hop,
    };
    spec.validate()?;
    let opts = WavOptions {
        resample: args.resample,
        ..WavOptions::default()
    };
    let clean = load_wav(&args.wav, opts)?;
    let noise = args.noise.as_ref().map(|p| load_wav(p, opts)).transpose()?;
    let transients = args.transients.as_ref().map(|p| load_wav(p, opts)).transpose()?;

    let labels = label_ground_truth(&clean, &spec)?;
    let (mixed, snr) = if noise.is_some() || transients.is_some() {
        let out = mix_interference(&clean, noise.as_ref(), transients.as_ref(), args.snr.unwrap_or(0.0))?;
        let snr = measured_snr_db(&clean, &out.mixed);
        (out.mixed, Some((out.gains, snr)))
    } else {
        (clean, None)
    };
    let mfcc_cfg = MfccConfig::default();
    let v = context_concat(&mfcc_features(&mixed, &spec, &mfcc_cfg)?)?;
    let w = load_video_features(&args.motion, Some(v.n_frames()))?;
    let energy = frame_energies(&mixed, &spec)?;

    create_dir(&args.out)?;
    let paths = ["v.csv", "w.csv", "labels.csv", "energy.csv"].map(|f| args.out.join(f));
    v.write_csv(&paths[0])?;
    w.write_csv(&paths[1])?;
    write_labels(&paths[2], &labels)?;
    write_column(&paths[3], "energy", energy.into_iter())?;

    manifest.config = json!({
        "frame": spec,
        "mfcc": mfcc_cfg,
        "snr_db": args.snr,
        "resample": args.resample,
        "mix": snr.map(|(gains, measured)| json!({"gains": gains, "measured_snr_db": measured})),
    });
    manifest.inputs.push(args.wav.clone());
    manifest.inputs.push(args.motion.clone());
    manifest.inputs.extend(args.noise.iter().cloned());
    manifest.inputs.extend(args.transients.iter().cloned());
    manifest.outputs.extend(paths);
    Ok(Some(args.out.clone()))
}

struct DetectorInputs {
    v: FeatureMatrix,
    w: FeatureMatrix,
    labels: Vec<u8>,
    energy: Option<Vec<f64>>,
}

fn load_detector_inputs(args: &DetectorArgs, manifest: &mut RunManifest) -> Result<DetectorInputs> {
    let v = FeatureMatrix::read_csv(&args.v)?;
    let w = FeatureMatrix::read_csv(&args.w)?;
    let labels = read_labels(&args.labels)?;
    if labels.len() != v.n_frames() {
        return Err(Error::format(
            &args.labels,
            format!("{} labels for {} frames", labels.len(), v.n_frames()),
        ));
    }
    let energy = args.energy.as_deref().map(read_column).transpose()?;
    manifest.inputs.extend([args.v.clone(), args.w.clone(), args.labels.clone()]);
    manifest.inputs.extend(args.energy.iter().cloned());
    Ok(DetectorInputs { v, w, labels, energy })
}

fn write_roc(path: &Path, curve: &RocCurve) -> Result<()> {
    let rows: Vec<[f64; 3]> = curve
        .thresholds
        .iter()
        .zip(&curve.points)
        .map(|(&t, &(pfa, pd))| [t, pfa, pd])
        .collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let header = ["tau", "pfa", "pd"].map(String::from);
    write_csv_rows(path, BufWriter::new(file), &header, rows.iter().map(|r| &r[..]))
}

fn cmd_vad(args: &VadArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>> {
    let d = &args.detector;
    let cfg = DetectorConfig {
        fusion: d.fusion,
        bandwidth_mode: args.bandwidth,
        algorithm1_views: args.algorithm1_views.clone(),
        eigen_method: d.eigen,
        c_single: d.c_single,
        grid_size: d.grid_size,
        audio_c: args.c,
    };
    let inputs = load_detector_inputs(d, manifest)?;
    let det = detect(&inputs.v, &inputs.w, inputs.energy.as_deref(), &cfg)?;
    let curve = roc(&det.score.nu1, &inputs.labels)?;

    create_dir(&d.out)?;
    let scores = d.out.join("scores.csv");
    let rows: Vec<[f64; 3]> = det
        .score
        .nu1
        .iter()
        .zip(&inputs.labels)
        .enumerate()
        .map(|(i, (&s, &l))| [i as f64, s, l as f64])
        .collect();
    let file = File::create(&scores).map_err(|e| Error::io(&scores, e))?;
    let header = ["frame", "nu1", "label"].map(String::from);
    write_csv_rows(&scores, BufWriter::new(file), &header, rows.iter().map(|r| &r[..]))?;
    let roc_path = d.out.join("roc.csv");
    write_roc(&roc_path, &curve)?;
    let summary_path = d.out.join("summary.json");
    let summary = json!({
        "auc": curve.auc,
        "fusion": cfg.fusion,
        "bandwidth": cfg.bandwidth_mode,
        "c_ad": det.audio.as_ref().map(|b| b.c),
        "epsilon_ad": det.audio.as_ref().map(|b| b.epsilon),
        "c_video": det.video.as_ref().map(|b| b.c),
        "epsilon_video": det.video.as_ref().map(|b| b.epsilon),
        "n_frames": inputs.v.n_frames(),
        "eigenvalue": det.spectral.eigenvalue,
        "eigen_method": det.spectral.method,
        "eigen_fell_back": det.spectral.fell_back(),
        "residual": det.spectral.residual,
        "orientation": det.score.orientation_source,
        "audio": det.audio,
        "video": det.video,
    });
    write_json(&summary_path, &summary)?;
    println!("auc {:.6} ({})", curve.auc, cfg.fusion.name());

    manifest.config = to_json(&cfg);
    manifest.outputs.extend([scores, roc_path, summary_path]);
    Ok(Some(d.out.clone()))
}

fn cmd_sweep(args: &SweepArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>> {
    let d = &args.detector;
    let grid = linear_grid(args.c_min, args.c_max, args.steps)?;
    let cfg = DetectorConfig {
        fusion: d.fusion,
        bandwidth_mode: BandwidthMode::SingleViewRule,
        algorithm1_views: vec![View::Audio],
        eigen_method: d.eigen,
        c_single: d.c_single,
        grid_size: d.grid_size,
        audio_c: None,
    };
    let inputs = load_detector_inputs(d, manifest)?;
    let energy = inputs.energy.as_deref();
    let points = sweep_c(&inputs.v, &inputs.w, &inputs.labels, energy, &grid, &cfg)?;
    let best = points
        .iter()
        .copied()
        .fold(points[0], |b, p| if p.auc > b.auc { p } else { b });

    // the point chosen by the bandwidth search, for comparison with the curve
    let ad_cfg = DetectorConfig {
        bandwidth_mode: BandwidthMode::Algorithm1,
        ..cfg.clone()
    };
    let ad = detect(&inputs.v, &inputs.w, energy, &ad_cfg)?;
    let ad_auc = roc(&ad.score.nu1, &inputs.labels)?.auc;

    create_dir(&d.out)?;
    let sweep_path = d.out.join("sweep.csv");
    let rows: Vec<[f64; 2]> = points.iter().map(|p| [p.c, p.auc]).collect();
    let file = File::create(&sweep_path).map_err(|e| Error::io(&sweep_path, e))?;
    let header = ["c", "auc"].map(String::from);
    write_csv_rows(&sweep_path, BufWriter::new(file), &header, rows.iter().map(|r| &r[..]))?;
    let summary_path = d.out.join("summary.json");
    write_json(
        &summary_path,
        &json!({
            "fusion": cfg.fusion,
            "c_single": cfg.c_single,
            "argmax_c": best.c,
            "max_auc": best.auc,
            "algorithm1": {
                "c_ad": ad.audio.as_ref().map(|b| b.c),
                "epsilon_ad": ad.audio.as_ref().map(|b| b.epsilon),
                "auc": ad_auc,
            },
            "points": points,
        }),
    )?;
    println!("argmax c {} (auc {:.6})", best.c, best.auc);

    manifest.config = json!({"detector": cfg, "grid": grid});
    manifest.outputs.extend([sweep_path, summary_path]);
    Ok(Some(d.out.clone()))
}

fn cmd_simulate(args: &SimulateArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>> {
    let stats = multiview_degree_stats(args.n, args.s_v, args.s_w, args.trials, args.seed)?;
    // the fused graph reduces to view 1 when view 2 has no edges
    let single_view = args.s_w == 0.0;
    let (mean_degree, isolated, predicted_isolated, predicted_degree) = if single_view {
        (
            stats.view_v.mean_degree,
            stats.view_v.isolated_fraction,
            (-args.s_v).exp(),
            args.s_v,
        )
    } else {
        (
            stats.exclusive.mean_degree,
            stats.exclusive.isolated_fraction,
            stats.predicted_isolated_fraction,
            stats.predicted_mean_degree,
        )
    };
    let report = json!({
        "n": args.n,
        "s_v": args.s_v,
        "s_w": args.s_w,
        "trials": args.trials,
        "seed": args.seed,
        "mean_degree": mean_degree,
        "isolated_fraction": isolated,
        "predicted_mean_degree": predicted_degree,
        "predicted_isolated_fraction": predicted_isolated,
        "view_v": {
            "mean_degree": stats.view_v.mean_degree,
            "isolated_fraction": stats.view_v.isolated_fraction,
            "predicted_isolated_fraction": (-args.s_v).exp(),
        },
        "view_w": {
            "mean_degree": stats.view_w.mean_degree,
            "isolated_fraction": stats.view_w.isolated_fraction,
            "predicted_isolated_fraction": (-args.s_w).exp(),
        },
        "multiview_exclusive": {
            "mean_degree": stats.exclusive.mean_degree,
            "isolated_fraction": stats.exclusive.isolated_fraction,
        },
        "multiview_inclusive": {
            "mean_degree": stats.inclusive.mean_degree,
            "isolated_fraction": stats.inclusive.isolated_fraction,
        },
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    manifest.config = json!({"n": args.n, "s_v": args.s_v, "s_w": args.s_w, "trials": args.trials});
    manifest.seed = Some(args.seed);
    let Some(dir) = &args.out else {
        return Ok(None);
    };
    create_dir(dir)?;
    let path = dir.join("simulate.json");
    write_json(&path, &report)?;
    manifest.outputs.push(path);
    Ok(Some(dir.clone()))
}
