//! Subcommand implementations. Each writes its artifacts plus a
//! `manifest.json` into the output directory.

use std::path::{Path, PathBuf};

use clap::Args;
use jeanie_core::alignment::{align_feature_maps, AlignMethod};
use jeanie_core::encoders::{
    encode_feature_map, load_checkpoint, normalized_adjacency, save_checkpoint, EncoderConfig, EncoderParams,
    FeatureMap, Mode,
};
use jeanie_core::fewshot::{
    encode_pool, evaluate_protocol, prepare_pair, prepare_pool, train_episodic, AlignmentScorer, EvalReport, Protocol,
    TrainConfig, ViewBlocks,
};
use jeanie_core::geometry::{generate_view_grid, CameraRig, ViewGrid, ViewMode};
use jeanie_core::skeleton::{generate_synthetic, write_skel_json, SYNTHETIC_CLASS_NAMES};
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{read_json, AlignSettings, ExperimentConfig};
use crate::data::{load_corpus, load_sequence, stem, CLASSES_FILE, SKEL_EXT};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, fmt_sig9, round_sig9, write_csv, write_json, write_text};

pub const MANIFEST: &str = "manifest.json";

/// Echo of a run: arguments, fully resolved settings and headline results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub out: PathBuf,
    pub args: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    pub results: Value,
}

impl RunManifest {
    fn new(command: &str, seed: u64, out: &Path, args: &impl Serialize, results: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            out: out.to_path_buf(),
            args: serde_json::to_value(args).expect("arguments serialize"),
            config: None,
            protocol: None,
            results,
        }
    }

    fn write(&self, out: &Path) -> CliResult<()> {
        write_json(&out.join(MANIFEST), self)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenSynthArgs {
    /// Number of catalog classes, taken in catalog order.
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub per_class: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Frames at unit speed.
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    /// Azimuth perturbation drawn uniformly from ±this many degrees.
    #[arg(long, default_value_t = 30.0)]
    pub view_range: f64,
    #[arg(long, default_value_t = 0.8)]
    pub warp_min: f64,
    #[arg(long, default_value_t = 1.25)]
    pub warp_max: f64,
}

pub fn gen_synth(args: &GenSynthArgs) -> CliResult<()> {
    if args.classes == 0 || args.classes > SYNTHETIC_CLASS_NAMES.len() {
        return Err(CliError::Config(format!("--classes must lie in 1..={}", SYNTHETIC_CLASS_NAMES.len())));
    }
    if args.per_class == 0 || args.frames == 0 {
        return Err(CliError::Config("--per-class and --frames must be positive".into()));
    }
    if !(args.view_range >= 0.0 && 0.0 < args.warp_min && args.warp_min <= args.warp_max) {
        return Err(CliError::Config("need --view-range ≥ 0 and 0 < --warp-min ≤ --warp-max".into()));
    }
    create_dir(&args.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut written = 0;
    for (class, name) in SYNTHETIC_CLASS_NAMES.iter().enumerate().take(args.classes) {
        for i in 0..args.per_class {
            let angle = if args.view_range > 0.0 { rng.random_range(-args.view_range..=args.view_range) } else { 0.0 };
            let warp = if args.warp_max > args.warp_min {
                rng.random_range(args.warp_min..=args.warp_max)
            } else {
                args.warp_min
            };
            let seq = generate_synthetic::<f64>(class, args.frames, angle, warp, rng.random())?;
            write_text(&args.out.join(format!("{name}_{i:03}{SKEL_EXT}")), &write_skel_json(&seq))?;
            written += 1;
        }
    }
    write_json(&args.out.join(CLASSES_FILE), &&SYNTHETIC_CLASS_NAMES[..args.classes])?;
    RunManifest::new("gen-synth", args.seed, &args.out, args, json!({ "files": written })).write(&args.out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Euler,
    Camvpc,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Euler)]
    pub mode: ModeArg,
    /// Grid step in degrees.
    #[arg(long, default_value_t = 15.0)]
    pub step: f64,
    #[arg(long, default_value_t = 3)]
    pub eta_az: usize,
    #[arg(long, default_value_t = 3)]
    pub eta_alt: usize,
    /// Camera rig JSON, required for camvpc.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn angle_tag(deg: f64) -> String {
    let s = fmt_sig9(deg);
    if deg >= 0.0 {
        format!("+{s}")
    } else {
        s
    }
}

pub fn simulate_views(args: &SimulateArgs) -> CliResult<()> {
    let mode = match args.mode {
        ModeArg::Euler => ViewMode::Euler,
        ModeArg::Camvpc => ViewMode::Camvpc,
    };
    let grid = ViewGrid { eta_az: args.eta_az, eta_alt: args.eta_alt, step_deg: args.step, mode };
    grid.validate()?;
    let camera = match &args.camera {
        Some(path) => Some(read_json::<CameraRig>(path)?.pose()?),
        None => None,
    };
    let seq = load_sequence(&args.input)?;
    let views = generate_view_grid(&seq, &grid, camera.as_ref())?;
    create_dir(&args.out)?;
    let base = stem(&args.input);
    let mut files = Vec::new();
    for i in 0..grid.k_az() {
        for j in 0..grid.k_alt() {
            let (az, alt) = grid.angles(i, j);
            let name = format!("{base}_az{}_alt{}{SKEL_EXT}", angle_tag(az), angle_tag(alt));
            write_text(&args.out.join(&name), &write_skel_json(&views[i * grid.k_alt() + j]))?;
            files.push(name);
        }
    }
    RunManifest::new("simulate-views", 0, &args.out, args, json!({ "files": files })).write(&args.out)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AlignArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub support: PathBuf,
    /// Alignment settings JSON; missing keys take their defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// Encode with a trained network instead of comparing raw blocks.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// Blocks flattened to vectors, one map per view grid.
fn raw_feature_map(blocks: &ViewBlocks<f64>) -> CliResult<FeatureMap<f64>> {
    let tau = blocks.views[0].len();
    let width = blocks.views[0].blocks[0].len();
    let (k, kk) = blocks.shape;
    let mut data = Array4::zeros((k, kk, tau, width));
    for (v, view) in blocks.views.iter().enumerate() {
        for (b, block) in view.blocks.iter().enumerate() {
            for (slot, x) in data.slice_mut(ndarray::s![v / kk, v % kk, b, ..]).iter_mut().zip(block.iter()) {
                *slot = *x;
            }
        }
    }
    Ok(FeatureMap::new(data)?)
}

pub fn align(args: &AlignArgs) -> CliResult<()> {
    let settings: AlignSettings = read_json(&args.config)?;
    // FVM needs view grids on both sides; the other kernels reuse its maps
    let pipeline = settings.pipeline(AlignMethod::Fvm, true)?;
    let query = load_sequence(&args.query)?;
    let support = load_sequence(&args.support)?;
    if query.graph() != support.graph() {
        return Err(CliError::data(&args.support, "skeleton graph differs from the query's"));
    }
    let (q, s) = match &args.checkpoint {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
            let (params, _) = load_checkpoint::<f64>(&text).map_err(|e| CliError::data(path, e))?;
            let prepared = prepare_pair(&query, &support, 0, &pipeline, &params.config)?;
            let adj = normalized_adjacency(query.graph())?;
            let enc = |b: &ViewBlocks<f64>| encode_feature_map(&b.views, b.shape, &params, &adj, Mode::Eval);
            (enc(&prepared.query)?, enc(&prepared.support)?)
        }
        None => {
            let prepared = prepare_pair(&query, &support, 0, &pipeline, &EncoderConfig::default())?;
            (raw_feature_map(&prepared.query)?, raw_feature_map(&prepared.support)?)
        }
    };
    let cfg = pipeline.alignment;
    let center = s.select_view(s.views_az() / 2, s.views_alt() / 2);
    let d_jeanie = align_feature_maps(&q, &center, &cfg, AlignMethod::Jeanie, false)?.value;
    let d_softdtw = align_feature_maps(&q, &s, &cfg, AlignMethod::SoftDtw, false)?.value;
    let d_fvm = align_feature_maps(&q, &s, &cfg, AlignMethod::Fvm, false)?.value;
    let out = json!({
        "d_jeanie": round_sig9(d_jeanie),
        "d_softdtw": round_sig9(d_softdtw),
        "d_fvm": round_sig9(d_fvm),
    });
    println!("{out}");
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Experiment settings JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn train(args: &TrainArgs, config: ExperimentConfig, protocol: Protocol) -> CliResult<()> {
    protocol.check_disjoint()?;
    config.encoder.validate()?;
    let pipeline = config.pipeline()?;
    let corpus = load_corpus(&args.data)?;
    let graph = corpus.sequences[0].graph().clone();
    let adj = normalized_adjacency(&graph)?;
    let samples = prepare_pool(&corpus.sequences, &corpus.labels, &pipeline, &config.encoder)?;
    let init = EncoderParams::init(config.encoder, graph.num_joints(), config.init_seed)?;
    let train_cfg = TrainConfig {
        n_way: protocol.n_way,
        z_shot: protocol.z_shot,
        batch: protocol.batch,
        episodes: protocol.episodes,
        lr: config.lr,
        weight_decay: config.weight_decay,
        seed: protocol.seed,
        loss: config.loss,
    };
    let (params, trace) = train_episodic(&samples, &protocol.train_classes, &train_cfg, &pipeline, &init, &adj)?;

    create_dir(&args.out)?;
    write_text(&args.out.join("checkpoint.json"), &save_checkpoint(&params, config.init_seed))?;
    let rows: Vec<Vec<String>> = trace.iter().enumerate().map(|(i, l)| vec![i.to_string(), fmt_sig9(*l)]).collect();
    write_csv(&args.out.join("loss.csv"), &["step", "loss"], &rows)?;
    let results = json!({
        "steps": trace.len(),
        "final_loss": trace.last().map(|l| round_sig9(*l)),
        "num_parameters": params.num_parameters(),
        "samples": corpus.files.len(),
        "class_names": corpus.class_names,
    });
    let mut manifest = RunManifest::new("train", protocol.seed, &args.out, args, results);
    manifest.config = Some(config);
    manifest.protocol = Some(protocol);
    manifest.write(&args.out)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Experiment settings JSON; the encoder section is taken from the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn method_name(m: AlignMethod) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn eval(args: &EvalArgs, mut config: ExperimentConfig, protocol: Protocol) -> CliResult<()> {
    if protocol.episodes == 0 {
        return Err(CliError::Config("evaluation needs at least one episode".into()));
    }
    protocol.check_disjoint()?;
    let text = std::fs::read_to_string(&args.checkpoint).map_err(|e| CliError::data(&args.checkpoint, e))?;
    let (params, _) = load_checkpoint::<f64>(&text).map_err(|e| CliError::data(&args.checkpoint, e))?;
    config.encoder = params.config;
    let corpus = load_corpus(&args.data)?;
    let adj = normalized_adjacency(corpus.sequences[0].graph())?;

    let run = |settings: &AlignSettings| -> CliResult<EvalReport> {
        let pipeline = settings.pipeline(config.method, config.support_grid)?;
        let samples = prepare_pool(&corpus.sequences, &corpus.labels, &pipeline, &params.config)?;
        let encoded = encode_pool(&samples, &params, &adj)?;
        let scorer = AlignmentScorer { encoded: &encoded, alignment: pipeline.alignment, method: config.method };
        Ok(evaluate_protocol(&corpus.labels, &protocol, &scorer)?)
    };
    let report = run(&config.alignment)?;

    let series = method_name(config.method);
    let mut plot = Vec::new();
    match &config.sweep {
        Some(sweep) => {
            for &v in &sweep.values {
                let acc = run(&sweep.apply(&config.alignment, v)?)?.accuracy;
                plot.push(vec![fmt_sig9(v), fmt_sig9(acc), series.clone()]);
            }
        }
        None => plot.push(vec![config.alignment.iota.to_string(), fmt_sig9(report.accuracy), series.clone()]),
    }

    create_dir(&args.out)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.episode_id.to_string(),
                r.predicted.to_string(),
                r.truth.to_string(),
                fmt_sig9(r.d_pos_mean),
                fmt_sig9(r.d_neg_min),
            ]
        })
        .collect();
    write_csv(&args.out.join("report.csv"), &["episode_id", "predicted", "truth", "d_pos_mean", "d_neg_min"], &rows)?;
    write_csv(&args.out.join("plotdata.csv"), &["x", "y", "series"], &plot)?;
    let results = json!({
        "episodes": report.rows.len(),
        "accuracy": round_sig9(report.accuracy),
        "std_error": round_sig9(report.std_error),
    });
    println!("{results}");
    let mut results = results;
    results["samples"] = json!(corpus.files.len());
    results["class_names"] = json!(corpus.class_names);
    let mut manifest = RunManifest::new("eval", protocol.seed, &args.out, args, results);
    manifest.config = Some(config);
    manifest.protocol = Some(protocol);
    manifest.write(&args.out)
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the repeated run.
    #[arg(long)]
    pub out: PathBuf,
}

fn rerun_args<T: serde::de::DeserializeOwned>(m: &RunManifest, path: &Path) -> CliResult<T> {
    serde_json::from_value(m.args.clone()).map_err(|e| CliError::Config(format!("{}: args: {e}", path.display())))
}

/// Repeats a recorded run with its resolved settings, writing to a new
/// directory. Relative paths resolve against the current directory.
pub fn rerun(args: &RerunArgs) -> CliResult<()> {
    let m: RunManifest = read_json(&args.manifest)?;
    let missing = |what: &str| CliError::Config(format!("{}: manifest lacks `{what}`", args.manifest.display()));
    match m.command.as_str() {
        "gen-synth" => gen_synth(&GenSynthArgs { out: args.out.clone(), ..rerun_args(&m, &args.manifest)? }),
        "simulate-views" => simulate_views(&SimulateArgs { out: args.out.clone(), ..rerun_args(&m, &args.manifest)? }),
        "train" => {
            let a = TrainArgs { out: args.out.clone(), ..rerun_args(&m, &args.manifest)? };
            train(
                &a,
                m.config.clone().ok_or_else(|| missing("config"))?,
                m.protocol.clone().ok_or_else(|| missing("protocol"))?,
            )
        }
        "eval" => {
            let a = EvalArgs { out: args.out.clone(), ..rerun_args(&m, &args.manifest)? };
            eval(
                &a,
                m.config.clone().ok_or_else(|| missing("config"))?,
                m.protocol.clone().ok_or_else(|| missing("protocol"))?,
            )
        }
        other => Err(CliError::Config(format!("{}: cannot rerun command `{other}`", args.manifest.display()))),
    }
}
