use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use tin_core::config::{self, RunConfig, SEED_ENV};
use tin_core::eval::{self, DEFAULT_MAX_TOLERANCE, DEFAULT_THRESHOLD_COUNT};
use tin_core::model::{build_tin1, build_tin2, EnrichmentSpec, Network, Variant};
use tin_core::{infer, io, nms, synthetic, train, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "tin", version, about = "Train, run and score compact CNN edge detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network on a manifest of image/ground-truth pairs.
    Train(TrainArgs),
    /// Predict an edge map for one image, or for every image of a manifest.
    Infer(InferArgs),
    /// Score predicted maps against ground truth (ODS / OIS).
    Eval(EvalArgs),
    /// Print the layer table and parameter count.
    Summary(SummaryArgs),
    /// Write the synthetic-shapes dataset.
    MakeSynthetic(SyntheticArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "tin1")]
    variant: Variant,
    /// Final checkpoint path; periodic checkpoints go next to it as `<out>.epochN`.
    #[arg(long)]
    out: PathBuf,
    /// `key=value` overrides of the training and loss defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the per-epoch log here (it is also printed to stdout).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    image: Option<PathBuf>,
    /// Predict every image listed here, writing `<out>/<image stem>.png`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output PNG (or directory with `--manifest`).
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated scales, e.g. `0.5,1,1.5`; single scale when omitted.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Thin the map by non-maximum suppression before writing.
    #[arg(long)]
    nms: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<image stem>.png` predictions.
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_TOLERANCE)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Thin predictions before scoring.
    #[arg(long)]
    nms: bool,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_COUNT)]
    thresholds: usize,
}

#[derive(Args, Debug)]
struct SummaryArgs {
    #[arg(long, conflicts_with = "variant")]
    ckpt: Option<PathBuf>,
    /// Describe a freshly built network with default settings.
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Args, Debug)]
struct SyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = synthetic::DEFAULT_COUNT)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = synthetic::DEFAULT_SIZE)]
    size: usize,
}

fn default_network(variant: Variant) -> Result<Network<f32>> {
    match variant {
        Variant::Tin1 => build_tin1(EnrichmentSpec::with_defaults(16)),
        Variant::Tin2 => build_tin2(EnrichmentSpec::with_defaults(16), EnrichmentSpec::with_defaults(64)),
    }
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
    cfg.validate()?;
    let manifest = io::load_manifest(&a.manifest)?;
    if manifest.is_empty() {
        return Err(Error::Empty(format!("{}: manifest has no entries", a.manifest.display())));
    }
    let samples = io::load_samples(&manifest)?;
    let mut net = default_network(a.variant)?;
    net.init_params(cfg.train.seed);
    info!(
        "training {} ({} parameters) on {} samples for {} epochs",
        a.variant.name(),
        net.param_count(),
        samples.len(),
        cfg.train.epochs
    );
    let out = a.out.clone();
    let log = train::train(&mut net, &samples, &cfg.train, &cfg.loss, |epoch, net| {
        let path = PathBuf::from(format!("{}.epoch{}", out.display(), epoch + 1));
        info!("checkpoint {}", path.display());
        io::save_checkpoint(net, &path)
    })?;
    io::save_checkpoint(&net, &a.out)?;
    let text = log.to_text();
    print!("{text}");
    if let Some(path) = &a.log {
        std::fs::write(path, &text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn predict_one(net: &Network<f32>, image: &Path, scales: Option<&[f64]>, thin: bool) -> Result<tin_core::EdgeMap> {
    let img = io::load_image(image)?;
    let map = match scales {
        Some(s) => infer::predict_multiscale(net, &img, s)?,
        None => infer::predict(net, &img)?,
    };
    Ok(if thin { nms::nms_thin(&map) } else { map })
}

fn stem_png(dir: &Path, image: &Path) -> PathBuf {
    let stem = image.file_stem().unwrap_or(image.as_os_str());
    dir.join(stem).with_extension("png")
}

fn run_infer(a: &InferArgs) -> Result<()> {
    let net = io::load_checkpoint(&a.ckpt)?;
    let scales = a.scales.as_deref();
    if let Some(image) = &a.image {
        let map = predict_one(&net, image, scales, a.nms)?;
        return io::save_edge_map(&map, &a.out);
    }
    let manifest_path = a.manifest.as_ref().expect("clap enforces image or manifest");
    let manifest = io::load_manifest(manifest_path)?;
    for e in &manifest.entries {
        let map = predict_one(&net, &e.image, scales, a.nms)?;
        io::save_edge_map(&map, &stem_png(&a.out, &e.image))?;
    }
    info!("wrote {} maps to {}", manifest.len(), a.out.display());
    Ok(())
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    if !(a.tolerance >= 0.0 && a.tolerance.is_finite()) {
        return Err(Error::InvalidConfig(format!("tolerance must be non-negative, got {}", a.tolerance)));
    }
    if a.thresholds == 0 {
        return Err(Error::InvalidConfig("need at least one threshold".into()));
    }
    let manifest = io::load_manifest(&a.manifest)?;
    let mut preds = Vec::with_capacity(manifest.len());
    let mut gts = Vec::with_capacity(manifest.len());
    for e in &manifest.entries {
        let map = io::load_edge_map(&stem_png(&a.pred_dir, &e.image))?;
        preds.push(if a.nms { nms::nms_thin(&map) } else { map });
        gts.push(io::load_gt(&e.gt)?);
    }
    let report = eval::evaluate(&preds, &gts, &eval::uniform_thresholds(a.thresholds), a.tolerance)?;
    let text = report.to_text();
    match &a.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => print!("{text}"),
    }
    info!("ODS {:.4} (t = {:.2})  OIS {:.4}", report.ods, report.ods_threshold, report.ois);
    Ok(())
}

fn run_summary(a: &SummaryArgs) -> Result<()> {
    let net = match (&a.ckpt, a.variant) {
        (Some(path), _) => io::load_checkpoint(path)?,
        (None, v) => default_network(v.unwrap_or(Variant::Tin1))?,
    };
    print!("{}", net.summary());
    Ok(())
}

fn run_synthetic(a: &SyntheticArgs) -> Result<()> {
    if a.count == 0 {
        warn!("writing an empty dataset");
    }
    let manifest = synthetic::write_synthetic(&a.out, a.count, a.size, a.seed)?;
    println!("{}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(a) => run_train(a),
        Command::Infer(a) => run_infer(a),
        Command::Eval(a) => run_eval(a),
        Command::Summary(a) => run_summary(a),
        Command::MakeSynthetic(a) => run_synthetic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
