use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use candle_core::Device;
use clap::{Args, Parser, Subcommand};

use mccsod::ablation::{self, AblationSettings};
use mccsod::checkpoint;
use mccsod::config::{Precision, RunConfig};
use mccsod::data::{
    load_dataset, read_rgb, write_gray_png, DatasetManifest, PrepareConfig, Sample,
};
use mccsod::encoder::load_pretrained;
use mccsod::metrics::evaluate_directory;
use mccsod::network::Network;
use mccsod::trainer::{overfit_smoke, train, TrainOutputs};
use mccsod::Error;

#[derive(Parser, Debug)]
#[command(
    name = "mccsod",
    version,
    about = "Train, run and score saliency networks for aerial and satellite images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network (or memorize a few images with --smoke).
    Train(Shared),
    /// Write one saliency PNG per input image.
    Infer(Shared),
    /// Score a directory of predictions against ground truth.
    Eval(Shared),
    /// Train and compare the module (or loss) variants at small scale from
    /// random initialization.
    Ablate(Shared),
    /// Write only the averaged precision-recall curve as CSV.
    PrExport(Shared),
}

#[derive(Args, Debug, Clone, Default)]
struct Shared {
    /// Dataset root holding `<split>/image` and `<split>/GT`.
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use only the first N images (4 when no value is given), without
    /// augmentation.
    #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "4")]
    smoke: Option<usize>,
    /// Number of optimizer steps.
    #[arg(long, value_name = "N")]
    iters: Option<usize>,

    /// Input images (infer) or predictions (eval, pr-export).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground-truth directory (eval, pr-export).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Evaluation split for ablation scores.
    #[arg(long)]
    eval_split: Option<String>,

    #[arg(long)]
    input_size: Option<usize>,
    /// Channel plan, e.g. `8,16,32,32,32`.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<usize>>,
    /// Pretrained encoder archive (safetensors).
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Start the encoder from random weights.
    #[arg(long)]
    no_pretrained: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    no_augment: bool,
    /// Compute in 64-bit floats.
    #[arg(long)]
    f64: bool,

    #[arg(long)]
    no_fg: bool,
    #[arg(long)]
    no_eg: bool,
    #[arg(long)]
    no_bg: bool,
    #[arg(long)]
    no_gic: bool,
    /// Drop the module's short connection to the basic features.
    #[arg(long)]
    no_original_content: bool,
    /// Compare loss mixtures instead of module branches.
    #[arg(long)]
    loss_ablation: bool,

    /// Exclude images with empty ground truth from averages.
    #[arg(long)]
    skip_empty_gt: bool,
    /// Score at this square size instead of native resolution.
    #[arg(long)]
    eval_size: Option<usize>,
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn need<'a, T>(v: &'a Option<T>, flag: &str, cmd: &str) -> anyhow::Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| usage(format!("`{cmd}` requires --{flag}")))
}

fn device() -> anyhow::Result<Device> {
    match std::env::var("MCCSOD_DEVICE") {
        Err(_) => Ok(Device::Cpu),
        Ok(s) if s.eq_ignore_ascii_case("cpu") || s.is_empty() => Ok(Device::Cpu),
        Ok(s) => Err(Error::Device(s).into()),
    }
}

fn resolve(a: &Shared) -> anyhow::Result<RunConfig> {
    let mut c = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.input_size {
        c.network.input_size = v;
    }
    if let Some(ch) = &a.channels {
        c.network.channels = ch
            .as_slice()
            .try_into()
            .map_err(|_| usage(format!("--channels takes five values, got {}", ch.len())))?;
    }
    if let Some(p) = &a.pretrained {
        c.pretrained = Some(p.clone());
        c.network.use_pretrained_encoder = true;
    }
    if a.no_pretrained {
        c.network.use_pretrained_encoder = false;
        c.pretrained = None;
    }
    let m = &mut c.network.mccm;
    m.foreground &= !a.no_fg;
    m.edge &= !a.no_eg;
    m.background &= !a.no_bg;
    m.global &= !a.no_gic;
    m.short_connection &= !a.no_original_content;
    if let Some(v) = a.seed {
        c.train.seed = v;
    }
    if let Some(v) = a.lr {
        c.train.initial_lr = v;
    }
    if let Some(v) = a.epochs {
        c.train.epochs = v;
    }
    if let Some(v) = a.batch_size {
        c.train.batch_size = v;
    }
    if a.no_augment {
        c.train.augment = false;
    }
    if let Some(v) = a.iters {
        c.train.max_iterations = Some(v);
    }
    if a.f64 {
        c.precision = Precision::F64;
    }
    if a.skip_empty_gt {
        c.eval.skip_empty_gt = true;
    }
    if let Some(v) = a.eval_size {
        c.eval.fixed_size = Some(v);
    }
    if c.network.use_pretrained_encoder && c.pretrained.is_none() {
        c.pretrained = std::env::var_os("MCCSOD_VGG16").map(PathBuf::from);
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn build_network(c: &RunConfig, dev: &Device) -> anyhow::Result<Network> {
    let dtype = c.precision.dtype();
    if !c.network.use_pretrained_encoder {
        return Ok(Network::new(c.network.clone(), dtype, dev, c.train.seed)?);
    }
    let path = c.pretrained.as_ref().ok_or_else(|| {
        usage("the encoder expects pretrained weights: pass --pretrained, set MCCSOD_VGG16, or use --no-pretrained")
    })?;
    let weights = load_pretrained(path, c.network.channels)?;
    Ok(Network::with_pretrained(
        c.network.clone(),
        &weights,
        dtype,
        dev,
        c.train.seed,
    )?)
}

fn write_resolved(out: &Path, c: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("config.toml");
    std::fs::write(&path, c.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_samples(
    m: &DatasetManifest,
    n: usize,
    prep: &PrepareConfig,
) -> anyhow::Result<Vec<Sample>> {
    Ok((0..n.min(m.len()))
        .map(|i| m.load(i, prep))
        .collect::<mccsod::Result<_>>()?)
}

fn cmd_train(a: &Shared) -> anyhow::Result<()> {
    let root = need(&a.data_root, "data-root", "train")?;
    let out = need(&a.out, "out", "train")?;
    let c = resolve(a)?;
    let dev = device()?;
    let split = a.split.as_deref().unwrap_or("train");
    let manifest = load_dataset(root, split)?;
    let net = build_network(&c, &dev)?;
    write_resolved(out, &c)?;
    let outputs = TrainOutputs { dir: out.clone() };
    let prep = c.prepare();
    if let Some(n) = a.smoke {
        let samples = load_samples(&manifest, n, &prep)?;
        let iters = c.train.max_iterations.unwrap_or(200);
        let smoke = overfit_smoke(&net, &samples, iters, c.train.initial_lr, &c.train.loss)?;
        checkpoint::save(&outputs.final_checkpoint(), &net, None, 1, iters)?;
        smoke.log.write_jsonl(&outputs.log())?;
        smoke.report.write_json(&out.join("smoke_report.json"))?;
        let losses = smoke.log.losses();
        println!(
            "smoke: {} images, {iters} steps, loss {:.4} -> {:.4}",
            samples.len(),
            losses.first().copied().unwrap_or(f64::NAN),
            losses.last().copied().unwrap_or(f64::NAN)
        );
        print!("{}", smoke.report.table());
    } else {
        let outcome = train(&net, &c.train, &manifest, &prep, Some(&outputs))?;
        println!(
            "trained {} steps over {} epochs; checkpoint {}",
            outcome.log.iterations.len(),
            outcome.log.epochs.len(),
            outputs.final_checkpoint().display()
        );
    }
    Ok(())
}

fn image_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    v.sort();
    Ok(v)
}

fn cmd_infer(a: &Shared) -> anyhow::Result<()> {
    let ckpt = need(&a.ckpt, "ckpt", "infer")?;
    let out = need(&a.out, "out", "infer")?;
    let input = match (&a.input, &a.data_root) {
        (Some(i), _) => i.clone(),
        (None, Some(r)) => r.join(a.split.as_deref().unwrap_or("test")).join("image"),
        (None, None) => return Err(usage("`infer` requires --input or --data-root")),
    };
    let dev = device()?;
    let net = checkpoint::load(ckpt)?.network(&dev)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let files = image_files(&input)?;
    for f in &files {
        let rgb = read_rgb(f)?;
        let map = net.predict(&rgb)?;
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
        write_gray_png(&out.join(format!("{stem}.png")), &map)?;
    }
    println!("wrote {} saliency maps to {}", files.len(), out.display());
    Ok(())
}

fn gt_dir(a: &Shared, cmd: &str) -> anyhow::Result<PathBuf> {
    match (&a.gt, &a.data_root) {
        (Some(g), _) => Ok(g.clone()),
        (None, Some(r)) => Ok(r.join(a.split.as_deref().unwrap_or("test")).join("GT")),
        (None, None) => Err(usage(format!("`{cmd}` requires --gt or --data-root"))),
    }
}

fn cmd_eval(a: &Shared) -> anyhow::Result<()> {
    let pred = need(&a.input, "input", "eval")?;
    let gt = gt_dir(a, "eval")?;
    let c = resolve(a)?;
    let result = evaluate_directory(pred, &gt, &c.eval)?;
    print!("{}", result.report.table());
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        result.report.write_json(&out.join("report.json"))?;
        result.report.write_pr_csv(&out.join("pr.csv"))?;
    }
    Ok(())
}

fn cmd_pr_export(a: &Shared) -> anyhow::Result<()> {
    let pred = need(&a.input, "input", "pr-export")?;
    let out = need(&a.out, "out", "pr-export")?;
    let gt = gt_dir(a, "pr-export")?;
    let c = resolve(a)?;
    let result = evaluate_directory(pred, &gt, &c.eval)?;
    result.report.write_pr_csv(out)?;
    println!(
        "wrote {} PR points to {}",
        result.report.pr.len(),
        out.display()
    );
    Ok(())
}

fn cmd_ablate(a: &Shared) -> anyhow::Result<()> {
    let root = need(&a.data_root, "data-root", "ablate")?;
    if a.no_fg || a.no_eg || a.no_bg || a.no_gic {
        return Err(usage("`ablate` chooses the module branches itself"));
    }
    let mut shared = a.clone();
    shared.no_original_content = false;
    let mut c = resolve(&shared)?;
    if a.channels.is_none() && a.config.is_none() {
        c.network.channels = [8, 16, 32, 32, 32];
    }
    if a.input_size.is_none() && a.config.is_none() {
        c.network.input_size = 64;
    }
    c.network.use_pretrained_encoder = false;
    device()?;
    let prep = c.prepare();
    let n = a.smoke.unwrap_or(4);
    let train_split = a.split.as_deref().unwrap_or("train");
    let train_samples = load_samples(&load_dataset(root, train_split)?, n, &prep)?;
    let eval_samples = match &a.eval_split {
        Some(s) => load_samples(&load_dataset(root, s)?, n, &prep)?,
        None => train_samples.clone(),
    };
    let rows = if a.loss_ablation {
        ablation::loss_rows()
    } else {
        ablation::module_rows(a.no_original_content)
    };
    let settings = AblationSettings {
        base: c.network.clone(),
        iterations: c.train.max_iterations.unwrap_or(50),
        lr: a.lr.unwrap_or(1e-3),
        seed: c.train.seed,
        dtype: c.precision.dtype(),
    };
    let results = ablation::run(&rows, &settings, &train_samples, &eval_samples)?;
    let table = ablation::table(&results);
    print!("{table}");
    if let Some(out) = &a.out {
        write_resolved(out, &c)?;
        std::fs::write(out.join("ablation.txt"), &table)?;
        std::fs::write(
            out.join("ablation.json"),
            serde_json::to_string_pretty(&results)?,
        )?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Device(_)) => 2,
        Some(
            Error::Pairing { .. }
            | Error::EmptyManifest(_)
            | Error::Io { .. }
            | Error::Image { .. }
            | Error::Checkpoint(_)
            | Error::State(_)
            | Error::MissingWeight(_)
            | Error::Dimension(_),
        ) => 3,
        Some(Error::NonFinite { .. }) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::PrExport(a) => cmd_pr_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
