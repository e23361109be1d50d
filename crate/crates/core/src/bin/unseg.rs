use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unseg::arma::Architecture;
use unseg::autodiff::Activation;
use unseg::config::SegConfig;
use unseg::eval::evaluate_dataset;
use unseg::pipeline::{run_image, write_outputs, SegJob};
use unseg::synth::{generate_blob, generate_sbm, write_blob, write_sbm, BlobParams, SbmParams};
use unseg::Result;

#[derive(Parser)]
#[command(name = "unseg", version, about = "Unsupervised segmentation from patch features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one feature file.
    Segment(SegmentArgs),
    /// Segment and score a directory of feature files against masks.
    Evaluate(EvaluateArgs),
    /// Write a synthetic benchmark instance.
    Synth(SynthArgs),
}

/// Every flag overrides the config file, which overrides the defaults.
#[derive(Args)]
struct Overrides {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    activation: Option<Activation>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    arch: Option<Architecture>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    no_refine: bool,
    #[arg(long)]
    soft_upsample: bool,
    #[arg(long)]
    allow_self_loops: bool,
    /// Also write per-epoch loss CSVs.
    #[arg(long)]
    losscurve: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<SegConfig> {
        let mut cfg = match &self.config {
            Some(path) => SegConfig::from_kv_file(path)?,
            None => SegConfig::default(),
        };
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.activation {
            cfg.arma.activation = v;
        }
        if let Some(v) = self.epochs {
            cfg.optim.epochs = v;
        }
        if let Some(v) = self.seed {
            cfg.optim.seed = v;
        }
        if let Some(v) = self.arch {
            cfg.arma.arch = v;
        }
        if let Some(v) = self.lr {
            cfg.optim.lr = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.optim.weight_decay = v;
        }
        if let Some(v) = self.lr_decay {
            cfg.optim.lr_decay = Some(v);
        }
        if let Some(v) = self.patch {
            cfg.patch = v;
        }
        cfg.refine &= !self.no_refine;
        cfg.soft_upsample |= self.soft_upsample;
        cfg.allow_self_loops |= self.allow_self_loops;
        cfg.losscurve |= self.losscurve;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    features: PathBuf,
    /// Output size as HEIGHTxWIDTH in pixels.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    /// Ground-truth mask (PGM or PNG) to score against.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    features_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Blob,
    Sbm,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(short, long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HEIGHTxWIDTH, got '{s}'"))?;
    let dim = |v: &str| v.trim().parse::<usize>().ok().filter(|&d| d > 0);
    match (dim(h), dim(w)) {
        (Some(h), Some(w)) => Ok((h, w)),
        _ => Err(format!("expected positive HEIGHTxWIDTH, got '{s}'")),
    }
}

fn segment(args: &SegmentArgs) -> Result<()> {
    let config = args.overrides.resolve()?;
    let job = SegJob {
        features: args.features.clone(),
        image_size: args.size,
        gt: args.gt.clone(),
        config: config.clone(),
    };
    let outcome = run_image(&job)?;
    let mask = write_outputs(&outcome, &args.features, &config, &args.out)?;
    println!("mask: {}", mask.display());
    if outcome.mask.meta.trivial_partition {
        println!("warning: trivial partition");
    }
    if let Some(iou) = &outcome.iou {
        println!("mIoU {:.4}  foreground IoU {:.4}", iou.miou, iou.foreground());
    }
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = args.overrides.resolve()?;
    let report = evaluate_dataset(&args.features_dir, &args.gt_dir, &config, Some(&args.out))?;
    println!(
        "{} images  mean mIoU {:.4}  mean foreground IoU {:.4}  warnings {}",
        report.images.len(),
        report.mean_miou,
        report.mean_foreground_iou,
        report.warnings
    );
    println!("report: {}", args.out.join("report.json").display());
    Ok(())
}

fn synth(args: &SynthArgs, out: &Path) -> Result<()> {
    for seed in args.seed..args.seed + args.count {
        let stem = format!("{}_{seed:04}", match args.kind {
            Kind::Blob => "blob",
            Kind::Sbm => "sbm",
        });
        match args.kind {
            Kind::Blob => {
                let (f, g) = write_blob(&generate_blob(&BlobParams::default(), seed)?, out, &stem)?;
                println!("{}  {}", f.display(), g.display());
            }
            Kind::Sbm => {
                for p in write_sbm(&generate_sbm(&SbmParams::default(), seed)?, out, &stem)? {
                    println!("{}", p.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment(a) => segment(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a, &a.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
