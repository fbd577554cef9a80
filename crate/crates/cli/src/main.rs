use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metalseg::fusion::{PipelineConfig, DEFAULT_TIMEOUT};
use metalseg::loss::FiltrationType;
use metalseg::report::to_stable_json;
use metalseg::synth::{DefectKind, DefectSpec};
use metalseg::Filtration;
use metalseg_cli::commands::{self, write_output, FuseArgs};
use metalseg_cli::{CliError, CliResult, Config};

#[derive(Parser)]
#[command(name = "metalseg", version, about = "Topology-aware evaluation and multi-scale fusion for metal-layer segmentation")]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ESD and pixel metrics of predicted masks against ground truth.
    Evaluate {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Report path, `-` for stdout.
        #[arg(short, long, default_value = "-")]
        out: PathBuf,
        /// Pixels two components must share to overlap [default: 1].
        #[arg(long)]
        min_overlap: Option<usize>,
        /// Component connectivity, 4 or 8 [default: 8].
        #[arg(long)]
        connectivity: Option<u8>,
    },
    /// Aggregate ESD rate of per-image counts manifests.
    Rate {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(short, long, default_value = "-")]
        out: PathBuf,
    },
    /// Multi-scale segmentation with two mask-provider processes.
    Fuse(FuseCmd),
    /// Betti matching loss between a ground-truth and a predicted raster.
    BettiMatch(BettiCmd),
    /// Persistence barcode of a raster.
    Persistence {
        raster: PathBuf,
        #[arg(long, value_enum, default_value_t = FiltrationArg::Sublevel)]
        filtration: FiltrationArg,
        #[arg(short, long, default_value = "-")]
        out: PathBuf,
    },
    /// Point prompts for an SEM image.
    Prompts(PromptsCmd),
    /// Synthetic metal-layer images with ground truth and optional defects.
    Synth(SynthCmd),
    /// Training-style augmentation of one image/mask pair.
    Augment(AugmentCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum FiltrationArg {
    Sublevel,
    Superlevel,
}

impl From<FiltrationArg> for Filtration {
    fn from(f: FiltrationArg) -> Self {
        match f {
            FiltrationArg::Sublevel => Filtration::Sublevel,
            FiltrationArg::Superlevel => Filtration::Superlevel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FiltrationTypeArg {
    Sublevel,
    Superlevel,
    Bothlevels,
}

#[derive(Args)]
struct FuseCmd {
    image: PathBuf,
    /// Shell command of the full-image provider.
    #[arg(long)]
    provider_full: String,
    /// Shell command of the patch provider.
    #[arg(long)]
    provider_patch: String,
    #[arg(long, default_value = "fused.png")]
    out_mask: PathBuf,
    #[arg(long, default_value = "flags.json")]
    out_flags: PathBuf,
    /// Prompt seed [default: config seed or 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Provider request timeout in seconds [default: 300].
    #[arg(long)]
    timeout: Option<u64>,
    /// Patch side in pixels [default: 512].
    #[arg(long)]
    patch_size: Option<usize>,
    /// Minimum overlap of adjacent patches as a fraction of the side [tuned default: 0.10].
    #[arg(long)]
    min_overlap_fraction: Option<f64>,
    /// Largest component counted as a speckle [tuned default: 16].
    #[arg(long)]
    speckle_max_size: Option<usize>,
    /// Speckles that make a full-image patch speckled [tuned default: 50].
    #[arg(long)]
    speckle_count_threshold_full: Option<usize>,
    /// Speckles that make a patch-model mask speckled [tuned default: 50].
    #[arg(long)]
    speckle_count_threshold_patch: Option<usize>,
    /// Pixel agreement above which the patch model is used [tuned default: 0.60].
    #[arg(long)]
    agreement_threshold: Option<f64>,
}

#[derive(Args)]
struct BettiCmd {
    /// Ground truth, MLF1 raster or PNG.
    gt: PathBuf,
    /// Prediction, MLF1 raster or PNG.
    pred: PathBuf,
    #[arg(short, long, default_value = "-")]
    out: PathBuf,
    /// Write d(betti loss)/d(pred) as an MLF1 raster.
    #[arg(long)]
    grad: Option<PathBuf>,
    /// BCE weight within the pixel loss [tuned default: 0.6].
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight of the Betti matching term [tuned default: 0.375].
    #[arg(long)]
    lambda: Option<f64>,
    /// Filtration of the matching [tuned default: sublevel].
    #[arg(long, value_enum)]
    filtration_type: Option<FiltrationTypeArg>,
    /// Unmatched prediction bars shorter than this carry no loss [tuned default: 0.345].
    #[arg(long)]
    length_threshold: Option<f64>,
    /// Push unmatched prediction bars to the diagonal instead of (1, 0) [tuned default: push to (1, 0)].
    #[arg(long)]
    no_push: bool,
}

#[derive(Args)]
struct PromptsCmd {
    image: PathBuf,
    #[arg(short, long, default_value = "-")]
    out: PathBuf,
    /// Brightness quantile used as threshold [default: 0.95].
    #[arg(long)]
    quantile: Option<f64>,
    /// Number of points [tuned default: 5].
    #[arg(long)]
    n_points: Option<usize>,
    /// Components below this size are dropped [default: 32].
    #[arg(long)]
    min_object_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(short, long)]
    out_dir: PathBuf,
    /// Number of images; seeds run from --seed upward.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Disable blur and noise.
    #[arg(long)]
    noiseless: bool,
    /// Defects as KIND:COUNT, e.g. bridge:2; repeatable.
    #[arg(long = "defect", value_parser = parse_defect)]
    defects: Vec<DefectSpec>,
}

#[derive(Args)]
struct AugmentCmd {
    image: PathBuf,
    gt: PathBuf,
    #[arg(short, long)]
    out_dir: PathBuf,
    /// Chance of applying the transform chain [tuned default: 0.385].
    #[arg(long)]
    probability: Option<f64>,
    /// Transform intensity [tuned default: 0.61].
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_defect(s: &str) -> Result<DefectSpec, String> {
    let (kind, count) = s.split_once(':').unwrap_or((s, "1"));
    let kind: DefectKind = serde_json::from_value(serde_json::Value::String(kind.to_owned()))
        .map_err(|_| format!("unknown defect kind `{kind}`"))?;
    let count = count.parse().map_err(|_| format!("bad count `{count}`"))?;
    Ok(DefectSpec::new(kind, count))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Evaluate {
            pred_dir,
            gt_dir,
            out,
            min_overlap,
            connectivity,
        } => {
            set(&mut cfg.evaluation.min_overlap, min_overlap);
            set(&mut cfg.evaluation.connectivity, connectivity);
            let report = commands::evaluate(&pred_dir, &gt_dir, &cfg.evaluation)?;
            write_output(&out, &to_stable_json(&report)?)
        }
        Command::Rate { manifests, out } => {
            let summaries = manifests
                .iter()
                .map(|m| commands::rate(m))
                .collect::<CliResult<Vec<_>>>()?;
            write_output(&out, &to_stable_json(&summaries)?)
        }
        Command::Fuse(c) => {
            let f = &mut cfg.fusion;
            set(&mut f.patch_size, c.patch_size);
            set(&mut f.min_overlap_fraction, c.min_overlap_fraction);
            set(&mut f.speckle_max_size, c.speckle_max_size);
            set(&mut f.speckle_count_threshold_full, c.speckle_count_threshold_full);
            set(&mut f.speckle_count_threshold_patch, c.speckle_count_threshold_patch);
            set(&mut f.agreement_threshold, c.agreement_threshold);
            let timeout = c
                .timeout
                .or(cfg.provider_timeout_secs)
                .map_or(DEFAULT_TIMEOUT, Duration::from_secs);
            commands::fuse(&FuseArgs {
                image: &c.image,
                provider_full: &c.provider_full,
                provider_patch: &c.provider_patch,
                config: PipelineConfig {
                    fusion: cfg.fusion,
                    prompts: cfg.prompts,
                },
                seed: c.seed.or(cfg.seed).unwrap_or(0),
                timeout,
                out_mask: &c.out_mask,
                out_flags: &c.out_flags,
            })
            .map(drop)
        }
        Command::BettiMatch(c) => {
            let l = &mut cfg.loss;
            set(&mut l.alpha, c.alpha);
            set(&mut l.lambda, c.lambda);
            set(&mut l.betti.barcode_length_threshold, c.length_threshold);
            if let Some(t) = c.filtration_type {
                l.betti.filtration_type = match t {
                    FiltrationTypeArg::Sublevel => FiltrationType::Sublevel,
                    FiltrationTypeArg::Superlevel => FiltrationType::Superlevel,
                    FiltrationTypeArg::Bothlevels => FiltrationType::Bothlevels,
                };
            }
            if c.no_push {
                l.betti.push_unmatched_to_1_0 = false;
            }
            let report = commands::betti_match(&c.gt, &c.pred, &cfg.loss, c.grad.as_deref())?;
            write_output(&c.out, &to_stable_json(&report)?)
        }
        Command::Persistence { raster, filtration, out } => {
            let bc = commands::persistence(&raster, filtration.into())?;
            write_output(&out, &to_stable_json(&bc)?)
        }
        Command::Prompts(c) => {
            let p = &mut cfg.prompts;
            set(&mut p.quantile, c.quantile);
            set(&mut p.n_points, c.n_points);
            set(&mut p.min_object_size, c.min_object_size);
            if let Some(seed) = c.seed.or(cfg.seed) {
                p.seed = seed;
            }
            let points = commands::prompts(&c.image, &cfg.prompts)?;
            write_output(&c.out, &to_stable_json(&points)?)
        }
        Command::Synth(c) => {
            let s = &mut cfg.synth;
            set(&mut s.width, c.width);
            set(&mut s.height, c.height);
            if let Some(seed) = c.seed.or(cfg.seed) {
                s.seed = seed;
            }
            if c.noiseless {
                *s = s.noiseless();
            }
            let defects = if c.defects.is_empty() { cfg.defects } else { c.defects };
            if c.count == 0 {
                return Err(CliError::Usage("--count must be at least 1".into()));
            }
            let manifest = commands::synth(&cfg.synth, &defects, c.count, &c.out_dir)?;
            log::info!("wrote {} images to {}", manifest.entries.len(), c.out_dir.display());
            Ok(())
        }
        Command::Augment(c) => {
            let a = &mut cfg.augment;
            set(&mut a.probability, c.probability);
            set(&mut a.intensity, c.intensity);
            if let Some(seed) = c.seed.or(cfg.seed) {
                a.seed = seed;
            }
            let record = commands::augment_pair(&c.image, &c.gt, &cfg.augment, &c.out_dir)?;
            write_output(&c.out_dir.join("record.json"), &to_stable_json(&record)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_owned()).to_json_line());
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
