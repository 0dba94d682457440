//! `hydratune`: curate clips, train adapters, check gradients, run the head
//! count ablation and render metric reports.
//!
//! Training settings come from built-in defaults, then the `--config` file,
//! then command-line flags; later sources win.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 verification
//! failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hydra_core::curation::{curate_dir, CurationConfig, ScorerRegistry, DEFAULT_AESTHETIC_SCORER, DEFAULT_OPTICAL_SCORER};
use hydra_core::eval::{aggregate, default_ablation, read_metrics, ReportFormat};
use hydra_core::gradcheck::{run_gradcheck, Fault, GradCheckConfig, GradCheckSizes};
use hydra_core::train::{freeze_audit, pretrained_stand_in, train, write_log, RunConfig};

const EXIT_INPUT: u8 = 1;
const EXIT_VERIFY: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "hydratune", version, about = "Multi-head low-rank adapter tuning for a toy video denoiser")]
struct Cli {
    /// Print per-item detail (clip scores, per-step losses).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment, score and filter source clips; write a manifest.
    Curate(CurateArgs),
    /// Train adapters on the toy dataset; write a checkpoint and a loss log.
    Train(TrainArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Train one adapter per head count and tabulate quality metrics.
    Ablate(AblateArgs),
    /// Aggregate per-video metric records into a method table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct CurateArgs {
    /// Directory holding one subdirectory per source video.
    input: PathBuf,
    /// Manifest path.
    #[arg(long)]
    out: PathBuf,
    /// Weight of the motion score.
    #[arg(long, default_value_t = hydra_core::curation::DEFAULT_ALPHA)]
    alpha: f64,
    /// Minimum combined score for a clip to be kept.
    #[arg(long, default_value_t = hydra_core::curation::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value = DEFAULT_OPTICAL_SCORER)]
    motion_scorer: String,
    #[arg(long, default_value = DEFAULT_AESTHETIC_SCORER)]
    appearance_scorer: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// key=value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of adapter heads.
    #[arg(long)]
    n: Option<usize>,
    /// Output directory for `checkpoint/` and `train_log.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Adapter and network sizes as d,k,rank,heads,model_dim.
    #[arg(long, default_value = "4,4,2,3,8")]
    sizes: GradCheckSizes,
    /// Number of random adapter instances.
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Use a deliberately wrong shared-matrix gradient.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated head counts.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,12")]
    n: Vec<usize>,
    /// Output directory for `ablation.csv` and `ablation.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Line-delimited metric records.
    metrics: PathBuf,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(epochs) = args.epochs {
        cfg.set("epochs", &epochs.to_string())?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_curate(args: &CurateArgs, verbose: bool) -> anyhow::Result<u8> {
    let cfg = CurationConfig {
        alpha: args.alpha,
        theta: args.theta,
        optical_scorer: args.motion_scorer.clone(),
        aesthetic_scorer: args.appearance_scorer.clone(),
        ..CurationConfig::default()
    };
    let report = curate_dir(&args.input, Some(&args.out), &cfg, &ScorerRegistry::with_defaults())?;
    if verbose {
        for r in &report.records {
            println!("{}", r.to_line());
        }
    }
    println!(
        "selected {} of {} clips from {} sources",
        report.selected(),
        report.records.len(),
        report.sources
    );
    Ok(0)
}

fn cmd_train(args: &TrainArgs, verbose: bool) -> anyhow::Result<u8> {
    let mut cfg = load_config(&args.run)?;
    if let Some(n) = args.n {
        cfg.set("heads", &n.to_string())?;
    }
    cfg.validate()?;
    let dataset = cfg.dataset()?;
    let base = pretrained_stand_in(cfg.model.clone(), cfg.train.seed)?;
    let outcome = train(&base, &cfg, &dataset)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    outcome.state.checkpoint(&cfg).save(&args.out.join("checkpoint"))?;
    write_log(&args.out.join("train_log.jsonl"), &outcome.log)?;
    if verbose {
        for r in &outcome.log {
            println!("{}", r.to_line());
        }
    }
    println!("steps {}", outcome.log.len());
    match outcome.log.last() {
        Some(r) => println!("final loss {:.6}", r.loss),
        None => println!("final loss n/a (no steps)"),
    }
    if !freeze_audit(&base, &outcome.state.params)? {
        eprintln!("error: base weights changed during training");
        return Ok(EXIT_VERIFY);
    }
    Ok(0)
}

fn cmd_gradcheck(args: &GradcheckArgs) -> anyhow::Result<u8> {
    let cfg = GradCheckConfig {
        seed: args.seed,
        instances: args.instances,
        sizes: args.sizes,
        fault: args.inject_fault.then_some(Fault::UngatedSharedGrad),
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&cfg)?;
    print!("{report}");
    if report.passed() {
        println!("gradient check passed (tolerance {:.0e})", report.tolerance);
        Ok(0)
    } else {
        let worst = report.worst().expect("a failing report has entries");
        eprintln!(
            "gradient check failed: worst parameter {} {} (max_rel {:.3e})",
            worst.class, worst.worst, worst.max_rel
        );
        Ok(EXIT_VERIFY)
    }
}

fn cmd_ablate(args: &AblateArgs) -> anyhow::Result<u8> {
    let cfg = load_config(&args.run)?;
    cfg.validate()?;
    if args.n.is_empty() {
        bail!("--n needs at least one head count");
    }
    let table = default_ablation(&cfg, &args.n)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let text = table.render(ReportFormat::Text);
    write_file(&args.out.join("ablation.csv"), &table.render(ReportFormat::Csv))?;
    write_file(&args.out.join("ablation.txt"), &text)?;
    print!("{text}");
    let failed = table.failed_rows();
    if failed.is_empty() {
        Ok(0)
    } else {
        for row in failed {
            eprintln!("row {} failed: {}", row.label, row.error.as_deref().unwrap_or(""));
        }
        Ok(EXIT_INPUT)
    }
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<u8> {
    let records = read_metrics(&args.metrics)?;
    let table = aggregate(&records)?;
    let rendered = table.render(args.format);
    match &args.out {
        Some(path) => write_file(path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Curate(a) => cmd_curate(a, cli.verbose),
        Command::Train(a) => cmd_train(a, cli.verbose),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
