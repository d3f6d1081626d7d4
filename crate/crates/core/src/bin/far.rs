use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use far::bench::SweepOp;
use far::cli::{self, BenchArgs, RunConfig, RunSource};

#[derive(Parser)]
#[command(name = "far", version, about = "Fourier disentanglement and attention over video features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, extract mid-level features, apply FO and FA, fuse, write outputs.
    Run(RunArgs),
    /// Run oracle and invariant checks: fft, fo, fa, grad or all.
    Check {
        suite: String,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Time and FLOP-count the operators over a size sweep.
    Bench(BenchFlags),
    /// Print the frame sampling plan.
    Sample {
        #[arg(long)]
        total: usize,
        #[arg(long, default_value_t = cli::DEFAULT_FRAMES)]
        want: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Previous run.cfg; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene description file, or `builtin:demo`.
    #[arg(long, conflicts_with = "input")]
    scene: Option<String>,
    /// FTF clip of shape (3, T, H, W).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mid-level channel count.
    #[arg(long)]
    c_mid: Option<usize>,
    /// quadratic | literal
    #[arg(long)]
    fo_weights: Option<String>,
    /// l2 | l1
    #[arg(long)]
    fo_norm: Option<String>,
    /// strict | residual[:BETA]
    #[arg(long)]
    fo_apply: Option<String>,
    /// FA residual weight (default 0.01).
    #[arg(long)]
    lambda: Option<f64>,
    /// text | eq7
    #[arg(long)]
    fa_mode: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchFlags {
    /// Operators to sweep.
    #[arg(long, value_delimiter = ',', default_value = "fa,sa,fo")]
    ops: Vec<String>,
    /// Space-time sizes (THW).
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Mid-level shape c,t,h,w for the overhead estimate.
    #[arg(long, default_value = "48,4,135,135")]
    mid: String,
    #[arg(long, default_value = "far-bench")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

fn run_config(a: RunArgs) -> far::Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.scene {
        cfg.source = Some(RunSource::Scene(s));
    }
    if let Some(p) = a.input {
        cfg.source = Some(RunSource::Tensor(p));
    }
    cfg.frames = a.frames.unwrap_or(cfg.frames);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.c_mid = a.c_mid.unwrap_or(cfg.c_mid);
    if let Some(v) = a.fo_weights {
        cfg.fo.weights.profile = cli::parse_weight_profile(&v)?;
    }
    if let Some(v) = a.fo_norm {
        cfg.fo.weights.norm = cli::parse_mask_norm(&v)?;
    }
    if let Some(v) = a.fo_apply {
        cfg.fo.application = cli::parse_fo_application(&v)?;
    }
    cfg.fa.lambda_fa = a.lambda.unwrap_or(cfg.fa.lambda_fa);
    if let Some(v) = a.fa_mode {
        cfg.fa.apply_mode = cli::parse_fa_mode(&v)?;
    }
    cfg.fa.validate()?;
    cfg.threads = a.threads.or(cfg.threads);
    cfg.out = a.out;
    Ok(cfg)
}

fn bench_args(b: BenchFlags) -> far::Result<BenchArgs> {
    Ok(BenchArgs {
        ops: b.ops.iter().map(|s| s.parse::<SweepOp>()).collect::<far::Result<_>>()?,
        sizes: b.sizes,
        channels: b.channels,
        reps: b.reps,
        mid_shape: cli::parse_shape4(&b.mid)?,
        out: b.out,
        threads: b.threads,
    })
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run(a) => match run_config(a) {
            Ok(cfg) => cli::cmd_run(&cfg),
            Err(e) => {
                eprintln!("far: {e}");
                cli::exit_code(&e)
            }
        },
        Command::Check { suite, threads } => cli::cmd_check(&suite, threads),
        Command::Bench(b) => match bench_args(b) {
            Ok(args) => cli::cmd_bench(&args),
            Err(e) => {
                eprintln!("far: {e}");
                cli::exit_code(&e)
            }
        },
        Command::Sample { total, want, seed } => cli::cmd_sample(total, want, seed),
    };
    ExitCode::from(code as u8)
}
