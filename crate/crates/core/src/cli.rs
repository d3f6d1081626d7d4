//! Commands behind the `far` binary.
//!
//! `run` takes a clip (a scene description or an FTF tensor), samples
//! frames, pushes them through the convolutional stem and applies FO and FA
//! side by side before sum-fusing the two branches. Its output directory is
//! self-describing: `run.cfg` holds the resolved configuration and
//! `far run --config DIR/run.cfg --out OTHER` reproduces every file.
//!
//! Exit codes: 0 success, 1 failed checks or internal errors, 2 missing or
//! unusable input and bad arguments, 3 shape errors.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::backbone::{stem_forward, StemConfig, DEFAULT_C_MID};
use crate::bench::{complexity_sweep, far_overhead_estimate, flops_csv, timing_csv, SweepOp};
use crate::check::{run_suite, CheckContext, Suite};
use crate::error::{FarError, Result};
use crate::fa::{fourier_attention, sa_flops, fa_flops, FaApplyMode, FaConfig, DEFAULT_LAMBDA};
use crate::fo::{disentangle_with_mask, FoApplication, FoConfig, FreqWeightMode, MaskNorm, WeightProfile};
use crate::pgm::{mask_heatmaps, write_pgm};
use crate::sampler::{plan_samples, SamplePlan, CSV_HEADER as SAMPLE_CSV_HEADER};
use crate::synth::{generate, region_mean_amplitudes, RegionKind, RegionLabelMap, SceneSpec};
use crate::tensor::{read_ftf, write_ftf, RTensor, Shape4};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "FAR_THREADS";

pub const DEFAULT_FRAMES: usize = 8;

/// Built-in scene name accepted in place of a scene file path.
pub const BUILTIN_DEMO: &str = "builtin:demo";

pub const STATS_CSV_HEADER: &str = "region,cells,feature_mean,fo_mean,fa_delta_mean,fused_mean";

#[derive(Debug, Clone, PartialEq)]
pub enum RunSource {
    /// Scene description file, or [`BUILTIN_DEMO`].
    Scene(String),
    /// FTF tensor of shape `(3, T, H, W)`.
    Tensor(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Option<RunSource>,
    pub frames: usize,
    pub seed: u64,
    pub c_mid: usize,
    pub fo: FoConfig,
    pub fa: FaConfig,
    pub threads: Option<usize>,
    /// Not part of `run.cfg`; supplied on the command line.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: None,
            frames: DEFAULT_FRAMES,
            seed: 0,
            c_mid: DEFAULT_C_MID,
            fo: FoConfig::default(),
            fa: FaConfig::default(),
            threads: None,
            out: PathBuf::from("far-run"),
        }
    }
}

fn fo_application_text(a: FoApplication) -> String {
    match a {
        FoApplication::Strict => "strict".into(),
        FoApplication::Residual { beta } => format!("residual:{beta}"),
    }
}

pub fn parse_fo_application(s: &str) -> Result<FoApplication> {
    match s.split_once(':') {
        None if s == "strict" => Ok(FoApplication::Strict),
        None if s == "residual" => Ok(FoApplication::Residual { beta: 1.0 }),
        Some(("residual", b)) => b
            .parse()
            .ok()
            .filter(|b: &f64| b.is_finite() && *b >= 0.0)
            .map(|beta| FoApplication::Residual { beta })
            .ok_or_else(|| FarError::Argument(format!("bad residual beta {b:?}"))),
        _ => Err(FarError::Argument(format!("unknown FO application {s:?}"))),
    }
}

pub fn parse_weight_profile(s: &str) -> Result<WeightProfile> {
    match s {
        "quadratic" => Ok(WeightProfile::Quadratic),
        "literal" => Ok(WeightProfile::PaperLiteral),
        _ => Err(FarError::Argument(format!("unknown weight profile {s:?}"))),
    }
}

pub fn parse_mask_norm(s: &str) -> Result<MaskNorm> {
    match s {
        "l2" => Ok(MaskNorm::L2),
        "l1" => Ok(MaskNorm::L1),
        _ => Err(FarError::Argument(format!("unknown mask norm {s:?}"))),
    }
}

pub fn parse_fa_mode(s: &str) -> Result<FaApplyMode> {
    match s {
        "text" => Ok(FaApplyMode::TextMode),
        "eq7" => Ok(FaApplyMode::Eq7Literal),
        _ => Err(FarError::Argument(format!("unknown FA mode {s:?}"))),
    }
}

impl RunConfig {
    /// Resolved configuration in `key = value` form, as written to `run.cfg`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("command = run\n");
        match &self.source {
            Some(RunSource::Scene(p)) => writeln!(s, "scene = {p}").unwrap(),
            Some(RunSource::Tensor(p)) => writeln!(s, "input = {}", p.display()).unwrap(),
            None => {}
        }
        let profile = match self.fo.weights.profile {
            WeightProfile::Quadratic => "quadratic",
            WeightProfile::PaperLiteral => "literal",
        };
        let norm = match self.fo.weights.norm {
            MaskNorm::L2 => "l2",
            MaskNorm::L1 => "l1",
        };
        let fa_mode = match self.fa.apply_mode {
            FaApplyMode::TextMode => "text",
            FaApplyMode::Eq7Literal => "eq7",
        };
        writeln!(s, "frames = {}", self.frames).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "c_mid = {}", self.c_mid).unwrap();
        writeln!(s, "fo_weights = {profile}").unwrap();
        writeln!(s, "fo_norm = {norm}").unwrap();
        writeln!(s, "fo_apply = {}", fo_application_text(self.fo.application)).unwrap();
        writeln!(s, "lambda = {}", self.fa.lambda_fa).unwrap();
        writeln!(s, "fa_mode = {fa_mode}").unwrap();
        if let Some(t) = self.threads {
            writeln!(s, "threads = {t}").unwrap();
        }
        s
    }

    /// Inverse of [`RunConfig::to_text`]; `out` is left at its default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| FarError::Argument(format!("line {}: expected key = value", n + 1)))?;
            let bad = || FarError::Argument(format!("line {}: bad value {value:?} for {key}", n + 1));
            match key {
                "command" if value == "run" => {}
                "scene" => cfg.source = Some(RunSource::Scene(value.to_string())),
                "input" => cfg.source = Some(RunSource::Tensor(PathBuf::from(value))),
                "frames" => cfg.frames = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "c_mid" => cfg.c_mid = value.parse().map_err(|_| bad())?,
                "fo_weights" => cfg.fo.weights.profile = parse_weight_profile(value)?,
                "fo_norm" => cfg.fo.weights.norm = parse_mask_norm(value)?,
                "fo_apply" => cfg.fo.application = parse_fo_application(value)?,
                "lambda" => cfg.fa.lambda_fa = value.parse().map_err(|_| bad())?,
                "fa_mode" => cfg.fa.apply_mode = parse_fa_mode(value)?,
                "threads" => cfg.threads = Some(value.parse().map_err(|_| bad())?),
                _ => return Err(FarError::Argument(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        cfg.fa.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// `FAR_THREADS` if set, else `requested`, else rayon's default.
pub fn resolve_threads(requested: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| FarError::Argument(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(requested.filter(|&n| n > 0)),
    }
}

/// Runs `job` on a pool of `threads` workers (or the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| FarError::Resource(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

pub fn exit_code(e: &FarError) -> i32 {
    match e {
        FarError::Shape(_) => 3,
        FarError::Argument(_) | FarError::Spec(_) | FarError::Format(_) | FarError::Resource(_) => 2,
        FarError::Io(io) if io.kind() == io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn report(e: &FarError) -> i32 {
    eprintln!("far: {e}");
    exit_code(e)
}

/// Everything `run` produces, kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub plan: SamplePlan,
    pub features: RTensor,
    pub fo: RTensor,
    pub fa: RTensor,
    pub fused: RTensor,
    pub mask: crate::tensor::DynamicMask,
    pub labels: Option<RegionLabelMap>,
}

fn load_clip(source: &RunSource, seed: u64) -> Result<(RTensor, Option<RegionLabelMap>)> {
    match source {
        RunSource::Scene(name) if name == BUILTIN_DEMO => {
            let (clip, labels) = generate(&SceneSpec::demo(seed))?;
            Ok((clip, Some(labels)))
        }
        RunSource::Scene(path) => {
            let spec = SceneSpec::parse(&fs::read_to_string(path)?)?;
            let (clip, labels) = generate(&spec)?;
            Ok((clip, Some(labels)))
        }
        RunSource::Tensor(path) => Ok((read_ftf(path)?.into_real()?, None)),
    }
}

fn select_frames(clip: &RTensor, frames: &[usize]) -> Result<RTensor> {
    let s = clip.shape4()?;
    let plane = s.hw();
    let mut data = Vec::with_capacity(s.c * frames.len() * plane);
    for c in 0..s.c {
        for &t in frames {
            let start = s.index(c, t, 0, 0);
            data.extend_from_slice(&clip.data()[start..start + plane]);
        }
    }
    RTensor::from_vec(Shape4::new(s.c, frames.len(), s.h, s.w)?, data)
}

/// Executes the pipeline without touching the filesystem (except to read
/// the input).
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutputs> {
    let source = cfg
        .source
        .as_ref()
        .ok_or_else(|| FarError::Argument("no input: pass --scene or --input".into()))?;
    let (clip, labels) = load_clip(source, cfg.seed)?;
    let s = clip.shape4()?;
    let plan = plan_samples(s.t, cfg.frames, cfg.seed)?;
    let sampled = select_frames(&clip, &plan.indices)?;

    let stem = StemConfig::seeded(cfg.c_mid, cfg.seed);
    let features = stem_forward(&sampled, &stem)?;
    let fs = features.shape4()?;

    let (fo, fa) = rayon::join(
        || disentangle_with_mask(&features, &cfg.fo),
        || fourier_attention(&features, &cfg.fa),
    );
    let (fo, fa) = (fo?, fa?);
    let fused = fo.features.add(&fa)?;

    let labels = labels.map(|l| {
        let (st, sh, sw) = stem
            .strides
            .iter()
            .fold((1, 1, 1), |acc, s| (acc.0 * s.0, acc.1 * s.1, acc.2 * s.2));
        let frames: Vec<usize> = (0..fs.t).map(|t| plan.indices[t * st]).collect();
        l.subsample(&frames, sh, sw, fs.h, fs.w)
    });

    Ok(RunOutputs {
        plan,
        features,
        fo: fo.features,
        fa,
        fused,
        mask: fo.mask,
        labels,
    })
}

fn mean_abs(t: &RTensor) -> f64 {
    t.data().iter().map(|v| v.abs()).sum::<f64>() / t.len() as f64
}

/// Per-region (and overall) mean magnitudes of each pipeline stage.
pub fn stats_csv(out: &RunOutputs) -> Result<String> {
    let delta = out.fa.sub(&out.features)?;
    let stages = [&out.features, &out.fo, &delta, &out.fused];
    let mut s = format!("{STATS_CSV_HEADER}\n");
    if let Some(labels) = &out.labels {
        let means: Vec<_> = stages
            .iter()
            .map(|t| region_mean_amplitudes(t, labels))
            .collect::<Result<_>>()?;
        for kind in RegionKind::ORDER {
            let cells = labels.labels.iter().filter(|&&k| k == kind).count();
            if cells == 0 {
                continue;
            }
            write!(s, "{kind},{cells}").unwrap();
            for m in &means {
                write!(s, ",{:e}", m[&kind]).unwrap();
            }
            s.push('\n');
        }
    }
    let cells = out.features.shape4()?.thw();
    write!(s, "all,{cells}").unwrap();
    for t in stages {
        write!(s, ",{:e}", mean_abs(t)).unwrap();
    }
    s.push('\n');
    Ok(s)
}

/// Writes `run.cfg`, `features.ftf`, `mask.ftf`, `mask_cNN.pgm`,
/// `samples.csv` and `stats.csv` into `dir`.
pub fn write_run_outputs(cfg: &RunConfig, out: &RunOutputs, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("run.cfg"), cfg.to_text())?;
    write_ftf(out.fused.clone(), dir.join("features.ftf"))?;
    write_ftf(out.mask.to_tensor(), dir.join("mask.ftf"))?;
    let (_, h, w) = out.mask.dims();
    for (c, img) in mask_heatmaps(&out.mask).iter().enumerate() {
        write_pgm(dir.join(format!("mask_c{c:02}.pgm")), w, h, img)?;
    }
    fs::write(
        dir.join("samples.csv"),
        format!("{SAMPLE_CSV_HEADER}\n{}\n", out.plan.csv_row()),
    )?;
    fs::write(dir.join("stats.csv"), stats_csv(out)?)?;
    Ok(())
}

/// Makes file sources absolute so `run.cfg` works from any directory.
fn absolute_source(source: RunSource) -> RunSource {
    match source {
        RunSource::Scene(p) if p != BUILTIN_DEMO => match fs::canonicalize(&p) {
            Ok(abs) => RunSource::Scene(abs.display().to_string()),
            Err(_) => RunSource::Scene(p),
        },
        RunSource::Tensor(p) => RunSource::Tensor(fs::canonicalize(&p).unwrap_or(p)),
        other => other,
    }
}

pub fn cmd_run(cfg: &RunConfig) -> i32 {
    let result = resolve_threads(cfg.threads).and_then(|threads| {
        let cfg = RunConfig {
            source: cfg.source.clone().map(absolute_source),
            threads,
            ..cfg.clone()
        };
        let out = with_threads(threads, || run_pipeline(&cfg))??;
        write_run_outputs(&cfg, &out, &cfg.out)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            println!(
                "wrote {} (features {}, frames {:?})",
                cfg.out.display(),
                out.fused.shape(),
                out.plan.indices
            );
            0
        }
        Err(e) => report(&e),
    }
}

pub fn cmd_check(suite: &str, threads: Option<usize>) -> i32 {
    cmd_check_with(suite, threads, &CheckContext::default())
}

/// [`cmd_check`] with an explicit context, so tests can inject a faulty
/// transform.
pub fn cmd_check_with(suite: &str, threads: Option<usize>, ctx: &CheckContext) -> i32 {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return report(&e),
    };
    let threads = match resolve_threads(threads) {
        Ok(t) => t,
        Err(e) => return report(&e),
    };
    let report = match with_threads(threads, || run_suite(suite, ctx)) {
        Ok(r) => r,
        Err(e) => return self::report(&e),
    };
    println!("{report}");
    if report.passed() {
        0
    } else {
        for l in report.failures() {
            eprintln!("far: invariant {}/{} failed ({:e} >= {:e})", l.suite, l.invariant, l.measured, l.bound);
        }
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchArgs {
    pub ops: Vec<SweepOp>,
    pub sizes: Vec<usize>,
    pub channels: usize,
    pub reps: usize,
    pub mid_shape: Shape4,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Default for BenchArgs {
    fn default() -> Self {
        Self {
            ops: vec![SweepOp::Fa, SweepOp::Sa, SweepOp::Fo],
            sizes: vec![64, 128, 256, 512, 1024],
            channels: 8,
            reps: 5,
            mid_shape: Shape4 { c: DEFAULT_C_MID, t: 4, h: 135, w: 135 },
            out: PathBuf::from("far-bench"),
            threads: None,
        }
    }
}

/// Table 3 compute delta between the backbone with and without FAR, GFLOPs.
pub const REFERENCE_OVERHEAD_GFLOPS: f64 = 14.41 - 14.39;

pub fn cmd_bench(args: &BenchArgs) -> i32 {
    let run = || -> Result<String> {
        let threads = resolve_threads(args.threads)?;
        let mut timings = Vec::new();
        let mut flops = Vec::new();
        let mut summary = String::new();
        for &op in &args.ops {
            let r = with_threads(threads, || complexity_sweep(op, &args.sizes, args.channels, args.reps))??;
            writeln!(summary, "{:<3} log-log time slope {:.3}", op.name(), r.time_slope()).unwrap();
            timings.extend(r.timings);
            flops.extend(r.flops);
        }
        let ratio_shape = Shape4::new(16, 8, 1, 512)?;
        let ratio = sa_flops(ratio_shape).total() / fa_flops(ratio_shape).total();
        writeln!(summary, "FLOP ratio sa/fa at C=16, THW=4096: {ratio:.3}").unwrap();
        let overhead = far_overhead_estimate(args.mid_shape);
        writeln!(
            summary,
            "FO+FA overhead at {}: {:.4} GFLOPs ({:.1}x the {:.2} GFLOPs reference delta)",
            args.mid_shape,
            overhead.gflops(),
            overhead.gflops() / REFERENCE_OVERHEAD_GFLOPS,
            REFERENCE_OVERHEAD_GFLOPS
        )
        .unwrap();
        flops.push(overhead);
        fs::create_dir_all(&args.out)?;
        fs::write(args.out.join("flops.csv"), flops_csv(&flops))?;
        fs::write(args.out.join("timing.csv"), timing_csv(&timings))?;
        Ok(summary)
    };
    match run() {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => report(&e),
    }
}

pub fn cmd_sample(total: usize, want: usize, seed: u64) -> i32 {
    match plan_samples(total, want, seed) {
        Ok(p) => {
            println!("{SAMPLE_CSV_HEADER}\n{}", p.csv_row());
            0
        }
        Err(e) => report(&e),
    }
}

/// Default FA weight, re-exported for flag help text.
pub const DEFAULT_LAMBDA_FA: f64 = DEFAULT_LAMBDA;

/// Helper for flag parsing: `c,t,h,w`.
pub fn parse_shape4(s: &str) -> Result<Shape4> {
    let d: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| FarError::Argument(format!("bad extent in {s:?}"))))
        .collect::<Result<_>>()?;
    match d[..] {
        [c, t, h, w] => Shape4::new(c, t, h, w),
        _ => Err(FarError::Argument(format!("expected c,t,h,w, got {s:?}"))),
    }
}

/// Weight mode from the two flag values.
pub fn weight_mode(profile: &str, norm: &str) -> Result<FreqWeightMode> {
    Ok(FreqWeightMode {
        profile: parse_weight_profile(profile)?,
        norm: parse_mask_norm(norm)?,
    })
}
