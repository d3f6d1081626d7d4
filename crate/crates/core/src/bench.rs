//! FLOP models and wall-clock sweeps.
//!
//! FLOP constants: a length-`N` FFT costs `5 N log2 N`, a matrix product of
//! `m x k` by `k x n` costs `2 m n k`. Every [`FlopReport`] carries these
//! annotations so exported CSVs are self-describing.
//!
//! Timing rows report the median of `reps` runs after one discarded warm-up
//! run, together with the rayon thread count active during the sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::error::{FarError, Result};
use crate::fa::{
    fa_flops, fourier_attention, sa_flops, self_attention_dense, AttnWeightsDense, FaConfig,
    DENSE_THW_LIMIT,
};
use crate::fo::{disentangle, fo_flops, FoConfig};
use crate::tensor::{make_tensor, FillSpec, Shape4};

pub const FFT_FLOPS_PER_POINT_LOG2: f64 = 5.0;
pub const MATMUL_FLOPS_PER_MAC: f64 = 2.0;
pub const MIN_REPETITIONS: usize = 5;

pub const FLOPS_CSV_HEADER: &str = "operator,shape,term,flops";
pub const TIMING_CSV_HEADER: &str = "operator,shape,thw,repetitions,median_seconds,threads";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Transform,
    Elementwise,
    Matmul,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopTerm {
    pub name: String,
    pub kind: TermKind,
    pub flops: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub operator: String,
    pub shape: Shape4,
    pub terms: Vec<FlopTerm>,
    pub notes: Vec<String>,
}

impl FlopReport {
    pub fn new(operator: impl Into<String>, shape: Shape4) -> Self {
        Self {
            operator: operator.into(),
            shape,
            terms: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, kind: TermKind, flops: f64) {
        assert!(flops >= 0.0, "negative flop term");
        self.terms.push(FlopTerm {
            name: name.into(),
            kind,
            flops,
        });
    }

    pub fn annotate(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.flops)
    }

    pub fn by_kind(&self, kind: TermKind) -> f64 {
        self.terms.iter().filter(|t| t.kind == kind).map(|t| t.flops).sum()
    }

    pub fn total(&self) -> f64 {
        self.terms.iter().map(|t| t.flops).sum()
    }

    pub fn gflops(&self) -> f64 {
        self.total() / 1e9
    }

    /// Concatenates stage reports; term names are prefixed with the stage's
    /// operator, so the combined total is the sum of stage totals.
    pub fn combine(operator: impl Into<String>, shape: Shape4, stages: &[&FlopReport]) -> Self {
        let mut out = FlopReport::new(operator, shape);
        for stage in stages {
            for t in &stage.terms {
                out.push(format!("{}.{}", stage.operator, t.name), t.kind, t.flops);
            }
            for n in &stage.notes {
                out.annotate(format!("{}: {n}", stage.operator));
            }
        }
        out
    }

    /// One CSV line per term plus a `total` line, without header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let _ = writeln!(s, "{},{},{},{}", self.operator, self.shape, t.name, t.flops);
        }
        let _ = writeln!(s, "{},{},total,{}", self.operator, self.shape, self.total());
        s
    }
}

pub fn flops_csv(reports: &[FlopReport]) -> String {
    let mut s = format!("{FLOPS_CSV_HEADER}\n");
    for r in reports {
        s.push_str(&r.csv_rows());
    }
    s
}

/// FO followed by FA at a mid-level feature shape.
pub fn far_overhead_estimate(mid_shape: Shape4) -> FlopReport {
    FlopReport::combine("far", mid_shape, &[&fo_flops(mid_shape), &fa_flops(mid_shape)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOp {
    Fa,
    Sa,
    Fo,
}

impl SweepOp {
    pub fn name(self) -> &'static str {
        match self {
            SweepOp::Fa => "fa",
            SweepOp::Sa => "sa",
            SweepOp::Fo => "fo",
        }
    }

    pub fn flops(self, shape: Shape4) -> FlopReport {
        match self {
            SweepOp::Fa => fa_flops(shape),
            SweepOp::Sa => sa_flops(shape),
            SweepOp::Fo => fo_flops(shape),
        }
    }
}

impl std::str::FromStr for SweepOp {
    type Err = FarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fa" => Ok(SweepOp::Fa),
            "sa" => Ok(SweepOp::Sa),
            "fo" => Ok(SweepOp::Fo),
            other => Err(FarError::Argument(format!("unknown operator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub operator: String,
    pub shape: Shape4,
    pub repetitions: usize,
    pub median_seconds: f64,
    pub threads: usize,
}

impl TimingRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.9},{}",
            self.operator,
            self.shape,
            self.shape.thw(),
            self.repetitions,
            self.median_seconds,
            self.threads
        )
    }
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut s = format!("{TIMING_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub timings: Vec<TimingRow>,
    pub flops: Vec<FlopReport>,
}

impl SweepResult {
    /// Least-squares slope of `ln(median time)` against `ln(thw)`.
    pub fn time_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .timings
            .iter()
            .map(|r| (r.shape.thw() as f64, r.median_seconds))
            .collect();
        log_log_slope(&pts)
    }

    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("flops.csv"), flops_csv(&self.flops))?;
        fs::write(dir.join("timing.csv"), timing_csv(&self.timings))?;
        Ok(())
    }
}

/// Feature shape with `thw` space-time cells: up to 8 frames, one row.
pub fn sweep_shape(c: usize, thw: usize) -> Result<Shape4> {
    let t = [8, 4, 2, 1].into_iter().find(|&t| thw.is_multiple_of(t)).unwrap_or(1);
    Shape4::new(c, t, 1, thw / t)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn time_median(reps: usize, mut run: impl FnMut() -> Result<()>) -> Result<f64> {
    run()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        run()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(median(&mut samples))
}

pub fn complexity_sweep(op: SweepOp, sizes: &[usize], c: usize, reps: usize) -> Result<SweepResult> {
    if reps < MIN_REPETITIONS {
        return Err(FarError::Argument(format!(
            "at least {MIN_REPETITIONS} repetitions required, got {reps}"
        )));
    }
    if op == SweepOp::Sa {
        if let Some(&bad) = sizes.iter().find(|&&n| n > DENSE_THW_LIMIT) {
            return Err(FarError::Resource(format!(
                "dense attention sweep size {bad} exceeds {DENSE_THW_LIMIT}"
            )));
        }
    }
    let threads = rayon::current_num_threads();
    let mut timings = Vec::with_capacity(sizes.len());
    let mut flops = Vec::with_capacity(sizes.len());
    for (i, &thw) in sizes.iter().enumerate() {
        let shape = sweep_shape(c, thw)?;
        let f = make_tensor(
            shape,
            FillSpec::SeededUniform {
                lo: -1.0,
                hi: 1.0,
                seed: i as u64,
            },
        )?;
        let median_seconds = match op {
            SweepOp::Fa => {
                let cfg = FaConfig::default();
                time_median(reps, || fourier_attention(&f, &cfg).map(drop))?
            }
            SweepOp::Sa => {
                let w = AttnWeightsDense::seeded(c, 7);
                time_median(reps, || self_attention_dense(&f, &w).map(drop))?
            }
            SweepOp::Fo => {
                let cfg = FoConfig::default();
                time_median(reps, || disentangle(&f, &cfg).map(drop))?
            }
        };
        timings.push(TimingRow {
            operator: op.name().to_string(),
            shape,
            repetitions: reps,
            median_seconds,
            threads,
        });
        flops.push(op.flops(shape));
    }
    Ok(SweepResult { timings, flops })
}
