//! Self-checks behind `far check`: oracle comparisons and invariants for the
//! transforms, the two operators and their gradients.
//!
//! Every line measures one quantity and passes when it is finite and below
//! its bound. The 1-D transform is taken from [`CheckContext`], so a test can
//! swap in a deliberately broken implementation and watch the right lines
//! fail.

use std::fmt;
use std::str::FromStr;

use crate::error::{FarError, Result};
use crate::fa::{fourier_attention, spacetime_autocorrelation, FaApplyMode, FaConfig};
use crate::fft::{circular_autocorr_oracle, circular_autocorr_spectral, dft_oracle, fft1d, max_abs_diff, Direction};
use crate::fo::{compute_mask, frequency_weights, FreqWeightMode, MaskNorm, WeightProfile};
use crate::grad::{adjoint_identity_error, fd_check, GradOp, LinearTransform};
use crate::rng::SeededRng;
use crate::tensor::{make_tensor, FillSpec, RTensor, Shape4};
use crate::Complex64;

pub type Transform1d = fn(&[Complex64], Direction) -> Result<Vec<Complex64>>;

#[derive(Debug, Clone, Copy)]
pub struct CheckContext {
    pub fft1d: Transform1d,
    /// Random inputs per randomized check.
    pub seeds: u64,
}

impl Default for CheckContext {
    fn default() -> Self {
        Self { fft1d, seeds: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fft,
    Fo,
    Fa,
    Grad,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Fft => "fft",
            Suite::Fo => "fo",
            Suite::Fa => "fa",
            Suite::Grad => "grad",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = FarError;

    fn from_str(s: &str) -> Result<Self> {
        [Suite::Fft, Suite::Fo, Suite::Fa, Suite::Grad, Suite::All]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| FarError::Argument(format!("unknown suite {s:?} (expected fft, fo, fa, grad or all)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub suite: &'static str,
    pub invariant: &'static str,
    pub measured: f64,
    pub bound: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured < self.bound
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(CheckLine::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.lines.iter().filter(|l| !l.passed())
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:<28} {:>11} {:>9}  status", "suite", "invariant", "measured", "bound")?;
        for l in &self.lines {
            writeln!(
                f,
                "{:<6} {:<28} {:>11.3e} {:>9.0e}  {}",
                l.suite,
                l.invariant,
                l.measured,
                l.bound,
                if l.passed() { "ok" } else { "FAIL" }
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.lines.len(), failed)
    }
}

struct Lines<'a> {
    suite: &'static str,
    out: &'a mut Vec<CheckLine>,
}

impl Lines<'_> {
    /// Records `measure()`; an error counts as an infinite measurement.
    fn push(&mut self, invariant: &'static str, bound: f64, measure: impl FnOnce() -> Result<f64>) {
        let measured = measure().unwrap_or(f64::INFINITY);
        self.out.push(CheckLine {
            suite: self.suite,
            invariant,
            measured,
            bound,
        });
    }
}

pub fn run_suite(suite: Suite, ctx: &CheckContext) -> CheckReport {
    let mut lines = Vec::new();
    let suites: &[Suite] = match suite {
        Suite::All => &[Suite::Fft, Suite::Fo, Suite::Fa, Suite::Grad],
        _ => std::slice::from_ref(&suite),
    };
    for &s in suites {
        let mut l = Lines { suite: s.name(), out: &mut lines };
        match s {
            Suite::Fft => fft_suite(&mut l, ctx),
            Suite::Fo => fo_suite(&mut l, ctx),
            Suite::Fa => fa_suite(&mut l, ctx),
            Suite::Grad => grad_suite(&mut l, ctx),
            Suite::All => unreachable!(),
        }
    }
    CheckReport { lines }
}

fn random_complex(rng: &mut SeededRng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)))
        .collect()
}

fn random_tensor(shape: Shape4, seed: u64) -> Result<RTensor> {
    make_tensor(shape, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed })
}

fn max_abs(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

const TRANSFORM_LENGTHS: [usize; 10] = [1, 2, 3, 7, 64, 97, 1000, 1024, 4093, 4096];

fn fft_suite(l: &mut Lines, ctx: &CheckContext) {
    let fft = ctx.fft1d;
    l.push("oracle_equivalence", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in 1..=64 {
            for seed in 0..ctx.seeds {
                let x = random_complex(&mut SeededRng::new(seed), n);
                for dir in [Direction::Forward, Direction::Inverse] {
                    worst = worst.max(max_abs_diff(&fft(&x, dir)?, &dft_oracle(&x, dir)?));
                }
            }
        }
        Ok(worst)
    });
    l.push("inversion", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in TRANSFORM_LENGTHS {
            let x = random_complex(&mut SeededRng::new(n as u64), n);
            let back = fft(&fft(&x, Direction::Forward)?, Direction::Inverse)?;
            worst = worst.max(max_abs_diff(&back, &x) / max_abs(&x));
        }
        Ok(worst)
    });
    l.push("parseval", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in TRANSFORM_LENGTHS {
            let x = random_complex(&mut SeededRng::new(n as u64 + 1), n);
            let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let freq: f64 = fft(&x, Direction::Forward)?.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            worst = worst.max((time - freq).abs() / time);
        }
        Ok(worst)
    });
    l.push("conjugate_symmetry", 1e-12, || {
        let mut worst: f64 = 0.0;
        for n in TRANSFORM_LENGTHS {
            let mut rng = SeededRng::new(n as u64 + 2);
            let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.uniform_in(-1.0, 1.0), 0.0)).collect();
            let s = fft(&x, Direction::Forward)?;
            let err = (0..n).map(|k| (s[k] - s[(n - k) % n].conj()).norm()).fold(0.0, f64::max);
            worst = worst.max(err / max_abs(&s));
        }
        Ok(worst)
    });
    let matrices = || (1..=8).flat_map(|r| (1..=12).map(move |c| (r, c)));
    l.push("wiener_khinchin", 1e-9, || {
        let mut worst: f64 = 0.0;
        for (rows, cols) in matrices() {
            let a = make_tensor_2d(rows, cols, (rows * 100 + cols) as u64)?;
            let spectral = circular_autocorr_spectral(&a)?.real_part();
            let oracle = circular_autocorr_oracle(&a)?;
            worst = worst.max(max_real_diff(&spectral, &oracle));
        }
        Ok(worst)
    });
    l.push("autocorr_imag_residue", 1e-10, || {
        let mut worst: f64 = 0.0;
        for (rows, cols) in matrices() {
            let a = make_tensor_2d(rows, cols, (rows * 100 + cols) as u64)?;
            worst = worst.max(circular_autocorr_spectral(&a)?.max_abs_imag());
        }
        Ok(worst)
    });
}

fn make_tensor_2d(rows: usize, cols: usize, seed: u64) -> Result<RTensor> {
    let mut rng = SeededRng::new(seed);
    let data = (0..rows * cols).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    RTensor::from_vec(crate::tensor::Shape::new(&[rows, cols])?, data)
}

fn max_real_diff(a: &RTensor, b: &RTensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Mask computed line by line with the O(T^2) transform.
fn naive_mask(f: &RTensor, mode: FreqWeightMode) -> Result<Vec<f64>> {
    let s = f.shape4()?;
    let w = frequency_weights(s.t, mode);
    let mut out = Vec::with_capacity(s.c * s.hw());
    for c in 0..s.c {
        for h in 0..s.h {
            for ww in 0..s.w {
                let line: Vec<Complex64> = (0..s.t)
                    .map(|t| Complex64::new(f.data()[s.index(c, t, h, ww)], 0.0))
                    .collect();
                let spec = dft_oracle(&line, Direction::Forward)?;
                out.push(
                    spec.iter()
                        .zip(&w)
                        .map(|(z, &wk)| match mode.norm {
                            MaskNorm::L2 => z.norm_sqr() * wk,
                            MaskNorm::L1 => z.norm() * wk.sqrt(),
                        })
                        .sum(),
                );
            }
        }
    }
    Ok(out)
}

fn fo_modes() -> [FreqWeightMode; 4] {
    let mut modes = [FreqWeightMode::default(); 4];
    for (i, m) in modes.iter_mut().enumerate() {
        m.profile = if i % 2 == 0 { WeightProfile::Quadratic } else { WeightProfile::PaperLiteral };
        m.norm = if i < 2 { MaskNorm::L2 } else { MaskNorm::L1 };
    }
    modes
}

fn fo_suite(l: &mut Lines, ctx: &CheckContext) {
    l.push("static_annihilation", 1e-12, || {
        let mut worst: f64 = 0.0;
        for seed in 0..ctx.seeds {
            let frame = random_tensor(Shape4::new(3, 1, 5, 5)?, seed)?;
            let mut data = Vec::new();
            for c in 0..3 {
                for _ in 0..8 {
                    data.extend_from_slice(&frame.data()[c * 25..(c + 1) * 25]);
                }
            }
            let f = RTensor::from_vec(Shape4::new(3, 8, 5, 5)?, data)?;
            for mode in fo_modes() {
                worst = worst.max(compute_mask(&f, mode)?.data().iter().copied().fold(0.0, f64::max));
            }
        }
        Ok(worst)
    });
    l.push("mask_oracle", 1e-9, || {
        let mut worst: f64 = 0.0;
        for seed in 0..ctx.seeds {
            let mut rng = SeededRng::new(seed);
            let dims = [1 + rng.below(3), 1 + rng.below(8), 1 + rng.below(5), 1 + rng.below(5)].map(|d| d as usize);
            let f = random_tensor(Shape4::new(dims[0], dims[1], dims[2], dims[3])?, seed)?;
            for mode in fo_modes() {
                let got = compute_mask(&f, mode)?;
                let want = naive_mask(&f, mode)?;
                let err = got.data().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
            }
        }
        Ok(worst)
    });
    l.push("mask_nonnegative", 0.5, || {
        let mut negatives = 0usize;
        for seed in 0..ctx.seeds {
            let f = random_tensor(Shape4::new(2, 7, 4, 3)?, seed)?;
            for mode in fo_modes() {
                negatives += compute_mask(&f, mode)?.data().iter().filter(|&&m| m < 0.0).count();
            }
        }
        Ok(negatives as f64)
    });
    l.push("time_shift_invariance", 1e-9, || {
        let mut worst: f64 = 0.0;
        for seed in 0..ctx.seeds {
            let f = random_tensor(Shape4::new(2, 8, 3, 3)?, seed)?;
            let rolled = f.roll_spacetime(1 + seed as usize % 7, 0)?;
            let a = compute_mask(&f, FreqWeightMode::default())?;
            let b = compute_mask(&rolled, FreqWeightMode::default())?;
            let scale = a.data().iter().copied().fold(1e-300, f64::max);
            let err = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(err / scale);
        }
        Ok(worst)
    });
    l.push("nyquist_closed_form", 1e-12, || {
        let t = 8;
        let line: Vec<f64> = (0..t).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = RTensor::from_vec(Shape4::new(1, t, 1, 1)?, line)?;
        let got = compute_mask(&f, FreqWeightMode::default())?.data()[0];
        let want = crate::fo::nyquist_tone_energy(t) * frequency_weights(t, FreqWeightMode::default())[t / 2];
        Ok((got - want).abs() / want)
    });
}

fn fa_suite(l: &mut Lines, ctx: &CheckContext) {
    let shapes = [(1, 4, 2, 3), (2, 3, 3, 2), (3, 8, 2, 2), (2, 5, 1, 7)];
    let inputs = || -> Result<Vec<RTensor>> {
        let mut v = Vec::new();
        for seed in 0..ctx.seeds {
            let (c, t, h, w) = shapes[seed as usize % shapes.len()];
            v.push(random_tensor(Shape4::new(c, t, h, w)?, seed)?);
        }
        Ok(v)
    };
    l.push("lambda_zero_identity", f64::MIN_POSITIVE, || {
        let mut worst: f64 = 0.0;
        for f in inputs()? {
            for mode in [FaApplyMode::TextMode, FaApplyMode::Eq7Literal] {
                let out = fourier_attention(&f, &FaConfig::new(0.0, mode)?)?;
                worst = worst.max(max_real_diff(&out, &f));
            }
        }
        Ok(worst)
    });
    l.push("lambda_linearity", 1e-12, || {
        let mut worst: f64 = 0.0;
        for f in inputs()? {
            let base = fourier_attention(&f, &FaConfig::new(1.0, FaApplyMode::TextMode)?)?.sub(&f)?;
            let scale = base.max_abs().max(1e-300);
            for lambda in [0.01, 0.25, 3.0] {
                let delta = fourier_attention(&f, &FaConfig::new(lambda, FaApplyMode::TextMode)?)?.sub(&f)?;
                worst = worst.max(max_real_diff(&delta, &base.scale(lambda)?) / (lambda * scale));
            }
        }
        Ok(worst)
    });
    l.push("autocorr_oracle", 1e-9, || {
        let mut worst: f64 = 0.0;
        for f in inputs()? {
            let s = f.shape4()?;
            let (r, _) = spacetime_autocorrelation(&f)?;
            for c in 0..s.c {
                let chan = &f.data()[c * s.thw()..(c + 1) * s.thw()];
                let m = RTensor::from_vec(crate::tensor::Shape::new(&[s.t, s.hw()])?, chan.to_vec())?;
                let oracle = circular_autocorr_oracle(&m)?;
                let got = &r.data()[c * s.thw()..(c + 1) * s.thw()];
                let err = got.iter().zip(oracle.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
            }
        }
        Ok(worst)
    });
    l.push("peak_at_zero_lag", 1e-12, || {
        let mut worst: f64 = 0.0;
        for f in inputs()? {
            let s = f.shape4()?;
            let (r, _) = spacetime_autocorrelation(&f)?;
            for chan in r.data().chunks(s.thw()) {
                let peak = chan.iter().map(|v| v.abs()).fold(0.0, f64::max);
                worst = worst.max((peak - chan[0]) / chan[0]);
            }
        }
        Ok(worst)
    });
    l.push("imag_residue", 1e-10, || {
        let mut worst: f64 = 0.0;
        for f in inputs()? {
            worst = worst.max(spacetime_autocorrelation(&f)?.1);
        }
        Ok(worst)
    });
}

fn grad_suite(l: &mut Lines, ctx: &CheckContext) {
    for (op, name) in [
        (LinearTransform::FftTimeAxis, "adjoint_fft_time_axis"),
        (LinearTransform::Fft2, "adjoint_fft2"),
        (LinearTransform::Ifft2, "adjoint_ifft2"),
    ] {
        l.push(name, 1e-10, || {
            let mut worst: f64 = 0.0;
            for seed in 0..ctx.seeds {
                let shape = Shape4::new(1 + seed as usize % 3, 1 + seed as usize % 8, 3, 1 + seed as usize % 4)?;
                worst = worst.max(adjoint_identity_error(op, shape, seed)?);
            }
            Ok(worst)
        });
    }
    let fd_worst = |op: GradOp, eps: f64| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for seed in 0..ctx.seeds {
            let shape = Shape4::new(1 + seed as usize % 2, 2 + seed as usize % 4, 2, 1 + seed as usize % 3)?;
            worst = worst.max(fd_check(op, shape, seed, eps)?.max_rel_err);
        }
        Ok(worst)
    };
    l.push("vjp_disentangle_l2", 1e-6, || {
        fd_worst(GradOp::DisentangleL2(FreqWeightMode::default()), 1e-5)
    });
    l.push("vjp_fourier_attention", 1e-6, || {
        fd_worst(GradOp::FourierAttention(FaConfig::default()), 1e-5)
    });
    l.push("vjp_fourier_attention_eq7", 1e-6, || {
        fd_worst(GradOp::FourierAttention(FaConfig::new(0.1, FaApplyMode::Eq7Literal)?), 1e-5)
    });
    l.push("vjp_linear_probe", 1e-9, || fd_worst(GradOp::LinearSpectrum, 1e-1));
}
