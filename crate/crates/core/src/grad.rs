//! Hand-derived vector-Jacobian products and a finite-difference checker.
//!
//! FO, strict application, L2 mask. Per `(c, h, w)` line `x` with spectrum
//! `F` and upstream `u`, the output is `x * M` with `M = sum_k w_k |F_k|^2`,
//! so
//!
//! ```text
//! dM/dx = 2 T Re(ifft(w * F))
//! vjp   = u * M + (sum_t u_t x_t) * dM/dx
//! ```
//!
//! FA. With `r` the circular autocorrelation of a channel matrix `a` and `g`
//! a real cotangent on `r`, `d<g, r>/da = Re(ifft2(A * 2 Re(G)))`: the
//! correlation term contributes `A conj(G)` and the convolution term `A G`.
//! Text mode (`f + l f r`) and literal mode (`f + l r`) then follow by the
//! product rule.
//!
//! Adjoints of the linear transforms, with unnormalized forward and `1/N`
//! inverse: the time-axis FFT's adjoint is `T * ifft`, the 2-D FFT's is
//! `T HW * ifft2`, and the 2-D inverse's is `fft2 / (T HW)`.

use crate::error::{FarError, Result};
use crate::fa::{spacetime_autocorrelation, FaApplyMode, FaConfig};
use crate::fft::{fft2_channels, fft2_spacetime, fft_time_axis, fft_time_axis_complex, ifft2_spacetime, Direction};
use crate::fo::{compute_mask, disentangle, frequency_weights, FoConfig, FreqWeightMode, MaskNorm};
use crate::rng::SeededRng;
use crate::tensor::{make_tensor, CTensor, FillSpec, RTensor, Shape4};
use crate::Complex64;

/// Probe directions used by [`fd_check`].
pub const FD_DIRECTIONS: usize = 16;

pub const REPORT_CSV_HEADER: &str = "op,shape,samples,fd_epsilon,max_rel_err";

fn same_shape(f: &RTensor, upstream: &RTensor) -> Result<Shape4> {
    if f.shape() != upstream.shape() {
        return Err(FarError::shape(format!(
            "upstream {} does not match input {}",
            upstream.shape(),
            f.shape()
        )));
    }
    f.shape4()
}

/// VJP of `f -> f * M(f)` (strict application, L2 mask).
pub fn vjp_disentangle(f: &RTensor, mode: FreqWeightMode, upstream: &RTensor) -> Result<RTensor> {
    if mode.norm == MaskNorm::L1 {
        return Err(FarError::Unsupported(
            "the L1 mask is not differentiable at zero; use L2".into(),
        ));
    }
    let s = same_shape(f, upstream)?;
    let mask = compute_mask(f, mode)?;
    let weights = frequency_weights(s.t, mode);
    let spectrum = fft_time_axis(f)?;
    let hw = s.hw();
    let weighted: Vec<Complex64> = spectrum
        .data()
        .iter()
        .enumerate()
        .map(|(i, z)| z * weights[(i / hw) % s.t])
        .collect();
    let dmask = fft_time_axis_complex(&CTensor::from_vec(s, weighted)?, Direction::Inverse)?;

    let (x, u) = (f.data(), upstream.data());
    let mut grad = vec![0.0; s.numel()];
    for c in 0..s.c {
        for q in 0..hw {
            let line = |t: usize| (c * s.t + t) * hw + q;
            let m = mask.data()[c * hw + q];
            let dot: f64 = (0..s.t).map(|t| u[line(t)] * x[line(t)]).sum();
            for t in 0..s.t {
                let i = line(t);
                grad[i] = u[i] * m + dot * 2.0 * s.t as f64 * dmask.data()[i].re;
            }
        }
    }
    RTensor::from_vec(s, grad)
}

/// `d<g, r(f)>/df` for the per-channel circular autocorrelation `r`.
fn autocorrelation_vjp(f: &RTensor, g: &RTensor) -> Result<RTensor> {
    let s = f.shape4()?;
    let a = fft2_spacetime(f)?;
    let gs = fft2_spacetime(g)?;
    let prod: Vec<Complex64> = a
        .data()
        .iter()
        .zip(gs.data())
        .map(|(za, zg)| za * (2.0 * zg.re))
        .collect();
    let back = ifft2_spacetime(&CTensor::from_vec(a.shape().clone(), prod)?)?;
    back.real_part().reshape(s)
}

pub fn vjp_fourier_attention(f: &RTensor, cfg: &FaConfig, upstream: &RTensor) -> Result<RTensor> {
    cfg.validate()?;
    same_shape(f, upstream)?;
    let l = cfg.lambda_fa;
    if l == 0.0 {
        return Ok(upstream.clone());
    }
    match cfg.apply_mode {
        FaApplyMode::TextMode => {
            let (r, _) = spacetime_autocorrelation(f)?;
            let direct = upstream.add(&upstream.mul(&r)?.scale(l)?)?;
            let through_r = autocorrelation_vjp(f, &upstream.mul(f)?.scale(l)?)?;
            direct.add(&through_r)
        }
        FaApplyMode::Eq7Literal => upstream.add(&autocorrelation_vjp(f, &upstream.scale(l)?)?),
    }
}

/// `Re(fft_t(f))`, a purely linear probe of the transform plumbing.
pub fn linear_spectrum_probe(f: &RTensor) -> Result<RTensor> {
    Ok(fft_time_axis(f)?.real_part())
}

pub fn vjp_linear_spectrum_probe(f: &RTensor, upstream: &RTensor) -> Result<RTensor> {
    let s = same_shape(f, upstream)?;
    let back = fft_time_axis_complex(&CTensor::from_real(upstream), Direction::Inverse)?;
    back.real_part().scale(s.t as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradOp {
    DisentangleL2(FreqWeightMode),
    FourierAttention(FaConfig),
    LinearSpectrum,
}

impl GradOp {
    pub fn name(&self) -> &'static str {
        match self {
            GradOp::DisentangleL2(_) => "disentangle-l2",
            GradOp::FourierAttention(c) if c.apply_mode == FaApplyMode::Eq7Literal => "fourier-attention-eq7",
            GradOp::FourierAttention(_) => "fourier-attention",
            GradOp::LinearSpectrum => "linear-spectrum",
        }
    }

    pub fn forward(&self, f: &RTensor) -> Result<RTensor> {
        match self {
            GradOp::DisentangleL2(mode) => disentangle(
                f,
                &FoConfig {
                    weights: *mode,
                    ..FoConfig::default()
                },
            ),
            GradOp::FourierAttention(cfg) => crate::fa::fourier_attention(f, cfg),
            GradOp::LinearSpectrum => linear_spectrum_probe(f),
        }
    }

    pub fn vjp(&self, f: &RTensor, upstream: &RTensor) -> Result<RTensor> {
        match self {
            GradOp::DisentangleL2(mode) => vjp_disentangle(f, *mode, upstream),
            GradOp::FourierAttention(cfg) => vjp_fourier_attention(f, cfg, upstream),
            GradOp::LinearSpectrum => vjp_linear_spectrum_probe(f, upstream),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VjpCheckReport {
    pub op_name: String,
    pub input_shape: Shape4,
    /// Largest entry of `probe_errors`.
    pub max_rel_err: f64,
    pub fd_epsilon: f64,
    pub samples: usize,
    pub probe_errors: Vec<f64>,
}

impl VjpCheckReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e}",
            self.op_name, self.input_shape, self.samples, self.fd_epsilon, self.max_rel_err
        )
    }
}

pub fn reports_csv(reports: &[VjpCheckReport]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        out += &r.csv_row();
        out.push('\n');
    }
    out
}

/// `|a - b| / max(|a|, |b|, 1e-12)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn dot(a: &RTensor, b: &RTensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn unit_direction(rng: &mut SeededRng, shape: Shape4) -> Result<RTensor> {
    let mut d: Vec<f64> = (0..shape.numel()).map(|_| rng.normal()).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    d.iter_mut().for_each(|v| *v /= norm);
    RTensor::from_vec(shape, d)
}

/// Compares `<vjp(f, u), d>` against the central difference
/// `(<u, op(f + eps d)> - <u, op(f - eps d)>) / (2 eps)` along
/// [`FD_DIRECTIONS`] random unit directions. `f` and `u` are uniform in
/// `[-1, 1)`, drawn from `seed` and `seed + 1`.
pub fn fd_check(op: GradOp, shape: Shape4, seed: u64, eps: f64) -> Result<VjpCheckReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(FarError::Argument(format!("eps must be positive, got {eps}")));
    }
    let uniform = |seed| FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed };
    let f = make_tensor(shape, uniform(seed))?;
    let u = make_tensor(shape, uniform(seed.wrapping_add(1)))?;
    let grad = op.vjp(&f, &u)?;
    let mut rng = SeededRng::new(seed.wrapping_add(2));
    let mut probe_errors = Vec::with_capacity(FD_DIRECTIONS);
    for _ in 0..FD_DIRECTIONS {
        let d = unit_direction(&mut rng, shape)?;
        let step = d.scale(eps)?;
        let plus = dot(&u, &op.forward(&f.add(&step)?)?);
        let minus = dot(&u, &op.forward(&f.sub(&step)?)?);
        let fd = (plus - minus) / (2.0 * eps);
        probe_errors.push(relative_error(dot(&grad, &d), fd));
    }
    Ok(VjpCheckReport {
        op_name: op.name().to_string(),
        input_shape: shape,
        max_rel_err: probe_errors.iter().copied().fold(0.0, f64::max),
        fd_epsilon: eps,
        samples: FD_DIRECTIONS,
        probe_errors,
    })
}

/// The linear transforms whose adjoints the VJPs rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearTransform {
    FftTimeAxis,
    Fft2,
    Ifft2,
}

impl LinearTransform {
    pub const ALL: [LinearTransform; 3] = [Self::FftTimeAxis, Self::Fft2, Self::Ifft2];

    pub fn name(self) -> &'static str {
        match self {
            Self::FftTimeAxis => "fft_time_axis",
            Self::Fft2 => "fft2",
            Self::Ifft2 => "ifft2",
        }
    }

    fn apply(self, x: &CTensor) -> Result<CTensor> {
        match self {
            Self::FftTimeAxis => fft_time_axis_complex(x, Direction::Forward),
            Self::Fft2 => fft2_channels(x, Direction::Forward),
            Self::Ifft2 => fft2_channels(x, Direction::Inverse),
        }
    }

    fn adjoint(self, y: &CTensor, s: Shape4) -> Result<CTensor> {
        let (out, factor) = match self {
            Self::FftTimeAxis => (fft_time_axis_complex(y, Direction::Inverse)?, s.t as f64),
            Self::Fft2 => (fft2_channels(y, Direction::Inverse)?, s.thw() as f64),
            Self::Ifft2 => (fft2_channels(y, Direction::Forward)?, 1.0 / s.thw() as f64),
        };
        let data = out.into_data().into_iter().map(|z| z * factor).collect();
        CTensor::from_vec(s, data)
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn random_complex(rng: &mut SeededRng, s: Shape4) -> Result<CTensor> {
    let data = (0..s.numel())
        .map(|_| Complex64::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)))
        .collect();
    CTensor::from_vec(s, data)
}

/// `|<A x, y> - <x, A^H y>| / max(|<A x, y>|, 1)` for random complex `x, y`.
pub fn adjoint_identity_error(op: LinearTransform, shape: Shape4, seed: u64) -> Result<f64> {
    let mut rng = SeededRng::new(seed);
    let x = random_complex(&mut rng, shape)?;
    let y = random_complex(&mut rng, shape)?;
    let lhs = cdot(op.apply(&x)?.data(), y.data());
    let rhs = cdot(x.data(), op.adjoint(&y, shape)?.data());
    Ok((lhs - rhs).norm() / lhs.norm().max(1.0))
}
