//! Fourier space-time attention, the dense self-attention it stands in for,
//! and a brute-force evaluator of the outer-product form of the former.
//!
//! Each channel of `f` is viewed as a `T' x (H'W')` matrix `a`. Its 2-D
//! spectrum `S` is multiplied by its own conjugate, giving the power
//! spectrum `|S|^2`, whose inverse transform is the circular
//! autocorrelation `r[p, q] = sum_{t, s} a[t, s] a[t + p, s + q]`. The
//! correlation is fused back into the features:
//!
//! * [`FaApplyMode::TextMode`] (default): `f + lambda * (f * r)`
//! * [`FaApplyMode::Eq7Literal`]: `f + lambda * r`

use std::f64::consts::TAU;

use crate::bench::{FlopReport, TermKind, FFT_FLOPS_PER_POINT_LOG2, MATMUL_FLOPS_PER_MAC};
use crate::error::{FarError, Result};
use crate::fft::{fft2_spacetime, ifft2_spacetime};
use crate::rng::SeededRng;
use crate::tensor::{CTensor, RTensor, Shape4};
use crate::Complex64;

pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Largest `t*h*w` for which the dense attention matrix is materialized.
pub const DENSE_THW_LIMIT: usize = 4096;

/// Largest matrix side accepted by [`lemma_fourier_attention_bruteforce`].
pub const LEMMA_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaApplyMode {
    /// Correlation multiplied elementwise with the input before fusion.
    #[default]
    TextMode,
    /// Correlation fused directly.
    Eq7Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaConfig {
    pub lambda_fa: f64,
    pub apply_mode: FaApplyMode,
}

impl Default for FaConfig {
    fn default() -> Self {
        Self {
            lambda_fa: DEFAULT_LAMBDA,
            apply_mode: FaApplyMode::TextMode,
        }
    }
}

impl FaConfig {
    pub fn new(lambda_fa: f64, apply_mode: FaApplyMode) -> Result<Self> {
        let cfg = Self {
            lambda_fa,
            apply_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_fa >= 0.0 && self.lambda_fa.is_finite()) {
            return Err(FarError::Argument(format!(
                "lambda_fa must be finite and nonnegative, got {}",
                self.lambda_fa
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FaOutput {
    pub output: RTensor,
    /// Per-channel circular autocorrelation, shaped like the input.
    pub correlation: RTensor,
    /// Largest imaginary part discarded from the inverse transform.
    pub max_imag_residue: f64,
}

/// Power spectrum `S * conj(S)` of each channel's `t x hw` matrix.
pub fn sub_attention_spectrum(f: &RTensor) -> Result<CTensor> {
    let spectrum = fft2_spacetime(f)?;
    let shape = spectrum.shape().clone();
    let data = spectrum
        .data()
        .iter()
        .map(|z| z * z.conj())
        .collect();
    CTensor::from_vec(shape, data)
}

/// Circular space-time autocorrelation of each channel, reshaped to
/// `(c, t, h, w)`, plus the discarded imaginary residue.
pub fn spacetime_autocorrelation(f: &RTensor) -> Result<(RTensor, f64)> {
    let s = f.shape4()?;
    let corr = ifft2_spacetime(&sub_attention_spectrum(f)?)?;
    let residue = corr.max_abs_imag();
    Ok((corr.real_part().reshape(s)?, residue))
}

pub fn fourier_attention_detailed(f: &RTensor, cfg: &FaConfig) -> Result<FaOutput> {
    cfg.validate()?;
    let (correlation, max_imag_residue) = spacetime_autocorrelation(f)?;
    let fused = match cfg.apply_mode {
        FaApplyMode::TextMode => f.mul(&correlation)?,
        FaApplyMode::Eq7Literal => correlation.clone(),
    };
    let output = f.add(&fused.scale(cfg.lambda_fa)?)?;
    Ok(FaOutput {
        output,
        correlation,
        max_imag_residue,
    })
}

pub fn fourier_attention(f: &RTensor, cfg: &FaConfig) -> Result<RTensor> {
    Ok(fourier_attention_detailed(f, cfg)?.output)
}

/// 1x1 channel-mixing maps for query, key and value, each `C x C` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnWeightsDense {
    channels: usize,
    query: Vec<f64>,
    key: Vec<f64>,
    value: Vec<f64>,
}

impl AttnWeightsDense {
    pub fn new(channels: usize, query: Vec<f64>, key: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let n = channels * channels;
        if channels == 0 || query.len() != n || key.len() != n || value.len() != n {
            return Err(FarError::shape(format!(
                "channel maps must be {channels}x{channels}"
            )));
        }
        Ok(Self {
            channels,
            query,
            key,
            value,
        })
    }

    pub fn identity(channels: usize) -> Self {
        let eye: Vec<f64> = (0..channels * channels)
            .map(|i| if i / channels == i % channels { 1.0 } else { 0.0 })
            .collect();
        Self {
            channels,
            query: eye.clone(),
            key: eye.clone(),
            value: eye,
        }
    }

    /// Entries uniform in `[-1/sqrt(C), 1/sqrt(C))`, drawn query, key, value.
    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let bound = 1.0 / (channels as f64).sqrt();
        let mut draw = || -> Vec<f64> {
            (0..channels * channels)
                .map(|_| rng.uniform_in(-bound, bound))
                .collect()
        };
        let (query, key, value) = (draw(), draw(), draw());
        Self {
            channels,
            query,
            key,
            value,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

fn channel_mix(map: &[f64], x: &[f64], c: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; c * n];
    for o in 0..c {
        let row = &mut out[o * n..(o + 1) * n];
        for i in 0..c {
            let wgt = map[o * c + i];
            if wgt != 0.0 {
                row.iter_mut()
                    .zip(&x[i * n..(i + 1) * n])
                    .for_each(|(r, &v)| *r += wgt * v);
            }
        }
    }
    out
}

/// `Value(x) . [Query(x)^T . Key(x)]^T` with `.` the matrix product and no
/// softmax. Positions are the `t*h*w` cells of each channel.
pub fn self_attention_dense(f: &RTensor, weights: &AttnWeightsDense) -> Result<RTensor> {
    let s = f.shape4()?;
    let n = s.thw();
    if n > DENSE_THW_LIMIT {
        return Err(FarError::Resource(format!(
            "dense attention over {n} positions exceeds the limit of {DENSE_THW_LIMIT}"
        )));
    }
    if weights.channels != s.c {
        return Err(FarError::shape(format!(
            "weights mix {} channels, input has {}",
            weights.channels, s.c
        )));
    }
    let c = s.c;
    let x = f.data();
    let q = channel_mix(&weights.query, x, c, n);
    let k = channel_mix(&weights.key, x, c, n);
    let v = channel_mix(&weights.value, x, c, n);

    // scores[i][j] = sum_c q[c][i] * k[c][j]
    let mut scores = vec![0.0; n * n];
    for (i, row) in scores.chunks_exact_mut(n).enumerate() {
        for ch in 0..c {
            let qi = q[ch * n + i];
            row.iter_mut()
                .zip(&k[ch * n..(ch + 1) * n])
                .for_each(|(r, &kv)| *r += qi * kv);
        }
    }
    // out[c][i] = sum_j v[c][j] * scores[i][j]
    let mut out = vec![0.0; c * n];
    for ch in 0..c {
        let vrow = &v[ch * n..(ch + 1) * n];
        for (i, srow) in scores.chunks_exact(n).enumerate() {
            out[ch * n + i] = vrow.iter().zip(srow).map(|(a, b)| a * b).sum();
        }
    }
    RTensor::from_vec(s, out)
}

/// Direct nested-sum evaluation, with 1-based indices as written, of
///
/// ```text
/// F[m,n] = sum_{b,c} e(mc) e(nb) a[m,n]
///          * sum_{i,j} e(j (b - c)) a[i,j] * e(i (c - b)) a[i,j]
/// ```
///
/// where `e(x) = exp(-2 pi i x / N)`. Returns the real part. O(N^6).
pub fn lemma_fourier_attention_bruteforce(a: &RTensor) -> Result<RTensor> {
    let n = match *a.shape().dims() {
        [r, c] if r == c => r,
        _ => return Err(FarError::shape(format!("expected a square matrix, got {}", a.shape()))),
    };
    if n > LEMMA_MAX_N {
        return Err(FarError::Resource(format!(
            "brute-force evaluation limited to N <= {LEMMA_MAX_N}, got {n}"
        )));
    }
    let e = |x: i64| {
        let theta = -TAU * x.rem_euclid(n as i64) as f64 / n as f64;
        Complex64::new(theta.cos(), theta.sin())
    };
    let at = |i: usize, j: usize| a.data()[(i - 1) * n + (j - 1)];
    let ni = n as i64;
    let mut out = vec![0.0; n * n];
    for m in 1..=ni {
        for nn in 1..=ni {
            let amn = at(m as usize, nn as usize);
            let mut total = Complex64::new(0.0, 0.0);
            for b in 1..=ni {
                for c in 1..=ni {
                    let h = e(m * c) * e(nn * b) * amn;
                    let mut inner = Complex64::new(0.0, 0.0);
                    for j in 1..=ni {
                        for i in 1..=ni {
                            let aij = at(i as usize, j as usize);
                            inner += e(j * (b - c)) * aij * e(i * (c - b)) * aij;
                        }
                    }
                    total += h * inner;
                }
            }
            out[((m - 1) * ni + (nn - 1)) as usize] = total.re;
        }
    }
    RTensor::from_vec(a.shape().clone(), out)
}

/// FLOP model of Fourier attention (text mode residual).
pub fn fa_flops(shape: Shape4) -> FlopReport {
    fa_flops_for(shape, FaApplyMode::TextMode)
}

/// Two 2-D transforms of `t*h*w` points per channel at `5 N log2 N`, 6 flops
/// per complex spectrum product, and 3 (text mode) or 2 (literal) flops per
/// element for the residual fusion.
pub fn fa_flops_for(shape: Shape4, mode: FaApplyMode) -> FlopReport {
    let c = shape.c as f64;
    let n = shape.thw() as f64;
    let residual = match mode {
        FaApplyMode::TextMode => 3.0,
        FaApplyMode::Eq7Literal => 2.0,
    };
    let mut report = FlopReport::new("fa", shape);
    report.push(
        "fft2_forward",
        TermKind::Transform,
        c * FFT_FLOPS_PER_POINT_LOG2 * n * n.log2(),
    );
    report.push(
        "fft2_inverse",
        TermKind::Transform,
        c * FFT_FLOPS_PER_POINT_LOG2 * n * n.log2(),
    );
    report.push("spectrum_product", TermKind::Elementwise, c * n * 6.0);
    report.push("residual", TermKind::Elementwise, c * n * residual);
    report.annotate("fft = 5*N*log2(N) per channel; spectrum product = 6 per element");
    report.annotate(format!("residual = {residual} per element"));
    report
}

/// FLOP model of dense space-time self-attention: three `C x C` channel maps
/// and two `C x N x N` products at 2 flops per multiply-add.
pub fn sa_flops(shape: Shape4) -> FlopReport {
    let c = shape.c as f64;
    let n = shape.thw() as f64;
    let mut report = FlopReport::new("sa", shape);
    report.push("qkv_maps", TermKind::Matmul, 3.0 * MATMUL_FLOPS_PER_MAC * c * c * n);
    report.push("query_key", TermKind::Matmul, MATMUL_FLOPS_PER_MAC * c * n * n);
    report.push("value_scores", TermKind::Matmul, MATMUL_FLOPS_PER_MAC * c * n * n);
    report.annotate("matmul = 2*m*n*k");
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::circular_autocorr_oracle;
    use crate::tensor::{make_tensor, FillSpec, Shape};
    use proptest::prelude::*;

    fn rand4(c: usize, t: usize, h: usize, w: usize, seed: u64) -> RTensor {
        make_tensor(
            Shape4::new(c, t, h, w).unwrap(),
            FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed },
        )
        .unwrap()
    }

    fn channel_matrix(f: &RTensor, c: usize) -> RTensor {
        let s = f.shape4().unwrap();
        let n = s.thw();
        RTensor::from_vec(
            Shape::new(&[s.t, s.hw()]).unwrap(),
            f.data()[c * n..(c + 1) * n].to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn zeros_stay_zero() {
        let z = RTensor::zeros(Shape4::new(2, 3, 2, 2).unwrap());
        for mode in [FaApplyMode::TextMode, FaApplyMode::Eq7Literal] {
            let cfg = FaConfig::new(0.5, mode).unwrap();
            assert!(fourier_attention(&z, &cfg).unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn zero_lambda_is_identity() {
        let f = rand4(2, 4, 3, 3, 1);
        for mode in [FaApplyMode::TextMode, FaApplyMode::Eq7Literal] {
            let cfg = FaConfig::new(0.0, mode).unwrap();
            assert_eq!(fourier_attention(&f, &cfg).unwrap(), f);
        }
    }

    #[test]
    fn default_lambda() {
        assert_eq!(FaConfig::default().lambda_fa, 0.01);
        assert_eq!(FaConfig::default().apply_mode, FaApplyMode::TextMode);
        assert!(FaConfig::new(-1e-3, FaApplyMode::TextMode).is_err());
        assert!(FaConfig::new(f64::NAN, FaApplyMode::TextMode).is_err());
    }

    #[test]
    fn literal_mode_adds_autocorrelation() {
        let f = rand4(1, 4, 2, 3, 12);
        let cfg = FaConfig::new(1.0, FaApplyMode::Eq7Literal).unwrap();
        let delta = fourier_attention(&f, &cfg).unwrap().sub(&f).unwrap();
        let want = circular_autocorr_oracle(&channel_matrix(&f, 0)).unwrap();
        for (a, b) in delta.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn text_mode_multiplies_by_input() {
        let f = rand4(2, 3, 2, 2, 3);
        let out = fourier_attention_detailed(&f, &FaConfig::new(0.5, FaApplyMode::TextMode).unwrap()).unwrap();
        for ((o, x), r) in out.output.data().iter().zip(f.data()).zip(out.correlation.data()) {
            assert!((o - (x + 0.5 * x * r)).abs() < 1e-12);
        }
        assert!(out.max_imag_residue < 1e-10);
    }

    #[test]
    fn dense_attention_identity_maps_match_loops() {
        // Rows of x (channels over positions) are orthonormal.
        let c = 2;
        let n = 4;
        let x = vec![0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5];
        let f = RTensor::from_vec(Shape4::new(c, 1, 2, 2).unwrap(), x.clone()).unwrap();
        let got = self_attention_dense(&f, &AttnWeightsDense::identity(c)).unwrap();

        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                for ch in 0..c {
                    gram[i * n + j] += x[ch * n + i] * x[ch * n + j];
                }
            }
        }
        let mut want = vec![0.0; c * n];
        for ch in 0..c {
            for i in 0..n {
                for j in 0..n {
                    want[ch * n + i] += x[ch * n + j] * gram[i * n + j];
                }
            }
        }
        for (a, b) in got.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
        // x x^T = I, so x (x^T x) = x.
        for (a, b) in got.data().iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_attention_zero_value_map() {
        let f = rand4(3, 2, 2, 2, 4);
        let w = AttnWeightsDense::seeded(3, 9);
        let w = AttnWeightsDense::new(3, w.query.clone(), w.key.clone(), vec![0.0; 9]).unwrap();
        assert_eq!(self_attention_dense(&f, &w).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dense_attention_single_position() {
        let f = RTensor::from_vec(Shape4::new(1, 1, 1, 1).unwrap(), vec![1.5]).unwrap();
        let w = AttnWeightsDense::new(1, vec![2.0], vec![-3.0], vec![0.5]).unwrap();
        let (q, k, v) = (2.0 * 1.5, -3.0 * 1.5, 0.5 * 1.5);
        assert_eq!(self_attention_dense(&f, &w).unwrap().data(), &[v * (q * k)]);
    }

    #[test]
    fn dense_attention_guards() {
        let f = RTensor::zeros(Shape4::new(1, 2, 64, 33).unwrap());
        assert!(matches!(
            self_attention_dense(&f, &AttnWeightsDense::identity(1)),
            Err(FarError::Resource(_))
        ));
        let g = RTensor::zeros(Shape4::new(2, 1, 2, 2).unwrap());
        assert!(self_attention_dense(&g, &AttnWeightsDense::identity(3)).is_err());
    }

    #[test]
    fn lemma_n1_is_cube() {
        let a = RTensor::from_vec(Shape::new(&[1, 1]).unwrap(), vec![1.7]).unwrap();
        let got = lemma_fourier_attention_bruteforce(&a).unwrap().data()[0];
        assert!((got - 1.7f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn lemma_identity_2x2() {
        // With N = 2 every exponential is (-1)^x. For a = I the inner sum is
        // sum_i (-1)^(i(b-c) + i(c-b)) = 2 for all (b, c), and the outer sum
        // gives 2 a[m,n] ((-1)^m + 1)((-1)^n + 1): only (2,2) survives, at 8.
        let a = RTensor::from_vec(Shape::new(&[2, 2]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let got = lemma_fourier_attention_bruteforce(&a).unwrap();
        let want = [0.0, 0.0, 0.0, 8.0];
        for (a, b) in got.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_guards() {
        assert!(lemma_fourier_attention_bruteforce(&RTensor::zeros(Shape::new(&[9, 9]).unwrap())).is_err());
        assert!(lemma_fourier_attention_bruteforce(&RTensor::zeros(Shape::new(&[2, 3]).unwrap())).is_err());
    }

    #[test]
    fn flops_unit_shape() {
        let s = Shape4::new(1, 1, 1, 1).unwrap();
        let fa = fa_flops(s);
        assert_eq!(fa.term("fft2_forward"), Some(0.0));
        assert_eq!(fa.term("fft2_inverse"), Some(0.0));
        let sa = sa_flops(s);
        assert_eq!(sa.term("query_key"), Some(2.0));
        assert_eq!(sa.term("value_scores"), Some(2.0));
    }

    #[test]
    fn flops_ratio_hand_evaluation() {
        let s = Shape4::new(16, 4, 32, 32).unwrap();
        let (c, n) = (16.0f64, 4096.0f64);
        let sa = 3.0 * 2.0 * c * c * n + 2.0 * (2.0 * c * n * n);
        let fa = 2.0 * (c * 5.0 * n * 12.0) + 6.0 * c * n + 3.0 * c * n;
        assert_eq!(sa_flops(s).total(), sa);
        assert_eq!(fa_flops(s).total(), fa);
        let one_product = sa_flops(s).term("query_key").unwrap();
        let two_transforms = fa_flops(s).by_kind(TermKind::Transform);
        assert!((one_product / two_transforms - 4096.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn flops_ratio_grows_with_size() {
        // Below thw = 8 the channel maps dominate the dense total.
        let mut prev = 0.0;
        for w in [2, 4, 8, 16, 64, 256, 1024] {
            let s = Shape4::new(8, 4, 1, w).unwrap();
            let ratio = sa_flops(s).total() / fa_flops(s).total();
            assert!(ratio > prev);
            prev = ratio;
        }
    }

    proptest! {
        #[test]
        fn correlation_peaks_at_zero_lag(seed: u64, t in 1usize..6, h in 1usize..4, w in 1usize..4) {
            let f = rand4(2, t, h, w, seed);
            let (r, residue) = spacetime_autocorrelation(&f).unwrap();
            prop_assert!(residue < 1e-10);
            let n = t * h * w;
            for c in 0..2 {
                let chan = &r.data()[c * n..(c + 1) * n];
                let energy: f64 = f.data()[c * n..(c + 1) * n].iter().map(|v| v * v).sum();
                prop_assert!((chan[0] - energy).abs() < 1e-10);
                prop_assert!(chan.iter().all(|v| v.abs() <= chan[0] + 1e-10));
            }
        }

        #[test]
        fn power_spectrum_is_nonnegative_real(seed: u64) {
            let f = rand4(2, 4, 3, 2, seed);
            let a = sub_attention_spectrum(&f).unwrap();
            prop_assert!(a.data().iter().all(|z| z.re >= 0.0 && z.im.abs() < 1e-12));
        }

        #[test]
        fn correlation_is_shift_invariant(seed: u64, dt in 0usize..6, dq in 0usize..12) {
            let f = rand4(2, 6, 3, 4, seed);
            let g = f.roll_spacetime(dt, dq).unwrap();
            let (rf, _) = spacetime_autocorrelation(&f).unwrap();
            let (rg, _) = spacetime_autocorrelation(&g).unwrap();
            for (a, b) in rf.data().iter().zip(rg.data()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            // Literal mode delta is invariant; text mode delta moves with f.
            let lit = FaConfig::new(1.0, FaApplyMode::Eq7Literal).unwrap();
            let df = fourier_attention(&f, &lit).unwrap().sub(&f).unwrap();
            let dg = fourier_attention(&g, &lit).unwrap().sub(&g).unwrap();
            for (a, b) in df.data().iter().zip(dg.data()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            // Text mode: the shifted input meets the unshifted correlation.
            let text = FaConfig::new(1.0, FaApplyMode::TextMode).unwrap();
            let tg = fourier_attention(&g, &text).unwrap().sub(&g).unwrap();
            let want = g.mul(&rf).unwrap();
            for (a, b) in tg.data().iter().zip(want.data()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
