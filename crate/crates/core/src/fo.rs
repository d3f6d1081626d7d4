//! Fourier object disentanglement.
//!
//! For each `(c, h, w)` line the temporal spectrum `F(k)` is reduced to one
//! nonnegative scalar
//!
//! ```text
//! M(c, h, w) = sum_k |F(c, k, h, w)|^2 * w(k)          (L2)
//! M(c, h, w) = sum_k |F(c, k, h, w)|   * sqrt(w(k))    (L1)
//! ```
//!
//! and the mask is applied to every frame of the features. The default
//! weight profile is `w(k) = (2 pi k~ / T)^2` with `k~ = min(k, T - k)`, so
//! DC carries no weight and the Nyquist bin the most; the literal
//! exponential profile `w(k) = exp(-2 pi k / T)^2` (with `w(0) = 0`) is kept
//! as [`WeightProfile::PaperLiteral`].
//!
//! The mask is quadratic in `f` (L2), so the strict output `f * M` is cubic
//! in `f`; [`crate::grad::vjp_disentangle`] relies on that form.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::bench::{FlopReport, TermKind, FFT_FLOPS_PER_POINT_LOG2};
use crate::error::Result;
use crate::fft::fft_time_axis;
use crate::tensor::{DynamicMask, RTensor, Shape4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightProfile {
    /// `(2 pi min(k, T-k) / T)^2`.
    #[default]
    Quadratic,
    /// `exp(-2 pi k / T)^2` for `k >= 1`, zero at DC.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskNorm {
    #[default]
    L2,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FreqWeightMode {
    pub profile: WeightProfile,
    pub norm: MaskNorm,
}

/// How the mask is applied to the features.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FoApplication {
    /// `f * M`.
    #[default]
    Strict,
    /// `f * (1 + beta * M^)`, with `M^` the mask max-normalized per channel.
    Residual { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FoConfig {
    pub weights: FreqWeightMode,
    pub application: FoApplication,
}

impl FoConfig {
    pub fn residual(beta: f64) -> Self {
        Self {
            application: FoApplication::Residual { beta },
            ..Self::default()
        }
    }
}

pub fn frequency_weights(tlen: usize, mode: FreqWeightMode) -> Vec<f64> {
    let n = tlen as f64;
    (0..tlen)
        .map(|k| match mode.profile {
            WeightProfile::Quadratic => {
                let sym = k.min(tlen - k) as f64;
                (TAU * sym / n).powi(2)
            }
            WeightProfile::PaperLiteral if k == 0 => 0.0,
            WeightProfile::PaperLiteral => (-TAU * k as f64 / n).exp().powi(2),
        })
        .collect()
}

pub fn compute_mask(f: &RTensor, mode: FreqWeightMode) -> Result<DynamicMask> {
    let s = f.shape4()?;
    let weights = frequency_weights(s.t, mode);
    let spectrum = fft_time_axis(f)?;
    let hw = s.hw();
    let mut mask = vec![0.0; s.c * hw];
    mask.par_chunks_mut(hw).enumerate().for_each(|(c, plane)| {
        let chan = &spectrum.data()[c * s.t * hw..(c + 1) * s.t * hw];
        for (q, m) in plane.iter_mut().enumerate() {
            *m = weights
                .iter()
                .enumerate()
                .map(|(k, &wk)| {
                    let z = chan[k * hw + q];
                    match mode.norm {
                        MaskNorm::L2 => z.norm_sqr() * wk,
                        MaskNorm::L1 => z.norm() * wk.sqrt(),
                    }
                })
                .sum();
        }
    });
    DynamicMask::new(s.c, s.h, s.w, mask)
}

/// Applies an existing mask under the given application mode.
pub fn apply_mask(f: &RTensor, mask: &DynamicMask, application: FoApplication) -> Result<RTensor> {
    match application {
        FoApplication::Strict => f.mul(&mask.to_tensor()),
        FoApplication::Residual { beta } => {
            let gain = mask.max_normalized().to_tensor().map(|m| 1.0 + beta * m)?;
            f.mul(&gain)
        }
    }
}

/// Disentangled features together with the mask that produced them.
#[derive(Debug, Clone)]
pub struct FoOutput {
    pub features: RTensor,
    pub mask: DynamicMask,
}

pub fn disentangle_with_mask(f: &RTensor, cfg: &FoConfig) -> Result<FoOutput> {
    let mask = compute_mask(f, cfg.weights)?;
    let features = apply_mask(f, &mask, cfg.application)?;
    Ok(FoOutput { features, mask })
}

pub fn disentangle(f: &RTensor, cfg: &FoConfig) -> Result<RTensor> {
    Ok(disentangle_with_mask(f, cfg)?.features)
}

/// FLOP model of the FO stage: one length-`T` FFT per `(c, h, w)` line
/// (`5 N log2 N`), 3 flops per frequency term of the mask reduction and one
/// multiply per output element.
pub fn fo_flops(shape: Shape4) -> FlopReport {
    let lines = (shape.c * shape.hw()) as f64;
    let t = shape.t as f64;
    let mut report = FlopReport::new("fo", shape);
    report.push(
        "temporal_fft",
        TermKind::Transform,
        lines * FFT_FLOPS_PER_POINT_LOG2 * t * t.log2(),
    );
    report.push("mask_reduction", TermKind::Elementwise, lines * t * 3.0);
    report.push("mask_apply", TermKind::Elementwise, shape.numel() as f64);
    report.annotate("fft line = 5*N*log2(N); mask = 3 flops per (line, k); apply = 1 per element");
    report
}

/// Energy of a unit-amplitude tone at the Nyquist bin per unit weight, `T^2`.
/// Used by callers that need the closed form for oscillating test signals.
pub fn nyquist_tone_energy(tlen: usize) -> f64 {
    (tlen * tlen) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::fft::{dft_oracle, to_complex, Direction};
    use crate::tensor::{make_tensor, FillSpec, Shape};
    use proptest::prelude::*;

    const LITERAL: FreqWeightMode = FreqWeightMode {
        profile: WeightProfile::PaperLiteral,
        norm: MaskNorm::L2,
    };

    fn naive_mask(f: &RTensor, mode: FreqWeightMode) -> Vec<f64> {
        let s = f.shape4().unwrap();
        let w = frequency_weights(s.t, mode);
        let mut out = Vec::new();
        for c in 0..s.c {
            for h in 0..s.h {
                for x in 0..s.w {
                    let line: Vec<f64> = (0..s.t).map(|t| f.data()[s.index(c, t, h, x)]).collect();
                    let spec = dft_oracle(&to_complex(&line), Direction::Forward).unwrap();
                    let mut acc = 0.0;
                    for k in 0..s.t {
                        acc += match mode.norm {
                            MaskNorm::L2 => spec[k].norm_sqr() * w[k],
                            MaskNorm::L1 => spec[k].norm() * w[k].sqrt(),
                        };
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    fn rand4(c: usize, t: usize, h: usize, w: usize, seed: u64) -> RTensor {
        make_tensor(
            Shape4::new(c, t, h, w).unwrap(),
            FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed },
        )
        .unwrap()
    }

    #[test]
    fn quadratic_weights_t4() {
        let w = frequency_weights(4, FreqWeightMode::default());
        let want = [0.0, (PI / 2.0).powi(2), PI * PI, (PI / 2.0).powi(2)];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn literal_weights_t4() {
        let w = frequency_weights(4, LITERAL);
        let want = [0.0, (-PI).exp(), (-2.0 * PI).exp(), (-3.0 * PI).exp()];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn quadratic_weights_symmetric_with_zero_dc() {
        for t in 1..40 {
            let w = frequency_weights(t, FreqWeightMode::default());
            assert_eq!(w[0], 0.0);
            for k in 1..t {
                assert_eq!(w[k], w[t - k]);
                assert!(w[k] >= 0.0);
            }
        }
    }

    #[test]
    fn nyquist_line() {
        let f = RTensor::from_vec(Shape4::new(1, 4, 1, 1).unwrap(), vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let m = compute_mask(&f, FreqWeightMode::default()).unwrap();
        assert!((m.data()[0] - 16.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn static_input_gives_zero_mask_and_output() {
        let mut data = Vec::new();
        for c in 0..2 {
            for _ in 0..6 {
                data.extend((0..9).map(|q| (c * 9 + q) as f64 * 0.37 - 1.0));
            }
        }
        let f = RTensor::from_vec(Shape4::new(2, 6, 3, 3).unwrap(), data).unwrap();
        let m = compute_mask(&f, FreqWeightMode::default()).unwrap();
        assert!(m.data().iter().all(|&v| v < 1e-12));
        let out = disentangle(&f, &FoConfig::default()).unwrap();
        assert!(out.max_abs() < 1e-11);
        let zeros = RTensor::zeros(Shape4::new(1, 3, 2, 2).unwrap());
        assert_eq!(disentangle(&zeros, &FoConfig::default()).unwrap(), zeros);
    }

    #[test]
    fn single_frame_gives_zero_mask() {
        let f = rand4(2, 1, 3, 3, 1);
        let m = compute_mask(&f, FreqWeightMode::default()).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_matches_naive_oracle() {
        let f = rand4(2, 6, 4, 4, 77);
        for mode in [
            FreqWeightMode::default(),
            LITERAL,
            FreqWeightMode { profile: WeightProfile::Quadratic, norm: MaskNorm::L1 },
        ] {
            let got = compute_mask(&f, mode).unwrap();
            for (a, b) in got.data().iter().zip(naive_mask(&f, mode)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn residual_mode_never_shrinks_magnitudes() {
        let f = rand4(3, 8, 4, 4, 5);
        let out = disentangle(&f, &FoConfig::residual(1.0)).unwrap();
        for (o, x) in out.data().iter().zip(f.data()) {
            assert!(o.abs() >= x.abs() - 1e-15 && o.abs() <= 2.0 * x.abs() + 1e-15);
        }
    }

    #[test]
    fn tone_energy_grows_with_frequency() {
        let t = 12;
        let mut prev = -1.0;
        for k0 in 0..=t / 2 {
            let line: Vec<f64> = (0..t)
                .map(|n| (TAU * (k0 * n) as f64 / t as f64).cos())
                .collect();
            let f = RTensor::from_vec(Shape4::new(1, t, 1, 1).unwrap(), line).unwrap();
            let m = compute_mask(&f, FreqWeightMode::default()).unwrap().data()[0];
            assert!(m >= prev - 1e-9, "k0={k0}: {m} < {prev}");
            prev = m;
        }
        assert!((prev - nyquist_tone_energy(t) * PI * PI).abs() < 1e-8);
    }

    #[test]
    fn flops_unit_shape_and_doubling() {
        let r = fo_flops(Shape4::new(1, 1, 1, 1).unwrap());
        assert_eq!(r.term("temporal_fft"), Some(0.0));
        assert_eq!(r.term("mask_apply"), Some(1.0));

        let a = fo_flops(Shape4::new(4, 8, 3, 3).unwrap()).term("temporal_fft").unwrap();
        let b = fo_flops(Shape4::new(4, 16, 3, 3).unwrap()).term("temporal_fft").unwrap();
        assert!((b / a - 2.0 * 16f64.log2() / 8f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn flops_hand_expansion_at_mid_level_scale() {
        let s = Shape4::new(48, 4, 135, 135).unwrap();
        let r = fo_flops(s);
        let lines = 48.0 * 135.0 * 135.0;
        assert_eq!(r.term("temporal_fft"), Some(lines * 5.0 * 4.0 * 2.0));
        assert_eq!(r.term("mask_reduction"), Some(lines * 4.0 * 3.0));
        assert_eq!(r.term("mask_apply"), Some(lines * 4.0));
        assert_eq!(r.total(), 48.0 * 135.0 * 135.0 * (40.0 + 12.0 + 4.0));
    }

    proptest! {
        #[test]
        fn mask_is_nonnegative(seed: u64, c in 1usize..3, t in 1usize..9, h in 1usize..4, w in 1usize..4) {
            let f = rand4(c, t, h, w, seed).scale(50.0).unwrap();
            for mode in [FreqWeightMode::default(), LITERAL] {
                prop_assert!(compute_mask(&f, mode).unwrap().data().iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn mask_is_time_shift_invariant(seed: u64, shift in 0usize..8) {
            let f = rand4(2, 8, 3, 3, seed);
            let rolled = f.roll_spacetime(shift, 0).unwrap();
            let a = compute_mask(&f, FreqWeightMode::default()).unwrap();
            let b = compute_mask(&rolled, FreqWeightMode::default()).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn l2_scale_equivariance(seed: u64, alpha in 0.1f64..5.0) {
            let f = rand4(2, 6, 2, 3, seed);
            let g = f.scale(alpha).unwrap();
            let cfg = FoConfig::default();
            let (mf, mg) = (compute_mask(&f, cfg.weights).unwrap(), compute_mask(&g, cfg.weights).unwrap());
            let scale_m = mg.data().iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for (x, y) in mf.data().iter().zip(mg.data()) {
                prop_assert!((y - alpha * alpha * x).abs() <= 1e-9 * scale_m);
            }
            let (of, og) = (disentangle(&f, &cfg).unwrap(), disentangle(&g, &cfg).unwrap());
            let scale_o = og.max_abs().max(1e-300);
            for (x, y) in of.data().iter().zip(og.data()) {
                prop_assert!((y - alpha.powi(3) * x).abs() <= 1e-9 * scale_o);
            }
        }

        #[test]
        fn oracle_equivalence_random_shapes(seed: u64, c in 1usize..=3, t in 1usize..=8, h in 1usize..=5, w in 1usize..=5) {
            let f = rand4(c, t, h, w, seed);
            let got = compute_mask(&f, FreqWeightMode::default()).unwrap();
            for (a, b) in got.data().iter().zip(naive_mask(&f, FreqWeightMode::default())) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mask_tensor_has_chw_shape() {
        let f = rand4(2, 3, 4, 5, 0);
        let m = compute_mask(&f, FreqWeightMode::default()).unwrap();
        assert_eq!(m.to_tensor().shape(), &Shape::new(&[2, 4, 5]).unwrap());
    }
}
