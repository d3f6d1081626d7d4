//! Discrete Fourier transforms over feature tensors.
//!
//! Convention: the forward transform is the unnormalized sum
//! `X[k] = sum_n x[n] exp(-2 pi i k n / N)` and the inverse carries `1/N`.
//! Any length is supported; smooth lengths use mixed-radix kernels and other
//! lengths fall back to Bluestein/Rader, both provided by `rustfft`.
//!
//! Lines and channels are transformed independently, so parallel execution
//! gives bit-identical results for any thread count.

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{FarError, Result};
use crate::tensor::{CTensor, RTensor, Shape, Shape4};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    match dir {
        Direction::Forward => planner.plan_fft_forward(len),
        Direction::Inverse => planner.plan_fft_inverse(len),
    }
}

fn normalize(buf: &mut [Complex64], len: usize, dir: Direction) {
    if dir == Direction::Inverse {
        let s = 1.0 / len as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

pub fn fft1d(x: &[Complex64], dir: Direction) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(FarError::shape("transform length must be at least 1"));
    }
    let mut buf = x.to_vec();
    plan(x.len(), dir).process(&mut buf);
    normalize(&mut buf, x.len(), dir);
    Ok(buf)
}

/// Literal O(N^2) evaluation of the DFT sum. Ground truth for the FFT tests.
pub fn dft_oracle(x: &[Complex64], dir: Direction) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n == 0 {
        return Err(FarError::shape("transform length must be at least 1"));
    }
    let sign = match dir {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let out = (0..n)
        .map(|k| {
            let acc: Complex64 = x
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    // Reduce k*j mod n first so the angle stays accurate.
                    let theta = sign * TAU * ((k * j) % n) as f64 / n as f64;
                    v * Complex64::new(theta.cos(), theta.sin())
                })
                .sum();
            match dir {
                Direction::Forward => acc,
                Direction::Inverse => acc / n as f64,
            }
        })
        .collect();
    Ok(out)
}

/// Spectrum of a real sequence of length `source_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    pub values: Vec<Complex64>,
    pub source_len: usize,
}

impl Spectrum1D {
    pub fn of_real(x: &[f64]) -> Result<Self> {
        let values = fft1d(&to_complex(x), Direction::Forward)?;
        Ok(Self {
            values,
            source_len: x.len(),
        })
    }

    /// Largest `|X[k] - conj(X[N-k mod N])|`.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let n = self.source_len;
        (0..n)
            .map(|k| (self.values[k] - self.values[(n - k) % n].conj()).norm())
            .fold(0.0, f64::max)
    }
}

pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Transforms every temporal line of a `(c, t, h, w)` buffer in place.
pub(crate) fn transform_time_axis(data: &mut [Complex64], s: Shape4, dir: Direction) {
    let fft = plan(s.t, dir);
    let hw = s.hw();
    data.par_chunks_mut(s.t * hw).for_each(|chan| {
        let mut line = vec![Complex64::new(0.0, 0.0); s.t];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for q in 0..hw {
            for (t, z) in line.iter_mut().enumerate() {
                *z = chan[t * hw + q];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            normalize(&mut line, s.t, dir);
            for (t, z) in line.iter().enumerate() {
                chan[t * hw + q] = *z;
            }
        }
    });
}

/// Forward transform along `t` for each `(c, h, w)` line.
pub fn fft_time_axis(f: &RTensor) -> Result<CTensor> {
    let s = f.shape4()?;
    let mut data = to_complex(f.data());
    transform_time_axis(&mut data, s, Direction::Forward);
    CTensor::from_vec(s, data)
}

/// Either direction along `t` for a complex `(c, t, h, w)` tensor.
pub fn fft_time_axis_complex(f: &CTensor, dir: Direction) -> Result<CTensor> {
    let s = f.shape().as_shape4()?;
    let mut data = f.data().to_vec();
    transform_time_axis(&mut data, s, dir);
    CTensor::from_vec(s, data)
}

/// Row-column 2-D transform of each `rows x cols` matrix in `data`.
pub(crate) fn transform_matrices(data: &mut [Complex64], rows: usize, cols: usize, dir: Direction) {
    let row_fft = plan(cols, dir);
    let col_fft = plan(rows, dir);
    data.par_chunks_mut(rows * cols).for_each(|m| {
        let scratch_len = row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        for row in m.chunks_exact_mut(cols) {
            row_fft.process_with_scratch(row, &mut scratch);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); rows];
        for j in 0..cols {
            for (i, z) in col.iter_mut().enumerate() {
                *z = m[i * cols + j];
            }
            col_fft.process_with_scratch(&mut col, &mut scratch);
            for (i, z) in col.iter().enumerate() {
                m[i * cols + j] = *z;
            }
        }
        normalize(m, rows * cols, dir);
    });
}

fn channel_dims(shape: &Shape) -> Result<(usize, usize, usize)> {
    match *shape.dims() {
        [c, t, hw] => Ok((c, t, hw)),
        [c, t, h, w] => Ok((c, t, h * w)),
        _ => Err(FarError::shape(format!(
            "expected (c,t,hw) or (c,t,h,w), got {shape}"
        ))),
    }
}

/// Per-channel 2-D forward transform of the `t x (h*w)` view; returns `(c, t, hw)`.
pub fn fft2_spacetime(f: &RTensor) -> Result<CTensor> {
    let s = f.shape4()?;
    let mut data = to_complex(f.data());
    transform_matrices(&mut data, s.t, s.hw(), Direction::Forward);
    CTensor::from_vec(Shape::new(&[s.c, s.t, s.hw()])?, data)
}

/// Per-channel 2-D inverse transform with `1/(t*hw)` normalization.
pub fn ifft2_spacetime(spectrum: &CTensor) -> Result<CTensor> {
    fft2_channels(spectrum, Direction::Inverse)
}

/// Per-channel 2-D transform of a complex `(c, t, hw)` or `(c, t, h, w)`
/// tensor; the result is always `(c, t, hw)`.
pub fn fft2_channels(x: &CTensor, dir: Direction) -> Result<CTensor> {
    let (c, t, hw) = channel_dims(x.shape())?;
    let mut data = x.data().to_vec();
    transform_matrices(&mut data, t, hw, dir);
    CTensor::from_vec(Shape::new(&[c, t, hw])?, data)
}

fn matrix_dims(a: &RTensor) -> Result<(usize, usize)> {
    match *a.shape().dims() {
        [r, c] => Ok((r, c)),
        _ => Err(FarError::shape(format!("expected a matrix, got {}", a.shape()))),
    }
}

/// `r[p, q] = sum_{t, s} a[t, s] a[(t + p) mod T, (s + q) mod M]`, by direct
/// quadruple loop.
pub fn circular_autocorr_oracle(a: &RTensor) -> Result<RTensor> {
    let (rows, cols) = matrix_dims(a)?;
    let x = a.data();
    let mut r = vec![0.0; rows * cols];
    for p in 0..rows {
        for q in 0..cols {
            let mut acc = 0.0;
            for t in 0..rows {
                for s in 0..cols {
                    acc += x[t * cols + s] * x[((t + p) % rows) * cols + (s + q) % cols];
                }
            }
            r[p * cols + q] = acc;
        }
    }
    RTensor::from_vec(a.shape().clone(), r)
}

/// Wiener-Khinchin route: `ifft2(F * conj(F))` for a real matrix. The full
/// complex result is returned so callers can inspect the imaginary residue.
pub fn circular_autocorr_spectral(a: &RTensor) -> Result<CTensor> {
    let (rows, cols) = matrix_dims(a)?;
    let mut data = to_complex(a.data());
    transform_matrices(&mut data, rows, cols, Direction::Forward);
    data.iter_mut().for_each(|z| *z = Complex64::new(z.norm_sqr(), 0.0));
    transform_matrices(&mut data, rows, cols, Direction::Inverse);
    CTensor::from_vec(a.shape().clone(), data)
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::tensor::{make_tensor, FillSpec};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = SeededRng::new(seed);
        (0..n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect()
    }

    #[test]
    fn delta_and_constant() {
        let d = fft1d(&[c(1.0), c(0.0), c(0.0), c(0.0)], Direction::Forward).unwrap();
        assert!(max_abs_diff(&d, &[c(1.0); 4]) < 1e-15);
        let k = fft1d(&[c(1.0); 4], Direction::Forward).unwrap();
        assert!(max_abs_diff(&k, &[c(4.0), c(0.0), c(0.0), c(0.0)]) < 1e-15);
    }

    #[test]
    fn empty_input_is_a_shape_error() {
        assert!(matches!(fft1d(&[], Direction::Forward), Err(FarError::Shape(_))));
        assert!(dft_oracle(&[], Direction::Inverse).is_err());
    }

    #[test]
    fn oracle_small_cases() {
        let two = dft_oracle(&[c(1.0), c(0.0)], Direction::Forward).unwrap();
        assert_eq!(two, vec![c(1.0), c(1.0)]);
        let x = vec![c(0.3), Complex64::new(-1.0, 2.0), c(5.0)];
        let back = dft_oracle(&dft_oracle(&x, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        assert!(max_abs_diff(&back, &x) < 1e-12);
    }

    #[test]
    fn oracle_parseval_n7() {
        let x = random_complex(7, 17);
        let big_x = dft_oracle(&x, Direction::Forward).unwrap();
        let lhs: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = big_x.iter().map(|z| z.norm_sqr()).sum::<f64>() / 7.0;
        assert!((lhs - rhs).abs() / lhs < 1e-10);
    }

    #[test]
    fn length_12_matches_oracle() {
        let x = random_complex(12, 4);
        let got = fft1d(&x, Direction::Forward).unwrap();
        let want = dft_oracle(&x, Direction::Forward).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-10);
    }

    #[test]
    fn prime_and_large_lengths_invert() {
        for n in [1, 2, 97, 1009, 4096, 4093] {
            let x = random_complex(n, n as u64);
            let back = fft1d(&fft1d(&x, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
            assert!(max_abs_diff(&back, &x) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn time_axis_dc_and_nyquist() {
        let s = Shape4::new(2, 5, 2, 3).unwrap();
        let mut rng = SeededRng::new(1);
        let plane: Vec<f64> = (0..2 * 6).map(|_| rng.normal()).collect();
        let mut data = Vec::new();
        for ci in 0..2 {
            for _ in 0..5 {
                data.extend_from_slice(&plane[ci * 6..(ci + 1) * 6]);
            }
        }
        let spec = fft_time_axis(&RTensor::from_vec(s, data).unwrap()).unwrap();
        for ci in 0..2 {
            for k in 1..5 {
                for q in 0..6 {
                    assert!(spec.data()[(ci * 5 + k) * 6 + q].norm() < 1e-12);
                }
            }
        }

        let line = RTensor::from_vec(Shape4::new(1, 4, 1, 1).unwrap(), vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let spec = fft_time_axis(&line).unwrap();
        assert!(max_abs_diff(spec.data(), &[c(0.0), c(0.0), c(4.0), c(0.0)]) < 1e-12);
    }

    #[test]
    fn time_axis_lines_match_oracle() {
        let s = Shape4::new(2, 6, 3, 3).unwrap();
        let f = make_tensor(s, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed: 21 }).unwrap();
        let spec = fft_time_axis(&f).unwrap();
        for ci in 0..s.c {
            for h in 0..s.h {
                for w in 0..s.w {
                    let line: Vec<Complex64> =
                        (0..s.t).map(|t| c(f.data()[s.index(ci, t, h, w)])).collect();
                    let want = dft_oracle(&line, Direction::Forward).unwrap();
                    let got: Vec<Complex64> =
                        (0..s.t).map(|k| spec.data()[s.index(ci, k, h, w)]).collect();
                    assert!(max_abs_diff(&got, &want) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn spacetime_zero_and_impulse() {
        let s = Shape4::new(2, 3, 2, 2).unwrap();
        let z = fft2_spacetime(&RTensor::zeros(s)).unwrap();
        assert!(z.data().iter().all(|v| v.norm() == 0.0));
        assert_eq!(z.shape().dims(), &[2, 3, 4]);

        let mut data = vec![0.0; s.numel()];
        data[s.index(1, 0, 0, 0)] = 1.0;
        let spec = fft2_spacetime(&RTensor::from_vec(s, data).unwrap()).unwrap();
        let (first, second) = spec.data().split_at(12);
        assert!(first.iter().all(|v| v.norm() == 0.0));
        assert!(max_abs_diff(second, &[c(1.0); 12]) < 1e-15);
    }

    fn row_column_oracle(m: &[Complex64], rows: usize, cols: usize, dir: Direction) -> Vec<Complex64> {
        let mut tmp = Vec::with_capacity(rows * cols);
        for r in m.chunks_exact(cols) {
            tmp.extend(dft_oracle(r, dir).unwrap());
        }
        let mut out = tmp.clone();
        for j in 0..cols {
            let col: Vec<Complex64> = (0..rows).map(|i| tmp[i * cols + j]).collect();
            for (i, z) in dft_oracle(&col, dir).unwrap().into_iter().enumerate() {
                out[i * cols + j] = z;
            }
        }
        out
    }

    #[test]
    fn spacetime_matches_row_column_oracle() {
        let s = Shape4::new(1, 4, 2, 3).unwrap();
        let f = make_tensor(s, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed: 2 }).unwrap();
        let got = fft2_spacetime(&f).unwrap();
        let want = row_column_oracle(&to_complex(f.data()), 4, 6, Direction::Forward);
        assert!(max_abs_diff(got.data(), &want) < 1e-10);

        let spec = CTensor::from_vec(Shape::new(&[1, 4, 6]).unwrap(), random_complex(24, 3)).unwrap();
        let got = ifft2_spacetime(&spec).unwrap();
        let want = row_column_oracle(spec.data(), 4, 6, Direction::Inverse);
        assert!(max_abs_diff(got.data(), &want) < 1e-10);
    }

    #[test]
    fn spacetime_inverts() {
        let s = Shape4::new(3, 5, 3, 4).unwrap();
        let f = make_tensor(s, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed: 9 }).unwrap();
        let back = ifft2_spacetime(&fft2_spacetime(&f).unwrap()).unwrap();
        assert!(max_abs_diff(back.data(), &to_complex(f.data())) < 1e-10);
        let zeros = CTensor::from_real(&RTensor::zeros(Shape::new(&[1, 2, 2]).unwrap()));
        assert!(ifft2_spacetime(&zeros).unwrap().data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn autocorr_oracle_small_cases() {
        let ones = RTensor::from_vec(Shape::new(&[2, 2]).unwrap(), vec![1.0; 4]).unwrap();
        assert_eq!(circular_autocorr_oracle(&ones).unwrap().data(), &[4.0; 4]);
        let mut imp = vec![0.0; 6];
        imp[4] = 1.0;
        let imp = RTensor::from_vec(Shape::new(&[2, 3]).unwrap(), imp).unwrap();
        assert_eq!(
            circular_autocorr_oracle(&imp).unwrap().data(),
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn wiener_khinchin_4x6() {
        let mut rng = SeededRng::new(46);
        let a = RTensor::from_vec(Shape::new(&[4, 6]).unwrap(), (0..24).map(|_| rng.normal()).collect()).unwrap();
        let spectral = circular_autocorr_spectral(&a).unwrap();
        let direct = circular_autocorr_oracle(&a).unwrap();
        assert!(max_abs_diff(spectral.data(), &to_complex(direct.data())) < 1e-9);
        assert!(spectral.max_abs_imag() < 1e-10);
    }

    proptest! {
        #[test]
        fn linearity(n in 1usize..=128, seed: u64, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let x = random_complex(n, seed);
            let y = random_complex(n, seed.wrapping_add(1));
            let mix: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a * alpha + b * beta).collect();
            let fx = fft1d(&x, Direction::Forward).unwrap();
            let fy = fft1d(&y, Direction::Forward).unwrap();
            let want: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a * alpha + b * beta).collect();
            prop_assert!(max_abs_diff(&fft1d(&mix, Direction::Forward).unwrap(), &want) < 1e-10);
        }

        #[test]
        fn real_input_is_conjugate_symmetric(n in 1usize..=300, seed: u64) {
            let mut rng = SeededRng::new(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            prop_assert!(Spectrum1D::of_real(&x).unwrap().conjugate_symmetry_error() < 1e-12);
        }
    }
}
