//! Fourier-domain operators for video feature tensors.
//!
//! The crate implements two operators that act on mid-level features of
//! shape `(C, T', H', W')`:
//!
//! * **Fourier object disentanglement** ([`fo`]): a temporal FFT per
//!   `(c, h, w)` line is reduced to a frequency-weighted energy mask that
//!   highlights moving content, and the mask is applied back to the
//!   features.
//! * **Fourier space-time attention** ([`fa`]): each channel is viewed as a
//!   `T' x (H'W')` matrix, its power spectrum is inverted back to a circular
//!   autocorrelation, and the result is fused into the input with a small
//!   residual weight.
//!
//! Around them sit the supporting pieces: a dense tensor type and its binary
//! file format ([`tensor`]), FFTs with brute-force oracles ([`fft`]), a
//! random-offset uniform frame sampler ([`sampler`]), a synthetic labelled
//! scene generator ([`synth`]), a small 3-D convolutional stem
//! ([`backbone`]), hand-derived vector-Jacobian products ([`grad`]), FLOP
//! models and timing sweeps ([`bench`]), self-checks ([`check`]) and the
//! pipeline commands behind the `far` binary ([`cli`]).

pub mod backbone;
pub mod bench;
pub mod check;
pub mod cli;
pub mod error;
pub mod fa;
pub mod fft;
pub mod fo;
pub mod grad;
pub mod pgm;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod tensor;

pub use error::{FarError, Result};
pub use tensor::{CTensor, DynamicMask, RTensor, Shape, Shape4};

pub use rustfft::num_complex::Complex64;
