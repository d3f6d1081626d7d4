//! FFT against the literal DFT sum, and Wiener-Khinchin on a small matrix.

use far::fft::{circular_autocorr_oracle, circular_autocorr_spectral, dft_oracle, fft1d, max_abs_diff, Direction};
use far::rng::SeededRng;
use far::{Complex64, RTensor, Shape};

fn main() -> far::Result<()> {
    let mut rng = SeededRng::new(1);
    for n in [8, 12, 17, 64, 97] {
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
        let err = max_abs_diff(&fft1d(&x, Direction::Forward)?, &dft_oracle(&x, Direction::Forward)?);
        println!("N = {n:>3}: |fft - dft| = {err:.2e}");
    }

    let a = RTensor::from_vec(Shape::new(&[4, 6])?, (0..24).map(|_| rng.uniform_in(-1.0, 1.0)).collect())?;
    let spectral = circular_autocorr_spectral(&a)?;
    let direct = circular_autocorr_oracle(&a)?;
    let err = spectral
        .real_part()
        .data()
        .iter()
        .zip(direct.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!("4x6 autocorrelation: spectral vs loop {err:.2e}, imaginary residue {:.2e}", spectral.max_abs_imag());
    Ok(())
}
