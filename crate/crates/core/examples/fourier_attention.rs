//! Fourier attention next to the dense self-attention it replaces, with the
//! FLOP models of both.

use far::fa::{fa_flops, fourier_attention_detailed, sa_flops, self_attention_dense, AttnWeightsDense, FaConfig};
use far::tensor::{make_tensor, FillSpec};
use far::Shape4;

fn main() -> far::Result<()> {
    let shape = Shape4::new(4, 4, 4, 4)?;
    let f = make_tensor(shape, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed: 5 })?;

    let fa = fourier_attention_detailed(&f, &FaConfig::default())?;
    let delta = fa.output.sub(&f)?;
    println!("FA: max |output - f| = {:.4} (lambda 0.01), imaginary residue {:.1e}", delta.max_abs(), fa.max_imag_residue);
    println!("    correlation at zero lag, channel 0: {:.4}", fa.correlation.data()[0]);

    let sa = self_attention_dense(&f, &AttnWeightsDense::seeded(4, 7))?;
    println!("SA: max |output| = {:.4}", sa.max_abs());

    for thw in [64, 512, 4096] {
        let s = Shape4::new(16, 8, 1, thw / 8)?;
        let (a, b) = (sa_flops(s), fa_flops(s));
        println!("THW {thw:>4}: SA {:.3e} FLOPs, FA {:.3e} FLOPs, ratio {:.1}", a.total(), b.total(), a.total() / b.total());
    }
    Ok(())
}
