//! Hand-derived VJPs against central differences, and the effect of the
//! step size.

use far::fa::{FaApplyMode, FaConfig};
use far::fo::FreqWeightMode;
use far::grad::{fd_check, reports_csv, GradOp};
use far::Shape4;

fn main() -> far::Result<()> {
    let shape = Shape4::new(2, 6, 3, 3)?;
    let ops = [
        GradOp::DisentangleL2(FreqWeightMode::default()),
        GradOp::FourierAttention(FaConfig::default()),
        GradOp::FourierAttention(FaConfig::new(0.1, FaApplyMode::Eq7Literal)?),
        GradOp::LinearSpectrum,
    ];
    let mut reports = Vec::new();
    for op in ops {
        for eps in [1e-1, 1e-3, 1e-5, 1e-8] {
            reports.push(fd_check(op, shape, 42, eps)?);
        }
    }
    print!("{}", reports_csv(&reports));
    Ok(())
}
