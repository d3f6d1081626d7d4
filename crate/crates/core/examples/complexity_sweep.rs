//! Timed sweep of FA, dense SA and FO over space-time sizes, with log-log
//! slopes and CSVs.
//!
//!     cargo run --release --example complexity_sweep -- [out_dir]

use far::bench::{complexity_sweep, SweepOp};

fn main() -> far::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "far-sweep".into());
    let sizes = [64, 128, 256, 512, 1024];
    for op in [SweepOp::Sa, SweepOp::Fa, SweepOp::Fo] {
        let r = complexity_sweep(op, &sizes, 8, 5)?;
        for row in &r.timings {
            println!("{:<2} THW {:>5}: {:.3e} s", op.name(), row.shape.thw(), row.median_seconds);
        }
        println!("{:<2} slope {:.2}", op.name(), r.time_slope());
        r.write_csv(format!("{out}/{}", op.name()))?;
    }
    Ok(())
}
