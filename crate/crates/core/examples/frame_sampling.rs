//! Uniform frame sampling with a random first frame.

use far::sampler::{plan_samples, CSV_HEADER};

fn main() -> far::Result<()> {
    println!("{CSV_HEADER}");
    for (total, want, seed) in [(100, 8, 0), (100, 8, 1), (300, 16, 2), (8, 8, 3), (5, 8, 4)] {
        println!("{}", plan_samples(total, want, seed)?.csv_row());
    }

    let mut hist = [0usize; 12];
    for seed in 0..12_000 {
        hist[plan_samples(100, 8, seed)?.offset] += 1;
    }
    println!("offset histogram over 12000 seeds (step 12): {hist:?}");
    Ok(())
}
