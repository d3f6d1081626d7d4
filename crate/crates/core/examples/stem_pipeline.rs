//! Clip -> sampled frames -> stem -> FO and FA -> sum fusion, in memory.

use far::cli::{run_pipeline, stats_csv, RunConfig, RunSource, BUILTIN_DEMO};

fn main() -> far::Result<()> {
    let cfg = RunConfig {
        source: Some(RunSource::Scene(BUILTIN_DEMO.into())),
        seed: 7,
        ..RunConfig::default()
    };
    let out = run_pipeline(&cfg)?;
    println!("sampled frames {:?}", out.plan.indices);
    println!("mid-level features {}", out.features.shape());
    println!("fused output {}", out.fused.shape());
    print!("{}", stats_csv(&out)?);
    Ok(())
}
