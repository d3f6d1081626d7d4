//! Region means of the four-region scene before and after FO in residual
//! mode.

use far::fo::{disentangle, FoConfig};
use far::synth::{generate, is_strictly_ordered, region_mean_amplitudes, RegionKind, SceneSpec};

fn main() -> far::Result<()> {
    let (f, labels) = generate(&SceneSpec::standard(0.05, 11))?;
    let before = region_mean_amplitudes(&f, &labels)?;
    let out = disentangle(&f, &FoConfig::residual(1.0))?;
    let after = region_mean_amplitudes(&out, &labels)?;

    println!("{:<19} {:>8} {:>8}", "region", "input", "FO");
    for kind in RegionKind::ORDER {
        println!("{:<19} {:>8.4} {:>8.4}", kind.name(), before[&kind], after[&kind]);
    }
    println!("input ordered: {}, output ordered: {}", is_strictly_ordered(&before), is_strictly_ordered(&after));
    Ok(())
}
