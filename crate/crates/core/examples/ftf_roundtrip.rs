//! Writes a tensor to the binary FTF format and reads it back.

use far::tensor::{make_tensor, read_ftf, write_ftf, FillSpec};
use far::Shape4;

fn main() -> far::Result<()> {
    let dir = std::env::temp_dir().join("far-ftf-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("clip.ftf");

    let t = make_tensor(Shape4::new(3, 8, 16, 16)?, FillSpec::SeededUniform { lo: 0.0, hi: 1.0, seed: 42 })?;
    write_ftf(t.clone(), &path)?;
    let bytes = std::fs::read(&path)?;
    println!("{} bytes, header {:02x?}", bytes.len(), &bytes[..24]);

    let back = read_ftf(&path)?.into_real()?;
    println!("round trip exact: {}", back == t);
    Ok(())
}
