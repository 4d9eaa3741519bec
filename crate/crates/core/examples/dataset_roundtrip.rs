//! Writes a synthetic world to KPD1 files, reads them back and checks that
//! nothing changed.
//!
//! Usage: cargo run --example dataset_roundtrip [out_dir]

use pretext_eval::dataset::{read_dataset, write_dataset};
use pretext_eval::worlds::{gen_synthetic, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir().join("pretext-eval-roundtrip").display().to_string()
    }));
    std::fs::create_dir_all(&dir)?;
    let world = gen_synthetic(&SynthSpec::default())?;
    for (name, ds) in [("labeled", &world.labeled), ("unlabeled", &world.unlabeled), ("test", &world.test)] {
        let path = dir.join(format!("{name}.kpd"));
        write_dataset(&path, ds)?;
        let back = read_dataset(&path)?;
        assert_eq!(&back, ds);
        println!("{}: {} samples, {} bytes, identical", path.display(), back.len(), std::fs::metadata(&path)?.len());
    }
    Ok(())
}
