//! Exhaustively checks the risk bound on random finite worlds.
//!
//! Usage: cargo run --release --example verify_bounds [worlds] [seed]

use pretext_eval::worlds::{sweep, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let worlds = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let cfg = SweepConfig {
        worlds,
        ..SweepConfig::default()
    };
    let r = sweep(&cfg, seed)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    println!("violations: {}", r.total_violations());
    Ok(())
}
