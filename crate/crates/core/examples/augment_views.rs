//! Applies one task at every strength to a small test image and prints how
//! far the two views of a pair drift apart.
//!
//! Usage: cargo run --example augment_views [family]

use pretext_eval::augment::{sample_view_pair, Family, Image, PretextTask};
use pretext_eval::rng::Rng;

fn checkerboard() -> Image {
    let (c, h, w) = (3, 8, 8);
    let data = (0..c * h * w)
        .map(|i| {
            let (ch, y, x) = (i / (h * w), (i / w) % h, i % w);
            if (x + y) % 2 == 0 { 0.2 + 0.3 * ch as f32 } else { 0.9 }
        })
        .collect();
    Image::new(c, h, w, data).expect("shape matches")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let family: Family = std::env::args().nth(1).unwrap_or("RandomRotation".into()).parse()?;
    let img = checkerboard();
    let mut rng = Rng::new(7);
    println!("{family}: mean |view_a - view_b| over 20 pairs");
    for s in family.strength_range() {
        let task = PretextTask::new(family, s)?;
        let mut total = 0.0;
        for _ in 0..20 {
            let (a, b) = sample_view_pair(&img, &task, &mut rng);
            total += a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.data().len() as f64;
        }
        println!("  {task:<28} {:.4}", total / 20.0);
    }
    Ok(())
}
