//! Writes an SVG of a bimodal score distribution with its fit.
//!
//! cargo run --example plot -- scores.svg

use loanword::gmmthresh::auto_threshold;
use loanword::plot::render_svg;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "scores.svg".into());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (lo, hi) = (Normal::new(0.25, 0.08).unwrap(), Normal::new(0.7, 0.06).unwrap());
    let mut xs: Vec<f64> = (0..800).map(|_| lo.sample(&mut rng)).collect();
    xs.extend((0..200).map(|_| hi.sample(&mut rng)));
    let d = auto_threshold("demo", &xs, 0)?;
    std::fs::write(&path, render_svg(&xs, &d, "demo scores")?)?;
    println!("threshold {:.4} ({}), wrote {path}", d.value, d.method);
    Ok(())
}
