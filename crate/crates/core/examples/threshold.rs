//! Automatic thresholds on a bimodal and a unimodal sample.
//!
//! cargo run --example threshold

use loanword::gmmthresh::auto_threshold;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn draw(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let d = Normal::new(mean, sd).expect("positive sd");
    (0..n).map(|_| d.sample(rng)).collect()
}

fn main() -> loanword::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bimodal = draw(&mut rng, 500, 0.1, 0.03);
    bimodal.extend(draw(&mut rng, 500, 0.8, 0.05));
    let unimodal = draw(&mut rng, 1000, 0.2, 0.05);
    for (name, xs) in [("bimodal", &bimodal), ("unimodal", &unimodal)] {
        let d = auto_threshold(name, xs, 0)?;
        println!("{name}: threshold {:.4} via {}", d.value, d.method);
        if let Some(fit) = d.chosen_fit() {
            for c in &fit.components {
                println!("  w={:.3} mean={:.3} sd={:.3}", c.weight, c.mean, c.variance.sqrt());
            }
        }
    }
    Ok(())
}
