//! Affine-gap PMI alignment of two ASJP strings with the bundled matrix.
//!
//! cargo run --example align -- kasa gasa

use loanword::pmialign::{align, ned_similarity, NedNormalization};

fn main() -> loanword::Result<()> {
    let mut args = std::env::args().skip(1);
    let a = args.next().unwrap_or_else(|| "kaballo".into());
    let b = args.next().unwrap_or_else(|| "kawayu".into());
    let m = loanword::bundled::pmi();
    let al = align(&a, &b, &m)?;
    println!("{al}");
    println!("score {:.4}", al.score);
    let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    println!("NED similarity {:.4}", ned_similarity(&ca, &cb, NedNormalization::default()));
    Ok(())
}
