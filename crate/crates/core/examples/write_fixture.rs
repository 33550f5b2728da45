//! Writes the planted-borrowing fixture and the cluster corpus as TSV.
//!
//! cargo run --example write_fixture -- DIR

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("planted.tsv"), loanword::synthetic::planted_fixture_tsv(7))?;
    std::fs::write(dir.join("clusters.tsv"), loanword::synthetic::cluster_corpus_tsv(1, 20, 10))?;
    println!("wrote {}/planted.tsv and {}/clusters.tsv", dir.display(), dir.display());
    Ok(())
}
