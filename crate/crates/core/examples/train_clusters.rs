//! Contrastive training on the 200-form cluster corpus at default settings.
//!
//! cargo run --example train_clusters

use loanword::detector::{cosine_similarity, hidden_representations};
use loanword::encoder::{EncoderConfig, InputEncoder};
use loanword::trainer::{train, AugmentConfig, TrainConfig};

fn main() -> loanword::Result<()> {
    let wl = loanword::synthetic::cluster_corpus(1);
    let (params, log) = train(
        &wl,
        &InputEncoder::Features,
        &EncoderConfig::default(),
        &TrainConfig::default(),
        &AugmentConfig::default(),
    )?;
    for (e, m) in log.epoch_means().iter().enumerate() {
        println!("epoch {} mean loss {m:.4}", e + 1);
    }
    let h = hidden_representations(&params, &InputEncoder::Features, &wl, 1)?;
    let forms = wl.forms();
    let (mut same, mut other) = (Vec::new(), Vec::new());
    for i in 0..forms.len() {
        for j in i + 1..forms.len() {
            let s = cosine_similarity(h.row(i), h.row(j))?;
            if forms[i].concept == forms[j].concept { same.push(s) } else { other.push(s) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean cosine within clusters {:.3}, across {:.3}", mean(&same), mean(&other));
    Ok(())
}
