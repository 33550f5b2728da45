//! PMI-only versus cosine weighting: a weight sweep over cached scores.
//!
//! cargo run --example sweep

use loanword::detector::{hidden_representations, score_pairs, DetectConfig, ScoringInputs};
use loanword::encoder::{EncoderConfig, InputEncoder};
use loanword::evalrep::{linear_grid, sweep, sweep_tsv, SweepAxis};
use loanword::pmialign::NedNormalization;
use loanword::trainer::{train, AugmentConfig, TrainConfig};

fn main() -> loanword::Result<()> {
    let wl = loanword::synthetic::planted_fixture(7);
    let pmi = loanword::bundled::pmi();
    let tc = TrainConfig { batch_size: 12, seed: 7, ..TrainConfig::default() };
    let (params, _) = train(&wl, &InputEncoder::Features, &EncoderConfig::default(), &tc, &AugmentConfig::default())?;
    let hidden = hidden_representations(&params, &InputEncoder::Features, &wl, 1)?;
    let inputs = ScoringInputs {
        wordlist: &wl,
        hidden: Some(&hidden),
        pmi: Some(&pmi),
        colex: None,
        ned_norm: NedNormalization::default(),
    };
    let base = DetectConfig::default();
    let table = score_pairs(inputs, base.mode, 1)?;
    let rows = sweep(&wl, &table, &base, SweepAxis::CosineWeight, &linear_grid(0.0, 1.0, 11))?;
    print!("{}", sweep_tsv(SweepAxis::CosineWeight, &rows));
    Ok(())
}
