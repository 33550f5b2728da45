//! Train, score, threshold and evaluate on the planted fixture.
//!
//! cargo run --example detect_fixture

use loanword::detector::{detect, hidden_representations, DetectConfig, ScoringInputs};
use loanword::encoder::{EncoderConfig, InputEncoder};
use loanword::evalrep::{evaluate_detection, metrics, ConfusionCounts};
use loanword::pmialign::NedNormalization;
use loanword::trainer::{train, AugmentConfig, TrainConfig};

fn main() -> loanword::Result<()> {
    let wl = loanword::synthetic::planted_fixture(7);
    let pmi = loanword::bundled::pmi();
    // 36 forms, so the default batch of 128 does not fit
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
    let cfg = DetectConfig::default();
    let d = detect(inputs, &cfg)?;
    for t in d.thresholds.values() {
        println!("{}: threshold {:.4} ({})", t.language, t.value, t.method);
    }
    for p in d.predictions.iter().filter(|p| p.predicted_borrowed) {
        let b = p.best_candidate.as_ref().expect("flagged forms have a candidate");
        println!("flagged {} <- {} ({:.3})", p.id, b.id, b.score);
    }
    let mut total = ConfusionCounts::default();
    for c in evaluate_detection(&wl, &d, cfg.mode)?.values() {
        total += *c;
    }
    let m = metrics(&total)?;
    println!("precision {:.3} recall {:.3} F1 {:.3}", m.precision, m.recall, m.f1);
    Ok(())
}
