//! Builds the default encoder and embeds a few synthetic forms.
//!
//! cargo run --example encode

use loanword::detector::{cosine_similarity, hidden_representations};
use loanword::encoder::{EncoderConfig, InputEncoder, ModelParams};

fn main() -> loanword::Result<()> {
    let cfg = EncoderConfig::default();
    println!("default encoder: {} parameters", cfg.param_count());
    let params = ModelParams::<f32>::init(&cfg, 42)?;
    let wl = loanword::synthetic::planted_fixture(7);
    let hidden = hidden_representations(&params, &InputEncoder::Features, &wl, 1)?;
    println!("hidden matrix {}x{}", hidden.nrows(), hidden.ncols());
    let forms = wl.forms();
    for (i, j) in [(0, 1), (0, 3)] {
        let s = cosine_similarity(hidden.row(i), hidden.row(j))?;
        println!("untrained cosine {} {} vs {} {}: {s:.3}", forms[i].id, forms[i].raw_form, forms[j].id, forms[j].raw_form);
    }
    Ok(())
}
