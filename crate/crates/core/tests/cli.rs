use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use loanword::bundled;
use loanword::detector::{detect, parse_predictions, CandidateMode, DetectConfig, ScoringInputs, Scorer};
use loanword::pmialign::NedNormalization;
use loanword::synthetic;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loanword"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    wordlist: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let wordlist = dir.path().join("fixture.tsv");
        std::fs::write(&wordlist, synthetic::planted_fixture_tsv(7)).unwrap();
        Self { dir, wordlist }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// `command` over the fixture, with the batch size the 36 forms allow.
    fn run(&self, command: &str, out: &str, extra: &[&str]) -> Output {
        let o = self.out(out);
        let mut args = vec![
            command,
            "--wordlist",
            s(&self.wordlist),
            "--donor",
            synthetic::FIXTURE_DONOR,
            "--seed",
            "7",
            "--set",
            "batch_size=12",
            "--out",
            s(&o),
        ];
        args.extend_from_slice(extra);
        let output = run(&args);
        assert!(
            output.status.success(),
            "{command} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        output
    }
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let f = Fixture::new();
    let o = run(&["detect", "--wordlist", s(&f.wordlist), "--donor", "Donor", "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["detect", "--wordlist", "/nonexistent/wl.tsv", "--donor", "Donor"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/wl.tsv"));
}

#[test]
fn default_train_writes_a_reusable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let wl = dir.path().join("clusters.tsv");
    std::fs::write(&wl, synthetic::cluster_corpus_tsv(1, 20, 10)).unwrap();
    let out = dir.path().join("train");
    let o = run(&["train", "--wordlist", s(&wl), "--donor", "L00", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = read(out.join("checkpoint.txt"));
    assert!(ckpt.lines().any(|l| l == "param_count = 866304"));
    let log = read(out.join("training_log.tsv"));
    assert!(log.lines().count() > 1);
    assert!(read(out.join("manifest.tsv")).contains("config_hash"));

    let det = dir.path().join("detect");
    let o = run(&["detect", "--config", s(&out.join("config.txt")), "--out", s(&det)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(det.join("predictions.tsv")).starts_with("ID\tLANGUAGE"));
}

#[test]
fn zero_epochs_keeps_the_initialization() {
    let f = Fixture::new();
    f.run("train", "t0", &["--epochs", "0"]);
    assert_eq!(read(f.out("t0").join("training_log.tsv")).lines().count(), 1);
    assert!(read(f.out("t0").join("checkpoint.txt")).contains("param_count"));
}

#[test]
fn unreachable_threshold_flags_nothing() {
    let f = Fixture::new();
    f.run("detect", "d", &["--threshold", "2.0"]);
    let preds = parse_predictions(&read(f.out("d").join("predictions.tsv")), "p").unwrap();
    assert!(!preds.is_empty());
    assert!(preds.iter().all(|p| !p.predicted_borrowed && p.threshold == Some(2.0)));
}

#[test]
fn zero_cosine_weight_matches_pmi_only_library_run() {
    let f = Fixture::new();
    f.run("detect", "d", &["--cosine-weight", "0"]);
    let cli = parse_predictions(&read(f.out("d").join("predictions.tsv")), "p").unwrap();
    let wl = synthetic::planted_fixture(7);
    let pmi = bundled::pmi();
    let inputs = ScoringInputs {
        wordlist: &wl,
        hidden: None,
        pmi: Some(&pmi),
        colex: None,
        ned_norm: NedNormalization::default(),
    };
    let cfg = DetectConfig {
        mode: CandidateMode::DonorFixed,
        scorer: Scorer::Combined { cosine_weight: 0.0 },
        seed: 7,
        ..DetectConfig::default()
    };
    let lib = detect(inputs, &cfg).unwrap().predictions;
    assert_eq!(cli.len(), lib.len());
    for (c, l) in cli.iter().zip(&lib) {
        assert_eq!(c.id, l.id);
        assert_eq!(c.predicted_borrowed, l.predicted_borrowed, "{}", c.id);
        let (cb, lb) = (c.best_candidate.as_ref().unwrap(), l.best_candidate.as_ref().unwrap());
        assert_eq!(cb.id, lb.id);
        assert!((cb.score - lb.score).abs() < 1e-12);
    }
    // no model is trained for a PMI-only run
    assert!(!f.out("d").join("checkpoint.txt").exists());
}

#[test]
fn evaluate_sweep_and_explain() {
    let f = Fixture::new();
    f.run("train", "t", &[]);
    let ckpt = f.out("t").join("checkpoint.txt");
    f.run("evaluate", "e", &["--checkpoint", s(&ckpt)]);
    let report = read(f.out("e").join("report.tsv"));
    let mut lines = report.lines();
    assert!(lines.next().unwrap().starts_with("# seeds="));
    assert!(lines.next().unwrap().starts_with("METHOD\tSUPERVISION\tLANGUAGE"));
    for method in ["pmi", "cosine", "combined"] {
        assert!(report.lines().any(|l| l.starts_with(&format!("{method}\t"))), "{method}");
    }

    f.run("sweep", "s", &["--checkpoint", s(&ckpt), "--axis", "threshold", "--points", "5"]);
    assert_eq!(read(f.out("s").join("sweep.tsv")).lines().count(), 6);

    let o = f.run("explain", "x", &["--checkpoint", s(&ckpt), "a00", "d00"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("a00") && text.contains("d00"));
    assert!(text.to_lowercase().contains("cosine"));
}

fn check_svg(text: &str) {
    let doc = roxmltree::Document::parse(text).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let class = |c: &str| doc.descendants().filter(|n| n.attribute("class") == Some(c)).count();
    assert!(class("component") >= 1);
    assert_eq!(class("threshold"), 1);
}

#[test]
fn plot_from_dump_and_live() {
    let f = Fixture::new();
    f.run("detect", "d", &["--dump-similarities"]);
    let dump = f.out("d").join("similarities.tsv");
    let svg = f.out("from_dump.svg");
    f.run("plot", "p", &["--similarities", s(&dump), "--output", s(&svg)]);
    check_svg(&read(svg));

    f.run("plot", "live", &["--language", "RecipA"]);
    check_svg(&read(f.out("live").join("plot_RecipA.svg")));
}
