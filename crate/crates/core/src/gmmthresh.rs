//! Automatic per-language thresholds: 1- and 2-component Gaussian mixtures
//! compared by BIC, the component intersection found with Brent's method,
//! and a mean + standard deviation fallback.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITER: usize = 200;
pub const VARIANCE_FLOOR_FRACTION: f64 = 1e-6;
pub const BRENT_TOLERANCE: f64 = 1e-9;
pub const BIC_TIE: f64 = 1e-9;
pub const MIN_AUTO_SAMPLES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Component {
    /// `ln(w · N(x; μ, σ²))`.
    pub fn log_weighted_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        self.weight.ln() - 0.5 * (2.0 * PI * self.variance).ln() - d * d / (2.0 * self.variance)
    }

    pub fn weighted_density(&self, x: f64) -> f64 {
        self.log_weighted_density(x).exp()
    }
}

/// A fitted mixture; components are ordered by ascending mean.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmFit {
    pub components: Vec<Component>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub n: usize,
    /// Log-likelihood after initialization and after every EM iteration.
    pub trace: Vec<f64>,
}

impl GmmFit {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weighted_density(x)).sum()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_likelihood(xs: &[f64], comps: &[Component]) -> f64 {
    xs.iter()
        .map(|&x| {
            comps
                .iter()
                .map(|c| c.log_weighted_density(x))
                .fold(f64::NEG_INFINITY, log_sum_exp)
        })
        .sum()
}

pub fn bic(k: usize, n: usize, log_likelihood: f64) -> f64 {
    (3 * k - 1) as f64 * (n as f64).ln() - 2.0 * log_likelihood
}

/// Fits a `k`-component mixture (`k` ∈ {1, 2}) by EM. Initialization is
/// deterministic: one component takes the sample moments; two components
/// start at the 25th and 75th percentiles with equal weights and the
/// sample variance.
pub fn fit_gmm(samples: &[f64], k: usize) -> Result<GmmFit> {
    if !(k == 1 || k == 2) {
        return Err(Error::Config(format!("mixtures have 1 or 2 components, not {k}")));
    }
    let n = samples.len();
    if n < 10 * k {
        return Err(Error::TooFewSamples { needed: 10 * k, got: n });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("samples must be finite".into()));
    }
    let m = mean(samples);
    let var = population_variance(samples, m);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let floor = VARIANCE_FLOOR_FRACTION * var;
    if k == 1 {
        let comps = vec![Component {
            weight: 1.0,
            mean: m,
            variance: var,
        }];
        let ll = log_likelihood(samples, &comps);
        return Ok(GmmFit {
            components: comps,
            log_likelihood: ll,
            bic: bic(1, n, ll),
            n,
            trace: vec![ll],
        });
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut comps = vec![
        Component {
            weight: 0.5,
            mean: percentile(&sorted, 0.25),
            variance: var,
        },
        Component {
            weight: 0.5,
            mean: percentile(&sorted, 0.75),
            variance: var,
        },
    ];
    let mut ll = log_likelihood(samples, &comps);
    let mut trace = vec![ll];
    let mut resp = vec![0.0; n];
    for _ in 0..EM_MAX_ITER {
        // E step: responsibility of component 0
        for (r, &x) in resp.iter_mut().zip(samples) {
            let (l0, l1) = (comps[0].log_weighted_density(x), comps[1].log_weighted_density(x));
            *r = (l0 - log_sum_exp(l0, l1)).exp();
        }
        // M step
        let mut next = comps.clone();
        for (c, slot) in next.iter_mut().enumerate() {
            let w: Vec<f64> = resp.iter().map(|&r| if c == 0 { r } else { 1.0 - r }).collect();
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let mu = w.iter().zip(samples).map(|(w, x)| w * x).sum::<f64>() / total;
            let v = w.iter().zip(samples).map(|(w, x)| w * (x - mu) * (x - mu)).sum::<f64>() / total;
            *slot = Component {
                weight: total / n as f64,
                mean: mu,
                variance: v.max(floor),
            };
        }
        let next_ll = log_likelihood(samples, &next);
        comps = next;
        let improvement = next_ll - ll;
        ll = next_ll;
        trace.push(ll);
        if improvement < EM_TOLERANCE {
            break;
        }
    }
    comps.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    Ok(GmmFit {
        components: comps,
        log_likelihood: ll,
        bic: bic(2, n, ll),
        n,
        trace,
    })
}

/// The lower-BIC fit; near-ties go to the simpler model.
pub fn select_model<'a>(fit1: &'a GmmFit, fit2: &'a GmmFit) -> &'a GmmFit {
    if fit2.bic < fit1.bic - BIC_TIE {
        fit2
    } else {
        fit1
    }
}

/// Brent's bracketing root finder on `[a, b]`; `f(a)` and `f(b)` must have
/// opposite signs (or one be zero).
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// Point between the two means where the weighted densities are equal.
/// `Ok(None)` when the density difference has the same sign at both means.
pub fn intersection_threshold(fit: &GmmFit) -> Result<Option<f64>> {
    if fit.k() != 2 {
        return Err(Error::Invalid(format!("intersection needs 2 components, fit has {}", fit.k())));
    }
    let (c1, c2) = (fit.components[0], fit.components[1]);
    if c1.mean == c2.mean {
        return Err(Error::EqualMeans(c1.mean));
    }
    let (lo, hi) = (c1.mean.min(c2.mean), c1.mean.max(c2.mean));
    // log-density difference: same roots and signs, no underflow in the tails
    let g = |x: f64| c1.log_weighted_density(x) - c2.log_weighted_density(x);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo.signum() == g_hi.signum() || g_lo == 0.0 || g_hi == 0.0 {
        return Ok(None);
    }
    Ok(brent(g, lo, hi, BRENT_TOLERANCE))
}

/// Mean plus population standard deviation.
pub fn fallback_threshold(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let m = mean(samples);
    Ok(m + population_variance(samples, m).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThresholdMethod {
    GmmIntersection,
    FallbackMeanStd,
    Manual,
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdMethod::GmmIntersection => "gmm_intersection",
            ThresholdMethod::FallbackMeanStd => "fallback_mean_std",
            ThresholdMethod::Manual => "manual",
        })
    }
}

impl FromStr for ThresholdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm_intersection" => Ok(Self::GmmIntersection),
            "fallback_mean_std" => Ok(Self::FallbackMeanStd),
            "manual" => Ok(Self::Manual),
            other => Err(Error::Config(format!("unknown threshold method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdDecision {
    pub language: String,
    pub value: f64,
    pub method: ThresholdMethod,
    /// The 1- and 2-component fits behind an automatic decision.
    pub fits: Option<(GmmFit, GmmFit)>,
}

impl ThresholdDecision {
    pub fn manual(language: impl Into<String>, value: f64) -> Self {
        Self {
            language: language.into(),
            value,
            method: ThresholdMethod::Manual,
            fits: None,
        }
    }

    /// The fit selected by BIC, if this decision was automatic.
    pub fn chosen_fit(&self) -> Option<&GmmFit> {
        self.fits.as_ref().map(|(f1, f2)| select_model(f1, f2))
    }
}

/// Full procedure: fit both mixtures, keep the lower BIC, and use the
/// intersection if the two-component model wins and has one; otherwise
/// mean + std. The fits are deterministic, so `seed` is only recorded.
pub fn auto_threshold(language: &str, samples: &[f64], _seed: u64) -> Result<ThresholdDecision> {
    if samples.len() < MIN_AUTO_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_AUTO_SAMPLES,
            got: samples.len(),
        });
    }
    let mut decision = ThresholdDecision {
        language: language.to_string(),
        value: 0.0,
        method: ThresholdMethod::FallbackMeanStd,
        fits: None,
    };
    // constant scores: no mixture to fit, mean + std is the constant
    let fit1 = match fit_gmm(samples, 1) {
        Err(Error::ZeroVariance) => {
            decision.value = fallback_threshold(samples)?;
            return Ok(decision);
        }
        other => other?,
    };
    let fit2 = fit_gmm(samples, 2)?;
    let crossing = if std::ptr::eq(select_model(&fit1, &fit2), &fit2) {
        match intersection_threshold(&fit2) {
            Ok(x) => x,
            Err(Error::EqualMeans(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    match crossing {
        Some(x) => {
            decision.value = x;
            decision.method = ThresholdMethod::GmmIntersection;
        }
        None => decision.value = fallback_threshold(samples)?,
    }
    decision.fits = Some((fit1, fit2));
    Ok(decision)
}

pub fn threshold_report_tsv(decisions: &[ThresholdDecision]) -> String {
    let mut out = String::from("LANGUAGE\tMETHOD\tTHRESHOLD\tBIC1\tBIC2\tW1\tMU1\tVAR1\tW2\tMU2\tVAR2\n");
    for d in decisions {
        let _ = write!(out, "{}\t{}\t{}", d.language, d.method, d.value);
        match &d.fits {
            Some((f1, f2)) => {
                let _ = write!(out, "\t{}\t{}", f1.bic, f2.bic);
                for c in &f2.components {
                    let _ = write!(out, "\t{}\t{}\t{}", c.weight, c.mean, c.variance);
                }
                out.push('\n');
            }
            None => out.push_str("\t\t\t\t\t\t\t\t\n"),
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn two(c1: Component, c2: Component) -> GmmFit {
        GmmFit {
            components: vec![c1, c2],
            log_likelihood: 0.0,
            bic: 0.0,
            n: 0,
            trace: vec![],
        }
    }

    fn comp(weight: f64, mean: f64, variance: f64) -> Component {
        Component { weight, mean, variance }
    }

    pub(crate) fn bimodal(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Normal::new(0.1, 0.03).unwrap();
        let b = Normal::new(0.8, 0.05).unwrap();
        (0..n)
            .map(|i| if i % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect()
    }

    fn normal(seed: u64, n: usize, mu: f64, sd: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn single_component_closed_form() {
        let mut xs = vec![0.0; 5];
        xs.extend([2.0; 5]);
        let f = fit_gmm(&xs, 1).unwrap();
        assert_eq!(f.components[0].mean, 1.0);
        assert_eq!(f.components[0].variance, 1.0);
        assert_eq!(f.bic, 2.0 * 10f64.ln() - 2.0 * f.log_likelihood);
    }

    #[test]
    fn two_component_recovery_and_monotone_em() {
        let f = fit_gmm(&bimodal(1, 1000), 2).unwrap();
        assert!((f.components[0].mean - 0.1).abs() < 0.02);
        assert!((f.components[1].mean - 0.8).abs() < 0.02);
        assert!(f.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert_eq!(f.bic, 5.0 * 1000f64.ln() - 2.0 * f.log_likelihood);
        let w: f64 = f.components.iter().map(|c| c.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(fit_gmm(&[1.0; 5], 1), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_gmm(&[1.0; 30], 2), Err(Error::ZeroVariance)));
        let flat = auto_threshold("x", &[0.7; 25], 0).unwrap();
        assert_eq!((flat.method, flat.value), (ThresholdMethod::FallbackMeanStd, 0.7));
        assert!(matches!(auto_threshold("x", &[0.1, 0.2, 0.3, 0.4, 0.5], 0), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn model_selection() {
        let xs = bimodal(2, 1000);
        let (f1, f2) = (fit_gmm(&xs, 1).unwrap(), fit_gmm(&xs, 2).unwrap());
        assert_eq!(select_model(&f1, &f2).k(), 2);
        let ys = normal(3, 1000, 0.2, 0.05);
        let (g1, g2) = (fit_gmm(&ys, 1).unwrap(), fit_gmm(&ys, 2).unwrap());
        assert_eq!(select_model(&g1, &g2).k(), 1);
        let mut tie = g2.clone();
        tie.bic = g1.bic;
        assert_eq!(select_model(&g1, &tie).k(), 1);
    }

    #[test]
    fn symmetric_intersection_is_midpoint() {
        let f = two(comp(0.5, 0.0, 1.0), comp(0.5, 2.0, 1.0));
        let x = intersection_threshold(&f).unwrap().unwrap();
        assert!((x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unequal_variance_matches_quadratic() {
        let f = two(comp(0.5, 0.0, 1.0), comp(0.5, 3.0, 4.0));
        let x = intersection_threshold(&f).unwrap().unwrap();
        // log f1 = log f2: -x²/2 = -ln 2 - (x-3)²/8  ⇒  3x² + 6x - 9 - 8 ln 2 = 0
        let (a, b, c) = (3.0, 6.0, -9.0 - 8.0 * 2f64.ln());
        let root = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((0.0..3.0).contains(&root));
        assert!((x - root).abs() < 1e-8);
    }

    #[test]
    fn dominated_component_has_no_crossing() {
        let f = two(comp(0.99, 0.0, 1.0), comp(0.01, 0.1, 1.0));
        assert_eq!(intersection_threshold(&f).unwrap(), None);
        let eq = two(comp(0.5, 1.0, 1.0), comp(0.5, 1.0, 2.0));
        assert!(matches!(intersection_threshold(&eq), Err(Error::EqualMeans(_))));
    }

    #[test]
    fn fallback_examples() {
        assert_eq!(fallback_threshold(&[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(fallback_threshold(&[0.25; 7]).unwrap(), 0.25);
        let t = fallback_threshold(&normal(4, 10_000, 0.3, 0.1)).unwrap();
        assert!((t - 0.4).abs() < 0.005);
    }

    #[test]
    fn auto_threshold_methods() {
        let d = auto_threshold("L", &bimodal(5, 1000), 0).unwrap();
        assert_eq!(d.method, ThresholdMethod::GmmIntersection);
        assert!(d.value > 0.1 && d.value < 0.8);
        let u = auto_threshold("L", &normal(6, 1000, 0.2, 0.05), 0).unwrap();
        assert_eq!(u.method, ThresholdMethod::FallbackMeanStd);
        assert_eq!(u.chosen_fit().unwrap().k(), 1);
        let tsv = threshold_report_tsv(&[d, ThresholdDecision::manual("M", 0.5)]);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split('\t').count() == 11));
        assert!(lines[2].starts_with("M\tmanual\t0.5"));
    }

    #[test]
    fn brent_on_a_cubic() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-11);
        assert_eq!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-9), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn shift_equivariance(seed in 0u64..1000, shift in -5.0..5.0f64, bimodal_sample: bool) {
            let xs = if bimodal_sample { bimodal(seed, 400) } else { normal(seed, 400, 0.3, 0.1) };
            let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let a = auto_threshold("L", &xs, seed).unwrap();
            let b = auto_threshold("L", &shifted, seed).unwrap();
            prop_assert_eq!(a.method, b.method);
            prop_assert!((b.value - (a.value + shift)).abs() < 1e-6);
            if a.method == ThresholdMethod::GmmIntersection {
                let f = a.chosen_fit().unwrap();
                prop_assert!(a.value > f.components[0].mean && a.value < f.components[1].mean);
            }
        }

        #[test]
        fn em_never_decreases(vals in prop::collection::vec(-3.0..3.0f64, 20..80)) {
            prop_assume!(population_variance(&vals, mean(&vals)) > 1e-6);
            let f = fit_gmm(&vals, 2).unwrap();
            for w in f.trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }
    }
}
