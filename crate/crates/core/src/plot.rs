//! Standalone SVG of a score distribution with its mixture fit and
//! threshold.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gmmthresh::{fit_gmm, Component, ThresholdDecision};

pub const BINS: usize = 50;
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const CURVE_POINTS: usize = 200;
const COLOURS: [&str; 2] = ["#d62728", "#2ca02c"];

/// Density-normalized histogram: `(left edges, densities, bin width)`.
pub fn histogram(scores: &[f64], lo: f64, hi: f64, bins: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = scores.len() as f64;
    let edges = (0..bins).map(|b| lo + b as f64 * width).collect();
    let dens = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    (edges, dens, width)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `scores`, one weighted density curve per component of the
/// selected fit, and a dashed line at the decision's threshold.
///
/// Without stored fits (manual or degenerate decisions) a single Gaussian
/// is fitted for display when the scores allow it.
pub fn render_svg(scores: &[f64], decision: &ThresholdDecision, title: &str) -> Result<String> {
    if scores.is_empty() {
        return Err(Error::Invalid("no scores to plot".into()));
    }
    let components: Vec<Component> = match decision.chosen_fit() {
        Some(fit) => fit.components.clone(),
        None => fit_gmm(scores, 1).map(|f| f.components).unwrap_or_default(),
    };
    let mut lo = scores.iter().copied().fold(f64::INFINITY, f64::min).min(decision.value);
    let mut hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(decision.value);
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let (edges, dens, bin_w) = histogram(scores, lo, hi, BINS);
    let xs: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    let curves: Vec<Vec<f64>> = components
        .iter()
        .map(|c| xs.iter().map(|&x| c.weighted_density(x)).collect())
        .collect();
    let y_max = dens
        .iter()
        .chain(curves.iter().flatten())
        .copied()
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.1;

    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - lo) / (hi - lo) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - y / y_max * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r##"<g class="histogram" fill="#9ecae1" stroke="none">"##);
    for (e, d) in edges.iter().zip(&dens) {
        if *d > 0.0 {
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
                px(*e),
                py(*d),
                bin_w / (hi - lo) * plot_w,
                py(0.0) - py(*d)
            );
        }
    }
    s.push_str("</g>\n");
    for (k, curve) in curves.iter().enumerate() {
        let d: Vec<String> = xs
            .iter()
            .zip(curve)
            .enumerate()
            .map(|(i, (x, y))| format!("{}{:.3},{:.3}", if i == 0 { "M" } else { "L" }, px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<path class="component" d="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            d.join(" "),
            COLOURS[k % COLOURS.len()]
        );
    }
    let tx = px(decision.value);
    let _ = writeln!(
        s,
        r#"<line class="threshold" x1="{tx:.3}" y1="{:.3}" x2="{tx:.3}" y2="{:.3}" stroke="black" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
        MARGIN,
        HEIGHT - MARGIN
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{m:.1},{m:.1} L{m:.1},{b:.1} L{r:.1},{b:.1}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="start">{lo:.3}</text>"#,
        MARGIN,
        HEIGHT - MARGIN + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{hi:.3}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0
    );
    let _ = writeln!(s, r#"<g class="legend" font-size="12">"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
        MARGIN,
        MARGIN - 20.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}">threshold {:.4} ({})</text>"#,
        MARGIN,
        MARGIN - 6.0,
        decision.value,
        decision.method
    );
    for (k, c) in components.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{}">component {}: w={:.3} mean={:.3} sd={:.3}</text>"#,
            WIDTH - MARGIN - 230.0,
            MARGIN + 14.0 * (k + 1) as f64,
            COLOURS[k % COLOURS.len()],
            k + 1,
            c.weight,
            c.mean,
            c.variance.sqrt()
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmmthresh::{auto_threshold, tests::bimodal, ThresholdMethod};

    #[test]
    fn histogram_integrates_to_one() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let (_, d, w) = histogram(&xs, 0.0, 1.0, BINS);
        assert!((d.iter().sum::<f64>() * w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bimodal_has_two_curves() {
        let xs = bimodal(1, 1000);
        let d = auto_threshold("L", &xs, 0).unwrap();
        assert_eq!(d.method, ThresholdMethod::GmmIntersection);
        let svg = render_svg(&xs, &d, "L").unwrap();
        assert_eq!(svg.matches(r#"class="component""#).count(), 2);
        assert_eq!(svg.matches(r#"class="threshold""#).count(), 1);
        assert!(svg.contains("gmm_intersection"));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(render_svg(&[], &ThresholdDecision::manual("L", 0.5), "L").is_err());
    }
}
