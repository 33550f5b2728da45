use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;

use super::Scalar;
use crate::error::{Error, Result};

pub(crate) const LN_EPS: f64 = 1e-5;

/// Interleaved sin/cos table: `(pos, 2k) = sin(pos / 10000^(2k/dim))`,
/// `(pos, 2k+1)` the matching cosine.
pub fn sinusoidal_pe<F: Scalar>(max_len: usize, dim: usize) -> Result<Array2<F>> {
    if !dim.is_multiple_of(2) {
        return Err(Error::Config(format!("positional encoding dimension {dim} is odd")));
    }
    let mut pe = Array2::zeros((max_len, dim));
    for pos in 0..max_len {
        for k in 0..dim / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * k as f64 / dim as f64);
            pe[[pos, 2 * k]] = F::of(angle.sin());
            pe[[pos, 2 * k + 1]] = F::of(angle.cos());
        }
    }
    Ok(pe)
}

pub(crate) fn linear<F: Scalar>(x: &Array2<F>, w: &Array2<F>, b: &Array1<F>) -> Array2<F> {
    let mut y = x.dot(w);
    y += b;
    y
}

pub(crate) fn column_sums<F: Scalar>(x: &Array2<F>) -> Array1<F> {
    x.sum_axis(Axis(0))
}

pub(crate) struct Normalized<F> {
    pub out: Array2<F>,
    pub xhat: Array2<F>,
    pub rstd: Array1<F>,
}

pub(crate) fn layer_norm<F: Scalar>(x: &Array2<F>, gain: &Array1<F>, bias: &Array1<F>) -> Normalized<F> {
    let n = F::of(x.ncols() as f64);
    let eps = F::of(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.outer_iter_mut().zip(rstd.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<F>() / n;
        *r = F::one() / (var + eps).sqrt();
        let s = *r;
        row.mapv_inplace(|v| v * s);
    }
    let mut out = &xhat * gain;
    out += bias;
    Normalized { out, xhat, rstd }
}

/// Returns (dx, dgain, dbias).
pub(crate) fn layer_norm_backward<F: Scalar>(
    dy: &Array2<F>,
    xhat: &Array2<F>,
    rstd: &Array1<F>,
    gain: &Array1<F>,
) -> (Array2<F>, Array1<F>, Array1<F>) {
    let dgain = (dy * xhat).sum_axis(Axis(0));
    let dbias = dy.sum_axis(Axis(0));
    let n = F::of(dy.ncols() as f64);
    let mut dx = dy * gain;
    for ((mut row, xh), &r) in dx.outer_iter_mut().zip(xhat.outer_iter()).zip(rstd.iter()) {
        let mean_d = row.sum() / n;
        let mean_dx = row.iter().zip(xh.iter()).map(|(&d, &x)| d * x).sum::<F>() / n;
        Zip::from(&mut row).and(&xh).for_each(|d, &x| *d = r * (*d - mean_d - x * mean_dx));
    }
    (dx, dgain, dbias)
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact (erf-based) GELU.
pub(crate) fn gelu<F: Scalar>(x: F) -> F {
    let xf = x.to_f64().unwrap_or(0.0);
    F::of(0.5 * xf * (1.0 + libm::erf(xf / SQRT_2)))
}

pub(crate) fn gelu_grad<F: Scalar>(x: F) -> F {
    let xf = x.to_f64().unwrap_or(0.0);
    let cdf = 0.5 * (1.0 + libm::erf(xf / SQRT_2));
    let pdf = INV_SQRT_2PI * (-0.5 * xf * xf).exp();
    F::of(cdf + xf * pdf)
}

pub(crate) fn softmax_rows<F: Scalar>(s: &mut Array2<F>) {
    for mut row in s.outer_iter_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Inverted-dropout mask (zeros and `1/(1-p)`), or `None` when `p == 0`.
pub(crate) fn dropout_mask<F: Scalar, R: Rng + ?Sized>(
    shape: (usize, usize),
    p: f64,
    rng: &mut R,
) -> Option<Array2<F>> {
    if p <= 0.0 {
        return None;
    }
    let keep = F::of(1.0 / (1.0 - p));
    Some(Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < p {
            F::zero()
        } else {
            keep
        }
    }))
}

/// Precomputed rotary angles for one head dimension.
pub(crate) struct Rotary<F> {
    cos: Array2<F>,
    sin: Array2<F>,
    half: usize,
}

impl<F: Scalar> Rotary<F> {
    pub(crate) fn new(head_dim: usize, max_len: usize) -> Self {
        let half = head_dim / 2;
        let mut cos = Array2::zeros((max_len, half));
        let mut sin = Array2::zeros((max_len, half));
        for pos in 0..max_len {
            for i in 0..half {
                let inv_freq = 1.0 / 10000f64.powf(2.0 * i as f64 / head_dim as f64);
                let angle = pos as f64 * inv_freq;
                cos[[pos, i]] = F::of(angle.cos());
                sin[[pos, i]] = F::of(angle.sin());
            }
        }
        Self { cos, sin, half }
    }

    /// Rotates every head of every token row in place; `inverse` applies the
    /// transposed rotation (used for gradients).
    pub(crate) fn apply(&self, m: &mut Array2<F>, positions: &[usize], n_heads: usize, inverse: bool) {
        let head_dim = 2 * self.half;
        for (mut row, &pos) in m.outer_iter_mut().zip(positions) {
            let cos = self.cos.row(pos);
            let sin = self.sin.row(pos);
            for h in 0..n_heads {
                let off = h * head_dim;
                for i in 0..self.half {
                    let (a, b) = (row[off + i], row[off + i + self.half]);
                    let (c, s) = (cos[i], if inverse { -sin[i] } else { sin[i] });
                    row[off + i] = a * c - b * s;
                    row[off + i + self.half] = b * c + a * s;
                }
            }
        }
    }
}

/// Applies rotary position encoding to a single head vector (`x.len()` even)
/// at position `pos`. Exposed for tests and examples.
pub fn rotary_apply<F: Scalar>(x: ArrayView1<F>, pos: usize) -> Array1<F> {
    let rot = Rotary::<F>::new(x.len(), pos + 1);
    let mut m = x.to_owned().insert_axis(Axis(0));
    rot.apply(&mut m, &[pos], 1, false);
    m.row(0).to_owned()
}


#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pe_examples() {
        let pe: Array2<f64> = sinusoidal_pe(4, 4).unwrap();
        assert_eq!(pe[[0, 0]], 0.0);
        assert_eq!(pe[[0, 1]], 1.0);
        assert_eq!(pe[[0, 2]], 0.0);
        assert_eq!(pe[[0, 3]], 1.0);
        assert!((pe[[1, 0]] - 0.841_47).abs() < 1e-5);
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(sinusoidal_pe::<f64>(4, 3).is_err());
    }

    #[test]
    fn rotary_preserves_norm_and_dot_is_relative() {
        let q = array![0.3, -1.2, 0.7, 2.0];
        let k = array![1.1, 0.4, -0.5, 0.9];
        let norm = |v: &Array1<f64>| v.dot(v).sqrt();
        let q3 = rotary_apply(q.view(), 3);
        assert!((norm(&q3) - norm(&q)).abs() < 1e-12);
        // <R(m) q, R(n) k> depends only on m - n
        let d1 = rotary_apply(q.view(), 5).dot(&rotary_apply(k.view(), 2));
        let d2 = rotary_apply(q.view(), 7).dot(&rotary_apply(k.view(), 4));
        assert!((d1 - d2).abs() < 1e-12);
        assert_eq!(rotary_apply(q.view(), 0), q);
    }

    #[test]
    fn layer_norm_backward_matches_differences() {
        let x = array![[0.3, -1.0, 2.0, 0.5], [1.5, 0.2, -0.7, 0.1]];
        let g = array![1.2, 0.8, -0.3, 1.0];
        let b = array![0.1, 0.0, 0.3, -0.2];
        let w = array![[0.5, -1.0, 0.2, 0.9], [-0.4, 0.3, 1.1, 0.7]];
        let loss = |x: &Array2<f64>| (&layer_norm(x, &g, &b).out * &w).sum();
        let n = layer_norm(&x, &g, &b);
        let (dx, _, _) = layer_norm_backward(&w, &n.xhat, &n.rstd, &g);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..4 {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let mut xm = x.clone();
                xm[[i, j]] -= h;
                let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
                assert!((fd - dx[[i, j]]).abs() < 1e-7, "{fd} vs {}", dx[[i, j]]);
            }
        }
    }

    #[test]
    fn gelu_derivative() {
        for &x in &[-3.0f64, -0.5, 0.0, 0.7, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut s = array![[1.0f64, 2.0, 3.0], [-100.0, 0.0, 100.0]];
        softmax_rows(&mut s);
        for row in s.outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }
}
