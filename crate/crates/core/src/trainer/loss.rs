use ndarray::Array2;

use crate::encoder::Scalar;
use crate::error::{Error, Result};

/// NT-Xent over `2N` rows where row `i` and row `i + N` are the two views of
/// word `i`. Each row is l2-normalized; every other row is in the softmax
/// denominator; the loss is the mean over all `2N` views.
///
/// Returns the loss and its gradient with respect to the unnormalized rows.
/// Computed in double precision whatever `F` is.
pub fn nt_xent_loss<F: Scalar>(z: &Array2<F>, temperature: f64) -> Result<(f64, Array2<F>)> {
    let rows = z.nrows();
    if rows < 2 || !rows.is_multiple_of(2) {
        return Err(Error::Shape(format!("NT-Xent needs an even number of rows ≥ 2, got {rows}")));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!("temperature {temperature} must be positive")));
    }
    let n = rows / 2;
    let z = z.mapv(|v| v.to_f64().unwrap_or(f64::NAN));
    let mut u = z.clone();
    let mut norms = vec![0.0; rows];
    for (r, mut row) in u.outer_iter_mut().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Invalid(format!("row {r} has norm {norm}; cannot normalize")));
        }
        norms[r] = norm;
        row /= norm;
    }
    let sims = u.dot(&u.t()) / temperature;

    let mut loss = 0.0;
    let mut d_sims = Array2::<f64>::zeros((rows, rows));
    let scale = 1.0 / rows as f64;
    for i in 0..rows {
        let pos = (i + n) % rows;
        let max = (0..rows).filter(|&j| j != i).map(|j| sims[[i, j]]).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..rows).filter(|&j| j != i).map(|j| (sims[[i, j]] - max).exp()).sum();
        let lse = max + denom.ln();
        loss += lse - sims[[i, pos]];
        for j in (0..rows).filter(|&j| j != i) {
            d_sims[[i, j]] = scale * (sims[[i, j]] - lse).exp();
        }
        d_sims[[i, pos]] -= scale;
    }
    loss *= scale;

    // sims = u uᵀ / τ, so dL/du = (dS + dSᵀ) u / τ; then back through the norm
    let sym = &d_sims + &d_sims.t();
    let d_u = sym.dot(&u) / temperature;
    let mut grad = Array2::<F>::zeros((rows, z.ncols()));
    for r in 0..rows {
        let ur = u.row(r);
        let du = d_u.row(r);
        let along = ur.dot(&du);
        for c in 0..z.ncols() {
            grad[[r, c]] = F::of((du[c] - ur[c] * along) / norms[r]);
        }
    }
    Ok((loss.max(0.0), grad))
}
