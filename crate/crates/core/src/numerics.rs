//! Poisson loss, unnormalized KL divergence and Euclidean projection onto
//! the probability simplex.

use crate::error::{Result, StcError};

/// Tolerance on the sum of a point accepted as lying on the simplex.
pub const SIMPLEX_EPS: f64 = 1e-10;

/// Negative Poisson log-likelihood of count `w` at `mean`, without the
/// `log(w!)` term: `mean - w * log(mean)`.
///
/// Dropping the constant makes objectives comparable across iterations on
/// one corpus, not across corpora.
pub fn poisson_loss(w: u32, mean: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(StcError::domain(format!("Poisson mean must be > 0, got {mean}")));
    }
    Ok(poisson_loss_unchecked(w, mean))
}

#[inline]
pub(crate) fn poisson_loss_unchecked(w: u32, mean: f64) -> f64 {
    if w == 0 {
        mean
    } else {
        mean - f64::from(w) * mean.ln()
    }
}

/// Unnormalized KL divergence `w log(w / mean) - w + mean`, equal to `mean`
/// in the `w = 0` limit.
pub fn unnorm_kl(w: u32, mean: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(StcError::domain(format!("KL mean must be > 0, got {mean}")));
    }
    if w == 0 {
        return Ok(mean);
    }
    let w = f64::from(w);
    Ok(w * (w / mean).ln() - w + mean)
}

/// Poisson loss interface. Only [`Poisson`] ships; the coder's closed-form
/// updates are specific to it.
pub trait CountLoss {
    fn loss(&self, w: u32, mean: f64) -> f64;
    /// Derivative of the loss with respect to the mean.
    fn dloss(&self, w: u32, mean: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Poisson;

impl CountLoss for Poisson {
    #[inline]
    fn loss(&self, w: u32, mean: f64) -> f64 {
        poisson_loss_unchecked(w, mean)
    }

    #[inline]
    fn dloss(&self, w: u32, mean: f64) -> f64 {
        1.0 - f64::from(w) / mean
    }
}

/// Euclidean projection of `v` onto `{p : p >= 0, sum(p) = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Result<Vec<f64>> {
    project_to_scaled_simplex(v, 1.0)
}

/// Euclidean projection onto `{p : p >= 0, sum(p) = radius}`.
///
/// Sort-then-threshold: find the largest `r` with
/// `u_r > (sum_{i<=r} u_i - radius) / r` over the descending sort `u`.
pub fn project_to_scaled_simplex(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(StcError::domain("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(StcError::domain("cannot project a non-finite vector"));
    }
    if !(radius >= 0.0) {
        return Err(StcError::domain(format!("simplex radius must be >= 0, got {radius}")));
    }
    let mut out = v.to_vec();
    project_in_place(&mut out, radius);
    Ok(out)
}

/// Threshold `t` such that `sum(max(0, v - t)) = radius`.
pub(crate) fn simplex_threshold(v: &[f64], radius: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = sorted[0] - radius;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (i + 1) as f64;
        if u > t {
            threshold = t;
        } else {
            break;
        }
    }
    threshold
}

pub(crate) fn project_in_place(v: &mut [f64], radius: f64) {
    let t = simplex_threshold(v, radius);
    for x in v.iter_mut() {
        *x = (*x - t).max(0.0);
    }
}

/// True when every entry is non-negative and the sum is within `eps` of 1.
pub fn is_on_simplex(p: &[f64], eps: f64) -> bool {
    p.iter().all(|&x| x >= 0.0 && x.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= eps
}
