//! Multi-class linear max-margin classifier over document codes.
//!
//! Scores are `F(y, theta) = eta_y . theta` with no bias. Training minimizes
//!
//! ```text
//! C * (1/D) sum_d max_y [cost(y_d, y) + F(y, theta_d) - F(y_d, theta_d)] + 1/2 ||eta||^2
//! ```
//!
//! with `cost(y_d, y) = ell * 1[y != y_d]`, by exact coordinate ascent on the
//! dual: each example's dual block lives on a scaled simplex and its
//! subproblem is a Euclidean projection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coder::dot;
use crate::error::{Result, StcError};
use crate::numerics::project_to_scaled_simplex;

/// `L x K` weight matrix, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierWeights {
    num_classes: usize,
    num_topics: usize,
    data: Vec<f64>,
}

impl ClassifierWeights {
    pub fn zeros(num_classes: usize, num_topics: usize) -> Self {
        ClassifierWeights {
            num_classes,
            num_topics,
            data: vec![0.0; num_classes * num_topics],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_classes = rows.len();
        let num_topics = rows.first().map_or(0, Vec::len);
        if num_classes == 0 {
            return Err(StcError::domain("classifier needs at least one class"));
        }
        let mut data = Vec::with_capacity(num_classes * num_topics);
        for (y, row) in rows.into_iter().enumerate() {
            if row.len() != num_topics {
                return Err(StcError::contract(format!(
                    "class {y} has {} weights, expected {num_topics}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(StcError::domain(format!("class {y} has non-finite weights")));
            }
            data.extend(row);
        }
        Ok(ClassifierWeights {
            num_classes,
            num_topics,
            data,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    #[inline]
    pub fn get(&self, class: usize, topic: usize) -> f64 {
        self.data[class * self.num_topics + topic]
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.data[class * self.num_topics..(class + 1) * self.num_topics]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.num_topics.max(1))
    }

    /// `eta_y . theta` without shape checks.
    #[inline]
    pub(crate) fn score(&self, class: usize, theta: &[f64]) -> f64 {
        dot(self.row(class), theta)
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `F(y, theta) = eta_y . theta`.
pub fn discriminant(eta: &ClassifierWeights, theta: &[f64], y: usize) -> Result<f64> {
    if theta.len() != eta.num_topics || y >= eta.num_classes {
        return Err(StcError::contract(format!(
            "class {y} / code length {} against a {}x{} classifier",
            theta.len(),
            eta.num_classes,
            eta.num_topics
        )));
    }
    Ok(eta.score(y, theta))
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// `argmax_y cost_ell * 1[y != y_true] + F(y, theta)`, smallest index on ties.
pub fn loss_augmented_predict(eta: &ClassifierWeights, theta: &[f64], y_true: usize, cost_ell: f64) -> usize {
    argmax_first((0..eta.num_classes).map(|y| {
        let cost = if y == y_true { 0.0 } else { cost_ell };
        cost + eta.score(y, theta)
    }))
}

/// `argmax_y F(y, theta)`, smallest index on ties.
pub fn predict(eta: &ClassifierWeights, theta: &[f64]) -> usize {
    argmax_first((0..eta.num_classes).map(|y| eta.score(y, theta)))
}

fn check_examples<T: AsRef<[f64]>>(eta: &ClassifierWeights, thetas: &[T], labels: &[usize]) -> Result<()> {
    if thetas.len() != labels.len() {
        return Err(StcError::contract(format!(
            "{} codes for {} labels",
            thetas.len(),
            labels.len()
        )));
    }
    if thetas.is_empty() {
        return Err(StcError::domain("hinge risk of an empty set"));
    }
    for (d, (t, &y)) in thetas.iter().zip(labels).enumerate() {
        if t.as_ref().len() != eta.num_topics || y >= eta.num_classes {
            return Err(StcError::contract(format!("example {d} does not match the classifier")));
        }
    }
    Ok(())
}

fn example_hinge(eta: &ClassifierWeights, theta: &[f64], y_true: usize, cost_ell: f64) -> f64 {
    let truth = eta.score(y_true, theta);
    (0..eta.num_classes)
        .map(|y| {
            let cost = if y == y_true { 0.0 } else { cost_ell };
            cost + eta.score(y, theta) - truth
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Averaged multi-class margin-rescaled hinge loss.
pub fn hinge_risk<T: AsRef<[f64]>>(
    eta: &ClassifierWeights,
    thetas: &[T],
    labels: &[usize],
    cost_ell: f64,
) -> Result<f64> {
    check_examples(eta, thetas, labels)?;
    let sum: f64 = thetas
        .iter()
        .zip(labels)
        .map(|(t, &y)| example_hinge(eta, t.as_ref(), y, cost_ell))
        .sum();
    Ok(sum / thetas.len() as f64)
}

/// `C * hinge_risk + 1/2 ||eta||^2`.
pub fn svm_objective<T: AsRef<[f64]>>(
    eta: &ClassifierWeights,
    thetas: &[T],
    labels: &[usize],
    svm_c: f64,
    cost_ell: f64,
) -> Result<f64> {
    Ok(svm_c * hinge_risk(eta, thetas, labels, cost_ell)? + 0.5 * eta.squared_norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub svm_c: f64,
    pub cost_ell: f64,
    pub max_epochs: usize,
    /// Stop once the duality gap is below `tol * (1 + |objective|)`.
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SvmFit {
    pub eta: ClassifierWeights,
    /// Primal objective of `eta`, the best seen over all epochs.
    pub objective: f64,
    /// Dual objective at the last epoch; a lower bound on the optimum.
    pub dual: f64,
    pub epochs: usize,
    /// Primal objective after each epoch (of the best iterate so far).
    pub trace: Vec<f64>,
}

/// Fits `eta` on fixed document codes.
pub fn train_svm<T: AsRef<[f64]> + Sync>(
    thetas: &[T],
    labels: &[usize],
    num_classes: usize,
    params: &SvmParams,
) -> Result<SvmFit> {
    if num_classes < 2 {
        return Err(StcError::domain("a classifier needs at least two classes"));
    }
    let num_topics = thetas.first().map_or(0, |t| t.as_ref().len());
    let mut eta = ClassifierWeights::zeros(num_classes, num_topics);
    check_examples(&eta, thetas, labels)?;
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(StcError::domain("all training examples share one label"));
    }
    if !(params.svm_c >= 0.0) || !(params.cost_ell >= 0.0) || !(params.tol > 0.0) {
        return Err(StcError::domain("svm_c and cost_ell must be >= 0 and tol > 0"));
    }

    let n = thetas.len();
    let cap = params.svm_c / n as f64;
    let cost = |y_true: usize, y: usize| if y == y_true { 0.0 } else { params.cost_ell };

    // alpha_i starts at cap * e_{y_i}, which corresponds to eta = 0.
    let mut alpha = vec![0.0; n * num_classes];
    for (i, &y) in labels.iter().enumerate() {
        alpha[i * num_classes + y] = cap;
    }

    let mut best = eta.clone();
    let mut best_obj = svm_objective(&eta, thetas, labels, params.svm_c, params.cost_ell)?;
    let mut dual = 0.0;
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grad = vec![0.0; num_classes];
    let mut epochs = 0;

    for epoch in 1..=params.max_epochs.max(1) {
        epochs = epoch;
        order.shuffle(&mut rng);
        for &i in &order {
            let theta = thetas[i].as_ref();
            let y_i = labels[i];
            let block = &mut alpha[i * num_classes..(i + 1) * num_classes];
            let sq = dot(theta, theta);
            if sq == 0.0 {
                // eta ignores this example; only the dual value depends on it.
                block.iter_mut().for_each(|a| *a = 0.0);
                let y_max = argmax_first((0..num_classes).map(|y| cost(y_i, y)));
                block[y_max] = cap;
                continue;
            }
            for y in 0..num_classes {
                grad[y] = block[y] + (cost(y_i, y) + eta.score(y, theta)) / sq;
            }
            let new_block = project_to_scaled_simplex(&grad, cap)?;
            for y in 0..num_classes {
                let delta = block[y] - new_block[y];
                if delta != 0.0 {
                    let row = &mut eta.data[y * num_topics..(y + 1) * num_topics];
                    for (e, t) in row.iter_mut().zip(theta) {
                        *e += delta * t;
                    }
                }
                block[y] = new_block[y];
            }
        }

        let linear: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y_i)| {
                (0..num_classes)
                    .map(|y| alpha[i * num_classes + y] * cost(y_i, y))
                    .sum::<f64>()
            })
            .sum();
        dual = linear - 0.5 * eta.squared_norm();
        let primal = svm_objective(&eta, thetas, labels, params.svm_c, params.cost_ell)?;
        if primal < best_obj {
            best_obj = primal;
            best = eta.clone();
        }
        trace.push(best_obj);
        if best_obj - dual <= params.tol * (1.0 + best_obj.abs()) {
            break;
        }
    }

    Ok(SvmFit {
        eta: best,
        objective: best_obj,
        dual,
        epochs,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, ell: f64) -> SvmParams {
        SvmParams {
            svm_c: c,
            cost_ell: ell,
            max_epochs: 200,
            tol: 1e-6,
            seed: 1,
        }
    }

    #[test]
    fn discriminant_examples() {
        let zero = ClassifierWeights::zeros(2, 2);
        assert_eq!(discriminant(&zero, &[3.0, 4.0], 1).unwrap(), 0.0);
        let unit = ClassifierWeights::from_rows(vec![vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(discriminant(&unit, &[0.0, 3.0, 0.0], 0).unwrap(), 3.0);
        let eta = ClassifierWeights::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(discriminant(&eta, &[0.5, 0.25], 0).unwrap(), 1.0);
        assert!(discriminant(&eta, &[0.5], 0).is_err());
        assert!(discriminant(&eta, &[0.5, 0.5], 1).is_err());
    }

    #[test]
    fn loss_augmented_examples() {
        let zero = ClassifierWeights::zeros(3, 2);
        assert_eq!(loss_augmented_predict(&zero, &[1.0, 1.0], 1, 2.0), 0);
        assert_eq!(loss_augmented_predict(&zero, &[1.0, 1.0], 0, 2.0), 1);
        let eta = ClassifierWeights::from_rows(vec![vec![0.0], vec![5.0]]).unwrap();
        assert_eq!(loss_augmented_predict(&eta, &[1.0], 0, 0.0), 1);
        assert_eq!(loss_augmented_predict(&eta, &[1.0], 1, 1e9), 0);
    }

    #[test]
    fn hinge_examples() {
        let zero = ClassifierWeights::zeros(3, 1);
        let r = hinge_risk(&zero, &[vec![1.0], vec![2.0]], &[0, 2], 1.5).unwrap();
        assert_eq!(r, 1.5);

        let eta = ClassifierWeights::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(hinge_risk(&eta, &[vec![1.0]], &[0], 1.0).unwrap(), 2.0);

        let sep = ClassifierWeights::from_rows(vec![vec![5.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let r = hinge_risk(&sep, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1], 1.0).unwrap();
        assert_eq!(r, 0.0);

        let empty: Vec<Vec<f64>> = vec![];
        assert!(hinge_risk(&sep, &empty, &[], 1.0).is_err());
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&ClassifierWeights::zeros(4, 2), &[1.0, 2.0]), 0);
        let eta =
            ClassifierWeights::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(predict(&eta, &[0.0, 7.0, 0.0]), 1);
        assert_eq!(predict(&eta, &[0.0, 7.0 * 3.5, 0.0]), 1);
    }

    #[test]
    fn zero_c_gives_zero_weights() {
        let thetas = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let fit = train_svm(&thetas, &[0, 1], 2, &params(0.0, 1.0)).unwrap();
        assert!(fit.eta.rows().flatten().all(|&v| v == 0.0));
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn separates_orthogonal_points() {
        let thetas = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let fit = train_svm(&thetas, &[0, 1], 2, &params(100.0, 1.0)).unwrap();
        assert_eq!(predict(&fit.eta, &thetas[0]), 0);
        assert_eq!(predict(&fit.eta, &thetas[1]), 1);
        // Optimum: eta = (1/2, -1/2; -1/2, 1/2), objective 1/2.
        assert!((fit.objective - 0.5).abs() < 1e-5, "{}", fit.objective);
    }

    #[test]
    fn contradictory_examples_converge() {
        let thetas = vec![vec![1.0], vec![1.0]];
        let fit = train_svm(&thetas, &[0, 1], 2, &params(10.0, 1.0)).unwrap();
        let r = hinge_risk(&fit.eta, &thetas, &[0, 1], 1.0).unwrap();
        assert!(r > 0.0);
        assert!(fit.objective - fit.dual <= 1e-6 * (1.0 + fit.objective));
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_single_class() {
        let thetas = vec![vec![1.0], vec![2.0]];
        assert!(train_svm(&thetas, &[1, 1], 2, &params(1.0, 1.0)).is_err());
        assert!(train_svm(&thetas, &[0, 1], 1, &params(1.0, 1.0)).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let thetas: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i % 3) as f64, (i % 5) as f64 * 0.3, 1.0])
            .collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let a = train_svm(&thetas, &labels, 3, &params(5.0, 1.0)).unwrap();
        let b = train_svm(&thetas, &labels, 3, &params(5.0, 1.0)).unwrap();
        assert_eq!(a.eta, b.eta);
    }
}
