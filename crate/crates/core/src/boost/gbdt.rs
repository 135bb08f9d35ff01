//! Gradient boosting on logistic loss.

use nalgebra::DMatrix;

use super::tree::{fit_tree, Tree};
use super::BoostError;

#[derive(Debug, Clone)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { n_trees: 100, learning_rate: 0.1, max_depth: 3, min_leaf: 20, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    /// Log-odds of the positive-class prior.
    pub base_score: f64,
    pub feature_names: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl GbdtModel {
    pub fn predict_score(&self, row: &[f64]) -> f64 {
        let mut score = self.base_score;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict_row(row);
        }
        score
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.predict_score(row))
    }

    /// Mean logistic loss of the model on a labeled sample.
    pub fn logistic_loss(&self, x: &DMatrix<f64>, y: &[bool]) -> f64 {
        let n = x.nrows();
        let mut total = 0.0;
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let z = self.predict_score(&row);
            // log(1 + e^-z) for positives, log(1 + e^z) for negatives,
            // computed stably.
            let t = if y[i] { -z } else { z };
            total += if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
        }
        total / n as f64
    }
}

/// Fit a binary GBDT with logistic loss: stagewise trees on the gradient
/// pairs g = p - y, h = p (1 - p), starting from the log-odds prior.
pub fn fit_gbdt(
    x: &DMatrix<f64>,
    y: &[bool],
    feature_names: &[String],
    params: &GbdtParams,
) -> Result<GbdtModel, BoostError> {
    let n = x.nrows();
    assert_eq!(n, y.len(), "label length mismatch");
    assert_eq!(x.ncols(), feature_names.len(), "feature name count mismatch");
    if n <= 2 * params.min_leaf {
        return Err(BoostError::TooFewRows { need: 2 * params.min_leaf + 1, got: n });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(BoostError::SingleClass);
    }
    let any_varying = (0..x.ncols()).any(|j| {
        let first = x[(0, j)];
        (1..n).any(|i| x[(i, j)] != first)
    });
    if !any_varying {
        return Err(BoostError::ConstantFeatures);
    }

    let prior = positives as f64 / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut scores = vec![base_score; n];
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            grad[i] = p - if y[i] { 1.0 } else { 0.0 };
            hess[i] = (p * (1.0 - p)).max(1e-12);
        }
        let tree = fit_tree(x, &rows, &grad, &hess, params.max_depth, params.min_leaf);
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            scores[i] += params.learning_rate * tree.predict_row(&row);
        }
        trees.push(tree);
    }

    Ok(GbdtModel {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        feature_names: feature_names.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    fn separable_1d(n: usize, seed: u64) -> (DMatrix<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, 1);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let v: f64 = if i % 2 == 0 {
                rng.gen_range(-2.0..-0.5)
            } else {
                rng.gen_range(0.5..2.0)
            };
            x[(i, 0)] = v;
            y.push(v > 0.0);
        }
        (x, y)
    }

    #[test]
    fn zero_trees_predict_the_class_prior() {
        let (x, y) = separable_1d(200, 1);
        let params = GbdtParams { n_trees: 0, min_leaf: 5, ..GbdtParams::default() };
        let model = fit_gbdt(&x, &y, &names(1), &params).unwrap();
        let prior = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
        assert_relative_eq!(model.predict_proba(&[0.3]), prior, epsilon = 1e-12);
    }

    #[test]
    fn separable_data_reaches_perfect_accuracy_within_ten_trees() {
        let (x, y) = separable_1d(200, 2);
        let params = GbdtParams { n_trees: 10, min_leaf: 5, ..GbdtParams::default() };
        let model = fit_gbdt(&x, &y, &names(1), &params).unwrap();
        // The first tree's root split must sit at the midpoint gap between the
        // largest negative and smallest positive example.
        let mut left_max = f64::NEG_INFINITY;
        let mut right_min = f64::INFINITY;
        for i in 0..200 {
            if y[i] {
                right_min = right_min.min(x[(i, 0)]);
            } else {
                left_max = left_max.max(x[(i, 0)]);
            }
        }
        let expected = left_max + (right_min - left_max) / 2.0;
        match &model.trees[0].nodes[0] {
            crate::boost::tree::Node::Split { threshold, .. } => {
                assert_relative_eq!(*threshold, expected, epsilon = 1e-12);
            }
            other => panic!("root should split, got {other:?}"),
        }
        let correct = (0..200)
            .filter(|&i| (model.predict_proba(&[x[(i, 0)]]) >= 0.5) == y[i])
            .count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn adding_trees_never_increases_training_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 300;
        let x = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-2.0..2.0));
        let y: Vec<bool> = (0..n)
            .map(|i| x[(i, 0)] + 0.5 * x[(i, 1)] + rng.gen_range(-0.5..0.5) > 0.0)
            .collect();
        let params = GbdtParams { n_trees: 40, min_leaf: 10, ..GbdtParams::default() };
        let full = fit_gbdt(&x, &y, &names(3), &params).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let partial = GbdtModel {
                trees: full.trees[..k].to_vec(),
                learning_rate: full.learning_rate,
                base_score: full.base_score,
                feature_names: full.feature_names.clone(),
            };
            let loss = partial.logistic_loss(&x, &y);
            assert!(loss <= prev + 1e-12, "loss rose at tree {k}: {prev} -> {loss}");
            prev = loss;
        }
    }

    #[test]
    fn single_class_is_fatal() {
        let x = DMatrix::from_fn(100, 1, |i, _| i as f64);
        let y = vec![true; 100];
        assert!(matches!(
            fit_gbdt(&x, &y, &names(1), &GbdtParams::default()),
            Err(BoostError::SingleClass)
        ));
    }

    #[test]
    fn all_constant_features_are_fatal() {
        let x = DMatrix::from_element(100, 2, 3.0);
        let y: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        assert!(matches!(
            fit_gbdt(&x, &y, &names(2), &GbdtParams::default()),
            Err(BoostError::ConstantFeatures)
        ));
    }

    #[test]
    fn too_few_rows_is_fatal() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert!(matches!(
            fit_gbdt(&x, &y, &names(1), &GbdtParams::default()),
            Err(BoostError::TooFewRows { .. })
        ));
    }

    #[test]
    fn refitting_is_deterministic() {
        let (x, y) = separable_1d(150, 9);
        let params = GbdtParams { n_trees: 15, min_leaf: 5, ..GbdtParams::default() };
        let a = fit_gbdt(&x, &y, &names(1), &params).unwrap();
        let b = fit_gbdt(&x, &y, &names(1), &params).unwrap();
        assert_eq!(a, b);
    }
}
