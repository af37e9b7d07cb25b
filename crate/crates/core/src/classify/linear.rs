use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use super::features::SparseVector;
use super::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Logistic regression.
    Logistic,
    /// Linear SVM.
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearHyper {
    /// Initial step size; decays linearly towards zero.
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LinearHyper {
    fn default() -> Self {
        LinearHyper {
            learning_rate: 0.1,
            epochs: 100,
            l2: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: LossKind,
    pub hyper: LinearHyper,
    pub seed: u64,
    /// Full regularized objective after each epoch.
    pub loss_history: Vec<f64>,
}

impl LinearModel {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    /// Score in `(0, 1)`; `0.5` is the decision boundary for both losses.
    pub fn score(&self, x: &SparseVector) -> f64 {
        sigmoid(self.margin(x))
    }
}

fn sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

/// `ln(1 + e^-z)` without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn point_loss(loss: LossKind, ym: f64) -> f64 {
    match loss {
        LossKind::Logistic => log1p_exp_neg(ym),
        LossKind::Hinge => (1.0 - ym).max(0.0),
    }
}

/// Derivative of the point loss with respect to the margin, times `y`.
fn point_grad(loss: LossKind, ym: f64) -> f64 {
    match loss {
        LossKind::Logistic => -sigmoid(-ym),
        LossKind::Hinge => {
            if ym < 1.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

/// Mean loss plus `l2 / 2 * ||w||²`; the bias is not regularized.
pub fn objective(
    features: &[SparseVector],
    labels: &[bool],
    weights: &[f64],
    bias: f64,
    loss: LossKind,
    l2: f64,
) -> f64 {
    let n = features.len() as f64;
    let data: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| point_loss(loss, sign(y) * (x.dot(weights) + bias)))
        .sum();
    data / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`objective`] with respect to the weights and the bias.
pub fn gradient(
    features: &[SparseVector],
    labels: &[bool],
    weights: &[f64],
    bias: f64,
    loss: LossKind,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let y = sign(y);
        let g = y * point_grad(loss, y * (x.dot(weights) + bias)) / n;
        for (i, v) in x.iter() {
            gw[i as usize] += g * v;
        }
        gb += g;
    }
    (gw, gb)
}

/// Stochastic (sub)gradient descent on the regularized loss. Examples are
/// reshuffled every epoch from `seed`; the result is a pure function of the
/// inputs.
pub fn train_linear(
    features: &[SparseVector],
    labels: &[bool],
    dim: usize,
    loss: LossKind,
    hyper: LinearHyper,
    seed: u64,
) -> Result<LinearModel> {
    if features.len() != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(Error::insufficient("training data needs both classes"));
    }
    if !(hyper.learning_rate > 0.0) || !(hyper.l2 >= 0.0) || hyper.epochs == 0 {
        return Err(Error::invalid("learning rate and epochs must be positive, l2 non-negative"));
    }
    if let Some(bad) = features.iter().flat_map(|x| x.indices.iter()).find(|&&i| i as usize >= dim) {
        return Err(Error::invalid(format!("feature index {bad} out of range for dimension {dim}")));
    }

    // w = scale * v keeps the per-step shrinkage O(1).
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = Pcg64::seed_from_u64(seed);
    let total_steps = (hyper.epochs * features.len()) as f64;
    let mut step = 0usize;
    let mut loss_history = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = hyper.learning_rate * (1.0 - step as f64 / total_steps);
            step += 1;
            let x = &features[i];
            let y = sign(labels[i]);
            let margin = scale * x.dot(&v) + bias;
            let g = y * point_grad(loss, y * margin);
            scale *= 1.0 - eta * hyper.l2;
            if g != 0.0 {
                let coef = eta * g / scale;
                for (j, xv) in x.iter() {
                    v[j as usize] -= coef * xv;
                }
                bias -= eta * g;
            }
            if scale < 1e-9 {
                for w in &mut v {
                    *w *= scale;
                }
                scale = 1.0;
            }
        }
        let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
        loss_history.push(objective(features, labels, &w, bias, loss, hyper.l2));
    }

    Ok(LinearModel {
        weights: v.into_iter().map(|x| x * scale).collect(),
        bias,
        loss,
        hyper,
        seed,
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn sv(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.to_vec()).unwrap()
    }

    fn separable() -> (Vec<SparseVector>, Vec<bool>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..20 {
            let t = 0.1 + 0.04 * k as f64;
            xs.push(sv(&[(0, 1.0), (1, t)]));
            ys.push(true);
            xs.push(sv(&[(0, t), (1, 1.0)]));
            ys.push(false);
        }
        (xs, ys)
    }

    fn accuracy(m: &LinearModel, xs: &[SparseVector], ys: &[bool]) -> f64 {
        xs.iter().zip(ys).filter(|(x, &y)| (m.score(x) >= 0.5) == y).count() as f64 / xs.len() as f64
    }

    #[test]
    fn separable_reaches_full_accuracy() {
        let (xs, ys) = separable();
        for loss in [LossKind::Logistic, LossKind::Hinge] {
            let hyper = LinearHyper { epochs: 50, ..Default::default() };
            let m = train_linear(&xs, &ys, 2, loss, hyper, 3).unwrap();
            assert_eq!(accuracy(&m, &xs, &ys), 1.0, "{loss:?}");
        }
    }

    #[test]
    fn identical_features_give_majority_rate() {
        let xs = vec![sv(&[(0, 1.0)]); 10];
        let ys: Vec<bool> = (0..10).map(|i| i < 7).collect();
        let m = train_linear(&xs, &ys, 1, LossKind::Logistic, LinearHyper::default(), 1).unwrap();
        assert!((accuracy(&m, &xs, &ys) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_bits() {
        let (xs, ys) = separable();
        let a = train_linear(&xs, &ys, 2, LossKind::Hinge, LinearHyper::default(), 9).unwrap();
        let b = train_linear(&xs, &ys, 2, LossKind::Hinge, LinearHyper::default(), 9).unwrap();
        let bits = |m: &LinearModel| m.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }

    #[test]
    fn smoothed_loss_does_not_increase() {
        let (xs, ys) = separable();
        let m = train_linear(&xs, &ys, 2, LossKind::Logistic, LinearHyper::default(), 5).unwrap();
        let avg: Vec<f64> = m.loss_history.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        for w in avg.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn rejects_single_class() {
        let xs = vec![sv(&[(0, 1.0)]); 3];
        assert!(train_linear(&xs, &[true; 3], 1, LossKind::Logistic, LinearHyper::default(), 0).is_err());
        assert!(train_linear(&xs, &[false; 3], 1, LossKind::Hinge, LinearHyper::default(), 0).is_err());
        assert!(train_linear(&xs, &[true, false, true], 0, LossKind::Hinge, LinearHyper::default(), 0).is_err());
    }

    proptest! {
        #[test]
        fn lazy_scaling_matches_plain_sgd(seed in 0u64..1000) {
            // One epoch of plain per-example SGD computed directly.
            let mut rng = Pcg64::seed_from_u64(seed ^ 77);
            let xs: Vec<SparseVector> = (0..8)
                .map(|_| sv(&[(0, rng.random_range(-1.0..1.0)), (2, rng.random_range(-1.0..1.0))]))
                .collect();
            let ys: Vec<bool> = (0..8).map(|i| i % 3 == 0).collect();
            let hyper = LinearHyper { learning_rate: 0.5, epochs: 1, l2: 0.05 };
            let m = train_linear(&xs, &ys, 3, LossKind::Logistic, hyper, seed).unwrap();

            let mut order: Vec<usize> = (0..8).collect();
            order.shuffle(&mut Pcg64::seed_from_u64(seed));
            let mut w = vec![0.0; 3];
            let mut b = 0.0;
            for (step, &i) in order.iter().enumerate() {
                let eta = 0.5 * (1.0 - step as f64 / 8.0);
                let y = sign(ys[i]);
                let g = y * point_grad(LossKind::Logistic, y * (xs[i].dot(&w) + b));
                for wj in w.iter_mut() {
                    *wj *= 1.0 - eta * 0.05;
                }
                for (j, v) in xs[i].iter() {
                    w[j as usize] -= eta * g * v;
                }
                b -= eta * g;
            }
            for (a, e) in m.weights.iter().zip(&w) {
                prop_assert!((a - e).abs() < 1e-12);
            }
            prop_assert!((m.bias - b).abs() < 1e-12);
        }
    }
}
