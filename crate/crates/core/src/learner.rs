//! Downstream classifier and the f1-macro metrics.
//!
//! The classifier is multinomial logistic regression over document
//! embeddings, refit from zero on the whole training set at every
//! evaluation. Machine performance is its f1-macro on held-out data; human
//! performance is the f1-macro of the oracle's labels against ground truth
//! over every picked document.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{OrisError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.1,
        }
    }
}

impl LearnerConfig {
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.epochs == 0 {
            errs.push("learner.epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            errs.push("learner.batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) {
            errs.push(format!("learner.learning_rate must be > 0, got {}", self.learning_rate));
        }
        errs
    }
}

/// Labeled examples gathered from picks, labels as emitted by the oracle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub examples: Vec<(Vec<f64>, usize)>,
}

impl TrainingSet {
    pub fn push(&mut self, embedding: Vec<f64>, label: usize) {
        self.examples.push((embedding, label));
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// `classes x dim`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl SoftmaxClassifier {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        SoftmaxClassifier {
            weights: Array2::zeros((num_classes, dim)),
            bias: Array1::zeros(num_classes),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict_proba(&self, embedding: &[f64]) -> Vec<f64> {
        let mut z = (self.weights.dot(&ndarray::ArrayView1::from(embedding)) + &self.bias).to_vec();
        softmax_in_place(&mut z);
        z
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, embedding: &[f64]) -> usize {
        let p = self.predict_proba(embedding);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }

    /// Mean cross-entropy over `examples` and its gradient `(dW, db)`.
    pub fn loss_and_gradient(&self, examples: &[&(Vec<f64>, usize)]) -> (f64, Array2<f64>, Array1<f64>) {
        let mut gw = Array2::zeros(self.weights.dim());
        let mut gb = Array1::zeros(self.bias.len());
        let mut loss = 0.0;
        let n = examples.len().max(1) as f64;
        for (x, y) in examples {
            let mut p = self.predict_proba(x);
            loss -= p[*y].max(f64::MIN_POSITIVE).ln();
            p[*y] -= 1.0;
            for (c, &d) in p.iter().enumerate() {
                gb[c] += d;
                let mut row = gw.row_mut(c);
                for (g, &xi) in row.iter_mut().zip(x.iter()) {
                    *g += d * xi;
                }
            }
        }
        gw /= n;
        gb /= n;
        (loss / n, gw, gb)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Minibatch gradient descent from a zero initialization; the seed drives
/// the per-epoch shuffle so identical inputs give identical parameters.
pub fn fit(set: &TrainingSet, num_classes: usize, cfg: &LearnerConfig, seed: u64) -> Result<SoftmaxClassifier> {
    let Some((first, _)) = set.examples.first() else {
        return Err(OrisError::Empty("classifier training set".into()));
    };
    let dim = first.len();
    for (x, y) in &set.examples {
        if x.len() != dim {
            return Err(OrisError::Shape {
                expected: dim,
                actual: x.len(),
            });
        }
        if *y >= num_classes {
            return Err(OrisError::Invalid(format!("label {y} outside {num_classes} classes")));
        }
    }
    let mut clf = SoftmaxClassifier::zeros(num_classes, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&(Vec<f64>, usize)> = chunk.iter().map(|&i| &set.examples[i]).collect();
            let (_, gw, gb) = clf.loss_and_gradient(&batch);
            clf.weights.scaled_add(-cfg.learning_rate, &gw);
            clf.bias.scaled_add(-cfg.learning_rate, &gb);
        }
    }
    Ok(clf)
}

/// Per-class one-vs-rest counts `(tp, fp, fn)`.
pub fn confusion_counts(truth: &[usize], pred: &[usize], num_classes: usize) -> Vec<(usize, usize, usize)> {
    let mut counts = vec![(0, 0, 0); num_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            counts[t].0 += 1;
        } else {
            counts[p].1 += 1;
            counts[t].2 += 1;
        }
    }
    counts
}

/// Unweighted mean of per-class f1 over all classes; a class with
/// `precision + recall = 0` (including one absent from both lists) scores 0.
pub fn f1_macro(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(OrisError::Shape {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(OrisError::Empty("label lists".into()));
    }
    if let Some(&bad) = truth.iter().chain(pred).find(|&&l| l >= num_classes) {
        return Err(OrisError::Invalid(format!("label {bad} outside {num_classes} classes")));
    }
    let total: f64 = confusion_counts(truth, pred, num_classes)
        .into_iter()
        .map(|(tp, fp, fn_)| {
            // f1 = 2tp / (2tp + fp + fn), which is 0 exactly when precision + recall is 0
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}

/// Annotator quality over the picked documents.
pub fn human_f1(picked_true: &[usize], picked_emitted: &[usize], num_classes: usize) -> Result<f64> {
    f1_macro(picked_true, picked_emitted, num_classes)
}

/// Test-set f1-macro of a classifier.
pub fn machine_f1(clf: &SoftmaxClassifier, test: &[(&[f64], usize)], num_classes: usize) -> Result<f64> {
    let truth: Vec<usize> = test.iter().map(|(_, y)| *y).collect();
    let pred: Vec<usize> = test.iter().map(|(x, _)| clf.predict(x)).collect();
    f1_macro(&truth, &pred, num_classes)
}
