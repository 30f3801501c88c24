//! L2-regularized logistic regression fitted by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_two_classes, ClassifierError, Dataset, FeatureLayout, Standardizer};
use crate::numeric::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogregParams {
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when every gradient component is below this.
    pub tol: f64,
}

impl Default for LogregParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub layout: FeatureLayout,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn zeros(layout: FeatureLayout) -> Self {
        Self {
            layout,
            standardizer: Standardizer::identity(layout.dim()),
            weights: vec![0.0; layout.dim()],
            bias: 0.0,
        }
    }

    pub fn logit(&self, row: &[f64]) -> f64 {
        let z = self.standardizer.apply(row);
        dot(&self.weights, &z) + self.bias
    }

    /// Probability of class 1.
    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.logit(row))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean cross-entropy plus `l2/2 * |w|^2`, and its gradient.
///
/// `params` is the weights followed by the bias; the bias is not penalized.
pub fn logreg_objective(params: &[f64], rows: &[Vec<f64>], labels: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (x, &y) in rows.iter().zip(labels) {
        let t = dot(w, x) + b;
        loss += softplus(t) - y * t;
        let r = sigmoid(t) - y;
        for (g, xi) in grad[..d].iter_mut().zip(x) {
            *g += r * xi;
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, wi) in grad[..d].iter_mut().zip(w) {
        *g += l2 * wi;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss, grad)
}

/// Mean Hessian of [`logreg_objective`] at `params`.
fn objective_hessian(params: &[f64], rows: &[Vec<f64>], l2: f64) -> DMatrix<f64> {
    let d = params.len() - 1;
    let mut h = DMatrix::zeros(d + 1, d + 1);
    let mut x1 = DVector::zeros(d + 1);
    for x in rows {
        let p = sigmoid(dot(&params[..d], x) + params[d]);
        x1.rows_mut(0, d).copy_from_slice(x);
        x1[d] = 1.0;
        h.ger(p * (1.0 - p), &x1, &x1, 1.0);
    }
    h /= rows.len() as f64;
    for i in 0..d {
        h[(i, i)] += l2;
    }
    h
}

pub fn train_logreg(data: &Dataset, params: &LogregParams) -> Result<LogisticRegression, ClassifierError> {
    check_two_classes(data)?;
    data.validate()?;
    if !(params.l2 >= 0.0 && params.tol > 0.0) {
        return Err(ClassifierError::InvalidParameter("l2 must be >= 0 and tol > 0".into()));
    }
    let standardizer = Standardizer::fit(&data.features());
    let rows: Vec<Vec<f64>> = data.samples.iter().map(|s| standardizer.apply(&s.features)).collect();
    let labels = data.labels();
    let d = data.layout.dim();
    let mut theta = vec![0.0; d + 1];
    let (mut loss, mut grad) = logreg_objective(&theta, &rows, &labels, params.l2);
    for _ in 0..params.max_iter {
        if grad.iter().all(|g| g.abs() < params.tol) {
            break;
        }
        let mut h = objective_hessian(&theta, &rows, params.l2);
        // keeps the solve defined when l2 = 0 and a column is constant
        for i in 0..=d {
            h[(i, i)] += 1e-12;
        }
        let g = DVector::from_column_slice(&grad);
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone(),
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let (l, gr) = logreg_objective(&trial, &rows, &labels, params.l2);
            if l <= loss - 1e-4 * t * slope {
                theta = trial;
                loss = l;
                grad = gr;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let bias = theta.pop().unwrap();
    Ok(LogisticRegression {
        layout: data.layout,
        standardizer,
        weights: theta,
        bias,
    })
}
