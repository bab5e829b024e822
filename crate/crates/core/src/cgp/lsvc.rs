//! Linear support vector classification with the squared hinge loss.
//!
//! Each binary problem minimises
//! `0.5 rho(w) + C sum_i max(0, 1 - y_i (w.x_i + b))^2`
//! with an unpenalised intercept, by cyclic coordinate descent: a
//! generalised Newton step per coordinate followed by a backtracking search
//! that only accepts strict decreases. Multi-class problems are solved
//! one-vs-rest and predicted by the largest confidence score.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    /// `rho(w) = ||w||_1`
    L1,
    /// `rho(w) = ||w||_2^2`
    #[default]
    L2,
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            other => Err(Error::InvalidConfig(format!(
                "unknown penalty `{other}` (expected l1 or l2)"
            ))),
        }
    }
}

/// One weight vector and intercept per class; predicts the class with the
/// highest score, ties going to the lowest class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    classes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    intercepts: Vec<f64>,
}

impl LinearClassifier {
    /// Maps every point to `label`.
    pub fn constant(label: usize) -> Self {
        Self {
            classes: vec![label],
            weights: vec![Vec::new()],
            intercepts: vec![0.0],
        }
    }

    /// Two-class rule: `positive` where `w.x + b > 0`, else `negative`.
    pub fn binary(negative: usize, positive: usize, weights: Vec<f64>, intercept: f64) -> Self {
        let neg: Vec<f64> = weights.iter().map(|w| -w).collect();
        let mut classes = vec![negative, positive];
        let mut weights = vec![neg, weights];
        let mut intercepts = vec![-intercept, intercept];
        if positive < negative {
            classes.swap(0, 1);
            weights.swap(0, 1);
            intercepts.swap(0, 1);
        }
        Self {
            classes,
            weights,
            intercepts,
        }
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, (w, b)) in self.weights.iter().zip(&self.intercepts).enumerate() {
            let s = dot(w, x) + b;
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        self.classes[best]
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsvcParams {
    pub penalty: Penalty,
    pub c: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for LsvcParams {
    fn default() -> Self {
        Self {
            penalty: Penalty::L2,
            c: 1.0,
            tolerance: 1e-6,
            max_epochs: 1000,
        }
    }
}

impl LsvcParams {
    pub fn new(penalty: Penalty, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "regularisation C must be positive, got {c}"
            )));
        }
        Ok(Self {
            penalty,
            c,
            ..Self::default()
        })
    }
}

/// Solution of one binary problem, with the objective after every epoch.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub objective_history: Vec<f64>,
}

struct Problem<'a> {
    points: &'a [Vec<f64>],
    params: LsvcParams,
}

impl Problem<'_> {
    fn feature(&self, i: usize, j: usize, dim: usize) -> f64 {
        if j == dim {
            1.0
        } else {
            self.points[i][j]
        }
    }

    fn penalty(&self, w: f64) -> f64 {
        match self.params.penalty {
            Penalty::L1 => 0.5 * w.abs(),
            Penalty::L2 => 0.5 * w * w,
        }
    }

    fn objective(&self, weights: &[f64], margins: &[f64]) -> f64 {
        let reg: f64 = weights.iter().map(|&w| self.penalty(w)).sum();
        let loss: f64 = margins.iter().map(|&m| m.max(0.0).powi(2)).sum();
        reg + self.params.c * loss
    }
}

/// Trains `y in {-1, +1}` targets.
pub fn fit_binary(points: &[Vec<f64>], targets: &[f64], params: LsvcParams) -> Result<BinaryFit> {
    if points.is_empty() {
        return Err(Error::EmptyInput("training points"));
    }
    if points.len() != targets.len() {
        return Err(Error::InvalidConfig("points and labels differ in length".into()));
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let problem = Problem {
        points,
        params,
    };
    let c = params.c;
    let n = points.len();
    let mut weights = vec![0.0; dim];
    let mut intercept = 0.0;
    // margins m_i = 1 - y_i (w.x_i + b)
    let mut margins = vec![1.0; n];
    let mut objective = problem.objective(&weights, &margins);
    let mut history = vec![objective];

    for _ in 0..params.max_epochs {
        for j in 0..=dim {
            let current = if j == dim { intercept } else { weights[j] };
            let mut grad = 0.0;
            let mut hess = 0.0;
            for i in 0..n {
                if margins[i] > 0.0 {
                    let a = problem.feature(i, j, dim);
                    grad -= 2.0 * c * targets[i] * a * margins[i];
                    hess += 2.0 * c * a * a;
                }
            }
            let direction = if j == dim {
                if hess <= 0.0 {
                    continue;
                }
                -grad / hess
            } else {
                match params.penalty {
                    Penalty::L2 => -(grad + current) / (hess + 1.0),
                    Penalty::L1 => {
                        let h = hess.max(1e-12);
                        if grad + 0.5 <= h * current {
                            -(grad + 0.5) / h
                        } else if grad - 0.5 >= h * current {
                            -(grad - 0.5) / h
                        } else {
                            -current
                        }
                    }
                }
            };
            if direction == 0.0 || !direction.is_finite() {
                continue;
            }
            let base_reg = if j == dim { 0.0 } else { problem.penalty(current) };
            let base_loss: f64 = margins.iter().map(|&m| m.max(0.0).powi(2)).sum();
            let mut step = direction;
            for _ in 0..40 {
                let reg = if j == dim { 0.0 } else { problem.penalty(current + step) };
                let loss: f64 = (0..n)
                    .map(|i| {
                        let a = problem.feature(i, j, dim);
                        (margins[i] - targets[i] * a * step).max(0.0).powi(2)
                    })
                    .sum();
                let change = (reg - base_reg) + c * (loss - base_loss);
                if change < 0.0 {
                    for (i, m) in margins.iter_mut().enumerate() {
                        *m -= targets[i] * problem.feature(i, j, dim) * step;
                    }
                    if j == dim {
                        intercept += step;
                    } else {
                        weights[j] += step;
                    }
                    break;
                }
                step *= 0.5;
            }
        }
        let next = problem.objective(&weights, &margins);
        history.push(next);
        let relative = (objective - next).abs() / objective.abs().max(1e-12);
        objective = next;
        if relative < params.tolerance {
            break;
        }
    }
    Ok(BinaryFit {
        weights,
        intercept,
        objective_history: history,
    })
}

/// Trains a one-vs-rest classifier on `labels`. A single distinct label
/// yields [`LinearClassifier::constant`]; two labels train one problem.
pub fn train_lsvc(points: &[Vec<f64>], labels: &[usize], params: LsvcParams) -> Result<LinearClassifier> {
    if points.is_empty() {
        return Err(Error::EmptyInput("training points"));
    }
    if points.len() != labels.len() {
        return Err(Error::InvalidConfig("points and labels differ in length".into()));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    match classes.len() {
        1 => Ok(LinearClassifier::constant(classes[0])),
        2 => {
            let targets: Vec<f64> = labels
                .iter()
                .map(|&l| if l == classes[1] { 1.0 } else { -1.0 })
                .collect();
            let fit = fit_binary(points, &targets, params)?;
            Ok(LinearClassifier::binary(classes[0], classes[1], fit.weights, fit.intercept))
        }
        _ => {
            let mut weights = Vec::with_capacity(classes.len());
            let mut intercepts = Vec::with_capacity(classes.len());
            for &class in &classes {
                let targets: Vec<f64> = labels
                    .iter()
                    .map(|&l| if l == class { 1.0 } else { -1.0 })
                    .collect();
                let fit = fit_binary(points, &targets, params)?;
                weights.push(fit.weights);
                intercepts.push(fit.intercept);
            }
            Ok(LinearClassifier {
                classes,
                weights,
                intercepts,
            })
        }
    }
}
