//! Linear readout `y = W x + b` trained on mean squared error, either with
//! Adam (task readouts) or in closed form (ridge, used for the per-delay fits
//! of the memory-capacity metric).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// out × in
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 500,
            batch_size: 32,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("Adam lr must be > 0".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

impl ReadoutModel {
    pub fn zeros(n_out: usize, n_in: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n_out, n_in),
            bias: DVector::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Affine map applied row-wise: `states` is samples × in, result samples × out.
pub fn predict(model: &ReadoutModel, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if states.ncols() != model.n_in() {
        return Err(Error::InvalidArgument(format!(
            "states have {} features, model expects {}",
            states.ncols(),
            model.n_in()
        )));
    }
    let mut out = states * model.weights.transpose();
    for mut row in out.row_iter_mut() {
        row += model.bias.transpose();
    }
    Ok(out)
}

/// Row-wise argmax of the outputs; ties go to the lowest index.
pub fn classify(model: &ReadoutModel, states: &DMatrix<f64>) -> Result<Vec<usize>> {
    let out = predict(model, states)?;
    Ok(out.row_iter().map(|r| argmax(r.iter().copied())).collect())
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// `(1/n) sum_rows ||y - y_hat||^2`
pub fn mse(model: &ReadoutModel, states: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<f64> {
    let out = predict(model, states)?;
    Ok((out - targets).norm_squared() / states.nrows() as f64)
}

/// Analytic MSE gradient with respect to (weights, bias).
pub fn mse_gradient(
    model: &ReadoutModel,
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let resid = predict(model, states)? - targets;
    let scale = 2.0 / states.nrows() as f64;
    let grad_w = resid.transpose() * states * scale;
    let grad_b = resid.row_sum().transpose() * scale;
    Ok((grad_w, grad_b))
}

fn check_training_data(states: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<()> {
    if states.nrows() != targets.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} state rows vs {} target rows",
            states.nrows(),
            targets.nrows()
        )));
    }
    if states.nrows() < 2 {
        return Err(Error::Data("need at least 2 samples".into()));
    }
    if states.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in training data".into()));
    }
    Ok(())
}

/// Mini-batch Adam on the MSE loss from a zero initialization. Returns the
/// model and the full-data loss after every epoch.
pub fn train_readout(
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    cfg: &AdamConfig,
    seed: u64,
) -> Result<(ReadoutModel, Vec<f64>)> {
    cfg.validate()?;
    check_training_data(states, targets)?;
    let n = states.nrows();
    let mut model = ReadoutModel::zeros(targets.ncols(), states.ncols());
    let (mut m_w, mut v_w) = (model.weights.clone(), model.weights.clone());
    let (mut m_b, mut v_b) = (model.bias.clone(), model.bias.clone());
    let initial = mse(&model, states, targets)?;
    let limit = 1e6 * initial;
    let mut rng = stream_rng(seed, Stream::Readout);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0i32;
    let batch = cfg.batch_size.min(n);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = states.select_rows(chunk);
            let yb = targets.select_rows(chunk);
            let (gw, gb) = mse_gradient(&model, &xb, &yb)?;
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            m_w.zip_apply(&gw, |m, g| *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g);
            v_w.zip_apply(&gw, |v, g| *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g);
            m_b.zip_apply(&gb, |m, g| *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g);
            v_b.zip_apply(&gb, |v, g| *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g);
            let update = |p: &mut f64, m: f64, v: f64| {
                *p -= cfg.lr * (m / c1) / ((v / c2).sqrt() + cfg.eps);
            };
            for ((p, &m), &v) in model.weights.iter_mut().zip(m_w.iter()).zip(v_w.iter()) {
                update(p, m, v);
            }
            for ((p, &m), &v) in model.bias.iter_mut().zip(m_b.iter()).zip(v_b.iter()) {
                update(p, m, v);
            }
        }
        let loss = mse(&model, states, targets)?;
        if !loss.is_finite() || (initial > 0.0 && loss > limit) {
            return Err(Error::TrainingDiverged { epoch, loss, limit });
        }
        history.push(loss);
    }
    Ok((model, history))
}

/// Closed-form ridge regression on centered data; the bias is not penalized.
pub fn ridge_fit(states: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<ReadoutModel> {
    check_training_data(states, targets)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("ridge lambda must be >= 0".into()));
    }
    let x_mean = states.row_mean();
    let y_mean = targets.row_mean();
    let mut xc = states.clone();
    for mut r in xc.row_iter_mut() {
        r -= &x_mean;
    }
    let mut yc = targets.clone();
    for mut r in yc.row_iter_mut() {
        r -= &y_mean;
    }
    let solver = RidgeSolver::new(&xc, lambda)?;
    let w = solver.solve(&(xc.transpose() * &yc)); // in × out
    let bias = (y_mean - &x_mean * &w).transpose();
    Ok(ReadoutModel {
        weights: w.transpose(),
        bias,
    })
}

/// Factorization of `X^T X + lambda I` with jitter escalation for
/// rank-deficient designs.
pub(crate) struct RidgeSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl RidgeSolver {
    pub(crate) fn new(centered: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let gram = centered.transpose() * centered;
        let d = gram.nrows();
        let scale = (gram.trace() / d.max(1) as f64).max(1e-300);
        let mut jitter = lambda;
        for _ in 0..12 {
            let mut a = gram.clone();
            for i in 0..d {
                a[(i, i)] += jitter;
            }
            if let Some(chol) = a.cholesky() {
                return Ok(Self { chol });
            }
            jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
        }
        Err(Error::Numerical("ridge normal equations not positive definite".into()))
    }

    pub(crate) fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }
}
