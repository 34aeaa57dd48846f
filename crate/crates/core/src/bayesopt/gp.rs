use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Matérn kernel with smoothness 5/2 evaluated on a distance.
pub fn matern52(d: f64, length_scale: f64, variance: f64) -> f64 {
    let r = 5f64.sqrt() * d / length_scale;
    variance * (1.0 + r + r * r / 3.0) * (-r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig {
    /// Log-grid bounds for the length-scale, in distance units.
    pub length_scale_range: (f64, f64),
    /// Log-grid bounds for the signal variance of the standardized targets.
    pub variance_range: (f64, f64),
    pub grid_size: usize,
    pub jitter_min: f64,
    pub jitter_max: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            length_scale_range: (1e-2, 1e1),
            variance_range: (1e-1, 1e1),
            grid_size: 20,
            jitter_min: 1e-10,
            jitter_max: 1e-4,
        }
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![(lo * hi).sqrt()];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Gaussian-process posterior over a fixed set of observations, defined
/// entirely through pairwise distances.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    pub length_scale: f64,
    pub variance: f64,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
    y_mean: f64,
    y_std: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpSurrogate {
    /// Fits with hyperparameters chosen by marginal likelihood on the
    /// configured grid.
    pub fn fit(distances: &DMatrix<f64>, values: &[f64], cfg: &GpConfig) -> Result<Self> {
        let (y, y_mean, y_std) = standardize(distances, values)?;
        let mut best: Option<Self> = None;
        for &ls in &log_grid(cfg.length_scale_range.0, cfg.length_scale_range.1, cfg.grid_size) {
            for &var in &log_grid(cfg.variance_range.0, cfg.variance_range.1, cfg.grid_size) {
                if let Ok(gp) = Self::factor(distances, &y, y_mean, y_std, ls, var, cfg) {
                    if best.as_ref().is_none_or(|b| gp.log_marginal_likelihood > b.log_marginal_likelihood) {
                        best = Some(gp);
                    }
                }
            }
        }
        best.ok_or_else(|| Error::Numerical("GP Gram matrix not positive definite at maximum jitter".into()))
    }

    pub fn fit_fixed(
        distances: &DMatrix<f64>,
        values: &[f64],
        length_scale: f64,
        variance: f64,
        cfg: &GpConfig,
    ) -> Result<Self> {
        if !(length_scale > 0.0 && variance > 0.0) {
            return Err(Error::InvalidArgument("length-scale and variance must be > 0".into()));
        }
        let (y, y_mean, y_std) = standardize(distances, values)?;
        Self::factor(distances, &y, y_mean, y_std, length_scale, variance, cfg)
    }

    fn factor(
        distances: &DMatrix<f64>,
        y: &DVector<f64>,
        y_mean: f64,
        y_std: f64,
        length_scale: f64,
        variance: f64,
        cfg: &GpConfig,
    ) -> Result<Self> {
        let n = y.len();
        let k = distances.map(|d| matern52(d, length_scale, variance));
        let mut jitter = cfg.jitter_min;
        while jitter <= cfg.jitter_max * (1.0 + 1e-9) {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(chol) = kj.cholesky() {
                let alpha = chol.solve(y);
                let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
                let lml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
                return Ok(Self {
                    length_scale,
                    variance,
                    jitter,
                    log_marginal_likelihood: lml,
                    y_mean,
                    y_std,
                    chol,
                    alpha,
                });
            }
            jitter *= 10.0;
        }
        Err(Error::Numerical(format!(
            "Cholesky failed up to jitter {} (length-scale {}, variance {})",
            cfg.jitter_max, length_scale, variance
        )))
    }

    pub fn n_observations(&self) -> usize {
        self.alpha.len()
    }

    /// Posterior mean and standard deviation in the original units, given
    /// the distances from the query to every observation.
    pub fn predict(&self, dists_to_obs: &[f64]) -> Result<(f64, f64)> {
        if dists_to_obs.len() != self.alpha.len() {
            return Err(Error::InvalidArgument(format!(
                "{} distances for {} observations",
                dists_to_obs.len(),
                self.alpha.len()
            )));
        }
        let k_star = DVector::from_iterator(
            dists_to_obs.len(),
            dists_to_obs.iter().map(|&d| matern52(d, self.length_scale, self.variance)),
        );
        let mean = k_star.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let var = (self.variance - v.norm_squared()).max(0.0);
        Ok((self.y_mean + self.y_std * mean, self.y_std * var.sqrt()))
    }
}

fn standardize(distances: &DMatrix<f64>, values: &[f64]) -> Result<(DVector<f64>, f64, f64)> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidArgument("GP needs at least one observation".into()));
    }
    if distances.shape() != (n, n) {
        return Err(Error::InvalidArgument("distance matrix does not match observations".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite GP target".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    Ok((DVector::from_iterator(n, values.iter().map(|v| (v - mean) / std)), mean, std))
}
