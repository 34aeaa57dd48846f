use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;

use crate::distribution::{gamma_unit_quantile, std_normal_cdf, std_normal_pdf, DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::rng::seeded;

use super::search::{SearchPoint, SearchSpace};

pub const QUADRATURE_NODES: usize = 512;
const SCORE_LIMIT: f64 = 6.0;

/// Midpoint nodes on `z in [-6, 6]` with weights proportional to `phi(z)`,
/// normalized to one.
fn score_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let h = 2.0 * SCORE_LIMIT / QUADRATURE_NODES as f64;
        let raw: Vec<(f64, f64)> = (0..QUADRATURE_NODES)
            .map(|k| {
                let z = -SCORE_LIMIT + (k as f64 + 0.5) * h;
                (z, std_normal_pdf(z) * h)
            })
            .collect();
        let total: f64 = raw.iter().map(|n| n.1).sum();
        raw.into_iter().map(|(z, w)| (z, w / total)).collect()
    })
}

/// Spacing of the log-shape grid on which unit Gamma profiles are tabulated.
const LOG_SHAPE_STEP: f64 = 1.0 / 128.0;

/// Exact unit-scale Gamma quantiles at the quadrature nodes for grid shape
/// `exp(i * LOG_SHAPE_STEP)`; rows are built on demand and kept for the
/// life of the process.
fn unit_gamma_row(i: i64) -> Arc<Vec<f64>> {
    static ROWS: OnceLock<Mutex<HashMap<i64, Arc<Vec<f64>>>>> = OnceLock::new();
    let rows = ROWS.get_or_init(Default::default);
    if let Some(r) = rows.lock().unwrap().get(&i) {
        return r.clone();
    }
    let shape = (i as f64 * LOG_SHAPE_STEP).exp();
    let mut prev: Option<f64> = None;
    let row: Vec<f64> = score_nodes()
        .iter()
        .map(|&(z, _)| {
            let x = gamma_unit_quantile(shape, std_normal_cdf(z), std_normal_cdf(-z), z, prev);
            prev = Some(x);
            x.ln()
        })
        .collect();
    let row = Arc::new(row);
    rows.lock().unwrap().insert(i, row.clone());
    row
}

/// Unit-scale Gamma quantile profile by four-point Lagrange interpolation
/// of the log-quantiles in log-shape.
fn unit_gamma_profile(shape: f64) -> Vec<f64> {
    let u = shape.ln() / LOG_SHAPE_STEP;
    let i0 = u.floor() as i64;
    let t = u - i0 as f64;
    if t == 0.0 {
        return unit_gamma_row(i0).iter().map(|v| v.exp()).collect();
    }
    let rows: Vec<Arc<Vec<f64>>> = (-1..=2).map(|k| unit_gamma_row(i0 + k)).collect();
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    (0..QUADRATURE_NODES)
        .map(|n| (w[0] * rows[0][n] + w[1] * rows[1][n] + w[2] * rows[2][n] + w[3] * rows[3][n]).exp())
        .collect()
}

/// Quantile values of `d` at the quadrature nodes.
pub(crate) fn quantile_profile(d: &DistributionSpec) -> Vec<f64> {
    match d.family {
        Family::Gamma => unit_gamma_profile(d.a).into_iter().map(|x| d.b * x).collect(),
        _ => score_nodes().iter().map(|&(z, _)| d.quantile_at_score(z)).collect(),
    }
}

pub(crate) fn profile_w2_sq(q1: &[f64], q2: &[f64]) -> f64 {
    score_nodes()
        .iter()
        .zip(q1.iter().zip(q2))
        .map(|(&(_, w), (a, b))| w * (a - b) * (a - b))
        .sum()
}

/// `W2` between two scalar distributions by quantile quadrature,
/// `W2^2 = int_0^1 (F1^-1(u) - F2^-1(u))^2 du`, evaluated after the
/// substitution `u = Phi(z)`.
pub fn quadrature_w2(d1: &DistributionSpec, d2: &DistributionSpec) -> Result<f64> {
    d1.validate()?;
    d2.validate()?;
    Ok(profile_w2_sq(&quantile_profile(d1), &quantile_profile(d2)).max(0.0).sqrt())
}

/// `W2` between two (untruncated) scalar distributions; the Normal/Normal
/// and point-mass cases are closed form.
pub fn wasserstein2_marginal(d1: &DistributionSpec, d2: &DistributionSpec) -> Result<f64> {
    d1.validate()?;
    d2.validate()?;
    let gaussian = |d: &DistributionSpec| matches!(d.family, Family::Normal | Family::Degenerate);
    if gaussian(d1) && gaussian(d2) {
        let dm = d1.mean() - d2.mean();
        let ds = d1.std() - d2.std();
        return Ok((dm * dm + ds * ds).sqrt());
    }
    quadrature_w2(d1, d2)
}

/// Width-scaled product-measure distance between two search points.
pub fn search_distance(space: &SearchSpace, p1: &SearchPoint, p2: &SearchPoint) -> Result<f64> {
    let m = space.marginals.len();
    if p1.marginals.len() != m || p2.marginals.len() != m || p1.extras.len() != space.extras.len()
        || p2.extras.len() != space.extras.len()
    {
        return Err(Error::InvalidArgument("search points do not match the search space".into()));
    }
    for (a, b) in p1.marginals.iter().zip(&p2.marginals) {
        if a.family != b.family {
            return Err(Error::InvalidArgument(format!(
                "marginal ordering mismatch: {:?} vs {:?}",
                a.family, b.family
            )));
        }
    }
    let mut sum = 0.0;
    for ((a, b), range) in p1.marginals.iter().zip(&p2.marginals).zip(&space.marginals) {
        let w = wasserstein2_marginal(a, b)? / range.width();
        sum += w * w;
    }
    for ((a, b), range) in p1.extras.iter().zip(&p2.extras).zip(&space.extras) {
        let w = (a - b) / (range.upper - range.lower);
        sum += w * w;
    }
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub iterations: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            iterations: 200,
            n_samples: 256,
            seed: 0,
        }
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Entropy-regularized transport cost between empirical samples of the two
/// distributions (log-domain Sinkhorn), returned as `sqrt` of the transport
/// cost of the regularized plan. Samples are stratified quantiles with a
/// shuffled pairing so the answer does not depend on sample order.
pub fn sinkhorn_w2(d1: &DistributionSpec, d2: &DistributionSpec, cfg: &SinkhornConfig) -> Result<f64> {
    d1.validate()?;
    d2.validate()?;
    if !(cfg.epsilon > 0.0) || cfg.n_samples == 0 {
        return Err(Error::InvalidArgument("sinkhorn needs epsilon > 0 and samples".into()));
    }
    let n = cfg.n_samples;
    let points = |d: &DistributionSpec| -> Vec<f64> {
        (0..n).map(|k| d.quantile((k as f64 + 0.5) / n as f64)).collect()
    };
    let mut x = points(d1);
    let y = points(d2);
    x.shuffle(&mut seeded(cfg.seed));
    // Costs are normalized so epsilon is relative to the problem scale.
    let scale = x.iter().chain(&y).map(|v| v * v).sum::<f64>() / (2 * n) as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let cost = |i: usize, j: usize| (x[i] - y[j]).powi(2) / scale;
    let log_w = -(n as f64).ln();
    let eps = cfg.epsilon;
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    for _ in 0..cfg.iterations {
        for i in 0..n {
            f[i] = -eps * log_sum_exp((0..n).map(|j| (g[j] - cost(i, j)) / eps + log_w));
        }
        for j in 0..n {
            g[j] = -eps * log_sum_exp((0..n).map(|i| (f[i] - cost(i, j)) / eps + log_w));
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let log_p = (f[i] + g[j] - cost(i, j)) / eps + 2.0 * log_w;
            total += log_p.exp() * cost(i, j);
        }
    }
    Ok((total * scale).max(0.0).sqrt())
}
