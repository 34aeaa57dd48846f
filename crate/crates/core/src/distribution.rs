//! Parametric scalar distributions used for heterogeneous parameter
//! ensembles and as the coordinates of the distribution-valued search space.

use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Maximum number of rejected draws before a distribution is declared
/// pathological for its support.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `a` = mean, `b` = standard deviation.
    Normal,
    /// `a` = shape, `b` = scale.
    Gamma,
    /// `a` = mean of the log, `b` = standard deviation of the log.
    LogNormal,
    /// Point mass at `a`; `b` is ignored.
    Degenerate,
}

/// A scalar distribution restricted to `[lower, upper]` by rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    pub a: f64,
    pub b: f64,
    pub lower: f64,
    pub upper: f64,
}

impl DistributionSpec {
    pub fn normal(mean: f64, std: f64) -> Self {
        Self::unbounded(Family::Normal, mean, std)
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        Self::unbounded(Family::Gamma, shape, scale)
    }

    pub fn lognormal(mu_log: f64, sigma_log: f64) -> Self {
        Self::unbounded(Family::LogNormal, mu_log, sigma_log)
    }

    /// Lognormal with arithmetic mean `mean` and log-scale spread `sigma_log`.
    pub fn lognormal_with_mean(mean: f64, sigma_log: f64) -> Self {
        Self::lognormal(mean.ln() - 0.5 * sigma_log * sigma_log, sigma_log)
    }

    pub fn degenerate(value: f64) -> Self {
        Self::unbounded(Family::Degenerate, value, 0.0)
    }

    fn unbounded(family: Family, a: f64, b: f64) -> Self {
        Self {
            family,
            a,
            b,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.family == Family::Degenerate || (self.family == Family::Normal && self.b == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{msg} in {self:?}")));
        if !self.a.is_finite() || !self.b.is_finite() {
            return bad("non-finite parameter");
        }
        if self.lower.is_nan() || self.upper.is_nan() || self.lower > self.upper {
            return bad("bounds not ordered");
        }
        match self.family {
            Family::Normal | Family::LogNormal if self.b < 0.0 => bad("negative spread"),
            Family::Gamma if self.a <= 0.0 || self.b <= 0.0 => bad("non-positive shape or scale"),
            Family::Degenerate if self.a < self.lower || self.a > self.upper => {
                bad("point mass outside support")
            }
            _ => Ok(()),
        }
    }

    /// Mean of the untruncated distribution.
    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Normal | Family::Degenerate => self.a,
            Family::Gamma => self.a * self.b,
            Family::LogNormal => (self.a + 0.5 * self.b * self.b).exp(),
        }
    }

    /// Standard deviation of the untruncated distribution.
    pub fn std(&self) -> f64 {
        match self.family {
            Family::Normal => self.b,
            Family::Degenerate => 0.0,
            Family::Gamma => self.a.sqrt() * self.b,
            Family::LogNormal => {
                let s2 = self.b * self.b;
                ((s2.exp() - 1.0) * (2.0 * self.a + s2).exp()).sqrt()
            }
        }
    }

    /// Draws one value inside `[lower, upper]`, resampling out-of-support
    /// draws up to [`MAX_REJECTIONS`] times.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if self.family == Family::Degenerate {
            return Ok(self.a);
        }
        for _ in 0..MAX_REJECTIONS {
            let x = self.draw_raw(rng)?;
            if x >= self.lower && x <= self.upper && x.is_finite() {
                return Ok(x);
            }
        }
        Err(Error::Config(format!(
            "{MAX_REJECTIONS} consecutive draws fell outside [{}, {}] for {:?}({}, {})",
            self.lower, self.upper, self.family, self.a, self.b
        )))
    }

    pub fn sample_n<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    fn draw_raw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let invalid = |e: &dyn std::fmt::Display| Error::Config(format!("{self:?}: {e}"));
        Ok(match self.family {
            Family::Degenerate => self.a,
            Family::Normal if self.b == 0.0 => self.a,
            Family::Normal => Normal::new(self.a, self.b)
                .map_err(|e| invalid(&e))?
                .sample(rng),
            Family::Gamma => Gamma::new(self.a, self.b)
                .map_err(|e| invalid(&e))?
                .sample(rng),
            Family::LogNormal => LogNormal::new(self.a, self.b)
                .map_err(|e| invalid(&e))?
                .sample(rng),
        })
    }

    /// Quantile of the untruncated distribution at probability `Φ(z)`.
    ///
    /// Parameterizing by the normal score keeps the far tails accurate:
    /// both `p` and `1 - p` are formed without cancellation.
    pub fn quantile_at_score(&self, z: f64) -> f64 {
        match self.family {
            Family::Degenerate => self.a,
            Family::Normal => self.a + self.b * z,
            Family::LogNormal => (self.a + self.b * z).exp(),
            Family::Gamma => {
                let p = std_normal_cdf(z);
                let q = std_normal_cdf(-z);
                self.b * gamma_unit_quantile(self.a, p, q, z, None)
            }
        }
    }

    /// Quantile at probability `p` of the untruncated distribution.
    pub fn quantile(&self, p: f64) -> f64 {
        self.quantile_at_score(std_normal_quantile(p))
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::standard().inverse_cdf(p)
}

/// Quantile of Gamma(shape, 1) at lower probability `p` (upper `q = 1 - p`),
/// `z` being the matching normal score used for the starting guess.
pub(crate) fn gamma_unit_quantile(shape: f64, p: f64, q: f64, z: f64, start: Option<f64>) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    // Wilson-Hilferty start, falling back to the small-x series x^k / Γ(k+1).
    let c = 1.0 / (9.0 * shape);
    let wh = shape * (1.0 - c + z * c.sqrt()).powi(3);
    let series = ((p.ln() + ln_gamma(shape + 1.0)) / shape).exp();
    let mut x = match start {
        Some(x0) => x0,
        None if wh > 0.0 && z > -1.0 => wh,
        None => series.min(wh.max(series)),
    };
    if !(x > 0.0 && x.is_finite()) {
        x = shape.max(1e-3);
    }
    let log_norm = ln_gamma(shape);
    let upper = p > 0.5;
    // Safeguarded Newton in log x: steps leaving the current bracket fall
    // back to bisection (or geometric expansion while one side is open).
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..200 {
        // Residual on whichever tail is represented accurately; both forms
        // increase with x.
        let resid = if upper { q - gamma_ur(shape, x) } else { gamma_lr(shape, x) - p };
        if resid == 0.0 {
            break;
        }
        if resid < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let log_pdf = (shape - 1.0) * x.ln() - x - log_norm;
        let dens_dlogx = (log_pdf + x.ln()).exp();
        let newton = x * (-resid / dens_dlogx).exp();
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if hi.is_infinite() {
            x * std::f64::consts::E.powi(2)
        } else if lo == 0.0 {
            x / std::f64::consts::E.powi(2)
        } else {
            (lo * hi).sqrt()
        };
        let done = (next / x - 1.0).abs() < 1e-15 || (hi.is_finite() && hi / lo - 1.0 < 1e-15);
        x = next;
        if done {
            break;
        }
    }
    x
}

/// Uniform draw in `[lo, hi)`; degenerate ranges return `lo`.
pub fn uniform_in<R: rand::Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}
