//! Pair-based STDP with soft weight dependence.
//!
//! For `dt = t_post - t_pre`:
//!
//! ```text
//! dw =  eta_plus  (w_max - w) exp(-|dt| / tau_plus)    dt >= 0
//! dw = -eta_minus (w - w_min) exp(-|dt| / tau_minus)   dt <  0
//! ```

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpParams {
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_plus > 0.0 && self.tau_minus > 0.0) {
            return Err(Error::InvalidParameter("STDP time constants must be > 0".into()));
        }
        if !(self.eta_plus >= 0.0 && self.eta_minus >= 0.0) {
            return Err(Error::InvalidParameter("STDP rates must be >= 0".into()));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::InvalidParameter(format!(
                "w_min {} must be below w_max {}",
                self.w_min, self.w_max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.w_min, self.w_max)
    }

    /// Unchecked rule evaluation for the simulation hot loop.
    #[inline]
    pub(crate) fn delta_unchecked(&self, w: f64, delta_t: f64) -> f64 {
        if delta_t >= 0.0 {
            self.eta_plus * (self.w_max - w) * (-delta_t / self.tau_plus).exp()
        } else {
            -self.eta_minus * (w - self.w_min) * (delta_t / self.tau_minus).exp()
        }
    }
}

/// Weight change for one pre/post pairing, `delta_t = t_post - t_pre` in ms.
/// The caller clamps `w + dw` into `[w_min, w_max]`.
pub fn stdp_delta(p: &StdpParams, w: f64, delta_t: f64) -> Result<f64> {
    if !(w >= p.w_min && w <= p.w_max) {
        return Err(Error::InvalidArgument(format!(
            "weight {w} outside [{}, {}]",
            p.w_min, p.w_max
        )));
    }
    Ok(p.delta_unchecked(w, delta_t))
}

/// Distributions of the four STDP constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdpDistributions {
    pub tau_plus: DistributionSpec,
    pub tau_minus: DistributionSpec,
    pub eta_plus: DistributionSpec,
    pub eta_minus: DistributionSpec,
}

impl Default for StdpDistributions {
    /// Optimized ensemble statistics reported for the heterogeneous network.
    fn default() -> Self {
        Self {
            tau_plus: DistributionSpec::normal(18.235, 1.522),
            tau_minus: DistributionSpec::normal(22.382, 1.768),
            eta_plus: DistributionSpec::normal(0.516, 0.0055),
            eta_minus: DistributionSpec::normal(0.448, 0.0057),
        }
    }
}

impl StdpDistributions {
    /// Point masses at the means of `self`: the homogeneous counterpart.
    pub fn degenerate_at_means(&self) -> Self {
        Self {
            tau_plus: DistributionSpec::degenerate(self.tau_plus.mean()),
            tau_minus: DistributionSpec::degenerate(self.tau_minus.mean()),
            eta_plus: DistributionSpec::degenerate(self.eta_plus.mean()),
            eta_minus: DistributionSpec::degenerate(self.eta_minus.mean()),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        [self.tau_plus, self.tau_minus, self.eta_plus, self.eta_minus]
            .iter()
            .all(DistributionSpec::is_degenerate)
    }
}

/// Samples one parameter set per synapse. Time constants are truncated to
/// positive values and learning rates to non-negative ones.
pub fn sample_stdp_population(
    dists: &StdpDistributions,
    bounds: (f64, f64),
    n_synapses: usize,
    seed: u64,
) -> Result<Vec<StdpParams>> {
    let (w_min, w_max) = bounds;
    if !(w_min < w_max) {
        return Err(Error::Config(format!("weight bounds inverted: [{w_min}, {w_max}]")));
    }
    let positive = |d: &DistributionSpec| d.with_bounds(d.lower.max(f64::MIN_POSITIVE), d.upper);
    let nonneg = |d: &DistributionSpec| d.with_bounds(d.lower.max(0.0), d.upper);
    let tp = positive(&dists.tau_plus);
    let tm = positive(&dists.tau_minus);
    let ep = nonneg(&dists.eta_plus);
    let em = nonneg(&dists.eta_minus);
    for d in [&tp, &tm, &ep, &em] {
        d.validate()?;
    }
    let mut rng = stream_rng(seed, Stream::Synapses);
    (0..n_synapses)
        .map(|_| {
            Ok(StdpParams {
                tau_plus: tp.sample(&mut rng)?,
                tau_minus: tm.sample(&mut rng)?,
                eta_plus: ep.sample(&mut rng)?,
                eta_minus: em.sample(&mut rng)?,
                w_min,
                w_max,
            })
        })
        .collect()
}
