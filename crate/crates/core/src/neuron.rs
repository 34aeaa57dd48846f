//! Leaky integrate-and-fire neurons.
//!
//! Membrane dynamics `tau_m dv/dt = -(v - v_rest) + I` are advanced with the
//! exact exponential update for a current held constant over the bin:
//!
//! ```text
//! v[t+1] = beta (v[t] - v_rest) + v_rest + (1 - beta) I[t],   beta = exp(-dt / tau_m)
//! ```
//!
//! A spike is emitted when the updated potential reaches threshold, after
//! which the potential is clamped at `v_reset` for the refractory period.

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Membrane time constant, ms.
    pub tau_m: f64,
    pub v_th: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    /// Refractory period, ms.
    pub t_ref: f64,
    pub is_excitatory: bool,
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) {
            return Err(Error::InvalidParameter(format!("tau_m must be > 0, got {}", self.tau_m)));
        }
        if !(self.t_ref >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_ref must be >= 0, got {}", self.t_ref)));
        }
        if !(self.v_reset <= self.v_rest && self.v_rest < self.v_th) {
            return Err(Error::InvalidParameter(format!(
                "require v_reset <= v_rest < v_th, got {} / {} / {}",
                self.v_reset, self.v_rest, self.v_th
            )));
        }
        Ok(())
    }

    /// Decay factor for one bin of width `dt`.
    pub fn beta(&self, dt: f64) -> f64 {
        (-dt / self.tau_m).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    /// Remaining refractory time, ms.
    pub refractory_remaining: f64,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        Self {
            v: params.v_rest,
            refractory_remaining: 0.0,
        }
    }

    pub fn is_refractory(&self) -> bool {
        self.refractory_remaining > 0.0
    }
}

/// Advances one neuron by one bin. Returns the new state and whether it spiked.
pub fn lif_step(
    state: NeuronState,
    params: &NeuronParams,
    input_current: f64,
    dt: f64,
) -> Result<(NeuronState, bool)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if !(params.tau_m > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_m must be > 0, got {}", params.tau_m)));
    }
    Ok(step_with_beta(state, params, input_current, dt, params.beta(dt)))
}

/// [`lif_step`] with a precomputed decay factor; used by the network loop.
#[inline]
pub(crate) fn step_with_beta(
    state: NeuronState,
    params: &NeuronParams,
    input_current: f64,
    dt: f64,
    beta: f64,
) -> (NeuronState, bool) {
    if state.refractory_remaining > 0.0 {
        let next = NeuronState {
            v: params.v_reset,
            refractory_remaining: (state.refractory_remaining - dt).max(0.0),
        };
        return (next, false);
    }
    let v = beta * (state.v - params.v_rest) + params.v_rest + (1.0 - beta) * input_current;
    if v >= params.v_th {
        let next = NeuronState {
            v: params.v_reset,
            refractory_remaining: params.t_ref,
        };
        (next, true)
    } else {
        (
            NeuronState {
                v,
                refractory_remaining: 0.0,
            },
            false,
        )
    }
}

/// How the threshold of a sampled population is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Fixed(f64),
    Distributed(DistributionSpec),
}

/// Recipe for sampling a heterogeneous excitatory/inhibitory population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub tau_m_exc: DistributionSpec,
    pub tau_m_inh: DistributionSpec,
    /// Multiplies every sampled membrane time constant. Published Gamma fits
    /// carry no unit, so the conversion to ms is explicit.
    pub tau_unit_ms: f64,
    pub v_th: Threshold,
    pub v_rest: f64,
    pub v_reset: f64,
    pub t_ref: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            tau_m_exc: DistributionSpec::gamma(2.89, 0.248).with_bounds(0.05, f64::INFINITY),
            tau_m_inh: DistributionSpec::gamma(5.14, 0.313).with_bounds(0.05, f64::INFINITY),
            tau_unit_ms: 20.0,
            v_th: Threshold::Fixed(1.0),
            v_rest: 0.0,
            v_reset: 0.0,
            t_ref: 2.0,
        }
    }
}

/// Samples `n_exc` excitatory followed by `n_inh` inhibitory neurons.
///
/// Non-positive membrane time constants are rejected and redrawn together
/// with any draw outside the distribution's own bounds.
pub fn sample_neuron_population(
    spec: &PopulationSpec,
    n_exc: usize,
    n_inh: usize,
    seed: u64,
) -> Result<Vec<NeuronParams>> {
    spec.tau_m_exc.validate()?;
    spec.tau_m_inh.validate()?;
    if let Threshold::Distributed(d) = &spec.v_th {
        d.validate()?;
    }
    if !(spec.tau_unit_ms > 0.0) {
        return Err(Error::Config("tau_unit_ms must be > 0".into()));
    }
    let mut rng = stream_rng(seed, Stream::Neurons);
    let positive = |d: &DistributionSpec| d.with_bounds(d.lower.max(f64::MIN_POSITIVE), d.upper);
    let tau_exc = positive(&spec.tau_m_exc);
    let tau_inh = positive(&spec.tau_m_inh);

    let mut out = Vec::with_capacity(n_exc + n_inh);
    for i in 0..n_exc + n_inh {
        let is_excitatory = i < n_exc;
        let dist = if is_excitatory { &tau_exc } else { &tau_inh };
        let tau_m = dist.sample(&mut rng)? * spec.tau_unit_ms;
        let v_th = match &spec.v_th {
            Threshold::Fixed(v) => *v,
            Threshold::Distributed(d) => {
                // Threshold must stay strictly above rest.
                let d = d.with_bounds(d.lower.max(spec.v_rest + 1e-9), d.upper);
                d.sample(&mut rng)?
            }
        };
        let params = NeuronParams {
            tau_m,
            v_th,
            v_rest: spec.v_rest,
            v_reset: spec.v_reset,
            t_ref: spec.t_ref,
            is_excitatory,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        out.push(params);
    }
    Ok(out)
}
