//! Recurrent excitatory/inhibitory spiking network: wiring, the binned
//! simulation loop and online STDP.
//!
//! Synapses carry a non-negative magnitude in `[w_min, w_max]`; the sign
//! comes from the presynaptic neuron type and each E/I block has its own
//! amplitude multiplier. Recurrent spikes reach their targets one bin later,
//! input spikes act in the bin they occur.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::raster::SpikeRaster;

use crate::distribution::uniform_in;
use crate::error::{Error, Result};
use crate::neuron::{step_with_beta, NeuronParams, NeuronState};
use crate::plasticity::StdpParams;
use crate::rng::{stream_rng, Stream};

/// Default share of excitatory neurons.
pub const EXCITATORY_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub n_exc: usize,
    pub n_inh: usize,
    /// Connection probabilities, `p_xy` for presynaptic block x to postsynaptic block y.
    pub p_ee: f64,
    pub p_ei: f64,
    pub p_ie: f64,
    pub p_ii: f64,
    /// Per-block amplitude multipliers applied to the weight magnitude.
    pub scale_ee: f64,
    pub scale_ei: f64,
    pub scale_ie: f64,
    pub scale_ii: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub n_inputs: usize,
    /// Share of neurons that receive input projections.
    pub input_fraction: f64,
    /// Probability that a receiving neuron listens to a given input channel.
    pub input_prob: f64,
    pub input_w_min: f64,
    pub input_w_max: f64,
    /// Constant current added to every neuron each bin.
    pub bias_current: f64,
    /// Apply STDP to synapses leaving inhibitory neurons as well.
    pub plastic_inhibitory: bool,
}

impl TopologyConfig {
    /// `n` neurons split 80/20 into excitatory and inhibitory.
    pub fn with_size(n: usize) -> Self {
        let n_exc = (n as f64 * EXCITATORY_FRACTION).round() as usize;
        Self {
            n_exc,
            n_inh: n - n_exc,
            ..Self::default()
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_exc + self.n_inh
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_ee", self.p_ee),
            ("p_ei", self.p_ei),
            ("p_ie", self.p_ie),
            ("p_ii", self.p_ii),
            ("input_fraction", self.input_fraction),
            ("input_prob", self.input_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.w_min >= 0.0 && self.w_min < self.w_max) {
            return Err(Error::Config(format!(
                "weight magnitudes need 0 <= w_min < w_max, got [{}, {}]",
                self.w_min, self.w_max
            )));
        }
        if self.input_w_min > self.input_w_max {
            return Err(Error::Config("input_w_min exceeds input_w_max".into()));
        }
        Ok(())
    }

    fn block(&self, pre_exc: bool, post_exc: bool) -> (f64, f64) {
        match (pre_exc, post_exc) {
            (true, true) => (self.p_ee, self.scale_ee),
            (true, false) => (self.p_ei, self.scale_ei),
            (false, true) => (self.p_ie, self.scale_ie),
            (false, false) => (self.p_ii, self.scale_ii),
        }
    }
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            n_exc: 160,
            n_inh: 40,
            p_ee: 0.1,
            p_ei: 0.2,
            p_ie: 0.2,
            p_ii: 0.1,
            scale_ee: 1.0,
            scale_ei: 1.0,
            scale_ie: 2.0,
            scale_ii: 1.0,
            w_min: 0.0,
            w_max: 1.0,
            n_inputs: 40,
            input_fraction: 0.3,
            input_prob: 0.5,
            input_w_min: 0.5,
            input_w_max: 1.5,
            bias_current: 0.0,
            plastic_inhibitory: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    pub pre: u32,
    pub post: u32,
    /// Magnitude in `[w_min, w_max]`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSynapse {
    pub channel: u32,
    pub post: u32,
    pub weight: f64,
}

/// Wiring and initial weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub config: TopologyConfig,
    pub synapses: Vec<Synapse>,
    pub inputs: Vec<InputSynapse>,
}

impl Topology {
    /// Erdős–Rényi wiring per E/I block, no self-connections, initial
    /// magnitudes uniform in `[w_min, w_max]`.
    pub fn generate(config: &TopologyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = config.n_neurons();
        let mut wiring = stream_rng(seed, Stream::Wiring);
        let mut weights = stream_rng(seed, Stream::Weights);
        let mut synapses = Vec::new();
        for pre in 0..n {
            let pre_exc = pre < config.n_exc;
            for post in 0..n {
                if pre == post {
                    continue;
                }
                let (p, _) = config.block(pre_exc, post < config.n_exc);
                if p > 0.0 && wiring.random::<f64>() < p {
                    synapses.push(Synapse {
                        pre: pre as u32,
                        post: post as u32,
                        weight: uniform_in(&mut weights, config.w_min, config.w_max),
                    });
                }
            }
        }

        let mut input_rng = stream_rng(seed, Stream::Input);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut input_rng);
        let n_recv = (config.input_fraction * n as f64).round() as usize;
        let mut receivers = order[..n_recv.min(n)].to_vec();
        receivers.sort_unstable();
        let mut inputs = Vec::new();
        for channel in 0..config.n_inputs {
            for &post in &receivers {
                if config.input_prob > 0.0 && input_rng.random::<f64>() < config.input_prob {
                    inputs.push(InputSynapse {
                        channel: channel as u32,
                        post: post as u32,
                        weight: uniform_in(&mut input_rng, config.input_w_min, config.input_w_max),
                    });
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            synapses,
            inputs,
        })
    }

    pub fn n_synapses(&self) -> usize {
        self.synapses.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub neurons: Vec<NeuronParams>,
    pub topology: Topology,
    /// One parameter set per synapse, aligned with `topology.synapses`.
    pub stdp: Vec<StdpParams>,
    pub seed: u64,
    out_edges: Csr,
    in_edges: Csr,
    input_edges: Csr,
}

/// Compressed adjacency: for each row, a slice of edge ids.
#[derive(Debug, Clone, PartialEq, Default)]
struct Csr {
    offsets: Vec<usize>,
    edges: Vec<u32>,
}

impl Csr {
    fn build(rows: usize, keys: impl Iterator<Item = usize> + Clone) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for k in keys.clone() {
            counts[k + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut edges = vec![0u32; counts[rows]];
        for (e, k) in keys.enumerate() {
            edges[fill[k]] = e as u32;
            fill[k] += 1;
        }
        Self {
            offsets: counts,
            edges,
        }
    }

    #[inline]
    fn row(&self, r: usize) -> &[u32] {
        &self.edges[self.offsets[r]..self.offsets[r + 1]]
    }
}

impl Network {
    /// Assembles a network from sampled parameters and a wiring.
    ///
    /// `stdp` holds either a single shared parameter set or at least one set
    /// per synapse (extra entries are ignored).
    pub fn assemble(
        neurons: Vec<NeuronParams>,
        stdp: &[StdpParams],
        topology: Topology,
        seed: u64,
    ) -> Result<Self> {
        let cfg = &topology.config;
        let n = cfg.n_neurons();
        if neurons.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} neuron parameter sets for {n} neurons",
                neurons.len()
            )));
        }
        let n_exc_params = neurons.iter().take_while(|p| p.is_excitatory).count();
        if n_exc_params != cfg.n_exc || neurons[cfg.n_exc..].iter().any(|p| p.is_excitatory) {
            return Err(Error::InvalidArgument(
                "neuron list must hold n_exc excitatory then n_inh inhibitory neurons".into(),
            ));
        }
        for p in &neurons {
            p.validate()?;
        }
        let m = topology.n_synapses();
        let stdp: Vec<StdpParams> = match stdp.len() {
            0 if m > 0 => return Err(Error::InvalidArgument("no STDP parameters".into())),
            1 => vec![stdp[0]; m],
            k if k >= m => stdp[..m].to_vec(),
            k => {
                return Err(Error::InvalidArgument(format!(
                    "{k} STDP parameter sets for {m} synapses"
                )))
            }
        };
        for p in &stdp {
            p.validate()?;
            if p.w_min != cfg.w_min || p.w_max != cfg.w_max {
                return Err(Error::InvalidArgument("STDP weight bounds differ from topology".into()));
            }
        }
        let out_edges = Csr::build(n, topology.synapses.iter().map(|s| s.pre as usize));
        let in_edges = Csr::build(n, topology.synapses.iter().map(|s| s.post as usize));
        let input_edges = Csr::build(
            cfg.n_inputs,
            topology.inputs.iter().map(|s| s.channel as usize),
        );
        Ok(Self {
            neurons,
            topology,
            stdp,
            seed,
            out_edges,
            in_edges,
            input_edges,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn excitatory_indices(&self) -> Vec<usize> {
        (0..self.topology.config.n_exc).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.topology.synapses.iter().map(|s| s.weight).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.topology.synapses.len() {
            return Err(Error::InvalidArgument("weight vector length mismatch".into()));
        }
        for (s, &w) in self.topology.synapses.iter_mut().zip(weights) {
            s.weight = w;
        }
        Ok(())
    }

    /// Signed current contribution of one spike through synapse `s`.
    #[inline]
    fn efficacy(&self, s: &Synapse) -> f64 {
        let cfg = &self.topology.config;
        let pre_exc = (s.pre as usize) < cfg.n_exc;
        let (_, scale) = cfg.block(pre_exc, (s.post as usize) < cfg.n_exc);
        let sign = if pre_exc { 1.0 } else { -1.0 };
        sign * scale * s.weight
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        NetworkSnapshot {
            version: NetworkSnapshot::VERSION,
            seed: self.seed,
            topology: self.topology.config.clone(),
            neurons: self.neurons.clone(),
            stdp: self.stdp.clone(),
            weights: self
                .topology
                .synapses
                .iter()
                .map(|s| (s.pre, s.post, s.weight))
                .collect(),
            input_weights: self
                .topology
                .inputs
                .iter()
                .map(|s| (s.channel, s.post, s.weight))
                .collect(),
        }
    }
}

/// Builds a network: wiring from `seed`, parameters supplied by the caller.
pub fn build_network(
    neuron_params: Vec<NeuronParams>,
    stdp_params: &[StdpParams],
    config: &TopologyConfig,
    seed: u64,
) -> Result<Network> {
    let topology = Topology::generate(config, seed)?;
    Network::assemble(neuron_params, stdp_params, topology, seed)
}

/// Versioned JSON document describing a network exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub version: u32,
    pub seed: u64,
    pub topology: TopologyConfig,
    pub neurons: Vec<NeuronParams>,
    pub stdp: Vec<StdpParams>,
    /// Recurrent weights as (pre, post, magnitude) triplets.
    pub weights: Vec<(u32, u32, f64)>,
    /// Input weights as (channel, post, weight) triplets.
    pub input_weights: Vec<(u32, u32, f64)>,
}

impl NetworkSnapshot {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: NetworkSnapshot = serde_json::from_str(text)?;
        if snap.version != Self::VERSION {
            return Err(Error::Data(format!("unsupported snapshot version {}", snap.version)));
        }
        Ok(snap)
    }

    pub fn into_network(self) -> Result<Network> {
        let topology = Topology {
            config: self.topology,
            synapses: self
                .weights
                .into_iter()
                .map(|(pre, post, weight)| Synapse { pre, post, weight })
                .collect(),
            inputs: self
                .input_weights
                .into_iter()
                .map(|(channel, post, weight)| InputSynapse {
                    channel,
                    post,
                    weight,
                })
                .collect(),
        };
        Network::assemble(self.neurons, &self.stdp, topology, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub raster: SpikeRaster,
    /// Synapse magnitudes after the run, aligned with `topology.synapses`.
    pub final_weights: Vec<f64>,
    /// Decoded rate states (time × neuron), filled in by the codec.
    pub decoded_states: Option<DMatrix<f64>>,
}

impl SimulationTrace {
    /// Total spike count `S` and the per-neuron mean `S / N`.
    pub fn total_spike_count(&self) -> (u64, f64) {
        total_spike_count(&self.raster)
    }
}

/// `S` and `S̃ = S / N` for a raster.
pub fn total_spike_count(raster: &SpikeRaster) -> (u64, f64) {
    let s = raster.spike_count();
    let n = raster.n_neurons();
    let mean = if n == 0 { 0.0 } else { s as f64 / n as f64 };
    (s, mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learning {
    On,
    Off,
}

/// Runs the network from rest for `duration` ms in bins of `dt`.
///
/// Bins beyond the end of `input` receive no input.
pub fn simulate(
    net: &Network,
    input: &SpikeRaster,
    duration: f64,
    dt: f64,
    learning: Learning,
) -> Result<SimulationTrace> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if (input.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::InvalidArgument(format!(
            "input bin width {} differs from dt {dt}",
            input.dt()
        )));
    }
    let cfg = &net.topology.config;
    if input.n_neurons() != cfg.n_inputs {
        return Err(Error::InvalidArgument(format!(
            "input raster has {} channels, network expects {}",
            input.n_neurons(),
            cfg.n_inputs
        )));
    }
    let n = net.n_neurons();
    let n_bins = (duration / dt).round() as usize;
    let betas: Vec<f64> = net.neurons.iter().map(|p| p.beta(dt)).collect();
    let mut states: Vec<NeuronState> = net.neurons.iter().map(NeuronState::at_rest).collect();
    let mut weights = net.weights();
    let efficacy: Vec<f64> = net.topology.synapses.iter().map(|s| net.efficacy(s)).collect();
    let mut sign_scale: Vec<f64> = Vec::new();
    let learn = learning == Learning::On && !weights.is_empty();
    if learn {
        // efficacy = sign_scale * weight; keep the factor to refresh efficacies.
        sign_scale = net
            .topology
            .synapses
            .iter()
            .map(|s| {
                let mut unit = *s;
                unit.weight = 1.0;
                net.efficacy(&unit)
            })
            .collect();
    }
    let mut efficacy = efficacy;
    let plastic_inh = cfg.plastic_inhibitory;

    let mut raster = SpikeRaster::new(n, n_bins, dt);
    let mut current = vec![0.0f64; n];
    let mut prev_spikes: Vec<usize> = Vec::new();
    let mut spikes: Vec<usize> = Vec::new();
    let mut last_spike = vec![f64::NEG_INFINITY; n];
    let input_bins = input.n_bins();

    for bin in 0..n_bins {
        current.fill(cfg.bias_current);
        for &j in &prev_spikes {
            for &e in net.out_edges.row(j) {
                let s = &net.topology.synapses[e as usize];
                current[s.post as usize] += efficacy[e as usize];
            }
        }
        if bin < input_bins {
            for k in 0..cfg.n_inputs {
                if input.get(k, bin) {
                    for &e in net.input_edges.row(k) {
                        let s = &net.topology.inputs[e as usize];
                        current[s.post as usize] += s.weight;
                    }
                }
            }
        }

        spikes.clear();
        for i in 0..n {
            let c = current[i];
            if !c.is_finite() {
                return Err(Error::NumericalFault {
                    bin,
                    message: format!("non-finite input current {c} to neuron {i}"),
                });
            }
            let (next, spiked) = step_with_beta(states[i], &net.neurons[i], c, dt, betas[i]);
            states[i] = next;
            if spiked {
                spikes.push(i);
                raster.set(i, bin, true);
            }
        }

        if learn && !spikes.is_empty() {
            let t = bin as f64 * dt;
            // Potentiation: each postsynaptic spike pairs with the latest
            // presynaptic spike at or before t.
            for &i in &spikes {
                for &e in net.in_edges.row(i) {
                    let e = e as usize;
                    let s = &net.topology.synapses[e];
                    let pre = s.pre as usize;
                    if !plastic_inh && pre >= cfg.n_exc {
                        continue;
                    }
                    let t_pre = if raster.get(pre, bin) { t } else { last_spike[pre] };
                    let p = &net.stdp[e];
                    let w = weights[e];
                    weights[e] = p.clamp(w + p.delta_unchecked(w, t - t_pre));
                    efficacy[e] = sign_scale[e] * weights[e];
                }
            }
            // Depression: each presynaptic spike pairs with the latest
            // postsynaptic spike strictly before t.
            for &j in &spikes {
                if !plastic_inh && j >= cfg.n_exc {
                    continue;
                }
                for &e in net.out_edges.row(j) {
                    let e = e as usize;
                    let post = net.topology.synapses[e].post as usize;
                    let p = &net.stdp[e];
                    let w = weights[e];
                    weights[e] = p.clamp(w + p.delta_unchecked(w, last_spike[post] - t));
                    efficacy[e] = sign_scale[e] * weights[e];
                }
            }
            for &i in &spikes {
                last_spike[i] = t;
            }
        } else if !spikes.is_empty() {
            let t = bin as f64 * dt;
            for &i in &spikes {
                last_spike[i] = t;
            }
        }
        std::mem::swap(&mut prev_spikes, &mut spikes);
    }

    Ok(SimulationTrace {
        raster,
        final_weights: weights,
        decoded_states: None,
    })
}
