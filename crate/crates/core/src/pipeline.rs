//! End-to-end experiments: encode an input, drive a reservoir, decode the
//! excitatory activity and read it out.
//!
//! Every run has two phases. A learning phase presents a separate input
//! stream with STDP switched on; its final weights are frozen and the
//! evaluation phase runs with plasticity off. Decoded states are sampled at
//! the last bin of each input sample.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bayesopt::{SearchPoint, SearchSpace};
use crate::codec::{rate_decode_subset, rate_encode, sf_encode_multi, CodecConfig};
use crate::datagen::{iid_uniform, synthetic_spike_classes, SpikeClassConfig};
use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::metrics::{memory_capacity, CapacityConfig, CapacityReport};
use crate::network::{simulate, Learning, Network, SimulationTrace, Topology, TopologyConfig};
use crate::neuron::{sample_neuron_population, PopulationSpec};
use crate::plasticity::{sample_stdp_population, StdpDistributions};
use crate::raster::SpikeRaster;
use crate::readout::{classify, predict, train_readout, AdamConfig, ReadoutModel};
use crate::rng::{stream_rng, Stream};

/// Offset mixed into the seed of the learning-phase input so that it never
/// coincides with the evaluation input.
const LEARNING_SEED_MIX: u64 = 0x5EED_1EA2_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub topology: TopologyConfig,
    pub population: PopulationSpec,
    pub stdp: StdpDistributions,
    pub codec: CodecConfig,
    /// Bin width, ms.
    pub dt: f64,
    /// Bins each input sample is held for.
    pub bins_per_sample: usize,
    /// Input samples presented with STDP on before evaluation.
    pub learning_samples: usize,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            population: PopulationSpec::default(),
            stdp: StdpDistributions::default(),
            // At full scale every input channel fires in every bin.
            codec: CodecConfig {
                rate_max: 1000.0,
                ..CodecConfig::default()
            },
            dt: 1.0,
            bins_per_sample: 1,
            learning_samples: 500,
        }
    }
}

impl ReservoirConfig {
    pub fn with_size(n: usize) -> Self {
        Self {
            topology: TopologyConfig::with_size(n),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.codec.validate()?;
        for d in [
            &self.population.tau_m_exc,
            &self.population.tau_m_inh,
            &self.stdp.tau_plus,
            &self.stdp.tau_minus,
            &self.stdp.eta_plus,
            &self.stdp.eta_minus,
        ] {
            d.validate()?;
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.bins_per_sample == 0 {
            return Err(Error::Config("bins_per_sample must be >= 1".into()));
        }
        if self.topology.n_exc == 0 {
            return Err(Error::Config("the readout needs at least one excitatory neuron".into()));
        }
        Ok(())
    }

    /// Samples neuron and synapse parameters and wires the network.
    pub fn build(&self, seed: u64) -> Result<Network> {
        self.validate()?;
        let t = &self.topology;
        let neurons = sample_neuron_population(&self.population, t.n_exc, t.n_inh, seed)?;
        let topology = Topology::generate(t, seed)?;
        let stdp = sample_stdp_population(&self.stdp, (t.w_min, t.w_max), topology.n_synapses().max(1), seed)?;
        Network::assemble(neurons, &stdp, topology, seed)
    }

    /// Same means, no spread: every neuron and synapse distribution replaced
    /// by a point mass (the homogeneous counterpart).
    pub fn homogeneous(&self) -> Self {
        self.homogeneous_in(Heterogeneity::All)
    }

    pub fn homogeneous_in(&self, part: Heterogeneity) -> Self {
        let mut out = self.clone();
        let point = |d: &DistributionSpec| DistributionSpec::degenerate(d.mean());
        if matches!(part, Heterogeneity::Neurons | Heterogeneity::All) {
            out.population.tau_m_exc = point(&self.population.tau_m_exc);
            out.population.tau_m_inh = point(&self.population.tau_m_inh);
        }
        if matches!(part, Heterogeneity::Synapses | Heterogeneity::All) {
            out.stdp = self.stdp.degenerate_at_means();
        }
        out
    }

    /// Expands a sample sequence to bins by holding each value.
    fn hold(&self, samples: &[f64]) -> Vec<f64> {
        samples
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x, self.bins_per_sample))
            .collect()
    }

    /// Rows of a per-bin state matrix at the last bin of every sample.
    fn sample_rows(&self, per_bin: &DMatrix<f64>, n_samples: usize) -> DMatrix<f64> {
        let k = self.bins_per_sample;
        DMatrix::from_fn(n_samples, per_bin.ncols(), |r, c| per_bin[((r + 1) * k - 1, c)])
    }
}

/// Which parameter group a homogeneous counterpart flattens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heterogeneity {
    Neurons,
    Synapses,
    All,
}

/// Runs the network on `input` with STDP on and returns it with the learned
/// weights installed.
pub fn learn(net: &Network, input: &SpikeRaster, dt: f64) -> Result<Network> {
    let mut out = net.clone();
    if input.n_bins() == 0 {
        return Ok(out);
    }
    let trace = simulate(net, input, input.duration(), dt, Learning::On)?;
    out.set_weights(&trace.final_weights)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTaskConfig {
    /// Evaluation samples drawn from U[-1, 1].
    pub n_samples: usize,
    pub capacity: CapacityConfig,
}

impl Default for McTaskConfig {
    fn default() -> Self {
        Self {
            n_samples: 4000,
            capacity: CapacityConfig::default(),
        }
    }
}

/// Outcome of a memory-capacity run.
#[derive(Debug, Clone)]
pub struct McEvaluation {
    pub capacity: CapacityReport,
    pub spike_count: u64,
    /// Spikes per neuron over the evaluation window.
    pub mean_spike_count: f64,
    /// `C / S̃`, absent for a silent network.
    pub efficiency: Option<f64>,
    /// The network after the learning phase.
    pub network: Network,
    pub trace: SimulationTrace,
    pub input: Vec<f64>,
}

/// Rate-encodes samples in `[-1, 1]` after mapping them to `[0, 1]`.
fn encode_uniform(cfg: &ReservoirConfig, samples: &[f64], seed: u64) -> Result<SpikeRaster> {
    let unit: Vec<f64> = samples.iter().map(|x| ((x + 1.0) / 2.0).clamp(0.0, 1.0)).collect();
    rate_encode(
        &cfg.hold(&unit),
        cfg.codec.rate_max,
        cfg.topology.n_inputs,
        cfg.dt,
        seed,
    )
}

/// Memory capacity, spike count and efficiency of one reservoir.
pub fn evaluate_memory_capacity(
    cfg: &ReservoirConfig,
    task: &McTaskConfig,
    seed: u64,
) -> Result<McEvaluation> {
    let net = cfg.build(seed)?;
    let learn_seed = seed ^ LEARNING_SEED_MIX;
    let net = if cfg.learning_samples > 0 {
        let u = iid_uniform(cfg.learning_samples, learn_seed);
        learn(&net, &encode_uniform(cfg, &u, learn_seed)?, cfg.dt)?
    } else {
        net
    };

    let input = iid_uniform(task.n_samples, seed);
    let raster = encode_uniform(cfg, &input, seed)?;
    let mut trace = simulate(&net, &raster, raster.duration(), cfg.dt, Learning::Off)?;
    let exc = net.excitatory_indices();
    let per_bin = rate_decode_subset(&trace.raster, &exc, &cfg.codec);
    let states = cfg.sample_rows(&per_bin, task.n_samples);
    let capacity = memory_capacity(&states, &input, &task.capacity)?;
    trace.decoded_states = Some(per_bin);

    let (spike_count, mean_spike_count) = trace.total_spike_count();
    let efficiency = (mean_spike_count > 0.0).then(|| capacity.total / mean_spike_count);
    Ok(McEvaluation {
        capacity,
        spike_count,
        mean_spike_count,
        efficiency,
        network: net,
        trace,
        input,
    })
}

/// Quantity minimized by the distribution search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoObjective {
    /// `1 / C`
    Capacity,
    /// `S̃`
    Spikes,
    /// `1 / E`
    Efficiency,
}

impl BoObjective {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "capacity" => Ok(Self::Capacity),
            "spikes" => Ok(Self::Spikes),
            "efficiency" => Ok(Self::Efficiency),
            other => Err(Error::Config(format!(
                "unknown objective '{other}' (expected capacity, spikes or efficiency)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Capacity => "capacity",
            Self::Spikes => "spikes",
            Self::Efficiency => "efficiency",
        }
    }

    /// Value to minimize; NaN marks an evaluation the optimizer should
    /// treat as failed.
    pub fn value(self, eval: &McEvaluation) -> f64 {
        let v = match self {
            Self::Capacity => 1.0 / eval.capacity.total,
            Self::Spikes => eval.mean_spike_count,
            Self::Efficiency => match eval.efficiency {
                Some(e) => 1.0 / e,
                None => f64::NAN,
            },
        };
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    }
}

/// Names of the scalar knobs a search space may append to its marginals.
pub const EXTRA_NAMES: [&str; 10] = [
    "p_ee",
    "p_ei",
    "p_ie",
    "p_ii",
    "scale_ee",
    "scale_ei",
    "scale_ie",
    "scale_ii",
    "input_fraction",
    "bias_current",
];

/// Installs the distributions and scalars of a search point.
pub fn apply_point(base: &ReservoirConfig, space: &SearchSpace, point: &SearchPoint) -> Result<ReservoirConfig> {
    let mut cfg = base.clone();
    for (range, d) in space.marginals.iter().zip(&point.marginals) {
        let d = *d;
        match range.name.as_str() {
            "tau_plus" => cfg.stdp.tau_plus = d,
            "tau_minus" => cfg.stdp.tau_minus = d,
            "eta_plus" => cfg.stdp.eta_plus = d,
            "eta_minus" => cfg.stdp.eta_minus = d,
            "tau_m_exc" => {
                let lo = base.population.tau_m_exc.lower;
                cfg.population.tau_m_exc = d.with_bounds(lo, f64::INFINITY)
            }
            "tau_m_inh" => {
                let lo = base.population.tau_m_inh.lower;
                cfg.population.tau_m_inh = d.with_bounds(lo, f64::INFINITY)
            }
            other => return Err(Error::Config(format!("unknown search marginal '{other}'"))),
        }
    }
    for (range, &v) in space.extras.iter().zip(&point.extras) {
        let t = &mut cfg.topology;
        let slot = match range.name.as_str() {
            "p_ee" => &mut t.p_ee,
            "p_ei" => &mut t.p_ei,
            "p_ie" => &mut t.p_ie,
            "p_ii" => &mut t.p_ii,
            "scale_ee" => &mut t.scale_ee,
            "scale_ei" => &mut t.scale_ei,
            "scale_ie" => &mut t.scale_ie,
            "scale_ii" => &mut t.scale_ii,
            "input_fraction" => &mut t.input_fraction,
            "bias_current" => &mut t.bias_current,
            other => return Err(Error::Config(format!("unknown search scalar '{other}'"))),
        };
        *slot = v;
    }
    Ok(cfg)
}

/// Objective closure for the optimizer. Every candidate is evaluated on the
/// same seed, so candidates differ only in their distributions.
pub fn bo_objective<'a>(
    base: &'a ReservoirConfig,
    task: &'a McTaskConfig,
    space: &'a SearchSpace,
    objective: BoObjective,
    seed: u64,
) -> impl Fn(&SearchPoint) -> f64 + Sync + 'a {
    move |point| {
        apply_point(base, space, point)
            .and_then(|cfg| evaluate_memory_capacity(&cfg, task, seed))
            .map(|e| objective.value(&e))
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTaskConfig {
    pub data: SpikeClassConfig,
    /// Decoded states are read at the end of this many equal segments of
    /// each sample and concatenated.
    pub segments: usize,
    /// Passes over the training samples with STDP on.
    pub learning_passes: usize,
    /// Input weight range for this task. Template spikes are sparse, so a
    /// single input spike has to move the membrane noticeably.
    pub input_weights: (f64, f64),
    pub adam: AdamConfig,
}

impl Default for ClassifyTaskConfig {
    fn default() -> Self {
        Self {
            data: SpikeClassConfig::default(),
            segments: 4,
            learning_passes: 1,
            input_weights: (5.0, 15.0),
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Test accuracy of a readout trained on shuffled training labels.
    pub permuted_accuracy: f64,
    pub test_labels: Vec<usize>,
    pub test_predictions: Vec<usize>,
    pub loss: Vec<f64>,
    pub model: ReadoutModel,
    pub network: Network,
    pub mean_spike_count: f64,
}

/// Per-sample features: decoded excitatory states at segment ends.
fn sample_features(cfg: &ReservoirConfig, net: &Network, raster: &SpikeRaster, segments: usize) -> Result<(Vec<f64>, f64)> {
    let trace = simulate(net, raster, raster.duration(), cfg.dt, Learning::Off)?;
    let exc = net.excitatory_indices();
    let states = rate_decode_subset(&trace.raster, &exc, &cfg.codec);
    Ok((segment_ends(&states, segments), trace.total_spike_count().1))
}

/// Rows at the end of each of `segments` equal segments, concatenated.
fn segment_ends(states: &DMatrix<f64>, segments: usize) -> Vec<f64> {
    let bins = states.nrows();
    let mut out = Vec::with_capacity(segments * states.ncols());
    for s in 1..=segments {
        let row = (s * bins / segments).max(1) - 1;
        out.extend(states.row(row).iter().copied());
    }
    out
}

fn standardize(train: &mut DMatrix<f64>, test: &mut DMatrix<f64>) {
    for c in 0..train.ncols() {
        let col = train.column(c);
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 1e-12 { var.sqrt() } else { 1.0 };
        for m in [&mut *train, &mut *test] {
            for x in m.column_mut(c).iter_mut() {
                *x = (*x - mean) / sd;
            }
        }
    }
}

fn one_hot(labels: &[usize], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), k, |r, c| if labels[r] == c { 1.0 } else { 0.0 })
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Test accuracy of the same readout fed the decoded input spikes directly,
/// without a reservoir. Reference point for the reservoir accuracy.
pub fn input_only_accuracy(task: &ClassifyTaskConfig, seed: u64) -> Result<f64> {
    let data = synthetic_spike_classes(&task.data, seed)?;
    let codec = CodecConfig::default();
    let features = |set: &[crate::datagen::LabeledRaster]| -> (DMatrix<f64>, Vec<usize>) {
        let rows: Vec<Vec<f64>> = set
            .iter()
            .map(|s| {
                let all: Vec<usize> = (0..s.raster.n_neurons()).collect();
                segment_ends(&rate_decode_subset(&s.raster, &all, &codec), task.segments)
            })
            .collect();
        let width = rows.first().map_or(0, Vec::len);
        (
            DMatrix::from_fn(rows.len(), width, |r, c| rows[r][c]),
            set.iter().map(|s| s.label).collect(),
        )
    };
    let (mut x_train, y_train) = features(&data.train);
    let (mut x_test, y_test) = features(&data.test);
    standardize(&mut x_train, &mut x_test);
    let (model, _) = train_readout(&x_train, &one_hot(&y_train, task.data.n_classes), &task.adam, seed)?;
    Ok(accuracy(&classify(&model, &x_test)?, &y_test))
}

/// Synthetic spike-pattern classification through the reservoir.
pub fn run_classification(cfg: &ReservoirConfig, task: &ClassifyTaskConfig, seed: u64) -> Result<ClassifyOutcome> {
    if task.segments == 0 {
        return Err(Error::Config("segments must be >= 1".into()));
    }
    let mut cfg = cfg.clone();
    cfg.topology.n_inputs = task.data.n_channels;
    (cfg.topology.input_w_min, cfg.topology.input_w_max) = task.input_weights;
    cfg.dt = task.data.dt;
    let data = synthetic_spike_classes(&task.data, seed)?;
    let mut net = cfg.build(seed)?;
    for _ in 0..task.learning_passes {
        for s in &data.train {
            net = learn(&net, &s.raster, cfg.dt)?;
        }
    }

    let features = |set: &[crate::datagen::LabeledRaster]| -> Result<(DMatrix<f64>, Vec<usize>, f64)> {
        let mut rows = Vec::with_capacity(set.len());
        let mut spikes = 0.0;
        for s in set {
            let (f, sc) = sample_features(&cfg, &net, &s.raster, task.segments)?;
            rows.push(f);
            spikes += sc;
        }
        let width = rows.first().map_or(0, Vec::len);
        let m = DMatrix::from_fn(rows.len(), width, |r, c| rows[r][c]);
        Ok((m, set.iter().map(|s| s.label).collect(), spikes / set.len().max(1) as f64))
    };
    let (mut x_train, y_train, spikes_train) = features(&data.train)?;
    let (mut x_test, y_test, spikes_test) = features(&data.test)?;
    standardize(&mut x_train, &mut x_test);

    let k = task.data.n_classes;
    let (model, loss) = train_readout(&x_train, &one_hot(&y_train, k), &task.adam, seed)?;
    let train_pred = classify(&model, &x_train)?;
    let test_pred = classify(&model, &x_test)?;

    let mut shuffled = y_train.clone();
    shuffled.shuffle(&mut stream_rng(seed, Stream::Split));
    let (control, _) = train_readout(&x_train, &one_hot(&shuffled, k), &task.adam, seed)?;
    let control_pred = classify(&control, &x_test)?;

    let n_total = (data.train.len() + data.test.len()).max(1) as f64;
    let mean_spike_count =
        (spikes_train * data.train.len() as f64 + spikes_test * data.test.len() as f64) / n_total;
    Ok(ClassifyOutcome {
        train_accuracy: accuracy(&train_pred, &y_train),
        test_accuracy: accuracy(&test_pred, &y_test),
        permuted_accuracy: accuracy(&control_pred, &y_test),
        test_labels: y_test,
        test_predictions: test_pred,
        loss,
        model,
        network: net,
        mean_spike_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictTaskConfig {
    /// Samples ahead to predict.
    pub horizon: usize,
    pub train_fraction: f64,
    /// Leading samples excluded from training and scoring.
    pub washout: usize,
    /// Input weight range for the Step-Forward channels.
    pub input_weights: (f64, f64),
    pub adam: AdamConfig,
}

impl Default for PredictTaskConfig {
    fn default() -> Self {
        Self {
            horizon: 1,
            train_fraction: 0.7,
            washout: 50,
            input_weights: (5.0, 15.0),
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PredictOutcome {
    /// NRMSE per output dimension on the test split.
    pub nrmse: Vec<f64>,
    pub mean_nrmse: f64,
    /// Standardized targets and predictions on the test split (time × dims).
    pub targets: DMatrix<f64>,
    pub predictions: DMatrix<f64>,
    pub loss: Vec<f64>,
    pub mean_spike_count: f64,
    pub model: ReadoutModel,
    pub network: Network,
}

/// Root-mean-square error over the standard deviation of the target, per column.
pub fn nrmse(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Vec<f64> {
    (0..target.ncols())
        .map(|c| {
            let t = target.column(c);
            let n = t.len() as f64;
            let mean = t.sum() / n;
            let var = t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let mse = (pred.column(c) - t).norm_squared() / n;
            (mse / var).sqrt()
        })
        .collect()
}

/// Predicts `signal(t + horizon)` from the reservoir state at `t`. The signal
/// (time × dims) is standardized per dimension and Step-Forward encoded into
/// two channels per dimension.
pub fn run_prediction(
    cfg: &ReservoirConfig,
    task: &PredictTaskConfig,
    signal: &DMatrix<f64>,
    seed: u64,
) -> Result<PredictOutcome> {
    let (n, d) = signal.shape();
    if task.horizon == 0 || !(task.train_fraction > 0.0 && task.train_fraction < 1.0) {
        return Err(Error::Config("horizon >= 1 and train_fraction in (0, 1) required".into()));
    }
    let usable = n.saturating_sub(task.washout + task.horizon);
    let n_train = (usable as f64 * task.train_fraction).round() as usize;
    if n_train < 2 || usable - n_train < 2 {
        return Err(Error::Data(format!("{n} samples are too few for prediction")));
    }
    let mut z = signal.clone();
    for c in 0..d {
        let col = z.column(c);
        let mean = col.sum() / n as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for x in z.column_mut(c).iter_mut() {
            *x = (*x - mean) / sd;
        }
    }

    let mut cfg = cfg.clone();
    cfg.topology.n_inputs = 2 * d;
    (cfg.topology.input_w_min, cfg.topology.input_w_max) = task.input_weights;
    let held = DMatrix::from_fn(n * cfg.bins_per_sample, d, |r, c| z[(r / cfg.bins_per_sample, c)]);
    let raster = sf_encode_multi(&held, cfg.codec.sf_threshold, cfg.dt)?;
    let net = cfg.build(seed)?;
    let learn_bins = (n_train + task.washout) * cfg.bins_per_sample;
    let net = if cfg.learning_samples > 0 {
        let head = raster.truncate(learn_bins);
        learn(&net, &head, cfg.dt)?
    } else {
        net
    };
    let trace = simulate(&net, &raster, raster.duration(), cfg.dt, Learning::Off)?;
    let exc = net.excitatory_indices();
    let per_bin = rate_decode_subset(&trace.raster, &exc, &cfg.codec);
    let states = cfg.sample_rows(&per_bin, n);

    let rows = |from: usize, to: usize| -> (DMatrix<f64>, DMatrix<f64>) {
        let x = states.rows(from, to - from).into_owned();
        let y = z.rows(from + task.horizon, to - from).into_owned();
        (x, y)
    };
    let split = task.washout + n_train;
    let (mut x_train, y_train) = rows(task.washout, split);
    let (mut x_test, y_test) = rows(split, task.washout + usable);
    standardize(&mut x_train, &mut x_test);
    let (model, loss) = train_readout(&x_train, &y_train, &task.adam, seed)?;
    let pred = predict(&model, &x_test)?;
    let per_dim = nrmse(&pred, &y_test);
    let mean_nrmse = DVector::from_vec(per_dim.clone()).mean();
    Ok(PredictOutcome {
        nrmse: per_dim,
        mean_nrmse,
        targets: y_test,
        predictions: pred,
        loss,
        mean_spike_count: trace.total_spike_count().1,
        model,
        network: net,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesopt::MarginalRange;
    use crate::distribution::Family;

    fn small(n: usize) -> ReservoirConfig {
        let mut cfg = ReservoirConfig::with_size(n);
        cfg.learning_samples = 50;
        cfg
    }

    fn short_task() -> McTaskConfig {
        McTaskConfig {
            n_samples: 600,
            capacity: CapacityConfig {
                tau_max: 20,
                ..CapacityConfig::default()
            },
        }
    }

    #[test]
    fn memory_capacity_run_is_deterministic() {
        let cfg = small(50);
        let a = evaluate_memory_capacity(&cfg, &short_task(), 3).unwrap();
        let b = evaluate_memory_capacity(&cfg, &short_task(), 3).unwrap();
        assert_eq!(a.trace.raster, b.trace.raster);
        assert_eq!(a.capacity.per_delay, b.capacity.per_delay);
        assert!(a.spike_count > 0);
        assert!(a.capacity.total > 0.0);
        for c in &a.capacity.per_delay {
            assert!((0.0..=1.0).contains(c));
        }
    }

    #[test]
    fn homogeneous_counterpart_keeps_means() {
        let cfg = ReservoirConfig::default();
        let h = cfg.homogeneous();
        assert!(h.stdp.is_homogeneous());
        assert!(h.population.tau_m_exc.is_degenerate());
        assert!((h.population.tau_m_exc.mean() - cfg.population.tau_m_exc.mean()).abs() < 1e-12);
        assert!((h.stdp.tau_plus.mean() - 18.235).abs() < 1e-12);
        let only_neurons = cfg.homogeneous_in(Heterogeneity::Neurons);
        assert!(!only_neurons.stdp.is_homogeneous());
    }

    #[test]
    fn silent_reservoir_has_no_efficiency() {
        let mut cfg = small(20);
        cfg.topology.input_fraction = 0.0;
        let e = evaluate_memory_capacity(&cfg, &short_task(), 1).unwrap();
        assert_eq!(e.spike_count, 0);
        assert!(e.efficiency.is_none());
        assert!(BoObjective::Efficiency.value(&e).is_nan());
        assert_eq!(e.capacity.total, 0.0);
    }

    #[test]
    fn search_point_lands_in_the_config() {
        let mut space = SearchSpace::default();
        space.extras.push(crate::bayesopt::ScalarRange {
            name: "scale_ie".into(),
            lower: 0.5,
            upper: 4.0,
        });
        let point = SearchPoint {
            marginals: vec![
                DistributionSpec::normal(10.0, 1.0),
                DistributionSpec::normal(12.0, 1.0),
                DistributionSpec::normal(0.3, 0.01),
                DistributionSpec::normal(0.2, 0.01),
                DistributionSpec::gamma(3.0, 0.5),
                DistributionSpec::gamma(4.0, 0.25),
            ],
            extras: vec![3.0],
        };
        let cfg = apply_point(&ReservoirConfig::default(), &space, &point).unwrap();
        assert_eq!(cfg.stdp.tau_minus, DistributionSpec::normal(12.0, 1.0));
        assert_eq!(cfg.population.tau_m_inh.family, Family::Gamma);
        assert_eq!(cfg.population.tau_m_inh.lower, 0.05);
        assert_eq!(cfg.topology.scale_ie, 3.0);

        let bad = SearchSpace {
            marginals: vec![MarginalRange::new("tau_x", Family::Normal, (1.0, 2.0), (0.0, 1.0))],
            extras: vec![],
        };
        let p = SearchPoint {
            marginals: vec![DistributionSpec::normal(1.5, 0.5)],
            extras: vec![],
        };
        assert!(apply_point(&ReservoirConfig::default(), &bad, &p).is_err());
    }

    #[test]
    fn objectives_invert_the_right_quantity() {
        let cfg = small(40);
        let e = evaluate_memory_capacity(&cfg, &short_task(), 2).unwrap();
        let c = e.capacity.total;
        assert!((BoObjective::Capacity.value(&e) - 1.0 / c).abs() < 1e-12);
        assert_eq!(BoObjective::Spikes.value(&e), e.mean_spike_count);
        assert!((BoObjective::Efficiency.value(&e) - e.mean_spike_count / c).abs() < 1e-9);
        assert_eq!(BoObjective::parse("efficiency").unwrap(), BoObjective::Efficiency);
        assert!(BoObjective::parse("speed").is_err());
    }

    #[test]
    fn nrmse_of_perfect_and_mean_predictions() {
        let t = DMatrix::from_fn(50, 2, |r, c| ((r * (c + 2)) as f64).sin());
        assert!(nrmse(&t, &t).iter().all(|&e| e == 0.0));
        let mean = DMatrix::from_fn(50, 2, |_, c| t.column(c).mean());
        for e in nrmse(&mean, &t) {
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_runs_on_a_sine() {
        let sig = DMatrix::from_fn(400, 1, |r, _| (r as f64 * 0.1).sin());
        let mut cfg = small(60);
        cfg.bins_per_sample = 2;
        let task = PredictTaskConfig {
            adam: AdamConfig {
                epochs: 100,
                ..AdamConfig::default()
            },
            ..PredictTaskConfig::default()
        };
        let out = run_prediction(&cfg, &task, &sig, 4).unwrap();
        assert_eq!(out.nrmse.len(), 1);
        assert!(out.mean_nrmse.is_finite());
        assert!(out.mean_nrmse < 1.0, "nrmse {}", out.mean_nrmse);
    }
}
