//! Two-population nonlinear Hawkes process with multiplicative inhibition,
//! simulated by Ogata thinning.
//!
//! Population A (excitatory, `alpha N` neurons) and B (inhibitory) share
//! the mean-field intensities
//!
//! ```text
//! lambda_A = (mu_A + x1) * exp(-x2)
//! lambda_B = mu_B + x3 + min(x4, cap)
//! ```
//!
//! where `x_k(t) = (1/N) sum_j sum_{t_e < t} a_j b_j exp(-b_j (t - t_e))`
//! runs over the events of the source population of kernel `h_k` (A for
//! h1, h4; B for h2, h3) with per-neuron kernel parameters `(a_j, b_j)`.

use std::io::Write;

use rand::Rng as _;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::{indexed_rng, Stream};
use crate::stats::{mean, paired_t_test_greater, PairedTest};

/// Distributions of the amplitude `a` (the kernel's integral) and the decay
/// rate `b` of an exponential kernel `a b exp(-b t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub amplitude: DistributionSpec,
    pub rate: DistributionSpec,
}

impl KernelSpec {
    pub fn constant(amplitude: f64, rate: f64) -> Self {
        Self {
            amplitude: DistributionSpec::degenerate(amplitude),
            rate: DistributionSpec::degenerate(rate),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.amplitude.is_degenerate() && self.rate.is_degenerate()
    }

    fn validate(&self) -> Result<()> {
        self.amplitude.validate()?;
        self.rate.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesConfig {
    pub n_total: usize,
    /// Fraction of neurons in the excitatory population A.
    pub alpha: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    /// h1: A -> A, h2: B -> A (inhibitory), h3: B -> B, h4: A -> B.
    pub kernels: [KernelSpec; 4],
    /// Saturation of the A -> B feedback map `min(x, cap)`.
    pub feedback_cap: f64,
    /// Dominating rates above this abort the run as supercritical.
    pub max_intensity: f64,
}

impl Default for HawkesConfig {
    fn default() -> Self {
        Self {
            n_total: 100,
            alpha: 0.8,
            mu_a: 5.0,
            mu_b: 0.0,
            kernels: [
                KernelSpec::constant(0.5, 1.0),
                KernelSpec::constant(2.0, 1.0),
                KernelSpec::constant(0.5, 1.0),
                KernelSpec::constant(1.0, 1.0),
            ],
            feedback_cap: 10.0,
            max_intensity: 1e7,
        }
    }
}

impl HawkesConfig {
    pub fn n_a(&self) -> usize {
        (self.alpha * self.n_total as f64).round() as usize
    }

    pub fn n_b(&self) -> usize {
        self.n_total - self.n_a()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("n_total >= 1 and alpha in [0, 1] required".into()));
        }
        if !(self.mu_a >= 0.0 && self.mu_b >= 0.0) {
            return Err(Error::Config("baselines must be >= 0".into()));
        }
        if !(self.feedback_cap >= 0.0) || !(self.max_intensity > 0.0) {
            return Err(Error::Config("feedback_cap >= 0 and max_intensity > 0 required".into()));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        Ok(())
    }

    /// Mean-field self-excitation ratios `(alpha E[a1], (1 - alpha) E[a3])`
    /// of the two linear feedback loops.
    pub fn branching_ratios(&self) -> (f64, f64) {
        let n = self.n_total as f64;
        (
            self.n_a() as f64 / n * self.kernels[0].amplitude.mean(),
            self.n_b() as f64 / n * self.kernels[2].amplitude.mean(),
        )
    }
}

/// Sampled per-neuron kernel parameters: `params[k][j] = (a, b)` for kernel
/// `h_{k+1}` and neuron `j` of its source population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesKernels {
    pub params: [Vec<(f64, f64)>; 4],
}

impl HawkesKernels {
    pub fn sample(cfg: &HawkesConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = indexed_rng(seed, Stream::HawkesKernels, 0);
        let sizes = [cfg.n_a(), cfg.n_b(), cfg.n_b(), cfg.n_a()];
        let mut params: [Vec<(f64, f64)>; 4] = Default::default();
        for k in 0..4 {
            let spec = &cfg.kernels[k];
            let amp = spec.amplitude.with_bounds(spec.amplitude.lower.max(0.0), spec.amplitude.upper);
            let rate = spec.rate.with_bounds(spec.rate.lower.max(f64::MIN_POSITIVE), spec.rate.upper);
            params[k] = (0..sizes[k])
                .map(|_| Ok((amp.sample(&mut rng)?, rate.sample(&mut rng)?)))
                .collect::<Result<_>>()?;
        }
        Ok(Self { params })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    /// Index within the neuron's population.
    pub neuron: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub horizon: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub a: Vec<Event>,
    pub b: Vec<Event>,
}

impl EventRecord {
    pub fn empty(horizon: f64, n_a: usize, n_b: usize) -> Self {
        Self {
            horizon,
            n_a,
            n_b,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Per-neuron event rates of (A, B) over the horizon.
    pub fn rates(&self) -> (f64, f64) {
        let per = |n_ev: usize, n: usize| if n == 0 { 0.0 } else { n_ev as f64 / (n as f64 * self.horizon) };
        (per(self.a.len(), self.n_a), per(self.b.len(), self.n_b))
    }

    /// Event rate averaged over all neurons.
    pub fn population_rate(&self) -> f64 {
        (self.a.len() + self.b.len()) as f64 / ((self.n_a + self.n_b) as f64 * self.horizon)
    }

    /// `population,neuron,time` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["population", "neuron", "time"])?;
        let mut rows: Vec<(&str, &Event)> = self.a.iter().map(|e| ("A", e)).chain(self.b.iter().map(|e| ("B", e))).collect();
        rows.sort_by(|x, y| x.1.time.total_cmp(&y.1.time));
        for (pop, e) in rows {
            w.write_record([pop.to_string(), e.neuron.to_string(), e.time.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn intensities(cfg: &HawkesConfig, x: [f64; 4]) -> (f64, f64) {
    let la = (cfg.mu_a + x[0]) * (-x[1]).exp();
    let lb = cfg.mu_b + x[2] + x[3].min(cfg.feedback_cap);
    (la.max(0.0), lb.max(0.0))
}

/// Reference evaluation of `(lambda_A, lambda_B)` at `t` by direct summation
/// over every event strictly before `t`.
pub fn intensity_at(cfg: &HawkesConfig, kernels: &HawkesKernels, history: &EventRecord, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("query time {t} must be >= 0")));
    }
    let n = cfg.n_total as f64;
    let drive = |events: &[Event], k: usize| -> f64 {
        events
            .iter()
            .filter(|e| e.time < t)
            .map(|e| {
                let (a, b) = kernels.params[k][e.neuron];
                a * b * (-b * (t - e.time)).exp()
            })
            .sum::<f64>()
            / n
    };
    let x = [drive(&history.a, 0), drive(&history.b, 1), drive(&history.b, 2), drive(&history.a, 3)];
    Ok(intensities(cfg, x))
}

/// Per-neuron exponential traces for one kernel: trace `j` holds
/// `sum_e exp(-b_j (t_j - t_e))` as of its last update time `t_j`.
struct KernelTraces<'a> {
    params: &'a [(f64, f64)],
    value: Vec<f64>,
    stamp: Vec<f64>,
    active: Vec<usize>,
}

impl<'a> KernelTraces<'a> {
    fn new(params: &'a [(f64, f64)]) -> Self {
        Self {
            params,
            value: vec![0.0; params.len()],
            stamp: vec![0.0; params.len()],
            active: Vec::new(),
        }
    }

    fn add_event(&mut self, j: usize, t: f64) {
        let b = self.params[j].1;
        if self.value[j] == 0.0 {
            self.active.push(j);
        }
        self.value[j] = self.value[j] * (-b * (t - self.stamp[j])).exp() + 1.0;
        self.stamp[j] = t;
    }

    /// `sum_j a_j b_j trace_j(t)`; also drops traces that have decayed to
    /// nothing.
    fn drive(&mut self, t: f64) -> f64 {
        let mut sum = 0.0;
        let (params, value, stamp) = (self.params, &mut self.value, &self.stamp);
        self.active.retain(|&j| {
            let (a, b) = params[j];
            let v = value[j] * (-b * (t - stamp[j])).exp();
            if v < 1e-300 {
                value[j] = 0.0;
                return false;
            }
            sum += a * b * v;
            true
        });
        sum
    }
}

/// Ogata thinning. The dominating rate on each lookahead window of length
/// `1 / lambda_bar` is `lambda_bar = max(2 Lambda(t), Lambda_up(t))`, where
/// `Lambda_up` replaces the inhibitory factor by one; since every drive
/// term only decays between events, `Lambda_up(t)` bounds the total
/// intensity until the next accepted event.
pub fn simulate_hawkes(cfg: &HawkesConfig, kernels: &HawkesKernels, horizon: f64, seed: u64) -> Result<EventRecord> {
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    let (n_a, n_b) = (cfg.n_a(), cfg.n_b());
    for (k, size) in [n_a, n_b, n_b, n_a].into_iter().enumerate() {
        if kernels.params[k].len() != size {
            return Err(Error::InvalidArgument(format!("kernel h{} has {} entries, expected {}", k + 1, kernels.params[k].len(), size)));
        }
    }
    let n = cfg.n_total as f64;
    let mut rng = indexed_rng(seed, Stream::Hawkes, 0);
    let mut traces: Vec<KernelTraces> = kernels.params.iter().map(|p| KernelTraces::new(p)).collect();
    let mut record = EventRecord::empty(horizon, n_a, n_b);
    let (wa, wb) = (n_a as f64, n_b as f64);

    let state = |traces: &mut [KernelTraces], t: f64| -> [f64; 4] {
        [traces[0].drive(t) / n, traces[1].drive(t) / n, traces[2].drive(t) / n, traces[3].drive(t) / n]
    };
    let supercritical = |bound: f64| {
        let (ra, rb) = cfg.branching_ratios();
        Error::Supercritical {
            bound,
            branching_ratio: ra.max(rb),
        }
    };

    let mut t = 0.0;
    loop {
        let x = state(&mut traces, t);
        let (la, lb) = intensities(cfg, x);
        let total = wa * la + wb * lb;
        let upper = wa * (cfg.mu_a + x[0]) + wb * (cfg.mu_b + x[2] + x[3].min(cfg.feedback_cap));
        let bar = (2.0 * total).max(upper);
        if !(bar.is_finite()) || bar > cfg.max_intensity {
            return Err(supercritical(bar));
        }
        if bar <= 0.0 {
            break; // nothing can ever fire again
        }
        let window = 1.0 / bar;
        let wait: f64 = rng.sample::<f64, _>(Exp1) / bar;
        if wait > window {
            t += window;
            if t >= horizon {
                break;
            }
            continue;
        }
        t += wait;
        if t >= horizon {
            break;
        }
        let x = state(&mut traces, t);
        let (la, lb) = intensities(cfg, x);
        let u = rng.random::<f64>() * bar;
        if u < wa * la {
            let j = ((u / la) as usize).min(n_a - 1);
            record.a.push(Event { time: t, neuron: j });
            traces[0].add_event(j, t);
            traces[3].add_event(j, t);
        } else if u < wa * la + wb * lb {
            let j = (((u - wa * la) / lb) as usize).min(n_b - 1);
            record.b.push(Event { time: t, neuron: j });
            traces[1].add_event(j, t);
            traces[2].add_event(j, t);
        }
        if record.a.len() + record.b.len() > (cfg.max_intensity * horizon) as usize {
            return Err(supercritical(bar));
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityComparison {
    /// Population-mean rate of the homogeneous configuration per seed.
    pub rates_m: Vec<f64>,
    /// Same for the heterogeneous configuration.
    pub rates_r: Vec<f64>,
    pub phi_m: f64,
    pub phi_r: f64,
    /// One-sided paired test of `Phi_R < Phi_M`.
    pub test: PairedTest,
}

/// Runs both configurations on `n_seeds` paired seeds (same thinning
/// stream per seed) and tests whether the heterogeneous one fires less.
pub fn compare_sparsity(
    hom: &HawkesConfig,
    het: &HawkesConfig,
    horizon: f64,
    n_seeds: usize,
    seed: u64,
) -> Result<SparsityComparison> {
    if n_seeds < 2 {
        return Err(Error::InvalidArgument("need at least 2 seeds".into()));
    }
    let run = |cfg: &HawkesConfig, s: u64| -> Result<f64> {
        let kernels = HawkesKernels::sample(cfg, s)?;
        Ok(simulate_hawkes(cfg, &kernels, horizon, s)?.population_rate())
    };
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| seed.wrapping_add(i)).collect();
    let pairs: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|&s| Ok((run(hom, s)?, run(het, s)?)))
        .collect::<Result<_>>()?;
    let (rates_m, rates_r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let test = paired_t_test_greater(&rates_m, &rates_r)?;
    Ok(SparsityComparison {
        phi_m: mean(&rates_m),
        phi_r: mean(&rates_r),
        rates_m,
        rates_r,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_exponential;

    fn linear_single(mu: f64, a: f64, b: f64) -> HawkesConfig {
        HawkesConfig {
            n_total: 1,
            alpha: 1.0,
            mu_a: mu,
            mu_b: 0.0,
            kernels: [
                KernelSpec::constant(a, b),
                KernelSpec::constant(0.0, 1.0),
                KernelSpec::constant(0.0, 1.0),
                KernelSpec::constant(0.0, 1.0),
            ],
            ..HawkesConfig::default()
        }
    }

    fn silent_kernels(mut cfg: HawkesConfig) -> HawkesConfig {
        cfg.kernels = [KernelSpec::constant(0.0, 1.0); 4];
        cfg
    }

    #[test]
    fn empty_history_gives_baselines() {
        let cfg = HawkesConfig::default();
        let k = HawkesKernels::sample(&cfg, 1).unwrap();
        let h = EventRecord::empty(1.0, cfg.n_a(), cfg.n_b());
        assert_eq!(intensity_at(&cfg, &k, &h, 0.5).unwrap(), (cfg.mu_a, cfg.mu_b));
    }

    #[test]
    fn single_event_kernel_value() {
        let mut cfg = silent_kernels(HawkesConfig::default());
        cfg.kernels[0] = KernelSpec::constant(0.7, 2.0);
        let k = HawkesKernels::sample(&cfg, 1).unwrap();
        let mut h = EventRecord::empty(10.0, cfg.n_a(), cfg.n_b());
        h.a.push(Event { time: 1.0, neuron: 3 });
        let s = 0.4;
        let (la, _) = intensity_at(&cfg, &k, &h, 1.0 + s).unwrap();
        let expect = cfg.mu_a + 0.7 * 2.0 * (-2.0 * s).exp() / cfg.n_total as f64;
        assert!((la - expect).abs() < 1e-14);
    }

    #[test]
    fn inhibition_suppresses_a() {
        let cfg = HawkesConfig::default();
        let k = HawkesKernels::sample(&cfg, 1).unwrap();
        let mut h = EventRecord::empty(10.0, cfg.n_a(), cfg.n_b());
        for j in 0..cfg.n_b() {
            h.b.push(Event { time: 1.0, neuron: j });
        }
        let (la, lb) = intensity_at(&cfg, &k, &h, 1.1).unwrap();
        assert!(la < cfg.mu_a && la >= 0.0 && lb >= 0.0);
    }

    #[test]
    fn poisson_when_kernels_vanish() {
        let cfg = silent_kernels(HawkesConfig {
            n_total: 1,
            alpha: 1.0,
            mu_a: 2.0,
            ..HawkesConfig::default()
        });
        let k = HawkesKernels::sample(&cfg, 0).unwrap();
        let horizon = 1e4;
        let rec = simulate_hawkes(&cfg, &k, horizon, 4).unwrap();
        let count = rec.a.len() as f64;
        let expect = cfg.mu_a * horizon;
        assert!((count - expect).abs() < 3.0 * expect.sqrt(), "{count}");
    }

    #[test]
    fn constant_intensity_gaps_are_exponential() {
        let cfg = silent_kernels(HawkesConfig {
            n_total: 1,
            alpha: 1.0,
            mu_a: 1.0,
            ..HawkesConfig::default()
        });
        let k = HawkesKernels::sample(&cfg, 0).unwrap();
        let rec = simulate_hawkes(&cfg, &k, 1.05e4, 9).unwrap();
        assert!(rec.a.len() >= 10_000);
        let gaps: Vec<f64> = rec.a.windows(2).map(|w| w[1].time - w[0].time).take(10_000).collect();
        assert!(ks_exponential(&gaps).unwrap().p_value > 0.01);
    }

    #[test]
    fn stationary_rate_of_linear_self_excitation() {
        let cfg = linear_single(1.0, 0.5, 1.0);
        let k = HawkesKernels::sample(&cfg, 0).unwrap();
        let rec = simulate_hawkes(&cfg, &k, 1e4, 11).unwrap();
        let rate = rec.rates().0;
        assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn recursive_intensity_matches_direct_sum() {
        let mut cfg = HawkesConfig {
            n_total: 20,
            ..HawkesConfig::default()
        };
        cfg.kernels[0].rate = DistributionSpec::lognormal_with_mean(1.0, 0.5);
        cfg.kernels[1].amplitude = DistributionSpec::lognormal_with_mean(2.0, 0.5);
        let k = HawkesKernels::sample(&cfg, 3).unwrap();
        let rec = simulate_hawkes(&cfg, &k, 5.0, 3).unwrap();
        assert!(!rec.a.is_empty() && !rec.b.is_empty());
        // Re-simulating the accepted history through the trace machinery
        // must reproduce the direct-sum intensity everywhere.
        let mut traces: Vec<KernelTraces> = k.params.iter().map(|p| KernelTraces::new(p)).collect();
        let mut all: Vec<(f64, bool, usize)> = rec.a.iter().map(|e| (e.time, true, e.neuron)).chain(rec.b.iter().map(|e| (e.time, false, e.neuron))).collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let n = cfg.n_total as f64;
        for &(t, is_a, j) in &all {
            let q = t - 1e-9;
            let x = [traces[0].drive(q) / n, traces[1].drive(q) / n, traces[2].drive(q) / n, traces[3].drive(q) / n];
            let fast = intensities(&cfg, x);
            let slow = intensity_at(&cfg, &k, &rec, q).unwrap();
            assert!((fast.0 - slow.0).abs() < 1e-9 * slow.0.max(1.0));
            assert!((fast.1 - slow.1).abs() < 1e-9 * slow.1.max(1.0));
            if is_a {
                traces[0].add_event(j, t);
                traces[3].add_event(j, t);
            } else {
                traces[1].add_event(j, t);
                traces[2].add_event(j, t);
            }
        }
    }

    #[test]
    fn event_streams_strictly_increase() {
        let cfg = HawkesConfig::default();
        let k = HawkesKernels::sample(&cfg, 2).unwrap();
        let rec = simulate_hawkes(&cfg, &k, 20.0, 2).unwrap();
        for s in [&rec.a, &rec.b] {
            assert!(s.windows(2).all(|w| w[0].time < w[1].time));
            assert!(s.iter().all(|e| e.time <= rec.horizon));
        }
        assert_eq!(rec, simulate_hawkes(&cfg, &k, 20.0, 2).unwrap());
    }

    #[test]
    fn inhibition_lowers_a_rate() {
        let with = HawkesConfig::default();
        let mut without = with;
        without.kernels[1] = KernelSpec::constant(0.0, 1.0);
        let mut diffs = Vec::new();
        for s in 0..10 {
            let run = |cfg: &HawkesConfig| {
                let k = HawkesKernels::sample(cfg, s).unwrap();
                simulate_hawkes(cfg, &k, 50.0, s).unwrap().rates().0
            };
            diffs.push((run(&without), run(&with)));
        }
        let (a, b): (Vec<f64>, Vec<f64>) = diffs.into_iter().unzip();
        assert!(a.iter().zip(&b).all(|(x, y)| x > y));
        assert!(paired_t_test_greater(&a, &b).unwrap().p_value < 0.01);
    }

    #[test]
    fn supercritical_is_reported() {
        let cfg = HawkesConfig {
            max_intensity: 1e4,
            ..linear_single(1.0, 1.5, 1.0)
        };
        let k = HawkesKernels::sample(&cfg, 0).unwrap();
        match simulate_hawkes(&cfg, &k, 1e3, 0) {
            Err(Error::Supercritical { branching_ratio, .. }) => assert_eq!(branching_ratio, 1.5),
            other => panic!("expected supercritical error, got {other:?}"),
        }
    }

    #[test]
    fn zero_baselines_stay_silent() {
        let cfg = HawkesConfig {
            mu_a: 0.0,
            mu_b: 0.0,
            ..HawkesConfig::default()
        };
        let cmp = compare_sparsity(&cfg, &cfg, 10.0, 3, 0).unwrap();
        assert_eq!(cmp.phi_m, 0.0);
        assert_eq!(cmp.phi_r, 0.0);
    }

    #[test]
    fn identical_configs_match() {
        let cfg = HawkesConfig::default();
        let cmp = compare_sparsity(&cfg, &cfg, 10.0, 4, 0).unwrap();
        assert_eq!(cmp.rates_m, cmp.rates_r);
    }

    #[test]
    fn csv_rows_are_time_ordered() {
        let cfg = HawkesConfig::default();
        let k = HawkesKernels::sample(&cfg, 2).unwrap();
        let rec = simulate_hawkes(&cfg, &k, 2.0, 2).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + rec.a.len() + rec.b.len());
        assert!(text.starts_with("population,neuron,time\n"));
    }
}
