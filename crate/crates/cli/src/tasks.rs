//! Task runners. Each returns its outputs as in-memory artifacts; the caller
//! decides where (and whether) to write them.

use hrsnn_core::bayesopt::bo_loop;
use hrsnn_core::datagen::{iid_uniform, lorenz63, lorenz96_multiscale, synthetic_spike_classes};
use hrsnn_core::hawkes::{compare_sparsity, simulate_hawkes, HawkesConfig, HawkesKernels, KernelSpec};
use hrsnn_core::metrics::{memory_capacity, CapacityReport};
use hrsnn_core::pipeline::{
    apply_point, bo_objective, evaluate_memory_capacity, run_classification, run_prediction, McEvaluation,
};
use hrsnn_core::stats::{mean, paired_t_test_greater};
use hrsnn_core::{DistributionSpec, Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{DataKind, ExperimentConfig, McSource, System, Task};

/// A named output file held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Artifacts(pub Vec<Artifact>);

impl Artifacts {
    fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.0.push(Artifact {
            name: name.into(),
            bytes,
        });
    }

    fn write_with(&mut self, name: impl Into<String>, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.push(name, buf);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.push(name, text.into_bytes());
        Ok(())
    }

    fn extend(&mut self, other: Artifacts) {
        self.0.extend(other.0);
    }
}

/// CSV from a header and rows of already formatted fields.
fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Runs `cfg.task` over every seed in parallel and gathers the outputs in
/// seed order.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    match cfg.task {
        Task::McEval => mc_eval(cfg),
        Task::Predict => predict(cfg),
        Task::Classify => classify(cfg),
        Task::BoSearch => bo_search(cfg),
        Task::HawkesCompare => hawkes_compare(cfg),
        Task::GenData => gen_data(cfg),
    }
}

fn per_seed<T: Send>(cfg: &ExperimentConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<(u64, T)>> {
    cfg.seeds.par_iter().map(|&s| f(s).map(|t| (s, t))).collect()
}

/// States `r_i(t) = x(t - i)` for `i = 1..=k`, zero before the start.
pub fn delay_line_states(input: &[f64], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(input.len(), k, |t, i| if t > i { input[t - i - 1] } else { 0.0 })
}

struct McResult {
    variant: &'static str,
    capacity: CapacityReport,
    eval: Option<McEvaluation>,
}

fn mc_eval(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mc = &cfg.mc;
    let results = per_seed(cfg, |seed| -> Result<Vec<McResult>> {
        if mc.source == McSource::DelayLine {
            let input = iid_uniform(mc.task.n_samples, seed);
            let states = delay_line_states(&input, mc.delay_line_k);
            let capacity = memory_capacity(&states, &input, &mc.task.capacity)?;
            return Ok(vec![McResult {
                variant: "delay-line",
                capacity,
                eval: None,
            }]);
        }
        let mut out = Vec::new();
        let e = evaluate_memory_capacity(&cfg.reservoir, &mc.task, seed)?;
        out.push(McResult {
            variant: "configured",
            capacity: e.capacity.clone(),
            eval: Some(e),
        });
        if let Some(part) = mc.compare {
            let e = evaluate_memory_capacity(&cfg.reservoir.homogeneous_in(part), &mc.task, seed)?;
            out.push(McResult {
                variant: "homogeneous",
                capacity: e.capacity.clone(),
                eval: Some(e),
            });
        }
        Ok(out)
    })?;

    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    for (seed, variants) in &results {
        for r in variants {
            let (spikes, mean_spikes, eff, n) = match &r.eval {
                Some(e) => (
                    e.spike_count.to_string(),
                    e.mean_spike_count.to_string(),
                    opt(e.efficiency),
                    e.network.n_neurons().to_string(),
                ),
                None => (String::new(), String::new(), String::new(), mc.delay_line_k.to_string()),
            };
            rows.push(vec![
                seed.to_string(),
                r.variant.to_string(),
                n,
                r.capacity.total.to_string(),
                spikes,
                mean_spikes,
                eff,
            ]);
            let suffix = if r.variant == "homogeneous" { "_homogeneous" } else { "" };
            art.write_with(format!("capacity_seed{seed}{suffix}.csv"), |b| r.capacity.write_csv(b))?;
            if let Some(e) = &r.eval {
                art.write_with(format!("raster_seed{seed}{suffix}.csv"), |b| e.trace.raster.write_sparse(b))?;
                let mut snap = e.network.snapshot().to_json()?;
                snap.push('\n');
                art.push(format!("network_seed{seed}{suffix}.json"), snap.into_bytes());
            }
        }
    }
    art.push(
        "summary.csv",
        csv_bytes(
            &["seed", "variant", "n_neurons", "capacity", "spike_count", "mean_spike_count", "efficiency"],
            &rows,
        )?,
    );

    if mc.compare.is_some() && results.len() >= 2 {
        let pick = |i: usize, f: &dyn Fn(&McResult) -> f64| -> Vec<f64> { results.iter().map(|(_, v)| f(&v[i])).collect() };
        let cap = |r: &McResult| r.capacity.total;
        let spikes = |r: &McResult| r.eval.as_ref().map_or(f64::NAN, |e| e.mean_spike_count);
        let eff = |r: &McResult| r.eval.as_ref().and_then(|e| e.efficiency).unwrap_or(f64::NAN);
        let mut rows = Vec::new();
        // (metric, a, b): the alternative tested is mean(a - b) > 0.
        for (metric, a, b) in [
            ("capacity", pick(0, &cap), pick(1, &cap)),
            ("efficiency", pick(0, &eff), pick(1, &eff)),
            ("mean_spike_count", pick(1, &spikes), pick(0, &spikes)),
        ] {
            let (mean_a, mean_b) = if metric == "mean_spike_count" { (mean(&b), mean(&a)) } else { (mean(&a), mean(&b)) };
            let p = paired_t_test_greater(&a, &b).map(|t| t.p_value).unwrap_or(f64::NAN);
            rows.push(vec![metric.to_string(), mean_a.to_string(), mean_b.to_string(), p.to_string()]);
        }
        art.push(
            "comparison.csv",
            csv_bytes(&["metric", "mean_configured", "mean_homogeneous", "p_value"], &rows)?,
        );
    }
    Ok(art)
}

fn prediction_signal(cfg: &ExperimentConfig, seed: u64) -> Result<DMatrix<f64>> {
    Ok(match cfg.predict.system {
        System::Lorenz63 => lorenz63(&cfg.lorenz63)?.values,
        System::Lorenz96 => lorenz96_multiscale(&cfg.lorenz96, seed)?.tier(&cfg.predict.tier),
    })
}

fn predict(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let results = per_seed(cfg, |seed| {
        let signal = prediction_signal(cfg, seed)?;
        run_prediction(&cfg.reservoir, &cfg.predict.task, &signal, seed)
    })?;
    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    for (seed, o) in &results {
        for (d, v) in o.nrmse.iter().enumerate() {
            rows.push(vec![seed.to_string(), d.to_string(), v.to_string(), o.mean_spike_count.to_string()]);
        }
        let dims = o.targets.ncols();
        let mut header: Vec<String> = vec!["row".into()];
        header.extend((0..dims).map(|d| format!("target_{d}")));
        header.extend((0..dims).map(|d| format!("prediction_{d}")));
        let body: Vec<Vec<String>> = (0..o.targets.nrows())
            .map(|r| {
                let mut row = vec![r.to_string()];
                row.extend(o.targets.row(r).iter().map(|v| v.to_string()));
                row.extend(o.predictions.row(r).iter().map(|v| v.to_string()));
                row
            })
            .collect();
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        art.push(format!("predictions_seed{seed}.csv"), csv_bytes(&h, &body)?);
        art.push(format!("loss_seed{seed}.csv"), loss_csv(&o.loss)?);
        art.json(format!("readout_seed{seed}.json"), &o.model)?;
        art.json(format!("network_seed{seed}.json"), &o.network.snapshot())?;
    }
    art.push("summary.csv", csv_bytes(&["seed", "dimension", "nrmse", "mean_spike_count"], &rows)?);
    Ok(art)
}

fn loss_csv(loss: &[f64]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = loss.iter().enumerate().map(|(i, l)| vec![i.to_string(), l.to_string()]).collect();
    csv_bytes(&["epoch", "loss"], &rows)
}

fn classify(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let results = per_seed(cfg, |seed| run_classification(&cfg.reservoir, &cfg.classify, seed))?;
    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    for (seed, o) in &results {
        rows.push(vec![
            seed.to_string(),
            o.train_accuracy.to_string(),
            o.test_accuracy.to_string(),
            o.permuted_accuracy.to_string(),
            o.mean_spike_count.to_string(),
        ]);
        let body: Vec<Vec<String>> = o
            .test_labels
            .iter()
            .zip(&o.test_predictions)
            .enumerate()
            .map(|(i, (l, p))| vec![i.to_string(), l.to_string(), p.to_string()])
            .collect();
        art.push(format!("predictions_seed{seed}.csv"), csv_bytes(&["sample", "label", "prediction"], &body)?);
        art.push(format!("loss_seed{seed}.csv"), loss_csv(&o.loss)?);
        art.json(format!("readout_seed{seed}.json"), &o.model)?;
        art.json(format!("network_seed{seed}.json"), &o.network.snapshot())?;
    }
    art.push(
        "summary.csv",
        csv_bytes(
            &["seed", "train_accuracy", "test_accuracy", "permuted_accuracy", "mean_spike_count"],
            &rows,
        )?,
    );
    Ok(art)
}

fn bo_search(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let bo = &cfg.bo;
    let base = &cfg.reservoir;
    let task = &cfg.mc.task;
    let results = per_seed(cfg, |seed| {
        let mut bc = bo.config.clone();
        bc.seed = seed;
        let outcome = bo_loop(bo_objective(base, task, &bo.space, bo.objective, seed), &bo.space, &bc)?;
        let best_cfg = apply_point(base, &bo.space, &outcome.best)?;
        let eval = evaluate_memory_capacity(&best_cfg, task, seed)?;
        Ok((outcome, best_cfg, eval.capacity.total, eval.mean_spike_count, eval.efficiency))
    })?;
    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    for (seed, (outcome, best_cfg, c, s, e)) in &results {
        art.write_with(format!("history_seed{seed}.csv"), |b| outcome.write_history_csv(&bo.space, b))?;
        art.json(
            format!("best_seed{seed}.json"),
            &json!({
                "objective": bo.objective.name(),
                "best_value": outcome.best_value,
                "point": outcome.best,
                "coordinates": bo.space.coord_names().into_iter().zip(bo.space.coords(&outcome.best)).collect::<Vec<_>>(),
                "capacity": c,
                "mean_spike_count": s,
                "efficiency": e,
                "reservoir": best_cfg,
            }),
        )?;
        rows.push(vec![
            seed.to_string(),
            bo.objective.name().to_string(),
            outcome.history.len().to_string(),
            outcome.best_value.to_string(),
            c.to_string(),
            s.to_string(),
            opt(*e),
        ]);
    }
    art.push(
        "summary.csv",
        csv_bytes(
            &["seed", "objective", "evaluations", "best_value", "capacity", "mean_spike_count", "efficiency"],
            &rows,
        )?,
    );
    Ok(art)
}

/// Every kernel distribution collapsed to a point mass at its mean.
pub fn homogeneous_hawkes(het: &HawkesConfig) -> HawkesConfig {
    let mut hom = *het;
    for k in hom.kernels.iter_mut() {
        *k = KernelSpec {
            amplitude: DistributionSpec::degenerate(k.amplitude.mean()),
            rate: DistributionSpec::degenerate(k.rate.mean()),
        };
    }
    hom
}

fn hawkes_compare(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let h = &cfg.hawkes;
    let het = h.config;
    let hom = homogeneous_hawkes(&het);
    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    // Replicates inside `compare_sparsity` already fan out; seeds run in turn.
    for &seed in &cfg.seeds {
        let cmp = compare_sparsity(&hom, &het, h.horizon, h.n_seeds, seed)?;
        let body: Vec<Vec<String>> = cmp
            .rates_m
            .iter()
            .zip(&cmp.rates_r)
            .enumerate()
            .map(|(i, (m, r))| {
                vec![i.to_string(), seed.wrapping_add(i as u64).to_string(), m.to_string(), r.to_string()]
            })
            .collect();
        art.push(format!("rates_seed{seed}.csv"), csv_bytes(&["replicate", "seed", "rate_m", "rate_r"], &body)?);
        let kernels = HawkesKernels::sample(&het, seed)?;
        let events = simulate_hawkes(&het, &kernels, h.horizon, seed)?;
        art.write_with(format!("events_seed{seed}.csv"), |b| events.write_csv(b))?;
        art.json(format!("comparison_seed{seed}.json"), &cmp)?;
        rows.push(vec![
            seed.to_string(),
            cmp.phi_m.to_string(),
            cmp.phi_r.to_string(),
            cmp.test.t_statistic.to_string(),
            cmp.test.p_value.to_string(),
        ]);
    }
    art.push("summary.csv", csv_bytes(&["seed", "phi_m", "phi_r", "t_statistic", "p_value"], &rows)?);
    Ok(art)
}

fn gen_data(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let results = per_seed(cfg, |seed| -> Result<Artifacts> {
        let mut art = Artifacts::default();
        let name = format!("data_seed{seed}.csv");
        match cfg.data.kind {
            DataKind::Lorenz63 => art.write_with(name, |b| lorenz63(&cfg.lorenz63)?.write_csv(b))?,
            DataKind::Lorenz96 => art.write_with(name, |b| lorenz96_multiscale(&cfg.lorenz96, seed)?.write_csv(b))?,
            DataKind::Uniform => {
                let rows: Vec<Vec<String>> = iid_uniform(cfg.data.n_samples, seed)
                    .iter()
                    .enumerate()
                    .map(|(t, u)| vec![t.to_string(), u.to_string()])
                    .collect();
                art.push(name, csv_bytes(&["t", "u"], &rows)?);
            }
            DataKind::SpikeClasses => {
                let ds = synthetic_spike_classes(&cfg.classify.data, seed)?;
                let mut rows = Vec::new();
                for (split, set) in [("train", &ds.train), ("test", &ds.test)] {
                    for (i, s) in set.iter().enumerate() {
                        for (n, b) in s.raster.events() {
                            rows.push(vec![
                                split.to_string(),
                                i.to_string(),
                                s.label.to_string(),
                                n.to_string(),
                                b.to_string(),
                            ]);
                        }
                    }
                }
                art.push(name, csv_bytes(&["split", "sample", "label", "channel", "bin"], &rows)?);
            }
        }
        Ok(art)
    })?;
    let mut art = Artifacts::default();
    for (_, a) in results {
        art.extend(a);
    }
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_line_states_shift_the_input() {
        let s = delay_line_states(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(s.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(s.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(s.row(3).iter().copied().collect::<Vec<_>>(), vec![3.0, 2.0]);
    }

    #[test]
    fn homogeneous_hawkes_keeps_means() {
        let mut het = HawkesConfig::default();
        het.kernels[1].amplitude = DistributionSpec::lognormal_with_mean(2.0, 1.0);
        let hom = homogeneous_hawkes(&het);
        assert!(hom.kernels.iter().all(KernelSpec::is_homogeneous));
        assert!((hom.kernels[1].amplitude.a - 2.0).abs() < 1e-12);
    }
}
