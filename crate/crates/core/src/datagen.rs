//! Deterministic data generators: the three-tier Lorenz96 system, Lorenz63,
//! i.i.d. uniform input streams and synthetic spike-pattern classes.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::SpikeRaster;
use crate::rng::{stream_rng, Stream};

/// Uniform time grid of states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// time × dims
    pub values: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl Trajectory {
    /// Columns whose label starts with `prefix` (e.g. `"Y"`).
    pub fn tier(&self, prefix: &str) -> DMatrix<f64> {
        let cols: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.starts_with(prefix))
            .map(|(i, _)| i)
            .collect();
        self.values.select_columns(&cols)
    }

    /// `time,<labels...>` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (r, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.values.row(r).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One classic fourth-order Runge-Kutta step of `y' = f(y)`.
pub fn rk4_step<F>(f: &F, y: &mut [f64], dt: f64, scratch: &mut [Vec<f64>; 5])
where
    F: Fn(&[f64], &mut [f64]),
{
    let [k1, k2, k3, k4, tmp] = scratch;
    f(y, k1);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(tmp, k4);
    for i in 0..y.len() {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates `f` from `y0`, discarding `burn_in_steps` and then recording
/// every `every`-th state for `steps` steps (the initial recorded state
/// included).
fn integrate<F>(f: F, y0: Vec<f64>, dt: f64, burn_in_steps: usize, steps: usize, every: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0;
    let mut scratch = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for s in 0..burn_in_steps {
        rk4_step(&f, &mut y, dt, &mut scratch);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: s });
        }
    }
    let mut times = vec![0.0];
    let mut rows = vec![y.clone()];
    for s in 1..=steps {
        rk4_step(&f, &mut y, dt, &mut scratch);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: burn_in_steps + s });
        }
        if s % every == 0 {
            times.push(s as f64 * dt);
            rows.push(y.clone());
        }
    }
    Ok((times, rows))
}

fn to_trajectory(times: Vec<f64>, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Trajectory {
    let values = DMatrix::from_fn(rows.len(), labels.len(), |r, c| rows[r][c]);
    Trajectory { times, values, labels }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lorenz96Config {
    pub k: usize,
    pub j: usize,
    pub i: usize,
    pub f: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub g: f64,
    pub h: f64,
    pub dt: f64,
    /// Recorded span after burn-in, in model time units.
    pub duration: f64,
    pub burn_in: f64,
    /// Record every n-th integration step.
    pub output_every: usize,
    /// Explicit initial state (X, then Y, then Z); seeded random when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for Lorenz96Config {
    fn default() -> Self {
        Self {
            k: 8,
            j: 8,
            i: 8,
            f: 20.0,
            b: 10.0,
            c: 10.0,
            d: 10.0,
            e: 10.0,
            g: 10.0,
            h: 1.0,
            dt: 0.001,
            duration: 10.0,
            burn_in: 10.0,
            output_every: 10,
            x0: None,
        }
    }
}

impl Lorenz96Config {
    pub fn dims(&self) -> usize {
        self.k + self.k * self.j + self.k * self.j * self.i
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 4 || self.j < 4 || self.i < 4 {
            return Err(Error::Config("Lorenz96 tiers need at least 4 sites".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::Config(format!("Lorenz96 dt {} outside (0, 0.01]", self.dt)));
        }
        if !(self.duration >= 0.0 && self.burn_in >= 0.0) || self.output_every == 0 {
            return Err(Error::Config("duration, burn_in >= 0 and output_every >= 1 required".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != self.dims() {
                return Err(Error::Config(format!("x0 has {} entries, expected {}", x0.len(), self.dims())));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = (0..self.k).map(|k| format!("X{k}")).collect();
        for k in 0..self.k {
            for j in 0..self.j {
                l.push(format!("Y{j}_{k}"));
            }
        }
        for k in 0..self.k {
            for j in 0..self.j {
                for i in 0..self.i {
                    l.push(format!("Z{i}_{j}_{k}"));
                }
            }
        }
        l
    }

    /// Right-hand side of the three-tier system. Layout: `X_k` at `k`,
    /// `Y_{j,k}` at `K + k J + j`, `Z_{i,j,k}` at `K + K J + (k J + j) I + i`;
    /// every tier is cyclic within its own ring.
    pub fn derivative(&self, s: &[f64], out: &mut [f64]) {
        let (kk, jj, ii) = (self.k, self.j, self.i);
        let y0 = kk;
        let z0 = kk + kk * jj;
        let x = |k: usize| s[k % kk];
        let y = |j: usize, k: usize| s[y0 + k * jj + j % jj];
        let z = |i: usize, j: usize, k: usize| s[z0 + (k * jj + j) * ii + i % ii];
        let hcb = self.h * self.c / self.b;
        let hed = self.h * self.e / self.d;
        for k in 0..kk {
            let sum_y: f64 = (0..jj).map(|j| y(j, k)).sum();
            out[k] = x(k + kk - 1) * (x(k + 1) - x(k + kk - 2)) + self.f - hcb * sum_y;
            for j in 0..jj {
                let sum_z: f64 = (0..ii).map(|i| z(i, j, k)).sum();
                out[y0 + k * jj + j] = -self.c * self.b * y(j + 1, k) * (y(j + 2, k) - y(j + jj - 1, k))
                    - self.c * y(j, k)
                    + hcb * x(k)
                    - hed * sum_z;
                for i in 0..ii {
                    out[z0 + (k * jj + j) * ii + i] = self.e * self.d * z(i + ii - 1, j, k) * (z(i + 1, j, k) - z(i + ii - 2, j, k))
                        - self.g * self.e * z(i, j, k)
                        + hed * y(j, k);
                }
            }
        }
    }

    fn initial_state(&self, seed: u64) -> Vec<f64> {
        if let Some(x0) = &self.x0 {
            return x0.clone();
        }
        let mut rng = stream_rng(seed, Stream::Data);
        let mut s = Vec::with_capacity(self.dims());
        s.extend((0..self.k).map(|_| rng.random_range(-1.0..1.0)));
        s.extend((0..self.k * self.j).map(|_| 0.1 * rng.random_range(-1.0..1.0)));
        s.extend((0..self.k * self.j * self.i).map(|_| 0.01 * rng.random_range(-1.0..1.0)));
        s
    }
}

fn step_count(span: f64, dt: f64) -> usize {
    (span / dt).round() as usize
}

pub fn lorenz96_multiscale(cfg: &Lorenz96Config, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let (times, rows) = integrate(
        |s: &[f64], o: &mut [f64]| cfg.derivative(s, o),
        cfg.initial_state(seed),
        cfg.dt,
        step_count(cfg.burn_in, cfg.dt),
        step_count(cfg.duration, cfg.dt),
        cfg.output_every,
    )?;
    Ok(to_trajectory(times, rows, cfg.labels()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lorenz63Config {
    pub rho: f64,
    pub sigma: f64,
    pub beta: f64,
    pub x0: [f64; 3],
    pub dt: f64,
    pub duration: f64,
    pub burn_in: f64,
}

impl Default for Lorenz63Config {
    fn default() -> Self {
        Self {
            rho: 28.0,
            sigma: 10.0,
            beta: 8.0 / 3.0,
            x0: [1.0, 1.0, 1.0],
            dt: 0.03,
            duration: 50.0,
            burn_in: 0.0,
        }
    }
}

impl Lorenz63Config {
    pub fn derivative(&self, s: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * (s[1] - s[0]);
        out[1] = s[0] * (self.rho - s[2]) - s[1];
        out[2] = s[0] * s[1] - self.beta * s[2];
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration >= 0.0 && self.burn_in >= 0.0) {
            return Err(Error::Config("Lorenz63 needs dt > 0 and non-negative spans".into()));
        }
        Ok(())
    }
}

pub fn lorenz63(cfg: &Lorenz63Config) -> Result<Trajectory> {
    cfg.validate()?;
    let (times, rows) = integrate(
        |s: &[f64], o: &mut [f64]| cfg.derivative(s, o),
        cfg.x0.to_vec(),
        cfg.dt,
        step_count(cfg.burn_in, cfg.dt),
        step_count(cfg.duration, cfg.dt),
        1,
    )?;
    Ok(to_trajectory(times, rows, vec!["x".into(), "y".into(), "z".into()]))
}

/// `n` i.i.d. draws from U[-1, 1].
pub fn iid_uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Data);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeClassConfig {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub n_channels: usize,
    pub n_bins: usize,
    pub dt: f64,
    /// Poisson rate of the frozen templates, Hz.
    pub template_rate: f64,
    /// Standard deviation of the per-spike time jitter, ms.
    pub jitter: f64,
    pub deletion_prob: f64,
    pub train_fraction: f64,
}

impl Default for SpikeClassConfig {
    fn default() -> Self {
        Self {
            n_classes: 5,
            samples_per_class: 40,
            n_channels: 40,
            n_bins: 100,
            dt: 1.0,
            template_rate: 40.0,
            jitter: 2.0,
            deletion_prob: 0.1,
            train_fraction: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRaster {
    pub raster: SpikeRaster,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeDataset {
    pub templates: Vec<SpikeRaster>,
    pub train: Vec<LabeledRaster>,
    pub test: Vec<LabeledRaster>,
}

/// Classes are frozen Poisson templates; samples are copies with Gaussian
/// per-spike time jitter and random spike deletion. The split is
/// stratified by class.
pub fn synthetic_spike_classes(cfg: &SpikeClassConfig, seed: u64) -> Result<SpikeDataset> {
    if cfg.n_classes < 2 {
        return Err(Error::Config("need at least 2 classes".into()));
    }
    if !(0.0..=1.0).contains(&cfg.deletion_prob) || !(cfg.jitter >= 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::Config("deletion_prob in [0, 1], jitter >= 0 and dt > 0 required".into()));
    }
    if !(0.0 < cfg.train_fraction && cfg.train_fraction < 1.0) {
        return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
    }
    let mut rng = stream_rng(seed, Stream::Data);
    let p = (cfg.template_rate * cfg.dt * 1e-3).min(1.0);
    let templates: Vec<SpikeRaster> = (0..cfg.n_classes)
        .map(|_| {
            let mut r = SpikeRaster::new(cfg.n_channels, cfg.n_bins, cfg.dt);
            for c in 0..cfg.n_channels {
                for t in 0..cfg.n_bins {
                    if rng.random::<f64>() < p {
                        r.set(c, t, true);
                    }
                }
            }
            r
        })
        .collect();

    let jitter = Normal::new(0.0, cfg.jitter / cfg.dt).map_err(|e| Error::Config(e.to_string()))?;
    let mut split_rng = stream_rng(seed, Stream::Split);
    let n_train = (cfg.samples_per_class as f64 * cfg.train_fraction).round() as usize;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, tpl) in templates.iter().enumerate() {
        let mut samples: Vec<LabeledRaster> = (0..cfg.samples_per_class)
            .map(|_| {
                let mut r = SpikeRaster::new(cfg.n_channels, cfg.n_bins, cfg.dt);
                for (c, t) in tpl.events() {
                    if cfg.deletion_prob > 0.0 && rng.random::<f64>() < cfg.deletion_prob {
                        continue;
                    }
                    let shift = if cfg.jitter > 0.0 { jitter.sample(&mut rng).round() as i64 } else { 0 };
                    let bin = (t as i64 + shift).clamp(0, cfg.n_bins as i64 - 1) as usize;
                    r.set(c, bin, true);
                }
                LabeledRaster { raster: r, label }
            })
            .collect();
        samples.shuffle(&mut split_rng);
        test.extend(samples.split_off(n_train.min(samples.len())));
        train.extend(samples);
    }
    train.shuffle(&mut split_rng);
    test.shuffle(&mut split_rng);
    Ok(SpikeDataset { templates, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_rel_dev(a: &[f64], b: &[f64]) -> f64 {
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    fn l96_end(cfg: &Lorenz96Config, x0: &[f64], dt: f64, span: f64) -> Vec<f64> {
        let c = Lorenz96Config {
            dt,
            duration: span,
            burn_in: 0.0,
            output_every: 1,
            x0: Some(x0.to_vec()),
            ..cfg.clone()
        };
        let tr = lorenz96_multiscale(&c, 0).unwrap();
        tr.values.row(tr.values.nrows() - 1).iter().copied().collect()
    }

    fn on_attractor(cfg: &Lorenz96Config) -> Vec<f64> {
        let tr = lorenz96_multiscale(&Lorenz96Config { duration: 0.0, ..cfg.clone() }, 1).unwrap();
        tr.values.row(0).iter().copied().collect()
    }

    #[test]
    fn zero_forcing_zero_state_stays_zero() {
        let cfg = Lorenz96Config {
            f: 0.0,
            duration: 1.0,
            burn_in: 0.0,
            x0: Some(vec![0.0; Lorenz96Config::default().dims()]),
            ..Lorenz96Config::default()
        };
        let tr = lorenz96_multiscale(&cfg, 0).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lorenz96_step_halving() {
        // The fast tiers separate nearby trajectories by roughly e^65 per
        // time unit, so step halving is checked within the predictability
        // horizon rather than over a full time unit.
        let cfg = Lorenz96Config::default();
        let x0 = on_attractor(&cfg);
        let coarse = l96_end(&cfg, &x0, 0.001, 0.05);
        let fine = l96_end(&cfg, &x0, 0.0005, 0.05);
        assert!(max_rel_dev(&fine, &coarse) < 1e-4, "{}", max_rel_dev(&fine, &coarse));
    }

    #[test]
    fn lorenz96_is_chaotic() {
        let cfg = Lorenz96Config::default();
        let x0 = on_attractor(&cfg);
        let mut x1 = x0.clone();
        x1[0] += 1e-8;
        let a = l96_end(&cfg, &x0, 0.001, 2.0);
        let b = l96_end(&cfg, &x1, 0.001, 2.0);
        let sep: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(sep >= 10.0 * 1e-8, "separation {sep}");
    }

    #[test]
    fn lorenz96_validation() {
        let bad = Lorenz96Config { j: 3, ..Lorenz96Config::default() };
        assert!(matches!(lorenz96_multiscale(&bad, 0), Err(Error::Config(_))));
        let coarse = Lorenz96Config { dt: 0.05, ..Lorenz96Config::default() };
        assert!(matches!(lorenz96_multiscale(&coarse, 0), Err(Error::Config(_))));
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = Lorenz63Config {
            x0: [1e200, 1e200, 1e200],
            duration: 1.0,
            ..Lorenz63Config::default()
        };
        assert!(matches!(lorenz63(&cfg), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn lorenz63_fixed_point() {
        let cfg = Lorenz63Config::default();
        let r = (cfg.beta * (cfg.rho - 1.0)).sqrt();
        let mut d = [0.0; 3];
        cfg.derivative(&[r, r, cfg.rho - 1.0], &mut d);
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-9);
        assert!((r - 72f64.sqrt()).abs() < 1e-12);
    }

    fn l63_end(dt: f64) -> Vec<f64> {
        let cfg = Lorenz63Config {
            dt,
            duration: 1.0,
            ..Lorenz63Config::default()
        };
        let tr = lorenz63(&cfg).unwrap();
        tr.values.row(tr.values.nrows() - 1).iter().copied().collect()
    }

    #[test]
    fn lorenz63_step_halving_and_order() {
        let reference = l63_end(0.001 / 64.0);
        let e1 = max_rel_dev(&reference, &l63_end(0.002));
        let e2 = max_rel_dev(&reference, &l63_end(0.001));
        assert!(max_rel_dev(&l63_end(0.001), &l63_end(0.0005)) < 1e-5);
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 0.3 * 16.0, "error ratio {ratio}");
    }

    #[test]
    fn lorenz63_bounded_and_default_grid() {
        let tr = lorenz63(&Lorenz63Config::default()).unwrap();
        assert_eq!(tr.values.nrows(), 1 + (50.0f64 / 0.03).round() as usize);
        for r in tr.values.row_iter() {
            assert!(r.norm() < 100.0);
        }
        assert_eq!(tr.values.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn uniform_moments() {
        assert!(iid_uniform(0, 1).is_empty());
        let n = 100_000;
        let x = iid_uniform(n, 5);
        assert_eq!(x, iid_uniform(n, 5));
        let m = x.iter().sum::<f64>() / n as f64;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd_mean = (1.0f64 / 3.0 / n as f64).sqrt();
        // Var of (X^2) for U[-1,1] is 1/5 - 1/9
        let sd_var = ((1.0f64 / 5.0 - 1.0 / 9.0) / n as f64).sqrt();
        assert!(m.abs() < 3.0 * sd_mean);
        assert!((v - 1.0 / 3.0).abs() < 3.0 * sd_var);
        assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn noiseless_samples_equal_templates() {
        let cfg = SpikeClassConfig {
            jitter: 0.0,
            deletion_prob: 0.0,
            ..SpikeClassConfig::default()
        };
        let ds = synthetic_spike_classes(&cfg, 3).unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            assert_eq!(s.raster, ds.templates[s.label]);
        }
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let cfg = SpikeClassConfig::default();
        let ds = synthetic_spike_classes(&cfg, 4).unwrap();
        for c in 0..cfg.n_classes {
            assert_eq!(ds.train.iter().filter(|s| s.label == c).count(), 28);
            assert_eq!(ds.test.iter().filter(|s| s.label == c).count(), 12);
        }
        assert_eq!(ds, synthetic_spike_classes(&cfg, 4).unwrap());
        let one = SpikeClassConfig { n_classes: 1, ..cfg };
        assert!(synthetic_spike_classes(&one, 0).is_err());
    }

    #[test]
    fn trajectory_csv_and_tiers() {
        let cfg = Lorenz96Config {
            duration: 0.01,
            burn_in: 0.0,
            ..Lorenz96Config::default()
        };
        let tr = lorenz96_multiscale(&cfg, 2).unwrap();
        assert_eq!(tr.tier("Y").ncols(), 64);
        assert_eq!(tr.tier("Z").ncols(), 512);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,X0,X1"));
        assert_eq!(text.lines().count(), 1 + tr.times.len());
    }
}
