//! Memory capacity, spike efficiency and heterogeneity measures.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::SpikeRaster;
use crate::readout::RidgeSolver;

pub const ENTROPY_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityConfig {
    pub tau_max: usize,
    pub ridge_lambda: f64,
    /// Leading fraction of the usable rows used to fit the readouts; the
    /// remainder is the test window the correlations are measured on.
    pub train_fraction: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            tau_max: 100,
            ridge_lambda: 1e-6,
            train_fraction: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// `per_delay[k]` is C(k + 1).
    pub per_delay: Vec<f64>,
    pub total: f64,
    pub tau_max: usize,
}

impl CapacityReport {
    pub fn c_tau(&self, tau: usize) -> f64 {
        self.per_delay[tau - 1]
    }

    /// `tau,c_tau` rows followed by a `total,<C>` summary row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "c_tau"])?;
        for (i, c) in self.per_delay.iter().enumerate() {
            w.write_record([(i + 1).to_string(), c.to_string()])?;
        }
        w.write_record(["total".to_string(), self.total.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub capacity: f64,
    pub mean_spike_count: f64,
    pub efficiency: f64,
}

/// Squared correlation, clamped to [0, 1]; zero when either side is constant.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale = (saa * sbb).max(0.0);
    if saa <= 1e-12 * n * ma.abs().max(1.0).powi(2) || sbb <= 1e-12 * n * mb.abs().max(1.0).powi(2) {
        return 0.0;
    }
    (sab * sab / scale).clamp(0.0, 1.0)
}

/// For every delay `tau` a ridge readout maps `states(t)` to `input(t - tau)`.
/// All delays share the rows `t in [tau_max, T)`, split contiguously into a
/// train and a test window.
pub fn memory_capacity(
    states: &DMatrix<f64>,
    input: &[f64],
    cfg: &CapacityConfig,
) -> Result<CapacityReport> {
    let t_len = states.nrows();
    if input.len() != t_len {
        return Err(Error::InvalidArgument(format!(
            "{} state rows vs {} input samples",
            t_len,
            input.len()
        )));
    }
    if cfg.tau_max == 0 || !(0.0 < cfg.train_fraction && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidArgument("tau_max >= 1 and train_fraction in (0, 1) required".into()));
    }
    let usable = t_len.saturating_sub(cfg.tau_max);
    let n_train = (usable as f64 * cfg.train_fraction).round() as usize;
    let n_test = usable.saturating_sub(n_train);
    if n_train < 2 || n_test < 2 {
        return Err(Error::Data(format!(
            "{} samples leave too few rows after tau_max = {}",
            t_len, cfg.tau_max
        )));
    }
    if states.iter().chain(input).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite state or input".into()));
    }

    let rows = |from: usize, len: usize| states.rows(from, len).into_owned();
    let x_train = rows(cfg.tau_max, n_train);
    let x_test = rows(cfg.tau_max + n_train, n_test);
    let delayed = |start: usize, len: usize| {
        DMatrix::from_fn(len, cfg.tau_max, |r, k| input[start + r - (k + 1)])
    };
    let y_train = delayed(cfg.tau_max, n_train);
    let y_test = delayed(cfg.tau_max + n_train, n_test);

    let x_mean = x_train.row_mean();
    let y_mean = y_train.row_mean();
    let mut xc = x_train;
    for mut r in xc.row_iter_mut() {
        r -= &x_mean;
    }
    let mut yc = y_train;
    for mut r in yc.row_iter_mut() {
        r -= &y_mean;
    }
    let solver = RidgeSolver::new(&xc, cfg.ridge_lambda)?;
    let w = solver.solve(&(xc.transpose() * &yc));
    let mut pred = x_test * &w;
    let offset = y_mean - x_mean * &w;
    for mut r in pred.row_iter_mut() {
        r += &offset;
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("memory-capacity readout produced non-finite output".into()));
    }

    let per_delay: Vec<f64> = (0..cfg.tau_max)
        .map(|k| {
            let target: Vec<f64> = y_test.column(k).iter().copied().collect();
            let out: Vec<f64> = pred.column(k).iter().copied().collect();
            squared_correlation(&target, &out)
        })
        .collect();
    Ok(CapacityReport {
        total: per_delay.iter().sum(),
        per_delay,
        tau_max: cfg.tau_max,
    })
}

/// Average total spike count per neuron.
pub fn mean_spike_count(raster: &SpikeRaster) -> f64 {
    if raster.n_neurons() == 0 {
        return 0.0;
    }
    raster.spike_count() as f64 / raster.n_neurons() as f64
}

pub fn spike_efficiency(report: &CapacityReport, raster: &SpikeRaster) -> Result<EfficiencyReport> {
    efficiency_from_counts(report.total, mean_spike_count(raster))
}

pub fn efficiency_from_counts(capacity: f64, mean_spike_count: f64) -> Result<EfficiencyReport> {
    if !(mean_spike_count > 0.0) {
        return Err(Error::EfficiencyUndefined);
    }
    Ok(EfficiencyReport {
        capacity,
        mean_spike_count,
        efficiency: capacity / mean_spike_count,
    })
}

/// Unbiased sample covariance of the columns (time × features in,
/// features × features out), computed with a two-pass algorithm.
pub fn state_covariance(states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = states.nrows();
    if n < 2 {
        return Err(Error::Data("covariance needs at least 2 samples".into()));
    }
    let mean = states.row_mean();
    let mut centered = states.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok((&cov + cov.transpose()) * 0.5)
}

/// `log det(Cov + eps I)` of the sampled parameter matrix (samples × dims).
pub fn heterogeneity_entropy(param_matrix: &DMatrix<f64>) -> Result<f64> {
    let (n, d) = param_matrix.shape();
    if d == 0 || n < d + 1 {
        return Err(Error::Data(format!("{} samples for {} dims; need at least dims + 1", n, d)));
    }
    let mut cov = state_covariance(param_matrix)?;
    for i in 0..d {
        cov[(i, i)] += ENTROPY_JITTER;
    }
    match cov.clone().cholesky() {
        Some(ch) => Ok(2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()),
        None => {
            let eig = SymmetricEigen::new(cov);
            Ok(eig.eigenvalues.iter().map(|l| l.max(ENTROPY_JITTER).ln()).sum())
        }
    }
}

/// `sum(lambda^2) / (sum lambda)^2` over the covariance eigenvalues.
pub fn eigen_heterogeneity(state_cov: &DMatrix<f64>) -> Result<f64> {
    if !state_cov.is_square() || state_cov.nrows() == 0 {
        return Err(Error::InvalidArgument("covariance must be square and non-empty".into()));
    }
    let sym = (state_cov + state_cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let sum: f64 = lambdas.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Undefined("eigen heterogeneity of a zero covariance".into()));
    }
    Ok(lambdas.iter().map(|l| l * l).sum::<f64>() / (sum * sum))
}

/// Moving-average firing rate in Hz: entry (t, i) is the spike count of
/// neuron `i` over bins `(t - window, t]` divided by the window length
/// (truncated at the start of the raster).
pub fn avg_firing_rate(raster: &SpikeRaster, window: usize) -> Result<DMatrix<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }
    let (n, t_len) = (raster.n_neurons(), raster.n_bins());
    let mut rates = DMatrix::zeros(t_len, n);
    for i in 0..n {
        let mut count = 0u32;
        for t in 0..t_len {
            count += raster.get(i, t) as u32;
            if t >= window {
                count -= raster.get(i, t - window) as u32;
            }
            let span = (t + 1).min(window) as f64 * raster.dt() * 1e-3;
            rates[(t, i)] = count as f64 / span;
        }
    }
    Ok(rates)
}

/// Per-neuron mean rate in Hz over the full raster.
pub fn mean_firing_rates(raster: &SpikeRaster) -> Vec<f64> {
    let secs = raster.duration() * 1e-3;
    raster.neuron_counts().into_iter().map(|c| c as f64 / secs).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform_input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::seeded(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn delay_line(input: &[f64], k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(input.len(), k, |t, i| if t > i { input[t - i - 1] } else { 0.0 })
    }

    #[test]
    fn delay_line_capacity() {
        let x = uniform_input(4000, 1);
        let rep = memory_capacity(&delay_line(&x, 10), &x, &CapacityConfig::default()).unwrap();
        for tau in 1..=10 {
            assert!(rep.c_tau(tau) >= 0.99, "C({}) = {}", tau, rep.c_tau(tau));
        }
        for tau in 11..=100 {
            assert!(rep.c_tau(tau) <= 0.05);
        }
        assert!((9.5..=10.5).contains(&rep.total), "C = {}", rep.total);
        assert!((rep.total - rep.per_delay.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn independent_states_have_no_capacity() {
        let x = uniform_input(4000, 2);
        let mut rng = crate::rng::seeded(3);
        let states = DMatrix::from_fn(4000, 10, |_, _| rng.random_range(-1.0..1.0));
        let rep = memory_capacity(&states, &x, &CapacityConfig::default()).unwrap();
        assert!(rep.per_delay.iter().all(|&c| c <= 0.05));
    }

    #[test]
    fn present_input_does_not_predict_past() {
        let x = uniform_input(4000, 4);
        let states = DMatrix::from_column_slice(4000, 1, &x);
        let rep = memory_capacity(&states, &x, &CapacityConfig::default()).unwrap();
        assert!(rep.per_delay.iter().all(|&c| c < 0.02));
    }

    #[test]
    fn constant_states_give_zero_not_error() {
        let x = uniform_input(500, 5);
        let states = DMatrix::from_element(500, 3, 0.7);
        let cfg = CapacityConfig {
            tau_max: 20,
            ..CapacityConfig::default()
        };
        let rep = memory_capacity(&states, &x, &cfg).unwrap();
        assert!(rep.per_delay.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn too_short_is_a_data_error() {
        let x = uniform_input(103, 5);
        let states = delay_line(&x, 2);
        assert!(matches!(
            memory_capacity(&states, &x, &CapacityConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn capacity_csv_has_summary_row() {
        let rep = CapacityReport {
            per_delay: vec![0.5, 0.25],
            total: 0.75,
            tau_max: 2,
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "tau,c_tau\n1,0.5\n2,0.25\ntotal,0.75\n");
    }

    #[test]
    fn efficiency_arithmetic() {
        let e = efficiency_from_counts(10.0, 5.0).unwrap();
        assert_eq!(e.efficiency, 2.0);
        let doubled = efficiency_from_counts(10.0, 10.0).unwrap();
        assert_eq!(doubled.efficiency, e.efficiency / 2.0);
        assert!(matches!(efficiency_from_counts(1.0, 0.0), Err(Error::EfficiencyUndefined)));
    }

    #[test]
    fn efficiency_from_raster() {
        let mut r = SpikeRaster::new(2, 10, 1.0);
        r.set(0, 1, true);
        r.set(1, 3, true);
        r.set(1, 4, true);
        let rep = CapacityReport {
            per_delay: vec![3.0],
            total: 3.0,
            tau_max: 1,
        };
        assert_eq!(spike_efficiency(&rep, &r).unwrap().efficiency, 2.0);
        assert!(matches!(
            spike_efficiency(&rep, &SpikeRaster::new(2, 10, 1.0)),
            Err(Error::EfficiencyUndefined)
        ));
    }

    #[test]
    fn entropy_floor_for_identical_rows() {
        let m = DMatrix::from_fn(10, 3, |_, j| j as f64);
        let h = heterogeneity_entropy(&m).unwrap();
        assert!((h - 3.0 * ENTROPY_JITTER.ln()).abs() < 1e-6);
    }

    #[test]
    fn entropy_of_unit_normals_near_zero() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::seeded(7);
        let m = DMatrix::from_fn(100_000, 3, |_, _| StandardNormal.sample(&mut rng));
        assert!(heterogeneity_entropy(&m).unwrap().abs() < 0.05);
    }

    #[test]
    fn entropy_scaling_identity() {
        let mut rng = crate::rng::seeded(8);
        let m = DMatrix::from_fn(50, 3, |_, _| rng.random_range(0.0..1.0));
        let c: f64 = 3.5;
        let h1 = heterogeneity_entropy(&m).unwrap();
        let h2 = heterogeneity_entropy(&(&m * c)).unwrap();
        assert!((h2 - h1 - 6.0 * c.ln()).abs() < 1e-5);
        assert!(matches!(heterogeneity_entropy(&m.rows(0, 3).into_owned()), Err(Error::Data(_))));
    }

    #[test]
    fn eigen_heterogeneity_cases() {
        let eq = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0]));
        assert!((eigen_heterogeneity(&eq).unwrap() - 0.5).abs() < 1e-12);
        let one = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 0.0]));
        assert!((eigen_heterogeneity(&one).unwrap() - 1.0).abs() < 1e-12);
        let id = DMatrix::<f64>::identity(7, 7);
        assert!((eigen_heterogeneity(&id).unwrap() - 1.0 / 7.0).abs() < 1e-12);
        assert!(matches!(eigen_heterogeneity(&DMatrix::zeros(3, 3)), Err(Error::Undefined(_))));
    }

    #[test]
    fn covariance_cases() {
        let c = state_covariance(&DMatrix::from_element(20, 3, 1.5)).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));

        let x = uniform_input(200, 9);
        let s = DMatrix::from_fn(200, 2, |t, j| if j == 0 { x[t] } else { 3.0 * x[t] + 1.0 });
        let c = state_covariance(&s).unwrap();
        assert!((c[(0, 1)] - (c[(0, 0)] * c[(1, 1)]).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn covariance_matches_brute_force() {
        let mut rng = crate::rng::seeded(10);
        let s = DMatrix::from_fn(100, 5, |_, _| rng.random_range(-2.0..2.0));
        let c = state_covariance(&s).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let ma: f64 = (0..100).map(|t| s[(t, a)]).sum::<f64>() / 100.0;
                let mb: f64 = (0..100).map(|t| s[(t, b)]).sum::<f64>() / 100.0;
                let cov: f64 = (0..100).map(|t| (s[(t, a)] - ma) * (s[(t, b)] - mb)).sum::<f64>() / 99.0;
                assert!((c[(a, b)] - cov).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_increases_squared_covariance() {
        // states x_i = sqrt(rho) z + sqrt(1 - rho) e_i have pairwise correlation rho
        use rand_distr::{Distribution, StandardNormal};
        let mut last = -1.0;
        for rho in [0.0, 0.2, 0.4, 0.6, 0.8] {
            let mut rng = crate::rng::seeded(11);
            let z: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = DMatrix::from_fn(5000, 6, |t, _| {
                let e: f64 = StandardNormal.sample(&mut rng);
                rho_f(rho).0 * z[t] + rho_f(rho).1 * e
            });
            let c = state_covariance(&s).unwrap();
            let sum_sq: f64 = c.iter().map(|v| v * v).sum();
            assert!(sum_sq > last);
            last = sum_sq;
        }
        fn rho_f(rho: f64) -> (f64, f64) {
            (rho.sqrt(), (1.0 - rho).sqrt())
        }
    }

    #[test]
    fn firing_rate_in_hz() {
        let mut r = SpikeRaster::new(1, 1000, 1.0);
        for t in (0..1000).step_by(10) {
            r.set(0, t, true);
        }
        assert!((mean_firing_rates(&r)[0] - 100.0).abs() < 1e-9);
        let rates = avg_firing_rate(&r, 100).unwrap();
        assert!((rates[(500, 0)] - 100.0).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn capacity_terms_are_clamped(seed in 0u64..500) {
            let x = uniform_input(400, seed);
            let mut rng = crate::rng::seeded(seed + 1);
            let noise = DMatrix::from_fn(400, 4, |_, _| rng.random_range(-1.0..1.0));
            let states = delay_line(&x, 4) + noise * 0.3;
            let cfg = CapacityConfig { tau_max: 20, ..CapacityConfig::default() };
            let rep = memory_capacity(&states, &x, &cfg).unwrap();
            proptest::prop_assert!(rep.per_delay.iter().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }
}
