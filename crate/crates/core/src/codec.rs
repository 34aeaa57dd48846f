//! Conversion between analog signals and spikes.
//!
//! * Step-Forward encoding emits an "up" spike whenever the signal rises more
//!   than a threshold above a tracked baseline (and a "down" spike for the
//!   mirror case), moving the baseline by one threshold per spike.
//! * Rate encoding draws independent Bernoulli spikes with probability
//!   `signal * rate_max * dt`.
//! * The decoder forms `x_i(t) = sum_{n=0..tau} gamma^n s_i(t - n)`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::SpikeRaster;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    /// Step-Forward threshold in signal units.
    pub sf_threshold: f64,
    /// Peak rate in Hz for rate encoding.
    pub rate_max: f64,
    /// Decoder window in bins.
    pub window: usize,
    /// Decoder leak per bin.
    pub gamma: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            sf_threshold: 0.1,
            rate_max: 200.0,
            window: 50,
            gamma: gamma_from_leak(50, 0.02),
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("decoder gamma {} not in (0, 1)", self.gamma)));
        }
        if !(self.sf_threshold > 0.0) {
            return Err(Error::Config("sf_threshold must be > 0".into()));
        }
        if !(self.rate_max >= 0.0) {
            return Err(Error::Config("rate_max must be >= 0".into()));
        }
        Ok(())
    }
}

/// Leak `gamma` such that the oldest bin of a `window`-bin window is
/// weighted by `leak`: `gamma^(window - 1) = leak`.
pub fn gamma_from_leak(window: usize, leak: f64) -> f64 {
    leak.powf(1.0 / (window as f64 - 1.0))
}

/// Step-Forward encoding of one signal into (up, down) single-channel rasters.
pub fn sf_encode(signal: &[f64], threshold: f64, dt: f64) -> Result<(SpikeRaster, SpikeRaster)> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be > 0, got {threshold}")));
    }
    let mut up = SpikeRaster::new(1, signal.len(), dt);
    let mut down = SpikeRaster::new(1, signal.len(), dt);
    let Some(&first) = signal.first() else {
        return Ok((up, down));
    };
    let mut base = first;
    for (t, &x) in signal.iter().enumerate().skip(1) {
        if x > base + threshold {
            up.set(0, t, true);
            base += threshold;
        } else if x < base - threshold {
            down.set(0, t, true);
            base -= threshold;
        }
    }
    Ok((up, down))
}

/// Step-Forward encodes each column of `signals` (time × dims) into two
/// channels, `2d` for up-spikes and `2d + 1` for down-spikes.
pub fn sf_encode_multi(signals: &DMatrix<f64>, threshold: f64, dt: f64) -> Result<SpikeRaster> {
    let (t, d) = signals.shape();
    let mut out = SpikeRaster::new(2 * d, t, dt);
    for c in 0..d {
        let col: Vec<f64> = signals.column(c).iter().copied().collect();
        let (up, down) = sf_encode(&col, threshold, dt)?;
        for b in up.spike_bins(0) {
            out.set(2 * c, b, true);
        }
        for b in down.spike_bins(0) {
            out.set(2 * c + 1, b, true);
        }
    }
    Ok(out)
}

/// Baseline reconstruction `B_0 + theta (cumulative up - down)`.
pub fn sf_reconstruct(first: f64, threshold: f64, up: &SpikeRaster, down: &SpikeRaster) -> Vec<f64> {
    let mut base = first;
    (0..up.n_bins())
        .map(|t| {
            if up.get(0, t) {
                base += threshold;
            }
            if down.get(0, t) {
                base -= threshold;
            }
            base
        })
        .collect()
}

/// Bernoulli rate encoding, identical across `n_channels` in distribution
/// but independent in realization. Signal values must lie in `[0, 1]`;
/// probabilities above one are clamped.
pub fn rate_encode(
    signal: &[f64],
    rate_max: f64,
    n_channels: usize,
    dt: f64,
    seed: u64,
) -> Result<SpikeRaster> {
    if let Some(bad) = signal.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidArgument(format!("signal value {bad} outside [0, 1]")));
    }
    // dt in ms, rate in Hz.
    let peak = rate_max * dt * 1e-3;
    if peak > 1.0 {
        eprintln!("warning: rate_max * dt = {peak} exceeds one spike per bin; clamping");
    }
    let mut rng = stream_rng(seed, Stream::Encoding);
    let mut out = SpikeRaster::new(n_channels, signal.len(), dt);
    for (t, &x) in signal.iter().enumerate() {
        let p = (x * peak).clamp(0.0, 1.0);
        for c in 0..n_channels {
            // Always consume one draw so realizations are aligned across signals.
            let u: f64 = rng.random();
            if u < p {
                out.set(c, t, true);
            }
        }
    }
    Ok(out)
}

/// Exponentially weighted sliding-window rate decoding (time × neuron).
/// Bins before the start of the raster count as silent.
pub fn rate_decode(raster: &SpikeRaster, window: usize, gamma: f64) -> DMatrix<f64> {
    let t = raster.n_bins();
    let n = raster.n_neurons();
    let weights: Vec<f64> = (0..=window).map(|k| gamma.powi(k as i32)).collect();
    let mut out = DMatrix::zeros(t, n);
    for i in 0..n {
        for b in raster.spike_bins(i) {
            for (k, &w) in weights.iter().enumerate() {
                let tt = b + k;
                if tt >= t {
                    break;
                }
                out[(tt, i)] += w;
            }
        }
    }
    out
}

/// Decodes only the listed neurons (e.g. the excitatory population).
pub fn rate_decode_subset(raster: &SpikeRaster, neurons: &[usize], cfg: &CodecConfig) -> DMatrix<f64> {
    rate_decode(&raster.select_neurons(neurons), cfg.window, cfg.gamma)
}

/// Upper bound of any decoded value: `(1 - gamma^(tau+1)) / (1 - gamma)`.
pub fn decode_bound(window: usize, gamma: f64) -> f64 {
    (1.0 - gamma.powi(window as i32 + 1)) / (1.0 - gamma)
}
