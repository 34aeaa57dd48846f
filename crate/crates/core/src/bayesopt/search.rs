use std::io::Write;

use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::distribution::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

use super::acquisition::expected_improvement;
use super::distance::{profile_w2_sq, quantile_profile};
use super::gp::{GpConfig, GpSurrogate};

/// Fixed ordering of the distribution-valued coordinates.
pub const MARGINAL_NAMES: [&str; 6] = ["tau_plus", "tau_minus", "eta_plus", "eta_minus", "tau_m_exc", "tau_m_inh"];

/// Search range of one marginal: its family and intervals for both
/// parameters (`a`, `b` as in [`DistributionSpec`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRange {
    pub name: String,
    pub family: Family,
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl MarginalRange {
    pub fn new(name: &str, family: Family, a: (f64, f64), b: (f64, f64)) -> Self {
        Self {
            name: name.to_string(),
            family,
            a,
            b,
        }
    }

    /// Span of the marginal's mean over the range, used to put marginals
    /// in different units on a common scale.
    pub fn width(&self) -> f64 {
        let w = match self.family {
            Family::Gamma => self.a.1 * self.b.1 - self.a.0 * self.b.0,
            Family::LogNormal => {
                (self.a.1 + 0.5 * self.b.1 * self.b.1).exp() - (self.a.0 + 0.5 * self.b.0 * self.b.0).exp()
            }
            Family::Normal | Family::Degenerate => self.a.1 - self.a.0,
        };
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    fn n_coords(&self) -> usize {
        if self.family == Family::Degenerate {
            1
        } else {
            2
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.a) || (self.n_coords() == 2 && !ok(self.b)) {
            return Err(Error::Config(format!("bad search range for {}", self.name)));
        }
        let corner = |a: f64, b: f64| DistributionSpec { family: self.family, a, b, lower: f64::NEG_INFINITY, upper: f64::INFINITY };
        corner(self.a.0, self.b.0).validate()?;
        corner(self.a.1, self.b.1).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarRange {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub marginals: Vec<MarginalRange>,
    /// Optional scalar hyperparameters appended to every point.
    pub extras: Vec<ScalarRange>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let n = Family::Normal;
        let g = Family::Gamma;
        Self {
            marginals: vec![
                MarginalRange::new("tau_plus", n, (5.0, 40.0), (0.0, 5.0)),
                MarginalRange::new("tau_minus", n, (5.0, 40.0), (0.0, 5.0)),
                MarginalRange::new("eta_plus", n, (0.05, 1.0), (0.0, 0.05)),
                MarginalRange::new("eta_minus", n, (0.05, 1.0), (0.0, 0.05)),
                MarginalRange::new("tau_m_exc", g, (1.0, 10.0), (0.05, 1.0)),
                MarginalRange::new("tau_m_inh", g, (1.0, 10.0), (0.05, 1.0)),
            ],
            extras: Vec::new(),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.marginals.is_empty() {
            return Err(Error::Config("search space has no marginals".into()));
        }
        for m in &self.marginals {
            m.validate()?;
        }
        for e in &self.extras {
            if !(e.lower.is_finite() && e.upper.is_finite() && e.lower < e.upper) {
                return Err(Error::Config(format!("bad range for {}", e.name)));
            }
        }
        Ok(())
    }

    pub fn n_coords(&self) -> usize {
        self.marginals.iter().map(|m| m.n_coords()).sum::<usize>() + self.extras.len()
    }

    /// Coordinate names in CSV order.
    pub fn coord_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for m in &self.marginals {
            names.push(format!("{}_a", m.name));
            if m.n_coords() == 2 {
                names.push(format!("{}_b", m.name));
            }
        }
        names.extend(self.extras.iter().map(|e| e.name.clone()));
        names
    }

    /// Maps a point of the unit cube onto the space.
    pub fn from_unit(&self, u: &[f64]) -> SearchPoint {
        let lerp = |(lo, hi): (f64, f64), t: f64| lo + (hi - lo) * t;
        let mut k = 0;
        let mut marginals = Vec::with_capacity(self.marginals.len());
        for m in &self.marginals {
            let a = lerp(m.a, u[k]);
            let b = if m.n_coords() == 2 { lerp(m.b, u[k + 1]) } else { 0.0 };
            k += m.n_coords();
            marginals.push(DistributionSpec {
                family: m.family,
                a,
                b,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            });
        }
        let extras = self
            .extras
            .iter()
            .map(|e| {
                k += 1;
                lerp((e.lower, e.upper), u[k - 1])
            })
            .collect();
        SearchPoint { marginals, extras }
    }

    pub fn coords(&self, p: &SearchPoint) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_coords());
        for (m, d) in self.marginals.iter().zip(&p.marginals) {
            out.push(d.a);
            if m.n_coords() == 2 {
                out.push(d.b);
            }
        }
        out.extend(&p.extras);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub marginals: Vec<DistributionSpec>,
    pub extras: Vec<f64>,
}

impl SearchPoint {
    pub fn marginal(&self, space: &SearchSpace, name: &str) -> Option<DistributionSpec> {
        space.marginals.iter().position(|m| m.name == name).map(|i| self.marginals[i])
    }

    pub fn extra(&self, space: &SearchSpace, name: &str) -> Option<f64> {
        space.extras.iter().position(|e| e.name == name).map(|i| self.extras[i])
    }
}

/// A point with the quantile profiles its distance computations need.
struct Cached {
    point: SearchPoint,
    profiles: Vec<Option<Vec<f64>>>,
}

impl Cached {
    fn new(point: SearchPoint) -> Self {
        let profiles = point
            .marginals
            .iter()
            .map(|d| match d.family {
                Family::Normal | Family::Degenerate => None,
                _ => Some(quantile_profile(d)),
            })
            .collect();
        Self { point, profiles }
    }
}

fn cached_distance(space: &SearchSpace, x: &Cached, y: &Cached) -> f64 {
    let mut sum = 0.0;
    for (k, range) in space.marginals.iter().enumerate() {
        let (a, b) = (&x.point.marginals[k], &y.point.marginals[k]);
        let w2_sq = match (&x.profiles[k], &y.profiles[k]) {
            (Some(pa), Some(pb)) => profile_w2_sq(pa, pb),
            _ => (a.mean() - b.mean()).powi(2) + (a.std() - b.std()).powi(2),
        };
        sum += w2_sq / (range.width() * range.width());
    }
    for (e, (a, b)) in space.extras.iter().zip(x.point.extras.iter().zip(&y.point.extras)) {
        sum += ((a - b) / (e.upper - e.lower)).powi(2);
    }
    sum.max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Total objective evaluations, including the initial design.
    pub budget: usize,
    pub n_init: usize,
    pub candidates_per_iter: usize,
    /// Fraction of candidates drawn as perturbations of the incumbent
    /// rather than uniformly over the space.
    pub local_fraction: f64,
    /// Standard deviation of the local perturbations in unit-cube units.
    pub local_scale: f64,
    /// Failed evaluations are scored at `worst * penalty_factor`.
    pub penalty_factor: f64,
    /// Penalty used while no evaluation has succeeded yet.
    pub fallback_penalty: f64,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 40,
            n_init: 8,
            candidates_per_iter: 2048,
            local_fraction: 0.25,
            local_scale: 0.05,
            penalty_factor: 10.0,
            fallback_penalty: 1e6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    pub iteration: usize,
    pub point: SearchPoint,
    /// Value returned by the objective (non-finite for failures).
    pub objective: f64,
    /// Value the surrogate saw: the objective, or the penalty on failure.
    pub value: f64,
    pub incumbent: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoOutcome {
    pub best: SearchPoint,
    pub best_value: f64,
    pub history: Vec<BoRecord>,
}

impl BoOutcome {
    pub fn write_history_csv<W: Write>(&self, space: &SearchSpace, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string()];
        header.extend(space.coord_names());
        header.extend(["objective", "value", "incumbent", "failed"].map(String::from));
        w.write_record(&header)?;
        for r in &self.history {
            let mut row = vec![r.iteration.to_string()];
            row.extend(space.coords(&r.point).iter().map(|v| v.to_string()));
            row.push(r.objective.to_string());
            row.push(r.value.to_string());
            row.push(r.incumbent.to_string());
            row.push(r.failed.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn latin_hypercube(n: usize, dims: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            pts[i][d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

fn penalty(worst: Option<f64>, cfg: &BoConfig) -> f64 {
    match worst {
        Some(w) if w > 0.0 => w * cfg.penalty_factor,
        Some(w) => w + cfg.penalty_factor * w.abs().max(1.0),
        None => cfg.fallback_penalty,
    }
}

fn record(
    history: &mut Vec<BoRecord>,
    best: &mut Option<(usize, f64)>,
    point: SearchPoint,
    objective: f64,
    pen: f64,
) {
    let failed = !objective.is_finite();
    let value = if failed { pen } else { objective };
    let idx = history.len();
    if best.is_none_or(|(_, b)| value < b) {
        *best = Some((idx, value));
    }
    history.push(BoRecord {
        iteration: idx,
        point,
        objective,
        value,
        incumbent: best.unwrap().1,
        failed,
    });
}

/// Minimizes `objective` over `space`. Initial design is a Latin hypercube
/// of `n_init` points; each later evaluation maximizes expected improvement
/// of the negated objective over random candidates.
pub fn bo_loop<F>(objective: F, space: &SearchSpace, cfg: &BoConfig) -> Result<BoOutcome>
where
    F: Fn(&SearchPoint) -> f64 + Sync,
{
    space.validate()?;
    if cfg.n_init < 2 || cfg.budget < cfg.n_init {
        return Err(Error::Config(format!(
            "need budget >= n_init >= 2 (budget {}, n_init {})",
            cfg.budget, cfg.n_init
        )));
    }
    if cfg.candidates_per_iter == 0 {
        return Err(Error::Config("candidates_per_iter must be >= 1".into()));
    }
    let dims = space.n_coords();
    let mut rng = stream_rng(cfg.seed, Stream::Search);
    let gp_cfg = GpConfig::default();

    let mut unit: Vec<Vec<f64>> = latin_hypercube(cfg.n_init, dims, &mut rng);
    let mut obs: Vec<Cached> = unit.iter().map(|u| Cached::new(space.from_unit(u))).collect();
    let raw: Vec<f64> = obs.par_iter().map(|c| objective(&c.point)).collect();

    let mut history: Vec<BoRecord> = Vec::with_capacity(cfg.budget);
    let worst_of = |h: &[BoRecord], extra: &[f64]| {
        h.iter()
            .filter(|r| !r.failed)
            .map(|r| r.value)
            .chain(extra.iter().copied().filter(|v| v.is_finite()))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    };
    let init_penalty = penalty(worst_of(&history, &raw), cfg);
    let mut best: Option<(usize, f64)> = None;
    for (c, &y) in obs.iter().zip(&raw) {
        record(&mut history, &mut best, c.point.clone(), y, init_penalty);
    }

    let n_local = ((cfg.candidates_per_iter as f64) * cfg.local_fraction).round() as usize;
    let local = Normal::new(0.0, cfg.local_scale.max(1e-12)).map_err(|e| Error::Config(e.to_string()))?;
    while history.len() < cfg.budget {
        let n = obs.len();
        let dist = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { cached_distance(space, &obs[i], &obs[j]) });
        let dist = (&dist + dist.transpose()) * 0.5;
        let targets: Vec<f64> = history.iter().map(|r| -r.value).collect();
        let gp = GpSurrogate::fit(&dist, &targets, &gp_cfg)?;
        let f_best = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let incumbent_unit = unit[best.unwrap().0].clone();
        let cand_unit: Vec<Vec<f64>> = (0..cfg.candidates_per_iter)
            .map(|k| {
                if k < n_local {
                    incumbent_unit
                        .iter()
                        .map(|&u| (u + local.sample(&mut rng)).clamp(0.0, 1.0))
                        .collect()
                } else {
                    (0..dims).map(|_| rng.random::<f64>()).collect()
                }
            })
            .collect();
        let scores: Vec<f64> = cand_unit
            .par_iter()
            .map(|u| {
                let c = Cached::new(space.from_unit(u));
                let d: Vec<f64> = obs.iter().map(|o| cached_distance(space, &c, o)).collect();
                match gp.predict(&d) {
                    Ok((mu, sd)) => expected_improvement(mu, sd, f_best),
                    Err(_) => f64::NEG_INFINITY,
                }
            })
            .collect();
        let pick = scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
            .0;
        let chosen = Cached::new(space.from_unit(&cand_unit[pick]));
        let y = objective(&chosen.point);
        let pen = penalty(worst_of(&history, &[]), cfg);
        record(&mut history, &mut best, chosen.point.clone(), y, pen);
        unit.push(cand_unit[pick].clone());
        obs.push(chosen);
    }

    let (idx, best_value) = best.expect("at least two evaluations");
    Ok(BoOutcome {
        best: history[idx].point.clone(),
        best_value,
        history,
    })
}
