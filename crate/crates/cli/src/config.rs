//! Experiment configuration: INI sections mapped onto the core settings.

use std::collections::HashSet;
use std::str::FromStr;

use hrsnn_core::bayesopt::{BoConfig, MarginalRange, ScalarRange, SearchSpace, MARGINAL_NAMES};
use hrsnn_core::codec::gamma_from_leak;
use hrsnn_core::datagen::{Lorenz63Config, Lorenz96Config};
use hrsnn_core::hawkes::HawkesConfig;
use hrsnn_core::neuron::Threshold;
use hrsnn_core::pipeline::{
    BoObjective, ClassifyTaskConfig, Heterogeneity, McTaskConfig, PredictTaskConfig, ReservoirConfig, EXTRA_NAMES,
};
use hrsnn_core::{DistributionSpec, Family};
use serde::{Deserialize, Serialize};

use crate::ini::{Diagnostic, Ini};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    McEval,
    Predict,
    Classify,
    BoSearch,
    HawkesCompare,
    GenData,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::McEval,
        Task::Predict,
        Task::Classify,
        Task::BoSearch,
        Task::HawkesCompare,
        Task::GenData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::McEval => "mc-eval",
            Task::Predict => "predict",
            Task::Classify => "classify",
            Task::BoSearch => "bo-search",
            Task::HawkesCompare => "hawkes-compare",
            Task::GenData => "gen-data",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Sections a config for this task must contain.
    pub fn required_sections(self) -> &'static [&'static str] {
        match self {
            Task::McEval => &["run", "network", "mc"],
            Task::Predict => &["run", "network", "predict"],
            Task::Classify => &["run", "network", "classify"],
            Task::BoSearch => &["run", "network", "mc", "bo"],
            Task::HawkesCompare => &["run", "hawkes"],
            Task::GenData => &["run", "data"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McSource {
    Reservoir,
    /// States `r_i(t) = x(t - i)`, `i = 1..k`: a reservoir with perfect memory.
    DelayLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub task: McTaskConfig,
    pub source: McSource,
    pub delay_line_k: usize,
    /// Also evaluate the homogeneous counterpart of this parameter group.
    pub compare: Option<Heterogeneity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Lorenz63,
    Lorenz96,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSettings {
    pub task: PredictTaskConfig,
    pub system: System,
    /// Lorenz96 tier used as the signal (X, Y or Z).
    pub tier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoSettings {
    pub config: BoConfig,
    pub objective: BoObjective,
    pub space: SearchSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesSettings {
    /// The heterogeneous configuration; the homogeneous one is derived from
    /// it by collapsing every kernel distribution to its mean.
    pub config: HawkesConfig,
    pub horizon: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Lorenz63,
    Lorenz96,
    Uniform,
    SpikeClasses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSettings {
    pub kind: DataKind,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seeds: Vec<u64>,
    pub reservoir: ReservoirConfig,
    pub mc: McSettings,
    pub classify: ClassifyTaskConfig,
    pub predict: PredictSettings,
    pub lorenz63: Lorenz63Config,
    pub lorenz96: Lorenz96Config,
    pub bo: BoSettings,
    pub hawkes: HawkesSettings,
    pub data: DataSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let classify = ClassifyTaskConfig::default();
        Self {
            task: Task::McEval,
            seeds: vec![0],
            reservoir: ReservoirConfig::default(),
            mc: McSettings {
                task: McTaskConfig::default(),
                source: McSource::Reservoir,
                delay_line_k: 10,
                compare: None,
            },
            classify,
            predict: PredictSettings {
                task: PredictTaskConfig::default(),
                system: System::Lorenz63,
                tier: "X".into(),
            },
            lorenz63: Lorenz63Config::default(),
            lorenz96: Lorenz96Config::default(),
            bo: BoSettings {
                config: BoConfig::default(),
                objective: BoObjective::Efficiency,
                space: SearchSpace::default(),
            },
            hawkes: HawkesSettings {
                config: HawkesConfig::default(),
                horizon: 50.0,
                n_seeds: 20,
            },
            data: DataSettings {
                kind: DataKind::Lorenz63,
                n_samples: 4000,
            },
        }
    }
}

/// Parses a distribution: `normal(m, s)`, `gamma(k, theta)`,
/// `lognormal(mu, sigma)`, `degenerate(v)` or a bare number (point mass),
/// optionally followed by truncation bounds `[lo, hi]`.
pub fn parse_distribution(text: &str) -> Result<DistributionSpec, String> {
    let text = text.trim();
    let (body, bounds) = match text.find('[') {
        Some(i) => {
            let b = text[i..].trim();
            let inner = b
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| format!("malformed bounds '{b}'"))?;
            let nums = parse_numbers(inner)?;
            if nums.len() != 2 {
                return Err(format!("bounds need two numbers, got '{b}'"));
            }
            (text[..i].trim(), Some((nums[0], nums[1])))
        }
        None => (text, None),
    };
    let spec = if let Ok(v) = parse_f64(body) {
        DistributionSpec::degenerate(v)
    } else {
        let open = body.find('(').ok_or_else(|| format!("expected family(params) or a number, got '{body}'"))?;
        let name = body[..open].trim().to_ascii_lowercase();
        let inner = body[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| format!("missing ')' in '{body}'"))?;
        let p = parse_numbers(inner)?;
        let arity = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                Err(format!("{name} takes {n} parameter(s), got {}", p.len()))
            }
        };
        match name.as_str() {
            "normal" => arity(2).map(|_| DistributionSpec::normal(p[0], p[1]))?,
            "gamma" => arity(2).map(|_| DistributionSpec::gamma(p[0], p[1]))?,
            "lognormal" => arity(2).map(|_| DistributionSpec::lognormal(p[0], p[1]))?,
            "degenerate" | "const" => arity(1).map(|_| DistributionSpec::degenerate(p[0]))?,
            other => return Err(format!("unknown family '{other}'")),
        }
    };
    let spec = match bounds {
        Some((lo, hi)) => spec.with_bounds(lo, hi),
        None => spec,
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Formats a distribution back into the config syntax.
pub fn format_distribution(d: &DistributionSpec) -> String {
    let body = match d.family {
        Family::Normal => format!("normal({}, {})", d.a, d.b),
        Family::Gamma => format!("gamma({}, {})", d.a, d.b),
        Family::LogNormal => format!("lognormal({}, {})", d.a, d.b),
        Family::Degenerate => format!("degenerate({})", d.a),
    };
    if d.lower == f64::NEG_INFINITY && d.upper == f64::INFINITY {
        body
    } else {
        format!("{body} [{}, {}]", fmt_bound(d.lower), fmt_bound(d.upper))
    }
}

fn fmt_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        x.to_string()
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|_| format!("'{t}' is not a number")),
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

/// `lo:hi`
fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let (lo, hi) = (parse_f64(a)?, parse_f64(b)?);
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("range '{s}' must be finite with lo <= hi"));
    }
    Ok((lo, hi))
}

/// `family(lo:hi, lo:hi)`
fn parse_marginal_range(name: &str, s: &str) -> Result<MarginalRange, String> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| format!("expected family(lo:hi, lo:hi), got '{s}'"))?;
    let family = match s[..open].trim().to_ascii_lowercase().as_str() {
        "normal" => Family::Normal,
        "gamma" => Family::Gamma,
        "lognormal" => Family::LogNormal,
        other => return Err(format!("unknown family '{other}'")),
    };
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("missing ')' in '{s}'"))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two ranges in '{s}'"));
    }
    Ok(MarginalRange::new(name, family, parse_range(parts[0])?, parse_range(parts[1])?))
}

/// Walks the parsed file, filling typed settings and collecting diagnostics.
struct Reader<'a> {
    ini: &'a Ini,
    used: HashSet<(String, String)>,
    diags: Vec<Diagnostic>,
}

impl<'a> Reader<'a> {
    fn new(ini: &'a Ini) -> Self {
        Self {
            ini,
            used: HashSet::new(),
            diags: Vec::new(),
        }
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let e = self.ini.get(section, key)?;
        self.used.insert((section.to_string(), key.to_string()));
        Some((e.value.clone(), e.line))
    }

    fn report(&mut self, section: &str, key: &str, line: usize, message: String) {
        let mut d = Diagnostic::new(message).in_section(section).for_key(key);
        if line > 0 {
            d = d.at(line);
        }
        self.diags.push(d);
    }

    fn with<T>(&mut self, section: &str, key: &str, slot: &mut T, parse: impl FnOnce(&str) -> Result<T, String>) {
        if let Some((v, line)) = self.raw(section, key) {
            match parse(&v) {
                Ok(x) => *slot = x,
                Err(msg) => self.report(section, key, line, msg),
            }
        }
    }

    fn num<T: FromStr>(&mut self, section: &str, key: &str, slot: &mut T) {
        self.with(section, key, slot, |v| {
            v.parse::<T>().map_err(|_| format!("'{v}' is not a valid {}", short_type::<T>()))
        });
    }

    fn float(&mut self, section: &str, key: &str, slot: &mut f64) {
        self.with(section, key, slot, |v| {
            let x = parse_f64(v)?;
            if x.is_nan() {
                Err("NaN is not allowed".into())
            } else {
                Ok(x)
            }
        });
    }

    fn positive(&mut self, section: &str, key: &str, slot: &mut f64) {
        self.with(section, key, slot, |v| {
            let x = parse_f64(v)?;
            if x > 0.0 {
                Ok(x)
            } else {
                Err(format!("{x} must be > 0"))
            }
        });
    }

    fn prob(&mut self, section: &str, key: &str, slot: &mut f64) {
        self.with(section, key, slot, |v| {
            let x = parse_f64(v)?;
            if (0.0..=1.0).contains(&x) {
                Ok(x)
            } else {
                Err(format!("{x} is not a probability in [0, 1]"))
            }
        });
    }

    fn boolean(&mut self, section: &str, key: &str, slot: &mut bool) {
        self.with(section, key, slot, |v| match v {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(format!("'{v}' is not a boolean")),
        });
    }

    fn dist(&mut self, section: &str, key: &str, slot: &mut DistributionSpec) {
        self.with(section, key, slot, parse_distribution);
    }

    fn choice<T: Copy>(&mut self, section: &str, key: &str, slot: &mut T, options: &[(&str, T)]) {
        self.with(section, key, slot, |v| {
            options.iter().find(|(n, _)| *n == v).map(|(_, t)| *t).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                format!("'{v}' is not one of {}", names.join(", "))
            })
        });
    }

    /// Keys present in the file that no setting consumed.
    fn unknown_keys(&mut self) {
        for s in &self.ini.sections {
            for e in &s.entries {
                if !self.used.contains(&(s.name.clone(), e.key.clone())) {
                    let mut d = Diagnostic::new("unknown key").in_section(&s.name).for_key(&e.key);
                    if e.line > 0 {
                        d = d.at(e.line);
                    }
                    self.diags.push(d);
                }
            }
        }
    }
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    if name.contains("usize") || name.contains("u64") {
        "non-negative integer"
    } else {
        "number"
    }
}

const SECTIONS: [&str; 15] = [
    "run", "network", "neurons", "stdp", "codec", "mc", "readout", "classify", "predict", "lorenz63", "lorenz96",
    "bo", "search", "hawkes", "data",
];

impl ExperimentConfig {
    /// Parses and validates a config. Returns every problem found.
    pub fn from_ini(ini: &Ini) -> Result<Self, Vec<Diagnostic>> {
        let mut r = Reader::new(ini);
        let mut cfg = ExperimentConfig::default();

        for s in &ini.sections {
            if !SECTIONS.contains(&s.name.as_str()) {
                let mut d = Diagnostic::new("unknown section").in_section(&s.name);
                if s.line > 0 {
                    d = d.at(s.line);
                }
                r.diags.push(d);
                // Its keys are reported with the section; skip them below.
                for e in &s.entries {
                    r.used.insert((s.name.clone(), e.key.clone()));
                }
            }
        }

        match r.raw("run", "task") {
            Some((v, line)) => match Task::parse(&v) {
                Some(t) => cfg.task = t,
                None => r.report("run", "task", line, format!("unknown task '{v}'")),
            },
            None => r.diags.push(Diagnostic::new("missing required key 'task'").in_section("run")),
        }
        for section in cfg.task.required_sections() {
            if ini.section(section).is_none() {
                r.diags.push(Diagnostic::new(format!("missing required section [{section}]")).in_section(section));
            }
        }
        r.with("run", "seeds", &mut cfg.seeds, |v| {
            let seeds: Result<Vec<u64>, _> = v.split(',').map(|s| s.trim().parse::<u64>()).collect();
            match seeds {
                Ok(s) if !s.is_empty() => Ok(s),
                _ => Err(format!("'{v}' is not a comma-separated list of seeds")),
            }
        });

        read_network(&mut r, &mut cfg.reservoir);
        read_mc(&mut r, &mut cfg.mc);
        read_readout(&mut r, &mut cfg);
        read_classify(&mut r, &mut cfg.classify);
        read_predict(&mut r, &mut cfg);
        read_bo(&mut r, &mut cfg.bo);
        read_hawkes(&mut r, &mut cfg.hawkes);
        r.choice(
            "data",
            "kind",
            &mut cfg.data.kind,
            &[
                ("lorenz63", DataKind::Lorenz63),
                ("lorenz96", DataKind::Lorenz96),
                ("uniform", DataKind::Uniform),
                ("spike-classes", DataKind::SpikeClasses),
            ],
        );
        r.num("data", "n_samples", &mut cfg.data.n_samples);
        cfg.classify.data.dt = cfg.reservoir.dt;

        r.unknown_keys();
        let mut diags = r.diags;
        if diags.is_empty() {
            diags.extend(cfg.semantic_checks());
        }
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(diags)
        }
    }

    /// Cross-field checks delegated to the core validators.
    fn semantic_checks(&self) -> Vec<Diagnostic> {
        let t = self.task;
        let mut checks: Vec<(&str, hrsnn_core::Result<()>)> = vec![("network", self.reservoir.validate())];
        let mut out = Vec::new();
        if matches!(t, Task::Predict | Task::Classify) {
            checks.push(("readout", self.classify.adam.validate()));
        }
        if t == Task::HawkesCompare {
            checks.push(("hawkes", self.hawkes.config.validate()));
            if self.hawkes.n_seeds < 2 {
                out.push(Diagnostic::new("n_seeds must be >= 2").in_section("hawkes").for_key("n_seeds"));
            }
        }
        if t == Task::BoSearch {
            checks.push(("search", self.bo.space.validate()));
            let b = &self.bo.config;
            if b.n_init < 2 || b.budget < b.n_init {
                out.push(Diagnostic::new("need budget >= n_init >= 2").in_section("bo"));
            }
        }
        let uses_l96 = match t {
            Task::Predict => self.predict.system == System::Lorenz96,
            Task::GenData => self.data.kind == DataKind::Lorenz96,
            _ => false,
        };
        let uses_l63 = match t {
            Task::Predict => self.predict.system == System::Lorenz63,
            Task::GenData => self.data.kind == DataKind::Lorenz63,
            _ => false,
        };
        if uses_l96 {
            checks.push(("lorenz96", self.lorenz96.validate()));
        }
        if uses_l63 {
            checks.push(("lorenz63", self.lorenz63.validate()));
        }
        if t == Task::McEval && self.mc.source == McSource::DelayLine && self.mc.delay_line_k == 0 {
            out.push(Diagnostic::new("delay_line_k must be >= 1").in_section("mc").for_key("delay_line_k"));
        }
        for (section, res) in checks {
            if let Err(e) = res {
                out.push(Diagnostic::new(e.to_string()).in_section(section));
            }
        }
        out
    }
}

fn read_network(r: &mut Reader, c: &mut ReservoirConfig) {
    let s = "network";
    let mut n: usize = c.topology.n_neurons();
    let mut frac = hrsnn_core::network::EXCITATORY_FRACTION;
    r.num(s, "n_neurons", &mut n);
    r.prob(s, "excitatory_fraction", &mut frac);
    let n_exc = (n as f64 * frac).round() as usize;
    c.topology.n_exc = n_exc;
    c.topology.n_inh = n - n_exc;
    let t = &mut c.topology;
    for (k, slot) in [("p_ee", &mut t.p_ee), ("p_ei", &mut t.p_ei), ("p_ie", &mut t.p_ie), ("p_ii", &mut t.p_ii)] {
        r.prob(s, k, slot);
    }
    for (k, slot) in [
        ("scale_ee", &mut t.scale_ee),
        ("scale_ei", &mut t.scale_ei),
        ("scale_ie", &mut t.scale_ie),
        ("scale_ii", &mut t.scale_ii),
        ("w_min", &mut t.w_min),
        ("w_max", &mut t.w_max),
        ("input_w_min", &mut t.input_w_min),
        ("input_w_max", &mut t.input_w_max),
        ("bias_current", &mut t.bias_current),
    ] {
        r.float(s, k, slot);
    }
    r.num(s, "n_inputs", &mut t.n_inputs);
    r.prob(s, "input_fraction", &mut t.input_fraction);
    r.prob(s, "input_prob", &mut t.input_prob);
    r.boolean(s, "plastic_inhibitory", &mut t.plastic_inhibitory);
    r.positive(s, "dt", &mut c.dt);
    r.num(s, "bins_per_sample", &mut c.bins_per_sample);
    r.num(s, "learning_samples", &mut c.learning_samples);

    let s = "neurons";
    let p = &mut c.population;
    r.dist(s, "tau_m_exc", &mut p.tau_m_exc);
    r.dist(s, "tau_m_inh", &mut p.tau_m_inh);
    r.positive(s, "tau_unit_ms", &mut p.tau_unit_ms);
    let mut v_th = match p.v_th {
        Threshold::Fixed(v) => DistributionSpec::degenerate(v),
        Threshold::Distributed(d) => d,
    };
    r.dist(s, "v_th", &mut v_th);
    p.v_th = if v_th.is_degenerate() {
        Threshold::Fixed(v_th.a)
    } else {
        Threshold::Distributed(v_th)
    };
    r.float(s, "v_rest", &mut p.v_rest);
    r.float(s, "v_reset", &mut p.v_reset);
    r.float(s, "t_ref", &mut p.t_ref);

    let s = "stdp";
    let d = &mut c.stdp;
    r.dist(s, "tau_plus", &mut d.tau_plus);
    r.dist(s, "tau_minus", &mut d.tau_minus);
    r.dist(s, "eta_plus", &mut d.eta_plus);
    r.dist(s, "eta_minus", &mut d.eta_minus);

    let s = "codec";
    let k = &mut c.codec;
    r.positive(s, "sf_threshold", &mut k.sf_threshold);
    r.float(s, "rate_max", &mut k.rate_max);
    r.num(s, "window", &mut k.window);
    let mut leak = f64::NAN;
    r.float(s, "leak", &mut leak);
    let mut gamma = f64::NAN;
    r.float(s, "gamma", &mut gamma);
    match (leak.is_nan(), gamma.is_nan()) {
        (false, false) => r
            .diags
            .push(Diagnostic::new("set either leak or gamma, not both").in_section(s).for_key("gamma")),
        (false, true) => {
            if k.window < 2 || !(leak > 0.0 && leak < 1.0) {
                r.diags
                    .push(Diagnostic::new("leak needs window >= 2 and 0 < leak < 1").in_section(s).for_key("leak"));
            } else {
                k.gamma = gamma_from_leak(k.window, leak);
            }
        }
        (true, false) => k.gamma = gamma,
        (true, true) => {
            if k.window >= 2 {
                k.gamma = gamma_from_leak(k.window, 0.02);
            }
        }
    }
}

fn read_mc(r: &mut Reader, m: &mut McSettings) {
    let s = "mc";
    r.choice(
        s,
        "source",
        &mut m.source,
        &[("reservoir", McSource::Reservoir), ("delay-line", McSource::DelayLine)],
    );
    r.num(s, "delay_line_k", &mut m.delay_line_k);
    r.num(s, "n_samples", &mut m.task.n_samples);
    r.num(s, "tau_max", &mut m.task.capacity.tau_max);
    r.float(s, "ridge_lambda", &mut m.task.capacity.ridge_lambda);
    r.prob(s, "train_fraction", &mut m.task.capacity.train_fraction);
    r.choice(
        s,
        "compare",
        &mut m.compare,
        &[
            ("none", None),
            ("neurons", Some(Heterogeneity::Neurons)),
            ("synapses", Some(Heterogeneity::Synapses)),
            ("all", Some(Heterogeneity::All)),
        ],
    );
}

fn read_readout(r: &mut Reader, cfg: &mut ExperimentConfig) {
    let s = "readout";
    let mut a = cfg.classify.adam;
    r.positive(s, "lr", &mut a.lr);
    r.float(s, "beta1", &mut a.beta1);
    r.float(s, "beta2", &mut a.beta2);
    r.positive(s, "eps", &mut a.eps);
    r.num(s, "epochs", &mut a.epochs);
    r.num(s, "batch_size", &mut a.batch_size);
    cfg.classify.adam = a;
    cfg.predict.task.adam = a;
}

fn read_classify(r: &mut Reader, c: &mut ClassifyTaskConfig) {
    let s = "classify";
    let d = &mut c.data;
    r.num(s, "n_classes", &mut d.n_classes);
    r.num(s, "samples_per_class", &mut d.samples_per_class);
    r.num(s, "n_channels", &mut d.n_channels);
    r.num(s, "n_bins", &mut d.n_bins);
    r.float(s, "template_rate", &mut d.template_rate);
    r.float(s, "jitter", &mut d.jitter);
    r.prob(s, "deletion_prob", &mut d.deletion_prob);
    r.prob(s, "train_fraction", &mut d.train_fraction);
    r.num(s, "segments", &mut c.segments);
    r.num(s, "learning_passes", &mut c.learning_passes);
    r.float(s, "input_w_min", &mut c.input_weights.0);
    r.float(s, "input_w_max", &mut c.input_weights.1);
}

fn read_predict(r: &mut Reader, cfg: &mut ExperimentConfig) {
    let s = "predict";
    let p = &mut cfg.predict;
    r.choice(s, "system", &mut p.system, &[("lorenz63", System::Lorenz63), ("lorenz96", System::Lorenz96)]);
    r.with(s, "tier", &mut p.tier, |v| match v {
        "X" | "Y" | "Z" => Ok(v.to_string()),
        _ => Err(format!("tier must be X, Y or Z, got '{v}'")),
    });
    r.num(s, "horizon", &mut p.task.horizon);
    r.prob(s, "train_fraction", &mut p.task.train_fraction);
    r.num(s, "washout", &mut p.task.washout);
    r.float(s, "input_w_min", &mut p.task.input_weights.0);
    r.float(s, "input_w_max", &mut p.task.input_weights.1);

    let s = "lorenz63";
    let l = &mut cfg.lorenz63;
    r.float(s, "rho", &mut l.rho);
    r.float(s, "sigma", &mut l.sigma);
    r.float(s, "beta", &mut l.beta);
    r.with(s, "x0", &mut l.x0, |v| {
        let n = parse_numbers(v)?;
        <[f64; 3]>::try_from(n).map_err(|_| "x0 needs three numbers".to_string())
    });
    r.positive(s, "dt", &mut l.dt);
    r.float(s, "duration", &mut l.duration);
    r.float(s, "burn_in", &mut l.burn_in);

    let s = "lorenz96";
    let l = &mut cfg.lorenz96;
    r.num(s, "k", &mut l.k);
    r.num(s, "j", &mut l.j);
    r.num(s, "i", &mut l.i);
    for (k, slot) in [
        ("f", &mut l.f),
        ("b", &mut l.b),
        ("c", &mut l.c),
        ("d", &mut l.d),
        ("e", &mut l.e),
        ("g", &mut l.g),
        ("h", &mut l.h),
        ("duration", &mut l.duration),
        ("burn_in", &mut l.burn_in),
    ] {
        r.float(s, k, slot);
    }
    r.positive(s, "dt", &mut l.dt);
    r.num(s, "output_every", &mut l.output_every);
}

fn read_bo(r: &mut Reader, b: &mut BoSettings) {
    let s = "bo";
    r.choice(
        s,
        "objective",
        &mut b.objective,
        &[
            ("capacity", BoObjective::Capacity),
            ("spikes", BoObjective::Spikes),
            ("efficiency", BoObjective::Efficiency),
        ],
    );
    let c = &mut b.config;
    r.num(s, "budget", &mut c.budget);
    r.num(s, "n_init", &mut c.n_init);
    r.num(s, "candidates_per_iter", &mut c.candidates_per_iter);
    r.prob(s, "local_fraction", &mut c.local_fraction);
    r.positive(s, "local_scale", &mut c.local_scale);
    r.positive(s, "penalty_factor", &mut c.penalty_factor);
    r.positive(s, "fallback_penalty", &mut c.fallback_penalty);

    // A [search] section replaces the default space entirely.
    let Some(section) = r.ini.section("search") else {
        return;
    };
    let mut space = SearchSpace {
        marginals: Vec::new(),
        extras: Vec::new(),
    };
    let entries = section.entries.clone();
    for e in entries {
        r.used.insert(("search".into(), e.key.clone()));
        let res = if MARGINAL_NAMES.contains(&e.key.as_str()) {
            parse_marginal_range(&e.key, &e.value).map(|m| space.marginals.push(m))
        } else if EXTRA_NAMES.contains(&e.key.as_str()) {
            parse_range(&e.value).map(|(lower, upper)| {
                space.extras.push(ScalarRange {
                    name: e.key.clone(),
                    lower,
                    upper,
                })
            })
        } else {
            Err("not a searchable parameter".into())
        };
        if let Err(msg) = res {
            r.report("search", &e.key, e.line, msg);
        }
    }
    b.space = space;
}

fn read_hawkes(r: &mut Reader, h: &mut HawkesSettings) {
    let s = "hawkes";
    let c = &mut h.config;
    r.num(s, "n_total", &mut c.n_total);
    r.prob(s, "alpha", &mut c.alpha);
    r.float(s, "mu_a", &mut c.mu_a);
    r.float(s, "mu_b", &mut c.mu_b);
    for (i, k) in c.kernels.iter_mut().enumerate() {
        r.dist(s, &format!("h{}_amplitude", i + 1), &mut k.amplitude);
        r.dist(s, &format!("h{}_rate", i + 1), &mut k.rate);
    }
    r.float(s, "feedback_cap", &mut c.feedback_cap);
    r.positive(s, "max_intensity", &mut c.max_intensity);
    r.positive(s, "horizon", &mut h.horizon);
    r.num(s, "n_seeds", &mut h.n_seeds);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
        ExperimentConfig::from_ini(&Ini::parse(text).unwrap())
    }

    #[test]
    fn distribution_syntax() {
        assert_eq!(parse_distribution("gamma(2.89, 0.248)").unwrap(), DistributionSpec::gamma(2.89, 0.248));
        assert_eq!(parse_distribution(" 3.5 ").unwrap(), DistributionSpec::degenerate(3.5));
        let b = parse_distribution("normal(18, 1.5) [0, inf]").unwrap();
        assert_eq!((b.lower, b.upper), (0.0, f64::INFINITY));
        assert!(parse_distribution("gamma(-1, 2)").is_err());
        assert!(parse_distribution("normal(1)").is_err());
        assert!(parse_distribution("cauchy(0, 1)").is_err());
        assert!(parse_distribution("normal(1, 2").is_err());
    }

    #[test]
    fn distribution_round_trips_through_text() {
        for d in [
            DistributionSpec::gamma(2.89, 0.248).with_bounds(0.05, f64::INFINITY),
            DistributionSpec::normal(-1.25, 0.5),
            DistributionSpec::lognormal(0.1, 1.0),
            DistributionSpec::degenerate(4.0),
        ] {
            assert_eq!(parse_distribution(&format_distribution(&d)).unwrap(), d);
        }
    }

    #[test]
    fn minimal_mc_config_uses_defaults() {
        let cfg = parse("[run]\ntask = mc-eval\nseeds = 3, 4\n[network]\nn_neurons = 100\n[mc]\n").unwrap();
        assert_eq!(cfg.task, Task::McEval);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!((cfg.reservoir.topology.n_exc, cfg.reservoir.topology.n_inh), (80, 20));
        assert_eq!(cfg.mc.task.n_samples, 4000);
    }

    #[test]
    fn bad_probability_names_the_key() {
        let d = parse("[run]\ntask = mc-eval\n[network]\np_ee = 1.5\n[mc]\n").unwrap_err();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].key.as_deref(), Some("p_ee"));
        assert_eq!(d[0].line, Some(4));
    }

    #[test]
    fn missing_block_is_named() {
        let d = parse("[run]\ntask = bo-search\n[network]\n[mc]\n").unwrap_err();
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].to_string().contains("[bo]"), "{}", d[0]);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let d = parse("[run]\ntask = mc-eval\n[network]\nn_nerons = 10\n[mc]\n[extra]\nx = 1\n").unwrap_err();
        let text: Vec<String> = d.iter().map(ToString::to_string).collect();
        assert_eq!(d.len(), 2, "{text:?}");
        assert!(text.iter().any(|t| t.contains("[extra]: unknown section")));
        assert!(text.iter().any(|t| t.contains("n_nerons: unknown key")));
    }

    #[test]
    fn search_section_replaces_the_space() {
        let cfg = parse(
            "[run]\ntask = bo-search\n[network]\n[mc]\n[bo]\nbudget = 10\nn_init = 4\n[search]\ntau_plus = normal(5:40, 0:5)\nscale_ie = 0.5:4\n",
        )
        .unwrap();
        assert_eq!(cfg.bo.space.marginals.len(), 1);
        assert_eq!(cfg.bo.space.marginals[0].a, (5.0, 40.0));
        assert_eq!(cfg.bo.space.extras[0].name, "scale_ie");
        let d = parse("[run]\ntask = bo-search\n[network]\n[mc]\n[bo]\n[search]\nspeed = 1:2\n").unwrap_err();
        assert_eq!(d[0].key.as_deref(), Some("speed"));
    }

    #[test]
    fn leak_sets_decoder_gamma() {
        let cfg = parse("[run]\ntask = mc-eval\n[network]\n[mc]\n[codec]\nwindow = 11\nleak = 0.5\n").unwrap();
        assert!((cfg.reservoir.codec.gamma.powi(10) - 0.5).abs() < 1e-12);
        assert!(parse("[run]\ntask = mc-eval\n[network]\n[mc]\n[codec]\nleak = 0.5\ngamma = 0.9\n").is_err());
    }

    #[test]
    fn threshold_accepts_number_or_distribution() {
        let cfg = parse("[run]\ntask = mc-eval\n[network]\n[mc]\n[neurons]\nv_th = normal(1, 0.1)\n").unwrap();
        assert!(matches!(cfg.reservoir.population.v_th, Threshold::Distributed(_)));
        let cfg = parse("[run]\ntask = mc-eval\n[network]\n[mc]\n[neurons]\nv_th = 1.5\n").unwrap();
        assert_eq!(cfg.reservoir.population.v_th, Threshold::Fixed(1.5));
    }
}
