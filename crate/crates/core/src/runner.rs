//! Seeded experiment harness behind the `kerrbus` command.
//!
//! Every experiment draws its trials in parallel, each from its own
//! ChaCha20 stream keyed by `(seed, trial)`, and writes one CSV row per
//! trial in trial order. The summary compares empirical rates with the
//! closed forms of [`crate::analytics`].

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::analytics::{self, DensityMatrix};
use crate::branch::CoherentBranchState;
use crate::error::{Error, Result};
use crate::measure::OutcomeValue;
use crate::oracle;
use crate::protocols::{
    bell_measurement, cnot, cnot_target, fuse_clusters, stabilizer_expectations, BellIndex, Cluster, HeraldedSource,
    Parity, ParityGate, ParityGateConfig, ParityMeasurement, QndDetector,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Detector,
    Source,
    Parity,
    ParityLossy,
    Cnot,
    BellMeas,
    Fusion,
    OracleCheck,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Detector,
        Experiment::Source,
        Experiment::Parity,
        Experiment::ParityLossy,
        Experiment::Cnot,
        Experiment::BellMeas,
        Experiment::Fusion,
        Experiment::OracleCheck,
        Experiment::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Detector => "detector",
            Experiment::Source => "source",
            Experiment::Parity => "parity",
            Experiment::ParityLossy => "parity-lossy",
            Experiment::Cnot => "cnot",
            Experiment::BellMeas => "bellmeas",
            Experiment::Fusion => "fusion",
            Experiment::OracleCheck => "oracle-check",
            Experiment::Sweep => "sweep",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Product input `(c₊|H⟩+c₋|V⟩)(d₊|H⟩+d₋|V⟩)` for the two-qubit experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputState {
    /// `|D⟩|D⟩`
    Balanced,
    /// `|H⟩|V⟩`
    Odd,
    /// `|H⟩|H⟩`
    Even,
}

impl InputState {
    pub fn name(self) -> &'static str {
        match self {
            InputState::Balanced => "balanced",
            InputState::Odd => "odd",
            InputState::Even => "even",
        }
    }

    pub fn factors(self) -> ([Complex64; 2], [Complex64; 2]) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let d = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            InputState::Balanced => ([d, d], [d, d]),
            InputState::Odd => ([one, zero], [zero, one]),
            InputState::Even => ([one, zero], [one, zero]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Theta,
    Eta,
    AlphaA,
    Xi,
    /// Sets `alpha = v / sin θ`.
    AlphaSinTheta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Theta => "theta",
            SweepParam::Eta => "eta",
            SweepParam::AlphaA => "alpha_a",
            SweepParam::Xi => "xi",
            SweepParam::AlphaSinTheta => "alpha_sin_theta",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        let all = [
            SweepParam::Alpha,
            SweepParam::Theta,
            SweepParam::Eta,
            SweepParam::AlphaA,
            SweepParam::Xi,
            SweepParam::AlphaSinTheta,
        ];
        let s = s.replace('-', "_");
        all.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

pub const MAX_SWEEP_AXES: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha: f64,
    pub theta: f64,
    pub eta: f64,
    pub alpha_a: f64,
    pub xi: f64,
    pub trials: u64,
    pub seed: u64,
    pub measurement: ParityMeasurement,
    pub input: InputState,
    pub out: Option<PathBuf>,
    pub sweep: Vec<SweepAxis>,
    /// Experiment evaluated at each sweep point.
    pub target: Experiment,
}

fn config_err(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("invalid `{key}`: {reason}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| config_err(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(config_err(key, format!("`{v}` is not finite")));
    }
    Ok(x)
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.trim().parse().map_err(|_| config_err(key, format!("`{v}` is not a non-negative integer")))
}

impl ExperimentConfig {
    /// Defaults: `α = 314.159`, `θ = 0.01` (so `αθ ≈ π`), 1000 trials, seed 0.
    pub fn new(experiment: Experiment) -> Self {
        let (alpha, theta, eta) = match experiment {
            Experiment::ParityLossy => (314.159, 0.01, 0.1),
            Experiment::OracleCheck => (2.0, 0.3, 0.3),
            _ => (314.159, 0.01, 0.0),
        };
        Self {
            experiment,
            alpha,
            theta,
            eta,
            alpha_a: 1.0,
            xi: std::f64::consts::FRAC_PI_2,
            trials: 1000,
            seed: 0,
            measurement: ParityMeasurement::PhotonCount,
            input: InputState::Balanced,
            out: None,
            sweep: Vec::new(),
            target: Experiment::Detector,
        }
    }

    /// Set one key from its text form. Keys use `_` or `-` alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().replace('-', "_");
        let v = value.trim();
        match k.as_str() {
            "alpha" => self.alpha = parse_f64(&k, v)?,
            "theta" => self.theta = parse_f64(&k, v)?,
            "eta" => self.eta = parse_f64(&k, v)?,
            "alpha_a" => self.alpha_a = parse_f64(&k, v)?,
            "xi" => self.xi = parse_f64(&k, v)?,
            "trials" => self.trials = parse_u64(&k, v)?,
            "seed" => self.seed = parse_u64(&k, v)?,
            "measurement" => {
                self.measurement = match v {
                    "photon" => ParityMeasurement::PhotonCount,
                    "homodyne" => ParityMeasurement::HomodyneX0,
                    _ => return Err(config_err(&k, format!("`{v}` is not photon or homodyne"))),
                }
            }
            "input" => {
                self.input = match v {
                    "balanced" => InputState::Balanced,
                    "odd" => InputState::Odd,
                    "even" => InputState::Even,
                    _ => return Err(config_err(&k, format!("`{v}` is not balanced, odd or even"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(v)),
            "target" => {
                self.target = Experiment::from_name(v).ok_or_else(|| config_err(&k, format!("unknown experiment `{v}`")))?
            }
            "sweep" => {
                for part in v.split(';').filter(|p| !p.trim().is_empty()) {
                    self.sweep.push(parse_sweep(part)?);
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{}`", key.trim()))),
        }
        Ok(())
    }

    /// Read `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if self.alpha <= 0.0 {
            return Err(config_err("alpha", format!("{} must be positive", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(config_err("eta", format!("{} outside [0, 1]", self.eta)));
        }
        if !(0.0..=2.0).contains(&self.alpha_a) {
            return Err(config_err("alpha_a", format!("{} outside [0, 2]", self.alpha_a)));
        }
        if self.experiment == Experiment::Sweep {
            if self.sweep.is_empty() {
                return Err(config_err("sweep", "no parameter to sweep"));
            }
            if self.sweep.len() > MAX_SWEEP_AXES {
                return Err(config_err("sweep", format!("at most {MAX_SWEEP_AXES} parameters")));
            }
            if matches!(self.target, Experiment::Sweep | Experiment::OracleCheck) {
                return Err(config_err("target", format!("cannot sweep {}", self.target.name())));
            }
        } else if !self.sweep.is_empty() {
            return Err(config_err("sweep", "only valid for the sweep experiment"));
        }
        Ok(())
    }

    fn ideal_readout(&self) -> bool {
        self.eta == 0.0 && self.measurement == ParityMeasurement::PhotonCount
    }

    fn gate_config(&self) -> ParityGateConfig {
        ParityGateConfig::new(self.alpha, self.theta).with_eta(self.eta).with_measurement(self.measurement)
    }

    fn with_param(&self, p: SweepParam, v: f64) -> Self {
        let mut c = self.clone();
        match p {
            SweepParam::Alpha => c.alpha = v,
            SweepParam::Theta => c.theta = v,
            SweepParam::Eta => c.eta = v,
            SweepParam::AlphaA => c.alpha_a = v,
            SweepParam::Xi => c.xi = v,
            SweepParam::AlphaSinTheta => c.alpha = v / c.theta.sin(),
        }
        c
    }
}

fn parse_sweep(spec: &str) -> Result<SweepAxis> {
    let (name, list) = spec
        .split_once('=')
        .ok_or_else(|| config_err("sweep", format!("`{spec}` is not NAME=v1,v2,...")))?;
    let param = SweepParam::from_name(name.trim())
        .ok_or_else(|| config_err("sweep", format!("unknown parameter `{}`", name.trim())))?;
    let values = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64("sweep", s))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(config_err("sweep", format!("empty range for {}", param.name())));
    }
    Ok(SweepAxis { param, values })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

fn text(s: &str) -> Cell {
    Cell::Text(s.to_string())
}

fn flag(b: bool) -> Cell {
    Cell::Int(b as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

/// Empirical value set against its prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub name: String,
    pub analytic: Option<f64>,
    pub empirical: f64,
    pub stderr: f64,
}

impl Metric {
    /// `(empirical − analytic) / stderr`.
    pub fn z(&self) -> Option<f64> {
        let a = self.analytic?;
        // spreads at rounding level mean the value is deterministic
        if self.stderr > 1e-12 * a.abs().max(1.0) {
            Some((self.empirical - a) / self.stderr)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub config: ExperimentConfig,
    pub table: Table,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
    /// Failed checks; nonzero makes the command exit with status 1.
    pub failures: usize,
}

impl Report {
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.table.header)?;
        for row in &self.table.rows {
            out.write_record(row.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "# {} alpha={} theta={} eta={} alpha_a={} xi={} trials={} seed={}\n",
            c.experiment.name(),
            c.alpha,
            c.theta,
            c.eta,
            c.alpha_a,
            c.xi,
            c.trials,
            c.seed
        );
        if !self.metrics.is_empty() {
            s.push_str(&format!("{:<28} {:>14} {:>14} {:>12} {:>8}\n", "metric", "analytic", "empirical", "stderr", "z"));
        }
        let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        for m in &self.metrics {
            s.push_str(&format!(
                "{:<28} {:>14} {:>14} {:>12} {:>8}\n",
                m.name,
                num(m.analytic),
                format!("{:.6e}", m.empirical),
                format!("{:.3e}", m.stderr),
                m.z().map_or("-".to_string(), |z| format!("{z:.2}"))
            ));
        }
        for n in &self.notes {
            s.push_str(n);
            s.push('\n');
        }
        s
    }
}

/// The RNG for one trial: stream `trial` of the ChaCha20 generator seeded
/// by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(trial);
    r
}

fn par_trials<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha20Rng) -> Result<T> + Sync,
{
    (0..cfg.trials).into_par_iter().map(|i| f(i, &mut trial_rng(cfg.seed, i))).collect()
}

fn rate_metric(name: impl Into<String>, hits: usize, n: usize, analytic: Option<f64>) -> Metric {
    let p = hits as f64 / n as f64;
    let q = analytic.unwrap_or(p).clamp(0.0, 1.0);
    Metric { name: name.into(), analytic, empirical: p, stderr: (q * (1.0 - q) / n as f64).sqrt() }
}

fn mean_metric(name: impl Into<String>, xs: &[f64], analytic: Option<f64>) -> Option<Metric> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some(Metric { name: name.into(), analytic, empirical: mean, stderr: (var / n).sqrt() })
}

fn product(c: [Complex64; 2], d: [Complex64; 2]) -> [Complex64; 4] {
    [c[0] * d[0], c[0] * d[1], c[1] * d[0], c[1] * d[1]]
}

/// Normalized projection of `psi` onto one parity, `None` if it vanishes.
fn projected(psi: [Complex64; 4], parity: Parity) -> Option<[Complex64; 4]> {
    let zero = Complex64::new(0.0, 0.0);
    let v = match parity {
        Parity::Even => [psi[0], zero, zero, psi[3]],
        Parity::Odd => [zero, psi[1], psi[2], zero],
        Parity::Indeterminate => return None,
    };
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (n > 0.0).then(|| v.map(|z| z / n))
}

fn target_fidelity(rho: &DensityMatrix, target: Option<[Complex64; 4]>) -> Result<f64> {
    match target {
        Some(t) => analytics::fidelity(rho, &t),
        None => Ok(0.0),
    }
}

/// Probability that the homodyne parity readout mislabels either parity.
fn homodyne_parity_error(cfg: &ParityGateConfig) -> f64 {
    0.5 * libm::erfc(cfg.odd_homodyne_peak().abs() / (2.0 * SQRT_2))
}

/// Per-parity readout error `(even, odd)` of one parity gate.
fn readout_errors(cfg: &ExperimentConfig) -> (f64, f64) {
    match cfg.measurement {
        ParityMeasurement::PhotonCount => (0.0, analytics::parity_misclass(cfg.alpha, cfg.theta, cfg.eta)),
        ParityMeasurement::HomodyneX0 => {
            let e = homodyne_parity_error(&cfg.gate_config());
            (e, e)
        }
    }
}

fn run_detector(cfg: &ExperimentConfig) -> Result<Report> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let det = QndDetector::new(&[zero, one, zero], cfg.alpha, cfg.theta, cfg.xi)?;
    let trials = par_trials(cfg, |_, rng| Ok(det.sample_estimate(rng)))?;
    let mut table = Table::new(&["trial", "x", "estimate", "error"]);
    let mut errors = 0;
    for (i, &(n, x)) in trials.iter().enumerate() {
        errors += (n != 1) as usize;
        table.rows.push(vec![Cell::Int(i as u64), Cell::Float(x), Cell::Int(n as u64), flag(n != 1)]);
    }
    let exact = analytics::detector_misclassification(cfg.alpha, cfg.theta, cfg.xi, 1, 3).ok();
    let metrics = vec![rate_metric("misclassification", errors, trials.len(), exact)];
    let (_, bound) = analytics::homodyne_error(cfg.alpha, cfg.theta)?;
    let notes = vec![format!("erfc bound {bound:.6e}")];
    Ok(Report { config: cfg.clone(), table, metrics, notes, failures: 0 })
}

fn run_source(cfg: &ExperimentConfig) -> Result<Report> {
    let src = HeraldedSource::new(cfg.alpha_a, None, cfg.alpha, cfg.theta)?;
    let levels = src.detector().levels();
    let trials = par_trials(cfg, |_, rng| Ok(src.detector().sample_estimate(rng)))?;
    let mut table = Table::new(&["trial", "x", "herald_n", "heralded"]);
    let mut counts = vec![0usize; levels];
    for (i, &(n, x)) in trials.iter().enumerate() {
        counts[n] += 1;
        table.rows.push(vec![Cell::Int(i as u64), Cell::Float(x), Cell::Int(n as u64), flag(n == 1)]);
    }
    let metrics = (0..levels.min(4))
        .map(|n| rate_metric(format!("herald_{n}"), counts[n], trials.len(), Some(analytics::heralding_prob(cfg.alpha_a, n))))
        .collect();
    Ok(Report { config: cfg.clone(), table, metrics, notes: Vec::new(), failures: 0 })
}

fn run_parity(cfg: &ExperimentConfig) -> Result<Report> {
    let (c, d) = cfg.input.factors();
    let psi = product(c, d);
    let mut s = CoherentBranchState::new();
    let a = s.add_qubit(c)?;
    let b = s.add_qubit(d)?;
    let gcfg = cfg.gate_config();
    let prep = ParityGate::new(gcfg)?.prepare(&s, a, b)?;
    let fidelity_of = |value: OutcomeValue| -> Result<f64> {
        let (o, post) = prep.condition(value)?;
        if o.parity == Parity::Indeterminate {
            return Ok(f64::NAN);
        }
        target_fidelity(&post.reduced_density_matrix(&[a, b])?, projected(psi, o.parity))
    };
    let count_fidelity: Option<Vec<f64>> = match prep.count_distribution() {
        Some(dist) => Some(
            dist.iter()
                .enumerate()
                .map(|(n, &p)| if p > 0.0 { fidelity_of(OutcomeValue::PhotonCount(n)) } else { Ok(f64::NAN) })
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let trials = par_trials(cfg, |_, rng| {
        let value = prep.sample_value(rng);
        let f = match (value, &count_fidelity) {
            (OutcomeValue::PhotonCount(n), Some(t)) => t[n],
            _ => fidelity_of(value)?,
        };
        Ok((value, prep.classify(value), f))
    })?;

    let mut table = Table::new(&["trial", "parity", "value", "fidelity"]);
    let mut even = 0;
    let mut odd_counts = Vec::new();
    let mut even_fid = Vec::new();
    let mut odd_fid = Vec::new();
    for (i, &(value, parity, f)) in trials.iter().enumerate() {
        let v = match value {
            OutcomeValue::PhotonCount(n) => n as f64,
            OutcomeValue::Quadrature(x) => x,
        };
        match parity {
            Parity::Even => {
                even += 1;
                even_fid.push(f);
            }
            Parity::Odd => {
                odd_fid.push(f);
                if let OutcomeValue::PhotonCount(n) = value {
                    odd_counts.push(n as f64);
                }
            }
            Parity::Indeterminate => {}
        }
        table.rows.push(vec![Cell::Int(i as u64), text(parity.as_str()), Cell::Float(v), Cell::Float(f)]);
    }

    let w_even = psi[0].norm_sqr() + psi[3].norm_sqr();
    let w_odd = 1.0 - w_even;
    let (e_even, e_odd) = readout_errors(cfg);
    let loss = analytics::loss_params(cfg.eta, cfg.alpha, cfg.theta)?;
    let mut metrics = vec![rate_metric("p_even", even, trials.len(), Some(w_even * (1.0 - e_even) + w_odd * e_odd))];
    if cfg.measurement == ParityMeasurement::PhotonCount {
        metrics.extend(mean_metric("mean_odd_photons", &odd_counts, Some(loss.mean_odd_photons)));
    }
    for (parity, fids) in [(Parity::Even, &even_fid), (Parity::Odd, &odd_fid)] {
        let predicted = match projected(psi, parity) {
            Some(t) if cfg.measurement == ParityMeasurement::PhotonCount => analytics::predicted_mixture(c, d, cfg.eta, cfg.alpha, cfg.theta, parity)
                .and_then(|rho| analytics::fidelity(&rho, &t))
                .ok(),
            _ => None,
        };
        metrics.extend(mean_metric(format!("fidelity_{}", parity.as_str()), fids, predicted));
    }
    if cfg.input == InputState::Balanced {
        let (_, post) = prep.condition(prep.representative(Parity::Even)?)?;
        let rho = post.reduced_density_matrix(&[a, b])?;
        let coherence = 2.0 * rho.entry(0, 3).norm() / (rho.entry(0, 0).re + rho.entry(3, 3).re);
        metrics.push(Metric {
            name: "even_coherence".into(),
            analytic: Some((-loss.gamma).exp()),
            empirical: coherence,
            stderr: 0.0,
        });
    }
    Ok(Report { config: cfg.clone(), table, metrics, notes: Vec::new(), failures: 0 })
}

fn run_cnot(cfg: &ExperimentConfig) -> Result<Report> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let control = match cfg.input {
        InputState::Balanced => [h, h],
        InputState::Even => [one, zero],
        InputState::Odd => [zero, one],
    };
    let target = [one, zero];
    let mut s = CoherentBranchState::new();
    let c = s.add_qubit(control)?;
    let t = s.add_qubit(target)?;
    let ideal = cnot_target(product(control, target));
    let gcfg = cfg.gate_config();
    let runs = par_trials(cfg, |_, rng| {
        let run = cnot(&s, c, t, &gcfg, rng)?;
        let f = if run.failed {
            f64::NAN
        } else {
            analytics::fidelity(&run.state.reduced_density_matrix(&[c, t])?, &ideal)?
        };
        Ok((run.outcomes, run.failed, f))
    })?;
    let mut table =
        Table::new(&["trial", "bell", "first", "ancilla_a", "second", "ancilla_b", "failed", "fidelity"]);
    let mut fids = Vec::new();
    let mut failed = 0;
    for (i, (o, fail, f)) in runs.iter().enumerate() {
        if *fail {
            failed += 1;
        } else {
            fids.push(*f);
        }
        table.rows.push(vec![
            Cell::Int(i as u64),
            text(o.bell.as_str()),
            text(o.first.as_str()),
            Cell::Int(o.ancilla_a as u64),
            text(o.second.as_str()),
            Cell::Int(o.ancilla_b as u64),
            flag(*fail),
            Cell::Float(*f),
        ]);
    }
    let ideal_gate = cfg.ideal_readout();
    let mut metrics = vec![rate_metric("failure_rate", failed, runs.len(), None)];
    metrics.extend(mean_metric("fidelity", &fids, ideal_gate.then_some(1.0)));
    Ok(Report { config: cfg.clone(), table, metrics, notes: Vec::new(), failures: 0 })
}

fn run_bellmeas(cfg: &ExperimentConfig) -> Result<Report> {
    let gcfg = cfg.gate_config();
    let runs = par_trials(cfg, |i, rng| {
        let input = BellIndex::ALL[(i % 4) as usize];
        let mut s = CoherentBranchState::new();
        let q = s.add_qubits(2, &input.amplitudes())?;
        let m = bell_measurement(&s, q[0], q[1], &gcfg, rng)?;
        let f = match m.index {
            Some(idx) => analytics::fidelity(&m.state.reduced_density_matrix(&q)?, &idx.amplitudes())?,
            None => f64::NAN,
        };
        let second = m.second.as_ref().map_or(Parity::Indeterminate, |o| o.parity);
        Ok((input, m.first.parity, second, m.index, f))
    })?;
    let mut table = Table::new(&["trial", "input", "first", "second", "identified", "correct", "fidelity"]);
    let mut correct = 0;
    let mut fids = Vec::new();
    for (i, (input, p1, p2, idx, f)) in runs.iter().enumerate() {
        let ok = *idx == Some(*input);
        correct += ok as usize;
        if idx.is_some() {
            fids.push(*f);
        }
        table.rows.push(vec![
            Cell::Int(i as u64),
            text(input.name()),
            text(p1.as_str()),
            text(p2.as_str()),
            text(idx.map_or("none", BellIndex::name)),
            flag(ok),
            Cell::Float(*f),
        ]);
    }
    let (e_even, e_odd) = readout_errors(cfg);
    let gate_ok = |p: Parity| if p == Parity::Odd { 1.0 - e_odd } else { 1.0 - e_even };
    let signatures = [(Parity::Even, Parity::Even), (Parity::Even, Parity::Odd), (Parity::Odd, Parity::Even), (Parity::Odd, Parity::Odd)];
    let predicted = signatures.iter().map(|&(p, q)| gate_ok(p) * gate_ok(q)).sum::<f64>() / 4.0;
    let mut metrics = vec![rate_metric("identified_correctly", correct, runs.len(), Some(predicted))];
    metrics.extend(mean_metric("fidelity", &fids, cfg.ideal_readout().then_some(1.0)));
    Ok(Report { config: cfg.clone(), table, metrics, notes: Vec::new(), failures: 0 })
}

fn run_fusion(cfg: &ExperimentConfig) -> Result<Report> {
    let gcfg = cfg.gate_config();
    let runs = par_trials(cfg, |_, rng| {
        let mut s = CoherentBranchState::new();
        let c1 = Cluster::linear(&mut s, 2)?;
        let c2 = Cluster::linear(&mut s, 2)?;
        let q: Vec<_> = c1.qubits().into_iter().chain(c2.qubits()).collect();
        let mut cluster = c1.union(c2);
        let r = fuse_clusters(&mut s, &mut cluster, q[1], q[2], &gcfg, rng)?;
        let stab = stabilizer_expectations(&s, &cluster)?;
        let min = stab.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((r.outcome.parity, r.fused, min))
    })?;
    let mut table = Table::new(&["trial", "parity", "fused", "min_stabilizer"]);
    let mut fused = 0;
    let mut mins = Vec::new();
    for (i, &(p, f, m)) in runs.iter().enumerate() {
        if f {
            fused += 1;
            mins.push(m);
        }
        table.rows.push(vec![Cell::Int(i as u64), text(p.as_str()), flag(f), Cell::Float(m)]);
    }
    let no_window = cfg.measurement == ParityMeasurement::PhotonCount;
    let mut metrics = vec![rate_metric("fused", fused, runs.len(), no_window.then_some(1.0))];
    metrics.extend(mean_metric("min_stabilizer", &mins, cfg.ideal_readout().then_some(1.0)));
    Ok(Report { config: cfg.clone(), table, metrics, notes: Vec::new(), failures: 0 })
}

fn run_oracle_check(cfg: &ExperimentConfig) -> Result<Report> {
    let checks = oracle::equivalence_checks(cfg.alpha, cfg.theta, cfg.eta)?;
    let mut table = Table::new(&["check", "value", "tolerance", "pass"]);
    let mut notes = Vec::new();
    let mut failures = 0;
    for c in &checks {
        failures += !c.passed() as usize;
        table.rows.push(vec![text(c.name), Cell::Float(c.value), Cell::Float(c.tolerance), flag(c.passed())]);
        notes.push(format!(
            "{:<24} {:.3e} <= {:.0e} {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed() { "PASS" } else { "FAIL" }
        ));
    }
    let phase = oracle::displacement_phase(cfg.alpha, cfg.theta)?;
    notes.push(format!("displacement phase {phase:.12} vs +alpha^2 sin(theta) {:.12}", cfg.alpha * cfg.alpha * cfg.theta.sin()));
    Ok(Report { config: cfg.clone(), table, metrics: Vec::new(), notes, failures })
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let mut points: Vec<(Vec<f64>, ExperimentConfig)> = vec![(Vec::new(), ExperimentConfig { experiment: cfg.target, sweep: Vec::new(), ..cfg.clone() })];
    for axis in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|(vals, c)| {
                axis.values.iter().map(move |&v| {
                    let mut vals = vals.clone();
                    vals.push(v);
                    (vals, c.with_param(axis.param, v))
                })
            })
            .collect();
    }
    let mut header: Vec<&str> = cfg.sweep.iter().map(|a| a.param.name()).collect();
    header.extend(["metric", "analytic", "empirical", "stderr"]);
    let mut table = Table::new(&header);
    let mut metrics = Vec::new();
    for (vals, point) in points {
        point.validate()?;
        let r = run(&point)?;
        let label: Vec<String> =
            cfg.sweep.iter().zip(&vals).map(|(a, v)| format!("{}={v}", a.param.name())).collect();
        for m in r.metrics {
            let mut row: Vec<Cell> = vals.iter().map(|&v| Cell::Float(v)).collect();
            row.push(text(&m.name));
            row.push(Cell::Float(m.analytic.unwrap_or(f64::NAN)));
            row.push(Cell::Float(m.empirical));
            row.push(Cell::Float(m.stderr));
            table.rows.push(row);
            metrics.push(Metric { name: format!("{} {}", label.join(" "), m.name), ..m });
        }
    }
    Ok(Report { config: cfg.clone(), table, metrics, notes: Vec::new(), failures: 0 })
}

/// Run one experiment. The configuration is validated first.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Detector => run_detector(cfg),
        Experiment::Source => run_source(cfg),
        Experiment::Parity | Experiment::ParityLossy => run_parity(cfg),
        Experiment::Cnot => run_cnot(cfg),
        Experiment::BellMeas => run_bellmeas(cfg),
        Experiment::Fusion => run_fusion(cfg),
        Experiment::OracleCheck => run_oracle_check(cfg),
        Experiment::Sweep => run_sweep(cfg),
    }
}

#[derive(Debug, Parser)]
#[command(name = "kerrbus", version, about = "Seeded cross-Kerr bus experiments with CSV output")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// QND detection of a single photon
    Detector(Flags),
    /// Heralded single photons from a weak coherent state
    Source(Flags),
    /// Two-qubit parity gate
    Parity(Flags),
    /// Parity gate with bus loss
    ParityLossy(Flags),
    /// CNOT from parity gates
    Cnot(Flags),
    /// Bell-state measurement
    Bellmeas(Flags),
    /// Fusion of two cluster fragments
    Fusion(Flags),
    /// Branch simulator against the Fock oracle
    OracleCheck(Flags),
    /// Grid over one or two parameters
    Sweep(Flags),
}

#[derive(Debug, Default, Args)]
struct Flags {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    #[arg(long = "alpha-a", allow_hyphen_values = true)]
    alpha_a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// photon or homodyne
    #[arg(long)]
    measurement: Option<String>,
    /// balanced, odd or even
    #[arg(long)]
    input: Option<String>,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of `key = value` lines; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// NAME=v1,v2,... (repeat for a second axis)
    #[arg(long, value_name = "NAME=VALUES", allow_hyphen_values = true)]
    sweep: Vec<String>,
    /// Experiment run at each sweep point
    #[arg(long)]
    target: Option<String>,
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Command::Detector(f) => (Experiment::Detector, f),
            Command::Source(f) => (Experiment::Source, f),
            Command::Parity(f) => (Experiment::Parity, f),
            Command::ParityLossy(f) => (Experiment::ParityLossy, f),
            Command::Cnot(f) => (Experiment::Cnot, f),
            Command::Bellmeas(f) => (Experiment::BellMeas, f),
            Command::Fusion(f) => (Experiment::Fusion, f),
            Command::OracleCheck(f) => (Experiment::OracleCheck, f),
            Command::Sweep(f) => (Experiment::Sweep, f),
        }
    }
}

fn resolve(experiment: Experiment, flags: Flags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(experiment);
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    let pairs = [
        ("alpha", flags.alpha),
        ("theta", flags.theta),
        ("eta", flags.eta),
        ("alpha_a", flags.alpha_a),
        ("xi", flags.xi),
        ("trials", flags.trials),
        ("seed", flags.seed),
        ("measurement", flags.measurement),
        ("input", flags.input),
        ("target", flags.target),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(out) = flags.out {
        cfg.out = Some(out);
    }
    if !flags.sweep.is_empty() {
        cfg.sweep = flags.sweep.iter().map(|s| parse_sweep(s)).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a command line into a configuration.
pub fn parse_args<I, T>(args: I) -> std::result::Result<ExperimentConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Clap)?;
    let (experiment, flags) = cli.command.split();
    resolve(experiment, flags).map_err(CliError::Config)
}

#[derive(Debug)]
pub enum CliError {
    Clap(clap::Error),
    Config(Error),
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidLoss(_) | Error::OracleRegime(_)
    )
}

/// Entry point of the `kerrbus` binary. Exit status 2 for a bad
/// configuration, 1 for a failed run or failed checks.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_args(args) {
        Ok(c) => c,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if is_config_error(&e) { 2 } else { 1 });
        }
    };
    let written = match &cfg.out {
        Some(path) => std::fs::File::create(path).map_err(Error::from).and_then(|f| report.write_csv(io::BufWriter::new(f))),
        None => report.write_csv(io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    eprint!("{}", report.summary());
    if report.failures > 0 {
        eprintln!("{} check(s) failed", report.failures);
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
