//! JSON run configuration.
//!
//! Every section and key is optional apart from the domain sizes. Parsing
//! fills in defaults explicitly, so printing a parsed config shows every value
//! the run will use, and parsing that output gives back the same config.

use serde::{Deserialize, Serialize};
use zk_core::{DomainConfig, ForcingTerm, SolverConfig, TransverseBc};

use crate::error::{AppError, Result};

/// Relative slack when checking that `dt` divides `T`.
const DIVIDES_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSection {
    pub d: usize,
    pub n_x: usize,
    pub n_perp: usize,
    #[serde(default)]
    pub quad_x: Option<usize>,
    #[serde(default)]
    pub quad_perp: Option<usize>,
    #[serde(default = "default_bc")]
    pub transverse_bc: TransverseBc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "yes")]
    pub nonlinearity_on: bool,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub forcing: Vec<ForcingTerm>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: default_dt(),
            t_final: default_t(),
            epsilon: 0.0,
            c: 0.0,
            nonlinearity_on: true,
            record_every: 1,
            forcing: Vec::new(),
        }
    }
}

/// Initial datum: explicit coefficients, or a random smooth field
/// `amplitude · N(0,1) / (1 + λ_i/λ_1)` drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            amplitude: default_amplitude(),
            seed: 0,
            coefficients: None,
        }
    }
}

/// Gain sequence: `"geometric:r"` for `r, r², …` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainRule {
    Rule(String),
    List(Vec<f64>),
}

impl GainRule {
    pub fn gains(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            GainRule::List(v) => {
                if v.len() != k {
                    return Err(AppError::Config(format!(
                        "gain list has {} entries but noise.K = {k}",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
            GainRule::Rule(s) => {
                let r = s
                    .strip_prefix("geometric:")
                    .and_then(|r| r.trim().parse::<f64>().ok())
                    .filter(|r| r.is_finite())
                    .ok_or_else(|| {
                        AppError::Config(format!("gain rule {s:?} is not \"geometric:<r>\" or a list"))
                    })?;
                Ok((1..=k).map(|i| r.powi(i as i32)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    #[serde(rename = "K", default)]
    pub k: Option<usize>,
    #[serde(default = "default_gain")]
    pub alpha: GainRule,
    #[serde(default = "default_gain")]
    pub beta: GainRule,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            k: None,
            alpha: default_gain(),
            beta: default_gain(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSection {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_moments")]
    pub moments: Vec<f64>,
    #[serde(default)]
    pub sweep: Vec<SweepSpec>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            m: default_m(),
            master_seed: None,
            workers: 1,
            moments: default_moments(),
            sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Ndjson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Write a field snapshot every this many recorded states; 0 keeps only
    /// the initial and final states.
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            snapshot_stride: 0,
            format: default_format(),
        }
    }
}

fn default_bc() -> TransverseBc {
    TransverseBc::Dirichlet
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_amplitude() -> f64 {
    0.5
}
fn default_gain() -> GainRule {
    GainRule::Rule("geometric:0.5".to_string())
}
fn default_m() -> usize {
    100
}
fn default_moments() -> Vec<f64> {
    vec![2.0, 6.0]
}
fn default_dir() -> String {
    "out".to_string()
}
fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

/// Key reference printed by `--help`.
pub const CONFIG_HELP: &str = "\
CONFIG KEYS (JSON; unknown keys are rejected)
  domain.d                 transverse dimensions, 1 or 2          (required)
  domain.n_x               x-modes                                (required)
  domain.n_perp            modes per transverse direction         (required)
  domain.quad_x            x quadrature nodes                     4*n_x+24
  domain.quad_perp         transverse quadrature nodes            3*n_perp+24
  domain.transverse_bc     \"dirichlet\" or \"periodic\"              dirichlet
  solver.dt                time step                              0.001
  solver.T                 final time (dt must divide it)         1.0
  solver.epsilon           fourth-order regularization            0
  solver.c                 advection constant                     0
  solver.nonlinearity_on   include u u_x                          true
  solver.record_every      keep every k-th state                  1
  solver.forcing           [{mode, amplitude, omega}] cosines     []
  initial.amplitude        scale of the random smooth datum       0.5
  initial.seed             seed of the random datum               0
  initial.coefficients     explicit datum, overrides the above    (none)
  noise.K                  noise channels                         n/4
  noise.alpha              multiplicative gains, \"geometric:r\" or list  geometric:0.5
  noise.beta               additive gains, same forms             geometric:0.5
  noise.seed               master noise seed                      0
  ensemble.M               trajectories                           100
  ensemble.master_seed     ensemble seed                          noise.seed
  ensemble.workers         worker threads                         1
  ensemble.moments         exponents p for E sup|u|^p             [2, 6]
  ensemble.sweep           [{parameter: epsilon|n|dt, values}]    []
  output.dir               output directory                       out
  output.snapshot_stride   snapshot every k-th recorded state     0 (first and last)
  output.format            report format, csv or ndjson           csv
";

/// Parse, reject unknown keys, fill defaults and validate.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut unknown = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| AppError::Config(e.to_string()))?;
    if !unknown.is_empty() {
        return Err(AppError::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

pub fn print_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

impl RunConfig {
    /// Replace every unset derived default by its value.
    pub fn resolve(&mut self) {
        let d = &mut self.domain;
        d.quad_x.get_or_insert(DomainConfig::default_quad_x(d.n_x));
        d.quad_perp.get_or_insert(DomainConfig::default_quad_perp(d.n_perp));
        let n = self.domain_config().mode_count();
        self.noise.k.get_or_insert(n / 4);
        self.ensemble.master_seed.get_or_insert(self.noise.seed);
    }

    pub fn domain_config(&self) -> DomainConfig {
        let d = &self.domain;
        let mut dc = DomainConfig::new(d.d, d.n_x, d.n_perp, d.transverse_bc);
        if let Some(q) = d.quad_x {
            dc.quad_x = q;
        }
        if let Some(q) = d.quad_perp {
            dc.quad_perp = q;
        }
        dc
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let mut cfg = SolverConfig::new(s.dt, s.t_final);
        cfg.epsilon = s.epsilon;
        cfg.c = s.c;
        cfg.nonlinear = s.nonlinearity_on;
        cfg.record_every = s.record_every;
        cfg.forcing.terms = s.forcing.clone();
        cfg
    }

    pub fn noise_k(&self) -> usize {
        self.noise.k.unwrap_or(self.domain_config().mode_count() / 4)
    }

    pub fn master_seed(&self) -> u64 {
        self.ensemble.master_seed.unwrap_or(self.noise.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let dc = self.domain_config();
        dc.validate()?;
        let n = dc.mode_count();
        let k = self.noise_k();
        if k > n {
            return Err(AppError::Config(format!("noise.K = {k} exceeds the mode count {n}")));
        }
        self.noise.alpha.gains(k).map_err(|e| prefix("noise.alpha", e))?;
        self.noise.beta.gains(k).map_err(|e| prefix("noise.beta", e))?;
        let s = &self.solver;
        check_divides("solver.dt", s.dt, s.t_final)?;
        self.solver_config().validate()?;
        self.solver_config().forcing.validate(n)?;
        if let Some(c) = &self.initial.coefficients {
            if c.len() != n {
                return Err(AppError::Config(format!(
                    "initial.coefficients has {} entries, the basis has {n}",
                    c.len()
                )));
            }
        }
        if !self.initial.amplitude.is_finite() {
            return Err(AppError::Config("initial.amplitude must be finite".into()));
        }
        let e = &self.ensemble;
        if e.m == 0 {
            return Err(AppError::Config("ensemble.M must be at least 1".into()));
        }
        if e.workers == 0 {
            return Err(AppError::Config("ensemble.workers must be at least 1".into()));
        }
        if e.moments.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(AppError::Config("ensemble.moments must be positive".into()));
        }
        for sw in &e.sweep {
            self.validate_sweep(sw)?;
        }
        Ok(())
    }

    fn validate_sweep(&self, sw: &SweepSpec) -> Result<()> {
        let bad = |why: &str| Err(AppError::Config(format!("ensemble.sweep {}: {why}", sw.parameter)));
        if sw.values.is_empty() {
            return bad("no values");
        }
        match sw.parameter.as_str() {
            "epsilon" => {
                if sw.values.iter().any(|v| !(*v >= 0.0)) || sw.values.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad("values must be nonnegative and strictly decreasing");
                }
                if *sw.values.last().unwrap() != 0.0 {
                    return bad("values must end at 0");
                }
            }
            "n" => {
                if sw.values.iter().any(|v| !(*v >= 1.0) || v.fract() != 0.0) {
                    return bad("values must be positive integers");
                }
                if sw.values.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("values must be strictly increasing");
                }
            }
            "dt" => {
                if sw.values.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad("values must be strictly decreasing");
                }
                let finest = *sw.values.last().unwrap();
                for &v in &sw.values {
                    check_divides("ensemble.sweep dt", v, self.solver.t_final)?;
                    check_divides("ensemble.sweep dt (finest)", finest, v)?;
                }
            }
            other => {
                return Err(AppError::Config(format!(
                    "ensemble.sweep parameter {other:?} is not one of epsilon, n, dt"
                )))
            }
        }
        Ok(())
    }
}

fn prefix(field: &str, e: AppError) -> AppError {
    match e {
        AppError::Config(m) => AppError::Config(format!("{field}: {m}")),
        other => other,
    }
}

fn check_divides(field: &str, dt: f64, t: f64) -> Result<()> {
    if !(dt > 0.0) || !(t > 0.0) {
        return Err(AppError::Config(format!("{field} = {dt} and T = {t} must be positive")));
    }
    let ratio = t / dt;
    if (ratio - ratio.round()).abs() > DIVIDES_TOL * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(AppError::Config(format!("{field} = {dt} does not divide {t}")));
    }
    Ok(())
}
