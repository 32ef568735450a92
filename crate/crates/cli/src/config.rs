//! Experiment configuration files.
//!
//! A config is a flat TOML table. Every experiment reads a subset of the
//! keys below; keys it needs but which are absent are reported by name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use symquad_core::sampling::DistributionName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ApproxRates,
    QuadSweep,
    RandomSweep,
    Compare,
    Drift,
    RegularitySweep,
    DistributionsPreview,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ApproxRates,
        Experiment::QuadSweep,
        Experiment::RandomSweep,
        Experiment::Compare,
        Experiment::Drift,
        Experiment::RegularitySweep,
        Experiment::DistributionsPreview,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::ApproxRates => "approx-rates",
            Experiment::QuadSweep => "quad-sweep",
            Experiment::RandomSweep => "random-sweep",
            Experiment::Compare => "compare",
            Experiment::Drift => "drift",
            Experiment::RegularitySweep => "regularity-sweep",
            Experiment::DistributionsPreview => "distributions-preview",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::ApproxRates => {
                "test error vs model degree for full, invariant and symmetrized fits of an analytic invariant target"
            }
            Experiment::QuadSweep => "symmetrization and test error vs degree of exactness of a quadrature augmentation",
            Experiment::RandomSweep => {
                "symmetrization error and its Schur bound vs number of Haar-random augmentation rotations"
            }
            Experiment::Compare => "quadrature vs random augmentation at equal rotation budgets",
            Experiment::Drift => {
                "angular-momentum drift and hitting times of Verlet dynamics under perturbed invariant potentials"
            }
            Experiment::RegularitySweep => {
                "random-augmentation symmetrization error for targets of algebraic coefficient decay at low and high degree"
            }
            Experiment::DistributionsPreview => "samples and marginal statistics of every data distribution",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Experiment::ApproxRates => &["d", "degrees", "distributions", "n_train", "n_test"],
            Experiment::QuadSweep => &["d", "degrees", "distributions", "n_train", "n_test", "quad_degrees"],
            Experiment::RandomSweep => &["d", "degrees", "distributions", "n_train", "n_test", "t_values"],
            Experiment::Compare => &["d", "degrees", "distributions", "n_train", "n_test", "quad_degrees"],
            Experiment::Drift => &["eps", "steps"],
            Experiment::RegularitySweep => &["d", "degrees", "distributions", "n_train", "n_test", "t_values", "powers"],
            Experiment::DistributionsPreview => &["d", "distributions", "n_train"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Syntax(String),
    Missing { experiment: Experiment, field: &'static str },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Syntax(e) => write!(f, "malformed config: {e}"),
            ConfigError::Missing { experiment, field } => {
                write!(f, "experiment {experiment} requires field `{field}`")
            }
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed experiment configuration. Optional keys fall back to the
/// defaults documented on each accessor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    /// Label used for output file names; defaults to the experiment id.
    pub name: Option<String>,
    pub d: Option<usize>,
    pub degrees: Option<Vec<usize>>,
    pub distributions: Option<Vec<String>>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    /// Degrees of exactness of the quadrature rules.
    pub quad_degrees: Option<Vec<usize>>,
    /// Numbers of random rotations.
    pub t_values: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Absolute singular-value cutoff; overrides the per-distribution default.
    pub cutoff: Option<f64>,
    /// Exponential decay rate of target coefficients.
    pub alpha: Option<f64>,
    /// Algebraic decay exponents, one target class each.
    pub powers: Option<Vec<f64>>,
    /// Degree of the generating target.
    pub target_degree: Option<usize>,
    pub kappa: Option<f64>,
    pub sigma: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub steps: Option<u64>,
    pub dt: Option<f64>,
    pub record_every: Option<u64>,
    pub hit_targets: Option<Vec<f64>>,
    /// Number of initial conditions for drift runs.
    pub seeds: Option<usize>,
    /// `default` or `random` initial conditions for drift runs.
    pub initial: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub plot: Option<bool>,
    /// Whether random sweeps also compute the Schur bound.
    pub schur: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("validated config has an experiment")
    }

    fn has(&self, field: &str) -> bool {
        match field {
            "d" => self.d.is_some(),
            "degrees" => self.degrees.is_some(),
            "distributions" => self.distributions.is_some(),
            "n_train" => self.n_train.is_some(),
            "n_test" => self.n_test.is_some(),
            "quad_degrees" => self.quad_degrees.is_some(),
            "t_values" => self.t_values.is_some(),
            "powers" => self.powers.is_some(),
            "eps" => self.eps.is_some(),
            "steps" => self.steps.is_some(),
            _ => unreachable!("unknown required field {field}"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let experiment = self.experiment.ok_or_else(|| ConfigError::Invalid("missing field `experiment`".into()))?;
        for field in experiment.required() {
            if !self.has(field) {
                return Err(ConfigError::Missing { experiment, field });
            }
        }
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if let Some(d) = self.d {
            if d != 1 && d != 2 {
                return invalid(format!("`d` must be 1 or 2, got {d}"));
            }
        }
        for (name, list) in [
            ("degrees", &self.degrees),
            ("quad_degrees", &self.quad_degrees),
            ("t_values", &self.t_values),
        ] {
            if let Some(v) = list {
                if v.is_empty() {
                    return invalid(format!("`{name}` must not be empty"));
                }
            }
        }
        if self.t_values.as_ref().is_some_and(|t| t.contains(&0)) {
            return invalid("`t_values` entries must be at least 1".into());
        }
        for (name, v) in [("n_train", self.n_train), ("n_test", self.n_test), ("trials", self.trials), ("seeds", self.seeds)] {
            if v == Some(0) {
                return invalid(format!("`{name}` must be at least 1"));
            }
        }
        if self.steps == Some(0) || self.record_every == Some(0) {
            return invalid("`steps` and `record_every` must be at least 1".into());
        }
        if let Some(names) = &self.distributions {
            if names.is_empty() {
                return invalid("`distributions` must not be empty".into());
            }
            for n in names {
                let parsed: DistributionName = n.parse().map_err(|e| ConfigError::Invalid(format!("{e}")))?;
                if let Some(d) = self.d {
                    if !parsed.valid_for(d) {
                        return invalid(format!("distribution {n} is not defined for d={d}"));
                    }
                }
            }
        }
        if let Some(e) = &self.eps {
            if e.is_empty() || e.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return invalid("`eps` must be a nonempty list of nonnegative numbers".into());
            }
        }
        if self.dt.is_some_and(|dt| !(dt > 0.0 && dt.is_finite())) {
            return invalid("`dt` must be positive".into());
        }
        if self.cutoff.is_some_and(|c| !(c >= 0.0 && c.is_finite())) {
            return invalid("`cutoff` must be nonnegative".into());
        }
        if let Some(init) = &self.initial {
            if init != "default" && init != "random" {
                return invalid(format!("`initial` must be \"default\" or \"random\", got {init:?}"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment().id().to_string())
    }

    pub fn d(&self) -> usize {
        self.d.unwrap_or(1)
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.degrees.clone().unwrap_or_default()
    }

    pub fn distributions(&self) -> Vec<DistributionName> {
        self.distributions
            .iter()
            .flatten()
            .map(|n| n.parse().expect("validated distribution"))
            .collect()
    }

    pub fn n_train(&self) -> usize {
        self.n_train.unwrap_or(800)
    }

    pub fn n_test(&self) -> usize {
        self.n_test.unwrap_or(200)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(1)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Defaults to 2.
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(2.0)
    }

    /// Defaults to 30 on the circle and 11 on the sphere.
    pub fn target_degree(&self) -> usize {
        self.target_degree.unwrap_or(if self.d() == 1 { 30 } else { 11 })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(symquad_core::sampling::DEFAULT_KAPPA)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(symquad_core::sampling::DEFAULT_SIGMA)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(symquad_core::dynamics::DEFAULT_DT)
    }

    pub fn record_every(&self) -> u64 {
        self.record_every.unwrap_or(100)
    }

    pub fn hit_targets(&self) -> Vec<f64> {
        self.hit_targets.clone().unwrap_or_else(|| vec![1e-4, 1e-3, 1e-2, 1e-1])
    }

    pub fn seeds(&self) -> usize {
        self.seeds.unwrap_or(1)
    }

    pub fn random_initial(&self) -> bool {
        self.initial.as_deref() == Some("random")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn plot(&self) -> bool {
        self.plot.unwrap_or(true)
    }

    pub fn schur(&self) -> bool {
        self.schur.unwrap_or(true)
    }

    /// SHA-256 of the canonical serialization without `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// SVD cutoff used for an unaugmented fit when none is configured.
pub fn default_cutoff(d: usize, dist: DistributionName) -> f64 {
    match (d, dist) {
        (1, DistributionName::DsUu) => 10f64.powf(-4.5),
        (2, DistributionName::DsUu) => 10f64.powf(-3.4),
        (2, DistributionName::DsH1sU) => 1e-5,
        _ => 0.0,
    }
}
