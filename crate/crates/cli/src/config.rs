//! The experiment configuration file (TOML) and flag overrides.

use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use majority::strategy::{Extreme, Strategy, DEFAULT_MAX_TIME};
use majority::DiffusionSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable that replaces the built-in default seed.
pub const SEED_ENV: &str = "MAJORITY_SEED";
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Monte Carlo decision times under a list of strategies
    Simulate,
    /// Sweep the closed-form value function and its residuals over a grid
    Value,
    /// Compare perturbed Brownian exit times with run-the-middle decision times
    Dpbm,
    /// Optimal query costs of the recursive majority tree
    Tree,
    /// Run the invariant suite
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Value => "value",
            Command::Dpbm => "dpbm",
            Command::Tree => "tree",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub format: Format,
    pub out: PathBuf,
    pub spec: DiffusionSpec,
    pub simulate: SimulateConfig,
    pub value: ValueConfig,
    pub dpbm: DpbmConfig,
    pub tree: TreeConfig,
    pub check: CheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            format: Format::Json,
            out: PathBuf::from("results"),
            spec: DiffusionSpec::brownian(),
            simulate: SimulateConfig::default(),
            value: ValueConfig::default(),
            dpbm: DpbmConfig::default(),
            tree: TreeConfig::default(),
            check: CheckConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: [f64; 3],
    pub paths: u64,
    pub step: f64,
    pub horizon: f64,
    pub strategies: Vec<Strategy>,
    /// Rates at which `E[e^{−rτ}]` is reported.
    pub r: Vec<f64>,
    /// Also write one row per path.
    pub samples: bool,
    /// Full trajectories of the first this many paths of each strategy.
    pub record_paths: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            x0: [0.3, 0.5, 0.7],
            paths: 10_000,
            step: 1e-4,
            horizon: DEFAULT_MAX_TIME,
            strategies: vec![
                Strategy::run_the_middle(),
                Strategy::run_two_then_third(0, 1),
                Strategy::round_robin(0.01),
                Strategy::run_extreme(Extreme::Max),
            ],
            r: vec![1.0],
            samples: false,
            record_paths: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueConfig {
    pub r: Vec<f64>,
    /// Explicit grid points; when absent the full lattice `{k/(n−1)}³` is used.
    pub points: Option<Vec<[f64; 3]>>,
    pub lattice: usize,
    /// Spacing of the second-difference stencil.
    pub delta: f64,
    /// Spacing of the one-sided derivative stencils across switching planes.
    pub pasting_delta: f64,
}

impl Default for ValueConfig {
    fn default() -> Self {
        Self {
            r: vec![1.0],
            points: None,
            lattice: 11,
            delta: 1e-3,
            pasting_delta: 1e-4,
        }
    }
}

impl ValueConfig {
    pub fn grid(&self) -> Vec<[f64; 3]> {
        match &self.points {
            Some(p) => p.clone(),
            None => {
                let n = self.lattice;
                let at = |k: usize| k as f64 / (n - 1) as f64;
                let mut grid = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            grid.push([at(a), at(b), at(c)]);
                        }
                    }
                }
                grid
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpbmConfig {
    pub x0: [f64; 3],
    pub paths: u64,
    pub step: f64,
    pub replications: u64,
    /// Seeds of the two arms; derived from the global seed when absent.
    pub perturbed_seed: Option<u64>,
    pub middle_seed: Option<u64>,
    /// Gaps `(below, above)` for the perturbed arm instead of those of `x0`.
    pub gaps: Option<[f64; 2]>,
    pub samples: bool,
}

impl Default for DpbmConfig {
    fn default() -> Self {
        Self {
            x0: [0.2, 0.5, 0.8],
            paths: 10_000,
            step: 1e-4,
            replications: 1,
            perturbed_seed: None,
            middle_seed: None,
            gaps: None,
            samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    /// Explicit leaf probabilities; otherwise `k/(grid+1)` for `k = 1..=grid`.
    pub p: Option<Vec<f64>>,
    pub grid: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { p: None, grid: 99 }
    }
}

impl TreeConfig {
    pub fn values(&self) -> Vec<f64> {
        match &self.p {
            Some(p) => p.clone(),
            None => (1..=self.grid)
                .map(|k| k as f64 / (self.grid + 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub paths: u64,
    pub step: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            paths: 20_000,
            step: 1e-3,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    pub step: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Applies flag overrides and resolves the seed (flag, file, environment,
    /// built-in default in that order), then validates the section for `cmd`.
    pub fn resolve(mut self, cmd: Command, flags: &Overrides) -> CliResult<Self> {
        if let Some(p) = flags.paths {
            match cmd {
                Command::Simulate => self.simulate.paths = p,
                Command::Dpbm => self.dpbm.paths = p,
                Command::Check => self.check.paths = p,
                _ => return Err(not_applicable("--paths", cmd)),
            }
        }
        if let Some(h) = flags.step {
            match cmd {
                Command::Simulate => self.simulate.step = h,
                Command::Dpbm => self.dpbm.step = h,
                Command::Check => self.check.step = h,
                _ => return Err(not_applicable("--step", cmd)),
            }
        }
        if let Some(out) = &flags.out {
            self.out = out.clone();
        }
        if let Some(f) = flags.format {
            self.format = f;
        }
        let seed = match (flags.seed, self.seed) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => seed_from_env()?.unwrap_or(DEFAULT_SEED),
        };
        self.seed = Some(seed);
        self.validate(cmd)?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn validate(&self, cmd: Command) -> CliResult<()> {
        self.spec.validate().map_err(|e| field("spec", e.to_string()))?;
        match cmd {
            Command::Simulate => {
                let s = &self.simulate;
                check_x0("simulate.x0", s.x0)?;
                check_paths("simulate.paths", s.paths)?;
                check_positive("simulate.step", s.step)?;
                if !(s.horizon > s.step) {
                    return Err(field(
                        "simulate.horizon",
                        format!("{} must exceed the step", s.horizon),
                    ));
                }
                if s.strategies.is_empty() {
                    return Err(field("simulate.strategies", "at least one strategy is needed"));
                }
                for (k, st) in s.strategies.iter().enumerate() {
                    st.validate()
                        .map_err(|e| field(&format!("simulate.strategies[{k}]"), e.to_string()))?;
                }
                check_rates("simulate.r", &s.r)?;
                if !self.spec.is_driftless() {
                    return Err(field("spec", "controlled runs need a driftless diffusion"));
                }
            }
            Command::Value => {
                let v = &self.value;
                check_rates("value.r", &v.r)?;
                if v.r.is_empty() {
                    return Err(field("value.r", "at least one rate is needed"));
                }
                match &v.points {
                    Some(p) => {
                        for (k, x) in p.iter().enumerate() {
                            check_x0(&format!("value.points[{k}]"), *x)?;
                        }
                    }
                    None if v.lattice < 2 => {
                        return Err(field("value.lattice", "needs at least 2 points per axis"))
                    }
                    None => {}
                }
                check_positive("value.delta", v.delta)?;
                check_positive("value.pasting_delta", v.pasting_delta)?;
            }
            Command::Dpbm => {
                let d = &self.dpbm;
                check_x0("dpbm.x0", d.x0)?;
                check_paths("dpbm.paths", d.paths)?;
                check_positive("dpbm.step", d.step)?;
                if d.replications == 0 {
                    return Err(field("dpbm.replications", "must be at least 1"));
                }
                if self.spec != DiffusionSpec::brownian() {
                    return Err(field(
                        "spec",
                        "the perturbed comparison is defined for standard Brownian motion only",
                    ));
                }
                let (p, m) = self.dpbm_seeds();
                if p == m {
                    return Err(field(
                        "dpbm.perturbed_seed",
                        "both arms share a seed; the comparison would be invalid because the samples are dependent",
                    ));
                }
            }
            Command::Tree => {
                let p = self.tree.values();
                if p.is_empty() {
                    return Err(field("tree.p", "no leaf probabilities"));
                }
                if let Some(bad) = p.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
                    return Err(field("tree.p", format!("{bad} is outside (0, 1)")));
                }
            }
            Command::Check => {
                check_paths("check.paths", self.check.paths)?;
                check_positive("check.step", self.check.step)?;
            }
        }
        Ok(())
    }

    /// Base seeds of the perturbed and the middle arm.
    pub fn dpbm_seeds(&self) -> (u64, u64) {
        let seed = self.seed();
        (
            self.dpbm
                .perturbed_seed
                .unwrap_or_else(|| majority::RngStream::derive_seed(seed, 1)),
            self.dpbm
                .middle_seed
                .unwrap_or_else(|| majority::RngStream::derive_seed(seed, 2)),
        )
    }

    /// SHA-256 of the settings that determine the output of `cmd`: the command,
    /// seed, diffusion and the command's own section. Output location, format and
    /// worker count are excluded.
    pub fn hash(&self, cmd: Command) -> CliResult<String> {
        let section = match cmd {
            Command::Simulate => serde_json::to_value(&self.simulate)?,
            Command::Value => serde_json::to_value(&self.value)?,
            Command::Dpbm => serde_json::to_value(&self.dpbm)?,
            Command::Tree => serde_json::to_value(&self.tree)?,
            Command::Check => serde_json::to_value(&self.check)?,
        };
        let canonical = serde_json::json!({
            "command": cmd.name(),
            "seed": self.seed(),
            "spec": self.spec,
            "section": section,
        });
        let digest = Sha256::digest(serde_json::to_vec(&canonical)?);
        Ok(format!("{digest:x}"))
    }
}

fn seed_from_env() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
        Err(_) => Ok(None),
    }
}

fn field(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("{name}: {reason}"))
}

fn not_applicable(flag: &str, cmd: Command) -> CliError {
    CliError::usage(format!("{flag} does not apply to `{}`", cmd.name()))
}

fn check_x0(name: &str, x: [f64; 3]) -> CliResult<()> {
    match x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(bad) => Err(field(name, format!("component {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn check_paths(name: &str, n: u64) -> CliResult<()> {
    if n == 0 {
        return Err(field(name, "must be at least 1"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(field(name, format!("{v} must be positive and finite")));
    }
    Ok(())
}

fn check_rates(name: &str, r: &[f64]) -> CliResult<()> {
    match r.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        Some(bad) => Err(field(name, format!("rate {bad} must be positive"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_parse_from_toml() {
        let text = r#"
            seed = 7
            [simulate]
            paths = 10
            strategies = [
              { kind = "run_the_middle" },
              { kind = "run_two_then_third", pair = [0, 2] },
              { kind = "round_robin", block = 0.02 },
              { kind = "run_extreme", extreme = "min", tie_rule = "highest_index" },
              { kind = "epsilon", epsilon = 0.05, base = { kind = "run_the_middle" } },
            ]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        let labels: Vec<String> = cfg.simulate.strategies.iter().map(|s| s.label()).collect();
        assert_eq!(
            labels,
            [
                "run_the_middle",
                "run_two_then_third(0,2)",
                "round_robin(0.02)",
                "run_extreme(min)",
                "epsilon(run_the_middle,0.05)"
            ]
        );
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_name() {
        let err = toml::from_str::<ExperimentConfig>("[simulate]\npathz = 3\n").unwrap_err();
        assert!(err.to_string().contains("pathz"));
    }

    #[test]
    fn flags_override_the_file_and_are_checked() {
        let flags = Overrides {
            paths: Some(0),
            ..Overrides::default()
        };
        let err = ExperimentConfig::default()
            .resolve(Command::Simulate, &flags)
            .unwrap_err();
        assert!(err.to_string().contains("simulate.paths"));
        assert!(ExperimentConfig::default()
            .resolve(Command::Tree, &flags)
            .is_err());
        let flags = Overrides {
            seed: Some(9),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::default()
            .resolve(Command::Tree, &flags)
            .unwrap();
        assert_eq!(cfg.seed(), 9);
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.format = Format::Csv;
        assert_eq!(a.hash(Command::Check).unwrap(), b.hash(Command::Check).unwrap());
        b.check.paths += 1;
        assert_ne!(a.hash(Command::Check).unwrap(), b.hash(Command::Check).unwrap());
    }

    #[test]
    fn shared_dpbm_seed_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.dpbm.perturbed_seed = Some(3);
        cfg.dpbm.middle_seed = Some(3);
        let err = cfg.resolve(Command::Dpbm, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("dependent"));
    }
}
