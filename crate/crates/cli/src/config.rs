//! Declarative run configuration: one TOML file, a handful of flag
//! overrides, and an environment override for the output directory only.
//! Every run writes the fully resolved configuration next to its outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lendfair_core::gibbs::PenaltyVariant;
use lendfair_core::{Sector, SpikeSlabHyper};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides `output_dir`. A `--output-dir` flag
/// still wins over it.
pub const OUT_DIR_ENV: &str = "LENDFAIR_OUT_DIR";

/// Name of the resolved-configuration snapshot written next to outputs.
pub const SNAPSHOT_FILE: &str = "resolved_config.toml";

/// The five input CSVs. All paths are required once the section is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub loans: PathBuf,
    pub indicators: PathBuf,
    pub distances: PathBuf,
    pub migrants: PathBuf,
    pub colonization: PathBuf,
}

impl InputPaths {
    /// The standard five file names inside one directory.
    pub fn in_dir(dir: &Path) -> InputPaths {
        InputPaths {
            loans: dir.join("loans.csv"),
            indicators: dir.join("indicators.csv"),
            distances: dir.join("distances.csv"),
            migrants: dir.join("migrants.csv"),
            colonization: dir.join("colonization.csv"),
        }
    }
}

/// Sampler hyperparameters as they appear in the config file. The chain seed
/// is deliberately absent: all randomness flows from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperConfig {
    pub a: f64,
    pub b: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub s2: f64,
    pub theta_init: f64,
    pub burn_in: usize,
    pub draws: usize,
}

impl Default for HyperConfig {
    fn default() -> HyperConfig {
        let h = SpikeSlabHyper::default();
        HyperConfig {
            a: h.a,
            b: h.b,
            alpha1: h.alpha1,
            alpha2: h.alpha2,
            s2: h.s2,
            theta_init: h.theta_init,
            burn_in: h.burn_in,
            draws: h.draws,
        }
    }
}

impl HyperConfig {
    pub fn to_hyper(&self, seed: u64) -> SpikeSlabHyper {
        SpikeSlabHyper {
            a: self.a,
            b: self.b,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            s2: self.s2,
            theta_init: self.theta_init,
            burn_in: self.burn_in,
            draws: self.draws,
            seed,
            lambda: 0.0,
        }
    }
}

/// How the fairness penalty enters the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// Weight the penalty by the number of observations; the default, and
    /// the only variant whose strength survives standardized-scale data.
    #[default]
    PerObservation,
    /// Apply the penalty once per draw, for comparison runs.
    OneShot,
}

impl PenaltyKind {
    pub fn variant(self) -> PenaltyVariant {
        match self {
            PenaltyKind::PerObservation => PenaltyVariant::PerObservation,
            PenaltyKind::OneShot => PenaltyVariant::OneShot,
        }
    }
}

/// Fairness-run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairConfig {
    pub lambda: f64,
    pub penalty: PenaltyKind,
}

impl Default for FairConfig {
    fn default() -> FairConfig {
        FairConfig { lambda: 0.6, penalty: PenaltyKind::PerObservation }
    }
}

/// One run's full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    /// Sector subset for per-sector commands; absent means all twelve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sectors: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputPaths>,
    pub hyper: HyperConfig,
    pub fair: FairConfig,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            output_dir: PathBuf::from("out"),
            seed: 0,
            train_fraction: 0.7,
            sectors: None,
            inputs: None,
            hyper: HyperConfig::default(),
            fair: FairConfig::default(),
        }
    }
}

/// Flag-level overrides, applied on top of the file and the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub train_fraction: Option<f64>,
    pub lambda: Option<f64>,
    pub sectors: Option<Vec<String>>,
}

impl RunConfig {
    /// Read the file (or start from defaults), then apply the environment
    /// override and the flags, then validate.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config file {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(f) = overrides.train_fraction {
            config.train_fraction = f;
        }
        if let Some(lambda) = overrides.lambda {
            config.fair.lambda = lambda;
        }
        if let Some(sectors) = &overrides.sectors {
            config.sectors = Some(sectors.clone());
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction {} outside (0, 1)", self.train_fraction);
        }
        if !(self.fair.lambda.is_finite() && self.fair.lambda >= 0.0) {
            bail!("lambda {} must be a finite non-negative number", self.fair.lambda);
        }
        self.hyper.to_hyper(self.seed).validate()?;
        self.selected_sectors()?;
        Ok(())
    }

    /// The requested sectors in canonical order, duplicates removed.
    pub fn selected_sectors(&self) -> Result<Vec<Sector>> {
        let Some(names) = &self.sectors else {
            return Ok(Sector::ALL.to_vec());
        };
        if names.is_empty() {
            bail!("sectors list is empty; omit the key to run all sectors");
        }
        let mut picked = Vec::new();
        for name in names {
            let sector = Sector::parse(name).with_context(|| {
                let known: Vec<&str> = Sector::ALL.iter().map(|s| s.name()).collect();
                format!("unknown sector '{name}'; known sectors: {}", known.join(", "))
            })?;
            if !picked.contains(&sector) {
                picked.push(sector);
            }
        }
        picked.sort_by_key(|s| s.index());
        Ok(picked)
    }

    pub fn input_paths(&self) -> Result<&InputPaths> {
        self.inputs
            .as_ref()
            .context("this command needs the [inputs] section with the five CSV paths")
    }

    /// Serialize the resolved configuration; written next to run outputs.
    pub fn snapshot_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_values() {
        let config = RunConfig::default();
        assert_eq!(config.train_fraction, 0.7);
        assert_eq!(config.fair.lambda, 0.6);
        assert_eq!(config.fair.penalty, PenaltyKind::PerObservation);
        assert_eq!(config.hyper.burn_in, 1000);
        assert_eq!(config.hyper.draws, 4000);
        assert_eq!(config.selected_sectors().unwrap().len(), 12);
        let hyper = config.hyper.to_hyper(7);
        assert_eq!(hyper.seed, 7);
        assert_eq!(hyper.lambda, 0.0);
    }

    #[test]
    fn toml_round_trip_preserves_every_field() {
        let mut config = RunConfig {
            seed: 99,
            sectors: Some(vec!["Retail".into(), "Arts".into()]),
            inputs: Some(InputPaths::in_dir(Path::new("data"))),
            ..RunConfig::default()
        };
        config.fair.penalty = PenaltyKind::OneShot;
        let text = config.snapshot_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
        assert!(text.contains("penalty = \"one-shot\""));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let err = toml::from_str::<RunConfig>("sead = 1").unwrap_err();
        assert!(err.to_string().contains("sead"));

        let config: RunConfig = toml::from_str("train_fraction = 1.5").unwrap();
        assert!(config.validate().is_err());

        let config: RunConfig = toml::from_str("sectors = [\"Fishing\"]").unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn sector_subset_is_canonicalized() {
        let config: RunConfig =
            toml::from_str("sectors = [\"retail\", \"Arts\", \"retail\"]").unwrap();
        let picked = config.selected_sectors().unwrap();
        assert_eq!(picked, vec![Sector::Arts, Sector::Retail]);
    }

    #[test]
    fn overrides_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 1\noutput_dir = \"from-file\"\n").unwrap();
        let overrides = Overrides {
            seed: Some(2),
            output_dir: Some(PathBuf::from("from-flag")),
            lambda: Some(0.25),
            ..Overrides::default()
        };
        let config = RunConfig::resolve(Some(&path), &overrides).unwrap();
        assert_eq!(config.seed, 2);
        assert_eq!(config.output_dir, PathBuf::from("from-flag"));
        assert_eq!(config.fair.lambda, 0.25);
    }
}
