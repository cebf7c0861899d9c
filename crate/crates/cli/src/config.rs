use std::path::{Path, PathBuf};

use channelcert::certify::{DistanceMode, DEFAULT_C_CAL, DEFAULT_DEPOLARIZING_ROUNDS};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which tester an experiment drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unitary,
    Depolarizing,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Unitary => "unitary",
            Mode::Depolarizing => "depolarizing",
        }
    }
}

/// Kind of channel placed behind the oracle in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// The target itself.
    Null,
    /// A channel at distance at least `epsilon` from the target.
    Far,
    /// A channel at distance `epsilon / 2`, inside the promise gap.
    Gap,
}

impl GroundTruth {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundTruth::Null => "null",
            GroundTruth::Far => "far",
            GroundTruth::Gap => "gap",
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_c_cal() -> f64 {
    DEFAULT_C_CAL
}

fn default_distance() -> DistanceMode {
    DistanceMode::Trace
}

fn default_ground_truths() -> Vec<GroundTruth> {
    vec![GroundTruth::Null, GroundTruth::Far]
}

/// Experiment description, read from JSON and then patched by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dims: Vec<(usize, usize)>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_distance")]
    pub distance: DistanceMode,
    /// Number of rounds of the depolarizing tester.
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default = "default_c_cal")]
    pub c_cal: f64,
    #[serde(default = "default_ground_truths")]
    pub ground_truths: Vec<GroundTruth>,
    /// Channel files checked by `verify-lemmas` in addition to sampled channels.
    #[serde(default)]
    pub channel_files: Vec<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            dims: Vec::new(),
            epsilons: Vec::new(),
            trials: default_trials(),
            mode: None,
            distance: default_distance(),
            rounds: None,
            c_cal: default_c_cal(),
            ground_truths: default_ground_truths(),
            channel_files: Vec::new(),
            out: None,
        }
    }
}

fn config_err(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| config_err("config", format!("{}: {e}", path.display())))
    }

    /// Defaults used by `certify-unitary` when no config file is given.
    pub fn unitary_default() -> Self {
        Self {
            dims: vec![(8, 8)],
            epsilons: vec![0.3],
            trials: 200,
            mode: Some(Mode::Unitary),
            ..Self::default()
        }
    }

    /// Defaults used by `certify-depolarizing` when no config file is given.
    pub fn depolarizing_default() -> Self {
        Self {
            dims: vec![(2, 2)],
            epsilons: vec![1.0],
            trials: 50,
            mode: Some(Mode::Depolarizing),
            ..Self::default()
        }
    }

    /// Defaults used by `verify-lemmas`: `trials` random channels per shape.
    pub fn lemmas_default() -> Self {
        Self {
            dims: vec![(2, 2), (2, 3), (3, 2), (3, 3), (2, 4)],
            trials: 10,
            ..Self::default()
        }
    }

    pub fn curve_default(mode: Mode) -> Self {
        match mode {
            Mode::Unitary => Self {
                dims: vec![(2, 2), (4, 4), (8, 8), (16, 16)],
                epsilons: vec![0.3, 0.15],
                trials: 50,
                mode: Some(mode),
                ground_truths: vec![GroundTruth::Far],
                ..Self::default()
            },
            Mode::Depolarizing => Self {
                dims: vec![(2, 2), (2, 4), (4, 4)],
                epsilons: vec![1.0],
                trials: 20,
                mode: Some(mode),
                ground_truths: vec![GroundTruth::Far],
                ..Self::default()
            },
        }
    }

    /// Seed from the config, else `CHANNELCERT_SEED`, else 0.
    pub fn resolved_seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("CHANNELCERT_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| config_err("seed", format!("CHANNELCERT_SEED={v:?} is not a u64"))),
            Err(_) => Ok(0),
        }
    }

    pub fn rounds_or_default(&self) -> usize {
        self.rounds.unwrap_or(DEFAULT_DEPOLARIZING_ROUNDS)
    }

    /// Checks the fields shared by every experiment for `mode`.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if self.mode.is_some_and(|m| m != mode) {
            return Err(config_err(
                "mode",
                format!(
                    "config says {:?}, command runs {}",
                    self.mode,
                    mode.as_str()
                ),
            ));
        }
        self.validate_common()?;
        if self.epsilons.is_empty() {
            return Err(config_err("epsilons", "at least one epsilon is required"));
        }
        if self.ground_truths.is_empty() {
            return Err(config_err(
                "ground_truths",
                "at least one ground truth is required",
            ));
        }
        if !(self.c_cal.is_finite() && self.c_cal > 0.0) {
            return Err(config_err(
                "c_cal",
                format!("must be positive, got {}", self.c_cal),
            ));
        }
        if self.rounds == Some(0) {
            return Err(config_err("rounds", "must be at least 1"));
        }
        let eps_max = match mode {
            Mode::Unitary => 1.0,
            Mode::Depolarizing => 2.0,
        };
        if let Some(e) = self.epsilons.iter().find(|&&e| !(e > 0.0 && e <= eps_max)) {
            return Err(config_err(
                "epsilons",
                format!("{e} outside (0, {eps_max}] for {} mode", mode.as_str()),
            ));
        }
        for &(di, dout) in &self.dims {
            match mode {
                Mode::Unitary if di != dout || di < 2 => {
                    return Err(config_err(
                        "dims",
                        format!("unitary mode needs d_in = d_out >= 2, got ({di}, {dout})"),
                    ))
                }
                Mode::Depolarizing if dout < 2 => {
                    return Err(config_err(
                        "dims",
                        format!("depolarizing mode needs d_out >= 2, got ({di}, {dout})"),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks `trials` and `dims` only.
    pub fn validate_common(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if self.dims.is_empty() {
            return Err(config_err(
                "dims",
                "at least one (d_in, d_out) pair is required",
            ));
        }
        if let Some(&(di, dout)) = self.dims.iter().find(|&&(a, b)| a == 0 || b == 0) {
            return Err(config_err(
                "dims",
                format!("dimensions must be positive, got ({di}, {dout})"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_with_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"dims": [[8, 8]], "epsilons": [0.3]}"#).unwrap();
        assert_eq!(c.trials, 1);
        assert_eq!(c.c_cal, DEFAULT_C_CAL);
        assert_eq!(c.ground_truths, vec![GroundTruth::Null, GroundTruth::Far]);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"dimz": []}"#).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::unitary_default();
        c.epsilons = vec![1.5];
        match c.validate(Mode::Unitary) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "epsilons"),
            other => panic!("{other:?}"),
        }
        c = ExperimentConfig::unitary_default();
        c.dims.clear();
        assert!(
            matches!(c.validate(Mode::Unitary), Err(CliError::Config { field, .. }) if field == "dims")
        );
        c = ExperimentConfig::unitary_default();
        c.trials = 0;
        assert!(
            matches!(c.validate(Mode::Unitary), Err(CliError::Config { field, .. }) if field == "trials")
        );
        c = ExperimentConfig::unitary_default();
        assert!(
            matches!(c.validate(Mode::Depolarizing), Err(CliError::Config { field, .. }) if field == "mode")
        );
    }
}
