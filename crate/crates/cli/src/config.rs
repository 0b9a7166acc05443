//! Experiment files.
//!
//! An experiment is a TOML document with one `[experiment]` table of run
//! settings, a `[plant]` model, and either one `[reference]` model or a set of
//! named `[references.<name>]` models. `[sweep]`, `[ramsey]` and
//! `[stability]` hold the settings of the corresponding subcommands. Unknown
//! keys are rejected.
//!
//! A model is given by time constants (`gain`, `zeros`, `poles`, meaning
//! `gain * prod(z s + 1) / prod(p s + 1)`) or by raw ascending-power
//! `numerator` / `denominator` coefficients. The plant may also carry a
//! `saturation` bound and a `placement` (`wiener` or `hammerstein`).
//!
//! Summary files written by the subcommands are themselves valid experiment
//! files: the extra `[summary]` table is ignored on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pulsecal_core::{
    AwgSignal, CalibrationConfig, DesiredSignal, Lifting, Placement, Plant, SnapshotPolicy,
    TransferFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftingSpec {
    StepIncrement,
    ImpulseSampled,
}

impl From<LiftingSpec> for Lifting {
    fn from(l: LiftingSpec) -> Self {
        match l {
            LiftingSpec::StepIncrement => Lifting::StepIncrement,
            LiftingSpec::ImpulseSampled => Lifting::ImpulseSampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotSpec {
    Sparse,
    All,
}

impl From<SnapshotSpec> for SnapshotPolicy {
    fn from(s: SnapshotSpec) -> Self {
        match s {
            SnapshotSpec::Sparse => SnapshotPolicy::Sparse,
            SnapshotSpec::All => SnapshotPolicy::All,
        }
    }
}

/// Starting AWG waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSpec {
    /// Staircase of the desired signal.
    Step,
    Zero,
    /// Uniform in `[0, 2 * amplitude)`, drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementSpec {
    Wiener,
    Hammerstein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub tau: f64,
    pub duration: f64,
    pub oversampling: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub sample_error_tolerance: f64,
    pub divergence_factor: f64,
    pub amplitude_guard: f64,
    pub lifting: LiftingSpec,
    pub snapshots: SnapshotSpec,
    pub initial: InitialSpec,
    pub seed: u64,
    /// Height of the desired step.
    pub amplitude: f64,
}

impl Default for Experiment {
    fn default() -> Self {
        let c = CalibrationConfig::default();
        Self {
            tau: 0.002,
            duration: 0.1,
            oversampling: c.oversampling,
            learning_rate: c.learning_rate,
            max_iterations: c.max_iterations,
            sample_error_tolerance: c.sample_error_tolerance,
            divergence_factor: c.divergence_factor,
            amplitude_guard: c.amplitude_guard,
            lifting: LiftingSpec::StepIncrement,
            snapshots: SnapshotSpec::Sparse,
            initial: InitialSpec::Step,
            seed: 0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub zeros: Vec<f64>,
    #[serde(default)]
    pub poles: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerator: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<PlacementSpec>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn time_constants(zeros: &[f64], poles: &[f64]) -> Self {
        Self {
            gain: 1.0,
            zeros: zeros.to_vec(),
            poles: poles.to_vec(),
            numerator: None,
            denominator: None,
            saturation: None,
            placement: None,
        }
    }

    pub fn transfer_function(&self, field: &str) -> std::result::Result<TransferFunction, String> {
        match (&self.numerator, &self.denominator) {
            (Some(num), Some(den)) => {
                if !self.zeros.is_empty() || !self.poles.is_empty() || self.gain != 1.0 {
                    return Err(format!(
                        "{field}: give either numerator/denominator or gain/zeros/poles"
                    ));
                }
                TransferFunction::new(num, den).map_err(|e| format!("{field}: {e}"))
            }
            (None, None) => {
                if let Some(p) = self.poles.iter().find(|p| !(**p >= 0.0)) {
                    return Err(format!("{field}.poles: time constant {p} must be >= 0"));
                }
                TransferFunction::from_time_constants(self.gain, &self.zeros, &self.poles)
                    .map_err(|e| format!("{field}: {e}"))
            }
            _ => Err(format!("{field}: numerator and denominator go together")),
        }
    }

    pub fn plant(&self, field: &str) -> std::result::Result<Plant, String> {
        let linear = self.transfer_function(field)?;
        let Some(bound) = self.saturation else {
            if self.placement.is_some() {
                return Err(format!("{field}.placement: needs a saturation bound"));
            }
            return Ok(Plant::linear(linear));
        };
        let plant = Plant::wiener(linear, bound).map_err(|e| format!("{field}.saturation: {e}"))?;
        Ok(match self.placement.unwrap_or(PlacementSpec::Wiener) {
            PlacementSpec::Wiener => plant.with_placement(Placement::PostLinear),
            PlacementSpec::Hammerstein => plant.with_placement(Placement::PreLinear),
        })
    }

    fn linear_only(&self, field: &str) -> std::result::Result<TransferFunction, String> {
        if self.saturation.is_some() || self.placement.is_some() {
            return Err(format!("{field}: reference models are linear"));
        }
        self.transfer_function(field)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySection {
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    /// Also run the learning loop for every reference and report its status.
    #[serde(default = "yes")]
    pub calibrate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Experiment,
    pub plant: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub references: BTreeMap<String, ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramsey: Option<RamseySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    #[serde(default, skip_serializing)]
    pub summary: Option<toml::Table>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if path.as_os_str().is_empty() {
            return Err(CliError::config(path, "empty config path"));
        }
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(path, format!("cannot read config: {e}")))?;
        Self::parse(&text).map_err(|m| CliError::config(path, m))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let config: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let e = &self.experiment;
        positive("experiment.tau", e.tau)?;
        positive("experiment.duration", e.duration)?;
        self.horizon_for(e.tau)?;
        if e.oversampling == 0 {
            return Err("experiment.oversampling: must be at least 1".into());
        }
        if !e.amplitude.is_finite() {
            return Err("experiment.amplitude: must be finite".into());
        }
        self.calibration_config()
            .validate()
            .map_err(|err| format!("experiment: {err}"))?;
        self.plant.plant("plant")?;
        if let Some(r) = &self.reference {
            r.linear_only("reference")?;
        }
        for (name, r) in &self.references {
            r.linear_only(&format!("references.{name}"))?;
        }
        if let Some(s) = &self.sweep {
            for (field, values) in [("sweep.t1", &s.t1), ("sweep.t2", &s.t2)] {
                if values.is_empty() {
                    return Err(format!("{field}: needs at least one value"));
                }
                for v in values {
                    positive(field, *v)?;
                }
                if values.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(format!("{field}: values must be strictly ascending"));
                }
            }
        }
        if let Some(r) = &self.ramsey {
            if r.taus.is_empty() {
                return Err("ramsey.taus: needs at least one value".into());
            }
            for t in &r.taus {
                positive("ramsey.taus", *t)?;
                self.horizon_for(*t)?;
            }
        }
        Ok(())
    }

    /// `duration / tau`, which must be a whole number of periods.
    pub fn horizon_for(&self, tau: f64) -> std::result::Result<usize, String> {
        let ratio = self.experiment.duration / tau;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(format!(
                "experiment.duration: {} is not a whole number of periods of {tau}",
                self.experiment.duration
            ));
        }
        Ok(n as usize)
    }

    pub fn horizon(&self) -> usize {
        self.horizon_for(self.experiment.tau)
            .expect("validated config")
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        let e = &self.experiment;
        CalibrationConfig {
            learning_rate: e.learning_rate,
            max_iterations: e.max_iterations,
            sample_error_tolerance: e.sample_error_tolerance,
            divergence_factor: e.divergence_factor,
            amplitude_guard: e.amplitude_guard,
            oversampling: e.oversampling,
            lifting: e.lifting.into(),
            snapshots: e.snapshots.into(),
        }
    }

    pub fn desired(&self) -> DesiredSignal {
        DesiredSignal::step(self.experiment.amplitude)
    }

    pub fn true_plant(&self) -> Plant {
        self.plant.plant("plant").expect("validated config")
    }

    pub fn reference_model(&self) -> Result<TransferFunction> {
        let spec = self
            .reference
            .as_ref()
            .ok_or_else(|| CliError::config("", "missing [reference] model"))?;
        Ok(spec.linear_only("reference").expect("validated config"))
    }

    /// Named references, or the single `[reference]` under the name
    /// `reference`.
    pub fn named_references(&self) -> Result<Vec<(String, TransferFunction)>> {
        if !self.references.is_empty() {
            return Ok(self
                .references
                .iter()
                .map(|(name, spec)| {
                    let tf = spec.linear_only(name).expect("validated config");
                    (name.clone(), tf)
                })
                .collect());
        }
        Ok(vec![("reference".to_string(), self.reference_model()?)])
    }

    pub fn initial_awg(&self, tau: f64, horizon: usize) -> Result<AwgSignal> {
        let e = &self.experiment;
        let values = match e.initial {
            InitialSpec::Step => return Ok(self.desired().staircase(tau, horizon)?),
            InitialSpec::Zero => vec![0.0; horizon],
            InitialSpec::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
                (0..horizon)
                    .map(|_| rng.random_range(0.0..2.0 * e.amplitude.abs().max(f64::MIN_POSITIVE)))
                    .collect()
            }
        };
        Ok(AwgSignal::new(values, tau)?)
    }

    /// The config as TOML, with every default spelled out.
    pub fn to_toml_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes")
    }
}

fn positive(field: &str, v: f64) -> std::result::Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{field}: {v} must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[plant]
poles = [0.008, 0.001]

[reference]
poles = [0.006, 0.001]
";

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::default());
        assert_eq!(c.horizon(), 50);
        assert_eq!(c.calibration_config(), CalibrationConfig::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let text = toml::to_string(&c.to_toml_table()).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = ExperimentConfig::parse("[plant]\npoles = [0.1]\nfoo = 1\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("foo"), "{err}");
    }

    #[test]
    fn field_errors_name_the_field() {
        let err = ExperimentConfig::parse("[plant]\npoles = [-0.1]\n").unwrap_err();
        assert!(err.starts_with("plant.poles"), "{err}");
        let err = ExperimentConfig::parse("[experiment]\ntau = 0.003\n[plant]\npoles = [0.1]\n")
            .unwrap_err();
        assert!(err.contains("experiment.duration"), "{err}");
        let err = ExperimentConfig::parse(
            "[plant]\npoles = [0.1]\n[reference]\npoles = [0.1]\nsaturation = 1.0\n",
        )
        .unwrap_err();
        assert!(err.contains("linear"), "{err}");
    }

    #[test]
    fn sweep_axes_must_be_positive() {
        let err = ExperimentConfig::parse(
            "[plant]\npoles = [0.1]\n[sweep]\nt1 = [-0.001, 0.002]\nt2 = [0.001]\n",
        )
        .unwrap_err();
        assert!(err.starts_with("sweep.t1"), "{err}");
    }

    #[test]
    fn random_initial_is_seeded() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.experiment.initial = InitialSpec::Random;
        let a = c.initial_awg(0.002, 10).unwrap();
        assert_eq!(a, c.initial_awg(0.002, 10).unwrap());
        c.experiment.seed = 1;
        assert_ne!(a, c.initial_awg(0.002, 10).unwrap());
        assert!(a.values().iter().all(|v| (0.0..2.0).contains(v)));
    }

    #[test]
    fn raw_coefficients() {
        let c = ExperimentConfig::parse(
            "[plant]\nnumerator = [1.0]\ndenominator = [1.0, 0.009, 0.000008]\n",
        )
        .unwrap();
        let g = c.true_plant().linear;
        let tc = TransferFunction::from_time_constants(1.0, &[], &[0.008, 0.001]).unwrap();
        assert_eq!(g.numerator(), tc.numerator());
        for (a, b) in g.denominator().iter().zip(tc.denominator()) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }
}
