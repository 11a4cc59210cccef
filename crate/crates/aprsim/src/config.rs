//! Run configuration: source and noise models, layouts, tomography and
//! calibration settings. Every field has a default, so a config file only
//! needs the values it changes.

use std::path::Path;

use aprsim_core::network::{
    layout_all_photonic_2x2, layout_conventional_2x2, Channel, ExperimentLayout, DEFAULT_BUDGET,
};
use aprsim_core::noise::NoiseModel;
use aprsim_core::source::SourceModel;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub source: SourceModel,
    pub noise: NoiseModel,
    pub layouts: Layouts,
    /// Largest number of enumeration branches before `enumerate` refuses.
    pub budget: u64,
    pub tomography: TomographyConfig,
    pub calibration: CalibrationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            source: SourceModel::default(),
            noise: NoiseModel::default(),
            layouts: Layouts::default(),
            budget: DEFAULT_BUDGET,
            tomography: TomographyConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layouts {
    pub all_photonic: ExperimentLayout,
    pub conventional_upper: ExperimentLayout,
    pub conventional_lower: ExperimentLayout,
    pub conventional_both: ExperimentLayout,
}

impl Default for Layouts {
    fn default() -> Self {
        Layouts {
            all_photonic: layout_all_photonic_2x2(),
            conventional_upper: layout_conventional_2x2(Channel::Upper),
            conventional_lower: layout_conventional_2x2(Channel::Lower),
            conventional_both: layout_conventional_2x2(Channel::Both),
        }
    }
}

/// Layout selector used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    AllPhotonic,
    Upper,
    Lower,
    Both,
}

impl Layouts {
    pub fn get(&self, kind: LayoutKind) -> &ExperimentLayout {
        match kind {
            LayoutKind::AllPhotonic => &self.all_photonic,
            LayoutKind::Upper => &self.conventional_upper,
            LayoutKind::Lower => &self.conventional_lower,
            LayoutKind::Both => &self.conventional_both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    /// Shots per measurement setting (state tomography) or per probe state
    /// (detector tomography).
    pub shots: u64,
    /// Visibility of the PBS that makes the GHZ state.
    pub ghz_visibility: f64,
    /// White noise on each of the two pairs feeding that PBS.
    pub ghz_white_noise: f64,
    /// Visibility of the PCM under detector tomography.
    pub pcm_visibility: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            shots: 100_000,
            ghz_visibility: 1.0,
            ghz_white_noise: 0.0,
            pcm_visibility: 1.0,
        }
    }
}

/// Measured values the calibration fits to, and the network setting used
/// for its final-pair prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub povm_phi_plus: f64,
    pub povm_psi_plus: f64,
    pub ghz4_fidelity: f64,
    /// Final-pair fidelities in the order 1&11, 4&11, 1&10, 4&10.
    pub pair_fidelities: Vec<f64>,
    pub overall_fidelity: f64,
    pub network_efficiency: f64,
    pub network_multi_pair: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            povm_phi_plus: 0.815,
            povm_psi_plus: 0.834,
            ghz4_fidelity: 0.896,
            pair_fidelities: vec![0.587, 0.598, 0.597, 0.628],
            overall_fidelity: 0.606,
            network_efficiency: 1.0,
            network_multi_pair: false,
        }
    }
}

fn section(name: &str) -> impl Fn(aprsim_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{name}: {e}"))
}

fn unit(name: &str, x: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {x} outside [0, 1]")))
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Config =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.source.validate().map_err(section("source"))?;
        self.noise.validate().map_err(section("noise"))?;
        for l in [
            &self.layouts.all_photonic,
            &self.layouts.conventional_upper,
            &self.layouts.conventional_lower,
            &self.layouts.conventional_both,
        ] {
            l.validate().map_err(section(&format!("layout {}", l.name)))?;
        }
        if self.tomography.shots == 0 {
            return Err(CliError::Config("tomography.shots must be at least 1".into()));
        }
        unit("tomography.ghz_visibility", self.tomography.ghz_visibility)?;
        unit("tomography.ghz_white_noise", self.tomography.ghz_white_noise)?;
        unit("tomography.pcm_visibility", self.tomography.pcm_visibility)?;
        let c = &self.calibration;
        unit("calibration.povm_phi_plus", c.povm_phi_plus)?;
        unit("calibration.povm_psi_plus", c.povm_psi_plus)?;
        unit("calibration.ghz4_fidelity", c.ghz4_fidelity)?;
        unit("calibration.overall_fidelity", c.overall_fidelity)?;
        unit("calibration.network_efficiency", c.network_efficiency)?;
        for &f in &c.pair_fidelities {
            unit("calibration.pair_fidelities", f)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let back: Config = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c: Config = serde_json::from_str(r#"{"source": {"p": 0.05}, "noise": {"visibility": 0.9}}"#).unwrap();
        assert_eq!(c.source.p, 0.05);
        assert_eq!(c.source.efficiency, 0.38);
        assert_eq!(c.noise.visibility, 0.9);
        assert_eq!(c.layouts, Layouts::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"sorce": {}}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"noise": {"visbility": 1.0}}"#).is_err());
    }

    #[test]
    fn out_of_range_values_fail_validation() {
        let c: Config = serde_json::from_str(r#"{"source": {"p": 0.5}}"#).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c: Config = serde_json::from_str(r#"{"tomography": {"shots": 0}}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
