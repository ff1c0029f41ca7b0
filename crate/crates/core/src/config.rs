//! Experiment configuration.
//!
//! Configs are flat TOML documents with dotted keys:
//!
//! ```toml
//! manifold.geometry = "mra8"
//! manifold.pattern = "vivaldi"
//! scenario.family = "snr-sweep"
//! scenario.sweep = [-20.0, -15.0, -10.0, -5.0, 0.0]
//! run.trials = 500
//! ```
//!
//! Missing optional keys take the documented defaults: 50 snapshots, 1000
//! trials, element-space MUSIC, +/-90 degree field of view, 0.01 degree grid,
//! seed 0.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::AzimuthGrid;
use crate::geometry::{is_perfect, ArrayGeometry};
use crate::manifold::{ArrayManifold, SourceScenario};
use crate::patterns::{ElementPattern, PatternKind, PatternPerturbation, PatternTable};

pub const DEFAULT_SNAPSHOTS: usize = 50;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_FOV_DEG: f64 = 90.0;
pub const DEFAULT_GRID_STEP_DEG: f64 = 0.01;
/// Half-angle of the symmetric source pair in SNR sweeps.
pub const DEFAULT_PAIR_ANGLE_DEG: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: ManifoldConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// Either a catalog name (`ula8`, `mra8`) or explicit integer positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Named(String),
    Positions(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub geometry: GeometrySpec,
    pub pattern: PatternKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_gain_dbi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_ripple_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_period_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub c1_re: f64,
    #[serde(default)]
    pub c1_im: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub phase_noise_deg: f64,
    #[serde(default)]
    pub param_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioFamily {
    /// Two sources at `+/-theta`, sweeping `theta`.
    SymmetricPair,
    /// Two sources at `+/-angle_deg`, sweeping SNR.
    SnrSweep,
    /// Fixed angles and SNR, one sweep point.
    Fixed,
    /// Fixed angles, typically more sources than sensors.
    OverloadedDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    ElementMusic,
    CoarrayMusic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: ScenarioFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step_deg: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_snapshots() -> usize {
    DEFAULT_SNAPSHOTS
}
fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::ElementMusic
}
fn default_fov() -> f64 {
    DEFAULT_FOV_DEG
}
fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP_DEG
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            snapshots: DEFAULT_SNAPSHOTS,
            trials: DEFAULT_TRIALS,
            estimator: EstimatorKind::ElementMusic,
            fov_deg: DEFAULT_FOV_DEG,
            grid_step_deg: DEFAULT_GRID_STEP_DEG,
            seed: 0,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Reads a config file. A relative `manifold.pattern_file` is resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let (Some(file), Some(dir)) = (&cfg.manifold.pattern_file, path.parent()) {
            if file.is_relative() {
                cfg.manifold.pattern_file = Some(dir.join(file));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat dotted-key rendering that [`parse_config`] reads back to an
    /// equal config.
    pub fn to_text(&self) -> String {
        let value = toml::Value::try_from(self).expect("config serializes to TOML");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.join("\n") + "\n"
    }

    /// Short content hash of the canonical rendering.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match &self.manifold.geometry {
            GeometrySpec::Named(name) => ArrayGeometry::from_name(name),
            GeometrySpec::Positions(p) => ArrayGeometry::new("custom", p.clone()),
        }
    }

    /// Nominal element pattern shared by every element.
    pub fn pattern(&self) -> Result<ElementPattern> {
        let m = &self.manifold;
        let shape_params = [
            ("peak_gain_dbi", m.peak_gain_dbi),
            ("exponent", m.exponent),
            ("null_angle_deg", m.null_angle_deg),
            ("phase_ripple_deg", m.phase_ripple_deg),
            ("ripple_period_deg", m.ripple_period_deg),
        ];
        let allowed: &[&str] = match m.pattern {
            PatternKind::Patch => &["peak_gain_dbi", "exponent"],
            PatternKind::Vivaldi => &[
                "peak_gain_dbi",
                "null_angle_deg",
                "phase_ripple_deg",
                "ripple_period_deg",
            ],
            _ => &[],
        };
        if let Some((name, _)) = shape_params
            .iter()
            .find(|(name, v)| v.is_some() && !allowed.contains(name))
        {
            return Err(config_err(format!(
                "manifold.{name} does not apply to pattern `{}`",
                m.pattern.name()
            )));
        }
        if m.pattern_file.is_some() && m.pattern != PatternKind::Tabulated {
            return Err(config_err(
                "manifold.pattern_file requires pattern = \"tabulated\"",
            ));
        }
        match m.pattern {
            PatternKind::Isotropic => Ok(ElementPattern::isotropic()),
            PatternKind::DipoleRef => Ok(ElementPattern::dipole_ref()),
            PatternKind::Patch => {
                ElementPattern::patch(m.peak_gain_dbi.unwrap_or(8.0), m.exponent.unwrap_or(1.5))
            }
            PatternKind::Vivaldi => ElementPattern::vivaldi(
                m.peak_gain_dbi.unwrap_or(13.0),
                m.null_angle_deg.unwrap_or(50.0),
                m.phase_ripple_deg.unwrap_or(60.0),
                m.ripple_period_deg.unwrap_or(25.0),
            ),
            PatternKind::Tabulated => {
                let path = m
                    .pattern_file
                    .as_ref()
                    .ok_or_else(|| config_err("missing required field manifold.pattern_file"))?;
                PatternTable::read(path).map(ElementPattern::tabulated)
            }
        }
    }

    /// Manifold assumed by the estimator: nominal patterns, no coupling.
    pub fn nominal_manifold(&self) -> Result<ArrayManifold> {
        Ok(ArrayManifold::uniform(self.geometry()?, self.pattern()?))
    }

    /// Manifold that generates the data, before per-trial perturbation.
    pub fn data_manifold(&self) -> Result<ArrayManifold> {
        let nominal = self.nominal_manifold()?;
        match self.manifold.coupling {
            Some(c) => nominal.apply_coupling_model(Complex64::new(c.c1_re, c.c1_im), c.decay),
            None => Ok(nominal),
        }
    }

    pub fn perturbation(&self) -> PatternPerturbation {
        let p = self.manifold.perturbation.unwrap_or_default();
        PatternPerturbation {
            phase_noise_std_deg: p.phase_noise_deg,
            param_tolerance: p.param_tolerance,
        }
    }

    /// Sweep parameter values: the configured sweep, or the single SNR for
    /// fixed scenarios.
    pub fn sweep_points(&self) -> Vec<f64> {
        match self.scenario.family {
            ScenarioFamily::SymmetricPair | ScenarioFamily::SnrSweep => {
                self.scenario.sweep.clone().unwrap_or_default()
            }
            ScenarioFamily::Fixed | ScenarioFamily::OverloadedDemo => {
                vec![self.scenario.snr_db.unwrap_or(f64::NAN)]
            }
        }
    }

    /// Source scenario at sweep parameter `param`.
    pub fn scenario_at(&self, param: f64) -> Result<SourceScenario> {
        let sc = &self.scenario;
        match sc.family {
            ScenarioFamily::SymmetricPair => {
                SourceScenario::new(vec![-param, param], self.require_snr()?)
            }
            ScenarioFamily::SnrSweep => {
                let angle = sc.angle_deg.unwrap_or(DEFAULT_PAIR_ANGLE_DEG);
                SourceScenario::new(vec![-angle, angle], param)
            }
            ScenarioFamily::Fixed | ScenarioFamily::OverloadedDemo => {
                SourceScenario::new(self.require_angles()?.to_vec(), param)
            }
        }
    }

    pub fn source_count(&self) -> usize {
        match self.scenario.family {
            ScenarioFamily::SymmetricPair | ScenarioFamily::SnrSweep => 2,
            _ => self.scenario.angles_deg.as_ref().map_or(0, Vec::len),
        }
    }

    /// Pseudospectrum grid: the field of view plus one step on each side,
    /// so boundary points are compared against both neighbours.
    pub fn search_grid(&self) -> Result<AzimuthGrid> {
        let half = (self.run.fov_deg + self.run.grid_step_deg).min(90.0);
        AzimuthGrid::symmetric(half, self.run.grid_step_deg)
    }

    fn require_snr(&self) -> Result<f64> {
        self.scenario
            .snr_db
            .ok_or_else(|| config_err("missing required field scenario.snr_db"))
    }

    fn require_angles(&self) -> Result<&[f64]> {
        self.scenario
            .angles_deg
            .as_deref()
            .ok_or_else(|| config_err("missing required field scenario.angles_deg"))
    }

    /// Checks every field and the estimator/geometry combination.
    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::Config(_) => e,
            other => config_err(other.to_string()),
        };
        let geometry = self.geometry().map_err(as_config)?;
        self.pattern().map_err(as_config)?;
        self.data_manifold().map_err(as_config)?;

        if let Some(p) = self.manifold.perturbation {
            if !(p.phase_noise_deg >= 0.0 && p.phase_noise_deg.is_finite()) {
                return Err(config_err(
                    "manifold.perturbation.phase_noise_deg must be >= 0",
                ));
            }
            if !(0.0..1.0).contains(&p.param_tolerance) {
                return Err(config_err(
                    "manifold.perturbation.param_tolerance must lie in [0, 1)",
                ));
            }
        }

        let run = &self.run;
        if run.trials == 0 {
            return Err(config_err("run.trials must be >= 1"));
        }
        if run.snapshots == 0 {
            return Err(config_err("run.snapshots must be >= 1"));
        }
        if !(run.grid_step_deg > 0.0 && run.grid_step_deg <= 10.0) {
            return Err(config_err("run.grid_step_deg must lie in (0, 10]"));
        }
        if !(run.fov_deg > 0.0 && run.fov_deg <= 90.0) {
            return Err(config_err("run.fov_deg must lie in (0, 90]"));
        }
        if run.seed > i64::MAX as u64 {
            return Err(config_err("run.seed must fit in a signed 64-bit integer"));
        }

        let sc = &self.scenario;
        match sc.family {
            ScenarioFamily::SymmetricPair | ScenarioFamily::SnrSweep => {
                let sweep = sc
                    .sweep
                    .as_ref()
                    .ok_or_else(|| config_err("missing required field scenario.sweep"))?;
                if sweep.is_empty() {
                    return Err(config_err("scenario.sweep must not be empty"));
                }
                if sweep.iter().any(|v| !v.is_finite()) {
                    return Err(config_err("scenario.sweep values must be finite"));
                }
                if sweep.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(config_err("scenario.sweep must be strictly increasing"));
                }
                if sc.angles_deg.is_some() {
                    return Err(config_err(
                        "scenario.angles_deg is not used by pair scenarios",
                    ));
                }
            }
            ScenarioFamily::Fixed | ScenarioFamily::OverloadedDemo => {
                self.require_angles()?;
                self.require_snr()?;
                if sc.sweep.is_some() {
                    return Err(config_err("scenario.sweep is only used by sweep families"));
                }
            }
        }
        if sc.family == ScenarioFamily::SymmetricPair {
            self.require_snr()?;
            if let Some(bad) = sc
                .sweep
                .iter()
                .flatten()
                .find(|&&t| !(t > 0.0 && t <= 90.0))
            {
                return Err(config_err(format!(
                    "symmetric pair half-angle {bad} must lie in (0, 90]"
                )));
            }
        }
        if let Some(angle) = sc.angle_deg {
            if sc.family != ScenarioFamily::SnrSweep {
                return Err(config_err("scenario.angle_deg is only used by snr-sweep"));
            }
            if !(angle > 0.0 && angle <= 90.0) {
                return Err(config_err("scenario.angle_deg must lie in (0, 90]"));
            }
        }
        if let Some(snr) = sc.snr_db {
            if sc.family == ScenarioFamily::SnrSweep {
                return Err(config_err(
                    "scenario.snr_db is swept in snr-sweep; use scenario.sweep",
                ));
            }
            if !snr.is_finite() {
                return Err(config_err("scenario.snr_db must be finite"));
            }
        }
        for &p in &self.sweep_points() {
            self.scenario_at(p).map_err(as_config)?;
        }

        let sources = self.source_count();
        let n = geometry.element_count();
        match run.estimator {
            EstimatorKind::ElementMusic => {
                if sources >= n {
                    return Err(config_err(format!(
                        "element-space MUSIC resolves at most {} sources with {n} sensors, got {sources}",
                        n - 1
                    )));
                }
            }
            EstimatorKind::CoarrayMusic => {
                if !is_perfect(&geometry) {
                    return Err(config_err(format!(
                        "coarray MUSIC needs a hole-free coarray; {geometry} has holes"
                    )));
                }
                if sources > geometry.aperture() as usize {
                    return Err(config_err(format!(
                        "coarray MUSIC resolves at most {} sources, got {sources}",
                        geometry.aperture()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(table) => {
            for (key, v) in table {
                flatten(&format!("{prefix}{key}."), v, out);
            }
        }
        leaf => out.push(format!("{} = {leaf}", prefix.trim_end_matches('.'))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
manifold.geometry = "mra8"
manifold.pattern = "patch"
scenario.family = "snr-sweep"
scenario.sweep = [-10.0, -5.0, 0.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.run, RunConfig::default());
        assert_eq!(cfg.run.snapshots, 50);
        assert_eq!(cfg.run.trials, 1000);
        assert_eq!(cfg.run.fov_deg, 90.0);
        assert_eq!(cfg.run.grid_step_deg, 0.01);
        assert_eq!(cfg.geometry().unwrap().aperture(), 23);
        assert_eq!(cfg.scenario_at(-5.0).unwrap().angles_deg(), &[-10.0, 10.0]);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}scenario.snrr_db = -5.0\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("snrr_db"), "{err}");
    }

    #[test]
    fn type_mismatch_reports_line() {
        let text = format!("{MINIMAL}run.trials = \"many\"\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn missing_required_fields() {
        let err = parse_config("manifold.pattern = \"patch\"\nscenario.family = \"fixed\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("geometry"), "{err}");
        let err = parse_config(
            "manifold.geometry = \"ula8\"\nmanifold.pattern = \"patch\"\nscenario.family = \"symmetric-pair\"\nscenario.sweep = [1.0]\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("snr_db"), "{err}");
    }

    #[test]
    fn round_trip_through_text() {
        let text = r#"
manifold.geometry = [0, 1, 4, 6]
manifold.pattern = "vivaldi"
manifold.null_angle_deg = 45.0
manifold.coupling.c1_re = 0.2
manifold.coupling.c1_im = -0.05
manifold.coupling.decay = 0.5
manifold.perturbation.phase_noise_deg = 5.0
manifold.perturbation.param_tolerance = 0.1
scenario.family = "symmetric-pair"
scenario.snr_db = -5.0
scenario.sweep = [0.5, 1.0, 2.5]
run.trials = 10
run.seed = 77
run.fov_deg = 45.0
"#;
        let cfg = parse_config(text).unwrap();
        let rendered = cfg.to_text();
        assert!(
            rendered.contains("manifold.coupling.decay = 0.5"),
            "{rendered}"
        );
        let again = parse_config(&rendered).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.fingerprint(), again.fingerprint());
    }

    #[test]
    fn estimator_compatibility_checked() {
        let overloaded = |estimator: &str, geometry: &str| {
            format!(
                "manifold.geometry = \"{geometry}\"\nmanifold.pattern = \"patch\"\n\
                 scenario.family = \"overloaded-demo\"\nscenario.snr_db = 0.0\n\
                 scenario.angles_deg = [-50.0, -40.0, -30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0]\n\
                 run.estimator = \"{estimator}\"\n"
            )
        };
        assert!(parse_config(&overloaded("coarray-music", "mra8")).is_ok());
        let err = parse_config(&overloaded("element-music", "mra8")).unwrap_err();
        assert!(err.to_string().contains("at most 7"), "{err}");
        assert!(parse_config(&overloaded("coarray-music", "0,2,5,9,14,20,27,35")).is_err());
    }

    #[test]
    fn bad_values_rejected() {
        for extra in [
            "run.trials = 0",
            "run.snapshots = 0",
            "run.fov_deg = 120.0",
            "manifold.exponent = -1.0",
            "manifold.null_angle_deg = 40.0",
        ] {
            let text = format!("{MINIMAL}{extra}\n");
            assert!(parse_config(&text).is_err(), "{extra}");
        }
        let unsorted = MINIMAL.replace("[-10.0, -5.0, 0.0]", "[0.0, -5.0]");
        assert!(parse_config(&unsorted).is_err());
        let empty = MINIMAL.replace("[-10.0, -5.0, 0.0]", "[]");
        assert!(parse_config(&empty).is_err());
    }

    #[test]
    fn pattern_file_only_for_tabulated() {
        let text = format!("{MINIMAL}manifold.pattern_file = \"x.csv\"\n");
        assert!(parse_config(&text).is_err());
    }
}
