//! Complex element gain patterns in the azimuth plane.
//!
//! Gains are linear voltage ratios relative to a 0 dBi isotropic element.
//! The parametric shapes are surrogates for measured or simulated element
//! responses: a constant-gain half-wave dipole, a cos-power patch with flat
//! phase, and a high-gain Vivaldi with deep side nulls and a rippling phase
//! response. Measured data can be supplied as a [`PatternTable`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-wave dipole gain in dBi.
pub const DIPOLE_GAIN_DBI: f64 = 2.15;
/// Floor applied to cos-power factors so gains stay finite at endfire.
pub const MAGNITUDE_FLOOR: f64 = 1e-3;

pub const TABLE_HEADER: &str = "azimuth_deg,gain_dbi,phase_deg";

/// Spacing of the internal grid on which phase calibration noise is drawn.
const PHASE_NOISE_GRID_STEP_DEG: f64 = 1.0;
const PHASE_NOISE_GRID_LEN: usize = 181;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Isotropic,
    #[serde(alias = "dipole", alias = "reference")]
    DipoleRef,
    Patch,
    Vivaldi,
    Tabulated,
}

impl PatternKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "isotropic" => Some(Self::Isotropic),
            "dipole_ref" | "dipole" | "reference" => Some(Self::DipoleRef),
            "patch" => Some(Self::Patch),
            "vivaldi" => Some(Self::Vivaldi),
            "tabulated" => Some(Self::Tabulated),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Isotropic => "isotropic",
            Self::DipoleRef => "dipole_ref",
            Self::Patch => "patch",
            Self::Vivaldi => "vivaldi",
            Self::Tabulated => "tabulated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternShape {
    Isotropic,
    DipoleRef,
    Patch {
        peak_gain_dbi: f64,
        exponent: f64,
    },
    Vivaldi {
        peak_gain_dbi: f64,
        null_angle_deg: f64,
        phase_ripple_deg: f64,
        ripple_period_deg: f64,
    },
    Tabulated(PatternTable),
}

/// An element response `g(phi)`, optionally carrying an additive phase
/// error sampled on a 1 degree grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementPattern {
    shape: PatternShape,
    phase_error_deg: Option<Vec<f64>>,
}

/// Calibration and manufacturing errors applied to a nominal pattern.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PatternPerturbation {
    /// Standard deviation of additive phase noise, degrees.
    pub phase_noise_std_deg: f64,
    /// Fractional bound on each shape parameter (0.10 means +/-10%).
    pub param_tolerance: f64,
}

impl PatternPerturbation {
    pub fn is_zero(&self) -> bool {
        self.phase_noise_std_deg == 0.0 && self.param_tolerance == 0.0
    }
}

fn check_azimuth(azimuth_deg: f64) -> Result<()> {
    if (-90.0..=90.0).contains(&azimuth_deg) {
        Ok(())
    } else {
        Err(Error::AzimuthOutOfRange(azimuth_deg))
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Field exponent of a cos-power main lobe whose directivity matches
/// `peak_gain_dbi`. A power pattern `cos^n` over a half space has
/// directivity `2 (n + 1)`.
fn fitted_main_lobe_exponent(peak_gain_dbi: f64) -> f64 {
    let power_exponent = 10f64.powf(peak_gain_dbi / 10.0) / 2.0 - 1.0;
    (power_exponent / 2.0).max(0.0)
}

impl ElementPattern {
    pub fn isotropic() -> Self {
        Self::from_shape(PatternShape::Isotropic)
    }

    pub fn dipole_ref() -> Self {
        Self::from_shape(PatternShape::DipoleRef)
    }

    /// Cos-power patch: `G(phi) = peak + 20 q log10(max(cos phi, eps))` dBi,
    /// zero phase.
    pub fn patch(peak_gain_dbi: f64, exponent: f64) -> Result<Self> {
        if !(peak_gain_dbi > 0.0 && peak_gain_dbi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "patch peak gain must be positive, got {peak_gain_dbi}"
            )));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "patch exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self::from_shape(PatternShape::Patch {
            peak_gain_dbi,
            exponent,
        }))
    }

    pub fn default_patch() -> Self {
        Self::patch(8.0, 1.5).expect("default patch parameters are valid")
    }

    /// Vivaldi surrogate: cos-power main lobe with directivity fitted to the
    /// peak gain, times a null factor `|cos(pi phi / (2 phi_null))|` that
    /// vanishes at `+/-phi_null`. Phase ripples as
    /// `ripple sin(2 pi phi / period)`.
    pub fn vivaldi(
        peak_gain_dbi: f64,
        null_angle_deg: f64,
        phase_ripple_deg: f64,
        ripple_period_deg: f64,
    ) -> Result<Self> {
        if !(peak_gain_dbi > 0.0 && peak_gain_dbi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "vivaldi peak gain must be positive, got {peak_gain_dbi}"
            )));
        }
        if !(null_angle_deg > 0.0 && null_angle_deg <= 90.0) {
            return Err(Error::InvalidParameter(format!(
                "vivaldi null angle must lie in (0, 90], got {null_angle_deg}"
            )));
        }
        if !phase_ripple_deg.is_finite() || phase_ripple_deg < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "vivaldi phase ripple must be non-negative, got {phase_ripple_deg}"
            )));
        }
        if !(ripple_period_deg > 0.0 && ripple_period_deg.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "vivaldi ripple period must be positive, got {ripple_period_deg}"
            )));
        }
        Ok(Self::from_shape(PatternShape::Vivaldi {
            peak_gain_dbi,
            null_angle_deg,
            phase_ripple_deg,
            ripple_period_deg,
        }))
    }

    pub fn default_vivaldi() -> Self {
        Self::vivaldi(13.0, 50.0, 60.0, 25.0).expect("default vivaldi parameters are valid")
    }

    pub fn tabulated(table: PatternTable) -> Self {
        Self::from_shape(PatternShape::Tabulated(table))
    }

    /// Built-in pattern of `kind` with default parameters. Tabulated
    /// patterns need a table and are rejected here.
    pub fn builtin(kind: PatternKind) -> Result<Self> {
        match kind {
            PatternKind::Isotropic => Ok(Self::isotropic()),
            PatternKind::DipoleRef => Ok(Self::dipole_ref()),
            PatternKind::Patch => Ok(Self::default_patch()),
            PatternKind::Vivaldi => Ok(Self::default_vivaldi()),
            PatternKind::Tabulated => Err(Error::InvalidParameter(
                "tabulated patterns must be loaded from a file".into(),
            )),
        }
    }

    fn from_shape(shape: PatternShape) -> Self {
        Self {
            shape,
            phase_error_deg: None,
        }
    }

    pub fn shape(&self) -> &PatternShape {
        &self.shape
    }

    pub fn kind(&self) -> PatternKind {
        match self.shape {
            PatternShape::Isotropic => PatternKind::Isotropic,
            PatternShape::DipoleRef => PatternKind::DipoleRef,
            PatternShape::Patch { .. } => PatternKind::Patch,
            PatternShape::Vivaldi { .. } => PatternKind::Vivaldi,
            PatternShape::Tabulated(_) => PatternKind::Tabulated,
        }
    }

    /// Nominal peak gain in dBi (the value configured for parametric shapes,
    /// the table maximum for tabulated ones).
    pub fn peak_gain_dbi(&self) -> f64 {
        match &self.shape {
            PatternShape::Isotropic => 0.0,
            PatternShape::DipoleRef => DIPOLE_GAIN_DBI,
            PatternShape::Patch { peak_gain_dbi, .. }
            | PatternShape::Vivaldi { peak_gain_dbi, .. } => *peak_gain_dbi,
            PatternShape::Tabulated(t) => t
                .samples()
                .iter()
                .map(|s| s.gain_dbi)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Complex gain at `azimuth_deg`.
    pub fn evaluate(&self, azimuth_deg: f64) -> Result<Complex64> {
        check_azimuth(azimuth_deg)?;
        let (magnitude, mut phase_deg) = self.shape_response(azimuth_deg);
        if let Some(errors) = &self.phase_error_deg {
            phase_deg += interpolate_uniform(errors, azimuth_deg);
        }
        if phase_deg == 0.0 {
            return Ok(Complex64::new(magnitude, 0.0));
        }
        Ok(Complex64::from_polar(magnitude, phase_deg.to_radians()))
    }

    /// Gain magnitude in dBi at `azimuth_deg`.
    pub fn gain_dbi(&self, azimuth_deg: f64) -> Result<f64> {
        Ok(20.0 * self.evaluate(azimuth_deg)?.norm().log10())
    }

    fn shape_response(&self, az: f64) -> (f64, f64) {
        match &self.shape {
            PatternShape::Isotropic => (1.0, 0.0),
            PatternShape::DipoleRef => (db_to_linear(DIPOLE_GAIN_DBI), 0.0),
            PatternShape::Patch {
                peak_gain_dbi,
                exponent,
            } => {
                let c = az.to_radians().cos().max(MAGNITUDE_FLOOR);
                (db_to_linear(*peak_gain_dbi) * c.powf(*exponent), 0.0)
            }
            PatternShape::Vivaldi {
                peak_gain_dbi,
                null_angle_deg,
                phase_ripple_deg,
                ripple_period_deg,
            } => {
                let main = az
                    .to_radians()
                    .cos()
                    .max(MAGNITUDE_FLOOR)
                    .powf(fitted_main_lobe_exponent(*peak_gain_dbi));
                let null = (PI * az / (2.0 * null_angle_deg))
                    .cos()
                    .abs()
                    .max(MAGNITUDE_FLOOR);
                let phase = phase_ripple_deg * (2.0 * PI * az / ripple_period_deg).sin();
                (db_to_linear(*peak_gain_dbi) * main * null, phase)
            }
            PatternShape::Tabulated(table) => {
                let (gain_dbi, phase) = table.interpolate(az);
                (db_to_linear(gain_dbi), phase)
            }
        }
    }

    /// Draws a perturbed copy: every shape parameter is scaled by an
    /// independent factor from `U[1 - tol, 1 + tol]`, and Gaussian phase
    /// noise is added on a 1 degree grid and linearly interpolated.
    ///
    /// A zero perturbation returns an identical pattern.
    pub fn perturb<R: Rng + ?Sized>(&self, pert: &PatternPerturbation, rng: &mut R) -> Self {
        let mut out = self.clone();
        let tol = pert.param_tolerance.max(0.0);
        if tol > 0.0 {
            let factor = Uniform::new_inclusive(1.0 - tol, 1.0 + tol)
                .expect("tolerance bounds are finite and ordered");
            let mut scale = |v: &mut f64| *v *= factor.sample(rng);
            match &mut out.shape {
                PatternShape::Patch {
                    peak_gain_dbi,
                    exponent,
                } => {
                    scale(peak_gain_dbi);
                    scale(exponent);
                }
                PatternShape::Vivaldi {
                    peak_gain_dbi,
                    null_angle_deg,
                    phase_ripple_deg,
                    ripple_period_deg,
                } => {
                    scale(peak_gain_dbi);
                    scale(null_angle_deg);
                    *null_angle_deg = null_angle_deg.min(90.0);
                    scale(phase_ripple_deg);
                    scale(ripple_period_deg);
                }
                // No free shape parameters.
                PatternShape::Isotropic | PatternShape::DipoleRef | PatternShape::Tabulated(_) => {}
            }
        }
        if pert.phase_noise_std_deg > 0.0 {
            let normal = Normal::new(0.0, pert.phase_noise_std_deg)
                .expect("phase noise std is finite and positive");
            let mut errors = out
                .phase_error_deg
                .take()
                .unwrap_or_else(|| vec![0.0; PHASE_NOISE_GRID_LEN]);
            for e in &mut errors {
                *e += normal.sample(rng);
            }
            out.phase_error_deg = Some(errors);
        }
        out
    }

    /// Samples the pattern on `-90..=90` with `step_deg` spacing.
    pub fn to_table(&self, step_deg: f64) -> Result<PatternTable> {
        if step_deg.is_nan() || step_deg <= 0.0 || 180.0 % step_deg != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "export step must divide 180 degrees, got {step_deg}"
            )));
        }
        let count = (180.0 / step_deg).round() as usize;
        let samples = (0..=count)
            .map(|i| {
                let az = -90.0 + i as f64 * step_deg;
                let g = self.evaluate(az)?;
                Ok(PatternSample {
                    azimuth_deg: az,
                    gain_dbi: 20.0 * g.norm().log10(),
                    phase_deg: g.arg().to_degrees(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PatternTable::new(samples)
    }
}

/// Linear interpolation on the fixed 1 degree grid spanning [-90, 90].
fn interpolate_uniform(values: &[f64], az: f64) -> f64 {
    let x = (az + 90.0) / PHASE_NOISE_GRID_STEP_DEG;
    let i = (x.floor() as usize).min(values.len() - 2);
    let t = x - i as f64;
    if t == 0.0 {
        values[i]
    } else {
        values[i] + t * (values[i + 1] - values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    pub azimuth_deg: f64,
    pub gain_dbi: f64,
    pub phase_deg: f64,
}

/// Tabulated pattern covering [-90, 90] with strictly increasing azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTable {
    samples: Vec<PatternSample>,
    unwrapped_phase_deg: Vec<f64>,
}

impl PatternTable {
    pub fn new(samples: Vec<PatternSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.azimuth_deg.is_finite() && s.gain_dbi.is_finite() && s.phase_deg.is_finite()) {
                return Err(Error::PatternTable {
                    row: i + 1,
                    message: "non-finite value".into(),
                });
            }
            if i > 0 && s.azimuth_deg <= samples[i - 1].azimuth_deg {
                return Err(Error::PatternTable {
                    row: i + 1,
                    message: format!(
                        "azimuth {} does not increase past {}",
                        s.azimuth_deg,
                        samples[i - 1].azimuth_deg
                    ),
                });
            }
        }
        let (first, last) = match (samples.first(), samples.last()) {
            (Some(f), Some(l)) if samples.len() >= 2 => (f, l),
            _ => {
                return Err(Error::PatternTable {
                    row: samples.len(),
                    message: "need at least two samples".into(),
                })
            }
        };
        if first.azimuth_deg > -90.0 {
            return Err(Error::PatternTable {
                row: 1,
                message: format!("table starts at {} deg, must cover -90", first.azimuth_deg),
            });
        }
        if last.azimuth_deg < 90.0 {
            return Err(Error::PatternTable {
                row: samples.len(),
                message: format!("table ends at {} deg, must cover 90", last.azimuth_deg),
            });
        }

        let mut unwrapped_phase_deg = Vec::with_capacity(samples.len());
        let mut offset = 0.0;
        for (i, s) in samples.iter().enumerate() {
            if i > 0 {
                let prev = samples[i - 1].phase_deg;
                let jump = s.phase_deg - prev;
                offset -= 360.0 * (jump / 360.0).round();
            }
            unwrapped_phase_deg.push(s.phase_deg + offset);
        }
        Ok(Self {
            samples,
            unwrapped_phase_deg,
        })
    }

    pub fn samples(&self) -> &[PatternSample] {
        &self.samples
    }

    /// Gain (dB) and unwrapped phase (degrees) at `az`, linearly interpolated.
    fn interpolate(&self, az: f64) -> (f64, f64) {
        let hi = self
            .samples
            .partition_point(|s| s.azimuth_deg < az)
            .clamp(1, self.samples.len() - 1);
        let lo = hi - 1;
        let (a, b) = (&self.samples[lo], &self.samples[hi]);
        if az == b.azimuth_deg {
            return (b.gain_dbi, self.unwrapped_phase_deg[hi]);
        }
        if az == a.azimuth_deg {
            return (a.gain_dbi, self.unwrapped_phase_deg[lo]);
        }
        let t = (az - a.azimuth_deg) / (b.azimuth_deg - a.azimuth_deg);
        let gain = a.gain_dbi + t * (b.gain_dbi - a.gain_dbi);
        let (pa, pb) = (self.unwrapped_phase_deg[lo], self.unwrapped_phase_deg[hi]);
        (gain, pa + t * (pb - pa))
    }

    /// Parses the comma-separated table format. Row numbers in errors are
    /// 1-based line numbers of the input.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim() == TABLE_HEADER => {}
            Some((i, header)) => {
                return Err(Error::PatternTable {
                    row: i + 1,
                    message: format!("expected header `{TABLE_HEADER}`, got `{}`", header.trim()),
                })
            }
            None => {
                return Err(Error::PatternTable {
                    row: 0,
                    message: "empty table".into(),
                })
            }
        }
        let mut samples = Vec::new();
        let mut line_numbers = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match fields.as_slice() {
                [a, g, p] => a
                    .parse::<f64>()
                    .and_then(|a| Ok((a, g.parse::<f64>()?, p.parse::<f64>()?)))
                    .ok(),
                _ => None,
            };
            let Some((azimuth_deg, gain_dbi, phase_deg)) = parsed else {
                return Err(Error::PatternTable {
                    row: i + 1,
                    message: format!("malformed row `{}`", line.trim()),
                });
            };
            samples.push(PatternSample {
                azimuth_deg,
                gain_dbi,
                phase_deg,
            });
            line_numbers.push(i + 1);
        }
        Self::new(samples).map_err(|e| match e {
            // Map sample indices back onto file lines.
            Error::PatternTable { row, message } => Error::PatternTable {
                row: line_numbers
                    .get(row.saturating_sub(1))
                    .copied()
                    .unwrap_or(row),
                message,
            },
            other => other,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.samples.len() + 1));
        out.push_str(TABLE_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.azimuth_deg, s.gain_dbi, s.phase_deg);
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Shorthand for [`PatternTable::read`] wrapped as an element pattern.
pub fn load_tabulated(path: &Path) -> Result<ElementPattern> {
    PatternTable::read(path).map(ElementPattern::tabulated)
}
