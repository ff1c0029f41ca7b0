//! Monte Carlo sweeps, RMSE scoring and range mapping.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{EstimatorKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    coarray_music_with_table, pick_peaks, DoaEstimateSet, Pseudospectrum, SteeringTable,
};
use crate::geometry::ArrayGeometry;
use crate::manifold::{covariance_of, generate_snapshots, ArrayManifold, SourceScenario};
use crate::patterns::PatternPerturbation;
use crate::rng::{stream, trial_seed};

const PERTURBATION_STREAM: u64 = 1;

/// Free-space wave impedance in ohms.
pub const ETA0: f64 = 376.730;

/// RMSE between two angle sets after sorting both ascending and pairing
/// index-wise.
pub fn rmse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch(estimates.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("angle set"));
    }
    let mut e = estimates.to_vec();
    let mut t = truth.to_vec();
    e.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    let sum: f64 = e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sum / t.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub param: f64,
    pub rmse_deg: f64,
    pub trials: usize,
    pub fill_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub fingerprint: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

/// Per-trial outcome of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub param: f64,
    pub trial_rmse: Vec<f64>,
    pub fill_count: usize,
}

impl PointOutcome {
    /// `sqrt(mean(rmse_k^2))` over trials.
    pub fn rmse(&self) -> f64 {
        self.mean_squared_error().sqrt()
    }

    pub fn mean_squared_error(&self) -> f64 {
        self.trial_rmse.iter().map(|r| r * r).sum::<f64>() / self.trial_rmse.len() as f64
    }

    /// Standard error of the mean squared error.
    pub fn mse_standard_error(&self) -> f64 {
        let n = self.trial_rmse.len() as f64;
        if n < 2.0 {
            return f64::INFINITY;
        }
        let mean = self.mean_squared_error();
        let var = self
            .trial_rmse
            .iter()
            .map(|r| (r * r - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }

    pub fn summary(&self) -> SweepPoint {
        SweepPoint {
            param: self.param,
            rmse_deg: self.rmse(),
            trials: self.trial_rmse.len(),
            fill_count: self.fill_count,
        }
    }
}

/// Direction finder with its steering vectors precomputed on the search grid.
#[derive(Debug, Clone)]
pub enum Estimator {
    Element(SteeringTable),
    Coarray {
        geometry: ArrayGeometry,
        table: SteeringTable,
    },
}

impl Estimator {
    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        let grid = cfg.search_grid()?;
        match cfg.run.estimator {
            EstimatorKind::ElementMusic => Ok(Self::Element(SteeringTable::new(
                &cfg.nominal_manifold()?,
                &grid,
            )?)),
            EstimatorKind::CoarrayMusic => {
                let geometry = cfg.geometry()?;
                let table = SteeringTable::virtual_ula(geometry.aperture() as usize + 1, &grid)?;
                Ok(Self::Coarray { geometry, table })
            }
        }
    }

    pub fn spectrum(&self, r: &DMatrix<Complex64>, sources: usize) -> Result<Pseudospectrum> {
        match self {
            Self::Element(table) => {
                if sources == 0 || sources >= table.elements() {
                    return Err(Error::Rank {
                        sources,
                        dimension: table.elements(),
                    });
                }
                table.music(r, sources)
            }
            Self::Coarray { geometry, table } => {
                coarray_music_with_table(r, geometry, sources, table)
            }
        }
    }
}

/// One trial: realization, spectrum and estimates.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub spectrum: Pseudospectrum,
    pub estimates: DoaEstimateSet,
    pub truth: Vec<f64>,
}

/// Shared, read-only state of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRunner {
    cfg: ExperimentConfig,
    data_manifold: ArrayManifold,
    perturbation: PatternPerturbation,
    estimator: Estimator,
}

impl SweepRunner {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            data_manifold: cfg.data_manifold()?,
            perturbation: cfg.perturbation(),
            estimator: Estimator::for_config(cfg)?,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    /// Runs one realization of `scenario` seeded by `seed`.
    ///
    /// Perturbations come from a separate stream of the same seed, so a
    /// perturbed and an unperturbed run see identical snapshot noise.
    pub fn realize(&self, scenario: &SourceScenario, seed: u64) -> Result<TrialOutput> {
        let mut pert_rng = stream(seed);
        pert_rng.set_stream(PERTURBATION_STREAM);
        let manifold = self
            .data_manifold
            .perturbed(&self.perturbation, &mut pert_rng);
        let mut rng = stream(seed);
        let x = generate_snapshots(&manifold, scenario, self.cfg.run.snapshots, &mut rng)?;
        let r = covariance_of(&x.data);
        let sources = scenario.source_count();
        let spectrum = self.estimator.spectrum(&r, sources)?;
        let estimates = pick_peaks(&spectrum, sources, self.cfg.run.fov_deg)?;
        Ok(TrialOutput {
            spectrum,
            estimates,
            truth: scenario.angles_deg().to_vec(),
        })
    }

    fn trial(&self, scenario: &SourceScenario, point: usize, trial: usize) -> Result<(f64, usize)> {
        let seed = trial_seed(self.cfg.run.seed, point as u64, trial as u64);
        let out = self.realize(scenario, seed)?;
        Ok((
            rmse(&out.estimates.angles, &out.truth)?,
            out.estimates.fill_count(),
        ))
    }

    /// Runs all trials of sweep point `point` with parameter `param`.
    /// Trials may run in parallel; results keep trial order.
    pub fn run_point(&self, point: usize, param: f64) -> Result<PointOutcome> {
        let scenario = self.cfg.scenario_at(param)?;
        let trials: Vec<(f64, usize)> = (0..self.cfg.run.trials)
            .into_par_iter()
            .map(|k| self.trial(&scenario, point, k))
            .collect::<Result<_>>()?;
        Ok(PointOutcome {
            param,
            fill_count: trials.iter().map(|t| t.1).sum(),
            trial_rmse: trials.into_iter().map(|t| t.0).collect(),
        })
    }

    pub fn run(&self) -> Result<SweepResult> {
        let points = self
            .cfg
            .sweep_points()
            .into_iter()
            .enumerate()
            .map(|(i, p)| self.run_point(i, p).map(|o| o.summary()))
            .collect::<Result<_>>()?;
        Ok(SweepResult {
            fingerprint: self.cfg.fingerprint(),
            seed: self.cfg.run.seed,
            points,
        })
    }
}

/// Runs every trial of every sweep point on the global thread pool.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    SweepRunner::new(cfg)?.run()
}

/// As [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    let runner = SweepRunner::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| runner.run())
}

/// Single realization of a fixed or overloaded scenario at the configured
/// SNR, seeded from the master seed.
pub fn run_overloaded_demo(cfg: &ExperimentConfig) -> Result<TrialOutput> {
    let runner = SweepRunner::new(cfg)?;
    let snr = cfg
        .scenario
        .snr_db
        .ok_or_else(|| Error::Config("missing required field scenario.snr_db".into()))?;
    runner.realize(&cfg.scenario_at(snr)?, trial_seed(cfg.run.seed, 0, 0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmit power, W.
    pub transmit_power: f64,
    /// Transmit antenna gain, linear.
    pub transmit_gain: f64,
    /// Wavelength, m.
    pub wavelength: f64,
    /// Noise power, W.
    pub noise_power: f64,
    /// Wave impedance, ohms.
    pub eta0: f64,
}

impl LinkBudget {
    pub fn new(
        transmit_power: f64,
        transmit_gain: f64,
        wavelength: f64,
        noise_power: f64,
    ) -> Result<Self> {
        let b = Self {
            transmit_power,
            transmit_gain,
            wavelength,
            noise_power,
            eta0: ETA0,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("transmit power", self.transmit_power),
            ("transmit gain", self.transmit_gain),
            ("wavelength", self.wavelength),
            ("noise power", self.noise_power),
            ("wave impedance", self.eta0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One-way distance at which the element-level SNR equals `snr_linear`:
/// `r = sqrt(Pt Gt lambda^2 / (16 pi^2 eta0 PN SNR))`.
pub fn snr_to_range(budget: &LinkBudget, snr_linear: f64) -> Result<f64> {
    budget.check()?;
    if !(snr_linear > 0.0 && snr_linear.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "SNR must be positive, got {snr_linear}"
        )));
    }
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let num = budget.transmit_power * budget.transmit_gain * budget.wavelength * budget.wavelength;
    let den = 16.0 * pi2 * budget.eta0 * budget.noise_power * snr_linear;
    Ok((num / den).sqrt())
}

/// Range `r / r0` gained when the required SNR drops from `snr0_db` to
/// `snr_db`, all link parameters fixed.
pub fn range_ratio(snr0_db: f64, snr_db: f64) -> f64 {
    10f64.powf((snr0_db - snr_db) / 20.0)
}

/// Ratio under the linear law `r = r0 SNR0 / SNR`, which drops the square
/// root of the range equation. Kept for comparison only.
pub fn range_ratio_linear(snr0_db: f64, snr_db: f64) -> f64 {
    10f64.powf((snr0_db - snr_db) / 10.0)
}

/// Smallest SNR at which an RMSE-vs-SNR curve reaches `target_rmse`.
///
/// Only the longest high-SNR tail on which the RMSE is non-increasing is
/// used; inside it the curve is interpolated linearly in
/// `(SNR dB, log10 RMSE)`.
pub fn required_snr_for_rmse(curve: &SweepResult, target_rmse: f64) -> Result<f64> {
    let pts = &curve.points;
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "curve needs at least 2 points, got {}",
            pts.len()
        )));
    }
    if target_rmse.is_nan() || target_rmse <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "target RMSE must be positive, got {target_rmse}"
        )));
    }
    let mut start = pts.len() - 1;
    while start > 0 && pts[start - 1].rmse_deg >= pts[start].rmse_deg {
        start -= 1;
    }
    let branch = &pts[start..];
    let lo = branch.last().expect("branch is non-empty").rmse_deg;
    let hi = branch[0].rmse_deg;
    if target_rmse < lo || target_rmse > hi {
        return Err(Error::OutOfRange(format!(
            "target RMSE {target_rmse} outside the monotone branch [{lo}, {hi}]"
        )));
    }
    for w in branch.windows(2) {
        let (a, b) = (w[0], w[1]);
        if target_rmse == a.rmse_deg {
            return Ok(a.param);
        }
        if target_rmse > b.rmse_deg {
            let (la, lb) = (a.rmse_deg.log10(), b.rmse_deg.log10());
            let t = (target_rmse.log10() - la) / (lb - la);
            return Ok(a.param + t * (b.param - a.param));
        }
    }
    Ok(branch.last().expect("branch is non-empty").param)
}
