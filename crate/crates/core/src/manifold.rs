//! Gain-weighted steering vectors, mutual coupling, and snapshot synthesis.
//!
//! The steering vector of an element at position `p` (half wavelengths) is
//! `g(phi) exp(-j pi p sin phi)`. Snapshots follow `x(t) = A s(t) + n(t)`
//! with unit noise power per element; a source at `snr_db` has power
//! `10^(snr_db/10)` as seen by a 0 dBi element, so element gain enters only
//! through the steering vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::patterns::{ElementPattern, PatternPerturbation};

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayManifold {
    geometry: ArrayGeometry,
    patterns: Vec<ElementPattern>,
    coupling: Option<DMatrix<Complex64>>,
}

impl ArrayManifold {
    pub fn new(geometry: ArrayGeometry, patterns: Vec<ElementPattern>) -> Result<Self> {
        if patterns.len() != geometry.element_count() {
            return Err(Error::InvalidParameter(format!(
                "{} patterns for {} elements",
                patterns.len(),
                geometry.element_count()
            )));
        }
        Ok(Self {
            geometry,
            patterns,
            coupling: None,
        })
    }

    /// Every element shares `pattern`.
    pub fn uniform(geometry: ArrayGeometry, pattern: ElementPattern) -> Self {
        let patterns = vec![pattern; geometry.element_count()];
        Self {
            geometry,
            patterns,
            coupling: None,
        }
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn patterns(&self) -> &[ElementPattern] {
        &self.patterns
    }

    pub fn element_count(&self) -> usize {
        self.geometry.element_count()
    }

    pub fn coupling(&self) -> Option<&DMatrix<Complex64>> {
        self.coupling.as_ref()
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            self.geometry.name(),
            self.patterns[0].kind().name()
        )
    }

    /// Attaches an explicit coupling matrix. It must be symmetric with a unit
    /// diagonal.
    pub fn with_coupling(mut self, c: DMatrix<Complex64>) -> Result<Self> {
        let n = self.element_count();
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "coupling matrix is {}x{}, array has {n} elements",
                c.nrows(),
                c.ncols()
            )));
        }
        for i in 0..n {
            if (c[(i, i)] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(Error::InvalidParameter(
                    "coupling matrix diagonal must be 1".into(),
                ));
            }
            for j in 0..i {
                if (c[(i, j)] - c[(j, i)]).norm() > 1e-12 {
                    return Err(Error::InvalidParameter(
                        "coupling matrix must be symmetric".into(),
                    ));
                }
            }
        }
        self.coupling = Some(c);
        Ok(self)
    }

    /// Distance-decaying coupling: `C[i][j] = c1 decay^(|p_i - p_j| - 1)` off
    /// the diagonal. `c1 = 0` leaves the manifold uncoupled.
    pub fn apply_coupling_model(&self, c1: Complex64, decay: f64) -> Result<Self> {
        if c1.norm().is_nan() || c1.norm() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "coupling |c1| must be < 1, got {}",
                c1.norm()
            )));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling decay must lie in (0, 1), got {decay}"
            )));
        }
        let mut out = self.clone();
        if c1 == Complex64::new(0.0, 0.0) {
            out.coupling = None;
            return Ok(out);
        }
        let p = self.geometry.positions();
        let n = p.len();
        let c = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                let distance = p[i].abs_diff(p[j]) as i32;
                c1 * decay.powi(distance - 1)
            }
        });
        out.coupling = Some(c);
        Ok(out)
    }

    /// Coupling matrix, identity when none is attached.
    pub fn coupling_matrix(&self) -> DMatrix<Complex64> {
        self.coupling
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.element_count(), self.element_count()))
    }

    pub fn steering_vector(&self, azimuth_deg: f64) -> Result<DVector<Complex64>> {
        let mut a = DVector::zeros(self.element_count());
        self.steering_into(azimuth_deg, a.as_mut_slice())?;
        Ok(a)
    }

    /// Writes the steering vector for `azimuth_deg` into `out`.
    pub fn steering_into(&self, azimuth_deg: f64, out: &mut [Complex64]) -> Result<()> {
        let s = azimuth_deg.to_radians().sin();
        for ((o, &p), g) in out
            .iter_mut()
            .zip(self.geometry.positions())
            .zip(&self.patterns)
        {
            let phase = -std::f64::consts::PI * p as f64 * s;
            *o = g.evaluate(azimuth_deg)? * Complex64::from_polar(1.0, phase);
        }
        if let Some(c) = &self.coupling {
            let a = DVector::from_column_slice(out);
            out.copy_from_slice((c * a).as_slice());
        }
        Ok(())
    }

    /// `N x L` matrix whose columns are the steering vectors of `angles_deg`.
    pub fn steering_matrix(&self, angles_deg: &[f64]) -> Result<DMatrix<Complex64>> {
        let mut a = DMatrix::zeros(self.element_count(), angles_deg.len());
        for (l, &az) in angles_deg.iter().enumerate() {
            self.steering_into(az, a.column_mut(l).as_mut_slice())?;
        }
        Ok(a)
    }

    /// Independently perturbs every element pattern, drawing from `rng` in
    /// element order. Coupling is kept.
    pub fn perturbed<R: Rng + ?Sized>(&self, pert: &PatternPerturbation, rng: &mut R) -> Self {
        if pert.is_zero() {
            return self.clone();
        }
        Self {
            geometry: self.geometry.clone(),
            patterns: self.patterns.iter().map(|p| p.perturb(pert, rng)).collect(),
            coupling: self.coupling.clone(),
        }
    }
}

/// Far-field sources with per-source element-level isotropic SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    angles_deg: Vec<f64>,
    snr_db: Vec<f64>,
}

impl SourceScenario {
    /// All sources share `snr_db`.
    pub fn new(angles_deg: Vec<f64>, snr_db: f64) -> Result<Self> {
        let snr = vec![snr_db; angles_deg.len()];
        Self::with_snrs(angles_deg, snr)
    }

    pub fn with_snrs(angles_deg: Vec<f64>, snr_db: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::InvalidParameter(
                "scenario needs at least one source".into(),
            ));
        }
        if snr_db.len() != angles_deg.len() {
            return Err(Error::InvalidParameter(format!(
                "{} SNR values for {} sources",
                snr_db.len(),
                angles_deg.len()
            )));
        }
        if let Some(&a) = angles_deg.iter().find(|a| !(-90.0..=90.0).contains(*a)) {
            return Err(Error::AzimuthOutOfRange(a));
        }
        for (i, a) in angles_deg.iter().enumerate() {
            if angles_deg[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate source angle {a}"
                )));
            }
        }
        if snr_db.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return Err(Error::InvalidParameter("SNR must be finite or -inf".into()));
        }
        Ok(Self { angles_deg, snr_db })
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn snr_db(&self) -> &[f64] {
        &self.snr_db
    }

    pub fn source_count(&self) -> usize {
        self.angles_deg.len()
    }

    /// Source amplitudes `sigma_l = 10^(snr_db / 20)`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.snr_db.iter().map(|s| 10f64.powf(s / 20.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    /// `N x T` samples, one column per snapshot.
    pub data: DMatrix<Complex64>,
    pub scenario: SourceScenario,
    pub seed: Option<u64>,
    pub manifold_label: String,
}

impl SnapshotSet {
    pub fn snapshot_count(&self) -> usize {
        self.data.ncols()
    }
}

/// Circular complex Gaussian with unit variance.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws `t` snapshots. Source waveforms are drawn first (source-major),
/// then the noise (snapshot-major), so a given rng state always yields the
/// same samples.
pub fn generate_snapshots<R: Rng + ?Sized>(
    m: &ArrayManifold,
    sc: &SourceScenario,
    t: usize,
    rng: &mut R,
) -> Result<SnapshotSet> {
    if t == 0 {
        return Err(Error::InvalidParameter(
            "snapshot count must be >= 1".into(),
        ));
    }
    let n = m.element_count();
    let a = m.steering_matrix(sc.angles_deg())?;
    let amps = sc.amplitudes();
    let mut s = DMatrix::<Complex64>::zeros(sc.source_count(), t);
    for (l, &amp) in amps.iter().enumerate() {
        for k in 0..t {
            s[(l, k)] = complex_normal(rng) * amp;
        }
    }
    let mut x = &a * s;
    for k in 0..t {
        for i in 0..n {
            x[(i, k)] += complex_normal(rng);
        }
    }
    Ok(SnapshotSet {
        data: x,
        scenario: sc.clone(),
        seed: None,
        manifold_label: m.label(),
    })
}

/// `R = (1/T) X X^H`, symmetrised to be exactly Hermitian.
pub fn sample_covariance(x: &SnapshotSet) -> DMatrix<Complex64> {
    covariance_of(&x.data)
}

pub(crate) fn covariance_of(data: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let t = data.ncols() as f64;
    let r = data * data.adjoint() / Complex64::new(t, 0.0);
    (&r + r.adjoint()) * Complex64::new(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_mra, make_ula};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair(pattern: ElementPattern) -> ArrayManifold {
        ArrayManifold::uniform(ArrayGeometry::new("pair", vec![0, 1]).unwrap(), pattern)
    }

    #[test]
    fn steering_broadside_and_thirty_degrees() {
        let m = pair(ElementPattern::isotropic());
        let a0 = m.steering_vector(0.0).unwrap();
        assert_eq!(a0.as_slice(), &[c(1.0, 0.0), c(1.0, 0.0)]);
        let a30 = m.steering_vector(30.0).unwrap();
        assert!((a30[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a30[1] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn dipole_steering_scales_isotropic() {
        let iso = pair(ElementPattern::isotropic())
            .steering_vector(30.0)
            .unwrap();
        let dip = pair(ElementPattern::dipole_ref())
            .steering_vector(30.0)
            .unwrap();
        let g = 10f64.powf(2.15 / 20.0);
        for (d, i) in dip.iter().zip(iso.iter()) {
            assert!((d - i * g).norm() < 1e-14);
        }
        assert!((dip[1] - c(0.0, -1.281)).norm() < 1e-3);
    }

    #[test]
    fn steering_rejects_out_of_range() {
        let m = pair(ElementPattern::isotropic());
        assert!(matches!(
            m.steering_vector(95.0),
            Err(Error::AzimuthOutOfRange(_))
        ));
    }

    #[test]
    fn isotropic_norm_is_element_count() {
        let m = ArrayManifold::uniform(make_mra(8).unwrap(), ElementPattern::isotropic());
        for i in 0..=180 {
            let a = m.steering_vector(-90.0 + i as f64).unwrap();
            assert!((a.norm_squared() - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_is_continuous() {
        let m = ArrayManifold::uniform(make_mra(8).unwrap(), ElementPattern::default_vivaldi());
        for i in 0..90 {
            let az = -89.0 + 2.0 * i as f64;
            let a = m.steering_vector(az).unwrap();
            let b = m.steering_vector(az + 1e-6).unwrap();
            assert!((a - b).camax() < 1e-4);
        }
    }

    #[test]
    fn coupling_formula() {
        let m = ArrayManifold::uniform(make_ula(3).unwrap(), ElementPattern::isotropic())
            .apply_coupling_model(c(0.3, 0.0), 0.5)
            .unwrap();
        let cm = m.coupling_matrix();
        assert!((cm[(0, 1)] - c(0.3, 0.0)).norm() < 1e-15);
        assert!((cm[(0, 2)] - c(0.15, 0.0)).norm() < 1e-15);
        assert_eq!(cm[(0, 1)], cm[(1, 0)]);
        assert_eq!(cm[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn zero_coupling_is_identity() {
        let base = ArrayManifold::uniform(make_mra(8).unwrap(), ElementPattern::default_patch());
        let coupled = base.apply_coupling_model(c(0.0, 0.0), 0.5).unwrap();
        assert_eq!(coupled.coupling_matrix(), DMatrix::identity(8, 8));
        for az in [-70.0, -3.3, 0.0, 41.0] {
            assert_eq!(
                base.steering_vector(az).unwrap(),
                coupled.steering_vector(az).unwrap()
            );
        }
    }

    #[test]
    fn coupling_bounds_checked() {
        let m = ArrayManifold::uniform(make_ula(3).unwrap(), ElementPattern::isotropic());
        assert!(m.apply_coupling_model(c(1.0, 0.0), 0.5).is_err());
        assert!(m.apply_coupling_model(c(0.3, 0.0), 1.0).is_err());
        assert!(m.apply_coupling_model(c(0.3, 0.0), 0.0).is_err());
    }

    #[test]
    fn sparse_array_couples_less() {
        let energy = |g: ArrayGeometry| {
            let cm = ArrayManifold::uniform(g, ElementPattern::isotropic())
                .apply_coupling_model(c(0.2, 0.1), 0.6)
                .unwrap()
                .coupling_matrix();
            let n = cm.nrows();
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| cm[(i, j)].norm_sqr())
                .sum();
            off / (n * (n - 1)) as f64
        };
        assert!(energy(make_mra(8).unwrap()) < energy(make_ula(8).unwrap()));
    }

    #[test]
    fn explicit_coupling_validated() {
        let m = ArrayManifold::uniform(make_ula(2).unwrap(), ElementPattern::isotropic());
        let asym =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(1.0, 0.0)]);
        assert!(m.clone().with_coupling(asym).is_err());
        let diag =
            DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(1.0, 0.0)]);
        assert!(m.with_coupling(diag).is_err());
    }

    #[test]
    fn pattern_count_must_match() {
        let g = make_ula(3).unwrap();
        assert!(ArrayManifold::new(g, vec![ElementPattern::isotropic(); 2]).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(SourceScenario::new(vec![], 0.0).is_err());
        assert!(SourceScenario::new(vec![10.0, 10.0], 0.0).is_err());
        assert!(SourceScenario::new(vec![91.0], 0.0).is_err());
        assert!(SourceScenario::new(vec![-10.0, 10.0], f64::NEG_INFINITY).is_ok());
    }

    #[test]
    fn signal_power_matches_snr() {
        let m = pair(ElementPattern::isotropic());
        let sc = SourceScenario::new(vec![20.0], -5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = 1_000_000;
        let x = generate_snapshots(&m, &sc, t, &mut rng).unwrap();
        // Noise has unit power, so the signal part is total minus one.
        let power = x.data.row(0).iter().map(|v| v.norm_sqr()).sum::<f64>() / t as f64 - 1.0;
        let expected = 10f64.powf(-0.5);
        assert!((power / expected - 1.0).abs() < 0.01, "{power}");
    }

    #[test]
    fn silent_source_is_pure_noise() {
        let m = ArrayManifold::uniform(make_ula(4).unwrap(), ElementPattern::isotropic());
        let sc = SourceScenario::new(vec![0.0], f64::NEG_INFINITY).unwrap();
        let x = generate_snapshots(&m, &sc, 200_000, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let r = sample_covariance(&x);
        assert!((r - DMatrix::<Complex64>::identity(4, 4)).camax() < 0.02);
    }

    #[test]
    fn snapshots_are_deterministic() {
        let m = ArrayManifold::uniform(make_mra(5).unwrap(), ElementPattern::default_patch());
        let sc = SourceScenario::new(vec![-10.0, 10.0], -5.0).unwrap();
        let a = generate_snapshots(&m, &sc, 50, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_snapshots(&m, &sc, 50, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(generate_snapshots(&m, &sc, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn single_snapshot_outer_product() {
        let x = SnapshotSet {
            data: DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]),
            scenario: SourceScenario::new(vec![0.0], 0.0).unwrap(),
            seed: None,
            manifold_label: String::new(),
        };
        let r = sample_covariance(&x);
        let expected =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert_eq!(r, expected);
    }

    #[test]
    fn pure_noise_covariance_converges() {
        let m = ArrayManifold::uniform(make_ula(3).unwrap(), ElementPattern::isotropic());
        let sc = SourceScenario::new(vec![0.0], f64::NEG_INFINITY).unwrap();
        let x = generate_snapshots(&m, &sc, 1_000_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let r = sample_covariance(&x);
        assert!((r - DMatrix::<Complex64>::identity(3, 3)).camax() < 0.01);
    }

    #[test]
    fn covariance_converges_to_model() {
        let m = ArrayManifold::uniform(make_mra(8).unwrap(), ElementPattern::default_patch());
        let sc = SourceScenario::new(vec![-10.0, 10.0], -5.0).unwrap();
        let x = generate_snapshots(&m, &sc, 100_000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let r = sample_covariance(&x);
        let a = m.steering_matrix(sc.angles_deg()).unwrap();
        let p = 10f64.powf(-0.5);
        let model = &a * a.adjoint() * c(p, 0.0) + DMatrix::<Complex64>::identity(8, 8);
        assert!((r - model).camax() < 0.05);
    }
}
