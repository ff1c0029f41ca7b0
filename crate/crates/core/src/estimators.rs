//! MUSIC and coarray MUSIC direction finding.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{difference_coarray, is_perfect, make_ula, ArrayGeometry};
use crate::manifold::ArrayManifold;
use crate::patterns::ElementPattern;

/// Relative asymmetry accepted by [`hermitian_eig`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;
/// Lower clamp for pseudospectrum denominators.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `i` belongs to `values[i]`.
    pub vectors: DMatrix<Complex64>,
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(r: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    if !r.is_square() {
        return Err(Error::NotHermitian {
            asymmetry: f64::INFINITY,
        });
    }
    let asymmetry = max_abs(&(r - r.adjoint()));
    if asymmetry > HERMITIAN_TOLERANCE * max_abs(r).max(1.0) {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..r.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(r.nrows(), r.ncols(), |row, col| {
        eig.eigenvectors[(row, order[col])]
    });
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvectors of the `N - L` smallest eigenvalues.
#[derive(Debug, Clone)]
pub struct NoiseSubspace {
    pub basis: DMatrix<Complex64>,
    pub eigenvalues: Vec<f64>,
}

impl NoiseSubspace {
    pub fn from_covariance(r: &DMatrix<Complex64>, sources: usize) -> Result<Self> {
        let n = r.nrows();
        if sources == 0 || sources >= n {
            return Err(Error::Rank {
                sources,
                dimension: n,
            });
        }
        let eig = hermitian_eig(r)?;
        let dim = n - sources;
        Ok(Self {
            basis: eig.vectors.columns(0, dim).into_owned(),
            eigenvalues: eig.values,
        })
    }

    /// `a^H V_N V_N^H a`.
    pub fn projection_energy(&self, a: &[Complex64]) -> f64 {
        self.basis
            .column_iter()
            .map(|v| {
                v.iter()
                    .zip(a)
                    .map(|(vi, ai)| vi.conj() * ai)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum()
    }
}

/// Uniform azimuth grid in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzimuthGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl AzimuthGrid {
    /// Points `start, start + step, ...` up to and including `stop`
    /// (within half a step).
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if !(-90.0..=90.0).contains(&start) || !(-90.0..=90.0).contains(&stop) || stop < start {
            return Err(Error::InvalidParameter(format!(
                "grid [{start}, {stop}] must lie within [-90, 90]"
            )));
        }
        let len = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(Self { start, step, len })
    }

    /// Grid over `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        Self::new(-half_width, half_width, step)
    }

    /// Default search grid: the full field of view at 0.01 degree spacing.
    pub fn full() -> Self {
        Self::symmetric(90.0, 0.01).expect("static grid is valid")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn point(&self, i: usize) -> f64 {
        // Rounding keeps points like 10.00 exact on a 0.01 grid.
        let x = self.start + i as f64 * self.step;
        (x * 1e9).round() / 1e9
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }
}

/// Steering vectors of a manifold precomputed over a grid, row-major.
#[derive(Debug, Clone)]
pub struct SteeringTable {
    grid: Vec<f64>,
    step: f64,
    elements: usize,
    vectors: Vec<Complex64>,
}

impl SteeringTable {
    pub fn new(m: &ArrayManifold, grid: &AzimuthGrid) -> Result<Self> {
        let elements = m.element_count();
        let points = grid.points();
        let mut vectors = vec![Complex64::new(0.0, 0.0); elements * points.len()];
        for (chunk, &az) in vectors.chunks_exact_mut(elements).zip(&points) {
            m.steering_into(az, chunk)?;
        }
        Ok(Self {
            grid: points,
            step: grid.step(),
            elements,
            vectors,
        })
    }

    /// Phase-only virtual ULA of `len` sensors, used by coarray MUSIC.
    pub fn virtual_ula(len: usize, grid: &AzimuthGrid) -> Result<Self> {
        let m = ArrayManifold::uniform(make_ula(len)?, ElementPattern::isotropic());
        Self::new(&m, grid)
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// MUSIC pseudospectrum of `r` assuming `sources` signals.
    pub fn music(&self, r: &DMatrix<Complex64>, sources: usize) -> Result<Pseudospectrum> {
        if r.nrows() != self.elements {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{}, manifold has {} elements",
                r.nrows(),
                r.ncols(),
                self.elements
            )));
        }
        let noise = NoiseSubspace::from_covariance(r, sources)?;
        // Conjugated noise basis, one contiguous row per eigenvector.
        let rows: Vec<Complex64> = noise
            .basis
            .column_iter()
            .flat_map(|v| v.iter().map(|x| x.conj()).collect::<Vec<_>>())
            .collect();
        let values = self
            .vectors
            .chunks_exact(self.elements)
            .map(|a| {
                let denom: f64 = rows
                    .chunks_exact(self.elements)
                    .map(|v| {
                        v.iter()
                            .zip(a)
                            .map(|(x, y)| x * y)
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .sum();
                1.0 / denom.max(DENOMINATOR_FLOOR)
            })
            .collect();
        Ok(Pseudospectrum {
            grid: self.grid.clone(),
            step: self.step,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pseudospectrum {
    pub grid: Vec<f64>,
    pub step: f64,
    pub values: Vec<f64>,
}

impl Pseudospectrum {
    /// Grid azimuth of the largest value.
    pub fn argmax(&self) -> Option<f64> {
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.grid[i])
    }

    /// `10 log10(P / max P)`.
    pub fn normalized_db(&self) -> Vec<f64> {
        let peak = self
            .values
            .iter()
            .copied()
            .fold(f64::MIN_POSITIVE, f64::max);
        self.values
            .iter()
            .map(|v| 10.0 * (v / peak).log10())
            .collect()
    }
}

/// Element-space MUSIC over `grid` using the steering vectors of `m`.
pub fn music_pseudospectrum(
    r: &DMatrix<Complex64>,
    m: &ArrayManifold,
    sources: usize,
    grid: &AzimuthGrid,
) -> Result<Pseudospectrum> {
    let n = m.element_count();
    if sources == 0 || sources >= n {
        return Err(Error::Rank {
            sources,
            dimension: n,
        });
    }
    SteeringTable::new(m, grid)?.music(r, sources)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimateSet {
    /// Estimates in ascending order.
    pub angles: Vec<f64>,
    /// `filled[i]` marks `angles[i]` as a fill-in rather than a local maximum.
    pub filled: Vec<bool>,
    /// Local maxima found in the search window.
    pub peaks_found: usize,
}

impl DoaEstimateSet {
    pub fn fill_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }
}

/// Picks the `count` largest local maxima with `|phi| <= fov_deg`, refined by
/// a parabola through the log-values of each peak and its neighbours.
///
/// A grid endpoint counts as a maximum when it beats its only neighbour.
/// Missing peaks are filled with the largest remaining grid values in the
/// window and flagged.
pub fn pick_peaks(ps: &Pseudospectrum, count: usize, fov_deg: f64) -> Result<DoaEstimateSet> {
    let n = ps.values.len();
    if n == 0 {
        return Err(Error::Empty("pseudospectrum grid"));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("peak count must be >= 1".into()));
    }
    let window: Vec<usize> = (0..n)
        .filter(|&i| ps.grid[i].abs() <= fov_deg + 1e-9)
        .collect();
    if window.is_empty() {
        return Err(Error::Empty("search window"));
    }
    let v = &ps.values;
    let mut peaks: Vec<usize> = window
        .iter()
        .copied()
        .filter(|&i| (i == 0 || v[i] > v[i - 1]) && (i + 1 == n || v[i] > v[i + 1]))
        .collect();
    let peaks_found = peaks.len();
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    peaks.truncate(count);

    let mut estimates: Vec<(f64, bool)> = peaks.iter().map(|&i| (refine(ps, i), false)).collect();

    if estimates.len() < count {
        let mut rest: Vec<usize> = window
            .iter()
            .copied()
            .filter(|i| !peaks.contains(i))
            .collect();
        rest.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        estimates.extend(
            rest.into_iter()
                .take(count - estimates.len())
                .map(|i| (ps.grid[i], true)),
        );
    }
    estimates.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DoaEstimateSet {
        angles: estimates.iter().map(|e| e.0).collect(),
        filled: estimates.iter().map(|e| e.1).collect(),
        peaks_found,
    })
}

/// Vertex of the parabola through the log-values at `i - 1, i, i + 1`.
fn refine(ps: &Pseudospectrum, i: usize) -> f64 {
    if i == 0 || i + 1 >= ps.values.len() {
        return ps.grid[i];
    }
    let (ym, y0, yp) = (
        ps.values[i - 1].ln(),
        ps.values[i].ln(),
        ps.values[i + 1].ln(),
    );
    let curvature = ym - 2.0 * y0 + yp;
    if curvature.is_nan() || curvature >= 0.0 {
        return ps.grid[i];
    }
    let offset = (0.5 * (ym - yp) / curvature).clamp(-0.5, 0.5);
    ps.grid[i] + offset * ps.step
}

/// Spatially smoothed virtual covariance of a hole-free sparse array.
///
/// Lag statistics `z[m]` average `R[i][j]` over pairs with `p_i - p_j = m`;
/// the output is `(1/(M+1)) sum_k z_k z_k^H` over the `M + 1` windows
/// `z_k = [z[k-M], ..., z[k]]`.
pub fn coarray_covariance(r: &DMatrix<Complex64>, g: &ArrayGeometry) -> Result<DMatrix<Complex64>> {
    let n = g.element_count();
    if r.nrows() != n || r.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "covariance is {}x{}, geometry has {n} elements",
            r.nrows(),
            r.ncols()
        )));
    }
    let asymmetry = max_abs(&(r - r.adjoint()));
    if asymmetry > HERMITIAN_TOLERANCE * max_abs(r).max(1.0) {
        return Err(Error::NotHermitian { asymmetry });
    }
    let aperture = g.aperture() as usize;
    let holes = difference_coarray(g).holes(aperture as i64);
    if !holes.is_empty() {
        return Err(Error::UnsupportedGeometry(format!(
            "{} has coarray holes at lags {holes:?}",
            g.name()
        )));
    }

    // z[m + M] holds lag m.
    let mut sums = vec![Complex64::new(0.0, 0.0); 2 * aperture + 1];
    let mut counts = vec![0usize; 2 * aperture + 1];
    let p = g.positions();
    for i in 0..n {
        for j in 0..n {
            let lag = (p[i] as i64 - p[j] as i64 + aperture as i64) as usize;
            sums[lag] += r[(i, j)];
            counts[lag] += 1;
        }
    }
    let z: Vec<Complex64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();

    let size = aperture + 1;
    let mut rss = DMatrix::<Complex64>::zeros(size, size);
    for k in 0..size {
        let window = &z[k..k + size];
        for a in 0..size {
            for b in 0..size {
                rss[(a, b)] += window[a] * window[b].conj();
            }
        }
    }
    rss /= Complex64::new(size as f64, 0.0);
    let rss_h = rss.adjoint();
    Ok((rss + rss_h) * Complex64::new(0.5, 0.0))
}

fn check_coarray_rank(g: &ArrayGeometry, sources: usize) -> Result<()> {
    if !is_perfect(g) {
        return Err(Error::UnsupportedGeometry(format!(
            "coarray MUSIC needs a hole-free coarray, {} has holes",
            g.name()
        )));
    }
    let aperture = g.aperture() as usize;
    if sources == 0 || sources > aperture {
        return Err(Error::Rank {
            sources,
            dimension: aperture + 1,
        });
    }
    Ok(())
}

/// MUSIC on the smoothed virtual covariance with phase-only virtual ULA
/// steering `exp(-j pi k sin phi)`, `k = 0..=M`. Handles more sources than
/// physical sensors, up to the aperture `M`.
pub fn coarray_music(
    r: &DMatrix<Complex64>,
    g: &ArrayGeometry,
    sources: usize,
    grid: &AzimuthGrid,
) -> Result<Pseudospectrum> {
    check_coarray_rank(g, sources)?;
    let rss = coarray_covariance(r, g)?;
    SteeringTable::virtual_ula(g.aperture() as usize + 1, grid)?.music(&rss, sources)
}

/// Coarray MUSIC against a precomputed virtual ULA table.
pub fn coarray_music_with_table(
    r: &DMatrix<Complex64>,
    g: &ArrayGeometry,
    sources: usize,
    table: &SteeringTable,
) -> Result<Pseudospectrum> {
    check_coarray_rank(g, sources)?;
    let rss = coarray_covariance(r, g)?;
    table.music(&rss, sources)
}
