//! Linear array geometries and their difference coarrays.
//!
//! Element positions are integers in units of half a wavelength, so the
//! pairwise differences form an integer lag set directly.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Maximum-aperture hole-free arrays, lexicographically smallest representative
/// for each size. Verified by the exhaustive search in the tests.
const MRA_CATALOG: [&[u32]; 7] = [
    &[0, 1],
    &[0, 1, 3],
    &[0, 1, 4, 6],
    &[0, 1, 2, 6, 9],
    &[0, 1, 2, 6, 10, 13],
    &[0, 1, 2, 3, 8, 13, 17],
    &[0, 1, 2, 11, 15, 18, 21, 23],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayGeometry {
    positions: Vec<u32>,
    name: String,
}

impl ArrayGeometry {
    /// Builds a geometry from explicit positions (half-wavelength units).
    ///
    /// Positions must be strictly increasing, start at zero and hold at least
    /// two elements.
    pub fn new(name: impl Into<String>, positions: Vec<u32>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 elements, got {}",
                positions.len()
            )));
        }
        if positions[0] != 0 {
            return Err(Error::InvalidGeometry(format!(
                "first element must sit at the origin, got {}",
                positions[0]
            )));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGeometry(
                "positions must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            positions,
            name: name.into(),
        })
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    /// Largest position, in half wavelengths.
    pub fn aperture(&self) -> u32 {
        *self.positions.last().expect("geometry has >= 2 elements")
    }

    /// Resolves `ula<N>`, `mra<N>` or an explicit comma-separated position
    /// list such as `0,1,4,6`.
    pub fn from_name(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        let lower = trimmed.to_ascii_lowercase();
        let count = |digits: &str| {
            digits
                .parse::<usize>()
                .map_err(|_| Error::InvalidGeometry(format!("unknown geometry `{trimmed}`")))
        };
        if let Some(n) = lower.strip_prefix("ula") {
            return make_ula(count(n)?);
        }
        if let Some(n) = lower.strip_prefix("mra") {
            return make_mra(count(n)?);
        }
        let positions = trimmed
            .trim_matches(|c| c == '[' || c == ']')
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidGeometry(format!("unknown geometry `{trimmed}`")))?;
        Self::new("custom", positions)
    }
}

impl fmt::Display for ArrayGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.name, self.positions)
    }
}

pub fn make_ula(n: usize) -> Result<ArrayGeometry> {
    if n < 2 {
        return Err(Error::InvalidGeometry(format!(
            "need at least 2 elements, got {n}"
        )));
    }
    ArrayGeometry::new(format!("ula{n}"), (0..n as u32).collect())
}

/// Minimum redundancy array with the largest hole-free aperture for `n`
/// elements, `2 <= n <= 8`.
pub fn make_mra(n: usize) -> Result<ArrayGeometry> {
    let positions = n
        .checked_sub(2)
        .and_then(|i| MRA_CATALOG.get(i))
        .ok_or(Error::UnsupportedSize(n))?;
    ArrayGeometry::new(format!("mra{n}"), positions.to_vec())
}

/// Difference coarray: every pairwise lag `p_i - p_j` with its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coarray {
    weights: BTreeMap<i64, usize>,
}

impl Coarray {
    /// Distinct lags in ascending order.
    pub fn lags(&self) -> Vec<i64> {
        self.weights.keys().copied().collect()
    }

    /// Multiplicity of `lag`, zero if absent.
    pub fn weight(&self, lag: i64) -> usize {
        self.weights.get(&lag).copied().unwrap_or(0)
    }

    pub fn weights(&self) -> &BTreeMap<i64, usize> {
        &self.weights
    }

    /// Positive lags in `1..=max_lag` that no sensor pair produces.
    pub fn holes(&self, max_lag: i64) -> Vec<i64> {
        (1..=max_lag)
            .filter(|m| !self.weights.contains_key(m))
            .collect()
    }
}

pub fn difference_coarray(g: &ArrayGeometry) -> Coarray {
    let mut weights = BTreeMap::new();
    for &pi in g.positions() {
        for &pj in g.positions() {
            *weights.entry(pi as i64 - pj as i64).or_insert(0) += 1;
        }
    }
    Coarray { weights }
}

/// True when the coarray covers every lag from 0 up to the aperture.
pub fn is_perfect(g: &ArrayGeometry) -> bool {
    difference_coarray(g).holes(g.aperture() as i64).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ula_positions() {
        assert_eq!(make_ula(4).unwrap().positions(), &[0, 1, 2, 3]);
        let g = make_ula(8).unwrap();
        assert_eq!(g.positions(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(g.aperture(), 7);
        assert!(matches!(make_ula(1), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn mra_catalog_entries() {
        assert_eq!(make_mra(2).unwrap().positions(), &[0, 1]);
        assert_eq!(make_mra(4).unwrap().positions(), &[0, 1, 4, 6]);
        assert_eq!(make_mra(8).unwrap().aperture(), 23);
        assert!(matches!(make_mra(1), Err(Error::UnsupportedSize(1))));
        assert!(matches!(make_mra(9), Err(Error::UnsupportedSize(9))));
    }

    #[test]
    fn mra_is_perfect_and_wider_than_ula() {
        for n in 2..=8 {
            let mra = make_mra(n).unwrap();
            assert_eq!(mra.element_count(), n);
            assert!(is_perfect(&mra), "mra{n}");
            assert!(mra.aperture() >= make_ula(n).unwrap().aperture());
        }
    }

    #[test]
    fn ula3_coarray_weights() {
        let c = difference_coarray(&make_ula(3).unwrap());
        assert_eq!(c.lags(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(c.weight(0), 3);
        assert_eq!(c.weight(1), 2);
        assert_eq!(c.weight(-1), 2);
        assert_eq!(c.weight(2), 1);
        assert_eq!(c.weight(-2), 1);
    }

    #[test]
    fn mra4_coarray_hole_free() {
        let c = difference_coarray(&make_mra(4).unwrap());
        assert_eq!(c.lags(), (-6..=6).collect::<Vec<_>>());
    }

    #[test]
    fn single_pair_has_holes() {
        let g = ArrayGeometry::new("pair", vec![0, 5]).unwrap();
        let c = difference_coarray(&g);
        assert_eq!(c.lags(), vec![-5, 0, 5]);
        assert_eq!(c.holes(5), vec![1, 2, 3, 4]);
        assert!(!is_perfect(&g));
    }

    #[test]
    fn perfect_verdicts() {
        assert!(is_perfect(
            &ArrayGeometry::new("u", vec![0, 1, 2, 3]).unwrap()
        ));
        assert!(!is_perfect(
            &ArrayGeometry::new("s", vec![0, 2, 5]).unwrap()
        ));
    }

    #[test]
    fn constructor_rejects_bad_positions() {
        assert!(ArrayGeometry::new("x", vec![1, 2]).is_err());
        assert!(ArrayGeometry::new("x", vec![0, 2, 2]).is_err());
        assert!(ArrayGeometry::new("x", vec![0, 3, 1]).is_err());
        assert!(ArrayGeometry::new("x", vec![0]).is_err());
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(
            ArrayGeometry::from_name("ula8").unwrap(),
            make_ula(8).unwrap()
        );
        assert_eq!(
            ArrayGeometry::from_name("MRA8").unwrap(),
            make_mra(8).unwrap()
        );
        assert_eq!(
            ArrayGeometry::from_name("0,1,4,6").unwrap().positions(),
            &[0, 1, 4, 6]
        );
        assert!(ArrayGeometry::from_name("hex7").is_err());
    }

    #[test]
    fn coarray_invariants() {
        for g in [make_ula(5).unwrap(), make_mra(7).unwrap()] {
            let c = difference_coarray(&g);
            let n = g.element_count();
            assert_eq!(c.weight(0), n);
            assert_eq!(c.weights().values().sum::<usize>(), n * n);
            for (&m, &w) in c.weights() {
                assert_eq!(c.weight(-m), w);
            }
        }
    }
}
