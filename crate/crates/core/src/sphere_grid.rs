//! Finite quadrature model of the unit sphere.
//!
//! A [`DirectionGrid`] holds `N` distinct unit vectors in `R^n` (`n` is 2 or 3)
//! together with strictly positive weights that sum to one, so the grid stands
//! in for the normalized surface measure. [`GridSubset`] is a membership mask
//! over the grid indices. On a finite grid every subset is both open and
//! closed, and every measure-theoretic construction downstream works over
//! arbitrary subsets.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Golden angle `π(3 − √5)` used by the Fibonacci lattice.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Config-level description of a grid: `{"dimension": 2|3, "points": N}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dimension: usize,
    pub points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<DirectionGrid>> {
        build_grid(self.dimension, self.points).map(Arc::new)
    }
}

/// Unit directions with normalized quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    dimension: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Builds the deterministic grid for `(n, N)`.
///
/// For `n = 2` the points sit at the `N` equally spaced angles `2πk/N`; for
/// `n = 3` they follow the Fibonacci lattice with heights `1 − (2k+1)/N`.
/// Every weight is `1/N`.
pub fn build_grid(dimension: usize, n_points: usize) -> Result<DirectionGrid> {
    if dimension != 2 && dimension != 3 {
        return Err(Error::UnsupportedDimension(dimension));
    }
    if n_points < 2 {
        return Err(Error::TooFewPoints(n_points));
    }
    let count = n_points as f64;
    let points: Vec<Vec<f64>> = (0..n_points)
        .map(|k| {
            let k = k as f64;
            if dimension == 2 {
                let angle = 2.0 * PI * k / count;
                vec![angle.cos(), angle.sin()]
            } else {
                let z = 1.0 - (2.0 * k + 1.0) / count;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = GOLDEN_ANGLE * k;
                normalize(vec![r * phi.cos(), r * phi.sin(), z])
            }
        })
        .collect();
    let weights = vec![1.0 / count; n_points];
    DirectionGrid::new(dimension, points, weights)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

impl DirectionGrid {
    /// Validating constructor for hand-built grids.
    pub fn new(dimension: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        if points.len() < 2 {
            return Err(Error::TooFewPoints(points.len()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument(format!("{} points but {} weights", points.len(), weights.len())));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has {} coordinates, expected {dimension}",
                    p.len()
                )));
            }
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("point {i} has norm {norm}, expected 1")));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::InvalidArgument(format!("points {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { dimension, points, weights })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Result<&[f64]> {
        self.points.get(i).map(Vec::as_slice).ok_or(Error::IndexOutOfRange { index: i, size: self.len() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Chordal distance between points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let a = self.point(i)?;
        let b = self.point(j)?;
        if i == j {
            return Ok(0.0);
        }
        Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
    }

    /// Distance from point `i` to the set `A`; `+∞` when `A` is empty.
    pub fn distance_to_set(&self, i: usize, set: &GridSubset) -> Result<f64> {
        let mut best = f64::INFINITY;
        for j in set.indices() {
            best = best.min(self.distance(i, j)?);
        }
        Ok(best)
    }

    /// Identity check used to reject mixed-grid operands.
    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// Free-function form of [`DirectionGrid::distance`].
pub fn distance(grid: &DirectionGrid, i: usize, j: usize) -> Result<f64> {
    grid.distance(i, j)
}

/// Subset of grid indices stored as a membership mask.
#[derive(Debug, Clone)]
pub struct GridSubset {
    grid: Arc<DirectionGrid>,
    mask: Vec<bool>,
}

impl PartialEq for GridSubset {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.mask == other.mask
    }
}

impl GridSubset {
    pub fn empty(grid: &Arc<DirectionGrid>) -> Self {
        Self { grid: grid.clone(), mask: vec![false; grid.len()] }
    }

    pub fn full(grid: &Arc<DirectionGrid>) -> Self {
        Self { grid: grid.clone(), mask: vec![true; grid.len()] }
    }

    pub fn from_mask(grid: &Arc<DirectionGrid>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "mask length {} does not match grid size {}",
                mask.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: grid.clone(), mask })
    }

    pub fn from_indices(grid: &Arc<DirectionGrid>, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; grid.len()];
        for &i in indices {
            *mask.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, size: grid.len() })? = true;
        }
        Ok(Self { grid: grid.clone(), mask })
    }

    /// Subset whose membership is bit `i` of `bits` (grids up to 64 points).
    pub fn from_bits(grid: &Arc<DirectionGrid>, bits: u64) -> Self {
        let mask = (0..grid.len()).map(|i| i < 64 && bits >> i & 1 == 1).collect();
        Self { grid: grid.clone(), mask }
    }

    pub fn singleton(grid: &Arc<DirectionGrid>, i: usize) -> Result<Self> {
        Self::from_indices(grid, &[i])
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|m| *m)
    }

    pub fn complement(&self) -> Self {
        Self { grid: self.grid.clone(), mask: self.mask.iter().map(|m| !m).collect() }
    }

    fn zip_with(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| op(*a, *b)).collect();
        Ok(Self { grid: self.grid.clone(), mask })
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }

    pub fn is_disjoint_from(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !(a & b))
    }

    /// Sum of quadrature weights over the subset, accumulated in index order.
    pub fn mass(&self) -> f64 {
        self.indices().map(|i| self.grid.weight(i)).sum()
    }
}

/// Sum of weights over `A`.
pub fn grid_mass(set: &GridSubset) -> f64 {
    set.mass()
}

/// Outer parallel band `{t : 0 < d(t, A) < ω}`.
pub fn outer_band(set: &GridSubset, omega: f64) -> Result<GridSubset> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("band width must be positive, got {omega}")));
    }
    let grid = set.grid();
    let mut mask = vec![false; grid.len()];
    for (i, slot) in mask.iter_mut().enumerate() {
        let d = grid.distance_to_set(i, set)?;
        *slot = d > 0.0 && d < omega;
    }
    GridSubset::from_mask(grid, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, count: usize) -> Arc<DirectionGrid> {
        Arc::new(build_grid(n, count).unwrap())
    }

    #[test]
    fn circle_grid_of_four() {
        let g = grid(2, 4);
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (p, (x, y)) in g.points().iter().zip(expected) {
            assert!((p[0] - x).abs() < 1e-15 && (p[1] - y).abs() < 1e-15);
        }
        assert!(g.weights().iter().all(|w| *w == 0.25));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(build_grid(2, 1), Err(Error::TooFewPoints(1)));
        assert_eq!(build_grid(4, 10), Err(Error::UnsupportedDimension(4)));
        assert!(build_grid(2, 1).unwrap_err().to_string().contains("N < 2"));
    }

    #[test]
    fn fibonacci_grid_is_normalized() {
        let g = grid(3, 100);
        assert_eq!(g.len(), 100);
        for p in g.points() {
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert!(g.weights().iter().all(|w| *w == 0.01));
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(*g, build_grid(3, 100).unwrap());
    }

    #[test]
    fn distances() {
        let g = grid(2, 4);
        assert!((g.distance(0, 2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(g.distance(1, 1).unwrap(), 0.0);
        // chord between adjacent quarter-turn points, computed by hand
        let (dx, dy) = (1.0_f64 - 0.0, 0.0_f64 - 1.0);
        assert!((g.distance(0, 1).unwrap() - (dx * dx + dy * dy).sqrt()).abs() < 1e-12);
        assert!((g.distance(0, 1).unwrap() - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!(matches!(g.distance(0, 4), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn band_edge_cases() {
        let g = grid(2, 8);
        assert!(outer_band(&GridSubset::full(&g), 1.0).unwrap().is_empty());
        assert!(outer_band(&GridSubset::empty(&g), 1.0).unwrap().is_empty());
        assert!(outer_band(&GridSubset::full(&g), 0.0).is_err());
        assert!(outer_band(&GridSubset::full(&g), -1.0).is_err());
    }

    #[test]
    fn band_around_single_point() {
        let g = grid(2, 8);
        let a = GridSubset::singleton(&g, 0).unwrap();
        // enumerate: neighbours sit at chord 2 sin(π/8) ≈ 0.765, next ring at √2
        let dists: Vec<f64> = (0..8).map(|i| g.distance(0, i).unwrap()).collect();
        let near: Vec<usize> = (0..8).filter(|&i| dists[i] > 0.0 && dists[i] < 0.8).collect();
        assert_eq!(near, vec![1, 7]);
        assert!((dists[1] - 2.0 * (PI / 8.0).sin()).abs() < 1e-12);
        let band = outer_band(&a, 0.8).unwrap();
        assert_eq!(band.indices().collect::<Vec<_>>(), vec![1, 7]);
        assert!(band.is_disjoint_from(&a));
    }

    #[test]
    fn masses() {
        let g = grid(2, 4);
        assert_eq!(grid_mass(&GridSubset::full(&g)), 1.0);
        assert_eq!(grid_mass(&GridSubset::empty(&g)), 0.0);
        assert_eq!(grid_mass(&GridSubset::from_indices(&g, &[0, 2]).unwrap()), 0.5);
    }

    #[test]
    fn triangle_inequality_exhaustive() {
        for (n, count) in [(2, 64), (3, 64), (3, 17)] {
            let g = grid(n, count);
            for i in 0..count {
                for j in 0..count {
                    let dij = g.distance(i, j).unwrap();
                    assert_eq!(dij, g.distance(j, i).unwrap());
                    assert_eq!(dij == 0.0, i == j);
                    for k in 0..count {
                        assert!(dij <= g.distance(i, k).unwrap() + g.distance(k, j).unwrap() + 1e-15);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mass_is_additive(bits_a in any::<u64>(), bits_b in any::<u64>(), pow in 1u32..7, dim in 2usize..4) {
            // dyadic weights make every partial sum exact
            let g = grid(dim, 1usize << pow);
            let a = GridSubset::from_bits(&g, bits_a);
            let b = GridSubset::from_bits(&g, bits_b).difference(&a).unwrap();
            prop_assert_eq!(a.union(&b).unwrap().mass(), a.mass() + b.mass());
        }

        #[test]
        fn mass_additive_within_rounding(bits_a in any::<u64>(), bits_b in any::<u64>(), count in 2usize..64) {
            let g = grid(2, count);
            let a = GridSubset::from_bits(&g, bits_a);
            let b = GridSubset::from_bits(&g, bits_b).difference(&a).unwrap();
            prop_assert!((a.union(&b).unwrap().mass() - (a.mass() + b.mass())).abs() <= 64.0 * f64::EPSILON);
        }

        #[test]
        fn bands_are_nested(bits in any::<u64>(), w1 in 0.01f64..2.5, w2 in 0.01f64..2.5, count in 2usize..40) {
            let g = grid(3, count);
            let a = GridSubset::from_bits(&g, bits);
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            let small = outer_band(&a, lo).unwrap();
            let large = outer_band(&a, hi).unwrap();
            prop_assert!(small.is_subset_of(&large));
            prop_assert!(large.is_disjoint_from(&a));
        }
    }
}
