//! Radial-function arithmetic.
//!
//! A star set is encoded by its radial function sampled on a
//! [`DirectionGrid`]. Union and intersection of star sets become pointwise
//! max and min ([`join`], [`meet`]), the radial sum is the pointwise sum, and
//! the radial metric is the sup-norm distance.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_grid::{DirectionGrid, GridSubset};

/// Nonnegative function on the grid directions.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<DirectionGrid>,
    values: Vec<f64>,
}

impl PartialEq for RadialFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl RadialFunction {
    pub fn new(grid: &Arc<DirectionGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("{} values for grid of size {}", values.len(), grid.len())));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidValue { index, value });
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn constant(grid: &Arc<DirectionGrid>, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn zero(grid: &Arc<DirectionGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    /// `level · χ_A`.
    pub fn indicator(set: &GridSubset, level: f64) -> Result<Self> {
        let values = set.mask().iter().map(|m| if *m { level } else { 0.0 }).collect();
        Self::new(set.grid(), values)
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Pointwise `self ≤ other`.
    pub fn le(&self, other: &Self) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    /// Indices where the function is strictly positive.
    pub fn support(&self) -> GridSubset {
        let mask = self.values.iter().map(|v| *v > 0.0).collect();
        GridSubset::from_mask(&self.grid, mask).expect("mask built from grid-sized vector")
    }

    /// Dilation `c·K`, radial function `c·ρ_K`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(&self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// Replaces the value at one index.
    pub fn with_value(&self, i: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        *values.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, size: self.len() })? = value;
        Self::new(&self.grid, values)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// Comma-separated row of the `N` values, 17 significant digits.
    pub fn to_csv_row(&self) -> String {
        self.values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }

    /// Parses the first non-empty line of a CSV row of `N` reals.
    pub fn from_csv_row(grid: &Arc<DirectionGrid>, text: &str) -> Result<Self> {
        let line = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| Error::InvalidArgument("empty radial function CSV".into()))?;
        let values = line
            .split(',')
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad CSV field `{}`: {e}", field.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }
}

/// Pointwise maximum, the radial function of `K ∪ L`.
pub fn join(f: &RadialFunction, g: &RadialFunction) -> Result<RadialFunction> {
    f.zip_with(g, f64::max)
}

/// Pointwise minimum, the radial function of `K ∩ L`.
pub fn meet(f: &RadialFunction, g: &RadialFunction) -> Result<RadialFunction> {
    f.zip_with(g, f64::min)
}

/// Pointwise sum, the radial function of the radial sum `K +̃ L`.
pub fn radial_sum(f: &RadialFunction, g: &RadialFunction) -> Result<RadialFunction> {
    f.zip_with(g, |a, b| a + b)
}

/// `‖f − g‖_∞`.
pub fn radial_metric(f: &RadialFunction, g: &RadialFunction) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Simple star set `Σ aᵢ χ_{Aᵢ}` over an explicit partition of the grid.
#[derive(Debug, Clone)]
pub struct SimpleStarSet {
    grid: Arc<DirectionGrid>,
    cells: Vec<Vec<usize>>,
    levels: Vec<f64>,
}

/// Wire form `{"cells": [[indices]], "levels": [reals]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleStarSetJson {
    pub cells: Vec<Vec<usize>>,
    pub levels: Vec<f64>,
}

impl SimpleStarSet {
    /// Validates that `cells` partition `0..N` and levels are nonnegative.
    /// Empty cells are permitted and carry no mass.
    pub fn new(grid: &Arc<DirectionGrid>, cells: Vec<Vec<usize>>, levels: Vec<f64>) -> Result<Self> {
        if cells.len() != levels.len() {
            return Err(Error::NotAPartition(format!("{} cells but {} levels", cells.len(), levels.len())));
        }
        if let Some(l) = levels.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(format!("level {l} is not a nonnegative real")));
        }
        let mut owner = vec![None; grid.len()];
        for (c, cell) in cells.iter().enumerate() {
            for &i in cell {
                let slot = owner.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, size: grid.len() })?;
                if let Some(prev) = *slot {
                    return Err(Error::NotAPartition(format!("index {i} appears in cells {prev} and {c}")));
                }
                *slot = Some(c);
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::NotAPartition(format!("index {i} is not covered")));
        }
        Ok(Self { grid: grid.clone(), cells, levels })
    }

    pub fn single(grid: &Arc<DirectionGrid>, level: f64) -> Result<Self> {
        Self::new(grid, vec![(0..grid.len()).collect()], vec![level])
    }

    /// One cell per distinct value of `f`, in order of first appearance.
    pub fn from_radial(f: &RadialFunction) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut levels = Vec::new();
        for (i, v) in f.values().iter().enumerate() {
            let c = *index.entry(v.to_bits()).or_insert_with(|| {
                cells.push(Vec::new());
                levels.push(*v);
                cells.len() - 1
            });
            cells[c].push(i);
        }
        Self { grid: f.grid().clone(), cells, levels }
    }

    pub fn from_json(grid: &Arc<DirectionGrid>, json: SimpleStarSetJson) -> Result<Self> {
        Self::new(grid, json.cells, json.levels)
    }

    pub fn to_json(&self) -> SimpleStarSetJson {
        SimpleStarSetJson { cells: self.cells.clone(), levels: self.levels.clone() }
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cell_subset(&self, c: usize) -> GridSubset {
        GridSubset::from_indices(&self.grid, &self.cells[c]).expect("cells validated at construction")
    }

    /// Canonical form: equal levels merged, cells ordered by level, empty cells dropped.
    pub fn merged(&self) -> Self {
        let mut by_level: Vec<(f64, Vec<usize>)> = Vec::new();
        for (cell, level) in self.cells.iter().zip(&self.levels) {
            if cell.is_empty() {
                continue;
            }
            match by_level.iter_mut().find(|(l, _)| l == level) {
                Some((_, members)) => members.extend(cell),
                None => by_level.push((*level, cell.clone())),
            }
        }
        by_level.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (levels, cells): (Vec<f64>, Vec<Vec<usize>>) = by_level
            .into_iter()
            .map(|(l, mut c)| {
                c.sort_unstable();
                (l, c)
            })
            .unzip();
        Self { grid: self.grid.clone(), cells, levels }
    }

    /// Finest partition: one cell per direction.
    pub fn refined(&self) -> Self {
        let values = self.value_vector();
        let cells = (0..self.grid.len()).map(|i| vec![i]).collect();
        Self { grid: self.grid.clone(), cells, levels: values }
    }

    fn value_vector(&self) -> Vec<f64> {
        let mut values = vec![0.0; self.grid.len()];
        for (cell, level) in self.cells.iter().zip(&self.levels) {
            for &i in cell {
                values[i] = *level;
            }
        }
        values
    }

    fn combine(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let owner = |s: &Self| {
            let mut o = vec![0usize; s.grid.len()];
            for (c, cell) in s.cells.iter().enumerate() {
                for &i in cell {
                    o[i] = c;
                }
            }
            o
        };
        let (oa, ob) = (owner(self), owner(other));
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut levels = Vec::new();
        for i in 0..self.grid.len() {
            let key = (oa[i], ob[i]);
            let c = *index.entry(key).or_insert_with(|| {
                cells.push(Vec::new());
                levels.push(op(self.levels[key.0], other.levels[key.1]));
                cells.len() - 1
            });
            cells[c].push(i);
        }
        Ok(Self { grid: self.grid.clone(), cells, levels })
    }

    /// `g ∨ h` on the common refinement of both partitions.
    pub fn join(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::max)
    }

    /// `g ∧ h` on the common refinement of both partitions.
    pub fn meet(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::min)
    }
}

/// Evaluates `Σ aᵢ χ_{Aᵢ}` on the grid.
pub fn to_radial(g: &SimpleStarSet) -> RadialFunction {
    RadialFunction { grid: g.grid.clone(), values: g.value_vector() }
}

/// Level index `i ≥ 1` with `f ∈ ((i−1)δ, iδ]`, and `f ∈ [0, δ]` mapping to 1.
fn level_index(value: f64, delta: f64) -> u64 {
    let mut i = ((value / delta).ceil() as u64).max(1);
    while (i as f64) * delta < value {
        i += 1;
    }
    while i > 1 && ((i - 1) as f64) * delta >= value {
        i -= 1;
    }
    i
}

/// Quantizes `f` onto the simple star set with cells
/// `A₁ = f⁻¹([0, δ])`, `Aᵢ = f⁻¹(((i−1)δ, iδ])` at levels `iδ`.
///
/// The result dominates `f` and lies within `δ` of it in the sup norm.
/// Only nonempty cells are kept, in increasing level order.
pub fn quantize(f: &RadialFunction, delta: f64) -> Result<SimpleStarSet> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("quantization step must be positive, got {delta}")));
    }
    let mut buckets: Vec<(u64, Vec<usize>)> = Vec::new();
    for (i, v) in f.values().iter().enumerate() {
        let k = level_index(*v, delta);
        match buckets.binary_search_by_key(&k, |(key, _)| *key) {
            Ok(pos) => buckets[pos].1.push(i),
            Err(pos) => buckets.insert(pos, (k, vec![i])),
        }
    }
    let (levels, cells) = buckets.into_iter().map(|(k, c)| (k as f64 * delta, c)).unzip();
    Ok(SimpleStarSet { grid: f.grid().clone(), cells, levels })
}
