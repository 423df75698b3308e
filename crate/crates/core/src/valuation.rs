//! Valuations on radial functions and the diagnostics that probe them.
//!
//! A valuation is any functional `V` on grid radial functions with
//! `V(f ∨ g) + V(f ∧ g) = V(f) + V(g)`. The concrete instances here are
//! integral valuations `c₀ + Σ wᵢ K(fᵢ, tᵢ)` backed by a piecewise-linear
//! [`Kernel`], opaque closures, and the min functional used as a negative
//! control.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_grid::{outer_band, DirectionGrid, GridSubset};
use crate::star_core::{join, meet, radial_sum, RadialFunction};

/// Tabulated kernel `K(λⱼ, tᵢ)`, linear in `λ` between levels.
#[derive(Debug, Clone)]
pub struct Kernel {
    grid: Arc<DirectionGrid>,
    levels: Vec<f64>,
    // row-major: values[j * N + i] = K(λⱼ, tᵢ)
    values: Vec<f64>,
    offset: f64,
    invariant: bool,
}

/// Wire form `{"levels", "values", "offset", "invariant"}`; `values[j]` is the row at `levels[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelJson {
    pub levels: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub offset: f64,
    pub invariant: bool,
}

impl Kernel {
    pub fn new(
        grid: &Arc<DirectionGrid>,
        levels: Vec<f64>,
        rows: Vec<Vec<f64>>,
        offset: f64,
        invariant: bool,
    ) -> Result<Self> {
        check_levels(&levels)?;
        if rows.len() != levels.len() {
            return Err(Error::MalformedKernel(format!("{} rows for {} levels", rows.len(), levels.len())));
        }
        let n = grid.len();
        let mut values = Vec::with_capacity(n * levels.len());
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::MalformedKernel(format!("row {j} has {} entries, grid has {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedKernel(format!("row {j} holds a non-finite value")));
            }
            if invariant && row.iter().any(|v| *v != row[0]) {
                return Err(Error::MalformedKernel(format!(
                    "row {j} depends on the direction but the kernel is flagged invariant"
                )));
            }
            values.extend_from_slice(row);
        }
        if !offset.is_finite() {
            return Err(Error::MalformedKernel("offset is not finite".into()));
        }
        Ok(Self { grid: grid.clone(), levels, values, offset, invariant })
    }

    /// Rotation-invariant kernel `θ(λ)` sampled on `levels`.
    pub fn from_theta(
        grid: &Arc<DirectionGrid>,
        levels: &[f64],
        offset: f64,
        theta: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let rows = levels.iter().map(|l| vec![theta(*l); grid.len()]).collect();
        Self::new(grid, levels.to_vec(), rows, offset, true)
    }

    /// Direction-dependent kernel `K(λ, t)` sampled on `levels`.
    pub fn from_fn(
        grid: &Arc<DirectionGrid>,
        levels: &[f64],
        offset: f64,
        kernel: impl Fn(f64, &[f64]) -> f64,
    ) -> Result<Self> {
        let rows = levels.iter().map(|l| grid.points().iter().map(|t| kernel(*l, t)).collect()).collect();
        Self::new(grid, levels.to_vec(), rows, offset, false)
    }

    pub fn from_json(grid: &Arc<DirectionGrid>, json: KernelJson) -> Result<Self> {
        Self::new(grid, json.levels, json.values, json.offset, json.invariant)
    }

    pub fn to_json(&self) -> KernelJson {
        KernelJson {
            levels: self.levels.clone(),
            values: self.rows().map(<[f64]>::to_vec).collect(),
            offset: self.offset,
            invariant: self.invariant,
        }
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    pub fn max_level(&self) -> f64 {
        *self.levels.last().expect("levels are nonempty")
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.len())
    }

    /// Stored knot value `K(λⱼ, tᵢ)`.
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.grid.len() + i]
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if !(s >= 0.0) || s > self.max_level() {
            return Err(Error::OutOfKernelRange { value: s, max: self.max_level() });
        }
        Ok(())
    }

    /// `K(s, tᵢ)` by linear interpolation; knots return their stored value exactly.
    pub fn value(&self, s: f64, i: usize) -> Result<f64> {
        self.check_range(s)?;
        Ok(match self.levels.binary_search_by(|l| l.total_cmp(&s)) {
            Ok(j) => self.at(j, i),
            Err(j) => {
                let (lo, hi) = (self.levels[j - 1], self.levels[j]);
                let t = (s - lo) / (hi - lo);
                (1.0 - t) * self.at(j - 1, i) + t * self.at(j, i)
            }
        })
    }

    fn extremum_on(&self, i: usize, hi: f64, pick: fn(f64, f64) -> f64) -> Result<f64> {
        let mut best = self.value(hi, i)?;
        for (j, _) in self.levels.iter().enumerate().take_while(|(_, l)| **l <= hi) {
            best = pick(best, self.at(j, i));
        }
        Ok(best)
    }

    /// `max_{0 ≤ s ≤ hi} K(s, tᵢ)`, attained at a knot or at `hi`.
    pub fn sup_on(&self, i: usize, hi: f64) -> Result<f64> {
        self.extremum_on(i, hi, f64::max)
    }

    /// `min_{0 ≤ s ≤ hi} K(s, tᵢ)`, attained at a knot or at `hi`.
    pub fn inf_on(&self, i: usize, hi: f64) -> Result<f64> {
        self.extremum_on(i, hi, f64::min)
    }

    /// `Σ wᵢ · max_j |slope of K(·, tᵢ) on [λⱼ, λⱼ₊₁]|`.
    pub fn lipschitz(&self) -> f64 {
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                let slope = self
                    .levels
                    .windows(2)
                    .enumerate()
                    .map(|(j, w)| ((self.at(j + 1, i) - self.at(j, i)) / (w[1] - w[0])).abs())
                    .fold(0.0, f64::max);
                self.grid.weight(i) * slope
            })
            .sum()
    }

    /// `K(0, ·) = 0` and no constant offset.
    pub fn is_centered(&self) -> bool {
        self.offset == 0.0 && self.values[..self.grid.len()].iter().all(|v| *v == 0.0)
    }

    /// Kernel of `V − V(0)`: subtracts `K(0, tᵢ)` from every row and drops the offset.
    pub fn centered(&self) -> Self {
        let n = self.grid.len();
        let base = self.values[..n].to_vec();
        let values = self.values.iter().enumerate().map(|(k, v)| v - base[k % n]).collect();
        Self { values, offset: 0.0, ..self.clone() }
    }

    /// Running maximum `K⁺(λ, t) = max_{0 ≤ s ≤ λ} K(s, t)`.
    ///
    /// The running max of a piecewise-linear function is piecewise linear
    /// with breakpoints at the original knots plus the points where a rising
    /// segment crosses the previous maximum, so those crossings are added to
    /// the level grid and the result is exact.
    pub fn running_max(&self) -> Self {
        let n = self.grid.len();
        let mut levels = self.levels.clone();
        for i in 0..n {
            let mut best = self.at(0, i);
            for j in 0..self.levels.len() - 1 {
                let (a, b) = (self.at(j, i), self.at(j + 1, i));
                if a < best && b > best {
                    let (lo, hi) = (self.levels[j], self.levels[j + 1]);
                    let c = lo + (best - a) / (b - a) * (hi - lo);
                    if c > lo && c < hi {
                        levels.push(c);
                    }
                }
                best = best.max(b);
            }
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut running = vec![f64::NEG_INFINITY; n];
        let mut values = Vec::with_capacity(levels.len() * n);
        for l in &levels {
            for (i, r) in running.iter_mut().enumerate() {
                let v = self.value(*l, i).expect("refined levels lie in range");
                *r = r.max(v);
                values.push(*r);
            }
        }
        Self { grid: self.grid.clone(), levels, values, offset: self.offset, invariant: self.invariant }
    }

    /// Re-tabulates this kernel on a finer level grid containing all its knots.
    pub fn resampled(&self, levels: &[f64]) -> Result<Self> {
        check_levels(levels)?;
        let n = self.grid.len();
        let mut values = Vec::with_capacity(levels.len() * n);
        for l in levels {
            for i in 0..n {
                values.push(self.value(*l, i)?);
            }
        }
        Ok(Self { levels: levels.to_vec(), values, ..self.clone() })
    }

    /// Entrywise `self − other` on identical level grids; offsets subtract too.
    pub fn minus(&self, other: &Kernel) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.levels != other.levels {
            return Err(Error::MalformedKernel("level grids differ".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self {
            values,
            offset: self.offset - other.offset,
            invariant: self.invariant && other.invariant,
            ..self.clone()
        })
    }

    /// Largest entrywise difference against another kernel on the same levels.
    pub fn max_abs_diff(&self, other: &Kernel) -> Result<f64> {
        let d = self.minus(other)?;
        Ok(d.values.iter().map(|v| v.abs()).fold(d.offset.abs(), f64::max))
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    match levels.first() {
        Some(l) if *l == 0.0 => {}
        _ => return Err(Error::MalformedKernel("level grid must start at 0".into())),
    }
    if levels.iter().any(|l| !l.is_finite()) || levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::MalformedKernel("level grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Evenly spaced levels `start, start+step, …` up to `stop` (inclusive within rounding).
pub fn level_range(start: f64, step: f64, stop: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidArgument(format!("bad level range {start}:{step}:{stop}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// `c₀ + Σᵢ wᵢ K(fᵢ, tᵢ)`.
pub fn eval_integral(kernel: &Kernel, f: &RadialFunction) -> Result<f64> {
    if !kernel.grid.same_as(f.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    for (i, v) in f.values().iter().enumerate() {
        total += kernel.grid.weight(i) * kernel.value(*v, i)?;
    }
    Ok(kernel.offset + total)
}

/// A real functional on grid radial functions.
pub trait Valuation: Send + Sync {
    fn grid(&self) -> &Arc<DirectionGrid>;

    fn evaluate(&self, f: &RadialFunction) -> Result<f64>;

    fn descriptor(&self) -> String;

    /// Claimed positivity: `V(f) ≥ V(0) ≥ 0` for every admissible `f`.
    fn is_positive(&self) -> bool;

    /// Tabulated kernel when the valuation is an integral valuation.
    fn kernel(&self) -> Option<&Kernel> {
        None
    }

    /// Largest admissible radial value, when bounded.
    fn max_level(&self) -> Option<f64> {
        self.kernel().map(Kernel::max_level)
    }

    fn at_zero(&self) -> Result<f64> {
        self.evaluate(&RadialFunction::zero(self.grid()))
    }
}

pub type SharedValuation = Arc<dyn Valuation>;

impl fmt::Debug for dyn Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Valuation({})", self.descriptor())
    }
}

/// Integral valuation `c₀ + Σ wᵢ K(fᵢ, tᵢ)`.
#[derive(Debug, Clone)]
pub struct KernelValuation {
    kernel: Kernel,
    descriptor: String,
    positive: bool,
}

impl KernelValuation {
    pub fn new(kernel: Kernel, descriptor: impl Into<String>) -> Self {
        let n = kernel.grid.len();
        let v0 = kernel.offset + (0..n).map(|i| kernel.grid.weight(i) * kernel.at(0, i)).sum::<f64>();
        let rises = (0..kernel.levels.len()).all(|j| (0..n).all(|i| kernel.at(j, i) >= kernel.at(0, i)));
        Self { positive: v0 >= 0.0 && rises, kernel, descriptor: descriptor.into() }
    }

    pub fn shared(kernel: Kernel, descriptor: impl Into<String>) -> SharedValuation {
        Arc::new(Self::new(kernel, descriptor))
    }
}

impl Valuation for KernelValuation {
    fn grid(&self) -> &Arc<DirectionGrid> {
        &self.kernel.grid
    }

    fn evaluate(&self, f: &RadialFunction) -> Result<f64> {
        eval_integral(&self.kernel, f)
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }

    fn is_positive(&self) -> bool {
        self.positive
    }

    fn kernel(&self) -> Option<&Kernel> {
        Some(&self.kernel)
    }
}

type Functional = dyn Fn(&RadialFunction) -> f64 + Send + Sync;

/// Opaque valuation exposing only `evaluate`.
#[derive(Clone)]
pub struct BlackBoxValuation {
    grid: Arc<DirectionGrid>,
    descriptor: String,
    positive: bool,
    max_level: Option<f64>,
    func: Arc<Functional>,
}

impl BlackBoxValuation {
    pub fn new(
        grid: &Arc<DirectionGrid>,
        descriptor: impl Into<String>,
        positive: bool,
        func: impl Fn(&RadialFunction) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { grid: grid.clone(), descriptor: descriptor.into(), positive, max_level: None, func: Arc::new(func) }
    }

    /// Wraps a kernel valuation so that its structure is hidden.
    pub fn opaque(kernel: Kernel, descriptor: impl Into<String>) -> Self {
        let positive = KernelValuation::new(kernel.clone(), "").is_positive();
        let max_level = Some(kernel.max_level());
        let grid = kernel.grid.clone();
        let mut v = Self::new(&grid, descriptor, positive, move |f| eval_integral(&kernel, f).unwrap_or(f64::NAN));
        v.max_level = max_level;
        v
    }

    pub fn with_max_level(mut self, max: f64) -> Self {
        self.max_level = Some(max);
        self
    }
}

impl Valuation for BlackBoxValuation {
    fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    fn evaluate(&self, f: &RadialFunction) -> Result<f64> {
        if !self.grid.same_as(f.grid()) {
            return Err(Error::GridMismatch);
        }
        if let Some(max) = self.max_level {
            if f.sup_norm() > max {
                return Err(Error::OutOfKernelRange { value: f.sup_norm(), max });
            }
        }
        Ok((self.func)(f))
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }

    fn is_positive(&self) -> bool {
        self.positive
    }

    fn max_level(&self) -> Option<f64> {
        self.max_level
    }
}

/// `f ↦ min_i fᵢ`: orthogonally additive on functions with a common zero, not a valuation.
#[derive(Debug, Clone)]
pub struct MinFunctional {
    grid: Arc<DirectionGrid>,
}

pub fn min_functional(grid: &Arc<DirectionGrid>) -> MinFunctional {
    MinFunctional { grid: grid.clone() }
}

impl Valuation for MinFunctional {
    fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    fn evaluate(&self, f: &RadialFunction) -> Result<f64> {
        if !self.grid.same_as(f.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(f.values().iter().copied().fold(f64::INFINITY, f64::min))
    }

    fn descriptor(&self) -> String {
        "min".into()
    }

    fn is_positive(&self) -> bool {
        true
    }
}

/// `V − V(0)` for a valuation without kernel structure.
struct Centered {
    inner: SharedValuation,
    at_zero: f64,
}

impl Valuation for Centered {
    fn grid(&self) -> &Arc<DirectionGrid> {
        self.inner.grid()
    }

    fn evaluate(&self, f: &RadialFunction) -> Result<f64> {
        Ok(self.inner.evaluate(f)? - self.at_zero)
    }

    fn descriptor(&self) -> String {
        format!("centered({})", self.inner.descriptor())
    }

    fn is_positive(&self) -> bool {
        self.inner.is_positive()
    }

    fn max_level(&self) -> Option<f64> {
        self.inner.max_level()
    }
}

/// Returns `(V − V(0), V(0))`, keeping kernel structure when present.
pub fn center(v: &SharedValuation) -> Result<(SharedValuation, f64)> {
    let at_zero = v.at_zero()?;
    if let Some(k) = v.kernel() {
        if k.is_centered() {
            return Ok((v.clone(), at_zero));
        }
        return Ok((KernelValuation::shared(k.centered(), v.descriptor()), at_zero));
    }
    if at_zero == 0.0 {
        return Ok((v.clone(), 0.0));
    }
    Ok((Arc::new(Centered { inner: v.clone(), at_zero }), at_zero))
}

/// Residual `|V(f∨g) + V(f∧g) − V(f) − V(g)|`.
pub fn check_valuation_identity(v: &dyn Valuation, f: &RadialFunction, g: &RadialFunction) -> Result<f64> {
    let hi = v.evaluate(&join(f, g)?)?;
    let lo = v.evaluate(&meet(f, g)?)?;
    Ok((hi + lo - v.evaluate(f)? - v.evaluate(g)?).abs())
}

/// Residual `|V(f₁+f₂+f) − V(f₁+f) − V(f₂+f) + V(f)|` for disjointly supported `f₁, f₂`.
pub fn check_additive(v: &dyn Valuation, f1: &RadialFunction, f2: &RadialFunction, f: &RadialFunction) -> Result<f64> {
    if !meet(f1, f2)?.is_zero() {
        return Err(Error::Precondition("f1 ∧ f2 must vanish identically".into()));
    }
    let both = v.evaluate(&radial_sum(&radial_sum(f1, f2)?, f)?)?;
    let first = v.evaluate(&radial_sum(f1, f)?)?;
    let second = v.evaluate(&radial_sum(f2, f)?)?;
    Ok((both - first - second + v.evaluate(f)?).abs())
}

/// Largest `|V(f)|` over `samples` seeded random `f` with values uniform in `[0, λ]`.
pub fn bounded_diagnostic(v: &dyn Valuation, lambda: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(lambda >= 0.0) || samples == 0 {
        return Err(Error::InvalidArgument("need λ ≥ 0 and at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = v.grid().len();
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let values = (0..n).map(|_| rng.gen::<f64>() * lambda).collect();
        let f = RadialFunction::new(v.grid(), values)?;
        best = best.max(v.evaluate(&f)?.abs());
    }
    Ok(best)
}

/// For each `ω`, the exact `sup |V(f) − V(0)|` over `f` supported in the outer
/// band `A_ω` with values in `[0, λ]`. Kernel valuations only.
pub fn rim_decay(v: &dyn Valuation, set: &GridSubset, lambda: f64, omegas: &[f64]) -> Result<Vec<f64>> {
    let kernel =
        v.kernel().ok_or_else(|| Error::Unsupported { op: "rim_decay", valuation: v.descriptor() })?.centered();
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be nonnegative, got {lambda}")));
    }
    if omegas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("band widths must be strictly decreasing".into()));
    }
    let grid = set.grid();
    omegas
        .iter()
        .map(|omega| {
            let band = outer_band(set, *omega)?;
            let (mut upper, mut lower) = (0.0, 0.0);
            for i in band.indices() {
                upper += grid.weight(i) * kernel.sup_on(i, lambda)?;
                lower += grid.weight(i) * kernel.inf_on(i, lambda)?;
            }
            Ok(f64::max(upper, -lower))
        })
        .collect()
}

/// Reads `θ(λⱼ) = V(λⱼ·1) − V(0)` off a rotation-invariant valuation.
pub fn theta_recover(v: &dyn Valuation, levels: &[f64]) -> Result<Kernel> {
    let grid = v.grid();
    let at_zero = v.at_zero()?;
    let mut rows = Vec::with_capacity(levels.len());
    for l in levels {
        let theta = v.evaluate(&RadialFunction::constant(grid, *l)?)? - at_zero;
        rows.push(vec![theta; grid.len()]);
    }
    Kernel::new(grid, levels.to_vec(), rows, at_zero, true)
}

/// Parametric kernel families selectable by name in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ThetaFamily {
    /// `θ(s) = Σ cₖ sᵏ`.
    Poly { coefficients: Vec<f64> },
    /// Linear interpolation through `(s, θ)` knots, constant past the last knot.
    Piecewise { knots: Vec<(f64, f64)> },
    /// `θ(s) = scale · (s − s²)`.
    Bump { scale: f64 },
    /// `K(λ, t) = (Σ cₖ λᵏ) · (1 + anisotropy · t_axis)`.
    Directional { coefficients: Vec<f64>, anisotropy: f64, axis: usize },
}

fn poly(coefficients: &[f64], s: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn piecewise(knots: &[(f64, f64)], s: f64) -> f64 {
    match knots.iter().position(|(x, _)| *x >= s) {
        None => knots.last().map_or(0.0, |k| k.1),
        Some(0) => knots[0].1,
        Some(p) => {
            let ((x0, y0), (x1, y1)) = (knots[p - 1], knots[p]);
            y0 + (s - x0) / (x1 - x0) * (y1 - y0)
        }
    }
}

impl ThetaFamily {
    /// Tabulates the family on `levels`; piecewise knots inside the range are added to the level grid.
    pub fn kernel(&self, grid: &Arc<DirectionGrid>, levels: &[f64], offset: f64) -> Result<Kernel> {
        match self {
            Self::Poly { coefficients } => Kernel::from_theta(grid, levels, offset, |s| poly(coefficients, s)),
            Self::Bump { scale } => Kernel::from_theta(grid, levels, offset, |s| scale * (s - s * s)),
            Self::Piecewise { knots } => {
                if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::InvalidArgument("piecewise knots must increase".into()));
                }
                let top = levels.last().copied().unwrap_or(0.0);
                let mut all: Vec<f64> = levels.to_vec();
                all.extend(knots.iter().map(|k| k.0).filter(|x| *x > 0.0 && *x < top));
                all.sort_by(f64::total_cmp);
                all.dedup();
                Kernel::from_theta(grid, &all, offset, |s| piecewise(knots, s))
            }
            Self::Directional { coefficients, anisotropy, axis } => {
                if *axis >= grid.dimension() {
                    return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
                }
                Kernel::from_fn(grid, levels, offset, |l, t| poly(coefficients, l) * (1.0 + anisotropy * t[*axis]))
            }
        }
    }
}

/// Catalogue of twenty named kernels used across tests and sweeps. Every entry
/// has `K(0, ·) = 0`, slope at most 1 in absolute value near 0, and is monotone on `[0, ½]`.
pub fn builtin_families() -> Vec<(&'static str, ThetaFamily, f64)> {
    use ThetaFamily::*;
    vec![
        ("linear", Poly { coefficients: vec![0.0, 1.0] }, 0.0),
        ("neg-linear", Poly { coefficients: vec![0.0, -1.0] }, 0.0),
        ("square", Poly { coefficients: vec![0.0, 0.0, 1.0] }, 0.0),
        ("neg-half-square", Poly { coefficients: vec![0.0, 0.0, -0.5] }, 0.0),
        ("bump", Bump { scale: 1.0 }, 0.0),
        ("neg-bump", Bump { scale: -1.0 }, 0.0),
        ("wide-bump", Poly { coefficients: vec![0.0, 1.0, -0.25] }, 0.0),
        ("cubic", Poly { coefficients: vec![0.0, 0.5, 0.0, -0.25] }, 0.0),
        ("zigzag", Piecewise { knots: vec![(0.0, 0.0), (0.75, 0.6), (1.5, -0.3), (2.0, 0.0)] }, 0.0),
        ("ramp", Piecewise { knots: vec![(0.0, 0.0), (1.0, 0.0), (1.1, 1.0), (2.0, 1.0)] }, 0.0),
        ("saturating", Poly { coefficients: vec![0.0, 1.0, -0.5, 1.0 / 6.0] }, 0.0),
        ("neg-saturating", Poly { coefficients: vec![0.0, -1.0, 0.5, -1.0 / 6.0] }, 0.0),
        ("sine", Poly { coefficients: vec![0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0] }, 0.0),
        ("dir-linear", Directional { coefficients: vec![0.0, 0.5], anisotropy: 1.0, axis: 0 }, 0.0),
        ("dir-bump", Directional { coefficients: vec![0.0, 0.5, -0.5], anisotropy: 1.0, axis: 1 }, 0.0),
        ("dir-signed", Directional { coefficients: vec![0.0, 0.5], anisotropy: 2.0, axis: 0 }, -1.0),
        ("dir-neg-square", Directional { coefficients: vec![0.0, 0.0, -0.25], anisotropy: 1.0, axis: 0 }, 0.0),
        ("linear-offset", Poly { coefficients: vec![0.0, 1.0] }, 0.5),
        ("bump-offset", Bump { scale: 0.5 }, -1.0),
        ("mixed", Poly { coefficients: vec![0.0, -0.25, 0.0, 0.25] }, 0.0),
    ]
}

/// The twenty catalogue kernels tabulated on `levels`.
pub fn builtin_kernels(grid: &Arc<DirectionGrid>, levels: &[f64]) -> Result<Vec<(String, Kernel)>> {
    builtin_families()
        .into_iter()
        .map(|(name, family, offset)| Ok((name.to_string(), family.kernel(grid, levels, offset)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_grid::build_grid;

    fn grid(count: usize) -> Arc<DirectionGrid> {
        Arc::new(build_grid(2, count).unwrap())
    }

    fn theta(g: &Arc<DirectionGrid>, f: impl Fn(f64) -> f64) -> Kernel {
        Kernel::from_theta(g, &level_range(0.0, 0.125, 4.0).unwrap(), 0.0, f).unwrap()
    }

    #[test]
    fn integral_of_constants() {
        let g = grid(7);
        let c = 1.375;
        let f = RadialFunction::constant(&g, c).unwrap();
        assert!((eval_integral(&theta(&g, |s| s), &f).unwrap() - c).abs() < 1e-14);
        assert!((eval_integral(&theta(&g, |s| s * s), &f).unwrap() - c * c).abs() < 1e-14);
    }

    #[test]
    fn hand_quadrature() {
        let g = grid(4);
        let f = RadialFunction::new(&g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(eval_integral(&theta(&g, |s| s), &f).unwrap(), 2.5);
        let over = RadialFunction::new(&g, vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        assert!(matches!(eval_integral(&theta(&g, |s| s), &over), Err(Error::OutOfKernelRange { .. })));
    }

    #[test]
    fn kernel_validation() {
        let g = grid(2);
        assert!(Kernel::new(&g, vec![0.5, 1.0], vec![vec![0.0; 2]; 2], 0.0, false).is_err());
        assert!(Kernel::new(&g, vec![0.0, 1.0, 1.0], vec![vec![0.0; 2]; 3], 0.0, false).is_err());
        assert!(Kernel::new(&g, vec![0.0, 1.0], vec![vec![0.0; 3]; 2], 0.0, false).is_err());
        assert!(Kernel::new(&g, vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 2.0]], 0.0, true).is_err());
    }

    #[test]
    fn kernel_json_shape() {
        let g = grid(2);
        let k = Kernel::new(&g, vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 2.0]], 0.5, false).unwrap();
        let text = serde_json::to_string(&k.to_json()).unwrap();
        assert_eq!(text, r#"{"levels":[0.0,1.0],"values":[[0.0,0.0],[1.0,2.0]],"offset":0.5,"invariant":false}"#);
        let back = Kernel::from_json(&g, serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.max_abs_diff(&k).unwrap(), 0.0);
    }

    #[test]
    fn running_max_is_exact() {
        let g = grid(3);
        // rises to 1, dips to 0, rises to 2: crossing of the old max at s = 2.5
        let k = Kernel::new(
            &g,
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.0; 3], vec![1.0; 3], vec![0.0; 3], vec![2.0; 3]],
            0.0,
            true,
        )
        .unwrap();
        let plus = k.running_max();
        assert_eq!(plus.levels(), &[0.0, 1.0, 2.0, 2.5, 3.0]);
        for (s, expect) in [(0.5, 0.5), (1.5, 1.0), (2.25, 1.0), (2.5, 1.0), (2.75, 1.5), (3.0, 2.0)] {
            assert!((plus.value(s, 0).unwrap() - expect).abs() < 1e-15, "s = {s}");
        }
    }

    #[test]
    fn identity_residuals() {
        let g = grid(2);
        let v = KernelValuation::new(theta(&g, |s| s - s * s), "bump");
        let f = RadialFunction::new(&g, vec![1.0, 0.0]).unwrap();
        let h = RadialFunction::new(&g, vec![0.0, 1.0]).unwrap();
        assert!(check_valuation_identity(&v, &f, &h).unwrap() <= 1e-10);
        assert_eq!(check_valuation_identity(&v, &f, &f).unwrap(), 0.0);
        let m = min_functional(&g);
        assert_eq!(check_valuation_identity(&m, &f, &h).unwrap(), 1.0);
        assert_eq!(check_valuation_identity(&m, &f, &f).unwrap(), 0.0);
    }

    #[test]
    fn additivity() {
        let g = grid(3);
        let v = KernelValuation::new(theta(&g, |s| s * s - s), "k");
        let f1 = RadialFunction::new(&g, vec![1.0, 0.0, 0.0]).unwrap();
        let f2 = RadialFunction::new(&g, vec![0.0, 1.5, 0.0]).unwrap();
        let f = RadialFunction::new(&g, vec![0.25, 0.5, 2.0]).unwrap();
        assert!(check_additive(&v, &f1, &f2, &f).unwrap() <= 1e-10);
        assert_eq!(check_additive(&v, &RadialFunction::zero(&g), &f2, &f).unwrap(), 0.0);
        assert!(matches!(check_additive(&v, &f1, &f, &f2), Err(Error::Precondition(_))));

        // with a common zero left over, the min functional passes
        let m = min_functional(&g);
        let zero = RadialFunction::zero(&g);
        assert_eq!(check_additive(&m, &f1, &f2, &zero).unwrap(), 0.0);

        // on two points the disjoint supports cover the grid and the min functional fails
        let g2 = grid(2);
        let m2 = min_functional(&g2);
        let a = RadialFunction::new(&g2, vec![1.0, 0.0]).unwrap();
        let b = RadialFunction::new(&g2, vec![0.0, 1.0]).unwrap();
        assert_eq!(check_additive(&m2, &a, &b, &RadialFunction::zero(&g2)).unwrap(), 1.0);
    }

    #[test]
    fn min_functional_values() {
        let g = grid(3);
        let m = min_functional(&g);
        assert_eq!(m.evaluate(&RadialFunction::constant(&g, 2.5).unwrap()).unwrap(), 2.5);
        assert_eq!(m.evaluate(&RadialFunction::new(&g, vec![1.0, 0.0, 2.0]).unwrap()).unwrap(), 0.0);
        assert!(m.is_positive());
    }

    #[test]
    fn bounded() {
        let g = grid(16);
        let lin = KernelValuation::new(theta(&g, |s| s), "s");
        assert!(bounded_diagnostic(&lin, 1.0, 200, 1).unwrap() <= 1.0);
        let bump = KernelValuation::new(theta(&g, |s| s - s * s), "bump");
        assert!(bounded_diagnostic(&bump, 1.0, 200, 1).unwrap() <= 0.25);
        let zero = KernelValuation::new(theta(&g, |_| 0.0), "0");
        assert_eq!(bounded_diagnostic(&zero, 1.0, 10, 1).unwrap(), 0.0);
        assert_eq!(bounded_diagnostic(&lin, 1.0, 50, 9).unwrap(), bounded_diagnostic(&lin, 1.0, 50, 9).unwrap());
    }

    #[test]
    fn rim_decay_examples() {
        let g = grid(8);
        let lin = KernelValuation::new(theta(&g, |s| s), "s");
        let half = GridSubset::from_indices(&g, &[0, 1, 2, 3]).unwrap();
        let step = g.distance(0, 1).unwrap();
        // band just above one chord step holds points 4 and 7
        let band = outer_band(&half, step + 1e-9).unwrap();
        assert_eq!(band.indices().collect::<Vec<_>>(), vec![4, 7]);
        let lambda = 1.5;
        let seq = rim_decay(&lin, &half, lambda, &[step + 1e-9, step / 2.0]).unwrap();
        // enumerate level grids on the two band points: best is λ at both
        let mut best: f64 = 0.0;
        for a in 0..=6 {
            for b in 0..=6 {
                best = best.max((a as f64 + b as f64) * lambda / 6.0 / 8.0);
            }
        }
        assert!((seq[0] - best).abs() < 1e-15);
        assert!((seq[0] - 2.0 * lambda / 8.0).abs() < 1e-15);
        assert_eq!(seq[1], 0.0);
        let full = rim_decay(&lin, &GridSubset::full(&g), 1.0, &[3.0, 1.0, 0.1]).unwrap();
        assert_eq!(full, vec![0.0, 0.0, 0.0]);
        assert!(rim_decay(&lin, &half, 1.0, &[0.5, 1.0]).is_err());
        let black = BlackBoxValuation::new(&g, "opaque", true, |_| 0.0);
        assert!(matches!(rim_decay(&black, &half, 1.0, &[1.0]), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn theta_recovery() {
        let g = grid(5);
        let levels = [0.0, 0.5, 1.0];
        let sq = KernelValuation::new(theta(&g, |s| s * s), "sq");
        let k = theta_recover(&sq, &levels).unwrap();
        for (j, l) in levels.iter().enumerate() {
            assert!((k.at(j, 3) - l * l).abs() < 1e-14);
        }
        let five = BlackBoxValuation::new(&g, "5", true, |_| 5.0);
        let k = theta_recover(&five, &levels).unwrap();
        assert!(k.rows().all(|r| r.iter().all(|v| *v == 0.0)));
        assert_eq!(k.offset(), 5.0);
        let bump = KernelValuation::new(theta(&g, |s| s - s * s), "bump");
        let k = theta_recover(&bump, &levels).unwrap();
        let got: Vec<f64> = (0..3).map(|j| k.at(j, 0)).collect();
        for (a, b) in got.iter().zip([0.0, 0.25, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn catalogue_has_twenty_distinct_entries() {
        let g = Arc::new(build_grid(3, 12).unwrap());
        let levels = level_range(0.0, 0.1, 2.0).unwrap();
        let ks = builtin_kernels(&g, &levels).unwrap();
        assert_eq!(ks.len(), 20);
        for (name, k) in &ks {
            assert!(k.rows().next().unwrap().iter().all(|v| *v == 0.0), "{name}");
        }
    }

    #[test]
    fn family_config_parses() {
        let f: ThetaFamily = serde_json::from_str(r#"{"family":"bump","scale":2.0}"#).unwrap();
        assert_eq!(f, ThetaFamily::Bump { scale: 2.0 });
        let p: ThetaFamily = serde_json::from_str(r#"{"family":"piecewise","knots":[[0,0],[0.3,1],[1,0]]}"#).unwrap();
        let k = p.kernel(&grid(2), &[0.0, 0.5, 1.0], 0.0).unwrap();
        assert_eq!(k.levels(), &[0.0, 0.3, 0.5, 1.0]);
        assert!((k.value(0.3, 0).unwrap() - 1.0).abs() < 1e-15);
    }
}
