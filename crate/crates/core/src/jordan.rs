//! Jordan decomposition `V = V⁺ − V⁻` with `V⁺(f) = sup{V(g) : 0 ≤ g ≤ f}`.
//!
//! On the grid the supremum decouples direction by direction. For kernel
//! valuations it is the running maximum of the kernel, computed exactly; for
//! black boxes it is searched over a finite lattice, and [`brute_force_sup`]
//! enumerates that lattice as an oracle on small instances.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sphere_grid::DirectionGrid;
use crate::star_core::RadialFunction;
use crate::valuation::{Kernel, KernelValuation, SharedValuation, Valuation};

/// Tolerance on `|V(0)|` for a valuation to count as centered.
pub const CENTER_TOL: f64 = 1e-12;

/// `Σᵢ wᵢ · max_{0 ≤ s ≤ fᵢ} K(s, tᵢ)` for a centered kernel.
pub fn vplus_kernel(kernel: &Kernel, f: &RadialFunction) -> Result<f64> {
    if !kernel.is_centered() {
        let v0 = kernel.offset()
            + kernel.rows().next().unwrap().iter().zip(kernel.grid().weights()).map(|(k, w)| k * w).sum::<f64>();
        return Err(Error::NotCentered(v0));
    }
    if !kernel.grid().same_as(f.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = kernel.grid();
    let mut total = 0.0;
    for (i, v) in f.values().iter().enumerate() {
        total += grid.weight(i) * kernel.sup_on(i, *v)?;
    }
    Ok(total)
}

/// Lattice point `k·fᵢ/L`, with the top point exactly `fᵢ`.
pub fn lattice_value(value: f64, k: usize, steps: usize) -> f64 {
    if k == steps {
        value
    } else {
        value * k as f64 / steps as f64
    }
}

/// Restart policy for the lattice search.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0 }
    }
}

/// Best `V(g)` found over the lattice `gᵢ ∈ {0, fᵢ/L, …, fᵢ}` by coordinate ascent.
pub fn vplus_blackbox(v: &dyn Valuation, f: &RadialFunction, level_steps: usize) -> Result<f64> {
    vplus_blackbox_with(v, f, level_steps, SearchOptions::default())
}

pub fn vplus_blackbox_with(
    v: &dyn Valuation,
    f: &RadialFunction,
    level_steps: usize,
    options: SearchOptions,
) -> Result<f64> {
    if level_steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 level steps, got {level_steps}")));
    }
    let n = f.len();
    let grid = f.grid();
    let free: Vec<usize> = (0..n).filter(|i| f.get(*i) > 0.0).collect();
    let to_function = |ks: &[usize]| {
        let values = (0..n).map(|i| lattice_value(f.get(i), ks[i], level_steps)).collect();
        RadialFunction::new(grid, values)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![vec![level_steps; n], vec![0; n]];
    for _ in 0..options.restarts {
        starts.push((0..n).map(|_| rng.gen_range(0..=level_steps)).collect());
    }

    let mut best = f64::NEG_INFINITY;
    for mut ks in starts {
        let mut current = v.evaluate(&to_function(&ks)?)?;
        loop {
            let mut improved = false;
            for &i in &free {
                let keep = ks[i];
                let mut choice = keep;
                for k in 0..=level_steps {
                    if k == keep {
                        continue;
                    }
                    ks[i] = k;
                    let value = v.evaluate(&to_function(&ks)?)?;
                    if value > current {
                        current = value;
                        choice = k;
                        improved = true;
                    }
                }
                ks[i] = choice;
            }
            if !improved {
                break;
            }
        }
        best = best.max(current);
    }
    Ok(best)
}

/// Exact maximum of `V` over all `(L+1)^N` lattice functions `0 ≤ g ≤ f`.
pub fn brute_force_sup(v: &dyn Valuation, f: &RadialFunction, level_steps: usize) -> Result<f64> {
    if level_steps == 0 {
        return Err(Error::InvalidArgument("need at least 1 level step".into()));
    }
    let n = f.len();
    let size = (level_steps as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > 1_000_000 {
        return Err(Error::TooLarge(size));
    }
    let mut ks = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        let values = (0..n).map(|i| lattice_value(f.get(i), ks[i], level_steps)).collect();
        best = best.max(v.evaluate(&RadialFunction::new(f.grid(), values)?)?);
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(best);
            }
            ks[pos] += 1;
            if ks[pos] <= level_steps {
                break;
            }
            ks[pos] = 0;
            pos += 1;
        }
    }
}

/// `V⁺` for a black-box valuation, searched on a lattice.
struct SearchedPlus {
    inner: SharedValuation,
    level_steps: usize,
    search: SearchOptions,
}

impl Valuation for SearchedPlus {
    fn grid(&self) -> &Arc<DirectionGrid> {
        self.inner.grid()
    }

    fn evaluate(&self, f: &RadialFunction) -> Result<f64> {
        vplus_blackbox_with(self.inner.as_ref(), f, self.level_steps, self.search)
    }

    fn descriptor(&self) -> String {
        format!("plus({})", self.inner.descriptor())
    }

    fn is_positive(&self) -> bool {
        true
    }

    fn max_level(&self) -> Option<f64> {
        self.inner.max_level()
    }
}

/// `V⁻ = V⁺ − V`.
struct Remainder {
    plus: SharedValuation,
    inner: SharedValuation,
}

impl Valuation for Remainder {
    fn grid(&self) -> &Arc<DirectionGrid> {
        self.inner.grid()
    }

    fn evaluate(&self, f: &RadialFunction) -> Result<f64> {
        Ok(self.plus.evaluate(f)? - self.inner.evaluate(f)?)
    }

    fn descriptor(&self) -> String {
        format!("minus({})", self.inner.descriptor())
    }

    fn is_positive(&self) -> bool {
        true
    }

    fn max_level(&self) -> Option<f64> {
        self.inner.max_level()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    /// Lattice resolution for black-box searches.
    pub level_steps: usize,
    pub search: SearchOptions,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { level_steps: 16, search: SearchOptions::default() }
    }
}

/// `V = V⁺ − V⁻` together with the worst reconstruction residual seen on the test suite.
#[derive(Clone)]
pub struct DecompositionResult {
    pub plus: SharedValuation,
    pub minus: SharedValuation,
    pub residual_report: f64,
}

impl std::fmt::Debug for DecompositionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecompositionResult")
            .field("plus", &self.plus.descriptor())
            .field("minus", &self.minus.descriptor())
            .field("residual_report", &self.residual_report)
            .finish()
    }
}

pub fn decompose(v: &SharedValuation, test_suite: &[RadialFunction]) -> Result<DecompositionResult> {
    decompose_with(v, test_suite, DecomposeOptions::default())
}

pub fn decompose_with(
    v: &SharedValuation,
    test_suite: &[RadialFunction],
    options: DecomposeOptions,
) -> Result<DecompositionResult> {
    let at_zero = v.at_zero()?;
    if at_zero.abs() > CENTER_TOL {
        return Err(Error::NotCentered(at_zero));
    }
    let (plus, minus): (SharedValuation, SharedValuation) = match v.kernel() {
        Some(k) => {
            let base = k.centered();
            let plus = base.running_max();
            let minus = plus.minus(&base.resampled(plus.levels())?)?;
            (
                KernelValuation::shared(plus, format!("plus({})", v.descriptor())),
                KernelValuation::shared(minus, format!("minus({})", v.descriptor())),
            )
        }
        None => {
            let plus: SharedValuation =
                Arc::new(SearchedPlus { inner: v.clone(), level_steps: options.level_steps, search: options.search });
            let minus = Arc::new(Remainder { plus: plus.clone(), inner: v.clone() });
            (plus, minus)
        }
    };
    let mut residual_report: f64 = 0.0;
    for f in test_suite {
        let r = v.evaluate(f)? - (plus.evaluate(f)? - minus.evaluate(f)?);
        residual_report = residual_report.max(r.abs());
    }
    Ok(DecompositionResult { plus, minus, residual_report })
}
