//! Kernel recovery from a valuation and the continuity moduli of the
//! representing measures.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extension::Extension;
use crate::measures::{radon_nikodym, GridMeasure};
use crate::sphere_grid::GridSubset;
use crate::star_core::{to_radial, SimpleStarSet};
use crate::valuation::{eval_integral, Kernel, SharedValuation};

/// Recovers `K(λⱼ, tᵢ) = V̄(λⱼ χ_{tᵢ}) / wᵢ` with offset `V(0)`.
pub fn extract_kernel(v: &SharedValuation, levels: &[f64]) -> Result<Kernel> {
    extract_kernel_with_budget(v, levels, None)
}

/// As [`extract_kernel`], refusing up front when `levels × N` exceeds `budget`.
pub fn extract_kernel_with_budget(v: &SharedValuation, levels: &[f64], budget: Option<usize>) -> Result<Kernel> {
    if levels.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("level grid must start at 0".into()));
    }
    let grid = v.grid().clone();
    let n = grid.len();
    let needed = levels.len() * n;
    if let Some(budget) = budget {
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
    }
    let ext = Extension::new(v)?;
    let rows = levels
        .par_iter()
        .enumerate()
        .map(|(j, level)| {
            if j == 0 {
                return Ok(vec![0.0; n]);
            }
            (0..n)
                .map(|i| {
                    let rest: Vec<usize> = (0..n).filter(|k| *k != i).collect();
                    let point = SimpleStarSet::new(&grid, vec![vec![i], rest], vec![*level, 0.0])?;
                    Ok(ext.extend_simple_centered(&point)? / grid.weight(i))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let invariant = v.kernel().is_some_and(Kernel::is_invariant);
    Kernel::new(&grid, levels.to_vec(), rows, ext.offset(), invariant)
}

/// Largest `|V̄(g) − ∫ K(g(t), t) dm|` over `trials` random simple star sets
/// whose levels are drawn from the kernel's level grid.
pub fn roundtrip_error(v: &SharedValuation, kernel: &Kernel, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let grid = v.grid();
    let ext = Extension::new(v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = kernel.levels();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let g = random_simple_set(&mut rng, grid, levels)?;
        let err = (ext.extend_simple(&g)? - eval_integral(kernel, &to_radial(&g))?).abs();
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Random partition into at most six cells with levels picked from `levels`.
pub fn random_simple_set(
    rng: &mut impl Rng,
    grid: &Arc<crate::sphere_grid::DirectionGrid>,
    levels: &[f64],
) -> Result<SimpleStarSet> {
    let count = rng.gen_range(1..=grid.len().min(6));
    let mut cells = vec![Vec::new(); count];
    for i in 0..grid.len() {
        cells[rng.gen_range(0..count)].push(i);
    }
    let chosen = (0..count).map(|_| levels[rng.gen_range(0..levels.len())]).collect();
    SimpleStarSet::new(grid, cells, chosen)
}

fn nu_gap(v: &SharedValuation, lambda: f64, other: f64) -> Result<(Extension, GridMeasure)> {
    if !(lambda >= 0.0) || !(other >= 0.0) {
        return Err(Error::InvalidArgument("levels must be nonnegative".into()));
    }
    let ext = Extension::new(v)?;
    let gap = ext.nu(lambda)?.minus(ext.nu(other)?.as_ref())?;
    Ok((ext, gap))
}

/// `max_A |ν_λ(A) − ν_λ'(A)|` over the sampled subsets.
pub fn nu_modulus(v: &SharedValuation, lambda: f64, other: f64, subsets: &[GridSubset]) -> Result<f64> {
    let (_, gap) = nu_gap(v, lambda, other)?;
    Ok(subsets.iter().map(|a| gap.measure(a).abs()).fold(0.0, f64::max))
}

/// `sup_A |ν_λ(A) − ν_λ'(A)|` over every subset: the larger of the positive and negative parts.
pub fn nu_modulus_sup(v: &SharedValuation, lambda: f64, other: f64) -> Result<f64> {
    let (_, gap) = nu_gap(v, lambda, other)?;
    let pos: f64 = gap.density().iter().filter(|d| **d > 0.0).sum();
    let neg: f64 = gap.density().iter().filter(|d| **d < 0.0).map(|d| -d).sum();
    Ok(pos.max(neg))
}

/// `Σᵢ |K(λ, tᵢ) − K(λ', tᵢ)| · μᵢ`.
pub fn l1_modulus(kernel: &Kernel, mu: &GridMeasure, lambda: f64, other: f64) -> Result<f64> {
    if !kernel.grid().same_as(mu.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    for (i, m) in mu.density().iter().enumerate() {
        total += (kernel.value(lambda, i)? - kernel.value(other, i)?).abs() * m;
    }
    Ok(total)
}

/// Kernel of densities `dν_λⱼ / dμ` against a reference measure `μ`.
pub fn density_kernel(v: &SharedValuation, mu: &GridMeasure, levels: &[f64]) -> Result<Kernel> {
    let ext = Extension::new(v)?;
    let rows = levels.iter().map(|l| radon_nikodym(ext.nu(*l)?.as_ref(), mu)).collect::<Result<Vec<_>>>()?;
    Kernel::new(v.grid(), levels.to_vec(), rows, ext.offset(), false)
}
