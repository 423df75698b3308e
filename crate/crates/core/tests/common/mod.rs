//! Independent finite oracles shared by the integration tests.
//!
//! Everything here enumerates the defining sup/inf over explicit lattices of
//! radial functions and never calls the closed forms under test.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use starval::sphere_grid::{DirectionGrid, GridSubset};
use starval::star_core::RadialFunction;
use starval::valuation::{Kernel, SharedValuation, Valuation};

pub fn grid(dimension: usize, points: usize) -> Arc<DirectionGrid> {
    Arc::new(starval::build_grid(dimension, points).unwrap())
}

/// Every function `t ↦ choice(t)` with `choice(t) ∈ allowed(t)`.
pub fn enumerate(grid: &Arc<DirectionGrid>, allowed: &[Vec<f64>]) -> Vec<RadialFunction> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; allowed.len()];
    loop {
        let values = idx.iter().zip(allowed).map(|(k, a)| a[*k]).collect();
        out.push(RadialFunction::new(grid, values).unwrap());
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < allowed[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// `{0, step, 2·step, …, λ}`, with `λ` itself included.
pub fn ladder(lambda: f64, step: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|x| *x < lambda).collect();
    out.push(lambda);
    out
}

pub fn subsets(grid: &Arc<DirectionGrid>) -> Vec<GridSubset> {
    (0..1u64 << grid.len()).map(|b| GridSubset::from_bits(grid, b)).collect()
}

fn centered_value(v: &dyn Valuation, f: &RadialFunction, at_zero: f64) -> f64 {
    v.evaluate(f).unwrap() - at_zero
}

/// `sup{Ṽ(f) : supp f ⊆ G, ‖f‖ ≤ λ}` on the lattice of multiples of `step`.
pub fn open_sup(v: &dyn Valuation, g: &GridSubset, lambda: f64, step: f64) -> f64 {
    let at_zero = v.at_zero().unwrap();
    let grid = v.grid();
    let allowed: Vec<Vec<f64>> =
        (0..grid.len()).map(|i| if g.contains(i) { ladder(lambda, step) } else { vec![0.0] }).collect();
    enumerate(grid, &allowed).iter().map(|f| centered_value(v, f, at_zero)).fold(f64::NEG_INFINITY, f64::max)
}

/// `μ_λ(A) = inf_{G ⊇ A} sup{Ṽ(f) : supp f ⊆ G, ‖f‖ ≤ λ}`.
pub fn mu_oracle(v: &dyn Valuation, a: &GridSubset, lambda: f64, step: f64) -> f64 {
    subsets(v.grid())
        .iter()
        .filter(|g| a.is_subset_of(g))
        .map(|g| open_sup(v, g, lambda, step))
        .fold(f64::INFINITY, f64::min)
}

/// `ζ_λ(C) = inf{Ṽ(f) : f = λ on C, ‖f‖ ≤ λ}`.
pub fn zeta_oracle(v: &dyn Valuation, c: &GridSubset, lambda: f64, step: f64) -> f64 {
    let at_zero = v.at_zero().unwrap();
    let grid = v.grid();
    let allowed: Vec<Vec<f64>> =
        (0..grid.len()).map(|i| if c.contains(i) { vec![lambda] } else { ladder(lambda, step) }).collect();
    enumerate(grid, &allowed).iter().map(|f| centered_value(v, f, at_zero)).fold(f64::INFINITY, f64::min)
}

/// `ν_λ(A) = inf_{G ⊇ A} sup_{K ⊆ G} ζ_λ(K)`.
pub fn nu_oracle(v: &dyn Valuation, a: &GridSubset, lambda: f64, step: f64) -> f64 {
    let all = subsets(v.grid());
    let zetas: Vec<f64> = all.iter().map(|k| zeta_oracle(v, k, lambda, step)).collect();
    all.iter()
        .filter(|g| a.is_subset_of(g))
        .map(|g| {
            all.iter().zip(&zetas).filter(|(k, _)| k.is_subset_of(g)).map(|(_, z)| *z).fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Direction-dependent kernel with `K(0, ·) = 0` and random values at knots
/// `0, ½, 1, …, top`.
pub fn random_knot_kernel(rng: &mut impl Rng, grid: &Arc<DirectionGrid>, top: f64) -> Kernel {
    let levels = ladder(top, 0.5);
    let rows = levels
        .iter()
        .enumerate()
        .map(|(j, _)| (0..grid.len()).map(|_| if j == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect())
        .collect();
    Kernel::new(grid, levels, rows, 0.0, false).unwrap()
}

pub fn random_function(rng: &mut impl Rng, grid: &Arc<DirectionGrid>, top: f64) -> RadialFunction {
    RadialFunction::new(grid, (0..grid.len()).map(|_| rng.gen::<f64>() * top).collect()).unwrap()
}

/// Random subset, each point kept with probability ½.
pub fn random_subset(rng: &mut impl Rng, grid: &Arc<DirectionGrid>) -> GridSubset {
    GridSubset::from_mask(grid, (0..grid.len()).map(|_| rng.gen_bool(0.5)).collect()).unwrap()
}

/// The twenty catalogue kernels on `levels` as shared valuations.
pub fn builtins(grid: &Arc<DirectionGrid>, levels: &[f64]) -> Vec<(String, SharedValuation)> {
    starval::valuation::builtin_kernels(grid, levels)
        .unwrap()
        .into_iter()
        .map(|(name, k)| {
            let v = starval::KernelValuation::shared(k, name.clone());
            (name, v)
        })
        .collect()
}
