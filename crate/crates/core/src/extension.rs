//! Extension `V̄` of a valuation to simple star sets and its uniform limit.
//!
//! `V̄(Σ aᵢ χ_{Aᵢ}) = V(0) + Σ ν_{aᵢ}(Aᵢ)`, with `ν` built from the centered
//! valuation. Bounded radial functions are reached by quantizing at steps
//! `2^{-j}` until successive values settle.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::jordan::decompose;
use crate::measures::{representing_measure, GridMeasure};
use crate::star_core::{quantize, radial_metric, to_radial, RadialFunction, SimpleStarSet};
use crate::valuation::{center, eval_integral, SharedValuation};

/// Maximum number of step halvings tried by [`Extension::extend_bounded`].
pub const MAX_HALVINGS: usize = 60;

/// Extension of one valuation, caching `ν_λ` tables per level.
pub struct Extension {
    source: SharedValuation,
    offset: f64,
    // positive parts whose representing measures are subtracted: [V] or [V⁺, V⁻]
    parts: Vec<SharedValuation>,
    tables: RwLock<HashMap<u64, Arc<GridMeasure>>>,
}

/// Value reached by the limiting procedure and the number of halvings it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedExtension {
    pub value: f64,
    pub halvings: usize,
}

impl Extension {
    pub fn new(v: &SharedValuation) -> Result<Self> {
        let (centered, offset) = center(v)?;
        let parts = if centered.is_positive() {
            vec![centered]
        } else {
            let d = decompose(&centered, &[])?;
            vec![d.plus, d.minus]
        };
        Ok(Self { source: v.clone(), offset, parts, tables: RwLock::new(HashMap::new()) })
    }

    pub fn valuation(&self) -> &SharedValuation {
        &self.source
    }

    /// `V(0)`, added back on top of `Σ ν_{aᵢ}(Aᵢ)`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Representing measure `ν_λ`, computed once per level.
    pub fn nu(&self, lambda: f64) -> Result<Arc<GridMeasure>> {
        let key = lambda.to_bits();
        if let Some(table) = self.tables.read().expect("table lock poisoned").get(&key) {
            return Ok(table.clone());
        }
        let mut table = representing_measure(&self.parts[0], lambda)?;
        if let Some(minus) = self.parts.get(1) {
            table = table.minus(&representing_measure(minus, lambda)?)?;
        }
        let table = Arc::new(table);
        let mut tables = self.tables.write().expect("table lock poisoned");
        Ok(tables.entry(key).or_insert(table).clone())
    }

    /// `Σ ν_{aᵢ}(Aᵢ)` without the constant `V(0)`.
    pub fn extend_simple_centered(&self, g: &SimpleStarSet) -> Result<f64> {
        if !g.grid().same_as(self.source.grid()) {
            return Err(Error::GridMismatch);
        }
        let mut total = 0.0;
        for (c, level) in g.levels().iter().enumerate() {
            if g.cells()[c].is_empty() {
                continue;
            }
            total += self.nu(*level)?.measure(&g.cell_subset(c));
        }
        Ok(total)
    }

    /// `V̄(g) = V(0) + Σ ν_{aᵢ}(Aᵢ)`.
    pub fn extend_simple(&self, g: &SimpleStarSet) -> Result<f64> {
        Ok(self.offset + self.extend_simple_centered(g)?)
    }

    /// Runs `V̄(quantize(f, 2^{-j}))` until two successive values differ by less
    /// than `tol`, counting only steps with `2^{-j} ≤ tol` (or below machine
    /// epsilon). Without that mesh guard, cells on rising and falling stretches
    /// of a kernel can cancel exactly for several halvings far from the limit.
    /// Steps whose quantization would leave the valuation's level range are
    /// skipped.
    pub fn extend_bounded(&self, f: &RadialFunction, tol: f64) -> Result<BoundedExtension> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let top = self.source.max_level().unwrap_or(f64::INFINITY);
        let mut previous: Option<f64> = None;
        for j in 0..=MAX_HALVINGS {
            let delta = 0.5f64.powi(j as i32);
            let g = quantize(f, delta)?;
            if g.levels().iter().any(|l| *l > top) {
                continue;
            }
            let value = self.extend_simple(&g)?;
            let fine = delta <= tol.max(f64::EPSILON);
            if let Some(p) = previous {
                if fine && (value - p).abs() < tol {
                    return Ok(BoundedExtension { value, halvings: j });
                }
            }
            previous = Some(value);
        }
        Err(Error::NoConvergence(MAX_HALVINGS))
    }
}

pub fn extend_simple(v: &SharedValuation, g: &SimpleStarSet) -> Result<f64> {
    Extension::new(v)?.extend_simple(g)
}

pub fn extend_bounded(v: &SharedValuation, f: &RadialFunction, tol: f64) -> Result<f64> {
    Ok(Extension::new(v)?.extend_bounded(f, tol)?.value)
}

/// `|V̄(quantize(f, δ)) − V(f)|` for each `δ`.
pub fn agreement_check(v: &SharedValuation, f: &RadialFunction, deltas: &[f64]) -> Result<Vec<f64>> {
    let ext = Extension::new(v)?;
    let exact = match v.kernel() {
        Some(k) => eval_integral(k, f)?,
        None => v.evaluate(f)?,
    };
    deltas.iter().map(|d| Ok((ext.extend_simple(&quantize(f, *d)?)? - exact).abs())).collect()
}

/// Successive gaps of `V̄` along a sequence of simple star sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyReport {
    pub tail_index: usize,
    /// `max_{i ≥ tail_index} |V̄(g_{i+1}) − V̄(g_i)|`.
    pub max_gap: f64,
    pub gaps: Vec<f64>,
}

/// Tracks `|V̄(g_{i+1}) − V̄(g_i)|` from the midpoint of the sequence on.
///
/// The input must look Cauchy in the sup metric: the tail (from the midpoint)
/// has to be strictly tighter than the whole sequence unless both are
/// constant. Anything else is reported as a precondition violation.
pub fn cauchy_check(v: &SharedValuation, sequence: &[SimpleStarSet]) -> Result<CauchyReport> {
    let tail_index = sequence.len() / 2;
    let functions: Vec<RadialFunction> = sequence.iter().map(to_radial).collect();
    let diameter = |from: usize| -> Result<f64> {
        let mut d: f64 = 0.0;
        for a in &functions[from..] {
            for b in &functions[from..] {
                d = d.max(radial_metric(a, b)?);
            }
        }
        Ok(d)
    };
    let (whole, tail) = (diameter(0)?, diameter(tail_index)?);
    if tail > 0.0 && tail >= whole {
        return Err(Error::Precondition(format!(
            "sequence is not Cauchy in the radial metric: tail diameter {tail} vs overall {whole}"
        )));
    }
    let ext = Extension::new(v)?;
    let values = sequence.iter().map(|g| ext.extend_simple(g)).collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let max_gap = gaps.iter().skip(tail_index).copied().fold(0.0, f64::max);
    Ok(CauchyReport { tail_index, max_gap, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_grid::{build_grid, DirectionGrid};
    use crate::valuation::{level_range, Kernel, KernelValuation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(count: usize) -> Arc<DirectionGrid> {
        Arc::new(build_grid(2, count).unwrap())
    }

    fn theta(g: &Arc<DirectionGrid>, f: impl Fn(f64) -> f64) -> SharedValuation {
        KernelValuation::shared(Kernel::from_theta(g, &level_range(0.0, 0.25, 4.0).unwrap(), 0.0, f).unwrap(), "θ")
    }

    #[test]
    fn simple_examples() {
        let g = grid(6);
        let sq = theta(&g, |s| s * s);
        let c = 1.75;
        let single = SimpleStarSet::single(&g, c).unwrap();
        let direct = sq.evaluate(&RadialFunction::constant(&g, c).unwrap()).unwrap();
        assert!((extend_simple(&sq, &single).unwrap() - direct).abs() < 1e-15);

        let zero = SimpleStarSet::new(&g, vec![vec![0, 1, 2], vec![3, 4, 5]], vec![0.0, 0.0]).unwrap();
        assert_eq!(extend_simple(&sq, &zero).unwrap(), 0.0);

        let halves = SimpleStarSet::new(&g, vec![vec![0, 2, 4], vec![1, 3, 5]], vec![1.0, 2.0]).unwrap();
        assert!((extend_simple(&sq, &halves).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn offsets_are_carried() {
        let g = grid(4);
        let k = Kernel::from_theta(&g, &[0.0, 1.0, 2.0], 3.0, |s| 1.0 + s).unwrap();
        let v = KernelValuation::shared(k, "shifted");
        let f = RadialFunction::new(&g, vec![0.0, 1.0, 2.0, 0.5]).unwrap();
        let g_simple = SimpleStarSet::from_radial(&f);
        assert!((extend_simple(&v, &g_simple).unwrap() - v.evaluate(&f).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn bounded_examples() {
        let g = grid(8);
        let lin = theta(&g, |s| s);
        let f = RadialFunction::new(&g, vec![0.3, 1.1, 0.0, 2.7, 0.05, 1.0, 3.3, 0.9]).unwrap();
        let mean: f64 = f.values().iter().zip(g.weights()).map(|(a, w)| a * w).sum();
        assert!((extend_bounded(&lin, &f, 1e-9).unwrap() - mean).abs() < 1e-8);

        let s = SimpleStarSet::new(&g, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]], vec![0.5, 1.25]).unwrap();
        let bump = theta(&g, |s| s - s * s);
        let limit = extend_bounded(&bump, &to_radial(&s), 1e-13).unwrap();
        assert!((limit - extend_simple(&bump, &s).unwrap()).abs() < 1e-12);

        assert!(extend_bounded(&lin, &RadialFunction::zero(&g), 1e-12).unwrap().abs() < 1e-12);
        assert!(extend_bounded(&lin, &f, 0.0).is_err());
    }

    #[test]
    fn bounded_survives_cancelling_cells() {
        // Slopes 0.8 and -1.2 make quantization errors of different cells cancel
        // exactly at coarse steps.
        let g = grid(16);
        let zig = theta(&g, |s| if s <= 0.75 { 0.8 * s } else { 0.6 - 1.2 * (s - 0.75) });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let f = RadialFunction::new(&g, (0..16).map(|_| rng.gen::<f64>() * 1.5).collect()).unwrap();
            let exact = extend_simple(&zig, &SimpleStarSet::from_radial(&f)).unwrap();
            assert!((extend_bounded(&zig, &f, 1e-13).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn agreement_examples() {
        let g = grid(8);
        let lin = theta(&g, |s| s);
        let f = RadialFunction::new(&g, vec![0.3, 1.1, 0.0, 2.7, 0.05, 1.0, 3.3, 0.9]).unwrap();
        let deltas = [0.25, 0.125, 1.0 / 64.0];
        for (r, d) in agreement_check(&lin, &f, &deltas).unwrap().iter().zip(deltas) {
            assert!(*r <= d);
        }
        // values already on the level grid and knots at multiples of 1/4
        let on_grid = RadialFunction::new(&g, vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0]).unwrap();
        let bump = theta(&g, |s| s - s * s);
        assert!(agreement_check(&bump, &on_grid, &[0.25]).unwrap()[0] < 1e-12);

        let c = 0.7;
        let sq = theta(&g, |s| s * s);
        let r = agreement_check(&sq, &RadialFunction::constant(&g, c).unwrap(), &[0.5]).unwrap()[0];
        let k = sq.kernel().unwrap();
        let expect = (k.value(1.0, 0).unwrap() - k.value(c, 0).unwrap()).abs();
        assert!((r - expect).abs() < 1e-15);
    }

    #[test]
    fn cauchy_examples() {
        let g = grid(8);
        let sq = theta(&g, |s| s * s);
        let f = RadialFunction::new(&g, vec![0.3, 1.1, 0.0, 2.7, 0.05, 1.0, 3.3, 0.9]).unwrap();
        let seq: Vec<SimpleStarSet> = (1..12).map(|i| quantize(&f, 0.5f64.powi(i)).unwrap()).collect();
        let report = cauchy_check(&sq, &seq).unwrap();
        let lip = sq.kernel().unwrap().lipschitz();
        for (i, gap) in report.gaps.iter().enumerate() {
            assert!(*gap <= 2.0 * lip * 0.5f64.powi(i as i32 + 1) + 1e-12);
        }

        let constant = vec![SimpleStarSet::single(&g, 1.0).unwrap(); 5];
        assert_eq!(cauchy_check(&sq, &constant).unwrap().max_gap, 0.0);

        let a = SimpleStarSet::single(&g, 1.0).unwrap();
        let b = SimpleStarSet::single(&g, 2.0).unwrap();
        let alternating: Vec<SimpleStarSet> = (0..8).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        assert!(matches!(cauchy_check(&sq, &alternating), Err(Error::Precondition(_))));
    }

    #[test]
    fn cache_is_shared_across_threads() {
        let g = grid(16);
        let v = theta(&g, |s| s * s - s);
        let ext = Arc::new(Extension::new(&v).unwrap());
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let ext = ext.clone();
                std::thread::spawn(move || ext.nu(1.5).unwrap().total())
            })
            .collect();
        let totals: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(totals.iter().all(|t| *t == totals[0]));
        assert!((totals[0] - 0.75).abs() < 1e-15);
    }
}
