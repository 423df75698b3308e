//! Control measure `μ_λ`, content `ζ_λ`, representing measure `ν_λ` and the
//! normalized control measure `μ`.
//!
//! Every grid subset is open and closed at once, so the regularization layers
//! in the definitions (inf over open supersets, sup over closed subsets)
//! collapse and the closed forms below are what remains. All constructions
//! work with the centered valuation `V − V(0)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::decompose;
use crate::sphere_grid::{DirectionGrid, GridSubset};
use crate::star_core::RadialFunction;
use crate::valuation::{center, SharedValuation, Valuation};

/// Finitely additive set function given by one density value per direction.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    grid: Arc<DirectionGrid>,
    density: Vec<f64>,
    lambda: Option<f64>,
}

/// Wire form `{"lambda": λ, "density": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasureJson {
    pub lambda: Option<f64>,
    pub density: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: &Arc<DirectionGrid>, density: Vec<f64>, lambda: Option<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("{} densities for grid of size {}", density.len(), grid.len())));
        }
        if density.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("measure density is not finite".into()));
        }
        Ok(Self { grid: grid.clone(), density, lambda })
    }

    pub fn zero(grid: &Arc<DirectionGrid>, lambda: Option<f64>) -> Self {
        Self { grid: grid.clone(), density: vec![0.0; grid.len()], lambda }
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// `Σ_{i∈A} densityᵢ` in index order.
    pub fn measure(&self, set: &GridSubset) -> f64 {
        set.indices().map(|i| self.density[i]).sum()
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.density.iter().all(|d| *d >= 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { density: self.density.iter().map(|d| c * d).collect(), ..self.clone() }
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let density = self.density.iter().zip(&other.density).map(|(a, b)| a - b).collect();
        Ok(Self { density, ..self.clone() })
    }

    pub fn to_json(&self) -> GridMeasureJson {
        GridMeasureJson { lambda: self.lambda, density: self.density.clone() }
    }

    pub fn from_json(grid: &Arc<DirectionGrid>, json: GridMeasureJson) -> Result<Self> {
        Self::new(grid, json.density, json.lambda)
    }
}

fn require_positive(v: &dyn Valuation) -> Result<()> {
    if v.is_positive() {
        Ok(())
    } else {
        Err(Error::NotPositive(v.descriptor()))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("λ must be a nonnegative real, got {lambda}")));
    }
    Ok(())
}

/// `μ_λ(A) = sup{V(f) − V(0) : supp f ⊆ A, ‖f‖_∞ ≤ λ}` with density `wᵢ · max_{s≤λ} K'(s, tᵢ)`.
pub fn control_measure(v: &dyn Valuation, lambda: f64) -> Result<GridMeasure> {
    require_positive(v)?;
    check_lambda(lambda)?;
    let kernel =
        v.kernel().ok_or_else(|| Error::Unsupported { op: "control_measure", valuation: v.descriptor() })?.centered();
    let grid = v.grid();
    let density =
        (0..grid.len()).map(|i| Ok(grid.weight(i) * kernel.sup_on(i, lambda)?)).collect::<Result<Vec<_>>>()?;
    GridMeasure::new(grid, density, Some(lambda))
}

/// `ζ_λ(C) = inf{V(f) − V(0) : f = λ on C, 0 ≤ f ≤ λ}`.
///
/// Kernel valuations use `Σ_{C} wᵢ K'(λ, tᵢ) + Σ_{Cᶜ} wᵢ min_{s≤λ} K'(s, tᵢ)`.
/// For a positive black box the off-`C` infimum sits at `f = 0`, so the
/// content is `V(λχ_C) − V(0)`.
pub fn content(v: &dyn Valuation, lambda: f64, set: &GridSubset) -> Result<f64> {
    require_positive(v)?;
    check_lambda(lambda)?;
    let grid = v.grid();
    if !grid.same_as(set.grid()) {
        return Err(Error::GridMismatch);
    }
    match v.kernel() {
        Some(k) => {
            let k = k.centered();
            let mut total = 0.0;
            for i in 0..grid.len() {
                let term = if set.contains(i) { k.value(lambda, i)? } else { k.inf_on(i, lambda)? };
                total += grid.weight(i) * term;
            }
            Ok(total)
        }
        None => Ok(v.evaluate(&RadialFunction::indicator(set, lambda)?)? - v.at_zero()?),
    }
}

fn positive_representing(v: &dyn Valuation, lambda: f64) -> Result<GridMeasure> {
    let grid = v.grid();
    let density = match v.kernel() {
        Some(k) => {
            let k = k.centered();
            (0..grid.len()).map(|i| Ok(grid.weight(i) * k.value(lambda, i)?)).collect::<Result<Vec<_>>>()?
        }
        None => {
            let at_zero = v.at_zero()?;
            (0..grid.len())
                .map(|i| {
                    let point = RadialFunction::indicator(&GridSubset::singleton(grid, i)?, lambda)?;
                    Ok(v.evaluate(&point)? - at_zero)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    GridMeasure::new(grid, density, Some(lambda))
}

/// `ν_λ(A) = ζ_λ(A)` for positive valuations; signed valuations go through
/// `ν_λ(V⁺) − ν_λ(V⁻)`.
pub fn representing_measure(v: &SharedValuation, lambda: f64) -> Result<GridMeasure> {
    check_lambda(lambda)?;
    if v.is_positive() {
        return positive_representing(v.as_ref(), lambda);
    }
    let (centered, _) = center(v)?;
    let parts = decompose(&centered, &[])?;
    let plus = positive_representing(parts.plus.as_ref(), lambda)?;
    let minus = positive_representing(parts.minus.as_ref(), lambda)?;
    plus.minus(&minus)
}

/// `μ = Σ_{k=1}^{k_max} μ_k / (2^k μ_k(S))`.
///
/// `k_max` defaults to `⌈λ_max⌉ + 1`. Signed valuations use `μ_k(V⁺) + μ_k(V⁻)`.
/// Terms whose level exceeds the valuation's range, or whose total mass
/// vanishes, are dropped; if nothing survives the measure is degenerate.
pub fn normalized_control(v: &SharedValuation, lambda_max: f64, k_max: Option<usize>) -> Result<GridMeasure> {
    check_lambda(lambda_max)?;
    let k_max = k_max.unwrap_or(lambda_max.ceil() as usize + 1);
    let (centered, _) = center(v)?;
    let parts: Vec<SharedValuation> = if centered.is_positive() {
        vec![centered]
    } else {
        let d = decompose(&centered, &[])?;
        vec![d.plus, d.minus]
    };
    let top = v.max_level().unwrap_or(f64::INFINITY);
    let grid = v.grid();
    let mut density = vec![0.0; grid.len()];
    let mut any = false;
    for k in 1..=k_max {
        let level = k as f64;
        if level > top {
            break;
        }
        let mut term = GridMeasure::zero(grid, Some(level));
        for part in &parts {
            let mu = control_measure(part.as_ref(), level)?;
            for (t, m) in term.density.iter_mut().zip(&mu.density) {
                *t += m;
            }
        }
        let mass = term.total();
        if mass > 0.0 {
            any = true;
            let scale = 1.0 / (2f64.powi(k as i32) * mass);
            for (d, t) in density.iter_mut().zip(&term.density) {
                *d += scale * t;
            }
        }
    }
    if !any {
        return Err(Error::DegenerateMeasure);
    }
    GridMeasure::new(grid, density, None)
}

/// Per-index ratio `νᵢ / μᵢ`, zero where both vanish.
pub fn radon_nikodym(nu: &GridMeasure, mu: &GridMeasure) -> Result<Vec<f64>> {
    if !nu.grid.same_as(&mu.grid) {
        return Err(Error::GridMismatch);
    }
    nu.density
        .iter()
        .zip(&mu.density)
        .enumerate()
        .map(|(i, (n, m))| match (*n == 0.0, *m > 0.0) {
            (_, true) => Ok(n / m),
            (true, false) => Ok(0.0),
            (false, false) => Err(Error::NotAbsolutelyContinuous(i)),
        })
        .collect()
}
