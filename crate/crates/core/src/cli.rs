//! Batch experiment runner behind the `starval` binary.
//!
//! Exit status: 0 on success, 2 when a numerical check fails, 1 on usage,
//! configuration or I/O errors. Failures are reported on stderr as one JSON
//! object and, when an output directory is given, also as `failure.json`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::extension::Extension;
use crate::jordan::decompose;
use crate::kernel_extract::{extract_kernel_with_budget, roundtrip_error};
use crate::measures::{content, control_measure, representing_measure};
use crate::sphere_grid::{DirectionGrid, GridSpec, GridSubset};
use crate::star_core::{quantize, RadialFunction};
use crate::valuation::{
    builtin_families, check_additive, check_valuation_identity, level_range, min_functional, Kernel, KernelJson,
    KernelValuation, SharedValuation, ThetaFamily, Valuation,
};

#[derive(Debug, Parser)]
#[command(name = "starval", about = "Radial valuations on discretized star bodies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel scenarios.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Valuation identity on random pairs.
    Verify(CommonArgs),
    /// Jordan decomposition over a random test suite.
    Decompose(CommonArgs),
    /// μ_λ(A), ζ_λ(A) and ν_λ(A) for one set.
    Measures {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        lambda: f64,
        /// Comma-separated grid indices.
        #[arg(long)]
        set: String,
    },
    /// V(f) against the limit of its simple approximations.
    Extend {
        #[command(flatten)]
        common: CommonArgs,
        /// CSV row of N radial values.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Recovers the representing kernel and writes it as JSON.
    ExtractKernel {
        #[command(flatten)]
        common: CommonArgs,
        /// Level grid `start:step:stop`.
        #[arg(long)]
        levels: Option<String>,
        /// Maximum number of valuation evaluations.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Min-functional report: orthogonally additive yet not a valuation.
    Counterexample(CommonArgs),
    /// Checks every scenario of a batch, in parallel.
    Sweep(CommonArgs),
}

/// Level grid given as `"start:step:stop"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Range(String),
    List(Vec<f64>),
}

impl LevelSpec {
    pub fn resolve(&self) -> anyhow::Result<Vec<f64>> {
        match self {
            Self::List(levels) => Ok(levels.clone()),
            Self::Range(text) => {
                let parts: Vec<f64> = text
                    .split(':')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("bad level range `{text}`"))?;
                let [start, step, stop] = parts[..] else {
                    bail!("level range `{text}` must read start:step:stop");
                };
                Ok(level_range(start, step, stop)?)
            }
        }
    }
}

fn default_levels() -> LevelSpec {
    LevelSpec::Range("0:0.1:2".into())
}

/// Where the valuation under study comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuationSpec {
    KernelFile {
        kernel_path: PathBuf,
    },
    Builtin {
        builtin: String,
        #[serde(default = "default_levels")]
        levels: LevelSpec,
    },
    Family {
        #[serde(flatten)]
        family: ThetaFamily,
        #[serde(default = "default_levels")]
        levels: LevelSpec,
        #[serde(default)]
        offset: f64,
    },
}

impl ValuationSpec {
    pub fn build(&self, grid: &Arc<DirectionGrid>) -> anyhow::Result<SharedValuation> {
        let (kernel, name) = match self {
            Self::KernelFile { kernel_path } => {
                let text = fs::read_to_string(kernel_path)
                    .with_context(|| format!("reading kernel {}", kernel_path.display()))?;
                let json: KernelJson =
                    serde_json::from_str(&text).with_context(|| format!("parsing kernel {}", kernel_path.display()))?;
                (Kernel::from_json(grid, json)?, kernel_path.display().to_string())
            }
            Self::Builtin { builtin, levels } => {
                let (_, family, offset) = builtin_families()
                    .into_iter()
                    .find(|(name, _, _)| name == builtin)
                    .ok_or_else(|| anyhow!("unknown builtin kernel `{builtin}`"))?;
                (family.kernel(grid, &levels.resolve()?, offset)?, builtin.clone())
            }
            Self::Family { family, levels, offset } => {
                (family.kernel(grid, &levels.resolve()?, *offset)?, format!("{family:?}"))
            }
        };
        Ok(KernelValuation::shared(kernel, name))
    }
}

/// One entry of a `sweep`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub builtin: String,
    pub grid: GridSpec,
    #[serde(default = "default_levels")]
    pub levels: LevelSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub valuation: Option<ValuationSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Pass/fail threshold for the command's check; each command has its own default.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Quantization steps used by `sweep` agreement checks.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

fn default_grid() -> GridSpec {
    GridSpec { dimension: 2, points: 8 }
}

fn default_trials() -> usize {
    100
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            valuation: None,
            seed: None,
            trials: default_trials(),
            tolerance: None,
            deltas: Vec::new(),
            scenarios: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Self = serde_json::from_str(text).context("malformed config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                bail!("tolerance must be positive, got {t}");
            }
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0)) {
            bail!("quantization steps must be positive, got {d}");
        }
        if let Some(ValuationSpec::KernelFile { kernel_path }) = &self.valuation {
            if !kernel_path.exists() {
                bail!("kernel file {} does not exist", kernel_path.display());
            }
        }
        Ok(())
    }
}

/// Check failure carried to exit status 2.
#[derive(Debug)]
pub struct CheckFailure {
    pub invariant: String,
    pub details: Value,
}

enum Outcome {
    Passed,
    Failed(CheckFailure),
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut file = fs::File::create(&tmp).with_context(|| format!("writing {}", tmp.display()))?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, &target).with_context(|| format!("renaming to {}", target.display()))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

struct RunContext {
    config: ExperimentConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

impl RunContext {
    fn new(common: &CommonArgs, config_required: bool) -> anyhow::Result<Self> {
        let config = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None if config_required => bail!("--config <path> is required"),
            None => ExperimentConfig::default(),
        };
        let seed = common.seed.or(config.seed);
        Ok(Self { config, out: common.out.clone(), seed })
    }

    fn seed(&self) -> anyhow::Result<u64> {
        self.seed.ok_or_else(|| anyhow!("a seed is required: pass --seed or set \"seed\" in the config"))
    }

    fn grid(&self) -> anyhow::Result<Arc<DirectionGrid>> {
        Ok(self.config.grid.build()?)
    }

    fn valuation(&self, grid: &Arc<DirectionGrid>) -> anyhow::Result<SharedValuation> {
        self.config.valuation.as_ref().ok_or_else(|| anyhow!("config needs a \"valuation\" entry"))?.build(grid)
    }

    fn emit(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        std::io::stdout().write_all(bytes)?;
        if let Some(dir) = &self.out {
            write_atomic(dir, name, bytes)?;
        }
        Ok(())
    }
}

fn random_function(rng: &mut impl Rng, grid: &Arc<DirectionGrid>, top: f64) -> crate::Result<RadialFunction> {
    RadialFunction::new(grid, (0..grid.len()).map(|_| rng.gen::<f64>() * top).collect())
}

fn top_level(v: &dyn Valuation) -> f64 {
    v.max_level().unwrap_or(1.0)
}

fn cmd_verify(ctx: &RunContext) -> anyhow::Result<Outcome> {
    let grid = ctx.grid()?;
    let v = ctx.valuation(&grid)?;
    let tolerance = ctx.config.tolerance.unwrap_or(1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed()?);
    let top = top_level(v.as_ref());
    let mut rows = Vec::new();
    let mut worst = (0.0f64, 0usize);
    for id in 0..ctx.config.trials {
        let f = random_function(&mut rng, &grid, top)?;
        let g = random_function(&mut rng, &grid, top)?;
        let r = check_valuation_identity(v.as_ref(), &f, &g)?;
        if r > worst.0 || id == 0 {
            worst = (r, id);
        }
        rows.push(vec![id.to_string(), fmt_f64(r)]);
    }
    ctx.emit("verify.csv", &csv_bytes(&["pair_id", "residual"], &rows)?)?;
    if worst.0 > tolerance {
        return Ok(Outcome::Failed(CheckFailure {
            invariant: "valuation identity V(f∨g)+V(f∧g)=V(f)+V(g)".into(),
            details: json!({"pair_id": worst.1, "residual": worst.0, "tolerance": tolerance}),
        }));
    }
    Ok(Outcome::Passed)
}

fn cmd_decompose(ctx: &RunContext) -> anyhow::Result<Outcome> {
    let grid = ctx.grid()?;
    let v = ctx.valuation(&grid)?;
    let tolerance = ctx.config.tolerance.unwrap_or(1e-10);
    let (v, _) = crate::valuation::center(&v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed()?);
    let top = top_level(v.as_ref());
    let suite: Vec<RadialFunction> =
        (0..ctx.config.trials).map(|_| random_function(&mut rng, &grid, top)).collect::<crate::Result<_>>()?;
    let d = decompose(&v, &suite)?;
    let mut rows = Vec::new();
    let mut failure = None;
    for (id, f) in suite.iter().enumerate() {
        let (value, plus, minus) = (v.evaluate(f)?, d.plus.evaluate(f)?, d.minus.evaluate(f)?);
        let residual = (value - (plus - minus)).abs();
        if failure.is_none() && (residual > tolerance || plus < 0.0 || minus < 0.0) {
            failure = Some(json!({
                "test_id": id, "V": value, "V_plus": plus, "V_minus": minus,
                "residual": residual, "tolerance": tolerance,
            }));
        }
        rows.push(vec![id.to_string(), fmt_f64(value), fmt_f64(plus), fmt_f64(minus), fmt_f64(residual)]);
    }
    ctx.emit("decompose.csv", &csv_bytes(&["test_id", "V", "V_plus", "V_minus", "residual"], &rows)?)?;
    Ok(match failure {
        Some(details) => {
            Outcome::Failed(CheckFailure { invariant: "V = V⁺ − V⁻ with V⁺, V⁻ ≥ 0".into(), details })
        }
        None => Outcome::Passed,
    })
}

fn parse_indices(text: &str) -> anyhow::Result<Vec<usize>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|p| p.trim().parse::<usize>().with_context(|| format!("bad index `{p}`"))).collect()
}

fn cmd_measures(ctx: &RunContext, lambda: f64, set: &str) -> anyhow::Result<Outcome> {
    let grid = ctx.grid()?;
    let v = ctx.valuation(&grid)?;
    let (v, _) = crate::valuation::center(&v)?;
    let a = GridSubset::from_indices(&grid, &parse_indices(set)?)?;
    let nu = representing_measure(&v, lambda)?;
    let mut rows = Vec::new();
    if v.is_positive() {
        rows.push(vec!["mu".into(), fmt_f64(control_measure(v.as_ref(), lambda)?.measure(&a))]);
        rows.push(vec!["zeta".into(), fmt_f64(content(v.as_ref(), lambda, &a)?)]);
    } else {
        let d = decompose(&v, &[])?;
        for (name, part) in [("plus", &d.plus), ("minus", &d.minus)] {
            rows.push(vec![format!("mu_{name}"), fmt_f64(control_measure(part.as_ref(), lambda)?.measure(&a))]);
            rows.push(vec![format!("zeta_{name}"), fmt_f64(content(part.as_ref(), lambda, &a)?)]);
        }
    }
    rows.push(vec!["nu".into(), fmt_f64(nu.measure(&a))]);
    ctx.emit("measures.csv", &csv_bytes(&["quantity", "value"], &rows)?)?;
    if let Some(dir) = &ctx.out {
        write_atomic(dir, "nu.json", serde_json::to_string_pretty(&nu.to_json())?.as_bytes())?;
    }
    Ok(Outcome::Passed)
}

fn cmd_extend(ctx: &RunContext, input: &Path, tol: f64) -> anyhow::Result<Outcome> {
    let grid = ctx.grid()?;
    let v = ctx.valuation(&grid)?;
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let f = RadialFunction::from_csv_row(&grid, &text)?;
    let tolerance = ctx.config.tolerance.unwrap_or(1e-8);
    let direct = v.evaluate(&f)?;
    let limit = Extension::new(&v)?.extend_bounded(&f, tol)?;
    let residual = (direct - limit.value).abs();
    let rows = vec![vec![fmt_f64(direct), fmt_f64(limit.value), fmt_f64(residual), limit.halvings.to_string()]];
    ctx.emit("extend.csv", &csv_bytes(&["V", "V_bar", "residual", "halvings"], &rows)?)?;
    if residual > tolerance {
        return Ok(Outcome::Failed(CheckFailure {
            invariant: "extension agrees with V on radial functions".into(),
            details: json!({"V": direct, "V_bar": limit.value, "residual": residual, "tolerance": tolerance}),
        }));
    }
    Ok(Outcome::Passed)
}

fn cmd_extract(
    ctx: &RunContext,
    out: Option<&Path>,
    levels: Option<&str>,
    budget: Option<usize>,
) -> anyhow::Result<Outcome> {
    let grid = ctx.grid()?;
    let v = ctx.valuation(&grid)?;
    let levels = match levels {
        Some(text) => LevelSpec::Range(text.into()).resolve()?,
        None => v
            .kernel()
            .map(|k| k.levels().to_vec())
            .ok_or_else(|| anyhow!("--levels is required for valuations without a level grid"))?,
    };
    let kernel = extract_kernel_with_budget(&v, &levels, budget)?;
    let tolerance = ctx.config.tolerance.unwrap_or(1e-10);
    let error = roundtrip_error(&v, &kernel, ctx.config.trials.max(1), ctx.seed()?)?;
    let text = serde_json::to_string_pretty(&kernel.to_json())?;
    if let Some(out) = out {
        if out.extension().is_some_and(|e| e == "json") {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            write_atomic(dir, &out.file_name().unwrap().to_string_lossy(), text.as_bytes())?;
        } else {
            write_atomic(out, "kernel.json", text.as_bytes())?;
        }
    }
    let rows = vec![vec![levels.len().to_string(), grid.len().to_string(), fmt_f64(error)]];
    let bytes = csv_bytes(&["levels", "points", "roundtrip_error"], &rows)?;
    std::io::stdout().write_all(&bytes)?;
    if error > tolerance {
        return Ok(Outcome::Failed(CheckFailure {
            invariant: "representation on simple star sets".into(),
            details: json!({"roundtrip_error": error, "tolerance": tolerance}),
        }));
    }
    Ok(Outcome::Passed)
}

/// Min-functional report on a grid of at least three points.
pub fn counterexample_report(grid: &Arc<DirectionGrid>, trials: usize, seed: u64) -> anyhow::Result<Value> {
    let n = grid.len();
    if n < 3 {
        bail!("the counterexample needs a grid of at least 3 points");
    }
    let m = min_functional(grid);
    // f vanishes only at t₀ and g only at t₁, so f∨g is positive everywhere.
    let mut f = vec![1.0; n];
    let mut g = vec![1.0; n];
    f[0] = 0.0;
    g[1] = 0.0;
    let f = RadialFunction::new(grid, f)?;
    let g = RadialFunction::new(grid, g)?;
    let identity = check_valuation_identity(&m, &f, &g)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut additive_max: f64 = 0.0;
    for _ in 0..trials {
        let (f1, f2) = orthogonal_pair(&mut rng, grid)?;
        let zero = RadialFunction::zero(grid);
        additive_max = additive_max.max(check_additive(&m, &f1, &f2, &zero)?);
    }
    Ok(json!({
        "functional": "min",
        "points": n,
        "canonical_pair": {"f": f.values(), "g": g.values()},
        "identity_residual": identity,
        "additive_trials": trials,
        "additive_max_residual": additive_max,
    }))
}

/// Disjointly supported pair whose supports leave at least one direction uncovered.
pub fn orthogonal_pair(
    rng: &mut impl Rng,
    grid: &Arc<DirectionGrid>,
) -> crate::Result<(RadialFunction, RadialFunction)> {
    let n = grid.len();
    let hole = rng.gen_range(0..n);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in (0..n).filter(|i| *i != hole) {
        match rng.gen_range(0..3) {
            0 => a[i] = rng.gen::<f64>() * 2.0,
            1 => b[i] = rng.gen::<f64>() * 2.0,
            _ => {}
        }
    }
    Ok((RadialFunction::new(grid, a)?, RadialFunction::new(grid, b)?))
}

fn cmd_counterexample(ctx: &RunContext) -> anyhow::Result<Outcome> {
    let grid = if ctx.config.grid.points >= 3 { ctx.grid()? } else { GridSpec { dimension: 2, points: 8 }.build()? };
    let seed = ctx.seed.unwrap_or(0);
    let report = counterexample_report(&grid, ctx.config.trials.max(500), seed)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    ctx.emit("counterexample.json", text.as_bytes())?;
    let identity = report["identity_residual"].as_f64().unwrap_or(f64::NAN);
    let additive = report["additive_max_residual"].as_f64().unwrap_or(f64::NAN);
    if identity != 1.0 || !(additive <= 1e-12) {
        return Ok(Outcome::Failed(CheckFailure {
            invariant: "min functional: orthogonally additive, identity residual exactly 1".into(),
            details: report,
        }));
    }
    Ok(Outcome::Passed)
}

/// Per-scenario seed derived from the master seed and the scenario index.
pub fn scenario_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct ScenarioResult {
    row: Vec<String>,
    failure: Option<Value>,
}

const SWEEP_HEADER: [&str; 10] = [
    "scenario",
    "kernel",
    "dimension",
    "points",
    "lipschitz",
    "identity_max",
    "decomposition_max",
    "agreement_max_ratio",
    "roundtrip_max",
    "status",
];

fn run_scenario(
    spec: &ScenarioSpec,
    index: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> anyhow::Result<ScenarioResult> {
    let grid = spec.grid.build()?;
    let levels = spec.levels.resolve()?;
    let v = ValuationSpec::Builtin { builtin: spec.builtin.clone(), levels: LevelSpec::List(levels.clone()) }
        .build(&grid)?;
    let (centered, _) = crate::valuation::center(&v)?;
    let kernel = v.kernel().expect("builtin valuations carry kernels").clone();
    let tolerance = config.tolerance.unwrap_or(1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = kernel.max_level();
    let trials = config.trials;

    let mut identity: f64 = 0.0;
    let mut suite = Vec::with_capacity(trials);
    for _ in 0..trials {
        let f = random_function(&mut rng, &grid, top)?;
        let g = random_function(&mut rng, &grid, top)?;
        identity = identity.max(check_valuation_identity(v.as_ref(), &f, &g)?);
        suite.push(f);
    }
    let decomposition = decompose(&centered, &suite)?.residual_report;

    let deltas = if config.deltas.is_empty() { vec![0.125, 1.0 / 64.0, 1.0 / 1024.0] } else { config.deltas.clone() };
    let lipschitz = kernel.lipschitz();
    let ext = Extension::new(&v)?;
    let mut ratio: f64 = 0.0;
    let reach = top - deltas.iter().copied().fold(0.0, f64::max);
    for _ in 0..trials.min(50) {
        let f = random_function(&mut rng, &grid, reach.max(0.0))?;
        let exact = v.evaluate(&f)?;
        for d in &deltas {
            let r = (ext.extend_simple(&quantize(&f, *d)?)? - exact).abs();
            let bound = lipschitz * d;
            ratio = ratio.max(if bound > 0.0 {
                r / bound
            } else if r > 0.0 {
                f64::INFINITY
            } else {
                0.0
            });
        }
    }
    let extracted = crate::kernel_extract::extract_kernel(&v, &levels)?;
    let roundtrip = roundtrip_error(&v, &extracted, trials.min(200), seed ^ 1)?;

    let mut violations = Vec::new();
    if identity > tolerance {
        violations.push("valuation identity");
    }
    if decomposition > tolerance {
        violations.push("Jordan decomposition residual");
    }
    if ratio > 1.0 + 1e-9 {
        violations.push("extension agreement bound L·δ");
    }
    if roundtrip > tolerance {
        violations.push("representation round-trip");
    }
    let status = if violations.is_empty() { "ok" } else { "fail" };
    let row = vec![
        index.to_string(),
        spec.builtin.clone(),
        spec.grid.dimension.to_string(),
        spec.grid.points.to_string(),
        fmt_f64(lipschitz),
        fmt_f64(identity),
        fmt_f64(decomposition),
        fmt_f64(ratio),
        fmt_f64(roundtrip),
        status.into(),
    ];
    let failure = (!violations.is_empty()).then(|| {
        json!({
            "scenario": index, "kernel": spec.builtin, "grid": spec.grid, "seed": seed,
            "violated": violations, "identity_max": identity, "decomposition_max": decomposition,
            "agreement_max_ratio": ratio, "roundtrip_max": roundtrip, "tolerance": tolerance,
        })
    });
    Ok(ScenarioResult { row, failure })
}

fn default_scenarios() -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for points in [8, 32] {
        for (name, _, _) in builtin_families() {
            out.push(ScenarioSpec {
                builtin: name.to_string(),
                grid: GridSpec { dimension: 2, points },
                levels: default_levels(),
            });
        }
    }
    out
}

fn cmd_sweep(ctx: &RunContext, jobs: Option<usize>) -> anyhow::Result<Outcome> {
    let master = ctx.seed()?;
    let scenarios = if ctx.config.scenarios.is_empty() { default_scenarios() } else { ctx.config.scenarios.clone() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let results: Vec<anyhow::Result<ScenarioResult>> = pool.install(|| {
        scenarios
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                let result = run_scenario(spec, i, &ctx.config, scenario_seed(master, i))
                    .with_context(|| format!("scenario {i} ({})", spec.builtin))?;
                if let Some(dir) = &ctx.out {
                    let bytes = csv_bytes(&SWEEP_HEADER, std::slice::from_ref(&result.row))?;
                    write_atomic(&dir.join("scenarios"), &format!("scenario_{i:03}.csv"), &bytes)?;
                }
                Ok(result)
            })
            .collect()
    });
    let results = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = results.iter().map(|r| r.row.clone()).collect();
    ctx.emit("sweep.csv", &csv_bytes(&SWEEP_HEADER, &rows)?)?;
    let failures: Vec<Value> = results.into_iter().filter_map(|r| r.failure).collect();
    if !failures.is_empty() {
        return Ok(Outcome::Failed(CheckFailure {
            invariant: "sweep scenario checks".into(),
            details: json!({"failed_scenarios": failures}),
        }));
    }
    Ok(Outcome::Passed)
}

fn report_failure(out: Option<&Path>, value: &Value) {
    let text = serde_json::to_string(value).unwrap_or_else(|_| "{}".into());
    eprintln!("{text}");
    if let Some(dir) = out {
        let _ = write_atomic(dir, "failure.json", (text + "\n").as_bytes());
    }
}

/// Runs one invocation and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => {
                    eprintln!("{}", json!({"status": "usage_error", "message": e.kind().to_string()}));
                    1
                }
            };
        }
    };
    let (common, result) = dispatch(&cli.command);
    match result {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::Failed(failure)) => {
            report_failure(
                common.out.as_deref(),
                &json!({"status": "check_failed", "invariant": failure.invariant, "details": failure.details}),
            );
            2
        }
        Err(e) => {
            report_failure(common.out.as_deref(), &json!({"status": "error", "message": format!("{e:#}")}));
            1
        }
    }
}

fn dispatch(command: &Command) -> (&CommonArgs, anyhow::Result<Outcome>) {
    match command {
        Command::Verify(c) => (c, RunContext::new(c, true).and_then(|ctx| cmd_verify(&ctx))),
        Command::Decompose(c) => (c, RunContext::new(c, true).and_then(|ctx| cmd_decompose(&ctx))),
        Command::Measures { common, lambda, set } => {
            (common, RunContext::new(common, true).and_then(|ctx| cmd_measures(&ctx, *lambda, set)))
        }
        Command::Extend { common, input, tol } => {
            (common, RunContext::new(common, true).and_then(|ctx| cmd_extend(&ctx, input, *tol)))
        }
        Command::ExtractKernel { common, levels, budget } => (
            common,
            RunContext::new(common, true).and_then(|ctx| {
                let ctx = RunContext { out: None, ..ctx };
                cmd_extract(&ctx, common.out.as_deref(), levels.as_deref(), *budget)
            }),
        ),
        Command::Counterexample(c) => (c, RunContext::new(c, false).and_then(|ctx| cmd_counterexample(&ctx))),
        Command::Sweep(c) => (c, RunContext::new(c, true).and_then(|ctx| cmd_sweep(&ctx, c.jobs))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_specs() {
        assert_eq!(LevelSpec::Range("0:0.5:2".into()).resolve().unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(LevelSpec::Range("0:0.1:2".into()).resolve().unwrap().len(), 21);
        assert!(LevelSpec::Range("0:0.5".into()).resolve().is_err());
        assert!(LevelSpec::Range("a:b:c".into()).resolve().is_err());
    }

    #[test]
    fn config_parsing() {
        let c = ExperimentConfig::parse(
            r#"{"grid":{"dimension":3,"points":12},"valuation":{"family":"bump","scale":2.0,"levels":"0:0.25:1"},"seed":4}"#,
        )
        .unwrap();
        let grid = c.grid.build().unwrap();
        let v = c.valuation.as_ref().unwrap().build(&grid).unwrap();
        assert_eq!(v.kernel().unwrap().levels().len(), 5);

        let c = ExperimentConfig::parse(r#"{"valuation":{"builtin":"square"}}"#).unwrap();
        let v = c.valuation.unwrap().build(&c.grid.build().unwrap()).unwrap();
        assert_eq!(v.kernel().unwrap().levels().len(), 21);

        assert!(ExperimentConfig::parse(r#"{"tolerance": 0}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"valuation":{"kernel_path":"/nonexistent/k.json"}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"unknown": 1}"#).is_err());
        let bad = ExperimentConfig::parse(r#"{"valuation":{"builtin":"nope"}}"#).unwrap();
        assert!(bad.valuation.unwrap().build(&bad.grid.build().unwrap()).is_err());
    }

    #[test]
    fn scenario_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|i| scenario_seed(7, i)).collect();
        assert_eq!(seeds.len(), 100);
        assert_eq!(scenario_seed(7, 3), scenario_seed(7, 3));
    }

    #[test]
    fn counterexample_numbers() {
        let grid = GridSpec { dimension: 2, points: 8 }.build().unwrap();
        let report = counterexample_report(&grid, 500, 1).unwrap();
        assert_eq!(report["identity_residual"], 1.0);
        assert_eq!(report["additive_max_residual"], 0.0);
    }

    #[test]
    fn unknown_command_is_usage_error() {
        assert_eq!(run(["starval", "frobnicate"]), 1);
        assert_eq!(run(["starval", "verify"]), 1);
    }
}
