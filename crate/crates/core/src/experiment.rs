//! JSON-specified experiments and report emission.
//!
//! A spec file holds a list of experiments, each tagged by `type`:
//!
//! ```json
//! {"experiments": [
//!   {"type": "breuer_major", "model": "white_noise", "f": {"kind": "hermite", "coeffs": [0, 0, 1]},
//!    "n_grid": [128, 256, 512, 1024], "n_mc": 2000, "replicates": 100000, "seed": 1},
//!   {"type": "wigner", "n": 30, "p": 3, "samples": 100000, "n_mc": 2000, "mode": "bounds"}
//! ]}
//! ```
//!
//! Every experiment writes `<name>.json` and, where rows exist, `<name>.csv`
//! into the output directory. Floats in CSV files carry 17 significant digits.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::distance::{DistanceReport, EmpiricalSample, DEFAULT_BOOTSTRAP};
use crate::error::{invalid, Error, Result};
use crate::function::{FunctionSpec, SeparableFunctional, SubordinatingFunction};
use crate::linalg::{cholesky_factor, CovarianceFactor};
use crate::poincare::{finite_dim_bound, BoundOptions, BoundReport, MetricKind};
use crate::rate::{rate_fit, RateFit};
use crate::rng::SeedSpec;
use crate::sheet::{sheet_bound_rate, SheetConfig, SheetRateReport};
use crate::stationary::{
    breuer_major_replicates, finite_n_variance, stationary_bound_mc, ModelKind, StationaryModelSpec,
    DEFAULT_STEP,
};
use crate::wigner::{estimate_a1_a2, trace_samples, wigner_closed_bound, Regime, WignerConfig};

/// Float with 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Parses `hermite:0,0,1`, `poly:-1,0,1`, `h2` or a named callback such as `sin`.
pub fn parse_function(s: &str) -> Result<FunctionSpec> {
    let coeffs = |rest: &str| -> Result<Vec<f64>> {
        rest.split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| invalid(format!("bad coefficient `{c}`"))))
            .collect()
    };
    if let Some(rest) = s.strip_prefix("hermite:") {
        return Ok(FunctionSpec {
            kind: "hermite".into(),
            coeffs: coeffs(rest)?,
        });
    }
    if let Some(rest) = s.strip_prefix("poly:") {
        return Ok(FunctionSpec::polynomial(&coeffs(rest)?));
    }
    if let Some(q) = s.strip_prefix('h').and_then(|q| q.parse::<usize>().ok()) {
        return Ok(FunctionSpec::hermite(q));
    }
    Ok(FunctionSpec {
        kind: s.into(),
        coeffs: vec![],
    })
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct Expectations {
    /// Accepted range for the fitted log-log slope.
    pub slope: Option<[f64; 2]>,
    /// Require `dkol ≤ bound + 4·SE` on every row that has a bound.
    #[serde(default)]
    pub dominance: bool,
    /// Require the MC variance within this many SE of the closed form.
    pub variance_within_se: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Normal law with the sample's own mean and variance.
    #[default]
    Sample,
    /// `N(0, Var F_n)` with the exact finite-`n` variance.
    Exact,
}

fn default_metric() -> MetricKind {
    MetricKind::TotalVariation
}
fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}
fn default_bound_max_n() -> usize {
    256
}
fn default_replicates() -> usize {
    100_000
}

#[derive(Clone, Debug, Deserialize)]
pub struct BreuerMajorSpec {
    pub name: Option<String>,
    #[serde(flatten)]
    pub model: ModelKind,
    pub step: Option<f64>,
    pub f: FunctionSpec,
    pub n_grid: Vec<usize>,
    /// Monte Carlo samples for the bound.
    pub n_mc: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub target: Target,
    /// Bounds are evaluated only for `n` up to this size.
    #[serde(default = "default_bound_max_n")]
    pub bound_max_n: usize,
    #[serde(default)]
    pub expect: Expectations,
}

impl BreuerMajorSpec {
    pub fn model_spec(&self) -> StationaryModelSpec {
        let step = self.step.unwrap_or(match self.model {
            ModelKind::WhiteNoise | ModelKind::FbmIncrements { .. } => 1.0,
            _ => DEFAULT_STEP,
        });
        StationaryModelSpec {
            kind: self.model,
            step,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct FiniteDimSpec {
    pub name: Option<String>,
    pub d: usize,
    pub f: FunctionSpec,
    /// Multiplies the separable sum `Σ f(x_k)`.
    #[serde(default = "one")]
    pub scale: f64,
    /// Covariance matrix; identity when absent.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub n_mc: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub write_arrays: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
pub struct SheetSpec {
    pub name: Option<String>,
    #[serde(default = "one_usize")]
    pub n_dim: usize,
    pub log_lengths: Vec<f64>,
    pub f: FunctionSpec,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    pub nodes_per_axis: Option<usize>,
    #[serde(default)]
    pub expect: Expectations,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WignerMode {
    Variance,
    Bounds,
    #[default]
    Clt,
    Rates,
}

#[derive(Clone, Debug, Deserialize)]
pub struct WignerSpec {
    pub name: Option<String>,
    pub n: usize,
    pub p: usize,
    /// Trace samples for the variance and distance.
    pub samples: usize,
    /// Samples for the moment arrays in `bounds` mode.
    #[serde(default = "default_wigner_mc")]
    pub n_mc: usize,
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: WignerMode,
    pub subsample: Option<usize>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Matrix sizes for `rates` mode; defaults to `n/8, n/4, n/2, n`.
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub expect: Expectations,
}

fn default_wigner_mc() -> usize {
    2000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExperimentSpec {
    BreuerMajor(BreuerMajorSpec),
    FiniteDim(FiniteDimSpec),
    Sheet(SheetSpec),
    Wigner(WignerSpec),
}

impl ExperimentSpec {
    fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::BreuerMajor(_) => "breuer_major",
            ExperimentSpec::FiniteDim(_) => "finite_dim",
            ExperimentSpec::Sheet(_) => "sheet",
            ExperimentSpec::Wigner(_) => "wigner",
        }
    }

    fn name(&self) -> Option<&str> {
        match self {
            ExperimentSpec::BreuerMajor(s) => s.name.as_deref(),
            ExperimentSpec::FiniteDim(s) => s.name.as_deref(),
            ExperimentSpec::Sheet(s) => s.name.as_deref(),
            ExperimentSpec::Wigner(s) => s.name.as_deref(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct SpecFile {
    pub experiments: Vec<ExperimentSpec>,
}

/// Parses a spec, reporting the path of the first offending field.
///
/// Each experiment is decoded by its `type` tag separately, since an
/// internally tagged enum loses the field path of its variants.
pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let raw: Value = serde_json::from_str(text).map_err(|e| spec_error("", e.to_string()))?;
    let list = raw
        .get("experiments")
        .and_then(Value::as_array)
        .ok_or_else(|| spec_error("experiments", "missing or not a list"))?;
    if list.is_empty() {
        return Err(spec_error("experiments", "no experiments listed"));
    }
    let mut experiments = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let at = format!("experiments[{i}]");
        let mut body = item.clone();
        let tag = body
            .as_object_mut()
            .ok_or_else(|| spec_error(&at, "expected an object"))?
            .remove("type");
        let tag = tag
            .as_ref()
            .and_then(Value::as_str)
            .ok_or_else(|| spec_error(&format!("{at}.type"), "missing experiment type"))?;
        experiments.push(match tag {
            "breuer_major" => ExperimentSpec::BreuerMajor(typed(body, &at)?),
            "finite_dim" => ExperimentSpec::FiniteDim(typed(body, &at)?),
            "sheet" => ExperimentSpec::Sheet(typed(body, &at)?),
            "wigner" => ExperimentSpec::Wigner(typed(body, &at)?),
            other => return Err(spec_error(&format!("{at}.type"), format!("unknown experiment type `{other}`"))),
        });
    }
    Ok(SpecFile { experiments })
}

fn spec_error(path: &str, message: impl Into<String>) -> Error {
    Error::SpecInvalid {
        path: path.into(),
        message: message.into(),
    }
}

fn typed<T: serde::de::DeserializeOwned>(body: Value, at: &str) -> Result<T> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { at.to_owned() } else { format!("{at}.{inner}") };
        spec_error(&path, e.inner().to_string())
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `0` when every check passed, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

/// Runs every experiment of the spec file in order. `seed` replaces the seed of
/// experiments that do not set one.
pub fn run_experiment(spec_file: &Path, out_dir: &Path, seed: u64) -> Result<RunSummary> {
    let spec = parse_spec(&std::fs::read_to_string(spec_file)?)?;
    run_spec(&spec, out_dir, seed)
}

pub fn run_spec(spec: &SpecFile, out_dir: &Path, seed: u64) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut summary = RunSummary::default();
    for (i, exp) in spec.experiments.iter().enumerate() {
        let name = exp.name().map(str::to_owned).unwrap_or_else(|| format!("{i:02}_{}", exp.kind()));
        let (json, csv, checks) = match exp {
            ExperimentSpec::BreuerMajor(s) => {
                let r = breuer_major_experiment(s, seed)?;
                let checks = r.checks(&s.expect);
                (serde_json::to_value(&r)?, Some(r.csv()), checks)
            }
            ExperimentSpec::FiniteDim(s) => {
                let r = finite_dim_experiment(s, seed)?;
                if s.write_arrays {
                    let path = out_dir.join(format!("{name}_arrays.csv"));
                    r.write_arrays_csv(&path)?;
                    summary.files.push(path);
                }
                (r.to_json(), None, vec![])
            }
            ExperimentSpec::Sheet(s) => {
                let r = sheet_experiment(s, seed)?;
                let checks = sheet_checks(&r, &s.expect);
                (serde_json::to_value(&r)?, Some(sheet_csv(&r)), checks)
            }
            ExperimentSpec::Wigner(s) => {
                let r = wigner_experiment(s, seed)?;
                let checks = r.checks(&s.expect);
                let csv = r.rows.as_ref().map(|_| r.csv());
                (serde_json::to_value(&r)?, csv, checks)
            }
        };
        let path = out_dir.join(format!("{name}.json"));
        write_json(&path, &json)?;
        summary.files.push(path);
        if let Some(csv) = csv {
            let path = out_dir.join(format!("{name}.csv"));
            std::fs::write(&path, csv)?;
            summary.files.push(path);
        }
        summary.checks.extend(checks.into_iter().map(|mut c| {
            c.name = format!("{name}: {}", c.name);
            c
        }));
    }
    Ok(summary)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn slope_check(fit: &RateFit, range: Option<[f64; 2]>) -> Option<Check> {
    range.map(|[lo, hi]| {
        Check::new(
            "slope",
            (lo..=hi).contains(&fit.slope),
            format!("slope {:.4} in [{lo}, {hi}], r2 {:.4}", fit.slope, fit.r2),
        )
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BreuerMajorRow {
    pub n: usize,
    pub bound: Option<f64>,
    pub bound_se: Option<f64>,
    pub dkol: f64,
    pub se: f64,
    pub dw: f64,
    pub se_dw: f64,
    pub sigma2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BreuerMajorReport {
    pub model: String,
    pub metric: MetricKind,
    pub seed: u64,
    pub replicates: usize,
    pub target: Target,
    pub rows: Vec<BreuerMajorRow>,
    /// Log-log fit of `dkol` against `n`; needs four grid points.
    pub fit: Option<RateFit>,
}

impl BreuerMajorReport {
    /// Columns `n,bound,bound_se,dkol,se,dw,se_dw,sigma2`.
    pub fn csv(&self) -> String {
        let mut s = String::from("n,bound,bound_se,dkol,se,dw,se_dw,sigma2\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                r.n,
                fmt_opt(r.bound),
                fmt_opt(r.bound_se),
                fmt_f64(r.dkol),
                fmt_f64(r.se),
                fmt_f64(r.dw),
                fmt_f64(r.se_dw),
                fmt_f64(r.sigma2)
            );
        }
        s
    }

    pub fn checks(&self, expect: &Expectations) -> Vec<Check> {
        let mut out: Vec<Check> = match (&self.fit, expect.slope) {
            (Some(fit), range) => slope_check(fit, range).into_iter().collect(),
            (None, Some(_)) => vec![Check::new("slope", false, "fewer than four grid points")],
            (None, None) => vec![],
        };
        if expect.dominance {
            for r in &self.rows {
                if let (Some(b), Some(bse)) = (r.bound, r.bound_se) {
                    let se = combined_se(bse, r.se);
                    out.push(Check::new(
                        format!("dominance n={}", r.n),
                        r.dkol <= b + 4.0 * se,
                        format!("dkol {:.5} vs bound {:.5} + 4*{:.2e}", r.dkol, b, se),
                    ));
                }
            }
        }
        out
    }
}

/// Empirical `d_Kol` of `F_n` along `n_grid`, bounds for small `n`, and the
/// log-log slope of `d_Kol` against `n`.
pub fn breuer_major_experiment(spec: &BreuerMajorSpec, default_seed: u64) -> Result<BreuerMajorReport> {
    let model = spec.model_spec();
    model.validate()?;
    let f = spec.f.build()?;
    let seed = spec.seed.unwrap_or(default_seed);
    let base = SeedSpec::new(seed, 0);
    let mut rows = Vec::with_capacity(spec.n_grid.len());
    for (i, &n) in spec.n_grid.iter().enumerate() {
        let row_seed = base.derive(i as u64);
        let (bound, bound_se) = if n <= spec.bound_max_n {
            let opts = BoundOptions::new(spec.n_mc, row_seed.derive(1).master_seed);
            let r = stationary_bound_mc(&model, &f, n, spec.metric, &opts)?;
            (Some(r.bound), Some(r.se))
        } else {
            (None, None)
        };
        let x = breuer_major_replicates(&model, &f, n, spec.replicates, row_seed.derive(2).master_seed)?;
        let sample = EmpiricalSample::new(x, row_seed.master_seed)?;
        let d = distance_for(&sample, spec.target, &model, &f, n, spec.bootstrap, row_seed.derive(3))?;
        rows.push(BreuerMajorRow {
            n,
            bound,
            bound_se,
            dkol: d.dkol,
            se: d.se_dkol,
            dw: d.dw,
            se_dw: d.se_dw,
            sigma2: d.sigma2,
        });
    }
    let fit = if rows.len() >= 4 {
        Some(rate_fit(&rows.iter().map(|r| (r.n as f64, r.dkol)).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(BreuerMajorReport {
        model: model.name().into(),
        metric: spec.metric,
        seed,
        replicates: spec.replicates,
        target: spec.target,
        rows,
        fit,
    })
}

fn distance_for(
    sample: &EmpiricalSample,
    target: Target,
    model: &StationaryModelSpec,
    f: &SubordinatingFunction,
    n: usize,
    bootstrap: usize,
    seed: SeedSpec,
) -> Result<DistanceReport> {
    match target {
        Target::Sample => DistanceReport::standardized(sample, bootstrap, seed),
        Target::Exact => {
            let var = finite_n_variance(model, f, n, 24)?;
            DistanceReport::estimate(sample, 0.0, var, bootstrap, seed)
        }
    }
}

pub fn finite_dim_experiment(spec: &FiniteDimSpec, default_seed: u64) -> Result<BoundReport> {
    let f = spec.f.build()?;
    let factor = match &spec.covariance {
        None => CovarianceFactor::identity(spec.d),
        Some(rows) => {
            if rows.len() != spec.d || rows.iter().any(|r| r.len() != spec.d) {
                return Err(Error::SpecInvalid {
                    path: "covariance".into(),
                    message: format!("expected a {0}x{0} matrix", spec.d),
                });
            }
            let m = nalgebra::DMatrix::from_fn(spec.d, spec.d, |i, j| rows[i][j]);
            cholesky_factor(&m)?
        }
    };
    let functional = SeparableFunctional::new(f, spec.d, spec.scale);
    let mut opts = BoundOptions::new(spec.n_mc, spec.seed.unwrap_or(default_seed));
    opts.sigma2 = spec.sigma2;
    finite_dim_bound(&factor, &functional, spec.metric, &opts)
}

pub fn sheet_experiment(spec: &SheetSpec, default_seed: u64) -> Result<SheetRateReport> {
    let f = spec.f.build()?;
    let configs: Vec<SheetConfig> = spec
        .log_lengths
        .iter()
        .map(|&l| {
            let c = SheetConfig::from_log_length(spec.n_dim, l, f.clone());
            match spec.nodes_per_axis {
                Some(m) => c.with_nodes(m),
                None => c,
            }
        })
        .collect();
    sheet_bound_rate(&configs, spec.replicates, spec.seed.unwrap_or(default_seed), spec.bootstrap)
}

/// Columns `epsilon,L,var_closed_form,var_mc,se,dkol,se_dkol`.
pub fn sheet_csv(r: &SheetRateReport) -> String {
    let mut s = String::from("epsilon,L,var_closed_form,var_mc,se,dkol,se_dkol\n");
    for row in &r.rows {
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(row.epsilon),
            fmt_f64(row.log_length),
            fmt_f64(row.var_closed_form),
            fmt_f64(row.var_mc),
            fmt_f64(row.se),
            fmt_f64(row.dkol),
            fmt_f64(row.se_dkol)
        );
    }
    s
}

fn sheet_checks(r: &SheetRateReport, expect: &Expectations) -> Vec<Check> {
    let mut out: Vec<Check> = slope_check(&r.fit, expect.slope).into_iter().collect();
    if let Some(k) = expect.variance_within_se {
        for row in &r.rows {
            let z = (row.var_mc - row.var_closed_form).abs() / row.se;
            out.push(Check::new(
                format!("variance L={}", row.log_length),
                z <= k,
                format!("|var_mc - closed| = {z:.2} SE"),
            ));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct WignerRateRow {
    pub n: usize,
    pub var_trace: f64,
    pub se: f64,
    pub dkol: f64,
    pub se_dkol: f64,
}

/// Report of the `wigner` subcommand. Fields not computed in the chosen mode
/// are `null`.
#[derive(Clone, Debug, Serialize)]
pub struct WignerReport {
    pub n: usize,
    pub p: usize,
    pub mode: WignerMode,
    pub seed: u64,
    pub samples: usize,
    pub var_trace: Option<f64>,
    pub se: Option<f64>,
    pub bound_mc: Option<f64>,
    pub bound_mc_se: Option<f64>,
    pub bound_closed: f64,
    pub regime: Regime,
    pub dkol: Option<f64>,
    pub se_dkol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<WignerRateRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
}

impl WignerReport {
    /// Columns `n,var_trace,se,dkol,se_dkol` of `rates` mode.
    pub fn csv(&self) -> String {
        let mut s = String::from("n,var_trace,se,dkol,se_dkol\n");
        for r in self.rows.iter().flatten() {
            s += &format!(
                "{},{},{},{},{}\n",
                r.n,
                fmt_f64(r.var_trace),
                fmt_f64(r.se),
                fmt_f64(r.dkol),
                fmt_f64(r.se_dkol)
            );
        }
        s
    }

    pub fn checks(&self, expect: &Expectations) -> Vec<Check> {
        let mut out: Vec<Check> = self.fit.as_ref().and_then(|f| slope_check(f, expect.slope)).into_iter().collect();
        if expect.dominance {
            if let (Some(b), Some(d)) = (self.bound_mc, self.dkol) {
                let se = combined_se(self.bound_mc_se.unwrap_or(0.0), self.se_dkol.unwrap_or(0.0));
                out.push(Check::new(
                    "dominance",
                    d <= b + 4.0 * se,
                    format!("dkol {d:.5} vs bound {b:.5} + 4*{se:.2e}"),
                ));
            }
        }
        out
    }
}

fn wigner_clt(n: usize, p: usize, samples: usize, bootstrap: usize, seed: SeedSpec) -> Result<WignerRateRow> {
    let t = trace_samples(n, p, samples, seed.master_seed)?;
    let sample = EmpiricalSample::new(t.values, seed.master_seed)?;
    let d = DistanceReport::standardized(&sample, bootstrap, seed.derive(1))?;
    Ok(WignerRateRow {
        n,
        var_trace: t.var,
        se: t.var_se,
        dkol: d.dkol,
        se_dkol: d.se_dkol,
    })
}

pub fn wigner_experiment(spec: &WignerSpec, default_seed: u64) -> Result<WignerReport> {
    if spec.n == 0 || spec.p == 0 {
        return Err(invalid("n and p must be at least 1"));
    }
    let seed = spec.seed.unwrap_or(default_seed);
    let base = SeedSpec::new(seed, 0);
    let closed = wigner_closed_bound(spec.n as f64, spec.p as f64);
    let mut report = WignerReport {
        n: spec.n,
        p: spec.p,
        mode: spec.mode,
        seed,
        samples: spec.samples,
        var_trace: None,
        se: None,
        bound_mc: None,
        bound_mc_se: None,
        bound_closed: closed.d_tv_bound,
        regime: closed.regime,
        dkol: None,
        se_dkol: None,
        rows: None,
        fit: None,
    };
    match spec.mode {
        WignerMode::Variance => {
            let t = trace_samples(spec.n, spec.p, spec.samples, seed)?;
            report.var_trace = Some(t.var);
            report.se = Some(t.var_se);
        }
        WignerMode::Clt => {
            let row = wigner_clt(spec.n, spec.p, spec.samples, spec.bootstrap, base)?;
            report.var_trace = Some(row.var_trace);
            report.se = Some(row.se);
            report.dkol = Some(row.dkol);
            report.se_dkol = Some(row.se_dkol);
        }
        WignerMode::Bounds => {
            let mut cfg = WignerConfig::new(spec.n, spec.p, spec.n_mc, base.derive(1).master_seed);
            cfg.subsample = spec.subsample;
            let est = estimate_a1_a2(&cfg)?;
            report.bound_mc = Some(est.bound_mc);
            report.bound_mc_se = Some(est.bound_mc_se);
            let row = wigner_clt(spec.n, spec.p, spec.samples, spec.bootstrap, base)?;
            report.var_trace = Some(row.var_trace);
            report.se = Some(row.se);
            report.dkol = Some(row.dkol);
            report.se_dkol = Some(row.se_dkol);
        }
        WignerMode::Rates => {
            let grid = spec
                .n_grid
                .clone()
                .unwrap_or_else(|| [8, 4, 2, 1].iter().map(|d| (spec.n / d).max(1)).collect());
            let rows = grid
                .iter()
                .enumerate()
                .map(|(i, &n)| wigner_clt(n, spec.p, spec.samples, spec.bootstrap, base.derive(10 + i as u64)))
                .collect::<Result<Vec<_>>>()?;
            report.fit = Some(rate_fit(&rows.iter().map(|r| (r.n as f64, r.dkol)).collect::<Vec<_>>())?);
            if let Some(last) = rows.last() {
                report.var_trace = Some(last.var_trace);
                report.se = Some(last.se);
                report.dkol = Some(last.dkol);
                report.se_dkol = Some(last.se_dkol);
            }
            report.rows = Some(rows);
        }
    }
    Ok(report)
}
