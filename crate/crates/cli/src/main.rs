use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sopi::distance::{DistanceReport, EmpiricalSample};
use sopi::experiment::{
    self, breuer_major_experiment, fmt_f64, parse_function, sheet_csv, sheet_experiment, wigner_experiment,
    write_json, BreuerMajorSpec, Expectations, SheetSpec, Target, WignerMode, WignerSpec,
};
use sopi::poincare::{BoundOptions, MetricKind};
use sopi::rng::SeedSpec;
use sopi::stationary::{breuer_major_replicates, stationary_bound_mc, ModelKind};

#[derive(Parser)]
#[command(name = "sopi", version, about = "Second-order Poincaré bounds and Monte Carlo checks")]
struct Cli {
    /// Master seed for experiments that do not set their own.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound for a Breuer–Major statistic of a stationary model.
    Bound(BoundArgs),
    /// Simulate replicates of a Breuer–Major statistic and measure distances.
    Simulate(SimulateArgs),
    /// Wigner trace statistics.
    Wigner(WignerArgs),
    /// Brownian-sheet functionals over a range of log-lengths.
    Sheet(SheetArgs),
    /// Distance against n over a grid, with a log-log fit.
    Rates(RatesArgs),
    /// Run every experiment of a JSON spec file.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    WhiteNoise,
    BmIncrements,
    Ou,
    FbmIncrements,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "white-noise")]
    model: ModelName,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.25)]
    hurst: f64,
    /// Observation step; the model default when absent.
    #[arg(long)]
    step: Option<f64>,
    /// `h2`, `hermite:0,0,1`, `poly:-1,0,1` or a named function.
    #[arg(long, default_value = "h2")]
    f: String,
}

impl ModelArgs {
    fn kind(&self) -> ModelKind {
        match self.model {
            ModelName::WhiteNoise => ModelKind::WhiteNoise,
            ModelName::BmIncrements => ModelKind::BmIncrements,
            ModelName::Ou => ModelKind::Ou {
                theta: self.theta,
                sigma: self.sigma,
            },
            ModelName::FbmIncrements => ModelKind::FbmIncrements { hurst: self.hurst },
        }
    }

    fn spec(&self, n_grid: Vec<usize>, n_mc: usize, replicates: usize, seed: u64) -> Result<BreuerMajorSpec> {
        Ok(BreuerMajorSpec {
            name: None,
            model: self.kind(),
            step: self.step,
            f: parse_function(&self.f)?,
            n_grid,
            n_mc,
            replicates,
            seed: Some(seed),
            metric: MetricKind::TotalVariation,
            bootstrap: 200,
            target: Target::Sample,
            bound_max_n: usize::MAX,
            expect: Expectations::default(),
        })
    }
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value = "TV", value_parser = parse_metric)]
    metric: MetricKind,
    #[arg(long, default_value_t = 10_000)]
    n_mc: usize,
    /// Known variance of the statistic, replacing the Monte Carlo estimate.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Also write the T1/T2 arrays as CSV.
    #[arg(long)]
    arrays: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    replicates: usize,
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
}

#[derive(Args)]
struct WignerArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Samples for the moment arrays in `bounds` mode.
    #[arg(long, default_value_t = 2000)]
    n_mc: usize,
    #[arg(long, value_enum, default_value = "clt")]
    mode: Mode,
    /// Number of index tuples to sample instead of the dense arrays.
    #[arg(long)]
    subsample: Option<usize>,
    /// Report file name inside the output directory.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Variance,
    Bounds,
    Clt,
    Rates,
}

#[derive(Args)]
struct SheetArgs {
    #[arg(long, default_value_t = 1)]
    n_dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [4.0, 8.0, 16.0, 32.0])]
    log_lengths: Vec<f64>,
    #[arg(long, default_value = "poly:0,0,1")]
    f: String,
    #[arg(long, default_value_t = 100_000)]
    replicates: usize,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [128, 256, 512, 1024, 2048, 4096])]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    replicates: usize,
    #[arg(long, default_value_t = 2000)]
    n_mc: usize,
    /// Bounds are evaluated only up to this n.
    #[arg(long, default_value_t = 256)]
    bound_max_n: usize,
    #[arg(long, value_enum, default_value = "sample")]
    target: TargetArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Sample,
    Exact,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON experiment spec.
    #[arg(long)]
    spec: PathBuf,
}

fn parse_metric(s: &str) -> std::result::Result<MetricKind, String> {
    MetricKind::parse(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = cli.out_dir.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Bound(a) => bound(a, cli.seed, out),
        Command::Simulate(a) => simulate(a, cli.seed, out),
        Command::Wigner(a) => wigner(a, cli.seed, out),
        Command::Sheet(a) => sheet(a, cli.seed, out),
        Command::Rates(a) => rates(a, cli.seed, out),
        Command::Report(a) => {
            let summary = experiment::run_experiment(&a.spec, out, cli.seed)?;
            for c in &summary.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            Ok(summary.exit_code() as u8)
        }
    }
}

fn bound(a: BoundArgs, seed: u64, out: &Path) -> Result<u8> {
    let spec = a.model.spec(vec![a.n], a.n_mc, 0, seed)?;
    let model = spec.model_spec();
    let f = spec.f.build()?;
    let mut opts = BoundOptions::new(a.n_mc, seed);
    opts.sigma2 = a.sigma2;
    let report = stationary_bound_mc(&model, &f, a.n, a.metric, &opts)?;
    write_json(&out.join("bound.json"), &report.to_json())?;
    if a.arrays {
        report.write_arrays_csv(&out.join("bound_arrays.csv"))?;
    }
    println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    Ok(0)
}

fn simulate(a: SimulateArgs, seed: u64, out: &Path) -> Result<u8> {
    let spec = a.model.spec(vec![a.n], 0, a.replicates, seed)?;
    let model = spec.model_spec();
    let f = spec.f.build()?;
    let base = SeedSpec::new(seed, 0);
    let x = breuer_major_replicates(&model, &f, a.n, a.replicates, base.master_seed)?;
    let mut csv = String::from("value\n");
    for v in &x {
        csv += &fmt_f64(*v);
        csv.push('\n');
    }
    std::fs::write(out.join("simulate.csv"), csv)?;
    let sample = EmpiricalSample::new(x, seed)?;
    let d = DistanceReport::standardized(&sample, a.bootstrap, base.derive(1))?;
    write_json(&out.join("simulate.json"), &d)?;
    println!("{}", serde_json::to_string_pretty(&d)?);
    Ok(0)
}

fn wigner(a: WignerArgs, seed: u64, out: &Path) -> Result<u8> {
    let spec = WignerSpec {
        name: None,
        n: a.n,
        p: a.p,
        samples: a.samples,
        n_mc: a.n_mc,
        seed: Some(seed),
        mode: match a.mode {
            Mode::Variance => WignerMode::Variance,
            Mode::Bounds => WignerMode::Bounds,
            Mode::Clt => WignerMode::Clt,
            Mode::Rates => WignerMode::Rates,
        },
        subsample: a.subsample,
        bootstrap: 200,
        n_grid: None,
        expect: Expectations::default(),
    };
    let report = wigner_experiment(&spec, seed)?;
    write_json(&out.join(&a.out), &report)?;
    if report.rows.is_some() {
        std::fs::write(out.join(a.out.with_extension("csv")), report.csv())?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn sheet(a: SheetArgs, seed: u64, out: &Path) -> Result<u8> {
    let spec = SheetSpec {
        name: None,
        n_dim: a.n_dim,
        log_lengths: a.log_lengths,
        f: parse_function(&a.f)?,
        replicates: a.replicates,
        seed: Some(seed),
        bootstrap: 200,
        nodes_per_axis: a.nodes,
        expect: Expectations::default(),
    };
    let report = sheet_experiment(&spec, seed)?;
    write_json(&out.join("sheet.json"), &report)?;
    std::fs::write(out.join("sheet.csv"), sheet_csv(&report))?;
    print!("{}", sheet_csv(&report));
    println!("slope {:.4} (95% CI {:.4} .. {:.4})", report.fit.slope, report.fit.ci95_slope.0, report.fit.ci95_slope.1);
    Ok(0)
}

fn rates(a: RatesArgs, seed: u64, out: &Path) -> Result<u8> {
    let mut spec = a.model.spec(a.n_grid, a.n_mc, a.replicates, seed)?;
    spec.bound_max_n = a.bound_max_n;
    spec.target = match a.target {
        TargetArg::Sample => Target::Sample,
        TargetArg::Exact => Target::Exact,
    };
    let report = breuer_major_experiment(&spec, seed)?;
    write_json(&out.join("rates.json"), &report)?;
    std::fs::write(out.join("rates.csv"), report.csv())?;
    print!("{}", report.csv());
    if let Some(fit) = &report.fit {
        println!("slope {:.4} (95% CI {:.4} .. {:.4})", fit.slope, fit.ci95_slope.0, fit.ci95_slope.1);
    }
    Ok(0)
}
