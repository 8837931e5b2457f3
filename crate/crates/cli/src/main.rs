use std::path::PathBuf;
use std::process::ExitCode;

use adcalc::error::Error;
use adcalc::io::fmt17;
use adcalc::scenario::{init_threads, run_scenario, ScenarioConfig, ScenarioKind};
use clap::{Args, Parser, Subcommand};

/// Run adiabatic-calculus scenarios and write their reports.
#[derive(Parser)]
#[command(name = "adcalc", version)]
struct Cli {
    #[command(subcommand)]
    kind: Kind,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Kind {
    /// Classify a family as S_c, J0 or J
    Classify,
    /// Compare the quantized family with the reference operator on probes
    QuantizeCompare,
    /// Order-0 symbol to family and back
    SymbolRoundtrip,
    /// Module inner-product axioms
    InnerProduct,
    /// Gauge invariance and composition
    GaugeCheck,
    /// Crossed-product decay and the rank-one identity
    CrossedDecay,
    /// Witness and corner decomposition
    Corner,
    /// Convergence sweep over grid sizes
    Sweep,
}

impl Kind {
    fn scenario(self) -> ScenarioKind {
        match self {
            Kind::Classify => ScenarioKind::Classify,
            Kind::QuantizeCompare => ScenarioKind::QuantizeCompare,
            Kind::SymbolRoundtrip => ScenarioKind::SymbolRoundtrip,
            Kind::InnerProduct => ScenarioKind::InnerProduct,
            Kind::GaugeCheck => ScenarioKind::GaugeCheck,
            Kind::CrossedDecay => ScenarioKind::CrossedDecay,
            Kind::Corner => ScenarioKind::Corner,
            Kind::Sweep => ScenarioKind::Sweep,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML scenario file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// report directory (summary.json and CSV tables)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// spectral, nystrom, galerkin-keys or galerkin-box
    #[arg(long, global = true)]
    realization: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    t_nodes: Option<usize>,
    /// symbol order m
    #[arg(long, global = true)]
    m: Option<u32>,
    /// multiplies every upper-bound tolerance
    #[arg(long, global = true, allow_negative_numbers = true)]
    tolerance_scale: Option<f64>,
    #[arg(long, global = true, env = "ADCALC_THREADS")]
    threads: Option<usize>,
}

fn configure(kind: ScenarioKind, c: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::for_kind(kind),
    };
    match cfg.scenario {
        Some(k) if k != kind => {
            return Err(Error::Config { path: "scenario".into(), msg: format!("file describes `{k}`, command is `{kind}`") })
        }
        _ => cfg.scenario = Some(kind),
    }
    if c.grid_n.is_some() {
        cfg.grid.n = c.grid_n;
    }
    if c.realization.is_some() {
        cfg.grid.realization = c.realization.clone();
    }
    if c.t_min.is_some() {
        cfg.quadrature.t_min = c.t_min;
    }
    if c.t_max.is_some() {
        cfg.quadrature.t_max = c.t_max;
    }
    if c.t_nodes.is_some() {
        cfg.quadrature.n_nodes = c.t_nodes;
    }
    if let Some(m) = c.m {
        cfg.m = m;
    }
    if let Some(s) = c.tolerance_scale {
        cfg.tolerances.scale = s;
    }
    if c.out.is_some() {
        cfg.output.dir = c.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    if let Some(n) = cli.common.threads {
        init_threads(n)?;
    }
    let cfg = configure(cli.kind.scenario(), &cli.common)?;
    let report = run_scenario(&cfg)?;
    for c in &report.summary.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("{verdict}  {}  measured={}  tolerance={}", c.name, fmt17(c.measured), fmt17(c.tolerance));
    }
    println!("{}: {}", report.summary.scenario, if report.pass() { "pass" } else { "fail" });
    if let Some(dir) = &cfg.output.dir {
        let dir = if dir.is_relative() && cli.common.out.is_none() { cfg.base_dir.join(dir) } else { dir.clone() };
        report.write(&dir)?;
        println!("report written to {}", dir.display());
    }
    Ok(report.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
