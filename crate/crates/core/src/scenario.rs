//! Scenario files: parsing, validation and the runners behind the CLI.
//!
//! A scenario is a TOML document naming one kind of run plus the families,
//! grid and quadrature it needs. Every runner produces a [`Report`]: the
//! JSON summary of pass/fail checks and a handful of CSV tables.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::algebra::Discretization;
use crate::corpus::{j_corpus, Generator};
use crate::dnc::{GroupoidKind, GroupoidSpec};
use crate::error::{Error, Result};
use crate::family::{FamilyClass, KernelFamily};
use crate::grid::{GridSpec, QuadRule, QuadratureSpec};
use crate::io::{fmt17, load_family, write_csv, write_operator_csv, Check, Summary};
use crate::module::{
    corner_decompose, crossed_apply, crossed_element, full_witness, gauge, inner_product, node_shift, rank_one,
    CrossedConfig, ModuleElement, WitnessConfig,
};
use crate::numeric::line_fit;
use crate::operator::{l2, DiscreteOperator};
use crate::profile::{BumpProfile, Envelope, Normalization};
use crate::quantization::{
    default_psi, kn_proof_operator, kn_quantize, nodal_symbol, principal_symbol, quantize_family, recovered_symbol,
    symbol_to_family, ClassicalSymbol,
};
use crate::realize::{Basis, Realization};
use crate::schwartz::{classify, ClassifyConfig};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Classify,
    QuantizeCompare,
    SymbolRoundtrip,
    InnerProduct,
    GaugeCheck,
    CrossedDecay,
    Corner,
    Sweep,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Classify,
        ScenarioKind::QuantizeCompare,
        ScenarioKind::SymbolRoundtrip,
        ScenarioKind::InnerProduct,
        ScenarioKind::GaugeCheck,
        ScenarioKind::CrossedDecay,
        ScenarioKind::Corner,
        ScenarioKind::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Classify => "classify",
            ScenarioKind::QuantizeCompare => "quantize-compare",
            ScenarioKind::SymbolRoundtrip => "symbol-roundtrip",
            ScenarioKind::InnerProduct => "inner-product",
            ScenarioKind::GaugeCheck => "gauge-check",
            ScenarioKind::CrossedDecay => "crossed-decay",
            ScenarioKind::Corner => "corner",
            ScenarioKind::Sweep => "sweep",
        }
    }

    fn is_module(self) -> bool {
        matches!(self, ScenarioKind::InnerProduct | ScenarioKind::GaugeCheck | ScenarioKind::CrossedDecay | ScenarioKind::Corner)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config { path: "scenario".into(), msg: format!("unknown scenario kind `{s}`") })
    }
}

/// A family by corpus name, by generator recipe, or from an ADKF file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    Corpus { corpus: String },
    File {
        path: PathBuf,
        #[serde(default)]
        class: Option<FamilyClass>,
    },
    Recipe(Generator),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupoidConfig {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "one_usize")]
    pub fiber_dim: usize,
}

fn default_half_width() -> f64 {
    4.0 * PI
}

fn one_usize() -> usize {
    1
}

impl Default for GroupoidConfig {
    fn default() -> Self {
        GroupoidConfig { half_width: default_half_width(), fiber_dim: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<usize>,
    /// spectral | nystrom | galerkin-keys | galerkin-box
    pub realization: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub n_nodes: Option<usize>,
    pub rule: Option<QuadRule>,
}

/// Order-0 symbol σ(x, ±) with a low-frequency cutoff.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub plus: Envelope,
    pub minus: Envelope,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_cutoff() -> f64 {
    2.0
}

impl Default for SymbolConfig {
    fn default() -> Self {
        SymbolConfig {
            plus: Envelope::Cosine { offset: 1.0, amp: 0.4, freq: 0.5 },
            minus: Envelope::constant(C64::new(0.0, -1.0)),
            cutoff: default_cutoff(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// multiplies every upper-bound tolerance
    #[serde(default = "one_f64")]
    pub scale: f64,
    /// per-check tolerance, keyed by check name
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

fn one_f64() -> f64 {
    1.0
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { scale: 1.0, overrides: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// also write the quantized operator as (i, j, re, im) rows
    #[serde(default)]
    pub operator: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_count")]
    pub count: usize,
    /// probes carry every DFT mode with |ξ| ≤ band
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default = "one_u64")]
    pub seed: u64,
}

fn default_probe_count() -> usize {
    10
}

fn default_band() -> f64 {
    8.0
}

fn one_u64() -> u64 {
    1
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { count: default_probe_count(), band: default_band(), seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ScenarioKind,
    #[serde(default = "default_sweep_n")]
    pub grid_n: Vec<usize>,
    #[serde(default)]
    pub t_nodes: Vec<usize>,
    /// least fitted order of the error in N
    #[serde(default = "default_sweep_order")]
    pub min_order: f64,
}

fn default_sweep_n() -> Vec<usize> {
    vec![128, 256, 512, 1024]
}

fn default_sweep_order() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<ScenarioKind>,
    #[serde(default)]
    pub groupoid: GroupoidConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub family: Option<FamilySpec>,
    pub second_family: Option<FamilySpec>,
    pub third_family: Option<FamilySpec>,
    pub symbol: Option<SymbolConfig>,
    #[serde(default)]
    pub m: u32,
    /// classify: expected class (defaults to the family's tag)
    pub expect: Option<FamilyClass>,
    /// gauge-check: node shifts k, s = e^{kδ}
    pub gauge_shifts: Option<Vec<i64>>,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
    /// directory that relative family paths are resolved against
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn cfg_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

fn parse_realization(s: &str) -> Result<Realization> {
    Ok(match s {
        "spectral" => Realization::Spectral,
        "nystrom" => Realization::Nystrom,
        "galerkin-keys" => Realization::Galerkin(Basis::Keys),
        "galerkin-box" => Realization::Galerkin(Basis::Box),
        other => return Err(cfg_err("grid.realization", format!("unknown realization `{other}`"))),
    })
}

impl ScenarioConfig {
    /// Defaults for a kind, as used when no config file is given.
    pub fn for_kind(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            scenario: Some(kind),
            groupoid: GroupoidConfig::default(),
            grid: GridConfig::default(),
            quadrature: QuadratureConfig::default(),
            family: None,
            second_family: None,
            third_family: None,
            symbol: None,
            m: 0,
            expect: None,
            gauge_shifts: None,
            probes: ProbeConfig::default(),
            tolerances: ToleranceConfig::default(),
            output: OutputConfig::default(),
            sweep: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let at = e.span().map(|s| format!(" (byte {})", s.start)).unwrap_or_default();
            cfg_err("<document>", format!("{msg}{at}"))
        })?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn kind(&self) -> Result<ScenarioKind> {
        self.scenario.ok_or_else(|| cfg_err("scenario", "no scenario kind given"))
    }

    fn effective_kind(&self) -> Result<ScenarioKind> {
        let k = self.kind()?;
        Ok(match (k, &self.sweep) {
            (ScenarioKind::Sweep, Some(s)) => s.base,
            _ => k,
        })
    }

    pub fn realization(&self) -> Result<Realization> {
        match &self.grid.realization {
            Some(s) => parse_realization(s),
            None => Ok(match self.effective_kind()? {
                ScenarioKind::QuantizeCompare | ScenarioKind::SymbolRoundtrip => Realization::Galerkin(Basis::Keys),
                _ => Realization::Spectral,
            }),
        }
    }

    pub fn grid_n(&self) -> Result<usize> {
        Ok(self.grid.n.unwrap_or(if self.effective_kind()?.is_module() { 128 } else { 512 }))
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        let d = QuadratureSpec::default();
        QuadratureSpec {
            t_min: self.quadrature.t_min.unwrap_or(d.t_min),
            t_max: self.quadrature.t_max.unwrap_or(d.t_max),
            n_nodes: self.quadrature.n_nodes.unwrap_or(d.n_nodes),
            rule: self.quadrature.rule.unwrap_or(d.rule),
        }
    }

    pub fn groupoid_spec(&self) -> GroupoidSpec {
        GroupoidSpec { kind: GroupoidKind::PairGroupoid, fiber_dim: self.groupoid.fiber_dim, half_width: self.groupoid.half_width }
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let grid = GridSpec::new(self.grid_n()?, self.groupoid.half_width)?;
        Discretization::new(grid, self.quadrature_spec(), self.realization()?)
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        self.groupoid_spec().validate()?;
        let n = self.grid_n()?;
        if n < 8 || !n.is_power_of_two() {
            return Err(cfg_err("grid.n", format!("{n} is not a power of two ≥ 8")));
        }
        self.realization()?;
        self.quadrature_spec().validate()?;
        let tol = &self.tolerances;
        if !(tol.scale > 0.0 && tol.scale.is_finite()) {
            return Err(cfg_err("tolerances.scale", "must be positive"));
        }
        for (k, v) in &tol.overrides {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(cfg_err(&format!("tolerances.overrides.{k}"), "must be positive"));
            }
        }
        if self.probes.count == 0 {
            return Err(cfg_err("probes.count", "need at least one probe"));
        }
        if !(self.probes.band > 0.0) {
            return Err(cfg_err("probes.band", "must be positive"));
        }
        for (name, f) in [("family", &self.family), ("second_family", &self.second_family), ("third_family", &self.third_family)] {
            if let Some(f) = f {
                self.validate_family(name, f)?;
            }
        }
        if let Some(s) = &self.symbol {
            if !(s.cutoff > 0.0) {
                return Err(cfg_err("symbol.cutoff", "must be positive"));
            }
        }
        let base = self.effective_kind()?;
        if base == ScenarioKind::SymbolRoundtrip && self.m != 0 {
            return Err(cfg_err("m", "symbol-roundtrip works with order-0 families (m = 0)"));
        }
        if kind == ScenarioKind::Sweep {
            let s = self.sweep.as_ref().ok_or_else(|| cfg_err("sweep", "a sweep needs a [sweep] table"))?;
            if s.grid_n.is_empty() {
                return Err(cfg_err("sweep.grid_n", "empty range"));
            }
            if let Some(&bad) = s.grid_n.iter().find(|n| **n < 8 || !n.is_power_of_two()) {
                return Err(cfg_err("sweep.grid_n", format!("{bad} is not a power of two ≥ 8")));
            }
            if s.grid_n.windows(2).any(|w| w[0] >= w[1]) {
                return Err(cfg_err("sweep.grid_n", "must be strictly increasing"));
            }
            if let Some(&bad) = s.t_nodes.iter().find(|n| **n < 2) {
                return Err(cfg_err("sweep.t_nodes", format!("{bad} nodes is too few")));
            }
            if !matches!(s.base, ScenarioKind::QuantizeCompare | ScenarioKind::SymbolRoundtrip) {
                return Err(cfg_err("sweep.base", format!("`{}` has no grid-dependent error to sweep", s.base)));
            }
        }
        Ok(())
    }

    fn validate_family(&self, name: &str, f: &FamilySpec) -> Result<()> {
        match f {
            FamilySpec::Corpus { corpus } => {
                if !j_corpus().iter().any(|(n, _)| n == corpus) {
                    let names: Vec<&str> = j_corpus().iter().map(|(n, _)| *n).collect();
                    return Err(cfg_err(&format!("{name}.corpus"), format!("unknown entry `{corpus}`; have {}", names.join(", "))));
                }
            }
            FamilySpec::File { path, .. } => {
                let p = self.base_dir.join(path);
                if !p.is_file() {
                    return Err(cfg_err(&format!("{name}.path"), format!("{} does not exist", p.display())));
                }
            }
            FamilySpec::Recipe(g) => match g {
                Generator::Hermite { order, scale, .. } => {
                    if *order == 0 {
                        return Err(cfg_err(&format!("{name}.order"), "Hermite windows need order ≥ 1"));
                    }
                    if !(*scale > 0.0) {
                        return Err(cfg_err(&format!("{name}.scale"), "must be positive"));
                    }
                }
                Generator::Gaussian { scale, .. } | Generator::Rapid { scale, .. } => {
                    if !(*scale > 0.0) {
                        return Err(cfg_err(&format!("{name}.scale"), "must be positive"));
                    }
                }
                _ => {}
            },
        }
        Ok(())
    }

    fn build_family(&self, spec: Option<&FamilySpec>, default: usize) -> Result<KernelFamily> {
        let q = self.quadrature_spec();
        let range = (q.t_min, q.t_max);
        let g = self.groupoid_spec();
        match spec {
            None => j_corpus()[default].1.build(g, range),
            Some(FamilySpec::Corpus { corpus }) => {
                let (_, gen) = j_corpus().into_iter().find(|(n, _)| n == corpus).expect("validated");
                gen.build(g, range)
            }
            Some(FamilySpec::Recipe(gen)) => gen.build(g, range),
            Some(FamilySpec::File { path, class }) => load_family(&self.base_dir.join(path), g.half_width, *class),
        }
    }

    fn symbol_config(&self) -> SymbolConfig {
        self.symbol.clone().unwrap_or_default()
    }

    fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.overrides.get(name).copied().unwrap_or(default * self.tolerances.scale)
    }

    fn at_most(&self, name: &str, measured: f64, default: f64) -> Check {
        Check::at_most(name, measured, self.tolerance(name, default))
    }

    /// Lower bounds (slopes, eigenvalues) are not scaled.
    fn at_least(&self, name: &str, measured: f64, default: f64) -> Check {
        Check::at_least(name, measured, self.tolerances.overrides.get(name).copied().unwrap_or(default))
    }
}

/// A CSV table carried by a report.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub summary: Summary,
    pub tables: Vec<Table>,
    /// grid-dependent error tracked by sweeps
    pub metric: Option<f64>,
    pub operator: Option<DiscreteOperator>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.summary.pass
    }

    /// summary.json plus one CSV per table, and operator.csv if kept.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.summary.write(&dir.join("summary.json"))?;
        for t in &self.tables {
            let header: Vec<&str> = t.header.iter().map(|s| s.as_str()).collect();
            write_csv(&dir.join(format!("{}.csv", t.name)), &header, &t.rows)?;
        }
        if let Some(op) = &self.operator {
            write_operator_csv(&dir.join("operator.csv"), op)?;
        }
        Ok(())
    }
}

fn ctx(kind: ScenarioKind, what: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Scenario { context: format!("{kind}: {what}"), source: Box::new(e) }
}

/// Validates and runs one scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.kind()? {
        ScenarioKind::Classify => run_classify(cfg),
        ScenarioKind::QuantizeCompare => run_quantize_compare(cfg),
        ScenarioKind::SymbolRoundtrip => run_symbol_roundtrip(cfg),
        ScenarioKind::InnerProduct => run_inner_product(cfg),
        ScenarioKind::GaugeCheck => run_gauge_check(cfg),
        ScenarioKind::CrossedDecay => run_crossed_decay(cfg),
        ScenarioKind::Corner => run_corner(cfg),
        ScenarioKind::Sweep => sweep(cfg),
    }
}

fn run_classify(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::Classify;
    let f = cfg.build_family(cfg.family.as_ref(), 0).map_err(ctx(k, "building family"))?;
    let r = classify(&f, &ClassifyConfig::default()).map_err(ctx(k, "classify"))?;
    let want = cfg.expect.or(f.claimed_class);
    let label = |c: Option<FamilyClass>| c.map(|c| c.to_string()).unwrap_or_else(|| "none".into());
    let mut checks = vec![Check {
        name: format!("class {} (expected {})", label(r.class), label(want)),
        measured: if r.class == want { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: r.class == want,
    }];
    if r.class != Some(FamilyClass::Sc) && !f.is_zero() {
        checks.push(Check::at_least("vanishing_order", r.vanishing_order, 0.0));
    }
    let mut sn = Table::new("seminorms", &["k", "l", "j", "m", "value"]);
    for (i, v) in &r.seminorms {
        sn.push(vec![i.k.to_string(), i.l.to_string(), i.j.to_string(), i.m.to_string(), fmt17(*v)]);
    }
    let mut j0 = Table::new("j0_profile", &["t", "sup"]);
    for (t, s) in r.j0_ts.iter().zip(&r.j0_sups) {
        j0.push(vec![fmt17(*t), fmt17(*s)]);
    }
    let mut an = Table::new("annuli", &["radius", "max"]);
    for (a, b) in r.annulus_radii.iter().zip(&r.annulus_max) {
        an.push(vec![fmt17(*a), fmt17(*b)]);
    }
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![sn, j0, an], metric: None, operator: None })
}

/// Band-limited probes: every DFT mode with |ξ| ≤ band, seeded amplitudes.
pub fn band_limited_probes(grid: &GridSpec, band: f64, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let modes: Vec<f64> = grid.freqs().into_iter().filter(|xi| xi.abs() <= band && xi.abs() < grid.nyquist()).collect();
    (0..count)
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(p as u64));
            let amps: Vec<C64> = modes.iter().map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            (0..grid.n)
                .map(|j| {
                    let x = grid.x(j);
                    modes.iter().zip(&amps).map(|(xi, a)| a * C64::from_polar(1.0, xi * x)).sum()
                })
                .collect()
        })
        .collect()
}

fn run_quantize_compare(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::QuantizeCompare;
    let d = cfg.discretization()?;
    let f = cfg.build_family(cfg.family.as_ref(), 0).map_err(ctx(k, "building family"))?;
    let Some(a) = f.analytic_ref() else {
        return Err(ctx(k, "reference symbol")(Error::Domain("quantize-compare needs a closed-form family".into())));
    };
    let q = quantize_family(&f, cfg.m, &d).map_err(ctx(k, "quantize"))?;
    let kn = kn_proof_operator(a, cfg.m, &d.grid);
    let probes = band_limited_probes(&d.grid, cfg.probes.band, cfg.probes.count, cfg.probes.seed);
    let mut table = Table::new("probes", &["probe", "rel_l2"]);
    let mut worst: f64 = 0.0;
    for (i, g) in probes.iter().enumerate() {
        let (pg, kg) = (q.op.apply(g)?, kn.apply(g)?);
        let diff: Vec<C64> = pg.iter().zip(&kg).map(|(a, b)| a - b).collect();
        let e = l2(&diff) / l2(g);
        worst = worst.max(e);
        table.push(vec![i.to_string(), fmt17(e)]);
    }
    let checks = vec![cfg.at_most("rel_l2", worst, 1e-3), cfg.at_most("tail_ratio", q.tail_ratio, 1e-8)];
    let operator = cfg.output.operator.then_some(q.op);
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![table], metric: Some(worst), operator })
}

/// Frequencies for symbol tables: ±[lo, hi] in `n` steps per sign.
fn signed_range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let pos: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    pos.iter().rev().map(|v| -v).chain(pos.iter().copied()).collect()
}

fn run_symbol_roundtrip(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::SymbolRoundtrip;
    let d = cfg.discretization()?;
    let s = cfg.symbol_config();
    let g = cfg.groupoid_spec();
    let range = (d.quad.t_min, d.quad.t_max);
    let f = symbol_to_family(g, s.plus, s.minus, default_psi(), range).map_err(ctx(k, "symbol_to_family"))?;
    let l = g.half_width;
    let xs: Vec<f64> = (0..7).map(|i| -0.75 * l + 1.5 * l * i as f64 / 6.0).collect();
    let xis = signed_range(0.8, 16.0, 9);
    let sym = principal_symbol(&f, 0, &xs, &xis, 0.5).map_err(ctx(k, "principal_symbol"))?;
    let mut table = Table::new("symbol", &["x", "xi", "re", "im", "want_re", "want_im"]);
    let mut round: f64 = 0.0;
    for (ix, &x) in xs.iter().enumerate() {
        for (iz, &xi) in xis.iter().enumerate() {
            let want = if xi > 0.0 { s.plus.eval(x) } else { s.minus.eval(x) };
            let got = sym[ix][iz];
            round = round.max((got - want).norm());
            table.push(vec![fmt17(x), fmt17(xi), fmt17(got.re), fmt17(got.im), fmt17(want.re), fmt17(want.im)]);
        }
    }
    // closed forms: σ ≡ 1 for the normalized window, σ ≡ 1/2 for ζ²e^{−ζ²}
    let unit = symbol_to_family(g, Envelope::one(), Envelope::one(), default_psi(), range)?;
    let one = principal_symbol(&unit, 0, &[0.0], &xis, 0.5)?[0].iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max);
    let half_fam = crate::family::KernelFamily::analytic(
        g,
        crate::family::AnalyticFamily::new(
            "half",
            vec![crate::family::SeparableTerm {
                envelope: Envelope::one(),
                freq: crate::profile::FreqProfile::Hermite { order: 1, scale: 1.0, norm: 1.0 },
                time: crate::profile::TimeProfile::cutoff(),
            }],
        ),
        range,
        Some(FamilyClass::J),
    );
    let half = principal_symbol(&half_fam, 0, &[0.0], &xis, 0.5)?[0].iter().map(|v| (v - 0.5).norm()).fold(0.0, f64::max);

    // grid level: the symbol of P_f recovered from the matrix
    let q = quantize_family(&f, 0, &d).map_err(ctx(k, "quantize"))?;
    let a = f.analytic_ref().expect("window families are analytic");
    let (nodes, weights) = d.quad.nodes_weights();
    let band: Vec<f64> = signed_range(4.0, 12.0, 5).into_iter().filter(|xi| xi.abs() < d.grid.nyquist()).collect();
    let n = d.grid.n;
    let mut grid_table = Table::new("grid_symbol", &["x", "xi", "re", "im", "want_re", "want_im"]);
    let mut grid_err: f64 = 0.0;
    for i in (0..n).step_by(n / 8) {
        for &xi in &band {
            let got = recovered_symbol(&q.op, i, xi);
            let want = nodal_symbol(a, 0, &nodes, &weights, d.grid.x(i), xi);
            grid_err = grid_err.max((got - want).norm());
            grid_table.push(vec![fmt17(d.grid.x(i)), fmt17(xi), fmt17(got.re), fmt17(got.im), fmt17(want.re), fmt17(want.im)]);
        }
    }
    let checks = vec![
        cfg.at_most("roundtrip", round, 1e-6),
        cfg.at_most("sigma_one", one, 1e-6),
        cfg.at_most("sigma_half", half, 1e-8),
        cfg.at_most("grid_symbol", grid_err, 1e-2),
    ];
    let operator = cfg.output.operator.then_some(q.op);
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![table, grid_table], metric: Some(grid_err), operator })
}

fn elements(cfg: &ScenarioConfig, d: &Discretization, kind: ScenarioKind) -> Result<(ModuleElement, ModuleElement, ModuleElement)> {
    let mk = |spec: Option<&FamilySpec>, default: usize, what: &str| -> Result<ModuleElement> {
        let f = cfg.build_family(spec, default).map_err(ctx(kind, what))?;
        ModuleElement::new(&f, *d).map_err(ctx(kind, what))
    };
    Ok((
        mk(cfg.family.as_ref(), 0, "family")?,
        mk(cfg.second_family.as_ref(), 1, "second_family")?,
        mk(cfg.third_family.as_ref(), 2, "third_family")?,
    ))
}

fn rel_op(a: &DiscreteOperator, b: &DiscreteOperator) -> f64 {
    let d = &a.action() - &b.action();
    let num = d.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    num / b.frobenius().max(f64::MIN_POSITIVE)
}

fn rel_elements(a: &ModuleElement, b: &ModuleElement) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.kernels().iter().zip(b.kernels()) {
        match (x, y) {
            (Some(x), Some(y)) => {
                num += (x - y).iter().map(|v| v.norm_sqr()).sum::<f64>();
                den += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
            (Some(x), None) => num += x.iter().map(|v| v.norm_sqr()).sum::<f64>(),
            (None, Some(y)) => {
                let s = y.iter().map(|v| v.norm_sqr()).sum::<f64>();
                num += s;
                den += s;
            }
            (None, None) => {}
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Positivity, Cauchy–Schwarz and right-linearity for one pair.
pub fn module_axioms(f: &ModuleElement, g: &ModuleElement, p: &DiscreteOperator) -> Result<(f64, f64, f64)> {
    let ff = inner_product(f, f)?;
    let gg = inner_product(g, g)?;
    let fg = inner_product(f, g)?;
    let eig = ff.hermitian_eigenvalues();
    let positivity = -eig[0] / ff.spectral_norm().max(f64::MIN_POSITIVE);
    let cs = fg.spectral_norm() - (ff.spectral_norm() * gg.spectral_norm()).sqrt();
    let lhs = inner_product(f, &g.act(p)?)?;
    let rhs = DiscreteOperator::from_action(fg.action().dot(&p.action()), f.disc.grid);
    Ok((positivity, cs, rel_op(&lhs, &rhs)))
}

fn run_inner_product(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::InnerProduct;
    let d = cfg.discretization()?;
    let (f, g, h) = elements(cfg, &d, k)?;
    let s = cfg.symbol_config();
    let p = kn_quantize(&ClassicalSymbol::order_zero(s.plus, s.minus, s.cutoff), &d.grid).map_err(ctx(k, "symbol"))?;
    let (pos, cs, lin) = module_axioms(&f, &g, &p).map_err(ctx(k, "axioms"))?;
    // ⟨θ_{f,g} h | f⟩ = ⟨h | θ_{g,f} f⟩
    let lhs = inner_product(&rank_one(&f, &g, &h)?, &f)?;
    let rhs = inner_product(&h, &rank_one(&g, &f, &f)?)?;
    let r1 = rel_op(&lhs, &rhs);
    let ff = inner_product(&f, &f)?;
    let mut eig = Table::new("gram_eigenvalues", &["index", "value"]);
    for (i, v) in ff.hermitian_eigenvalues().iter().enumerate() {
        eig.push(vec![i.to_string(), fmt17(*v)]);
    }
    let checks = vec![
        cfg.at_most("positivity", pos.max(0.0), 1e-6),
        cfg.at_most("cauchy_schwarz", cs.max(0.0), 1e-8),
        cfg.at_most("right_linearity", lin, 1e-6),
        cfg.at_most("rank_one_adjoint", r1, 1e-6),
    ];
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![eig], metric: None, operator: None })
}

fn run_gauge_check(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::GaugeCheck;
    let d = cfg.discretization()?;
    let delta = d.quad.log_step().ok_or_else(|| cfg_err("quadrature.rule", "gauge-check needs log-trapezoidal nodes"))?;
    let (f, g, _) = elements(cfg, &d, k)?;
    let shifts = cfg.gauge_shifts.clone().unwrap_or_else(|| vec![-9, -4, 3, 11]);
    let before = inner_product(&f, &g)?;
    let mut table = Table::new("gauge", &["k", "s", "invariance", "composition"]);
    let (mut inv, mut comp): (f64, f64) = (0.0, 0.0);
    for &kk in &shifts {
        let s = (kk as f64 * delta).exp();
        if node_shift(&d, s) != Some(kk) {
            return Err(cfg_err("gauge_shifts", format!("shift {kk} is not node-aligned")));
        }
        let (fs, gs) = (gauge(s, &f).map_err(ctx(k, "gauge"))?, gauge(s, &g).map_err(ctx(k, "gauge"))?);
        let e = rel_op(&inner_product(&fs, &gs)?, &before);
        // U_{s'} U_s = U_{s's}, s' one node further the same way. Opposite
        // shifts would clip both ends of the node range and U_{s's} neither.
        let step = if kk < 0 { -1 } else { 1 };
        let s2 = (step as f64 * delta).exp();
        let c = rel_elements(&gauge(s2, &fs)?, &gauge(((kk + step) as f64 * delta).exp(), &f)?);
        inv = inv.max(e);
        comp = comp.max(c);
        table.push(vec![kk.to_string(), fmt17(s), fmt17(e), fmt17(c)]);
    }
    let checks = vec![cfg.at_most("invariance", inv, 1e-8), cfg.at_most("composition", comp, 1e-12)];
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![table], metric: None, operator: None })
}

fn run_crossed_decay(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::CrossedDecay;
    let d = cfg.discretization()?;
    let (f, g, h) = elements(cfg, &d, k)?;
    let cc = CrossedConfig::default();
    let c = crossed_element(&f, &g, &CrossedConfig { q: f64::NEG_INFINITY, ..cc }).map_err(ctx(k, "crossed_element"))?;
    let pi = crossed_apply(&f, &g, &h, &cc).map_err(ctx(k, "crossed_apply"))?;
    let theta = rank_one(&f, &g, &h)?;
    let e = rel_elements(&pi, &theta);
    let mut table = Table::new("crossed", &["k", "s", "sup_norm"]);
    for ((kk, s), v) in c.shifts.iter().zip(&c.s).zip(&c.sup_norms) {
        table.push(vec![kk.to_string(), fmt17(*s), fmt17(*v)]);
    }
    let checks = vec![
        cfg.at_least("slope_small", c.slope_small, cc.q),
        cfg.at_least("slope_large", c.slope_large, cc.q),
        cfg.at_most("rank_one", e, 1e-3),
    ];
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![table], metric: None, operator: None })
}

/// Gaussian smoothing kernel of scale 6 at t = 1, the witness correction.
pub fn witness_correction(groupoid: GroupoidSpec, grid: &GridSpec) -> Result<Array2<C64>> {
    let g = Generator::Gaussian { scale: 6.0, envelope: Envelope::one() }.build(groupoid, (1.0, 1.0))?;
    g.kernel_at(1.0, grid, Realization::Spectral)
}

fn run_corner(cfg: &ScenarioConfig) -> Result<Report> {
    let k = ScenarioKind::Corner;
    let d = cfg.discretization()?;
    let psi = BumpProfile::psi_window(Normalization::Square);
    let h = witness_correction(cfg.groupoid_spec(), &d.grid)?;
    let w = full_witness(&psi, Some(&h), cfg.groupoid_spec(), &d, &WitnessConfig::default()).map_err(ctx(k, "witness"))?;
    let s = cfg.symbol_config();
    let p = kn_quantize(&ClassicalSymbol::order_zero(s.plus, s.minus, s.cutoff), &d.grid).map_err(ctx(k, "symbol"))?;
    let c = corner_decompose(&p, &w).map_err(ctx(k, "corner"))?;
    let recon = rel_op(&c.q_part.add(&c.r_part)?, &p);
    let mut table = Table::new("probes", &["xi", "r_norm"]);
    for (xi, v) in c.probe_freqs.iter().zip(&c.probe_norms) {
        table.push(vec![fmt17(*xi), fmt17(*v)]);
    }
    let checks = vec![
        cfg.at_least("witness_min_eig", w.min_eig_all, 0.1),
        cfg.at_least("witness_decay", w.decay_slope, 6.0),
        cfg.at_most("reconstruction", recon, 1e-12),
        cfg.at_least("remainder_probe_slope", c.probe_slope, 6.0),
        cfg.at_least("remainder_fourier_slope", c.fourier_slope, 6.0),
    ];
    Ok(Report { summary: Summary::new(k.name(), checks), tables: vec![table], metric: None, operator: None })
}

/// Least-squares order p in err ≈ C·N^{−p}.
pub fn fitted_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    -line_fit(&xs, &ys).slope
}

/// Re-runs the base scenario over grid sizes (and node counts).
pub fn sweep(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let s = cfg.sweep.clone().ok_or_else(|| cfg_err("sweep", "a sweep needs a [sweep] table"))?;
    let node_counts = if s.t_nodes.is_empty() { vec![cfg.quadrature_spec().n_nodes] } else { s.t_nodes.clone() };
    let point = |n: usize, nodes: usize| -> Result<Report> {
        let mut c = cfg.clone();
        c.scenario = Some(s.base);
        c.sweep = None;
        c.grid.n = Some(n);
        c.quadrature.n_nodes = Some(nodes);
        run_scenario(&c)
    };
    if s.grid_n.len() == 1 && node_counts.len() == 1 {
        return point(s.grid_n[0], node_counts[0]);
    }
    let mut table = Table::new("convergence", &["grid_n", "t_nodes", "error", "local_order"]);
    let mut checks = Vec::new();
    for &nodes in &node_counts {
        let mut errs = Vec::new();
        for &n in &s.grid_n {
            let r = point(n, nodes).map_err(ctx(ScenarioKind::Sweep, &format!("N = {n}, {nodes} t-nodes")))?;
            let e = r.metric.expect("sweep bases report a metric");
            let local = errs.last().map(|p: &f64| (p / e).log2()).unwrap_or(f64::NAN);
            table.push(vec![n.to_string(), nodes.to_string(), fmt17(e), fmt17(local)]);
            errs.push(e);
        }
        if s.grid_n.len() > 1 {
            let worst_ratio = errs.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            checks.push(Check {
                name: format!("monotone ({nodes} t-nodes)"),
                measured: worst_ratio,
                tolerance: 1.0,
                pass: worst_ratio < 1.0,
            });
            checks.push(cfg.at_least(&format!("order ({nodes} t-nodes)"), fitted_order(&s.grid_n, &errs), s.min_order));
        }
    }
    let name = format!("sweep:{}", s.base);
    Ok(Report { summary: Summary::new(name, checks), tables: vec![table], metric: None, operator: None })
}

/// Sizes the global worker pool. Results do not depend on the count.
pub fn init_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(cfg_err("threads", "need at least one thread"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| cfg_err("threads", e.to_string()))
}
