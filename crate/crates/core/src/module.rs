//! Pre-Hilbert module over the quantized algebra: ⟨f|g⟩ = ∫ f_t* ∗ g_t dt/t,
//! gauge unitaries, rank-one operators, crossed elements and the
//! full-module witness, all on a fixed grid and t-quadrature.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::algebra::{kernel_radius, Discretization};
use crate::dnc::GroupoidSpec;
use crate::error::{Error, Result};
use crate::family::{AnalyticFamily, CustomField, FamilyClass, KernelFamily, NodalFamily, Representation};
use crate::numeric::loglog_slope;
use crate::operator::{l2, DiscreteOperator};
use crate::profile::{BumpProfile, Normalization, TimeProfile};
use crate::quantization::packet;
use crate::realize::{forward_fft, inverse_fft, Realization};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

// decay exponent as the abscissa grows; an unbounded fit stays unbounded
fn growth_decay(scales: &[f64], vals: &[f64]) -> f64 {
    let s = loglog_slope(scales, vals, 1e-13).slope;
    if s.is_infinite() {
        f64::INFINITY
    } else {
        -s
    }
}

/// Family tagged J materialized on the nodes of a discretization.
#[derive(Clone, Debug)]
pub struct ModuleElement {
    pub family: KernelFamily,
    pub disc: Discretization,
}

fn mass(k: &Option<Array2<C64>>) -> f64 {
    k.as_ref().map_or(0.0, |k| k.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
}

fn drop_zeros(ks: Vec<Option<Array2<C64>>>) -> Vec<Option<Array2<C64>>> {
    ks.into_iter().map(|k| k.filter(|k| k.iter().any(|v| *v != ZERO))).collect()
}

impl ModuleElement {
    pub fn new(f: &KernelFamily, disc: Discretization) -> Result<Self> {
        if !f.is_zero() && !matches!(f.claimed_class, Some(FamilyClass::J) | Some(FamilyClass::J0)) {
            return Err(Error::Class("module elements must be tagged J".into()));
        }
        let fam = disc.materialize(f)?;
        let e = ModuleElement { family: fam, disc };
        e.check_tail()?;
        Ok(e)
    }

    pub fn zero(groupoid: GroupoidSpec, disc: Discretization) -> Self {
        let n = disc.nodes().len();
        let nf = NodalFamily { grid: disc.grid, nodes: disc.nodes(), kernels: vec![None; n], realization: disc.realization };
        ModuleElement { family: KernelFamily::nodal(groupoid, nf, Some(FamilyClass::J0)), disc }
    }

    pub fn kernels(&self) -> &[Option<Array2<C64>>] {
        match &self.family.repr {
            Representation::Nodal(n) => &n.kernels,
            _ => unreachable!("module elements are nodal"),
        }
    }

    fn realization(&self) -> Realization {
        match &self.family.repr {
            Representation::Nodal(n) => n.realization,
            _ => self.disc.realization,
        }
    }

    fn with_kernels(&self, kernels: Vec<Option<Array2<C64>>>) -> Self {
        let nf = NodalFamily { grid: self.disc.grid, nodes: self.disc.nodes(), kernels, realization: self.realization() };
        ModuleElement { family: KernelFamily::nodal(self.family.groupoid, nf, self.family.claimed_class), disc: self.disc }
    }

    pub fn is_zero(&self) -> bool {
        self.kernels().iter().all(|k| k.is_none())
    }

    fn check_tail(&self) -> Result<()> {
        let (_, w) = self.disc.quad.nodes_weights();
        let m: Vec<f64> = self.kernels().iter().zip(&w).map(|(k, w)| w * mass(k)).collect();
        let total: f64 = m.iter().sum();
        if total > 0.0 && (m[0] + m[m.len() - 1]) > 1e-8 * total {
            return Err(Error::Tail(format!(
                "end-node mass ratio {:.3e} exceeds 1e-8",
                (m[0] + m[m.len() - 1]) / total
            )));
        }
        Ok(())
    }

    fn check_same(&self, other: &ModuleElement) -> Result<()> {
        self.disc.grid.check_same(&other.disc.grid)?;
        if self.disc.quad != other.disc.quad {
            return Err(Error::GridMismatch("module elements use different t-quadratures".into()));
        }
        Ok(())
    }

    /// Right action (g·P)_t = g_t ∘ P.
    pub fn act(&self, p: &DiscreteOperator) -> Result<ModuleElement> {
        self.disc.grid.check_same(&p.grid)?;
        let pa = p.action();
        Ok(self.with_kernels(self.kernels().iter().map(|k| k.as_ref().map(|k| k.dot(&pa))).collect()))
    }

    pub fn add(&self, other: &ModuleElement) -> Result<ModuleElement> {
        self.check_same(other)?;
        let ks = self
            .kernels()
            .iter()
            .zip(other.kernels())
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(a + b),
                (Some(a), None) => Some(a.clone()),
                (None, b) => b.clone(),
            })
            .collect();
        Ok(self.with_kernels(ks))
    }
}

/// ⟨f|g⟩ = Σ_j w_j (f_{t_j})* ∘ g_{t_j}, as an operator (order 0).
pub fn inner_product(f: &ModuleElement, g: &ModuleElement) -> Result<DiscreteOperator> {
    f.check_same(g)?;
    let grid = f.disc.grid;
    let (_, w) = f.disc.quad.nodes_weights();
    let dx = grid.dx();
    let mut acc = Array2::<C64>::zeros((grid.n, grid.n));
    for ((a, b), &w) in f.kernels().iter().zip(g.kernels()).zip(&w) {
        if let (Some(a), Some(b)) = (a, b) {
            let ah = a.t().mapv(|v| v.conj());
            acc.scaled_add(C64::from(w * dx * dx), &ah.dot(b));
        }
    }
    Ok(DiscreteOperator::from_action(acc, grid))
}

fn lattice_step(disc: &Discretization) -> Result<f64> {
    disc.quad
        .log_step()
        .ok_or_else(|| Error::Domain("gauge and crossed constructions need a log-uniform t-rule".into()))
}

/// Index shift k with s = e^{kδ}, when s is node-aligned.
pub fn node_shift(disc: &Discretization, s: f64) -> Option<i64> {
    let k = s.ln() / disc.quad.log_step()?;
    let r = k.round();
    ((k - r).abs() < 1e-9).then_some(r as i64)
}

/// (U_s f)_t = f_{st}, an exact index shift of the t-nodes.
pub fn gauge(s: f64, f: &ModuleElement) -> Result<ModuleElement> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("gauge parameter {s} must be positive")));
    }
    let k = node_shift(&f.disc, s).ok_or_else(|| {
        Error::Range(format!("s = {s} is not a node-aligned power e^{{kδ}} of the t-grid"))
    })?;
    let ks = f.kernels();
    let n = ks.len() as i64;
    let (_, w) = f.disc.quad.nodes_weights();
    let total: f64 = ks.iter().zip(&w).map(|(k, w)| w * mass(k)).sum();
    let lost: f64 = (0..n).filter(|i| i - k < 0 || i - k >= n).map(|i| w[i as usize] * mass(&ks[i as usize])).sum();
    if total > 0.0 && lost > 1e-8 * total {
        return Err(Error::Range(format!(
            "gauge by s = {s} pushes {:.3e} of the t-mass off the node range",
            lost / total
        )));
    }
    let out = (0..n).map(|j| if j + k >= 0 && j + k < n { ks[(j + k) as usize].clone() } else { None }).collect();
    let g = f.with_kernels(out);
    g.check_tail()?;
    Ok(g)
}

/// θ_{f,g}(h) = f·⟨g|h⟩.
pub fn rank_one(f: &ModuleElement, g: &ModuleElement, h: &ModuleElement) -> Result<ModuleElement> {
    f.act(&inner_product(g, h)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossedConfig {
    /// s ranges over e^{kδ} with |ln s| ≤ octaves·ln 2
    pub octaves: u32,
    /// s-grid step in t-nodes
    pub stride: usize,
    /// slopes are fitted where |ln s| ≥ fit_from·ln 2
    pub fit_from: f64,
    pub q: f64,
}

impl Default for CrossedConfig {
    fn default() -> Self {
        CrossedConfig { octaves: 6, stride: 2, fit_from: 3.0, q: 6.0 }
    }
}

/// Sup-norm profile of s ↦ f∗α_s(g*) with fitted decay at both ends.
#[derive(Clone, Debug, Serialize)]
pub struct CrossedElement {
    pub shifts: Vec<i64>,
    pub s: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub slope_small: f64,
    pub slope_large: f64,
}

fn shifts(disc: &Discretization, cfg: &CrossedConfig) -> Result<Vec<i64>> {
    let kmax = (cfg.octaves as f64 * std::f64::consts::LN_2 / lattice_step(disc)? + 1e-9).floor() as i64;
    let st = cfg.stride.max(1) as i64;
    let kmax = kmax - kmax % st;
    Ok((-kmax..=kmax).step_by(st as usize).collect())
}

fn check_supports(f: &ModuleElement, g: &ModuleElement) -> Result<()> {
    if f.realization().is_periodic() {
        return Ok(());
    }
    let grid = f.disc.grid;
    let rf = f.kernels().iter().flatten().map(|k| kernel_radius(k, &grid, false)).fold(0.0, f64::max);
    let rg = g.kernels().iter().flatten().map(|k| kernel_radius(k, &grid, false)).fold(0.0, f64::max);
    if rf + rg >= grid.half_width {
        return Err(Error::SupportCondition(format!(
            "kernel radii {rf:.3} + {rg:.3} reach the half-width {}",
            grid.half_width
        )));
    }
    Ok(())
}

/// (f∗α_s(g*))_t = s·f_t ∘ (g_{st})* for s = e^{kδ}.
fn crossed_kernels(f: &ModuleElement, g: &ModuleElement, k: i64, delta: f64) -> Vec<Option<Array2<C64>>> {
    let s = (k as f64 * delta).exp();
    let dx = f.disc.grid.dx();
    let (fk, gk) = (f.kernels(), g.kernels());
    let n = fk.len() as i64;
    (0..n)
        .map(|j| {
            let i = j + k;
            if i < 0 || i >= n {
                return None;
            }
            match (&fk[j as usize], &gk[i as usize]) {
                (Some(a), Some(b)) => Some(a.dot(&b.t().mapv(|v| v.conj())) * C64::from(s * dx)),
                _ => None,
            }
        })
        .collect()
}

/// The single sample f∗α_s(g*) at a node-aligned s.
pub fn crossed_sample(f: &ModuleElement, g: &ModuleElement, s: f64) -> Result<ModuleElement> {
    f.check_same(g)?;
    check_supports(f, g)?;
    let k = node_shift(&f.disc, s).ok_or_else(|| Error::Range(format!("s = {s} is not node-aligned")))?;
    Ok(f.with_kernels(crossed_kernels(f, g, k, lattice_step(&f.disc)?)))
}

/// Sup-norm decay profile without the threshold check.
pub fn crossed_decay(f: &ModuleElement, g: &ModuleElement, cfg: &CrossedConfig) -> Result<CrossedElement> {
    f.check_same(g)?;
    check_supports(f, g)?;
    let delta = lattice_step(&f.disc)?;
    let ks = shifts(&f.disc, cfg)?;
    let s: Vec<f64> = ks.iter().map(|&k| (k as f64 * delta).exp()).collect();
    let sup_norms: Vec<f64> = ks
        .iter()
        .map(|&k| {
            crossed_kernels(f, g, k, delta).iter().flatten().map(|m| m.iter().fold(0.0f64, |a, v| a.max(v.norm()))).fold(0.0, f64::max)
        })
        .collect();
    let peak = sup_norms.iter().cloned().fold(0.0, f64::max);
    let cut = cfg.fit_from * std::f64::consts::LN_2;
    let end = |small: bool| {
        let (xs, vs): (Vec<f64>, Vec<f64>) = s
            .iter()
            .zip(&sup_norms)
            .filter(|(s, _)| if small { s.ln() <= -cut } else { s.ln() >= cut })
            .map(|(s, v)| (*s, v / peak.max(f64::MIN_POSITIVE)))
            .unzip();
        if small {
            loglog_slope(&xs, &vs, 1e-13).slope
        } else {
            growth_decay(&xs, &vs)
        }
    };
    Ok(CrossedElement { shifts: ks, slope_small: end(true), slope_large: end(false), s, sup_norms })
}

/// Crossed element with its decay checked against cfg.q at both ends.
pub fn crossed_element(f: &ModuleElement, g: &ModuleElement, cfg: &CrossedConfig) -> Result<CrossedElement> {
    let c = crossed_decay(f, g, cfg)?;
    if c.slope_small < cfg.q || c.slope_large < cfg.q {
        return Err(Error::InsufficientDecay(format!(
            "slopes {:.2} (s→0) and {:.2} (s→∞) below {}",
            c.slope_small, c.slope_large, cfg.q
        )));
    }
    Ok(c)
}

/// π(∫ F_s λ_s ds/s) h with F_s = f∗α_s(g*), λ_s = s^{-p}U_s and the
/// trapezoid rule on the s-grid; compare with rank_one(f, g, h).
pub fn crossed_apply(f: &ModuleElement, g: &ModuleElement, h: &ModuleElement, cfg: &CrossedConfig) -> Result<ModuleElement> {
    f.check_same(g)?;
    f.check_same(h)?;
    check_supports(f, g)?;
    let delta = lattice_step(&f.disc)?;
    let dx = f.disc.grid.dx();
    let ks = shifts(&f.disc, cfg)?;
    let hk = h.kernels();
    let n = hk.len() as i64;
    let mut out: Vec<Option<Array2<C64>>> = vec![None; n as usize];
    for (idx, &k) in ks.iter().enumerate() {
        let s = (k as f64 * delta).exp();
        let mut w = cfg.stride as f64 * delta;
        if idx == 0 || idx + 1 == ks.len() {
            w *= 0.5;
        }
        for (j, fs) in crossed_kernels(f, g, k, delta).into_iter().enumerate() {
            let i = j as i64 + k;
            let (Some(fs), true) = (fs, i >= 0 && i < n) else { continue };
            let Some(hh) = &hk[i as usize] else { continue };
            let term = fs.dot(hh) * C64::from(w * dx / s);
            match &mut out[j] {
                Some(acc) => *acc += &term,
                slot => *slot = Some(term),
            }
        }
    }
    Ok(f.with_kernels(out))
}

/// Window ψ̃ = ψ/√P with P(s) = Σ_n δ ψ²(e^{nδ}s), so that the discrete
/// sum Σ_j δ ψ̃²(t_j s) is exactly 1 on the log lattice of step δ.
#[derive(Clone, Copy, Debug)]
pub struct LatticeWindow {
    pub psi: BumpProfile,
    pub delta: f64,
}

impl LatticeWindow {
    pub fn eval(&self, s: f64) -> f64 {
        let v = self.psi.eval(s);
        if v == 0.0 {
            return 0.0;
        }
        let (lo, hi) = (self.psi.lo.ln(), self.psi.hi.ln());
        let l = s.ln();
        let n0 = ((lo - l) / self.delta).ceil() as i64;
        let n1 = ((hi - l) / self.delta).floor() as i64;
        let p: f64 = (n0..=n1).map(|n| self.psi.eval((l + n as f64 * self.delta).exp()).powi(2)).sum::<f64>() * self.delta;
        v / p.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessConfig {
    /// resolved band |ξ| ∈ [lo, hi]; hi ≤ 0 means the Nyquist frequency
    pub band: (f64, f64),
    pub band_min: f64,
    pub delta: f64,
    pub decay_q: f64,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig { band: (4.0, 0.0), band_min: 0.5, delta: 0.1, decay_q: 6.0 }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub element: ModuleElement,
    pub gram: DiscreteOperator,
    pub min_eig_band: f64,
    pub min_eig_all: f64,
    pub distance_to_identity: f64,
    /// Fourier-coefficient decay slope of 1 − ⟨f|f⟩
    pub decay_slope: f64,
    pub certified: bool,
}

/// Â = F M F* in the unitary DFT basis, indices in FFT order.
pub fn fourier_matrix(op: &DiscreteOperator) -> Array2<C64> {
    let mut m = op.action();
    let n = m.nrows();
    let s = 1.0 / n as f64;
    for mut row in m.rows_mut() {
        let mut buf = row.to_vec();
        inverse_fft(&mut buf);
        row.assign(&ndarray::Array1::from(buf));
    }
    for mut col in m.columns_mut() {
        let mut buf = col.to_vec();
        forward_fft(&mut buf);
        col.assign(&ndarray::Array1::from(buf));
    }
    m.mapv_inplace(|v| v * s);
    m
}

fn min_eig(a: &Array2<C64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        let (p, q) = (a[[idx[i], idx[j]]], a[[idx[j], idx[i]]].conj());
        (p + q) * 0.5
    });
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Decay exponent of the largest Fourier coefficient of `op` in shells
/// max(|ξ_k|, |ξ_l|) ∈ [r, 1.25 r), r from `start` to the Nyquist frequency.
pub fn fourier_decay(op: &DiscreteOperator, start: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let a = fourier_matrix(op);
    let g = op.grid;
    let freq: Vec<f64> = (0..g.n).map(|k| g.freq(k).abs()).collect();
    let mut radii = Vec::new();
    let mut r = start;
    while r * 1.25 <= g.nyquist() + 1e-12 {
        radii.push(r);
        r *= 1.25;
    }
    let mut vals = vec![0.0f64; radii.len()];
    for ((k, l), v) in a.indexed_iter() {
        let m = freq[k].max(freq[l]);
        if let Some(i) = radii.iter().rposition(|&r| m >= r) {
            if m < radii[i] * 1.25 {
                vals[i] = vals[i].max(v.norm());
            }
        }
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1.0);
    let rel: Vec<f64> = vals.iter().map(|v| v / scale).collect();
    let slope = growth_decay(&radii, &rel);
    (radii, vals, slope)
}

/// Build f with f̂_t(x, ζ) = ψ̃(|ζ|)ρ(t) (ρ = 1 on t ≤ 1/2, 0 for t ≥ 1) plus
/// the optional smoothing part f_t = ψ̃(t)·h, and certify ⟨f|f⟩.
pub fn full_witness(
    psi: &BumpProfile,
    correction: Option<&Array2<C64>>,
    groupoid: GroupoidSpec,
    disc: &Discretization,
    cfg: &WitnessConfig,
) -> Result<Witness> {
    psi.validate()?;
    if psi.normalization != Normalization::Square || psi.scale == 0.0 {
        return Err(Error::Profile("full_witness needs ψ with ∫ψ² dt/t = 1".into()));
    }
    let win = LatticeWindow { psi: *psi, delta: lattice_step(disc)? };
    let rho = TimeProfile::cutoff();
    let fhat = move |_: f64, z: f64, t: f64| C64::from(win.eval(z.abs()) * rho.eval(t));
    let field = CustomField { fhat: Arc::new(fhat), phi: None, zeta_extent: psi.hi };
    let fam = KernelFamily::analytic(groupoid, AnalyticFamily::custom("witness", field), (disc.quad.t_min, disc.quad.t_max), Some(FamilyClass::J));
    let nodes = disc.nodes();
    let mut ks = drop_zeros(disc.kernels(&fam.to_nodal(&nodes, &disc.grid, disc.realization)?)?);
    if let Some(h) = correction {
        if h.dim() != (disc.grid.n, disc.grid.n) {
            return Err(Error::GridMismatch("correction kernel does not match the grid".into()));
        }
        for (k, &t) in ks.iter_mut().zip(&nodes) {
            let c = win.eval(t);
            if c != 0.0 {
                let add = h * C64::from(c);
                *k = Some(match k.take() {
                    Some(a) => a + add,
                    None => add,
                });
            }
        }
    }
    let nf = NodalFamily { grid: disc.grid, nodes, kernels: ks, realization: disc.realization };
    let element = ModuleElement::new(&KernelFamily::nodal(groupoid, nf, Some(FamilyClass::J)), *disc)?;
    let gram = inner_product(&element, &element)?;

    let a = fourier_matrix(&gram);
    let g = disc.grid;
    let hi = if cfg.band.1 > 0.0 { cfg.band.1 } else { g.nyquist() };
    let band: Vec<usize> = (0..g.n).filter(|&k| (cfg.band.0..=hi).contains(&g.freq(k).abs())).collect();
    let all: Vec<usize> = (0..g.n).collect();
    let min_eig_band = min_eig(&a, &band);
    let min_eig_all = min_eig(&a, &all);
    let rest = DiscreteOperator::identity(g).sub(&gram)?;
    let distance_to_identity = rest.spectral_norm();
    let (_, _, decay_slope) = fourier_decay(&rest, cfg.band.0);
    let certified = min_eig_band >= cfg.band_min && min_eig_all >= cfg.delta && decay_slope >= cfg.decay_q;
    Ok(Witness { element, gram, min_eig_band, min_eig_all, distance_to_identity, decay_slope, certified })
}

#[derive(Clone, Debug)]
pub struct Corner {
    pub q_part: DiscreteOperator,
    pub r_part: DiscreteOperator,
    pub probe_freqs: Vec<f64>,
    /// ‖R g_ξ‖/‖g_ξ‖ for Gaussian packets at the probe frequencies
    pub probe_norms: Vec<f64>,
    pub probe_slope: f64,
    pub fourier_slope: f64,
}

/// P = Q + R with Q = ⟨f|f⟩·P·⟨f|f⟩.
pub fn corner_decompose(p: &DiscreteOperator, w: &Witness) -> Result<Corner> {
    if !w.certified {
        return Err(Error::MissingCertificate(format!(
            "witness has min eigenvalue {:.3e}, band {:.3e}, decay slope {:.2}",
            w.min_eig_all, w.min_eig_band, w.decay_slope
        )));
    }
    let g = w.gram.grid;
    g.check_same(&p.grid)?;
    let e = w.gram.action();
    let q_part = DiscreteOperator::from_action(e.dot(&p.action()).dot(&e), g);
    let r_part = p.sub(&q_part)?;
    let mut probe_freqs = Vec::new();
    let mut f = 6.0;
    while f <= 0.8 * g.nyquist() {
        probe_freqs.push(f);
        f *= 1.25;
    }
    let width = 3.0;
    let probe_norms: Vec<f64> = probe_freqs
        .iter()
        .map(|&xi| {
            let v = packet(&g, 0.0, xi, width);
            r_part.apply(&v).map(|r| l2(&r) / l2(&v))
        })
        .collect::<Result<_>>()?;
    let probe_slope = growth_decay(&probe_freqs, &probe_norms);
    let (_, _, fourier_slope) = fourier_decay(&r_part, 4.0);
    Ok(Corner { q_part, r_part, probe_freqs, probe_norms, probe_slope, fourier_slope })
}
