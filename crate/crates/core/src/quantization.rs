//! Integral quantization P_f = ∫ tᵐ f_t dt/t, symbols, and the reference
//! Kohn–Nirenberg quantizer.

use nalgebra::DMatrix;
use rayon::prelude::*;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::Discretization;
use crate::dnc::GroupoidSpec;
use crate::error::{Error, Result};
use crate::family::{AnalyticFamily, FamilyClass, KernelFamily, Representation, SeparableTerm};
use crate::grid::GridSpec;
use crate::numeric::{smooth_step, CompositeRule};
use crate::operator::{l2, DiscreteOperator};
use crate::profile::{BumpProfile, Envelope, FreqProfile, Normalization, TimeProfile};
use crate::realize::{inverse_fft, Realization};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// |ξ|^degree · c(x, sign ξ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousTerm {
    pub degree: i32,
    pub plus: Envelope,
    pub minus: Envelope,
}

impl HomogeneousTerm {
    pub fn eval(&self, x: f64, xi: f64) -> C64 {
        let c = if xi >= 0.0 { self.plus.eval(x) } else { self.minus.eval(x) };
        if self.degree == 0 {
            c
        } else {
            c * xi.abs().powi(self.degree)
        }
    }

    /// True when |ξ|^d c(x, ±) is a polynomial in ξ (no singularity at 0).
    fn is_polynomial(&self, half_width: f64) -> bool {
        if self.degree < 0 {
            return false;
        }
        let sign = if self.degree % 2 == 0 { 1.0 } else { -1.0 };
        (0..=16).all(|k| {
            let x = -half_width + 2.0 * half_width * k as f64 / 16.0;
            (self.minus.eval(x) - self.plus.eval(x) * sign).norm() < 1e-14
        })
    }
}

/// Polyhomogeneous symbol a = χ_high(|ξ|) Σ_k a_{m−k}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSymbol {
    pub order: i32,
    pub terms: Vec<HomogeneousTerm>,
    /// χ_high vanishes for |ξ| ≤ cutoff/2 and equals 1 for |ξ| ≥ cutoff.
    pub low_freq_cutoff: f64,
}

impl ClassicalSymbol {
    pub fn homogeneous(degree: i32, plus: Envelope, minus: Envelope, cutoff: f64) -> Self {
        ClassicalSymbol { order: degree, terms: vec![HomogeneousTerm { degree, plus, minus }], low_freq_cutoff: cutoff }
    }

    /// Order-0 symbol with principal part σ₀(x, ±).
    pub fn order_zero(plus: Envelope, minus: Envelope, cutoff: f64) -> Self {
        Self::homogeneous(0, plus, minus, cutoff)
    }

    pub fn chi_high(&self, r: f64) -> f64 {
        let c = self.low_freq_cutoff;
        if c <= 0.0 {
            1.0
        } else {
            1.0 - smooth_step((c - r) / (0.5 * c))
        }
    }

    pub fn eval(&self, x: f64, xi: f64) -> C64 {
        let chi = self.chi_high(xi.abs());
        if chi == 0.0 {
            return ZERO;
        }
        self.terms.iter().map(|t| t.eval(x, xi)).sum::<C64>() * chi
    }

    /// σ₀(x, ±): the degree-`order` coefficient.
    pub fn principal(&self, x: f64, xi: f64) -> C64 {
        self.terms.iter().filter(|t| t.degree == self.order).map(|t| t.eval(x, xi.signum())).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.iter().any(|t| t.degree > self.order) {
            return Err(Error::SymbolOrder(self.terms.iter().map(|t| t.degree).max().unwrap_or(0)));
        }
        Ok(())
    }
}

/// Discretized P_f with Cauchy monitoring data.
#[derive(Clone, Debug)]
pub struct Quantized {
    pub op: DiscreteOperator,
    pub tail_ratio: f64,
}

fn check_j(f: &KernelFamily) -> Result<()> {
    if f.is_zero() {
        return Ok(());
    }
    match f.claimed_class {
        Some(FamilyClass::J) | Some(FamilyClass::J0) => Ok(()),
        other => Err(Error::Class(format!(
            "quantization needs a family tagged J, got {}",
            other.map(|c| c.to_string()).unwrap_or_else(|| "none".into())
        ))),
    }
}

/// Σ_j w_j t_jᵐ f_{t_j} on the discretization's nodes, one kernel at a time.
pub fn quantize_family(f: &KernelFamily, m: u32, disc: &Discretization) -> Result<Quantized> {
    check_j(f)?;
    let (nodes, weights) = disc.quad.nodes_weights();
    let n = disc.grid.n;
    let mut sum = Array2::<C64>::zeros((n, n));
    let mut mass = Vec::with_capacity(nodes.len());
    let nodal = match &f.repr {
        Representation::Nodal(_) => Some(disc.kernels(&disc.materialize(f)?)?),
        _ => None,
    };
    let end = match &f.repr {
        Representation::Analytic(a) if a.is_zero() => 0.0,
        Representation::Analytic(a) => a.t_support_end(),
        _ => f64::INFINITY,
    };
    // kernels are built in parallel chunks and summed in node order, so the
    // result does not depend on the thread count
    let chunk = rayon::current_num_threads().max(1);
    for lo in (0..nodes.len()).step_by(chunk) {
        let hi = (lo + chunk).min(nodes.len());
        let ks: Vec<Option<Array2<C64>>> = (lo..hi)
            .into_par_iter()
            .map(|j| match &nodal {
                Some(ks) => Ok(ks[j].clone()),
                None if nodes[j] >= end => Ok(None),
                None => f.kernel_at(nodes[j], &disc.grid, disc.realization).map(Some),
            })
            .collect::<Result<_>>()?;
        for (j, k) in (lo..hi).zip(ks) {
            let Some(k) = k else {
                mass.push(0.0);
                continue;
            };
            let c = weights[j] * nodes[j].powi(m as i32);
            sum.scaled_add(C64::from(c), &k);
            mass.push(c * k.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    let total: f64 = mass.iter().sum();
    // Truncation is judged on the band-limited kernels: a Galerkin kernel at
    // t ≪ Δx is alias content of the basis, not mass of the family.
    if nodal.is_none() && disc.realization != Realization::Spectral {
        let last = nodes.len() - 1;
        for j in [0, last] {
            if mass[j] > 0.0 {
                let k = f.kernel_at(nodes[j], &disc.grid, Realization::Spectral)?;
                mass[j] = weights[j] * nodes[j].powi(m as i32) * k.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            }
        }
    }
    let tail = mass[0] + mass[mass.len() - 1];
    let tail_ratio = if total > 0.0 { tail / total } else { 0.0 };
    if tail_ratio > 1e-8 {
        return Err(Error::Tail(format!(
            "end-node mass ratio {tail_ratio:.3e} on [{}, {}]",
            disc.quad.t_min, disc.quad.t_max
        )));
    }
    Ok(Quantized { op: DiscreteOperator::from_kernel(sum, disc.grid), tail_ratio })
}

/// Partial sums ∫_s^{t_max} tᵐ f_t g dt/t for s running down the nodes,
/// with the Cauchy increments ‖S(s_j) − S(s_{j+1})‖ / ‖g‖.
pub struct PartialSums {
    pub s: Vec<f64>,
    pub increments: Vec<f64>,
    pub last: Vec<C64>,
}

pub fn partial_sums(f: &KernelFamily, m: u32, disc: &Discretization, g: &[C64]) -> Result<PartialSums> {
    check_j(f)?;
    let (nodes, weights) = disc.quad.nodes_weights();
    let fam = disc.materialize(f)?;
    let ks = disc.kernels(&fam)?;
    let dx = disc.grid.dx();
    let gv = ndarray::Array1::from(g.to_vec());
    let gn = l2(g);
    let mut acc = vec![ZERO; g.len()];
    let mut s = Vec::new();
    let mut increments = Vec::new();
    for j in (0..nodes.len()).rev() {
        let mut inc = 0.0;
        if let Some(k) = &ks[j] {
            let y = k.dot(&gv);
            let c = weights[j] * nodes[j].powi(m as i32) * dx;
            let d: Vec<C64> = y.iter().map(|v| v * c).collect();
            inc = l2(&d) / gn;
            for (a, b) in acc.iter_mut().zip(&d) {
                *a += b;
            }
        }
        s.push(nodes[j]);
        increments.push(inc);
    }
    Ok(PartialSums { s, increments, last: acc })
}

/// ∫ sᵐ F(s) ds/s over (0, ∞) for F supported in |s| ≤ s_max.
fn mellin(m: i32, s_max: f64, f: impl Fn(f64) -> C64) -> C64 {
    // profiles live within a few log-units of s_max; refine there
    let (lo, hi) = ((1e-12f64).ln(), s_max.ln());
    let mid = hi - 4.0;
    let mut acc = ZERO;
    for rule in [CompositeRule::new(lo, mid, 160, 16), CompositeRule::new(mid, hi, 400, 16)] {
        for (&l, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = l.exp();
            acc += f(s) * (s.powi(m) * w);
        }
    }
    acc
}

/// σ(x, ξ) = ∫ tᵐ f̂₀(x, tξ) dt/t by the substitution s = t|ξ|.
pub fn principal_symbol(f: &KernelFamily, m: u32, xs: &[f64], xis: &[f64], floor: f64) -> Result<Vec<Vec<C64>>> {
    check_j(f)?;
    if let Some(&bad) = xis.iter().find(|x| x.abs() < floor) {
        return Err(Error::Floor(format!("|ξ| = {} below the floor {floor}", bad.abs())));
    }
    if f.is_zero() {
        return Ok(vec![vec![ZERO; xis.len()]; xs.len()]);
    }
    let a = f
        .analytic_ref()
        .ok_or_else(|| Error::Domain("principal_symbol needs a closed-form t = 0 fiber".into()))?;
    let s_max = a.zeta_extent().max(1.0) * 1.01;
    Ok(xs
        .iter()
        .map(|&x| {
            xis.iter()
                .map(|&xi| {
                    let sg = xi.signum();
                    mellin(m as i32, s_max, |s| a.fhat(x, sg * s, 0.0)) * xi.abs().powi(-(m as i32))
                })
                .collect()
        })
        .collect())
}

/// a(x, ξ) = ∫ tᵐ φ̂(x, tξ, t) dt/t by quadrature in log t.
pub fn proof_symbol(a: &AnalyticFamily, m: u32, x: f64, xi: f64) -> C64 {
    let t_hi = a.t_support_end().min(1e3);
    let z = a.zeta_extent().max(1.0);
    let t_top = if xi == 0.0 { t_hi } else { t_hi.min(1.01 * z / xi.abs()) };
    let rule = CompositeRule::new((1e-12f64).ln(), t_top.ln(), 320, 16);
    let mut acc = ZERO;
    for (&l, &w) in rule.nodes.iter().zip(&rule.weights) {
        let t = l.exp();
        acc += a.fhat(x, t * xi, t) * (t.powi(m as i32) * w);
    }
    acc
}

/// Table a(x_i, ξ_k) of the proof symbol; separable families cost one
/// radial quadrature per (term, ξ).
pub fn proof_symbol_table(a: &AnalyticFamily, m: u32, xs: &[f64], xis: &[f64]) -> Vec<Vec<C64>> {
    if a.custom.is_some() {
        return xs.iter().map(|&x| xis.iter().map(|&xi| proof_symbol(a, m, x, xi)).collect()).collect();
    }
    let mut out = vec![vec![ZERO; xis.len()]; xs.len()];
    for term in &a.terms {
        let single = AnalyticFamily {
            name: String::new(),
            terms: vec![SeparableTerm { envelope: Envelope::one(), ..*term }],
            custom: None,
            dilation: a.dilation,
            weight: a.weight,
        };
        let radial: Vec<C64> = xis.iter().map(|&xi| proof_symbol(&single, m, 0.0, xi)).collect();
        for (row, &x) in out.iter_mut().zip(xs) {
            let e = term.envelope.eval(x);
            for (v, r) in row.iter_mut().zip(&radial) {
                *v += e * r;
            }
        }
    }
    out
}

/// Kohn–Nirenberg matrix (Pg)(x_i) = (2π)^{-1} Σ e^{ix_iξ} a(x_i, ξ) ĝ(ξ) Δξ.
pub fn kn_quantize_fn<A: Fn(f64, f64) -> C64>(grid: &GridSpec, a: A) -> DiscreteOperator {
    let n = grid.n;
    let mut m = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let x = grid.x(i);
        let mut row: Vec<C64> = (0..n)
            .map(|k| {
                if k == n / 2 {
                    let xi = grid.nyquist();
                    0.5 * (a(x, xi) + a(x, -xi))
                } else {
                    a(x, grid.freq(k))
                }
            })
            .collect();
        inverse_fft(&mut row);
        for j in 0..n {
            m[[i, j]] = row[(i + n - j) % n] / n as f64;
        }
    }
    DiscreteOperator::from_action(m, *grid)
}

/// Symbol of a grid operator at node i: (P e_ξ)(x_i) / e_ξ(x_i).
pub fn recovered_symbol(op: &DiscreteOperator, i: usize, xi: f64) -> C64 {
    let a = op.action();
    let g = op.grid;
    (0..g.n).map(|j| a[[i, j]] * C64::from_polar(1.0, xi * (g.x(j) - g.x(i)))).sum()
}

/// Σ_j w_j t_jᵐ f̂(x, t_j ξ, t_j): the continuum symbol on the same t-nodes
/// a quantization uses, so t-quadrature error cancels in comparisons.
pub fn nodal_symbol(a: &AnalyticFamily, m: u32, nodes: &[f64], weights: &[f64], x: f64, xi: f64) -> C64 {
    nodes.iter().zip(weights).map(|(&t, &w)| a.fhat(x, t * xi, t) * (w * t.powi(m as i32))).sum()
}

/// KN(a) for the proof symbol of an analytic family, via one table.
pub fn kn_proof_operator(a: &AnalyticFamily, m: u32, grid: &GridSpec) -> DiscreteOperator {
    let n = grid.n;
    let mut xis = grid.freqs();
    xis.push(-grid.nyquist());
    let tab = proof_symbol_table(a, m, &grid.xs(), &xis);
    let mut out = Array2::<C64>::zeros((n, n));
    for (i, t) in tab.iter().enumerate() {
        let mut row: Vec<C64> = (0..n).map(|k| if k == n / 2 { 0.5 * (t[k] + t[n]) } else { t[k] }).collect();
        inverse_fft(&mut row);
        for j in 0..n {
            out[[i, j]] = row[(i + n - j) % n] / n as f64;
        }
    }
    DiscreteOperator::from_action(out, *grid)
}

pub fn kn_quantize(a: &ClassicalSymbol, grid: &GridSpec) -> Result<DiscreteOperator> {
    a.validate()?;
    if a.low_freq_cutoff <= 0.0 && a.terms.iter().any(|t| !t.is_polynomial(grid.half_width)) {
        return Err(Error::Cutoff("symbol is singular at ξ = 0 and has no low-frequency cutoff".into()));
    }
    Ok(kn_quantize_fn(grid, |x, xi| a.eval(x, xi)))
}

/// Family with f̂(x, ζ, t) = σ₀(x, sign ζ)·ψ(|ζ|)·ρ(t), tagged J.
pub fn symbol_to_family(
    groupoid: GroupoidSpec,
    plus: Envelope,
    minus: Envelope,
    psi: BumpProfile,
    t_range: (f64, f64),
) -> Result<KernelFamily> {
    psi.validate()?;
    if psi.normalization != Normalization::Linear {
        return Err(Error::Profile("symbol_to_family needs ∫ψ dt/t = 1".into()));
    }
    let mut terms = Vec::new();
    let one = C64::new(1.0, 0.0);
    for (env, (p, q)) in [(plus, (one, ZERO)), (minus, (ZERO, one))] {
        if !env.is_zero() {
            terms.push(SeparableTerm { envelope: env, freq: FreqProfile::window(psi, p, q), time: TimeProfile::cutoff() });
        }
    }
    let fam = AnalyticFamily::new("symbol", terms);
    Ok(KernelFamily::analytic(groupoid, fam, t_range, Some(FamilyClass::J)))
}

/// One homogeneous term a_{k+m} sampled on (x, ξ), with its homogeneity ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticTerm {
    pub k: usize,
    pub degree: i32,
    pub values: Vec<Vec<C64>>,
    /// max over samples of |a(x,2ξ)/a(x,ξ)·2^{k+m} − 1|
    pub homogeneity_error: f64,
}

/// Taylor fit φ̂(x, ζ, u) ≈ Σ_k b_k(x, ζ) uᵏ over dyadic u, then
/// a_{k+m}(x, ξ) = ∫ b_k(x, tξ) t^{k+m} dt/t by direct log-t quadrature.
pub fn asymptotic_symbol(f: &KernelFamily, m: u32, kmax: usize, xs: &[f64], xis: &[f64]) -> Result<Vec<AsymptoticTerm>> {
    check_j(f)?;
    let nterms = kmax + 1;
    if f.is_zero() {
        return Ok((0..nterms)
            .map(|k| AsymptoticTerm {
                k,
                degree: -(k as i32) - m as i32,
                values: vec![vec![ZERO; xis.len()]; xs.len()],
                homogeneity_error: 0.0,
            })
            .collect());
    }
    let a = f.analytic_ref().ok_or_else(|| Error::Domain("asymptotic_symbol needs a closed-form field".into()))?;
    let us: Vec<f64> = (1..=8).map(|j| 2f64.powi(-j)).collect();
    let design = DMatrix::from_fn(us.len(), nterms, |i, j| us[i].powi(j as i32));
    let pinv = design.clone().pseudo_inverse(1e-14).map_err(|e| Error::UnstableFit(e.to_string()))?;
    let fit = |x: f64, z: f64| -> Result<Vec<C64>> {
        let ys: Vec<C64> = us.iter().map(|&u| a.fhat(x, z, u)).collect();
        let mut b = vec![ZERO; nterms];
        for (k, bk) in b.iter_mut().enumerate() {
            for (i, y) in ys.iter().enumerate() {
                *bk += y * pinv[(k, i)];
            }
        }
        let mut res = 0.0;
        let mut norm = 0.0;
        for (i, y) in ys.iter().enumerate() {
            let p: C64 = (0..nterms).map(|k| b[k] * design[(i, k)]).sum();
            res += (p - y).norm_sqr();
            norm += y.norm_sqr();
        }
        if norm > 0.0 && (res / norm).sqrt() > 1e-8 {
            return Err(Error::UnstableFit(format!(
                "u-Taylor fit of degree {kmax} at (x, ζ) = ({x}, {z}) leaves relative residual {:.3e}",
                (res / norm).sqrt()
            )));
        }
        Ok(b)
    };
    let zext = a.zeta_extent().max(1.0) * 1.01;
    let term_at = |x: f64, xi: f64| -> Result<Vec<C64>> {
        let rule = CompositeRule::new((1e-12f64).ln(), (zext / xi.abs()).ln(), 160, 16);
        let mut acc = vec![ZERO; nterms];
        for (&l, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = l.exp();
            let b = fit(x, t * xi)?;
            for k in 0..nterms {
                acc[k] += b[k] * (t.powi(k as i32 + m as i32) * w);
            }
        }
        Ok(acc)
    };
    let mut values = vec![vec![vec![ZERO; xis.len()]; xs.len()]; nterms];
    let mut herr = vec![0.0f64; nterms];
    for (ix, &x) in xs.iter().enumerate() {
        for (iz, &xi) in xis.iter().enumerate() {
            let v1 = term_at(x, xi)?;
            let v2 = term_at(x, 2.0 * xi)?;
            for k in 0..nterms {
                values[k][ix][iz] = v1[k];
                let deg = -(k as i32) - m as i32;
                if v1[k].norm() > 1e-12 {
                    let r = (v2[k] / v1[k] / 2f64.powi(deg) - 1.0).norm();
                    herr[k] = herr[k].max(r);
                }
            }
        }
    }
    let out: Vec<AsymptoticTerm> = (0..nterms)
        .map(|k| AsymptoticTerm {
            k,
            degree: -(k as i32) - m as i32,
            values: std::mem::take(&mut values[k]),
            homogeneity_error: herr[k],
        })
        .collect();
    if let Some(t) = out.iter().find(|t| t.homogeneity_error > 0.01) {
        return Err(Error::UnstableFit(format!(
            "term k = {} fails the homogeneity check: error {:.3e}",
            t.k, t.homogeneity_error
        )));
    }
    Ok(out)
}

/// Gaussian wave packet w(x − x₀) e^{iξx} on the grid.
pub fn packet(grid: &GridSpec, x0: f64, xi: f64, width: f64) -> Vec<C64> {
    (0..grid.n)
        .map(|j| {
            let x = grid.x(j);
            let d = grid.wrap(x - x0);
            C64::from_polar((-(d / width).powi(2) / 2.0).exp(), xi * x)
        })
        .collect()
}

/// Symbol estimate ⟨g, P g⟩ / ⟨g, g⟩ for the packet g centred at (x₀, ξ).
pub fn probe_symbol(op: &DiscreteOperator, x0: f64, xi: f64, width: f64) -> Result<C64> {
    let g = packet(&op.grid, x0, xi, width);
    let pg = op.apply(&g)?;
    let num: C64 = g.iter().zip(&pg).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = g.iter().map(|a| a.norm_sqr()).sum();
    Ok(num / den)
}

/// ‖P g_{2ω}‖ / ‖P g_ω‖ for packets at frequencies ω and 2ω.
pub fn dyadic_ratio(op: &DiscreteOperator, x0: f64, omega: f64, width: f64) -> Result<f64> {
    let a = l2(&op.apply(&packet(&op.grid, x0, omega, width))?);
    let b = l2(&op.apply(&packet(&op.grid, x0, 2.0 * omega, width))?);
    Ok(a / b)
}

/// Window ψ normalized for ∫ψ dt/t = 1 on (1.05, 1.95).
pub fn default_psi() -> BumpProfile {
    BumpProfile::psi_window(Normalization::Linear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_smooth_step() {
        let a = ClassicalSymbol::order_zero(Envelope::one(), Envelope::one(), 2.0);
        assert_eq!(a.eval(0.0, 0.9), ZERO);
        assert_eq!(a.eval(0.0, 2.5), C64::new(1.0, 0.0));
        let v = a.eval(0.0, 1.5).re;
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn polynomial_detection() {
        let i = Envelope::constant(C64::new(0.0, 1.0));
        let mi = Envelope::constant(C64::new(0.0, -1.0));
        assert!(HomogeneousTerm { degree: 1, plus: i, minus: mi }.is_polynomial(4.0));
        assert!(!HomogeneousTerm { degree: 1, plus: i, minus: i }.is_polynomial(4.0));
        assert!(HomogeneousTerm { degree: 0, plus: Envelope::one(), minus: Envelope::one() }.is_polynomial(4.0));
    }
}
