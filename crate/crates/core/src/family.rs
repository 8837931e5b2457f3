//! Kernel families t ↦ f_t on the adiabatic pair groupoid, stored in normal
//! coordinates φ(x, U, t) = t·f_t(x, x − tU).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::dnc::GroupoidSpec;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::profile::{Envelope, FreqProfile, TimeProfile};
use crate::realize::{galerkin_symbol, inverse_fft, spectral_offsets, Realization};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyClass {
    #[serde(rename = "S_c")]
    Sc,
    J0,
    J,
}

impl fmt::Display for FamilyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyClass::Sc => "S_c",
            FamilyClass::J0 => "J0",
            FamilyClass::J => "J",
        })
    }
}

/// One separable term c(x)·A(ζ)·B(t) of φ̂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    pub envelope: Envelope,
    pub freq: FreqProfile,
    pub time: TimeProfile,
}

pub type FieldFn = Arc<dyn Fn(f64, f64, f64) -> C64 + Send + Sync>;

/// Closure-defined field: φ̂(x, ζ, t) and optionally φ(x, U, t).
#[derive(Clone)]
pub struct CustomField {
    pub fhat: FieldFn,
    pub phi: Option<FieldFn>,
    pub zeta_extent: f64,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField").field("zeta_extent", &self.zeta_extent).finish()
    }
}

/// Closed-form family. With dilation u and weight w the represented field is
/// φ̂(x,ζ,t) = w·u·Σ c(x)A(uζ)B(ut) and φ(x,U,t) = w·Σ c(x)Ǎ(U/u)B(ut).
#[derive(Clone, Debug)]
pub struct AnalyticFamily {
    pub name: String,
    pub terms: Vec<SeparableTerm>,
    pub custom: Option<CustomField>,
    pub dilation: f64,
    pub weight: f64,
}

impl AnalyticFamily {
    pub fn new(name: impl Into<String>, terms: Vec<SeparableTerm>) -> Self {
        AnalyticFamily { name: name.into(), terms, custom: None, dilation: 1.0, weight: 1.0 }
    }

    pub fn custom(name: impl Into<String>, field: CustomField) -> Self {
        AnalyticFamily { name: name.into(), terms: vec![], custom: Some(field), dilation: 1.0, weight: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.weight == 0.0 || (self.custom.is_none() && self.terms.iter().all(|t| t.envelope.is_zero()))
    }

    pub fn fhat(&self, x: f64, z: f64, t: f64) -> C64 {
        let u = self.dilation;
        let mut acc = ZERO;
        for term in &self.terms {
            let b = term.time.eval(u * t);
            if b == 0.0 {
                continue;
            }
            acc += term.envelope.eval(x) * term.freq.eval(u * z) * b;
        }
        if let Some(c) = &self.custom {
            acc += (c.fhat)(x, u * z, u * t);
        }
        acc * (self.weight * u)
    }

    pub fn phi(&self, x: f64, uu: f64, t: f64) -> Result<C64> {
        let u = self.dilation;
        let mut acc = ZERO;
        for term in &self.terms {
            let b = term.time.eval(u * t);
            if b == 0.0 {
                continue;
            }
            acc += term.envelope.eval(x) * term.freq.inverse(uu / u) * b;
        }
        if let Some(c) = &self.custom {
            match &c.phi {
                Some(p) => acc += p(x, uu / u, u * t),
                None => return Err(Error::Domain(format!("family `{}` has no normal-coordinate formula", self.name))),
            }
        }
        Ok(acc * self.weight)
    }

    /// Largest |ζ| carrying mass of φ̂ at any t.
    pub fn zeta_extent(&self) -> f64 {
        let mut z: f64 = 0.0;
        for term in &self.terms {
            z = z.max(term.freq.zeta_extent());
        }
        if let Some(c) = &self.custom {
            z = z.max(c.zeta_extent);
        }
        z / self.dilation
    }

    /// Largest t at which some term is nonzero.
    pub fn t_support_end(&self) -> f64 {
        if self.custom.is_some() {
            return f64::INFINITY;
        }
        self.terms.iter().map(|t| t.time.support_end()).fold(0.0, f64::max) / self.dilation
    }
}

/// Dense normal-coordinate samples, data laid out [t][x][U].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub ts: Vec<f64>,
    pub data: Vec<C64>,
}

impl SampledField {
    pub fn new(xs: Vec<f64>, us: Vec<f64>, ts: Vec<f64>, data: Vec<C64>) -> Result<Self> {
        for (name, g) in [("x", &xs), ("U", &us), ("t", &ts)] {
            if g.is_empty() || g.windows(2).any(|p| !(p[0] < p[1])) {
                return Err(Error::Format(format!("{name}-grid must be nonempty and strictly increasing")));
            }
        }
        if data.len() != xs.len() * us.len() * ts.len() {
            return Err(Error::Format(format!(
                "payload has {} values, header implies {}",
                data.len(),
                xs.len() * us.len() * ts.len()
            )));
        }
        Ok(SampledField { xs, us, ts, data })
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> C64>(xs: Vec<f64>, us: Vec<f64>, ts: Vec<f64>, f: F) -> Self {
        let mut data = Vec::with_capacity(xs.len() * us.len() * ts.len());
        for &t in &ts {
            for &x in &xs {
                for &u in &us {
                    data.push(f(x, u, t));
                }
            }
        }
        SampledField { xs, us, ts, data }
    }

    pub fn index(&self, it: usize, ix: usize, iu: usize) -> usize {
        (it * self.xs.len() + ix) * self.us.len() + iu
    }

    pub fn at(&self, it: usize, ix: usize, iu: usize) -> C64 {
        self.data[self.index(it, ix, iu)]
    }

    pub fn peak(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Cubic Lagrange interpolation in U at fixed (t, x) node; zero outside the U-grid.
    pub fn interp_u(&self, it: usize, ix: usize, u: f64) -> C64 {
        let us = &self.us;
        let n = us.len();
        if u < us[0] || u > us[n - 1] {
            return ZERO;
        }
        let j = match us.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
            Ok(j) => return self.at(it, ix, j),
            Err(j) => j,
        };
        if n < 4 {
            let (a, b) = (j - 1, j);
            let s = (u - us[a]) / (us[b] - us[a]);
            return self.at(it, ix, a) * (1.0 - s) + self.at(it, ix, b) * s;
        }
        let lo = j.saturating_sub(2).min(n - 4);
        let mut acc = ZERO;
        for a in lo..lo + 4 {
            let mut l = 1.0;
            for b in lo..lo + 4 {
                if a != b {
                    l *= (u - us[b]) / (us[a] - us[b]);
                }
            }
            acc += self.at(it, ix, a) * l;
        }
        acc
    }
}

/// Kernel matrices K_t(x_i, x_j) realized on a grid at a set of t nodes.
/// Outside the stored node range the family is extended by zero.
#[derive(Clone, Debug)]
pub struct NodalFamily {
    pub grid: GridSpec,
    pub nodes: Vec<f64>,
    pub kernels: Vec<Option<Array2<C64>>>,
    pub realization: Realization,
}

impl NodalFamily {
    pub fn find(&self, t: f64) -> Option<usize> {
        self.nodes.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs())
    }
}

#[derive(Clone, Debug)]
pub enum Representation {
    Analytic(AnalyticFamily),
    Sampled(SampledField),
    Nodal(NodalFamily),
}

#[derive(Clone, Debug)]
pub struct KernelFamily {
    pub groupoid: GroupoidSpec,
    pub repr: Representation,
    pub t_range: (f64, f64),
    pub support_radius_x: f64,
    pub support_radius_u: f64,
    pub claimed_class: Option<FamilyClass>,
}

fn zero_matrix(n: usize) -> Array2<C64> {
    Array2::zeros((n, n))
}

impl KernelFamily {
    pub fn analytic(
        groupoid: GroupoidSpec,
        fam: AnalyticFamily,
        t_range: (f64, f64),
        claimed_class: Option<FamilyClass>,
    ) -> Self {
        let l = groupoid.half_width;
        let support_radius_x = fam.terms.iter().map(|t| envelope_radius(&t.envelope, l)).fold(0.0, f64::max);
        let support_radius_x = if fam.custom.is_some() { l } else { support_radius_x.max(f64::MIN_POSITIVE) };
        let mut ru: f64 = fam.terms.iter().map(|t| profile_radius(&t.freq)).fold(0.0, f64::max);
        if fam.custom.is_some() {
            ru = ru.max(30.0);
        }
        let support_radius_u = (ru * fam.dilation).max(f64::MIN_POSITIVE);
        KernelFamily {
            groupoid,
            repr: Representation::Analytic(fam),
            t_range,
            support_radius_x,
            support_radius_u,
            claimed_class,
        }
    }

    pub fn zero(groupoid: GroupoidSpec, t_range: (f64, f64)) -> Self {
        let mut f = Self::analytic(groupoid, AnalyticFamily::new("zero", vec![]), t_range, Some(FamilyClass::J0));
        f.support_radius_x = f64::MIN_POSITIVE;
        f.support_radius_u = f64::MIN_POSITIVE;
        f
    }

    pub fn nodal(groupoid: GroupoidSpec, fam: NodalFamily, claimed_class: Option<FamilyClass>) -> Self {
        let lo = fam.nodes.first().copied().unwrap_or(1.0);
        let hi = fam.nodes.last().copied().unwrap_or(1.0);
        let mut f = KernelFamily {
            groupoid,
            repr: Representation::Nodal(fam),
            t_range: (lo, hi),
            support_radius_x: groupoid.half_width,
            support_radius_u: 0.0,
            claimed_class,
        };
        f.support_radius_u = f.measured_support_u();
        f
    }

    pub fn sampled(groupoid: GroupoidSpec, field: SampledField, claimed_class: Option<FamilyClass>) -> Self {
        let t_range = (field.ts[0], *field.ts.last().unwrap());
        let peak = field.peak();
        let mut rx: f64 = 0.0;
        let mut ru: f64 = 0.0;
        for it in 0..field.ts.len() {
            for (ix, &x) in field.xs.iter().enumerate() {
                for (iu, &u) in field.us.iter().enumerate() {
                    if field.at(it, ix, iu).norm() > 1e-12 * peak {
                        rx = rx.max(x.abs());
                        ru = ru.max(u.abs());
                    }
                }
            }
        }
        KernelFamily {
            groupoid,
            repr: Representation::Sampled(field),
            t_range,
            support_radius_x: rx.max(f64::MIN_POSITIVE),
            support_radius_u: ru.max(f64::MIN_POSITIVE),
            claimed_class,
        }
    }

    pub fn analytic_ref(&self) -> Option<&AnalyticFamily> {
        match &self.repr {
            Representation::Analytic(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Representation::Analytic(a) => a.is_zero(),
            Representation::Sampled(s) => s.peak() == 0.0,
            Representation::Nodal(n) => n.kernels.iter().flatten().all(|k| k.iter().all(|v| *v == ZERO)),
        }
    }

    pub fn with_class(mut self, c: Option<FamilyClass>) -> Self {
        self.claimed_class = c;
        self
    }

    /// U-radius measured from realized kernels: max over nodes of
    /// (kernel radius)/t, with periodic wrap for spectral realizations.
    fn measured_support_u(&self) -> f64 {
        let Representation::Nodal(n) = &self.repr else { return self.support_radius_u };
        let g = n.grid;
        let mut r: f64 = 0.0;
        for (t, k) in n.nodes.iter().zip(&n.kernels) {
            let Some(k) = k else { continue };
            let peak = k.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            if peak == 0.0 {
                continue;
            }
            for ((i, j), v) in k.indexed_iter() {
                if v.norm() > 1e-12 * peak {
                    let d = g.x(i) - g.x(j);
                    let d = if n.realization.is_periodic() { g.wrap(d) } else { d };
                    r = r.max(d.abs() / t);
                }
            }
        }
        r.max(f64::MIN_POSITIVE)
    }

    /// Kernel matrix at a single t (kernel values; compose with weight Δx).
    pub fn kernel_at(&self, t: f64, grid: &GridSpec, how: Realization) -> Result<Array2<C64>> {
        match &self.repr {
            Representation::Analytic(a) => realize_analytic(a, t, grid, how),
            Representation::Nodal(n) => {
                n.grid.check_same(grid)?;
                match n.find(t) {
                    Some(i) => Ok(n.kernels[i].clone().unwrap_or_else(|| zero_matrix(grid.n))),
                    None if t < n.nodes[0] || t > *n.nodes.last().unwrap() => Ok(zero_matrix(grid.n)),
                    None => Err(Error::GridMismatch(format!("t = {t} is not a node of the nodal family"))),
                }
            }
            Representation::Sampled(s) => realize_sampled(s, t, grid),
        }
    }

    /// Kernels at every quadrature node; `None` marks an identically zero node.
    pub fn kernels_on(&self, nodes: &[f64], grid: &GridSpec, how: Realization) -> Result<Vec<Option<Array2<C64>>>> {
        if let Representation::Nodal(n) = &self.repr {
            n.grid.check_same(grid)?;
            return nodes
                .iter()
                .map(|&t| match n.find(t) {
                    Some(i) => Ok(n.kernels[i].clone()),
                    None if t < n.nodes[0] || t > *n.nodes.last().unwrap() => Ok(None),
                    None => Err(Error::GridMismatch(format!("t = {t} is not a node of the nodal family"))),
                })
                .collect();
        }
        let end = match &self.repr {
            Representation::Analytic(a) if a.is_zero() => return Ok(vec![None; nodes.len()]),
            Representation::Analytic(a) => a.t_support_end(),
            _ => f64::INFINITY,
        };
        nodes
            .iter()
            .map(|&t| if t >= end { Ok(None) } else { self.kernel_at(t, grid, how).map(Some) })
            .collect()
    }

    /// Materialize on quadrature nodes.
    pub fn to_nodal(&self, nodes: &[f64], grid: &GridSpec, how: Realization) -> Result<KernelFamily> {
        let kernels = self.kernels_on(nodes, grid, how)?;
        let how = match &self.repr {
            Representation::Nodal(n) => n.realization,
            _ => how,
        };
        let nf = NodalFamily { grid: *grid, nodes: nodes.to_vec(), kernels, realization: how };
        Ok(KernelFamily::nodal(self.groupoid, nf, self.claimed_class))
    }

    /// α_u on families: (α_u f)_t = u^p f_{ut}; normal coordinates φ(x, U/u, ut).
    pub fn alpha(&self, u: f64) -> Result<KernelFamily> {
        if !(u > 0.0) {
            return Err(Error::Domain(format!("scaling parameter {u} must be positive")));
        }
        self.rescale(u, 1.0)
    }

    /// Gauge unitary (U_s f)_t = f_{st} = s^{-p}(α_s f)_t.
    pub fn gauge_raw(&self, s: f64) -> Result<KernelFamily> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("gauge parameter {s} must be positive")));
        }
        self.rescale(s, 1.0 / s)
    }

    fn rescale(&self, u: f64, w: f64) -> Result<KernelFamily> {
        let mut out = self.clone();
        out.t_range = (self.t_range.0 / u, self.t_range.1 / u);
        out.support_radius_u = self.support_radius_u * u;
        match &mut out.repr {
            Representation::Analytic(a) => {
                a.dilation *= u;
                a.weight *= w;
            }
            Representation::Sampled(s) => {
                for x in s.us.iter_mut() {
                    *x *= u;
                }
                for t in s.ts.iter_mut() {
                    *t /= u;
                }
                if w != 1.0 {
                    for v in s.data.iter_mut() {
                        *v *= w;
                    }
                }
            }
            Representation::Nodal(n) => {
                for t in n.nodes.iter_mut() {
                    *t /= u;
                }
                for k in n.kernels.iter_mut().flatten() {
                    k.mapv_inplace(|v| v * (u * w));
                }
            }
        }
        Ok(out)
    }
}

fn envelope_radius(e: &Envelope, l: f64) -> f64 {
    match *e {
        Envelope::Gaussian { amp, center, width } if amp != 0.0 => {
            (center.abs() + width * (12.0 * std::f64::consts::LN_10).sqrt()).min(l)
        }
        _ if e.is_zero() => 0.0,
        _ => l,
    }
}

/// Radius beyond which |Ǎ(U)| stays below 1e−12 of its peak.
pub fn profile_radius(p: &FreqProfile) -> f64 {
    let tol = 1e-12;
    match *p {
        FreqProfile::Hermite { order, scale, .. } => {
            let peak = (0..400).map(|k| p.inverse(k as f64 * 0.05 / scale).norm()).fold(0.0, f64::max);
            let mut u = 40.0 / scale;
            while u > 0.0 && p.inverse(u).norm() <= tol * peak {
                u -= 0.01 / scale;
            }
            let _ = order;
            u.max(0.0)
        }
        FreqProfile::Window { .. } => {
            let peak = (0..64).map(|k| p.inverse(k as f64 * 0.1).norm()).fold(0.0, f64::max);
            let mut last = 0.0;
            for k in 0..=48 {
                let u = 4.0 * 2f64.powf(k as f64 / 4.0);
                let m = (0..4).map(|j| p.inverse(u * (1.0 + 0.01 * j as f64)).norm()).fold(0.0, f64::max);
                if m > tol * peak {
                    last = u * 1.2;
                }
            }
            last
        }
    }
}

fn realize_analytic(a: &AnalyticFamily, t: f64, grid: &GridSpec, how: Realization) -> Result<Array2<C64>> {
    let n = grid.n;
    let xs = grid.xs();
    let mut k = zero_matrix(n);
    if a.is_zero() {
        return Ok(k);
    }
    let u = a.dilation;
    for term in &a.terms {
        let b = term.time.eval(u * t);
        if b == 0.0 {
            continue;
        }
        let scale = a.weight * u * b;
        let env: Vec<C64> = xs.iter().map(|&x| term.envelope.eval(x)).collect();
        match how {
            Realization::Spectral => {
                let kap = spectral_offsets(grid, |xi| term.freq.eval(u * t * xi) * scale);
                for i in 0..n {
                    for j in 0..n {
                        k[[i, j]] += env[i] * kap[(i + n - j) % n];
                    }
                }
            }
            Realization::Galerkin(basis) => {
                let (inner, outer) = match term.freq {
                    FreqProfile::Window { psi, .. } => (psi.lo / u, psi.hi / u),
                    _ => (0.0, term.freq.zeta_extent() / u),
                };
                let prof = |z: f64| term.freq.eval(u * z) * scale;
                let kap = spectral_offsets(grid, |xi| galerkin_symbol(grid, t, &prof, outer, inner, basis, xi));
                for i in 0..n {
                    for j in 0..n {
                        k[[i, j]] += env[i] * kap[(i + n - j) % n];
                    }
                }
            }
            Realization::Nystrom => {
                let w = a.weight * b / t;
                let mut kap = vec![ZERO; 2 * n - 1];
                for (m, v) in kap.iter_mut().enumerate() {
                    let d = (m as f64 - (n - 1) as f64) * grid.dx();
                    *v = term.freq.inverse(d / (t * u)) * w;
                }
                for i in 0..n {
                    for j in 0..n {
                        k[[i, j]] += env[i] * kap[n - 1 + i - j];
                    }
                }
            }
        }
    }
    if let Some(c) = &a.custom {
        match how {
            Realization::Nystrom => {
                let p = c.phi.as_ref().ok_or_else(|| Error::Domain("custom field lacks φ".into()))?;
                for i in 0..n {
                    for j in 0..n {
                        let uu = (xs[i] - xs[j]) / t;
                        k[[i, j]] += p(xs[i], uu / u, u * t) * (a.weight / t);
                    }
                }
            }
            _ => {
                // row-wise band-limited realization
                let s = 1.0 / (n as f64 * grid.dx());
                for i in 0..n {
                    let mut row: Vec<C64> = (0..n)
                        .map(|q| {
                            let xi = grid.freq(q);
                            let v = (c.fhat)(xs[i], u * t * xi, u * t);
                            if q == n / 2 {
                                0.5 * (v + (c.fhat)(xs[i], -u * t * xi, u * t))
                            } else {
                                v
                            }
                        })
                        .collect();
                    inverse_fft(&mut row);
                    // row[m] = κ_i(mΔx); K_ij = κ_i(x_i − x_j)
                    for j in 0..n {
                        k[[i, j]] += row[(i + n - j) % n] * (s * a.weight * u);
                    }
                }
            }
        }
    }
    Ok(k)
}

fn realize_sampled(s: &SampledField, t: f64, grid: &GridSpec) -> Result<Array2<C64>> {
    let it = s
        .ts
        .iter()
        .position(|&v| (v - t).abs() <= 1e-12 * t)
        .ok_or_else(|| Error::GridMismatch(format!("t = {t} is not a node of the sampled field")))?;
    let xs = grid.xs();
    if s.xs.len() != xs.len() || s.xs.iter().zip(&xs).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::GridMismatch("sampled field x-grid differs from the operator grid".into()));
    }
    let n = grid.n;
    let mut k = zero_matrix(n);
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] = s.interp_u(it, i, (xs[i] - xs[j]) / t) / t;
        }
    }
    Ok(k)
}

/// Sampling grids for normal coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalGrid {
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub ts: Vec<f64>,
}

impl NormalGrid {
    pub fn uniform_u(xs: Vec<f64>, u_half: f64, nu: usize, ts: Vec<f64>) -> Self {
        let h = 2.0 * u_half / nu as f64;
        let us = (0..nu).map(|j| -u_half + j as f64 * h).collect();
        NormalGrid { xs, us, ts }
    }
}

/// φ(x, U, t) = t^p f_t(θ(x, tU)) sampled on the given grid.
pub fn normal_coords(f: &KernelFamily, grid: &NormalGrid) -> Result<SampledField> {
    let (xs, us, ts) = (grid.xs.clone(), grid.us.clone(), grid.ts.clone());
    match &f.repr {
        Representation::Analytic(a) => {
            let mut data = Vec::with_capacity(xs.len() * us.len() * ts.len());
            for &t in &ts {
                for &x in &xs {
                    for &u in &us {
                        data.push(a.phi(x, u, t)?);
                    }
                }
            }
            SampledField::new(xs, us, ts, data)
        }
        Representation::Sampled(s) => {
            if s.xs != xs {
                return Err(Error::GridMismatch("x-grid differs from the stored field".into()));
            }
            let mut data = Vec::with_capacity(xs.len() * us.len() * ts.len());
            for &t in &ts {
                let it = s
                    .ts
                    .iter()
                    .position(|&v| (v - t).abs() <= 1e-12 * t)
                    .ok_or_else(|| Error::GridMismatch(format!("t = {t} not stored")))?;
                for ix in 0..xs.len() {
                    for &u in &us {
                        data.push(s.interp_u(it, ix, u));
                    }
                }
            }
            SampledField::new(xs, us, ts, data)
        }
        Representation::Nodal(n) => {
            let g = n.grid;
            let l = g.half_width;
            let mut data = Vec::with_capacity(xs.len() * us.len() * ts.len());
            for &t in &ts {
                let k = f.kernel_at(t, &g, n.realization)?;
                let peak = k.iter().fold(0.0f64, |m, v| m.max(v.norm()));
                for &x in &xs {
                    let i = ((x + l) / g.dx()).round() as usize;
                    if i >= g.n || (g.x(i) - x).abs() > 1e-9 * g.dx().max(1.0) {
                        return Err(Error::GridMismatch(format!("x = {x} is not a node of the kernel grid")));
                    }
                    for &u in &us {
                        let y = x - t * u;
                        let v = if n.realization.is_periodic() {
                            interp_row_periodic(&k, &g, i, y)
                        } else if y < -l || y > l - g.dx() {
                            let edge = k[[i, 0]].norm().max(k[[i, g.n - 1]].norm());
                            if edge > 1e-12 * peak {
                                return Err(Error::SupportEscape(format!(
                                    "t = {t}: kernel row at x = {x} reaches the domain boundary"
                                )));
                            }
                            ZERO
                        } else {
                            interp_row(&k, &g, i, y)
                        };
                        data.push(v * t);
                    }
                }
            }
            SampledField::new(xs, us, ts, data)
        }
    }
}

fn interp_row(k: &Array2<C64>, g: &GridSpec, i: usize, y: f64) -> C64 {
    let s = (y + g.half_width) / g.dx();
    let j0 = (s.floor() as isize - 1).clamp(0, g.n as isize - 4) as usize;
    lagrange4(|j| k[[i, j]], j0, s)
}

fn interp_row_periodic(k: &Array2<C64>, g: &GridSpec, i: usize, y: f64) -> C64 {
    let s = (y + g.half_width) / g.dx();
    let base = s.floor() as isize - 1;
    let n = g.n as isize;
    let mut acc = ZERO;
    for a in 0..4 {
        let ja = base + a;
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                let jb = base + b;
                l *= (s - jb as f64) / ((ja - jb) as f64);
            }
        }
        acc += k[[i, ja.rem_euclid(n) as usize]] * l;
    }
    acc
}

fn lagrange4<F: Fn(usize) -> C64>(f: F, j0: usize, s: f64) -> C64 {
    let mut acc = ZERO;
    for a in j0..j0 + 4 {
        let mut l = 1.0;
        for b in j0..j0 + 4 {
            if a != b {
                l *= (s - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += f(a) * l;
    }
    acc
}

/// Inverse substitution f_t(x, y) = t^{-p} φ(x, (x − y)/t, t) from a sampled field.
pub fn kernel_from_normal(field: &SampledField, it: usize, ix: usize, y: f64) -> C64 {
    let t = field.ts[it];
    let x = field.xs[ix];
    field.interp_u(it, ix, (x - y) / t) / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::FreqProfile;

    fn groupoid() -> GroupoidSpec {
        GroupoidSpec::pair_line(8.0).unwrap()
    }

    fn hermite_family() -> KernelFamily {
        let term = SeparableTerm {
            envelope: Envelope::Gaussian { amp: 1.0, center: 0.0, width: 2.0 },
            freq: FreqProfile::hermite(4, 2.0),
            time: TimeProfile::cutoff(),
        };
        KernelFamily::analytic(groupoid(), AnalyticFamily::new("h", vec![term]), (1e-3, 16.0), Some(FamilyClass::J))
    }

    #[test]
    fn realizations_agree_for_resolved_kernel() {
        let g = GridSpec::new(128, 8.0).unwrap();
        let f = hermite_family();
        let t = 0.8;
        let a = f.kernel_at(t, &g, Realization::Spectral).unwrap();
        let b = f.kernel_at(t, &g, Realization::Nystrom).unwrap();
        let peak = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        // the spectral kernel is periodic; compare away from the wrap-around
        let mut diff: f64 = 0.0;
        for ((i, j), v) in b.indexed_iter() {
            if i.abs_diff(j) < g.n / 2 {
                diff = diff.max((a[[i, j]] - v).norm());
            }
        }
        assert!(diff < 1e-12 * peak, "{diff} vs {peak}");
    }

    #[test]
    fn galerkin_close_to_pointwise_when_resolved() {
        let g = GridSpec::new(256, 8.0).unwrap();
        let f = hermite_family();
        let a = f.kernel_at(0.9, &g, Realization::Galerkin(crate::realize::Basis::Keys)).unwrap();
        let b = f.kernel_at(0.9, &g, Realization::Nystrom).unwrap();
        let peak = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let diff = (&a - &b).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(diff < 2e-3 * peak, "{diff} vs {peak}");
    }

    #[test]
    fn alpha_composes() {
        let f = hermite_family();
        let a = f.alpha(2.0).unwrap().alpha(0.25).unwrap();
        let b = f.alpha(0.5).unwrap();
        let (fa, fb) = (a.analytic_ref().unwrap(), b.analytic_ref().unwrap());
        for &(x, z, t) in &[(0.1, 1.0, 0.3), (-1.0, 4.0, 0.05)] {
            assert!((fa.fhat(x, z, t) - fb.fhat(x, z, t)).norm() < 1e-15);
        }
    }
}
