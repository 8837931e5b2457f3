//! Schwartz-type classes on the adiabatic groupoid: semi-norms, fiberwise
//! Fourier transforms, classification, orbit integrals and the pairing
//! with test functions on the algebroid.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::family::{FamilyClass, KernelFamily, NormalGrid, Representation};
use crate::grid::QuadratureSpec;
use crate::numeric::{extrapolate_to_zero, fd_reach, fd_stencil, golden_max, local_slopes, loglog_slope, CompositeRule};
use crate::profile::BumpProfile;
use crate::realize::forward_fft;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Multi-index (k, ℓ, j, m) of N_{k,ℓ,j,m} = sup (ξ² + t²)^{m/2} |∂ᵏ_x ∂^ℓ_ξ ∂ʲ_t F|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemiNormIndex {
    pub k: usize,
    pub l: usize,
    pub j: usize,
    pub m: i32,
}

impl SemiNormIndex {
    pub const fn new(k: usize, l: usize, j: usize, m: i32) -> Self {
        SemiNormIndex { k, l, j, m }
    }

    fn check(&self, max_order: usize) -> Result<()> {
        for o in [self.k, self.l, self.j] {
            if o > max_order || fd_stencil(o).is_none() {
                return Err(Error::DerivativeOrder(o));
            }
        }
        Ok(())
    }

    /// Exponent of u in N(α_u f) = u^{p+|ℓ|+j−m} N(f).
    pub fn alpha_exponent(&self, p: usize) -> i32 {
        p as i32 + self.l as i32 + self.j as i32 - self.m
    }
}

/// Index set used for class checks: all entries have m ≥ 0.
pub fn default_index_set() -> Vec<SemiNormIndex> {
    [
        (0, 0, 0, 0),
        (0, 0, 0, 2),
        (0, 1, 0, 0),
        (1, 0, 0, 0),
        (0, 0, 1, 0),
        (0, 1, 1, 1),
        (0, 2, 0, 1),
        (1, 1, 0, 0),
        (0, 0, 2, 3),
        (2, 0, 1, 0),
        (0, 3, 0, 2),
        (1, 0, 1, 2),
    ]
    .iter()
    .map(|&(k, l, j, m)| SemiNormIndex::new(k, l, j, m))
    .collect()
}

pub const MAX_DERIVATIVE: usize = 3;

/// Fourier-side samples F(x, ξ, t) on uniform grids, laid out [t][x][ξ].
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSamples {
    pub xs: Vec<f64>,
    pub xis: Vec<f64>,
    pub ts: Vec<f64>,
    pub data: Vec<C64>,
}

impl FourierSamples {
    pub fn from_fn<F: Fn(f64, f64, f64) -> C64>(xs: Vec<f64>, xis: Vec<f64>, ts: Vec<f64>, f: F) -> Self {
        let mut data = Vec::with_capacity(xs.len() * xis.len() * ts.len());
        for &t in &ts {
            for &x in &xs {
                for &xi in &xis {
                    data.push(f(x, xi, t));
                }
            }
        }
        FourierSamples { xs, xis, ts, data }
    }

    fn at(&self, it: usize, ix: usize, iz: usize) -> C64 {
        self.data[(it * self.xs.len() + ix) * self.xis.len() + iz]
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn spacing(g: &[f64]) -> f64 {
    if g.len() < 2 {
        1.0
    } else {
        g[1] - g[0]
    }
}

fn weight(xi: f64, t: f64, m: i32) -> f64 {
    if m == 0 {
        1.0
    } else {
        (xi * xi + t * t).powf(m as f64 / 2.0)
    }
}

/// Semi-norm of a sampled field: supremum over the grid nodes at which the
/// finite-difference stencils fit.
pub fn seminorm(f: &FourierSamples, idx: SemiNormIndex) -> Result<f64> {
    idx.check(MAX_DERIVATIVE)?;
    let (nx, nz, nt) = (f.xs.len(), f.xis.len(), f.ts.len());
    let (rk, rl, rj) = (fd_reach(idx.k), fd_reach(idx.l), fd_reach(idx.j));
    if nx <= 2 * rk || nz <= 2 * rl || nt <= 2 * rj {
        return Err(Error::DerivativeOrder(idx.k.max(idx.l).max(idx.j)));
    }
    let (hx, hz, ht) = (spacing(&f.xs), spacing(&f.xis), spacing(&f.ts));
    let (sk, sl, sj) = (fd_stencil(idx.k).unwrap(), fd_stencil(idx.l).unwrap(), fd_stencil(idx.j).unwrap());
    let norm = hx.powi(idx.k as i32) * hz.powi(idx.l as i32) * ht.powi(idx.j as i32);
    let mut sup: f64 = 0.0;
    for it in rj..nt - rj {
        for ix in rk..nx - rk {
            for iz in rl..nz - rl {
                let mut acc = ZERO;
                for &(oj, wj) in sj {
                    for &(ok, wk) in sk {
                        for &(ol, wl) in sl {
                            let v = f.at(
                                (it as i32 + oj) as usize,
                                (ix as i32 + ok) as usize,
                                (iz as i32 + ol) as usize,
                            );
                            acc += v * (wj * wk * wl);
                        }
                    }
                }
                let val = acc.norm() / norm * weight(f.xis[iz], f.ts[it], idx.m);
                if val > sup {
                    sup = val;
                }
            }
        }
    }
    Ok(sup)
}

/// Search box and resolution for semi-norms of closed-form fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeminormBox {
    pub x: (f64, f64),
    pub xi: (f64, f64),
    pub t: (f64, f64),
    pub scan: (usize, usize, usize),
    /// Finite-difference step (all axes).
    pub h: f64,
    /// Refine the best scan candidates by coordinate-wise golden sections.
    pub refine: bool,
}

impl Default for SeminormBox {
    fn default() -> Self {
        SeminormBox { x: (-4.0, 4.0), xi: (-6.0, 6.0), t: (0.0, 6.0), scan: (33, 49, 25), h: 5e-3, refine: true }
    }
}

fn fd_value<F: Fn(f64, f64, f64) -> C64>(f: &F, idx: SemiNormIndex, h: f64, x: f64, xi: f64, t: f64) -> f64 {
    let (sk, sl, sj) = (fd_stencil(idx.k).unwrap(), fd_stencil(idx.l).unwrap(), fd_stencil(idx.j).unwrap());
    let mut acc = ZERO;
    for &(oj, wj) in sj {
        for &(ok, wk) in sk {
            for &(ol, wl) in sl {
                acc += f(x + ok as f64 * h, xi + ol as f64 * h, t + oj as f64 * h) * (wj * wk * wl);
            }
        }
    }
    let order = (idx.k + idx.l + idx.j) as i32;
    acc.norm() / h.powi(order) * weight(xi, t, idx.m)
}

/// Semi-norm of a closed-form field F(x, ξ, t) (evaluated anywhere, t may be
/// negative inside stencils): grid scan followed by local refinement.
pub fn seminorm_analytic<F: Fn(f64, f64, f64) -> C64>(f: &F, idx: SemiNormIndex, b: &SeminormBox) -> Result<f64> {
    idx.check(MAX_DERIVATIVE)?;
    let xs = linspace(b.x.0, b.x.1, b.scan.0);
    let zs = linspace(b.xi.0, b.xi.1, b.scan.1);
    let ts = linspace(b.t.0, b.t.1, b.scan.2);
    let mut cands: Vec<(f64, f64, f64, f64)> = Vec::new();
    for &t in &ts {
        for &x in &xs {
            for &z in &zs {
                let v = fd_value(f, idx, b.h, x, z, t);
                if v.is_finite() {
                    cands.push((v, x, z, t));
                }
            }
        }
    }
    cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut best = cands.first().map(|c| c.0).unwrap_or(0.0);
    if !b.refine || best == 0.0 {
        return Ok(best);
    }
    let steps = [spacing(&xs), spacing(&zs), spacing(&ts)];
    let lo = [b.x.0, b.xi.0, b.t.0];
    let hi = [b.x.1, b.xi.1, b.t.1];
    for c in cands.iter().take(8) {
        let mut p = [c.1, c.2, c.3];
        let mut val = c.0;
        for _ in 0..6 {
            for axis in 0..3 {
                let a = (p[axis] - steps[axis]).max(lo[axis]);
                let bb = (p[axis] + steps[axis]).min(hi[axis]);
                if bb <= a {
                    continue;
                }
                let (arg, v) = golden_max(
                    |s| {
                        let mut q = p;
                        q[axis] = s;
                        fd_value(f, idx, b.h, q[0], q[1], q[2])
                    },
                    a,
                    bb,
                    1e-9 * (1.0 + steps[axis]),
                );
                if v > val {
                    val = v;
                    p[axis] = arg;
                }
            }
        }
        best = best.max(val);
    }
    Ok(best)
}

/// φ̂(x, ζ) at fixed t on a grid of x and ζ values, laid out [x][ζ].
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFiber {
    pub t: f64,
    pub xs: Vec<f64>,
    pub zetas: Vec<f64>,
    pub data: Vec<C64>,
}

impl FourierFiber {
    pub fn at(&self, ix: usize, iz: usize) -> C64 {
        self.data[ix * self.zetas.len() + iz]
    }
}

/// DFT frequencies of a uniform U-grid, in natural (FFT) order.
pub fn dual_frequencies(us: &[f64]) -> Vec<f64> {
    let n = us.len();
    let h = spacing(us);
    (0..n)
        .map(|k| {
            let s = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
            2.0 * PI * s as f64 / (n as f64 * h)
        })
        .collect()
}

/// Trapezoidal DFT along U: φ̂(ξ_k) = h Σ_j φ(U_j) e^{−iU_jξ_k}.
pub fn dft_u(us: &[f64], values: &[C64]) -> Vec<C64> {
    let h = spacing(us);
    let mut buf = values.to_vec();
    forward_fft(&mut buf);
    let freqs = dual_frequencies(us);
    buf.iter().zip(&freqs).map(|(v, xi)| v * C64::from_polar(h, -us[0] * xi)).collect()
}

/// Fiberwise Fourier transform of f at a given t (t = 0: Richardson
/// extrapolation along t_min·2^k, three levels). Sampled families use their
/// own grids; other representations are sampled on `grid`.
pub fn fourier_fiber(f: &KernelFamily, t: f64, grid: Option<&NormalGrid>) -> Result<FourierFiber> {
    if t == 0.0 {
        let base = match &f.repr {
            Representation::Nodal(n) => n.nodes[0],
            _ => f.t_range.0,
        };
        let ts: Vec<f64> = (0..3).map(|k| base * 2f64.powi(k)).collect();
        let fibers: Vec<FourierFiber> = ts.iter().map(|&s| fourier_fiber(f, s, grid)).collect::<Result<_>>()?;
        let mut out = fibers[0].clone();
        out.t = 0.0;
        for (i, v) in out.data.iter_mut().enumerate() {
            let ys: Vec<C64> = fibers.iter().map(|fb| fb.data[i]).collect();
            *v = extrapolate_to_zero(&ts, &ys);
        }
        return Ok(out);
    }
    match &f.repr {
        Representation::Sampled(s) => {
            let it = s
                .ts
                .iter()
                .position(|&v| (v - t).abs() <= 1e-12 * t)
                .ok_or_else(|| Error::GridMismatch(format!("t = {t} is not stored")))?;
            // mass reaching the outermost cell wraps around under the DFT
            let half = 0.5 * (s.us[s.us.len() - 1] - s.us[0]) - spacing(&s.us);
            if f.support_radius_u > half {
                return Err(Error::Aliasing(format!(
                    "support radius {} exceeds half the U extent {half}",
                    f.support_radius_u
                )));
            }
            let zetas = dual_frequencies(&s.us);
            let mut data = Vec::with_capacity(s.xs.len() * zetas.len());
            for ix in 0..s.xs.len() {
                let row: Vec<C64> = (0..s.us.len()).map(|iu| s.at(it, ix, iu)).collect();
                data.extend(dft_u(&s.us, &row));
            }
            Ok(FourierFiber { t, xs: s.xs.clone(), zetas, data })
        }
        Representation::Analytic(a) => {
            let g = grid.ok_or_else(|| Error::Domain("analytic family needs a sampling grid".into()))?;
            let zetas = dual_frequencies(&g.us);
            let mut data = Vec::with_capacity(g.xs.len() * zetas.len());
            for &x in &g.xs {
                for &z in &zetas {
                    data.push(a.fhat(x, z, t));
                }
            }
            Ok(FourierFiber { t, xs: g.xs.clone(), zetas, data })
        }
        Representation::Nodal(n) => {
            let g = grid.ok_or_else(|| Error::Domain("nodal family needs a sampling grid".into()))?;
            let zetas = dual_frequencies(&g.us);
            let k = f.kernel_at(t, &n.grid, n.realization)?;
            let kg = n.grid;
            let mut data = Vec::with_capacity(g.xs.len() * zetas.len());
            for &x in &g.xs {
                let i = ((x + kg.half_width) / kg.dx()).round() as usize;
                if i >= kg.n || (kg.x(i) - x).abs() > 1e-9 {
                    return Err(Error::GridMismatch(format!("x = {x} is not a kernel grid node")));
                }
                for &z in &zetas {
                    data.push(row_transform(k.row(i), &kg, i, z / t, n.realization));
                }
            }
            Ok(FourierFiber { t, xs: g.xs.clone(), zetas, data })
        }
    }
}

/// Σ_j Δx K_ij e^{−i(x_i − x_j)ξ} with the distance wrapped for periodic realizations.
pub fn row_transform(
    row: ndarray::ArrayView1<C64>,
    g: &crate::grid::GridSpec,
    i: usize,
    xi: f64,
    how: crate::realize::Realization,
) -> C64 {
    let xi_x = g.x(i);
    let mut acc = ZERO;
    for j in 0..g.n {
        let v = row[j];
        if v == ZERO {
            continue;
        }
        let mut d = xi_x - g.x(j);
        if how.is_periodic() {
            d = g.wrap(d);
        }
        acc += v * C64::from_polar(1.0, -d * xi);
    }
    acc * g.dx()
}

/// Classification thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub q_max: f64,
    pub order_threshold: f64,
    pub residual_threshold: f64,
    pub annuli: Vec<i32>,
    pub j0_levels: usize,
    pub x_samples: usize,
    pub zeta_box: f64,
    pub indices: Vec<SemiNormIndex>,
    pub overflow_guard: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            q_max: 6.0,
            order_threshold: 6.0,
            residual_threshold: 0.1,
            annuli: (1..=6).collect(),
            j0_levels: 7,
            x_samples: 17,
            zeta_box: 24.0,
            indices: default_index_set(),
            overflow_guard: 1e300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: Option<FamilyClass>,
    pub vanishing_order: f64,
    pub vanishing_residual: f64,
    pub annulus_radii: Vec<f64>,
    pub annulus_max: Vec<f64>,
    pub j0_slope: f64,
    pub j0_ts: Vec<f64>,
    pub j0_sups: Vec<f64>,
    pub seminorms: Vec<(SemiNormIndex, f64)>,
    pub boundary_ratio: f64,
}

fn floor_fit(scales: &[f64], vals: &[f64]) -> (f64, f64, Vec<f64>) {
    let fit = loglog_slope(scales, vals, 1e-13);
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(*v));
    let (s, v): (Vec<f64>, Vec<f64>) =
        scales.iter().zip(vals).filter(|(_, v)| **v > 1e-13 * peak).map(|(a, b)| (*a, *b)).unzip();
    (fit.slope, fit.residual, local_slopes(&s, &v))
}

/// Sup over (x, U) of |φ(·,·,t)| at dyadic t = t_min·2^k.
fn sup_profile(f: &KernelFamily, cfg: &ClassifyConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = f.groupoid.half_width;
    match &f.repr {
        Representation::Analytic(a) => {
            let ts: Vec<f64> = (0..cfg.j0_levels).map(|k| f.t_range.0 * 2f64.powi(k as i32)).collect();
            let xs = linspace(-l, l, cfg.x_samples);
            let has_phi = a.custom.as_ref().map(|c| c.phi.is_some()).unwrap_or(true);
            let ext = if has_phi { f.support_radius_u.min(64.0) } else { a.zeta_extent().min(cfg.zeta_box) };
            let grid = linspace(-ext, ext, 257);
            let mut sups = Vec::new();
            for &t in &ts {
                let mut s: f64 = 0.0;
                for &x in &xs {
                    for &u in &grid {
                        let v = if has_phi { a.phi(x, u, t)? } else { a.fhat(x, u, t) };
                        s = s.max(v.norm());
                    }
                }
                sups.push(s);
            }
            Ok((ts, sups))
        }
        Representation::Sampled(s) => {
            let ts: Vec<f64> = s.ts.iter().take(cfg.j0_levels).copied().collect();
            let sups = (0..ts.len())
                .map(|it| {
                    (0..s.xs.len())
                        .flat_map(|ix| (0..s.us.len()).map(move |iu| (ix, iu)))
                        .fold(0.0f64, |m, (ix, iu)| m.max(s.at(it, ix, iu).norm()))
                })
                .collect();
            Ok((ts, sups))
        }
        Representation::Nodal(n) => {
            // nodes closest to t_min·2^k
            let t0 = n.nodes[0];
            let mut ts = Vec::new();
            let mut sups = Vec::new();
            for k in 0..cfg.j0_levels {
                let target = t0 * 2f64.powi(k as i32);
                let (i, _) = n
                    .nodes
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 / target).ln().abs().partial_cmp(&(b.1 / target).ln().abs()).unwrap())
                    .unwrap();
                let t = n.nodes[i];
                let m = n.kernels[i].as_ref().map(|k| k.iter().fold(0.0f64, |m, v| m.max(v.norm()))).unwrap_or(0.0);
                ts.push(t);
                sups.push(t * m);
            }
            Ok((ts, sups))
        }
    }
}

/// max over x of |φ̂| on the circles √(ζ² + t²) = r.
fn annulus_profile(f: &KernelFamily, cfg: &ClassifyConfig, radii: &[f64]) -> Result<Vec<f64>> {
    let l = f.groupoid.half_width;
    match &f.repr {
        Representation::Analytic(a) => {
            let xs = linspace(-l, l, cfg.x_samples);
            Ok(radii
                .iter()
                .map(|&r| {
                    let mut m: f64 = 0.0;
                    for k in 0..=64 {
                        let th = PI * k as f64 / 64.0;
                        let (z, t) = (r * th.cos(), r * th.sin());
                        for &x in &xs {
                            m = m.max(a.fhat(x, z, t).norm());
                        }
                    }
                    m
                })
                .collect())
        }
        Representation::Nodal(n) => {
            let g = n.grid;
            let xs_idx: Vec<usize> = (0..cfg.x_samples).map(|i| i * (g.n - 1) / (cfg.x_samples - 1).max(1)).collect();
            let mut out = vec![0.0f64; radii.len()];
            for (it, &t) in n.nodes.iter().enumerate() {
                let Some(k) = &n.kernels[it] else { continue };
                for (ir, &r) in radii.iter().enumerate() {
                    if t > r {
                        continue;
                    }
                    let z = (r * r - t * t).sqrt();
                    for &i in &xs_idx {
                        for s in [z, -z] {
                            let v = row_transform(k.row(i), &g, i, s / t, n.realization).norm();
                            out[ir] = out[ir].max(v);
                        }
                    }
                }
            }
            Ok(out)
        }
        Representation::Sampled(_) => {
            let mut out = vec![0.0f64; radii.len()];
            let Representation::Sampled(s) = &f.repr else { unreachable!() };
            for (it, &t) in s.ts.iter().enumerate() {
                let fb = fourier_fiber(f, t, None)?;
                for (ir, &r) in radii.iter().enumerate() {
                    for (iz, &z) in fb.zetas.iter().enumerate() {
                        let rr = (z * z + t * t).sqrt();
                        if rr >= r / 2f64.sqrt() && rr < r * 2f64.sqrt() {
                            for ix in 0..fb.xs.len() {
                                out[ir] = out[ir].max(fb.at(ix, iz).norm());
                            }
                        }
                    }
                }
                let _ = it;
            }
            Ok(out)
        }
    }
}

fn sc_check(f: &KernelFamily, cfg: &ClassifyConfig) -> Result<(Vec<(SemiNormIndex, f64)>, f64)> {
    let l = f.groupoid.half_width;
    match &f.repr {
        Representation::Analytic(a) => {
            let zb = a.zeta_extent().max(1.0).min(cfg.zeta_box) * 1.5;
            let tmax = f.t_range.1.min(a.t_support_end() * 1.05).min(8.0);
            let field = |x: f64, z: f64, t: f64| a.fhat(x, z, t);
            let b = SeminormBox {
                x: (-l, l),
                xi: (-zb, zb),
                t: (0.0, tmax),
                scan: (cfg.x_samples, 97, 33),
                h: 1e-3 * zb.max(1.0),
                refine: false,
            };
            let mut out = Vec::new();
            for &idx in &cfg.indices {
                out.push((idx, seminorm_analytic(&field, idx, &b)?));
            }
            // decay at the ζ box boundary relative to the peak
            let peak = out[0].1;
            let mut edge: f64 = 0.0;
            for &x in &linspace(-l, l, cfg.x_samples) {
                for &t in &linspace(0.0, tmax, 17) {
                    edge = edge.max(a.fhat(x, zb, t).norm()).max(a.fhat(x, -zb, t).norm());
                }
            }
            Ok((out, if peak > 0.0 { edge / peak } else { 0.0 }))
        }
        _ => {
            // t is not differentiated on log-spaced nodes: spatial and
            // frequency derivatives only, one node at a time
            let ts: Vec<f64> = match &f.repr {
                Representation::Nodal(n) => n.nodes.iter().copied().step_by(8).collect(),
                Representation::Sampled(s) => s.ts.clone(),
                _ => unreachable!(),
            };
            let nodes_grid = match &f.repr {
                Representation::Nodal(n) => {
                    let g = n.grid;
                    let step = (g.n / 64).max(1);
                    let xs: Vec<f64> = (0..g.n).step_by(step).map(|i| g.x(i)).collect();
                    Some(NormalGrid::uniform_u(xs, 16.0, 128, vec![]))
                }
                _ => None,
            };
            let mut table: Vec<(SemiNormIndex, f64)> = cfg.indices.iter().filter(|i| i.j == 0).map(|&i| (i, 0.0)).collect();
            let mut edge: f64 = 0.0;
            let mut peak: f64 = 0.0;
            for &t in &ts {
                let fb = fourier_fiber(f, t, nodes_grid.as_ref())?;
                // reorder ζ ascending for uniform differencing
                let mut order: Vec<usize> = (0..fb.zetas.len()).collect();
                order.sort_by(|a, b| fb.zetas[*a].partial_cmp(&fb.zetas[*b]).unwrap());
                let zs: Vec<f64> = order.iter().map(|&i| fb.zetas[i]).collect();
                let mut data = Vec::with_capacity(fb.data.len());
                for ix in 0..fb.xs.len() {
                    for &iz in &order {
                        data.push(fb.at(ix, iz));
                    }
                }
                let fs = FourierSamples { xs: fb.xs.clone(), xis: zs.clone(), ts: vec![t], data };
                for (idx, v) in table.iter_mut() {
                    *v = v.max(seminorm(&fs, *idx).unwrap_or(f64::INFINITY));
                }
                for ix in 0..fb.xs.len() {
                    for (jz, &iz) in order.iter().enumerate() {
                        let a = fb.at(ix, iz).norm();
                        peak = peak.max(a);
                        if jz < 2 || jz + 2 >= order.len() {
                            edge = edge.max(a);
                        }
                    }
                }
            }
            Ok((table, if peak > 0.0 { edge / peak } else { 0.0 }))
        }
    }
}

/// Classify f into S_c / J0 / J.
pub fn classify(f: &KernelFamily, cfg: &ClassifyConfig) -> Result<ClassReport> {
    let radii: Vec<f64> = cfg.annuli.iter().map(|&k| 2f64.powi(-k)).collect();
    if f.is_zero() {
        return Ok(ClassReport {
            class: Some(FamilyClass::J0),
            vanishing_order: f64::INFINITY,
            vanishing_residual: 0.0,
            annulus_max: vec![0.0; radii.len()],
            annulus_radii: radii,
            j0_slope: f64::INFINITY,
            j0_ts: vec![],
            j0_sups: vec![],
            seminorms: vec![],
            boundary_ratio: 0.0,
        });
    }
    let (j0_ts, j0_sups) = sup_profile(f, cfg)?;
    let j0 = loglog_slope(&j0_ts, &j0_sups, 1e-13);
    let is_j0 = j0.slope > cfg.q_max;

    let (seminorms, boundary_ratio) = sc_check(f, cfg)?;
    let finite = seminorms.iter().all(|(_, v)| v.is_finite() && *v < cfg.overflow_guard);
    let is_sc = finite && boundary_ratio < 1e-6;

    let annulus_max = annulus_profile(f, cfg, &radii)?;
    let (slope, residual, locals) = floor_fit(&radii, &annulus_max);
    let monotone = locals.windows(2).all(|w| w[1] >= w[0] - 0.05 * w[0].abs().max(1.0));
    let vanishing_order = if slope.is_infinite() {
        f64::INFINITY
    } else if residual > cfg.residual_threshold {
        if !monotone {
            return Err(Error::InconclusiveFit(format!(
                "annulus regression residual {residual:.3} with non-monotone local slopes {locals:?}; radii {radii:?}, values {annulus_max:?}"
            )));
        }
        // superpolynomial vanishing: the steepest local slope bounds the order from below
        locals.iter().fold(slope, |m, v| m.max(*v))
    } else {
        slope
    };
    let class = if is_j0 {
        Some(FamilyClass::J0)
    } else if is_sc && vanishing_order >= cfg.order_threshold {
        Some(FamilyClass::J)
    } else if is_sc {
        Some(FamilyClass::Sc)
    } else {
        None
    };
    Ok(ClassReport {
        class,
        vanishing_order,
        vanishing_residual: residual,
        annulus_radii: radii,
        annulus_max,
        j0_slope: j0.slope,
        j0_ts,
        j0_sups,
        seminorms,
        boundary_ratio,
    })
}

/// Which scaling the orbit integral follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitAction {
    /// (x, ξ) ↦ (x, tξ) on the vector bundle E
    Beta,
    /// (x, U, λ) ↦ (x, U/t, tλ) on E × ℝ
    Alpha,
}

/// Point (x, ξ) for β or (x, U, λ) for α (third entry ignored for β).
pub type OrbitPoint = [f64; 3];

/// ∫₀^∞ g_t(action_t(z)) dt by logarithmic quadrature, for each point z.
/// `g(z, t)` is evaluated in the family's own coordinates.
pub fn orbit_integrate<G: Fn(&OrbitPoint, f64) -> C64>(
    g: G,
    action: OrbitAction,
    points: &[OrbitPoint],
    quad: &QuadratureSpec,
) -> Result<Vec<C64>> {
    quad.validate()?;
    let (ts, ws) = quad.nodes_weights();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let moved = |t: f64| -> OrbitPoint {
            match action {
                OrbitAction::Beta => [p[0], t * p[1], p[2]],
                OrbitAction::Alpha => [p[0], p[1] / t, t * p[2]],
            }
        };
        // ∫ F(t) dt = ∫ t·F(t) dt/t
        let vals: Vec<C64> = ts.iter().map(|&t| g(&moved(t), t) * t).collect();
        let total: C64 = vals.iter().zip(&ws).map(|(v, w)| v * *w).sum();
        let mass: f64 = vals.iter().zip(&ws).map(|(v, w)| v.norm() * w).sum();
        let tail = vals[0].norm() + vals[vals.len() - 1].norm();
        if mass > 0.0 && tail > 1e-8 * mass {
            return Err(Error::QuadratureRange(format!(
                "integrand at the ends of [{}, {}] is {tail:.3e} against mass {mass:.3e} at point {p:?}",
                quad.t_min, quad.t_max
            )));
        }
        out.push(total);
    }
    Ok(out)
}

/// β-section: f(z, t) = h(|ξ|² + t²)/t · g(x, ξ/t), whose
/// β-orbit integral returns g.
pub fn beta_section<G: Fn(f64, f64) -> C64>(g: G, h: BumpProfile) -> impl Fn(&OrbitPoint, f64) -> C64 {
    move |p: &OrbitPoint, t: f64| {
        let v = h.eval(p[1] * p[1] + t * t);
        if v == 0.0 {
            return ZERO;
        }
        g(p[0], p[1] / t) * (v / t)
    }
}

pub type AlphaField = Box<dyn Fn(&OrbitPoint, f64) -> C64 + Send + Sync>;

/// α-split: returns (f₁, f₂) with φ_α(f₁) + φ_α(f₂) = g.
/// `probe` points are used to check the support condition |λU| ≤ bound.
pub fn split_alpha<G>(g: G, h: BumpProfile, chi: BumpProfile, probe: &[OrbitPoint], bound: f64) -> Result<(AlphaField, AlphaField)>
where
    G: Fn(f64, f64, f64) -> C64 + Clone + Send + Sync + 'static,
{
    h.validate()?;
    let peak = probe.iter().fold(0.0f64, |m, p| m.max(g(p[0], p[1], p[2]).norm()));
    for p in probe {
        if g(p[0], p[1], p[2]).norm() > 1e-12 * peak && (p[1] * p[2]).abs() > bound {
            return Err(Error::SupportCondition(format!("|λU| = {} > {bound} at {p:?}", (p[1] * p[2]).abs())));
        }
    }
    let g1 = g.clone();
    let f1 = move |p: &OrbitPoint, t: f64| -> C64 {
        let (x, u, l) = (p[0], p[1], p[2]);
        let c = 1.0 - chi.eval(l * l / (t * t));
        let hv = h.eval(l * l + t * t);
        if c == 0.0 || hv == 0.0 {
            return ZERO;
        }
        g1(x, t * u, l / t) * (hv / t * c)
    };
    let f2 = move |p: &OrbitPoint, t: f64| -> C64 {
        let (x, u, l) = (p[0], p[1], p[2]);
        let c = chi.eval(l * l / (t * t));
        let hv = h.eval(u * u + 1.0 / (t * t));
        if c == 0.0 || hv == 0.0 {
            return ZERO;
        }
        g(x, t * u, l / t) * (hv / t * c)
    };
    Ok((Box::new(f1), Box::new(f2)))
}

/// F(x, t) = ∫ g(x, U) f_t(θ(x, U)) dU = ∫ g(x, tV) φ(x, V, t) dV together with
/// its t = 0 value f̂₀(x, 0)·g(x, 0).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairingReport {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    /// [t][x]
    pub values: Vec<Vec<C64>>,
    pub limit: Vec<C64>,
    /// max_x |F(x, t) − F(x, 0)| per t
    pub deviation: Vec<f64>,
}

pub fn pairing_limit<G: Fn(f64, f64) -> C64>(f: &KernelFamily, g: G, xs: &[f64], ts: &[f64]) -> Result<PairingReport> {
    let mut values = Vec::new();
    let limit: Vec<C64>;
    match &f.repr {
        Representation::Analytic(a) => {
            let r = f.support_radius_u.max(1.0);
            let rule = CompositeRule::new(-r, r, 64, 16);
            for &t in ts {
                let mut row = Vec::with_capacity(xs.len());
                for &x in xs {
                    let mut acc = ZERO;
                    for (&v, &w) in rule.nodes.iter().zip(&rule.weights) {
                        let gv = g(x, t * v);
                        if gv == ZERO {
                            continue;
                        }
                        acc += gv * a.phi(x, v, t)? * w;
                    }
                    row.push(acc);
                }
                values.push(row);
            }
            limit = xs.iter().map(|&x| a.fhat(x, 0.0, 0.0) * g(x, 0.0)).collect();
        }
        Representation::Nodal(n) => {
            let gr = n.grid;
            for &t in ts {
                let k = f.kernel_at(t, &gr, n.realization)?;
                let mut row = Vec::with_capacity(xs.len());
                for &x in xs {
                    let i = ((x + gr.half_width) / gr.dx()).round() as usize;
                    let mut acc = ZERO;
                    for j in 0..gr.n {
                        let mut d = gr.x(i) - gr.x(j);
                        if n.realization.is_periodic() {
                            d = gr.wrap(d);
                        }
                        acc += k[[i, j]] * g(x, d);
                    }
                    row.push(acc * gr.dx());
                }
                values.push(row);
            }
            let fb = fourier_fiber(f, 0.0, Some(&NormalGrid { xs: xs.to_vec(), us: vec![-1.0, 0.0, 1.0, 2.0], ts: vec![] }))?;
            limit = (0..xs.len()).map(|ix| fb.at(ix, 0) * g(xs[ix], 0.0)).collect();
        }
        Representation::Sampled(s) => {
            let h = spacing(&s.us);
            for &t in ts {
                let it = s
                    .ts
                    .iter()
                    .position(|&v| (v - t).abs() <= 1e-12 * t)
                    .ok_or_else(|| Error::GridMismatch(format!("t = {t} not stored")))?;
                let mut row = Vec::with_capacity(xs.len());
                for &x in xs {
                    let ix = s
                        .xs
                        .iter()
                        .position(|&v| (v - x).abs() < 1e-12)
                        .ok_or_else(|| Error::GridMismatch(format!("x = {x} not stored")))?;
                    let acc: C64 = s.us.iter().enumerate().map(|(iu, &v)| g(x, t * v) * s.at(it, ix, iu)).sum();
                    row.push(acc * h);
                }
                values.push(row);
            }
            let fb = fourier_fiber(f, 0.0, None)?;
            limit = xs
                .iter()
                .map(|&x| {
                    let ix = s.xs.iter().position(|&v| (v - x).abs() < 1e-12).unwrap();
                    fb.at(ix, 0) * g(x, 0.0)
                })
                .collect();
        }
    }
    let deviation = values
        .iter()
        .map(|row| row.iter().zip(&limit).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())))
        .collect();
    Ok(PairingReport { xs: xs.to_vec(), ts: ts.to_vec(), values, limit, deviation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_order_guard() {
        let f = |_: f64, _: f64, _: f64| C64::new(1.0, 0.0);
        let r = seminorm_analytic(&f, SemiNormIndex::new(4, 0, 0, 0), &SeminormBox::default());
        assert!(matches!(r, Err(Error::DerivativeOrder(4))));
    }

    #[test]
    fn dual_frequencies_layout() {
        let us = linspace(-2.0, 2.0 - 0.5, 8);
        let f = dual_frequencies(&us);
        assert!((f[1] - 2.0 * PI / 4.0).abs() < 1e-14);
        assert!(f[5] < 0.0);
    }
}
