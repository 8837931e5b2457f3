//! Convolution *-algebra of the adiabatic pair groupoid, realized per
//! quadrature node as kernel matrices.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FamilyClass, KernelFamily, NodalFamily, Representation};
use crate::grid::{GridSpec, QuadratureSpec};
use crate::numeric::extrapolate_to_zero;
use crate::operator::DiscreteOperator;
use crate::quantization::ClassicalSymbol;
use crate::realize::Realization;
use crate::schwartz::{classify, row_transform, ClassifyConfig};

/// Grid, t-quadrature and realization shared by all families in a computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub grid: GridSpec,
    pub quad: QuadratureSpec,
    pub realization: Realization,
}

impl Discretization {
    pub fn new(grid: GridSpec, quad: QuadratureSpec, realization: Realization) -> Result<Self> {
        quad.validate()?;
        Ok(Discretization { grid, quad, realization })
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.quad.nodes_weights().0
    }

    /// Nodal copy of f on this discretization (nodal inputs are checked, not resampled).
    pub fn materialize(&self, f: &KernelFamily) -> Result<KernelFamily> {
        let nodes = self.nodes();
        if let Representation::Nodal(n) = &f.repr {
            n.grid.check_same(&self.grid)?;
            let same = n.nodes.len() == nodes.len()
                && n.nodes.iter().zip(&nodes).all(|(a, b)| (a - b).abs() <= 1e-12 * b);
            if !same {
                return Err(Error::GridMismatch("family nodes differ from the quadrature nodes".into()));
            }
            return Ok(f.clone());
        }
        f.to_nodal(&nodes, &self.grid, self.realization)
    }

    pub fn kernels(&self, f: &KernelFamily) -> Result<Vec<Option<Array2<C64>>>> {
        match &f.repr {
            Representation::Nodal(n) => Ok(n.kernels.clone()),
            _ => f.kernels_on(&self.nodes(), &self.grid, self.realization),
        }
    }

    fn periodic(&self, f: &KernelFamily) -> bool {
        match &f.repr {
            Representation::Nodal(n) => n.realization.is_periodic(),
            _ => self.realization.is_periodic(),
        }
    }
}

/// Largest |x − y| with |K(x, y)| above 1e−12 of the peak.
pub fn kernel_radius(k: &Array2<C64>, grid: &GridSpec, periodic: bool) -> f64 {
    let peak = k.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut r: f64 = 0.0;
    for ((i, j), v) in k.indexed_iter() {
        if v.norm() > 1e-12 * peak {
            let d = grid.x(i) - grid.x(j);
            r = r.max(if periodic { grid.wrap(d) } else { d }.abs());
        }
    }
    r
}

fn nodal(f: &KernelFamily, disc: &Discretization, kernels: Vec<Option<Array2<C64>>>, class: Option<FamilyClass>) -> KernelFamily {
    let how = match &f.repr {
        Representation::Nodal(n) => n.realization,
        _ => disc.realization,
    };
    let nf = NodalFamily { grid: disc.grid, nodes: disc.nodes(), kernels, realization: how };
    KernelFamily::nodal(f.groupoid, nf, class)
}

/// Δx·A·B for kernel matrices.
pub fn compose_kernels(a: &Array2<C64>, b: &Array2<C64>, grid: &GridSpec) -> Array2<C64> {
    let mut c = a.dot(b);
    c.mapv_inplace(|v| v * grid.dx());
    c
}

/// (f∗g)_t = ∫ f_t(x, z) g_t(z, y) dz at every node.
pub fn convolve(f: &KernelFamily, g: &KernelFamily, disc: &Discretization) -> Result<KernelFamily> {
    if f.groupoid != g.groupoid {
        return Err(Error::GridMismatch("families live on different groupoids".into()));
    }
    let (fk, gk) = (disc.kernels(&disc.materialize(f)?)?, disc.kernels(&disc.materialize(g)?)?);
    let periodic = disc.periodic(f) && disc.periodic(g);
    let nodes = disc.nodes();
    let mut out = Vec::with_capacity(nodes.len());
    for (i, (a, b)) in fk.iter().zip(&gk).enumerate() {
        match (a, b) {
            (Some(a), Some(b)) => {
                if !periodic {
                    // non-periodic realizations truncate the z-integral at ±L
                    let r = kernel_radius(a, &disc.grid, false) + kernel_radius(b, &disc.grid, false);
                    if r >= disc.grid.half_width {
                        return Err(Error::SupportOverflow(format!(
                            "t = {}: combined kernel radius {r:.4} reaches L = {}",
                            nodes[i], disc.grid.half_width
                        )));
                    }
                }
                out.push(Some(compose_kernels(a, b, &disc.grid)));
            }
            _ => out.push(None),
        }
    }
    let tag = product_class(f.claimed_class, g.claimed_class);
    let mut h = nodal(f, disc, out, tag);
    if tag.is_none() {
        h.claimed_class = classify(&h, &ClassifyConfig::default()).ok().and_then(|r| r.class);
    }
    Ok(h)
}

/// Class tag of a product: J0 absorbs, J is an ideal, otherwise unknown.
pub fn product_class(a: Option<FamilyClass>, b: Option<FamilyClass>) -> Option<FamilyClass> {
    use FamilyClass::*;
    match (a, b) {
        (Some(J0), _) | (_, Some(J0)) => Some(J0),
        (Some(J), _) | (_, Some(J)) => Some(J),
        _ => None,
    }
}

/// (f_t ∗ g)_t for one fixed kernel g.
pub fn convolve_fixed(f: &KernelFamily, g: &Array2<C64>, disc: &Discretization) -> Result<KernelFamily> {
    if g.dim() != (disc.grid.n, disc.grid.n) {
        return Err(Error::GridMismatch("fixed kernel has the wrong size".into()));
    }
    let fk = disc.kernels(&disc.materialize(f)?)?;
    let out = fk.iter().map(|k| k.as_ref().map(|k| compose_kernels(k, g, &disc.grid))).collect();
    Ok(nodal(f, disc, out, None))
}

/// f*_t(x, y) = conj f_t(y, x).
pub fn adjoint(f: &KernelFamily, disc: &Discretization) -> Result<KernelFamily> {
    let fk = disc.kernels(&disc.materialize(f)?)?;
    let out = fk.into_iter().map(|k| k.map(|k| k.t().mapv(|v| v.conj()))).collect();
    Ok(nodal(f, disc, out, f.claimed_class))
}

/// Δx·K·v for a single-t kernel.
pub fn apply_kernel(k: &Array2<C64>, grid: &GridSpec, v: &[C64]) -> Result<Vec<C64>> {
    if v.len() != grid.n || k.dim() != (grid.n, grid.n) {
        return Err(Error::GridMismatch(format!("kernel {:?} against vector of length {}", k.dim(), v.len())));
    }
    let y = k.dot(&Array1::from(v.to_vec()));
    Ok(y.iter().map(|c| c * grid.dx()).collect())
}

/// Sampling for the t = 0 fiber relation ĥ₀ = f̂₀·σ₀.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCheck {
    /// Dyadic t-levels for the extrapolation (largest first).
    pub ts: Vec<f64>,
    /// Range of |ζ| compared.
    pub zeta: (f64, f64),
    pub x_samples: usize,
}

impl Default for FiberCheck {
    fn default() -> Self {
        FiberCheck { ts: vec![0.125, 0.0625, 0.03125], zeta: (1.0, 2.0), x_samples: 17 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberRelation {
    pub xs: Vec<f64>,
    pub zetas: Vec<f64>,
    pub h0: Vec<Vec<C64>>,
    pub f0: Vec<Vec<C64>>,
    pub max_deviation: f64,
}

/// Right action h_t = f_t ∗ P.
#[derive(Clone, Debug)]
pub struct ModuleAction {
    pub h: KernelFamily,
    pub fiber: Option<FiberRelation>,
}

pub fn module_action(
    f: &KernelFamily,
    p: &DiscreteOperator,
    symbol: &ClassicalSymbol,
    disc: &Discretization,
    check: Option<&FiberCheck>,
) -> Result<ModuleAction> {
    if symbol.order > 0 {
        return Err(Error::SymbolOrder(symbol.order));
    }
    if !f.is_zero() && f.claimed_class != Some(FamilyClass::J) && f.claimed_class != Some(FamilyClass::J0) {
        return Err(Error::Class("module action needs a family tagged J".into()));
    }
    disc.grid.check_same(&p.grid)?;
    let pa = p.action();
    let fk = disc.kernels(&disc.materialize(f)?)?;
    let out = fk.iter().map(|k| k.as_ref().map(|k| k.dot(&pa))).collect();
    let h = nodal(f, disc, out, f.claimed_class);
    let fiber = match check {
        Some(c) => Some(fiber_relation(f, p, symbol, disc, c)?),
        None => None,
    };
    Ok(ModuleAction { h, fiber })
}

/// Compare ĥ₀ with f̂₀·σ₀, both obtained by Neville extrapolation of row
/// transforms at ζ/t over the dyadic levels.
pub fn fiber_relation(
    f: &KernelFamily,
    p: &DiscreteOperator,
    symbol: &ClassicalSymbol,
    disc: &Discretization,
    c: &FiberCheck,
) -> Result<FiberRelation> {
    let g = disc.grid;
    let how = match &f.repr {
        Representation::Nodal(n) => n.realization,
        _ => disc.realization,
    };
    let t_top = c.ts.iter().fold(0.0f64, |m, v| m.max(*v));
    let t_low = c.ts.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    // ζ on a lattice that is a DFT bin at every level
    let dz = g.dxi() * t_top;
    if c.zeta.1 / t_low > g.nyquist() * (1.0 + 1e-12) {
        return Err(Error::Aliasing(format!(
            "|ζ| = {} at t = {t_low} exceeds the grid Nyquist frequency {}",
            c.zeta.1,
            g.nyquist()
        )));
    }
    let mut zetas = Vec::new();
    let kmax = (c.zeta.1 / dz + 1e-9).floor() as i64;
    for k in -kmax..=kmax {
        let z = k as f64 * dz;
        // the Nyquist bin stands for both ±ξ, where σ₀ may differ
        let at_nyquist = z.abs() / t_low >= g.nyquist() * (1.0 - 1e-12);
        if z.abs() >= c.zeta.0 - 1e-12 && !at_nyquist {
            zetas.push(z);
        }
    }
    let rows: Vec<usize> = (0..c.x_samples).map(|i| i * (g.n - 1) / (c.x_samples - 1).max(1)).collect();
    let pa = p.action();
    let mut hs = Vec::new();
    let mut fs = Vec::new();
    for &t in &c.ts {
        let k = f.kernel_at(t, &g, how)?;
        let mut hrow = Vec::new();
        let mut frow = Vec::new();
        for &i in &rows {
            let hr = k.row(i).dot(&pa);
            hrow.push(zetas.iter().map(|&z| row_transform(hr.view(), &g, i, z / t, how)).collect::<Vec<_>>());
            frow.push(zetas.iter().map(|&z| row_transform(k.row(i), &g, i, z / t, how)).collect::<Vec<_>>());
        }
        hs.push(hrow);
        fs.push(frow);
    }
    let xs: Vec<f64> = rows.iter().map(|&i| g.x(i)).collect();
    let mut h0 = vec![vec![C64::new(0.0, 0.0); zetas.len()]; rows.len()];
    let mut f0 = h0.clone();
    let mut dev: f64 = 0.0;
    for ix in 0..rows.len() {
        for iz in 0..zetas.len() {
            let hv: Vec<C64> = hs.iter().map(|h| h[ix][iz]).collect();
            let fv: Vec<C64> = fs.iter().map(|f| f[ix][iz]).collect();
            h0[ix][iz] = extrapolate_to_zero(&c.ts, &hv);
            f0[ix][iz] = extrapolate_to_zero(&c.ts, &fv);
            let want = f0[ix][iz] * symbol.principal(xs[ix], zetas[iz]);
            dev = dev.max((h0[ix][iz] - want).norm());
        }
    }
    Ok(FiberRelation { xs, zetas, h0, f0, max_deviation: dev })
}
