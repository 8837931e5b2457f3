//! Turning a fiberwise Fourier profile into a kernel matrix on the x-grid.
//!
//! Three discretizations are offered. `Spectral` keeps the band-limited part
//! of the kernel and periodizes it (exact symbol on every DFT bin).
//! `Galerkin` integrates the kernel against an interpolating basis function
//! centred on each column node and periodizes the result, which keeps the
//! grid dependence of the continuum operator visible. `Nystrom` samples the kernel pointwise and is
//! only meant for kernels that are smooth at the grid scale.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::grid::GridSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Indicator of the grid cell (cell averages).
    Box,
    /// Keys cubic convolution kernel (a = −1/2), exact on quadratics.
    Keys,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Realization {
    Spectral,
    Nystrom,
    Galerkin(Basis),
}

impl Realization {
    /// Kernel matrices wrap around the x-domain.
    pub fn is_periodic(self) -> bool {
        !matches!(self, Realization::Nystrom)
    }
}

impl Default for Realization {
    fn default() -> Self {
        Realization::Spectral
    }
}

/// Ŵ(ω) = ∫ W(s) e^{−iωs} ds for the unit-spacing basis function W.
pub fn basis_transform(basis: Basis, w: f64) -> f64 {
    match basis {
        Basis::Box => {
            let h = 0.5 * w;
            if h.abs() < 1e-4 {
                1.0 - h * h / 6.0 + h.powi(4) / 120.0
            } else {
                h.sin() / h
            }
        }
        Basis::Keys => {
            // W(s) = 1.5s³ − 2.5s² + 1 on [0,1]; −0.5s³ + 2.5s² − 4s + 2 on [1,2]
            2.0 * (poly_cos_integral(&[1.0, 0.0, -2.5, 1.5], 0.0, 1.0, w)
                + poly_cos_integral(&[2.0, -4.0, 2.5, -0.5], 1.0, 2.0, w))
        }
    }
}

/// ∫_a^b P(s) cos(ωs) ds for P given by ascending coefficients.
pub fn poly_cos_integral(c: &[f64], a: f64, b: f64, w: f64) -> f64 {
    if w.abs() * b.abs().max(a.abs()) < 0.5 {
        // cos(ωs) = Σ (−1)^n (ωs)^{2n}/(2n)!
        let mut total = 0.0;
        let mut fact = 1.0;
        for n in 0..24 {
            if n > 0 {
                fact *= (2 * n - 1) as f64 * (2 * n) as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let mut term = 0.0;
            for (k, ck) in c.iter().enumerate() {
                let p = (k + 2 * n + 1) as i32;
                term += ck * (b.powi(p) - a.powi(p)) / p as f64;
            }
            total += sign * w.powi(2 * n as i32) / fact * term;
        }
        return total;
    }
    // ∫ P e^{iωs} ds = e^{iωs} Σ_j (−1)^j P^{(j)}(s) / (iω)^{j+1}
    let eval = |s: f64| -> f64 {
        let mut deriv: Vec<f64> = c.to_vec();
        let mut acc = C64::new(0.0, 0.0);
        let iw = C64::new(0.0, w);
        let mut denom = iw;
        let mut sign = 1.0;
        while !deriv.is_empty() {
            let v: f64 = deriv.iter().rev().fold(0.0, |a, ck| a * s + ck);
            acc += sign * v / denom;
            deriv = deriv.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect();
            denom *= iw;
            sign = -sign;
        }
        (C64::from_polar(1.0, w * s) * acc).re
    };
    eval(b) - eval(a)
}

/// Periodic band-limited kernel values κ(nΔx), n = 0…N−1, for the symbol
/// ξ ↦ sym(ξ) sampled on the DFT bins (Nyquist bin averaged over ±).
pub fn spectral_offsets<F: Fn(f64) -> C64>(grid: &GridSpec, sym: F) -> Vec<C64> {
    let n = grid.n;
    let mut buf: Vec<C64> = (0..n)
        .map(|k| {
            if k == n / 2 {
                let xi = grid.nyquist();
                0.5 * (sym(xi) + sym(-xi))
            } else {
                sym(grid.freq(k))
            }
        })
        .collect();
    inverse_fft(&mut buf);
    let s = 1.0 / (n as f64 * grid.dx());
    buf.iter().map(|v| v * s).collect()
}

pub fn inverse_fft(buf: &mut [C64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
}

pub fn forward_fft(buf: &mut [C64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// Lattice symbol of the Galerkin kernel at frequency ξ, by Poisson summation:
/// Σ_k A(t(ξ + 2πk/Δx))·Ŵ(Δxξ + 2πk), with A supported in
/// zeta_inner ≤ |ζ| ≤ zeta_extent.
pub fn galerkin_symbol<F: Fn(f64) -> C64>(
    grid: &GridSpec,
    t: f64,
    profile: &F,
    zeta_extent: f64,
    zeta_inner: f64,
    basis: Basis,
    xi: f64,
) -> C64 {
    let dx = grid.dx();
    let period = 2.0 * PI / dx;
    let reach = zeta_extent / t;
    let k_lo = ((-reach - xi) / period).floor() as i64;
    let k_hi = ((reach - xi) / period).ceil() as i64;
    let mut acc = C64::new(0.0, 0.0);
    for k in k_lo..=k_hi {
        let z = t * (xi + k as f64 * period);
        if z.abs() > zeta_extent || z.abs() < zeta_inner {
            continue;
        }
        acc += profile(z) * basis_transform(basis, dx * xi + 2.0 * PI * k as f64);
    }
    acc
}
