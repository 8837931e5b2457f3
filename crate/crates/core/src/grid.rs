//! Spatial grids and logarithmic t-quadrature.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;

/// Periodic-compatible grid x_j = −L + jΔx, Δx = 2L/N, j = 0…N−1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config { path: "grid.n".into(), msg: format!("{n} is not a power of two ≥ 8") });
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config { path: "grid.half_width".into(), msg: "must be positive".into() });
        }
        Ok(GridSpec { n, half_width })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Frequency spacing 2π/(2L).
    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Frequency of DFT bin k in FFT order; the Nyquist bin reports +N/2.
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.n as i64;
        let k = k as i64;
        let s = if k <= n / 2 { k } else { k - n };
        s as f64 * self.dxi()
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.freq(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        self.n as f64 / 2.0 * self.dxi()
    }

    /// Low-frequency floor: two Fourier bins.
    pub fn floor(&self) -> f64 {
        2.0 * self.dxi()
    }

    /// Signed distance x − y wrapped into [−L, L).
    pub fn wrap(&self, d: f64) -> f64 {
        let p = 2.0 * self.half_width;
        let mut r = (d + self.half_width).rem_euclid(p) - self.half_width;
        if r >= self.half_width {
            r -= p;
        }
        r
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "N={} L={} vs N={} L={}",
                self.n, self.half_width, other.n, other.half_width
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadRule {
    LogTrapezoidal,
    LogGaussLegendre,
}

/// Discretization of ∫ · dt/t over [t_min, t_max].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n_nodes: usize,
    pub rule: QuadRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { t_min: 2f64.powi(-10), t_max: 16.0, n_nodes: 129, rule: QuadRule::LogTrapezoidal }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: &str| Err(Error::Config { path: path.into(), msg: msg.into() });
        if !(self.t_min > 0.0 && self.t_min.is_finite()) {
            return bad("quadrature.t_min", "must be positive");
        }
        if !(self.t_max > self.t_min && self.t_max.is_finite()) {
            return bad("quadrature.t_max", "must exceed t_min");
        }
        if self.n_nodes < 2 {
            return bad("quadrature.n_nodes", "need at least two nodes");
        }
        Ok(())
    }

    /// Nodes (increasing) and weights for ∫ f(t) dt/t.
    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (self.t_min.ln(), self.t_max.ln());
        match self.rule {
            QuadRule::LogTrapezoidal => {
                let n = self.n_nodes;
                let d = (b - a) / (n - 1) as f64;
                let nodes = (0..n)
                    .map(|j| if j == n - 1 { self.t_max } else { (a + j as f64 * d).exp() })
                    .collect();
                let weights = (0..n).map(|j| if j == 0 || j == n - 1 { 0.5 * d } else { d }).collect();
                (nodes, weights)
            }
            QuadRule::LogGaussLegendre => {
                let (gx, gw) = gauss_legendre(self.n_nodes);
                let h = 0.5 * (b - a);
                let nodes = gx.iter().map(|x| (a + h * (x + 1.0)).exp()).collect();
                let weights = gw.iter().map(|w| h * w).collect();
                (nodes, weights)
            }
        }
    }

    /// Log step between consecutive nodes (log-trapezoidal rule only).
    pub fn log_step(&self) -> Option<f64> {
        match self.rule {
            QuadRule::LogTrapezoidal => Some((self.t_max / self.t_min).ln() / (self.n_nodes - 1) as f64),
            QuadRule::LogGaussLegendre => None,
        }
    }
}
