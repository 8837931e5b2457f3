//! Dense operators on grid functions.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::grid::GridSpec;

/// Matrix of kernel values; applying it to v means Δx·A·v.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    pub matrix: Array2<C64>,
    pub grid: GridSpec,
    pub quadrature_weight: f64,
}

impl DiscreteOperator {
    pub fn from_kernel(matrix: Array2<C64>, grid: GridSpec) -> Self {
        DiscreteOperator { matrix, grid, quadrature_weight: grid.dx() }
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self::from_kernel(Array2::zeros((grid.n, grid.n)), grid)
    }

    pub fn identity(grid: GridSpec) -> Self {
        let mut m = Array2::zeros((grid.n, grid.n));
        for i in 0..grid.n {
            m[[i, i]] = C64::from(1.0 / grid.dx());
        }
        Self::from_kernel(m, grid)
    }

    /// Operator whose action is the plain matrix product by `a`.
    pub fn from_action(a: Array2<C64>, grid: GridSpec) -> Self {
        let w = grid.dx();
        Self::from_kernel(a.mapv(|v| v / w), grid)
    }

    /// The matrix M with (Pv) = M·v.
    pub fn action(&self) -> Array2<C64> {
        self.matrix.mapv(|v| v * self.quadrature_weight)
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.grid.n {
            return Err(crate::error::Error::GridMismatch(format!(
                "vector of length {} on a grid of size {}",
                v.len(),
                self.grid.n
            )));
        }
        let x = Array1::from(v.to_vec());
        let y = self.matrix.dot(&x);
        Ok(y.iter().map(|c| c * self.quadrature_weight).collect())
    }

    pub fn compose(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        self.grid.check_same(&other.grid)?;
        let m = self.matrix.dot(&other.matrix).mapv(|v| v * self.quadrature_weight);
        Ok(DiscreteOperator { matrix: m, grid: self.grid, quadrature_weight: self.quadrature_weight })
    }

    pub fn adjoint(&self) -> DiscreteOperator {
        DiscreteOperator {
            matrix: self.matrix.t().mapv(|v| v.conj()),
            grid: self.grid,
            quadrature_weight: self.quadrature_weight,
        }
    }

    pub fn add(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        self.grid.check_same(&other.grid)?;
        Ok(DiscreteOperator { matrix: &self.matrix + &other.matrix, ..self.clone() })
    }

    pub fn sub(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        self.grid.check_same(&other.grid)?;
        Ok(DiscreteOperator { matrix: &self.matrix - &other.matrix, ..self.clone() })
    }

    pub fn scale(&self, c: C64) -> DiscreteOperator {
        DiscreteOperator { matrix: self.matrix.mapv(|v| v * c), ..self.clone() }
    }

    /// Frobenius norm of the action matrix.
    pub fn frobenius(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() * self.quadrature_weight
    }

    /// Largest |entry| of the action matrix.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0f64, |m, v| m.max(v.norm())) * self.quadrature_weight
    }

    /// Spectral norm of the action matrix (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let a = to_nalgebra(&self.action());
        a.singular_values().iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Eigenvalues (ascending) of the Hermitian part of the action matrix.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let a = self.action();
        let h = (&a + &a.t().mapv(|v| v.conj())).mapv(|v| v * 0.5);
        let m = to_nalgebra(&h);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Hermitian eigen-decomposition of the action matrix: (values, vectors as columns).
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Array2<C64>) {
        let a = self.action();
        let h = (&a + &a.t().mapv(|v| v.conj())).mapv(|v| v * 0.5);
        let e = to_nalgebra(&h).symmetric_eigen();
        let n = self.grid.n;
        let vecs = Array2::from_shape_fn((n, n), |(i, j)| e.eigenvectors[(i, j)]);
        (e.eigenvalues.iter().copied().collect(), vecs)
    }

    /// ‖A − B‖_F / ‖B‖_F (absolute when B = 0).
    pub fn rel_diff(&self, reference: &DiscreteOperator) -> f64 {
        let d = self.sub(reference).map(|d| d.frobenius()).unwrap_or(f64::INFINITY);
        let r = reference.frobenius();
        if r > 0.0 {
            d / r
        } else {
            d
        }
    }
}

pub fn to_nalgebra(a: &Array2<C64>) -> DMatrix<C64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub fn l2(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let r = l2(b);
    if r > 0.0 {
        d / r
    } else {
        d
    }
}
