//! Small numerical toolkit: Gauss–Legendre rules, smooth steps, regression
//! helpers and finite-difference stencils.

use nalgebra::{DMatrix, DVector};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on [a, b]: `panels` equal panels of `order` points.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        CompositeRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    CompositeRule::new(a, b, panels, 16).integrate(f)
}

/// Smooth transition S(τ): 0 for τ ≤ 0, 1 for τ ≥ 1, C^∞ in between.
pub fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / tau).exp();
        let b = (-1.0 / (1.0 - tau)).exp();
        a / (a + b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Ordinary least squares y ≈ slope·x + intercept.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return LineFit { slope: f64::NAN, intercept: f64::NAN, residual: f64::NAN };
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    LineFit { slope, intercept, residual: (ss / n).sqrt() }
}

/// Decay exponent of `vals` as the abscissae shrink: the slope of log|v|
/// against log s. Values below `floor`·max are treated as numerically zero
/// and dropped; when fewer than two points survive the decay is reported as
/// unbounded.
pub fn loglog_slope(scales: &[f64], vals: &[f64], floor: f64) -> LineFit {
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return LineFit { slope: f64::INFINITY, intercept: f64::NEG_INFINITY, residual: 0.0 };
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(vals)
        .filter(|(_, v)| v.abs() > floor * peak)
        .map(|(s, v)| (s.ln(), v.abs().ln()))
        .unzip();
    if xs.len() < 2 {
        return LineFit { slope: f64::INFINITY, intercept: f64::NAN, residual: 0.0 };
    }
    line_fit(&xs, &ys)
}

/// Successive pairwise slopes, ordered as given.
pub fn local_slopes(scales: &[f64], vals: &[f64]) -> Vec<f64> {
    scales
        .windows(2)
        .zip(vals.windows(2))
        .map(|(s, v)| (v[1].abs().ln() - v[0].abs().ln()) / (s[1].ln() - s[0].ln()))
        .collect()
}

/// Least-squares polynomial fit; returns coefficients c₀…c_deg and the
/// relative residual ‖y − p(x)‖/‖y‖ (absolute when y = 0).
pub fn polyfit(xs: &[f64], ys: &[f64], deg: usize) -> (Vec<f64>, f64) {
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(xs.len(), deg + 1, |i, j| (xs[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("svd solve");
    let r = &a * &c - &b;
    let norm = b.norm();
    let res = if norm > 0.0 { r.norm() / norm } else { r.norm() };
    let coeffs = (0..=deg).map(|j| c[j] / scale.powi(j as i32)).collect();
    (coeffs, res)
}

/// Fourth-order central difference stencil for derivative order 0..=3.
/// Returns (offsets·weights); divide the weighted sum by h^order.
pub fn fd_stencil(order: usize) -> Option<&'static [(i32, f64)]> {
    const D0: [(i32, f64); 1] = [(0, 1.0)];
    const D1: [(i32, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
    const D2: [(i32, f64); 5] = [
        (-2, -1.0 / 12.0),
        (-1, 16.0 / 12.0),
        (0, -30.0 / 12.0),
        (1, 16.0 / 12.0),
        (2, -1.0 / 12.0),
    ];
    const D3: [(i32, f64); 6] = [
        (-3, 1.0 / 8.0),
        (-2, -1.0),
        (-1, 13.0 / 8.0),
        (1, -13.0 / 8.0),
        (2, 1.0),
        (3, -1.0 / 8.0),
    ];
    match order {
        0 => Some(&D0),
        1 => Some(&D1),
        2 => Some(&D2),
        3 => Some(&D3),
        _ => None,
    }
}

/// Half-width (in nodes) of the stencil for a given derivative order.
pub fn fd_reach(order: usize) -> usize {
    match order {
        0 => 0,
        1 | 2 => 2,
        _ => 3,
    }
}

/// Golden-section maximization of a unimodal function on [a, b].
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Neville evaluation at 0 of the interpolating polynomial through (xs, ys).
pub fn extrapolate_to_zero<T>(xs: &[f64], ys: &[T]) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T>,
{
    let n = xs.len();
    let mut p: Vec<T> = ys.to_vec();
    for k in 1..n {
        for i in 0..n - k {
            let (xi, xk) = (xs[i], xs[i + k]);
            // p_i ← (0 − x_{i+k})·p_i/(x_i − x_{i+k}) + (x_i − 0)·p_{i+1}/(x_i − x_{i+k})
            p[i] = p[i] * (-xk / (xi - xk)) + p[i + 1] * (xi / (xi - xk));
        }
    }
    p[0]
}
