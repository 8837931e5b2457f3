use adcalc::algebra::{adjoint, convolve, Discretization};
use adcalc::corpus::{j_corpus, Generator};
use adcalc::dnc::GroupoidSpec;
use adcalc::error::Error;
use adcalc::family::Representation;
use adcalc::grid::{GridSpec, QuadRule, QuadratureSpec};
use adcalc::module::*;
use adcalc::operator::{to_nalgebra, DiscreteOperator};
use adcalc::profile::{BumpProfile, Envelope, FreqProfile, Normalization, TimeProfile};
use adcalc::quantization::{kn_quantize, probe_symbol, ClassicalSymbol};
use adcalc::realize::Realization;
use adcalc::C64;
use ndarray::Array2;
use std::f64::consts::PI;

const L: f64 = 4.0 * PI;

fn line() -> GroupoidSpec {
    GroupoidSpec::pair_line(L).unwrap()
}

fn disc(n: usize) -> Discretization {
    Discretization::new(GridSpec::new(n, L).unwrap(), QuadratureSpec::default(), Realization::Spectral).unwrap()
}

fn element(g: &Generator, d: &Discretization) -> ModuleElement {
    let f = g.build(line(), (d.quad.t_min, d.quad.t_max)).unwrap();
    ModuleElement::new(&f, *d).unwrap()
}

fn corpus(d: &Discretization) -> Vec<ModuleElement> {
    j_corpus().iter().map(|(_, g)| element(g, d)).collect()
}

fn eigs(op: &DiscreteOperator) -> Vec<f64> {
    let m = to_nalgebra(&op.action());
    let h = (&m + m.adjoint()) * C64::from(0.5);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn op_norm(op: &DiscreteOperator) -> f64 {
    to_nalgebra(&op.action()).singular_values().max()
}

fn rel_op(a: &DiscreteOperator, b: &DiscreteOperator) -> f64 {
    let d = to_nalgebra(&a.action()) - to_nalgebra(&b.action());
    d.norm() / to_nalgebra(&b.action()).norm().max(f64::MIN_POSITIVE)
}

fn kernels(e: &ModuleElement) -> Vec<Option<Array2<C64>>> {
    e.kernels().to_vec()
}

fn rel_elements(a: &ModuleElement, b: &ModuleElement) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in kernels(a).iter().zip(&kernels(b)) {
        let z = |k: &Option<Array2<C64>>, i: usize, j: usize| k.as_ref().map_or(C64::new(0.0, 0.0), |k| k[[i, j]]);
        let n = a.disc.grid.n;
        for i in 0..n {
            for j in 0..n {
                num += (z(x, i, j) - z(y, i, j)).norm_sqr();
                den += z(y, i, j).norm_sqr();
            }
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

#[test]
fn inner_product_with_zero() {
    let d = disc(64);
    let f = element(&j_corpus()[0].1, &d);
    let z = ModuleElement::zero(line(), d);
    assert_eq!(inner_product(&f, &z).unwrap().max_abs(), 0.0);
    assert!(rank_one(&z, &f, &f).unwrap().is_zero());
}

#[test]
fn positivity_and_cauchy_schwarz() {
    let d = disc(64);
    let els = corpus(&d);
    for f in &els {
        let ff = inner_product(f, f).unwrap();
        let e = eigs(&ff);
        assert!(e[0] >= -1e-6 * op_norm(&ff), "{}", e[0]);
    }
    for f in &els {
        for g in &els {
            let lhs = op_norm(&inner_product(f, g).unwrap());
            let rhs = op_norm(&inner_product(f, f).unwrap()).sqrt() * op_norm(&inner_product(g, g).unwrap()).sqrt();
            assert!(lhs <= rhs + 1e-8);
        }
    }
}

#[test]
fn inner_product_is_right_linear() {
    let d = disc(64);
    let els = corpus(&d);
    let syms = [
        ClassicalSymbol::order_zero(Envelope::one(), Envelope::one(), 0.0),
        ClassicalSymbol::order_zero(Envelope::one(), Envelope::constant(C64::new(0.0, 0.0)), 2.0),
        ClassicalSymbol::order_zero(Envelope::Cosine { offset: 1.0, amp: 0.5, freq: 0.25 }, Envelope::one(), 1.0),
    ];
    for sym in &syms {
        let p = kn_quantize(sym, &d.grid).unwrap();
        for (f, g) in els.iter().zip(els.iter().skip(1)) {
            let lhs = inner_product(f, &g.act(&p).unwrap()).unwrap();
            let rhs = DiscreteOperator::from_action(inner_product(f, g).unwrap().action().dot(&p.action()), d.grid);
            assert!(rel_op(&lhs, &rhs) < 1e-6);
        }
    }
}

#[test]
fn gauge_is_an_exact_shift() {
    let d = disc(64);
    let delta = d.quad.log_step().unwrap();
    let f = element(&j_corpus()[0].1, &d);
    let g = element(&j_corpus()[2].1, &d);
    assert_eq!(kernels(&gauge(1.0, &f).unwrap()), kernels(&f));
    let s = (9.0 * delta).exp();
    let s2 = (-4.0 * delta).exp();
    let a = gauge(s, &gauge(s2, &f).unwrap()).unwrap();
    let b = gauge(s * s2, &f).unwrap();
    assert_eq!(kernels(&a), kernels(&b));
    let before = inner_product(&f, &g).unwrap();
    let after = inner_product(&gauge(s, &f).unwrap(), &gauge(s, &g).unwrap()).unwrap();
    assert!(rel_op(&after, &before) <= 1e-8);
    assert!(matches!(gauge(2.0, &f), Err(Error::Range(_))));
    assert!(matches!(gauge((100.0 * delta).exp(), &f), Err(Error::Range(_))));
}

#[test]
fn inner_product_symbol() {
    // ⟨f|g⟩ has symbol ∫ conj(f̂₀(x, tξ)) ĝ₀(x, tξ) dt/t
    let d = disc(256);
    let fg = Generator::Hermite { order: 3, scale: 1.0, envelope: Envelope::one(), time: TimeProfile::cutoff() };
    let gg = Generator::Hermite {
        order: 2,
        scale: 1.2,
        envelope: Envelope::Cosine { offset: 1.0, amp: 0.3, freq: 0.5 },
        time: TimeProfile::cutoff(),
    };
    let ip = inner_product(&element(&fg, &d), &element(&gg, &d)).unwrap();
    let (a, b) = (FreqProfile::hermite(3, 1.0), FreqProfile::hermite(2, 1.2));
    let x0 = PI;
    for xi in [12.0f64, 16.0, 20.0] {
        let n = 20000;
        let (lo, hi) = ((1e-6f64).ln(), (40.0 / xi).ln());
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = (lo + i as f64 * h).exp();
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * (a.eval(t * xi).conj() * b.eval(t * xi)).re;
        }
        let want = acc * h / 3.0 * (1.0 + 0.3 * (0.5 * x0).cos());
        let got = probe_symbol(&ip, x0, xi, 3.0).unwrap();
        assert!((got - want).norm() <= 0.02 * want.abs(), "ξ={xi}: {got} vs {want}");
    }
}

#[test]
fn rank_one_identities() {
    let d = disc(64);
    let els = corpus(&d);
    let (f, g, h, k) = (&els[0], &els[1], &els[2], &els[3]);
    let lhs = inner_product(&rank_one(f, g, h).unwrap(), k).unwrap();
    let rhs = inner_product(h, &rank_one(g, f, k).unwrap()).unwrap();
    assert!(rel_op(&lhs, &rhs) < 1e-6);

    let x = &els[4];
    let left = rank_one(f, g, &rank_one(h, k, x).unwrap()).unwrap();
    let fgh = f.act(&inner_product(g, h).unwrap()).unwrap();
    let right = rank_one(&fgh, k, x).unwrap();
    assert!(rel_elements(&left, &right) < 1e-6);
}

#[test]
fn crossed_sample_at_one_is_the_product_with_the_adjoint() {
    let d = disc(64);
    let fs = j_corpus()[0].1.build(line(), (d.quad.t_min, d.quad.t_max)).unwrap();
    let gs = j_corpus()[1].1.build(line(), (d.quad.t_min, d.quad.t_max)).unwrap();
    let (f, g) = (ModuleElement::new(&fs, d).unwrap(), ModuleElement::new(&gs, d).unwrap());
    let c = crossed_sample(&f, &g, 1.0).unwrap();
    let want = convolve(&fs, &adjoint(&gs, &d).unwrap(), &d).unwrap();
    let Representation::Nodal(w) = &want.repr else { panic!() };
    for (a, b) in c.kernels().iter().zip(&w.kernels) {
        match (a, b) {
            (Some(a), Some(b)) => {
                let e = (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max);
                assert!(e < 1e-12 * b.iter().map(|v| v.norm()).fold(1e-300, f64::max));
            }
            (None, None) => {}
            (a, b) => panic!("support differs: {} vs {}", a.is_some(), b.is_some()),
        }
    }
}

#[test]
fn crossed_elements_decay_and_reproduce_rank_one() {
    let d = disc(128);
    let els = corpus(&d);
    let cfg = CrossedConfig::default();
    let c = crossed_element(&els[0], &els[0], &cfg).unwrap();
    assert!(c.slope_small >= 6.0 && c.slope_large >= 6.0, "{} {}", c.slope_small, c.slope_large);
    assert_eq!(c.s.len(), c.sup_norms.len());

    let (f, g, h) = (&els[0], &els[3], &els[1]);
    let pi = crossed_apply(f, g, h, &cfg).unwrap();
    let theta = rank_one(f, g, h).unwrap();
    let e = rel_elements(&pi, &theta);
    assert!(e <= 1e-3, "{e}");

    let strict = CrossedConfig { q: 50.0, ..cfg };
    assert!(matches!(crossed_element(&els[0], &els[0], &strict), Err(Error::InsufficientDecay(_))));
}

#[test]
fn lattice_window_is_a_discrete_partition_of_unity() {
    let q = QuadratureSpec::default();
    let (nodes, w) = q.nodes_weights();
    let win = LatticeWindow { psi: BumpProfile::psi_window(Normalization::Square), delta: q.log_step().unwrap() };
    for xi in [3.9, 5.0, 17.3, 40.0, 64.0] {
        let s: f64 = nodes.iter().zip(&w).map(|(t, w)| w * win.eval(t * xi).powi(2)).sum();
        assert!((s - 1.0).abs() < 1e-12, "{xi}: {s}");
    }
    // and ∫ψ̃² dt/t = 1 by an independent fine rule
    let n = 200000;
    let (lo, hi) = (1.05f64.ln(), 1.95f64.ln());
    let h = (hi - lo) / n as f64;
    let total: f64 = (0..n).map(|i| win.eval((lo + (i as f64 + 0.5) * h).exp()).powi(2) * h).sum();
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

fn smoothing_kernel(d: &Discretization) -> Array2<C64> {
    let g = Generator::Gaussian { scale: 6.0, envelope: Envelope::one() }.build(line(), (1.0, 1.0)).unwrap();
    g.kernel_at(1.0, &d.grid, Realization::Spectral).unwrap()
}

#[test]
fn full_module_witness() {
    let d = disc(256);
    let psi = BumpProfile::psi_window(Normalization::Square);
    let cfg = WitnessConfig::default();
    let bare = full_witness(&psi, None, line(), &d, &cfg).unwrap();
    assert!(bare.min_eig_band >= 0.5, "{}", bare.min_eig_band);
    assert!(bare.min_eig_all < 0.1);
    assert!(!bare.certified);
    // independent eigen-check of the band statement: ⟨f|f⟩ is a Fourier multiplier here
    let e = eigs(&bare.gram);
    assert!(e[0] >= -1e-10 && *e.last().unwrap() <= 1.0 + 1e-8);

    let h = smoothing_kernel(&d);
    let w = full_witness(&psi, Some(&h), line(), &d, &cfg).unwrap();
    assert!(w.min_eig_all >= 0.1, "{}", w.min_eig_all);
    assert!(eigs(&w.gram)[0] >= 0.1);
    assert!(w.decay_slope >= 6.0, "{}", w.decay_slope);
    assert!(w.certified);

    let zero = BumpProfile { scale: 0.0, ..psi };
    assert!(full_witness(&zero, None, line(), &d, &cfg).is_err());
    let lin = BumpProfile::psi_window(Normalization::Linear);
    assert!(matches!(full_witness(&lin, None, line(), &d, &cfg), Err(Error::Profile(_))));
}

#[test]
fn corner_decomposition() {
    let d = disc(256);
    let psi = BumpProfile::psi_window(Normalization::Square);
    let cfg = WitnessConfig::default();
    let bare = full_witness(&psi, None, line(), &d, &cfg).unwrap();
    assert!(matches!(corner_decompose(&DiscreteOperator::identity(d.grid), &bare), Err(Error::MissingCertificate(_))));

    let w = full_witness(&psi, Some(&smoothing_kernel(&d)), line(), &d, &cfg).unwrap();
    let c = corner_decompose(&DiscreteOperator::zero(d.grid), &w).unwrap();
    assert_eq!(c.q_part.max_abs(), 0.0);
    assert_eq!(c.r_part.max_abs(), 0.0);

    let c = corner_decompose(&DiscreteOperator::identity(d.grid), &w).unwrap();
    let e = to_nalgebra(&w.gram.action());
    let want = nalgebra::DMatrix::<C64>::identity(256, 256) - &e * &e;
    let got = to_nalgebra(&c.r_part.action());
    assert!((got - &want).norm() < 1e-10 * want.norm());
    assert!(c.fourier_slope >= 6.0);

    let sym = ClassicalSymbol::order_zero(Envelope::Cosine { offset: 1.0, amp: 0.5, freq: 0.25 }, Envelope::constant(C64::new(0.0, 1.0)), 2.0);
    let p = kn_quantize(&sym, &d.grid).unwrap();
    let c = corner_decompose(&p, &w).unwrap();
    assert!(c.probe_slope >= 6.0, "{:?}", c.probe_norms);
}

#[test]
fn mismatched_quadratures_are_rejected() {
    let d = disc(64);
    let q = QuadratureSpec { t_min: 2f64.powi(-10), t_max: 16.0, n_nodes: 257, rule: QuadRule::LogTrapezoidal };
    let d2 = Discretization::new(d.grid, q, Realization::Spectral).unwrap();
    let f = element(&j_corpus()[0].1, &d);
    let g = element(&j_corpus()[0].1, &d2);
    assert!(matches!(inner_product(&f, &g), Err(Error::GridMismatch(_))));
}
