//! Scalar building blocks for analytic kernel families: bump profiles,
//! spatial envelopes, frequency profiles and time profiles.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::{smooth_step, CompositeRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpKind {
    /// Vanishes near 0, normalized by ∫₀^∞ h(s²) ds/s = 1.
    HProfile,
    /// Identically 1 on [0, lo], 0 beyond hi.
    ChiCutoff,
    /// Supported in (1, 2).
    PsiWindow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// ∫ ψ dt/t = 1
    Linear,
    /// ∫ ψ² dt/t = 1
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub kind: BumpKind,
    pub lo: f64,
    pub hi: f64,
    pub normalization: Normalization,
    pub scale: f64,
}

fn raw_bump(v: f64, lo: f64, hi: f64) -> f64 {
    if v <= lo || v >= hi {
        return 0.0;
    }
    let w = hi - lo;
    (1.0 - w * w / (4.0 * (v - lo) * (hi - v))).exp()
}

impl BumpProfile {
    /// h-profile on v ∈ (1/4, 4), evaluated at v = s².
    pub fn h_profile() -> Self {
        Self::h_profile_on(0.25, 4.0)
    }

    pub fn h_profile_on(lo: f64, hi: f64) -> Self {
        let mut b = BumpProfile { kind: BumpKind::HProfile, lo, hi, normalization: Normalization::Linear, scale: 1.0 };
        // ∫₀^∞ h(s²) ds/s = ½ ∫ h(v) dv/v
        let total = 0.5 * b.rule().integrate(|v| raw_bump(v, lo, hi) / v);
        b.scale = 1.0 / total;
        b
    }

    pub fn chi_cutoff(lo: f64, hi: f64) -> Self {
        BumpProfile { kind: BumpKind::ChiCutoff, lo, hi, normalization: Normalization::Linear, scale: 1.0 }
    }

    pub fn psi_window(normalization: Normalization) -> Self {
        Self::psi_window_on(1.05, 1.95, normalization).expect("default window lies in (1,2)")
    }

    pub fn psi_window_on(lo: f64, hi: f64, normalization: Normalization) -> Result<Self> {
        if !(lo >= 1.0 && hi <= 2.0 && lo < hi) {
            return Err(Error::Profile(format!("psi-window support ({lo}, {hi}) not inside (1, 2)")));
        }
        let mut b = BumpProfile { kind: BumpKind::PsiWindow, lo, hi, normalization, scale: 1.0 };
        let total = match normalization {
            Normalization::Linear => b.rule().integrate(|t| raw_bump(t, lo, hi) / t),
            Normalization::Square => b.rule().integrate(|t| raw_bump(t, lo, hi).powi(2) / t),
        };
        b.scale = match normalization {
            Normalization::Linear => 1.0 / total,
            Normalization::Square => 1.0 / total.sqrt(),
        };
        Ok(b)
    }

    fn rule(&self) -> CompositeRule {
        CompositeRule::new(self.lo, self.hi, 64, 16)
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self.kind {
            BumpKind::ChiCutoff => smooth_step((self.hi - v) / (self.hi - self.lo)),
            _ => self.scale * raw_bump(v, self.lo, self.hi),
        }
    }

    /// Normalization integral selected by the profile kind (1 when valid).
    pub fn normalization_integral(&self) -> f64 {
        match (self.kind, self.normalization) {
            (BumpKind::HProfile, _) => 0.5 * self.rule().integrate(|v| self.eval(v) / v),
            (BumpKind::PsiWindow, Normalization::Linear) => self.rule().integrate(|t| self.eval(t) / t),
            (BumpKind::PsiWindow, Normalization::Square) => self.rule().integrate(|t| self.eval(t).powi(2) / t),
            (BumpKind::ChiCutoff, _) => self.eval(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Profile(format!("{:?} profile has zero or invalid scale", self.kind)));
        }
        match self.kind {
            BumpKind::PsiWindow if !(self.lo >= 1.0 && self.hi <= 2.0) => {
                return Err(Error::Profile("psi-window support not inside (1, 2)".into()))
            }
            BumpKind::HProfile if self.lo <= 0.0 => {
                return Err(Error::Profile("h-profile must vanish near 0".into()))
            }
            _ => {}
        }
        let n = self.normalization_integral();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::Profile(format!("{:?} normalization integral is {n}, expected 1", self.kind)));
        }
        Ok(())
    }
}

/// Spatial envelope c(x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Envelope {
    Constant { re: f64, im: f64 },
    Gaussian { amp: f64, center: f64, width: f64 },
    Cosine { offset: f64, amp: f64, freq: f64 },
}

impl Envelope {
    pub fn one() -> Self {
        Envelope::Constant { re: 1.0, im: 0.0 }
    }

    pub fn constant(c: C64) -> Self {
        Envelope::Constant { re: c.re, im: c.im }
    }

    pub fn eval(&self, x: f64) -> C64 {
        match *self {
            Envelope::Constant { re, im } => C64::new(re, im),
            Envelope::Gaussian { amp, center, width } => C64::from(amp * (-((x - center) / width).powi(2)).exp()),
            Envelope::Cosine { offset, amp, freq } => C64::from(offset + amp * (freq * x).cos()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Envelope::Constant { re, im } => re == 0.0 && im == 0.0,
            Envelope::Gaussian { amp, .. } => amp == 0.0,
            Envelope::Cosine { offset, amp, .. } => offset == 0.0 && amp == 0.0,
        }
    }
}

/// Time profile B(t) = t^power · ρ(t) · e^{−rapid/t} · w(t), where ρ is a
/// smooth cutoff (1 for t ≤ a, 0 for t ≥ b) and w an optional window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    #[serde(default)]
    pub power: i32,
    #[serde(default)]
    pub cutoff: Option<(f64, f64)>,
    #[serde(default)]
    pub rapid: f64,
    #[serde(default)]
    pub window: Option<BumpProfile>,
}

impl TimeProfile {
    pub fn constant() -> Self {
        TimeProfile { power: 0, cutoff: None, rapid: 0.0, window: None }
    }

    /// ρ(t): 1 on [0, 1/2], 0 on [1, ∞).
    pub fn cutoff() -> Self {
        TimeProfile { cutoff: Some((0.5, 1.0)), ..Self::constant() }
    }

    pub fn with_power(mut self, power: i32) -> Self {
        self.power = power;
        self
    }

    pub fn with_rapid(mut self, c: f64) -> Self {
        self.rapid = c;
        self
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v = if self.power == 0 { 1.0 } else { t.powi(self.power) };
        if let Some((a, b)) = self.cutoff {
            v *= smooth_step((b - t) / (b - a));
        }
        if self.rapid > 0.0 {
            v *= if t > 0.0 { (-self.rapid / t).exp() } else { 0.0 };
        }
        if let Some(w) = self.window {
            v *= w.eval(t);
        }
        v
    }

    /// Largest t where the profile can be nonzero.
    pub fn support_end(&self) -> f64 {
        let mut end = f64::INFINITY;
        if let Some((_, b)) = self.cutoff {
            end = end.min(b);
        }
        if let Some(w) = self.window {
            if w.kind != BumpKind::ChiCutoff {
                end = end.min(w.hi);
            }
        }
        end
    }

    /// Smallest t where the profile can be nonzero.
    pub fn support_start(&self) -> f64 {
        match self.window {
            Some(w) if w.kind != BumpKind::ChiCutoff => w.lo,
            _ => 0.0,
        }
    }
}

/// Fiberwise frequency profile A(ζ) and its inverse transform
/// Ǎ(U) = (2π)^{-1} ∫ A(ζ) e^{iUζ} dζ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FreqProfile {
    /// norm · (ζ/s)^{2k} e^{−(ζ/s)²}
    Hermite { order: u32, scale: f64, norm: f64 },
    /// σ(sign ζ) · ψ(|ζ|) · |ζ|^power · χ(|ζ|)
    Window { psi: BumpProfile, plus: (f64, f64), minus: (f64, f64), power: i32, chi: Option<BumpProfile> },
}

impl FreqProfile {
    /// Gaussian e^{−(ζ/s)²}: nonzero at the origin, so never of class J.
    pub fn gaussian(scale: f64) -> Self {
        FreqProfile::Hermite { order: 0, scale, norm: 1.0 }
    }

    /// Hermite window normalized so that ∫₀^∞ A(ζ) dζ/ζ = 1.
    pub fn hermite(order: u32, scale: f64) -> Self {
        assert!(order >= 1);
        // ∫ v^{2k} e^{−v²} dv/v = Γ(k)/2
        let gamma: f64 = (1..order).map(|j| j as f64).product();
        FreqProfile::Hermite { order, scale, norm: 2.0 / gamma }
    }

    pub fn window(psi: BumpProfile, plus: C64, minus: C64) -> Self {
        FreqProfile::Window { psi, plus: (plus.re, plus.im), minus: (minus.re, minus.im), power: 0, chi: None }
    }

    pub fn eval(&self, z: f64) -> C64 {
        match *self {
            FreqProfile::Hermite { order, scale, norm } => {
                let v = z / scale;
                C64::from(norm * v.powi(2 * order as i32) * (-v * v).exp())
            }
            FreqProfile::Window { psi, plus, minus, power, chi } => {
                let a = z.abs();
                let mut r = psi.eval(a);
                if r == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                if power != 0 {
                    r *= a.powi(power);
                }
                if let Some(c) = chi {
                    r *= c.eval(a);
                }
                let s = if z >= 0.0 { plus } else { minus };
                C64::new(s.0, s.1) * r
            }
        }
    }

    /// Radius in ζ beyond which the profile is below ~1e−18 of its peak.
    pub fn zeta_extent(&self) -> f64 {
        match *self {
            FreqProfile::Hermite { order, scale, .. } => scale * (order as f64).sqrt().max(1.0) * 7.5,
            FreqProfile::Window { psi, .. } => psi.hi,
        }
    }

    /// Inverse Fourier transform Ǎ(U).
    pub fn inverse(&self, u: f64) -> C64 {
        match *self {
            FreqProfile::Hermite { order, scale, norm } => {
                // ∫ ζ^{2k} e^{−ζ²/s²} e^{iUζ} dζ = (−1)^k G^{(2k)}(U), G(U) = s√π e^{−(sU/2)²}
                let w = scale * u / 2.0;
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let h = hermite_poly(2 * order as usize, w);
                let c = norm * sign * scale * PI.sqrt() / (2.0 * PI * 4f64.powi(order as i32));
                C64::from(c * h * (-w * w).exp())
            }
            FreqProfile::Window { psi, .. } => {
                let panels = 8 + (u.abs() * (psi.hi - psi.lo) / 2.0).ceil() as usize;
                let rule = CompositeRule::new(psi.lo, psi.hi, panels, 16);
                let mut acc = C64::new(0.0, 0.0);
                for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let e = C64::from_polar(1.0, u * z);
                    acc += (self.eval(z) * e + self.eval(-z) * e.conj()) * w;
                }
                acc / (2.0 * PI)
            }
        }
    }

    /// True when A vanishes on a neighbourhood of ζ = 0.
    pub fn vanishes_at_origin(&self) -> bool {
        match *self {
            FreqProfile::Hermite { order, .. } => order > 0,
            FreqProfile::Window { .. } => true,
        }
    }
}

/// Physicists' Hermite polynomial H_n(w).
pub fn hermite_poly(n: usize, w: f64) -> f64 {
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = 2.0 * w;
    for k in 1..n {
        let h2 = 2.0 * w * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;

    #[test]
    fn profiles_meet_their_normalizations() {
        for p in [
            BumpProfile::h_profile(),
            BumpProfile::psi_window(Normalization::Linear),
            BumpProfile::psi_window(Normalization::Square),
        ] {
            p.validate().unwrap();
        }
        // same integral through s rather than v = s²
        let h = BumpProfile::h_profile();
        let v = integrate(|s| h.eval(s * s) / s, 0.5, 2.0, 200);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chi_cutoff_is_one_near_zero() {
        let c = BumpProfile::chi_cutoff(0.5, 1.0);
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(1.0), 0.0);
        assert!(c.eval(0.75) > 0.0 && c.eval(0.75) < 1.0);
    }

    #[test]
    fn hermite_inverse_matches_quadrature() {
        let p = FreqProfile::hermite(4, 2.0);
        for u in [0.0, 0.3, 1.7, 4.0] {
            let re = integrate(|z| p.eval(z).re * (u * z).cos(), -40.0, 40.0, 200) / (2.0 * PI);
            assert!((p.inverse(u).re - re).abs() < 1e-13, "u={u}");
        }
        let g = FreqProfile::gaussian(2.0f64.sqrt());
        // A = e^{−ζ²/2} → Ǎ = e^{−U²/2}/√(2π)
        assert!((g.inverse(1.0).re - (-0.5f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hermite_normalization() {
        let p = FreqProfile::hermite(4, 2.0);
        let v = integrate(|z| p.eval(z).re / z, 1e-6, 60.0, 400);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_window_outside_unit_octave() {
        assert!(BumpProfile::psi_window_on(0.5, 1.5, Normalization::Linear).is_err());
    }
}
