//! Named family generators and the test corpus.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::dnc::GroupoidSpec;
use crate::error::Result;
use crate::family::{AnalyticFamily, CustomField, FamilyClass, KernelFamily, SeparableTerm};
use crate::profile::{BumpProfile, Envelope, FreqProfile, Normalization, TimeProfile};
use crate::quantization::symbol_to_family;

fn one() -> Envelope {
    Envelope::one()
}

fn cutoff() -> TimeProfile {
    TimeProfile::cutoff()
}

/// Closed-form family recipe as it appears in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Generator {
    Zero,
    /// f̂ = e^{−(ζ/s)²}: class S_c, t-independent.
    Gaussian {
        scale: f64,
        #[serde(default = "one")]
        envelope: Envelope,
    },
    /// Hermite window of order k (vanishing order 2k at the origin).
    Hermite {
        order: u32,
        scale: f64,
        #[serde(default = "one")]
        envelope: Envelope,
        #[serde(default = "cutoff")]
        time: TimeProfile,
    },
    /// σ₀(x, ±)·ψ(|ζ|) with the default ψ-window.
    Window {
        #[serde(default = "one")]
        plus: Envelope,
        #[serde(default = "one")]
        minus: Envelope,
    },
    /// Gaussian profile times e^{−c/t}: class J0.
    Rapid { scale: f64, c: f64 },
    /// f̂ = e^{−r² − 1/r²}, r² = ζ² + t²: flat at the origin.
    Flat,
    Terms { terms: Vec<SeparableTerm> },
}

impl Generator {
    pub fn claimed_class(&self) -> Option<FamilyClass> {
        match self {
            Generator::Zero | Generator::Rapid { .. } => Some(FamilyClass::J0),
            Generator::Gaussian { .. } => Some(FamilyClass::Sc),
            Generator::Hermite { .. } | Generator::Window { .. } | Generator::Flat => Some(FamilyClass::J),
            Generator::Terms { terms } => {
                if terms.iter().all(|t| t.freq.vanishes_at_origin()) {
                    Some(FamilyClass::J)
                } else {
                    None
                }
            }
        }
    }

    pub fn build(&self, groupoid: GroupoidSpec, t_range: (f64, f64)) -> Result<KernelFamily> {
        let class = self.claimed_class();
        let fam = |name: &str, terms: Vec<SeparableTerm>| {
            KernelFamily::analytic(groupoid, AnalyticFamily::new(name, terms), t_range, class)
        };
        Ok(match self {
            Generator::Zero => KernelFamily::zero(groupoid, t_range),
            Generator::Gaussian { scale, envelope } => fam(
                "gaussian",
                vec![SeparableTerm { envelope: *envelope, freq: FreqProfile::gaussian(*scale), time: TimeProfile::constant() }],
            ),
            Generator::Hermite { order, scale, envelope, time } => fam(
                "hermite",
                vec![SeparableTerm { envelope: *envelope, freq: FreqProfile::hermite(*order, *scale), time: *time }],
            ),
            Generator::Window { plus, minus } => {
                symbol_to_family(groupoid, *plus, *minus, BumpProfile::psi_window(Normalization::Linear), t_range)?
            }
            Generator::Rapid { scale, c } => fam(
                "rapid",
                vec![SeparableTerm {
                    envelope: one(),
                    freq: FreqProfile::gaussian(*scale),
                    time: TimeProfile::cutoff().with_rapid(*c),
                }],
            ),
            Generator::Flat => {
                let fhat = |_: f64, z: f64, t: f64| {
                    let r2 = z * z + t * t;
                    C64::from(if r2 == 0.0 { 0.0 } else { (-r2 - 1.0 / r2).exp() })
                };
                let field = CustomField { fhat: Arc::new(fhat), phi: None, zeta_extent: 7.0 };
                KernelFamily::analytic(groupoid, AnalyticFamily::custom("flat", field), t_range, class)
            }
            Generator::Terms { terms } => fam("terms", terms.clone()),
        })
    }
}

/// Five J families with profiles analytic in log t, each vanishing to
/// order ≥ 8 at ζ = 0.
pub fn j_corpus() -> Vec<(&'static str, Generator)> {
    let cos = |offset, amp, freq| Envelope::Cosine { offset, amp, freq };
    vec![
        ("hermite-4", Generator::Hermite { order: 4, scale: 2.0, envelope: one(), time: cutoff() }),
        ("hermite-4-cos", Generator::Hermite { order: 4, scale: 1.5, envelope: cos(1.0, 0.3, 0.5), time: cutoff() }),
        (
            "hermite-5-gauss",
            Generator::Hermite {
                order: 5,
                scale: 3.0,
                envelope: Envelope::Gaussian { amp: 1.0, center: 0.0, width: 3.0 },
                time: cutoff(),
            },
        ),
        (
            "two-term",
            Generator::Terms {
                terms: vec![
                    SeparableTerm { envelope: cos(0.8, 0.2, 0.25), freq: FreqProfile::hermite(4, 2.0), time: cutoff() },
                    SeparableTerm {
                        envelope: Envelope::Constant { re: 0.0, im: 0.5 },
                        freq: FreqProfile::hermite(6, 2.5),
                        time: cutoff(),
                    },
                ],
            },
        ),
        ("hermite-6-wide", Generator::Hermite { order: 6, scale: 4.0, envelope: cos(1.0, -0.25, 0.75), time: cutoff() }),
    ]
}
