//! Deformation-to-the-normal-cone charts for the pair groupoid of ℝ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupoidKind {
    PairGroupoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupoidSpec {
    pub kind: GroupoidKind,
    pub fiber_dim: usize,
    pub half_width: f64,
}

impl GroupoidSpec {
    pub fn pair_line(half_width: f64) -> Result<Self> {
        let g = GroupoidSpec { kind: GroupoidKind::PairGroupoid, fiber_dim: 1, half_width };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fiber_dim != 1 {
            return Err(Error::Config {
                path: "groupoid.fiber_dim".into(),
                msg: "only the pair groupoid of ℝ (p = 1) is implemented".into(),
            });
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::Config { path: "groupoid.half_width".into(), msg: "must be positive".into() });
        }
        Ok(())
    }
}

/// The affine exponential chart θ(x, U) = (x, x − U).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub groupoid: GroupoidSpec,
    pub theta_domain_radius: f64,
}

impl Chart {
    /// Global chart: the affine map is defined everywhere, so the radius is infinite.
    pub fn affine(groupoid: GroupoidSpec) -> Self {
        Chart { groupoid, theta_domain_radius: f64::INFINITY }
    }

    pub fn with_radius(groupoid: GroupoidSpec, r: f64) -> Self {
        Chart { groupoid, theta_domain_radius: r }
    }

    pub fn theta_chart(&self, x: f64, u: f64) -> Result<(f64, f64)> {
        if u.abs() >= self.theta_domain_radius {
            return Err(Error::Domain(format!("|U| = {} ≥ chart radius {}", u.abs(), self.theta_domain_radius)));
        }
        Ok((x, x - u))
    }

    pub fn theta_chart_inverse(&self, gamma: (f64, f64)) -> (f64, f64) {
        (gamma.0, gamma.0 - gamma.1)
    }

    pub fn big_theta(&self, x: f64, u: f64, t: f64) -> Result<DncPoint> {
        if t == 0.0 {
            return Ok(DncPoint { t, payload: Payload::Algebroid { x, u } });
        }
        let (a, b) = self.theta_chart(x, t * u)?;
        Ok(DncPoint { t, payload: Payload::Groupoid { x: a, y: b } })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payload {
    Groupoid { x: f64, y: f64 },
    Algebroid { x: f64, u: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DncPoint {
    pub t: f64,
    pub payload: Payload,
}

impl DncPoint {
    pub fn groupoid(x: f64, y: f64, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Err(Error::Domain("groupoid payload needs t ≠ 0".into()));
        }
        Ok(DncPoint { t, payload: Payload::Groupoid { x, y } })
    }

    pub fn algebroid(x: f64, u: f64) -> Self {
        DncPoint { t: 0.0, payload: Payload::Algebroid { x, u } }
    }

    pub fn base(&self) -> f64 {
        match self.payload {
            Payload::Groupoid { x, .. } | Payload::Algebroid { x, .. } => x,
        }
    }
}

/// The ℝ₊* action: α_u(z, t) = (z, ut) and α_u(x, U, 0) = (x, U/u, 0).
pub fn alpha_act(u: f64, p: DncPoint) -> Result<DncPoint> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("scaling parameter {u} must be positive")));
    }
    Ok(match p.payload {
        Payload::Groupoid { .. } => DncPoint { t: u * p.t, payload: p.payload },
        Payload::Algebroid { x, u: v } => DncPoint { t: 0.0, payload: Payload::Algebroid { x, u: v / u } },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart::affine(GroupoidSpec::pair_line(4.0).unwrap())
    }

    #[test]
    fn units_and_formula() {
        let c = chart();
        assert_eq!(c.theta_chart(0.3, 0.0).unwrap(), (0.3, 0.3));
        assert_eq!(c.theta_chart(1.0, 0.5).unwrap(), (1.0, 0.5));
        assert_eq!(c.big_theta(0.0, 1.0, 0.1).unwrap().payload, Payload::Groupoid { x: 0.0, y: -0.1 });
        assert_eq!(c.big_theta(0.2, 1.0, 0.0).unwrap().payload, Payload::Algebroid { x: 0.2, u: 1.0 });
    }

    #[test]
    fn chart_radius_enforced() {
        let c = Chart::with_radius(GroupoidSpec::pair_line(4.0).unwrap(), 1.0);
        assert!(matches!(c.theta_chart(0.0, 1.0), Err(Error::Domain(_))));
        assert!(c.big_theta(0.0, 3.0, 0.5).is_err());
        assert!(c.big_theta(0.0, 3.0, 0.25).is_ok());
    }

    #[test]
    fn alpha_on_algebroid_rescales_vector() {
        let p = alpha_act(2.0, DncPoint::algebroid(0.0, 3.0)).unwrap();
        assert_eq!(p.payload, Payload::Algebroid { x: 0.0, u: 1.5 });
        assert!(alpha_act(0.0, p).is_err());
    }

    #[test]
    fn rejects_higher_dimensions() {
        let g = GroupoidSpec { kind: GroupoidKind::PairGroupoid, fiber_dim: 2, half_width: 1.0 };
        assert!(g.validate().is_err());
    }
}
