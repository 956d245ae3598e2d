//! Convex energy integrands `E(ρ, x)` and their discrete integrals.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::CellField;
use crate::mesh::{AdmissibleMesh, Point};

/// External potential `V(x)`.
#[derive(Clone, Default)]
pub enum Potential {
    #[default]
    Zero,
    /// `V(x) = -g x₁`
    LinearDrift { g: f64 },
    /// `V(x) = ½‖x‖²`
    QuadraticHalf,
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl Potential {
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::LinearDrift { g } => -g * x.x,
            Potential::QuadraticHalf => 0.5 * x.norm_sq(),
            Potential::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::LinearDrift { g } => write!(f, "LinearDrift {{ g: {g} }}"),
            Potential::QuadraticHalf => write!(f, "QuadraticHalf"),
            Potential::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Pointwise convex integrand of the energy `Σ_K E(ρ_K, x_K) m_K`.
pub trait Energy: Send + Sync {
    fn value(&self, rho: f64, x: Point) -> f64;
    fn prime(&self, rho: f64, x: Point) -> f64;
    fn second(&self, rho: f64, x: Point) -> f64;
    /// Whether `prime` blows up at `ρ = 0` (entropy-type integrands).
    fn singular_at_zero(&self) -> bool;
}

/// `E(ρ) = ρ log ρ + ρ V`
#[derive(Debug, Clone, Default)]
pub struct FokkerPlanck {
    pub potential: Potential,
}

impl FokkerPlanck {
    pub fn new(potential: Potential) -> Self {
        FokkerPlanck { potential }
    }
}

impl Energy for FokkerPlanck {
    #[inline]
    fn value(&self, rho: f64, x: Point) -> f64 {
        // continuous extension 0 log 0 = 0
        let entropy = if rho == 0.0 { 0.0 } else { rho * rho.ln() };
        entropy + rho * self.potential.eval(x)
    }

    #[inline]
    fn prime(&self, rho: f64, x: Point) -> f64 {
        rho.ln() + 1.0 + self.potential.eval(x)
    }

    #[inline]
    fn second(&self, rho: f64, _x: Point) -> f64 {
        1.0 / rho
    }

    fn singular_at_zero(&self) -> bool {
        true
    }
}

/// `E(ρ) = ρ^γ / (γ - 1) + ρ V`, `γ > 1`.
#[derive(Debug, Clone)]
pub struct PorousMedium {
    gamma: f64,
    pub potential: Potential,
}

impl PorousMedium {
    pub fn new(gamma: f64, potential: Potential) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("porous-medium exponent must exceed 1, got {gamma}")));
        }
        Ok(PorousMedium { gamma, potential })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Energy for PorousMedium {
    #[inline]
    fn value(&self, rho: f64, x: Point) -> f64 {
        rho.powf(self.gamma) / (self.gamma - 1.0) + rho * self.potential.eval(x)
    }

    #[inline]
    fn prime(&self, rho: f64, x: Point) -> f64 {
        self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0) + self.potential.eval(x)
    }

    #[inline]
    fn second(&self, rho: f64, _x: Point) -> f64 {
        self.gamma * rho.powf(self.gamma - 2.0)
    }

    fn singular_at_zero(&self) -> bool {
        false
    }
}

/// `Σ_K E(ρ_K, x_K) m_K`; requires `ρ ≥ 0`.
pub fn discrete_energy(rho: &CellField, e: &dyn Energy, mesh: &AdmissibleMesh) -> Result<f64> {
    rho.check(mesh)?;
    let mut total = 0.0;
    for (k, (&r, c)) in rho.iter().zip(mesh.cells()).enumerate() {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("negative density {r:e} in cell {k}")));
        }
        total += e.value(r, c.center) * c.measure;
    }
    Ok(total)
}

/// `E'(ρ_K, x_K)` per cell.
pub fn energy_prime_field(rho: &CellField, e: &dyn Energy, mesh: &AdmissibleMesh) -> Result<CellField> {
    rho.check(mesh)?;
    let singular = e.singular_at_zero();
    rho.iter()
        .zip(mesh.cells())
        .enumerate()
        .map(|(k, (&r, c))| {
            if r < 0.0 || (singular && r <= 0.0) || r.is_nan() {
                Err(Error::Domain(format!("E' undefined at density {r:e} in cell {k}")))
            } else {
                Ok(e.prime(r, c.center))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(CellField::new)
}
