//! Discrete unknowns on cells and diamond cells, and the operators between them.
//!
//! Edge quantities live in the `K → L` orientation fixed by the mesh (the
//! lower cell index is `K`). A [`FluxField`] stores the single value
//! `F_{K,σ}`; `F_{L,σ} = -F_{K,σ}` is implied.

use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Error, Result};
use crate::mesh::{AdmissibleMesh, InternalEdge, Point};

macro_rules! field_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn zeros(len: usize) -> Self {
                $name(vec![0.0; len])
            }

            pub fn constant(len: usize, value: f64) -> Self {
                $name(vec![value; len])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn scaled(&self, factor: f64) -> Self {
                $name(self.0.iter().map(|v| v * factor).collect())
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }
    };
}

field_type!(
    /// One value per cell (`P_T`).
    CellField
);
field_type!(
    /// One value per internal edge (`P_Σ`).
    EdgeField
);
field_type!(
    /// Conservative fluxes: `F_{K,σ}` per internal edge.
    FluxField
);

impl CellField {
    /// Samples `f` at the cell centers.
    pub fn from_fn(mesh: &AdmissibleMesh, f: impl Fn(Point) -> f64) -> Self {
        CellField(mesh.centers().map(f).collect())
    }

    pub fn check(&self, mesh: &AdmissibleMesh) -> Result<()> {
        check_len(mesh.num_cells(), self.len())
    }
}

impl EdgeField {
    pub fn check(&self, mesh: &AdmissibleMesh) -> Result<()> {
        check_len(mesh.num_edges(), self.len())
    }
}

impl FluxField {
    pub fn check(&self, mesh: &AdmissibleMesh) -> Result<()> {
        check_len(mesh.num_edges(), self.len())
    }

    /// `F_{K,σ}` seen from either side of the edge.
    pub fn oriented(&self, edge: usize, from_k: bool) -> f64 {
        if from_k {
            self.0[edge]
        } else {
            -self.0[edge]
        }
    }
}

/// Weights `(λ_{K,σ}, λ_{L,σ})` of the arithmetic reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WeightScheme {
    /// `(1/2, 1/2)`
    #[default]
    Centered,
    /// `(d_{L,σ}/d_σ, d_{K,σ}/d_σ)`: linear interpolation at the edge midpoint.
    LinearInterp,
    /// `(d_{K,σ}/d_σ, d_{L,σ}/d_σ)`
    MassWeighted,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [WeightScheme::Centered, WeightScheme::LinearInterp, WeightScheme::MassWeighted];

    #[inline]
    pub fn weights(self, edge: &InternalEdge) -> (f64, f64) {
        let sum = edge.dist_k + edge.dist_l;
        match self {
            WeightScheme::Centered => (0.5, 0.5),
            WeightScheme::LinearInterp => (edge.dist_l / sum, edge.dist_k / sum),
            WeightScheme::MassWeighted => (edge.dist_k / sum, edge.dist_l / sum),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Centered => "centered",
            WeightScheme::LinearInterp => "linear",
            WeightScheme::MassWeighted => "mass",
        }
    }
}

impl std::str::FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(WeightScheme::Centered),
            "linear" => Ok(WeightScheme::LinearInterp),
            "mass" => Ok(WeightScheme::MassWeighted),
            other => Err(Error::InvalidParameter(format!(
                "unknown weight scheme `{other}` (expected centered, linear or mass)"
            ))),
        }
    }
}

/// `Σ_K a_K b_K m_K`
pub fn inner_cell(a: &CellField, b: &CellField, mesh: &AdmissibleMesh) -> Result<f64> {
    a.check(mesh)?;
    b.check(mesh)?;
    Ok(mesh.cells().iter().zip(a.iter().zip(b.iter())).map(|(c, (x, y))| x * y * c.measure).sum())
}

/// `Σ_σ u_σ v_σ m_σ d_σ`
pub fn inner_edge(u: &EdgeField, v: &EdgeField, mesh: &AdmissibleMesh) -> Result<f64> {
    u.check(mesh)?;
    v.check(mesh)?;
    Ok(mesh.edges().iter().zip(u.iter().zip(v.iter())).map(|(e, (x, y))| x * y * e.diamond_weight()).sum())
}

/// `R_Σ`: `ρ_σ = λ_{K,σ} ρ_K + λ_{L,σ} ρ_L`.
pub fn reconstruct(rho: &CellField, w: WeightScheme, mesh: &AdmissibleMesh) -> Result<EdgeField> {
    rho.check(mesh)?;
    Ok(EdgeField(
        mesh.edges()
            .iter()
            .map(|e| {
                let (lk, ll) = w.weights(e);
                lk * rho[e.cells.0] + ll * rho[e.cells.1]
            })
            .collect(),
    ))
}

/// `R_T`, the adjoint of [`reconstruct`] for the two mesh inner products:
/// `(Σ_{σ∈Σ_K} u_σ λ_{K,σ} m_σ d_σ / m_K)_K`.
pub fn reconstruct_adjoint(u: &EdgeField, w: WeightScheme, mesh: &AdmissibleMesh) -> Result<CellField> {
    u.check(mesh)?;
    let mut out = vec![0.0; mesh.num_cells()];
    for (e, &ue) in mesh.edges().iter().zip(u.iter()) {
        let (lk, ll) = w.weights(e);
        let q = ue * e.diamond_weight();
        out[e.cells.0] += lk * q;
        out[e.cells.1] += ll * q;
    }
    for (o, c) in out.iter_mut().zip(mesh.cells()) {
        *o /= c.measure;
    }
    Ok(CellField(out))
}

/// `(φ_L - φ_K) / d_σ` per edge.
pub fn edge_gradient(phi: &CellField, mesh: &AdmissibleMesh) -> Result<EdgeField> {
    phi.check(mesh)?;
    Ok(EdgeField(
        mesh.edges().iter().map(|e| (phi[e.cells.1] - phi[e.cells.0]) / e.dist).collect(),
    ))
}

/// Integrated divergence `Σ_{σ∈Σ_K} F_{K,σ} m_σ` (not divided by `m_K`).
pub fn cell_divergence(flux: &FluxField, mesh: &AdmissibleMesh) -> Result<CellField> {
    flux.check(mesh)?;
    let mut out = vec![0.0; mesh.num_cells()];
    for (e, &f) in mesh.edges().iter().zip(flux.iter()) {
        out[e.cells.0] += f * e.measure;
        out[e.cells.1] -= f * e.measure;
    }
    Ok(CellField(out))
}

/// Pointwise divergence, [`cell_divergence`] divided by `m_K`.
pub fn cell_divergence_density(flux: &FluxField, mesh: &AdmissibleMesh) -> Result<CellField> {
    let mut div = cell_divergence(flux, mesh)?;
    for (d, c) in div.iter_mut().zip(mesh.cells()) {
        *d /= c.measure;
    }
    Ok(div)
}

/// `Σ_K ρ_K m_K`
pub fn total_mass(rho: &CellField, mesh: &AdmissibleMesh) -> Result<f64> {
    rho.check(mesh)?;
    Ok(rho.iter().zip(mesh.cells()).map(|(r, c)| r * c.measure).sum())
}
