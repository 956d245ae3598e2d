//! One step of the linearized JKO scheme, solved by a primal-dual
//! logarithmic-barrier interior-point method.
//!
//! The step minimizes
//! `τ Σ_σ F_σ² / (2 (R_Σρ)_σ) m_σ d_σ + Σ_K E(ρ_K) m_K`
//! under `(ρ_K - ρ^{n-1}_K) m_K + τ Σ_{σ∈Σ_K} F_{K,σ} m_σ = 0` and `ρ ≥ 0`.
//! Fluxes are eliminated through `F_{K,σ} = -(R_Σρ)_σ (φ_L - φ_K)/d_σ`, leaving
//! a Newton system in `(ρ, φ, s)` for each barrier parameter `μ`.

mod kkt;

pub use kkt::{
    kkt_jacobian, kkt_residual, newton_direction, step_length, Direction, KktMatrix, KktPattern, KktResidual,
    LjkoState,
};

use crate::energy::{discrete_energy, Energy};
use crate::error::{Error, Result};
use crate::fields::{reconstruct, total_mass, CellField, FluxField, WeightScheme};
use crate::mesh::AdmissibleMesh;
use kkt::{KktProblem, KktSolver};

/// Parameters of the barrier continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmParams {
    /// Initial barrier parameter. `None` uses `1e-2 · (mass / |Ω|)²`.
    pub mu0: Option<f64>,
    /// Decay ratio of `μ` per outer iteration.
    pub theta: f64,
    /// Tolerance on `δ₀`, the residual of the unperturbed system.
    pub eps0: f64,
    /// Tolerance on `δ_μ`. `f64::INFINITY` performs one Newton step per `μ`.
    pub eps_mu: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub fraction_to_boundary: f64,
}

impl Default for IpmParams {
    fn default() -> Self {
        IpmParams {
            mu0: None,
            theta: 0.1,
            eps0: 1e-8,
            eps_mu: f64::INFINITY,
            max_newton: 50,
            max_outer: 200,
            fraction_to_boundary: 0.95,
        }
    }
}

impl IpmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0 && mu0.is_finite()) {
                return bad(format!("mu0 must be positive, got {mu0}"));
            }
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        if !(self.eps_mu > 0.0) {
            return bad(format!("eps_mu must be positive, got {}", self.eps_mu));
        }
        if !(self.fraction_to_boundary > 0.0 && self.fraction_to_boundary < 1.0) {
            return bad(format!("fraction_to_boundary must lie in (0, 1), got {}", self.fraction_to_boundary));
        }
        if self.max_newton == 0 || self.max_outer == 0 {
            return bad("iteration caps must be at least 1".into());
        }
        Ok(())
    }
}

/// Diagnostics of one LJKO step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    /// `δ₀` at exit.
    pub delta0: f64,
    /// `δ_μ` at exit.
    pub delta_mu: f64,
    /// Final barrier parameter.
    pub mu: f64,
    /// Kinetic term `Σ_σ F_σ² / (2 ρ_σ) m_σ d_σ` of the returned state.
    pub action: f64,
    /// `Σ_K E(ρ_K) m_K` of the returned density.
    pub energy: f64,
    /// Smallest density over every accepted iterate.
    pub min_rho: f64,
    /// Smallest slack over every accepted iterate.
    pub min_s: f64,
    /// Whether the step was restarted with a larger `μ₀`.
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct LjkoStep {
    pub rho: CellField,
    pub phi: CellField,
    pub s: CellField,
    pub report: StepReport,
}

/// `F_{K,σ} = -(R_Σρ)_σ (φ_L - φ_K) / d_σ`
pub fn recover_fluxes(rho: &CellField, phi: &CellField, w: WeightScheme, mesh: &AdmissibleMesh) -> Result<FluxField> {
    phi.check(mesh)?;
    let rs = reconstruct(rho, w, mesh)?;
    Ok(FluxField::new(
        mesh.edges()
            .iter()
            .zip(rs.iter())
            .map(|(e, r)| -r * (phi[e.cells.1] - phi[e.cells.0]) / e.dist)
            .collect(),
    ))
}

/// `Σ_σ F_σ² / (2 (R_Σρ)_σ) m_σ d_σ`, with `0²/0 = 0`. A nonzero flux through
/// an edge with non-positive reconstructed density gives `+∞`.
pub fn discrete_action(rho: &CellField, flux: &FluxField, w: WeightScheme, mesh: &AdmissibleMesh) -> Result<f64> {
    flux.check(mesh)?;
    let rs = reconstruct(rho, w, mesh)?;
    let mut total = 0.0;
    for ((e, &f), &r) in mesh.edges().iter().zip(flux.iter()).zip(rs.iter()) {
        if f == 0.0 {
            continue;
        }
        if r <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += f * f / (2.0 * r) * e.diamond_weight();
    }
    Ok(total)
}

/// Smallest barrier parameter used by the continuation. Complementarity is
/// then well below `eps0`, and further outer iterations are plain Newton
/// steps on an essentially fixed system.
fn mu_floor(p: &IpmParams) -> f64 {
    0.1 * p.eps0
}

/// Sparsity pattern and symbolic factorizations of the Newton system on one
/// mesh, reused across steps.
pub struct StepWorkspace {
    solver: KktSolver,
    cells: usize,
    edges: usize,
}

impl StepWorkspace {
    pub fn new(mesh: &AdmissibleMesh) -> Result<Self> {
        Ok(StepWorkspace {
            solver: KktSolver::new(mesh)?,
            cells: mesh.num_cells(),
            edges: mesh.num_edges(),
        })
    }
}

/// Advances `prev` by one LJKO step of length `tau`.
pub fn ljko_step(
    prev: &CellField,
    tau: f64,
    energy: &dyn Energy,
    w: WeightScheme,
    p: &IpmParams,
    mesh: &AdmissibleMesh,
) -> Result<LjkoStep> {
    ljko_step_with(&mut StepWorkspace::new(mesh)?, prev, tau, energy, w, p, mesh)
}

/// [`ljko_step`] reusing a workspace built for `mesh`.
pub fn ljko_step_with(
    ws: &mut StepWorkspace,
    prev: &CellField,
    tau: f64,
    energy: &dyn Energy,
    w: WeightScheme,
    p: &IpmParams,
    mesh: &AdmissibleMesh,
) -> Result<LjkoStep> {
    if (ws.cells, ws.edges) != (mesh.num_cells(), mesh.num_edges()) {
        return Err(Error::InvalidParameter("workspace was built for a different mesh".into()));
    }
    p.validate()?;
    prev.check(mesh)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    if let Some(k) = prev.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("initial density {:e} in cell {k} is negative or not finite", prev[k])));
    }
    let mass = total_mass(prev, mesh)?;
    if !(mass > 0.0) {
        return Err(Error::Domain("initial density has zero total mass".into()));
    }
    let mean = mass / mesh.area();
    let mu0 = p.mu0.unwrap_or(1e-2 * mean * mean);
    let problem = KktProblem::new(prev, tau, energy, w, mesh)?;
    let solver = &mut ws.solver;

    let mut outcome = solve_barrier_path(&problem, solver, p, mu0, mean);
    if matches!(
        outcome,
        Err(Error::NewtonDivergence { .. } | Error::SingularSystem { .. } | Error::OuterCapExceeded { .. })
    ) {
        outcome = solve_barrier_path(&problem, solver, p, 10.0 * mu0, mean).map(|mut s| {
            s.report.restarted = true;
            s
        });
    }
    let mut step = outcome?;
    let flux = recover_fluxes(&step.rho, &step.phi, w, mesh)?;
    step.report.action = discrete_action(&step.rho, &flux, w, mesh)?;
    step.report.energy = discrete_energy(&step.rho, energy, mesh)?;
    Ok(step)
}

fn solve_barrier_path(
    problem: &KktProblem<'_>,
    solver: &mut KktSolver,
    p: &IpmParams,
    mu0: f64,
    mean: f64,
) -> Result<LjkoStep> {
    let mesh = problem.mesh;
    // empty cells start where the initial slack μ0/ρ is no larger than ρ
    let floor = mu0.sqrt().min(mean);
    let rho = CellField::new(problem.prev.iter().map(|&r| r.max(floor)).collect());
    let phi = CellField::new(
        rho.iter()
            .zip(mesh.cells())
            .map(|(&r, c)| problem.energy.prime(r, c.center))
            .collect(),
    );
    let s = CellField::new(rho.iter().map(|&r| mu0 / r).collect());
    let mut state = LjkoState { rho, phi, s, mu: mu0 };

    let mut residual = problem.residual(&state)?;
    let mut delta0 = residual.optimality_norm(&state, mesh);
    let mut delta_mu = residual.barrier_norm(mesh);
    let (mut min_rho, mut min_s) = (state.min_rho(), state.min_s());
    let (mut outer, mut newton) = (0, 0);
    let mut growth = 0;
    let divergence = |state: &LjkoState, residual: f64, newton: usize| Error::NewtonDivergence {
        mu: state.mu,
        residual,
        newton_iterations: newton,
    };

    while delta0 > p.eps0 {
        if outer == p.max_outer {
            return Err(Error::OuterCapExceeded {
                max_outer: p.max_outer,
                residual: delta0,
                mu: state.mu,
            });
        }
        outer += 1;
        state.mu = (p.theta * state.mu).max(mu_floor(p));

        let mut inner = 0;
        loop {
            residual = problem.residual(&state)?;
            let jac = problem.jacobian(&state, &solver.pattern)?;
            let dir = solver.solve(&state, &jac, &residual)?;
            let alpha = step_length(&state, &dir, p.fraction_to_boundary);
            for k in 0..state.rho.len() {
                state.rho[k] += alpha * dir.rho[k];
                state.phi[k] += alpha * dir.phi[k];
                state.s[k] += alpha * dir.s[k];
            }
            let (r_min, s_min) = (state.min_rho(), state.min_s());
            assert!(
                r_min > 0.0 && s_min > 0.0,
                "interior-point iterate left the positive orthant (min rho {r_min:e}, min s {s_min:e})"
            );
            min_rho = min_rho.min(r_min);
            min_s = min_s.min(s_min);
            inner += 1;
            newton += 1;

            residual = problem.residual(&state)?;
            let last = delta0;
            delta_mu = residual.barrier_norm(mesh);
            delta0 = residual.optimality_norm(&state, mesh);
            if !delta0.is_finite() || !delta_mu.is_finite() {
                return Err(divergence(&state, delta0, newton));
            }
            growth = if delta0 > last { growth + 1 } else { 0 };
            if growth >= p.max_newton {
                return Err(divergence(&state, delta0, newton));
            }
            if delta_mu <= p.eps_mu {
                break;
            }
            if inner >= p.max_newton {
                return Err(divergence(&state, delta_mu, newton));
            }
        }
    }

    Ok(LjkoStep {
        rho: state.rho,
        phi: state.phi,
        s: state.s,
        report: StepReport {
            outer_iterations: outer,
            newton_iterations: newton,
            delta0,
            delta_mu,
            mu: state.mu,
            action: 0.0,
            energy: 0.0,
            min_rho,
            min_s,
            restarted: false,
        },
    })
}
