//! Chains LJKO steps over a time schedule.

use crate::energy::{discrete_energy, Energy};
use crate::error::{Error, Result};
use crate::fields::{total_mass, CellField, WeightScheme};
use crate::ljko::{ljko_step_with, IpmParams, StepReport, StepWorkspace};
use crate::mesh::AdmissibleMesh;

/// Positive time steps `τ^1, …, τ^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSchedule {
    steps: Vec<f64>,
}

impl TimeSchedule {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if let Some(t) = steps.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("time steps must be positive, got {t}")));
        }
        Ok(TimeSchedule { steps })
    }

    /// `steps` equal steps of `horizon / steps`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Ok(TimeSchedule { steps: Vec::new() });
        }
        TimeSchedule::new(vec![horizon / steps as f64; steps])
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.steps.iter().sum()
    }

    /// `t^0 = 0, t^1, …, t^N`
    pub fn times(&self) -> Vec<f64> {
        let mut t = 0.0;
        std::iter::once(0.0)
            .chain(self.steps.iter().map(|tau| {
                t += tau;
                t
            }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub time: f64,
    pub tau: f64,
    pub mass: f64,
    pub energy: f64,
    pub action: f64,
    pub report: StepReport,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `ρ⁰ … ρ^N`
    pub densities: Vec<CellField>,
    pub initial_mass: f64,
    pub initial_energy: f64,
    /// One entry per step.
    pub steps: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.steps.iter().map(|s| s.time)).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        std::iter::once(self.initial_energy).chain(self.steps.iter().map(|s| s.energy)).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        std::iter::once(self.initial_mass).chain(self.steps.iter().map(|s| s.mass)).collect()
    }

    pub fn last(&self) -> &CellField {
        self.densities.last().expect("trajectory holds at least the initial density")
    }

    /// Smallest density and slack over every accepted interior-point iterate.
    pub fn min_iterates(&self) -> (f64, f64) {
        self.steps.iter().fold((f64::INFINITY, f64::INFINITY), |(r, s), d| {
            (r.min(d.report.min_rho), s.min(d.report.min_s))
        })
    }
}

pub fn run_flow(
    rho0: &CellField,
    sched: &TimeSchedule,
    energy: &dyn Energy,
    w: WeightScheme,
    p: &IpmParams,
    mesh: &AdmissibleMesh,
) -> Result<Trajectory> {
    run_flow_with(rho0, sched, energy, w, p, mesh, |_, _| {})
}

/// [`run_flow`] with a callback invoked after every step.
pub fn run_flow_with(
    rho0: &CellField,
    sched: &TimeSchedule,
    energy: &dyn Energy,
    w: WeightScheme,
    p: &IpmParams,
    mesh: &AdmissibleMesh,
    mut on_step: impl FnMut(usize, &StepDiagnostics),
) -> Result<Trajectory> {
    let initial_mass = total_mass(rho0, mesh)?;
    let initial_energy = discrete_energy(rho0, energy, mesh)?;
    let mut traj = Trajectory {
        densities: Vec::with_capacity(sched.len() + 1),
        initial_mass,
        initial_energy,
        steps: Vec::with_capacity(sched.len()),
    };
    traj.densities.push(rho0.clone());
    let mut ws = StepWorkspace::new(mesh)?;
    let mut time = 0.0;
    for (n, &tau) in sched.steps().iter().enumerate() {
        let step = ljko_step_with(&mut ws, traj.last(), tau, energy, w, p, mesh).map_err(|e| Error::StepFailed {
            step: n + 1,
            source: Box::new(e),
        })?;
        time += tau;
        let diag = StepDiagnostics {
            time,
            tau,
            mass: total_mass(&step.rho, mesh)?,
            energy: step.report.energy,
            action: step.report.action,
            report: step.report,
        };
        on_step(n + 1, &diag);
        traj.steps.push(diag);
        traj.densities.push(step.rho);
    }
    Ok(traj)
}

/// `(t^n, Σ_K E(ρ^n_K) m_K)` for every stored density.
pub fn energy_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times().into_iter().zip(traj.energies()).collect()
}
