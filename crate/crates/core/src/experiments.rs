//! Reference solutions and the two numerical studies: the Fokker–Planck
//! space-time convergence test and porous-medium relaxation towards the
//! Barenblatt profile.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::energy::{discrete_energy, FokkerPlanck, PorousMedium, Potential};
use crate::error::{Error, Result};
use crate::fields::{total_mass, CellField, WeightScheme};
use crate::flow::{run_flow, TimeSchedule, Trajectory};
use crate::ljko::IpmParams;
use crate::mesh::{build_mesh, compute_geometry, AdmissibleMesh, MeshPattern, Point, Rect};

/// Exact solution of `∂_t ρ = Δρ + ∇·(ρ∇V)` on `[0,1]²` with `V = -g x₁` and
/// no-flux boundary conditions. Constant in `x₂`.
pub fn fp_exact(x: Point, t: f64, g: f64) -> f64 {
    let x1 = x.x;
    (-(PI * PI + 0.25 * g * g) * t + 0.5 * g * x1).exp() * (PI * (PI * x1).cos() + 0.5 * g * (PI * x1).sin())
        + PI * (g * (x1 - 0.5)).exp()
}

/// Barenblatt equilibrium of the porous-medium flow with potential `½‖x‖²`
/// and total mass `mass`.
pub fn barenblatt(x: Point, mass: f64, gamma: f64) -> f64 {
    let level = (mass / (2.0 * PI)).powf((gamma - 1.0) / gamma) - (gamma - 1.0) / (2.0 * gamma) * x.norm_sq();
    level.max(0.0).powf(1.0 / (gamma - 1.0))
}

/// Continuous energy `∫ ρ^γ/(γ-1) + ρ‖x‖²/2` of the Barenblatt profile,
/// by composite Simpson quadrature in the radius.
pub fn barenblatt_energy(mass: f64, gamma: f64) -> f64 {
    let level = (mass / (2.0 * PI)).powf((gamma - 1.0) / gamma);
    let radius = (level * 2.0 * gamma / (gamma - 1.0)).sqrt();
    let integrand = |r: f64| {
        let rho = barenblatt(Point::new(r, 0.0), mass, gamma);
        (rho.powf(gamma) / (gamma - 1.0) + 0.5 * rho * r * r) * 2.0 * PI * r
    };
    simpson(integrand, 0.0, radius, 20_000)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// `Σ_K |ρ_K - ρ_ref(x_K)| m_K`
pub fn l1_distance(rho: &CellField, reference: impl Fn(Point) -> f64, mesh: &AdmissibleMesh) -> Result<f64> {
    rho.check(mesh)?;
    Ok(rho.iter().zip(mesh.cells()).map(|(r, c)| (r - reference(c.center)).abs() * c.measure).sum())
}

/// `Σ_{n=1}^{N} τ^n Σ_K |ρ^n_K - ρ(x_K, t^n)| m_K`
pub fn l1_space_time_error(
    traj: &Trajectory,
    exact: impl Fn(Point, f64) -> f64,
    sched: &TimeSchedule,
    mesh: &AdmissibleMesh,
) -> Result<f64> {
    if traj.densities.len() != sched.len() + 1 {
        return Err(Error::SizeMismatch {
            expected: sched.len() + 1,
            found: traj.densities.len(),
        });
    }
    let times = sched.times();
    let mut total = 0.0;
    for (n, &tau) in sched.steps().iter().enumerate() {
        let t = times[n + 1];
        total += tau * l1_distance(&traj.densities[n + 1], |x| exact(x, t), mesh)?;
    }
    Ok(total)
}

/// Initial densities used by the CLI and the studies.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    Uniform { value: f64 },
    /// Indicator of `[-a,a]×[-b,b] ∪ [-b,b]×[-a,a]` with `a = 0.2`, `b = 1`,
    /// scaled to the given discrete mass.
    Cross { mass: f64 },
    /// `fp_exact(·, 0, g)`
    FpExact { g: f64 },
    Barenblatt { mass: f64, gamma: f64 },
}

impl InitialDensity {
    pub fn sample(&self, mesh: &AdmissibleMesh) -> Result<CellField> {
        match *self {
            InitialDensity::Uniform { value } => Ok(CellField::constant(mesh.num_cells(), value)),
            InitialDensity::Cross { mass } => cross_density(mesh, mass),
            InitialDensity::FpExact { g } => Ok(CellField::from_fn(mesh, |x| fp_exact(x, 0.0, g))),
            InitialDensity::Barenblatt { mass, gamma } => Ok(CellField::from_fn(mesh, |x| barenblatt(x, mass, gamma))),
        }
    }
}

/// Cross-shaped indicator normalized to discrete mass `mass`.
pub fn cross_density(mesh: &AdmissibleMesh, mass: f64) -> Result<CellField> {
    let (thin, long) = (0.2, 1.0);
    let inside = |p: Point| {
        (p.x.abs() <= thin && p.y.abs() <= long) || (p.x.abs() <= long && p.y.abs() <= thin)
    };
    let indicator = CellField::from_fn(mesh, |p| if inside(p) { 1.0 } else { 0.0 });
    let raw = total_mass(&indicator, mesh)?;
    if raw <= 0.0 {
        return Err(Error::InvalidParameter("cross shape contains no cell center".into()));
    }
    Ok(indicator.scaled(mass / raw))
}

/// Parameters of the Fokker–Planck refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct FpStudy {
    pub g: f64,
    pub pattern: MeshPattern,
    /// Subdivisions of the coarsest mesh; doubled at every level.
    pub base_n: usize,
    /// Time step of the coarsest level; divided by four at every level.
    pub base_tau: f64,
    pub horizon: f64,
}

impl Default for FpStudy {
    fn default() -> Self {
        FpStudy {
            g: 1.0,
            pattern: MeshPattern::Staggered,
            base_n: 4,
            base_tau: 0.05,
            horizon: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub tau: f64,
    pub eps: f64,
    /// `sqrt(ε_{m-1} / ε_m)`; absent on the first level.
    pub rate: Option<f64>,
    /// Smallest density and slack seen by the interior-point solver.
    pub min_rho: f64,
    pub min_s: f64,
    /// Worst per-step mass drift and energy-dissipation excess.
    pub max_mass_drift: f64,
    pub max_dissipation_excess: f64,
}

/// Result of one level of the study.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub mesh: AdmissibleMesh,
    pub schedule: TimeSchedule,
    pub trajectory: Trajectory,
    pub eps: f64,
}

pub fn fp_level(level: usize, w: WeightScheme, p: &IpmParams, study: &FpStudy) -> Result<LevelRun> {
    let n = study.base_n << level;
    let mesh = compute_geometry(&build_mesh(study.pattern, Rect::unit_square(), n)?)?;
    let tau = study.base_tau / 4f64.powi(level as i32);
    let steps = (study.horizon / tau).round() as usize;
    let schedule = TimeSchedule::new(vec![tau; steps])?;
    let rho0 = CellField::from_fn(&mesh, |x| fp_exact(x, 0.0, study.g));
    let energy = FokkerPlanck::new(Potential::LinearDrift { g: study.g });
    let trajectory = run_flow(&rho0, &schedule, &energy, w, p, &mesh)?;
    let eps = l1_space_time_error(&trajectory, |x, t| fp_exact(x, t, study.g), &schedule, &mesh)?;
    Ok(LevelRun {
        mesh,
        schedule,
        trajectory,
        eps,
    })
}

/// Worst per-step mass drift and `τ·action + E(ρ^n) - E(ρ^{n-1})`.
pub fn step_defects(traj: &Trajectory) -> (f64, f64) {
    let masses = traj.masses();
    let energies = traj.energies();
    let mut drift: f64 = 0.0;
    let mut excess = f64::NEG_INFINITY;
    for (n, d) in traj.steps.iter().enumerate() {
        drift = drift.max((masses[n + 1] - masses[n]).abs());
        excess = excess.max(d.tau * d.action + energies[n + 1] - energies[n]);
    }
    (drift, excess)
}

/// Runs every (level, scheme) pair of the study in parallel.
pub fn fp_convergence_studies(
    levels: usize,
    schemes: &[WeightScheme],
    p: &IpmParams,
    study: &FpStudy,
) -> Result<Vec<(WeightScheme, Vec<ConvergenceRow>)>> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!("a convergence study needs at least 2 levels, got {levels}")));
    }
    p.validate()?;
    let jobs: Vec<(WeightScheme, usize)> = schemes.iter().flat_map(|&w| (0..levels).map(move |m| (w, m))).collect();
    // finest levels first so the long runs start early
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(jobs[i].1));
    let mut results: Vec<(usize, Result<ConvergenceRow>)> = order
        .into_par_iter()
        .map(|i| {
            let (w, m) = jobs[i];
            let row = fp_level(m, w, p, study)
                .map(|run| {
                    let (drift, excess) = step_defects(&run.trajectory);
                    let (min_rho, min_s) = run.trajectory.min_iterates();
                    ConvergenceRow {
                        h: run.mesh.size(),
                        tau: run.schedule.steps()[0],
                        eps: run.eps,
                        rate: None,
                        min_rho,
                        min_s,
                        max_mass_drift: drift,
                        max_dissipation_excess: excess,
                    }
                })
                .map_err(|e| Error::LevelFailed {
                    level: m,
                    source: Box::new(e),
                });
            (i, row)
        })
        .collect();
    results.sort_by_key(|(i, _)| *i);

    let mut out = Vec::with_capacity(schemes.len());
    let mut it = results.into_iter();
    for &w in schemes {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
        for _ in 0..levels {
            let (_, row) = it.next().expect("one result per job");
            let mut row = row?;
            if let Some(prev) = rows.last() {
                row.rate = Some((prev.eps / row.eps).sqrt());
            }
            rows.push(row);
        }
        out.push((w, rows));
    }
    Ok(out)
}

pub fn fp_convergence_study(
    levels: usize,
    w: WeightScheme,
    p: &IpmParams,
    study: &FpStudy,
) -> Result<Vec<ConvergenceRow>> {
    Ok(fp_convergence_studies(levels, &[w], p, study)?.remove(0).1)
}

/// Parameters of the porous-medium relaxation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PorousMediumRun {
    pub gamma: f64,
    pub horizon: f64,
    pub n: usize,
    pub steps: usize,
    pub weights: WeightScheme,
    pub pattern: MeshPattern,
    pub domain: Rect,
    pub initial: InitialDensity,
    /// Times at which the L¹ distance to the Barenblatt profile is recorded.
    pub snapshots: Vec<f64>,
}

impl Default for PorousMediumRun {
    fn default() -> Self {
        PorousMediumRun {
            gamma: 2.0,
            horizon: 0.7,
            n: 48,
            steps: 70,
            weights: WeightScheme::Centered,
            pattern: MeshPattern::Crisscross,
            domain: Rect::new(-1.5, 1.5, -1.5, 1.5),
            initial: InitialDensity::Cross { mass: 1.0 },
            snapshots: vec![0.1, 0.4, 0.7],
        }
    }
}

#[derive(Debug, Clone)]
pub struct PorousMediumResult {
    pub mesh: AdmissibleMesh,
    pub schedule: TimeSchedule,
    pub trajectory: Trajectory,
    /// Discrete mass of the initial density, used for the Barenblatt profile.
    pub mass: f64,
    /// Continuous energy of the Barenblatt profile.
    pub equilibrium_energy: f64,
    /// Discrete energy of the Barenblatt profile sampled at the cell centers.
    pub sampled_equilibrium_energy: f64,
    /// `(t, ‖ρ(t) - ρ^∞‖_{L¹})` at each requested snapshot (nearest step).
    pub snapshot_l1: Vec<(f64, f64)>,
    pub final_l1: f64,
}

pub fn porous_medium_run(cfg: &PorousMediumRun, p: &IpmParams) -> Result<PorousMediumResult> {
    let mesh = compute_geometry(&build_mesh(cfg.pattern, cfg.domain, cfg.n)?)?;
    let energy = PorousMedium::new(cfg.gamma, Potential::QuadraticHalf)?;
    let schedule = TimeSchedule::uniform(cfg.horizon, cfg.steps)?;
    let rho0 = cfg.initial.sample(&mesh)?;
    let mass = total_mass(&rho0, &mesh)?;
    let trajectory = run_flow(&rho0, &schedule, &energy, cfg.weights, p, &mesh)?;

    let profile = |x: Point| barenblatt(x, mass, cfg.gamma);
    let times = schedule.times();
    let snapshot_l1 = cfg
        .snapshots
        .iter()
        .map(|&t| {
            let n = nearest_index(&times, t);
            Ok((times[n], l1_distance(&trajectory.densities[n], profile, &mesh)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let final_l1 = l1_distance(trajectory.last(), profile, &mesh)?;
    let sampled = CellField::from_fn(&mesh, profile);
    Ok(PorousMediumResult {
        sampled_equilibrium_energy: discrete_energy(&sampled, &energy, &mesh)?,
        equilibrium_energy: barenblatt_energy(mass, cfg.gamma),
        mesh,
        schedule,
        trajectory,
        mass,
        snapshot_l1,
        final_l1,
    })
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}
