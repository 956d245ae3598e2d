//! Finite-volume discretization of Wasserstein gradient flows on admissible
//! triangular meshes. Each time step is a linearized JKO problem solved by a
//! primal-dual interior-point Newton method.

pub mod energy;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod flow;
pub mod io;
pub mod ljko;
pub mod mesh;

pub use energy::{discrete_energy, energy_prime_field, Energy, FokkerPlanck, PorousMedium, Potential};
pub use error::{Error, Result};
pub use fields::{CellField, EdgeField, FluxField, WeightScheme};
pub use flow::{energy_series, run_flow, run_flow_with, StepDiagnostics, TimeSchedule, Trajectory};
pub use ljko::{
    discrete_action, ljko_step, ljko_step_with, recover_fluxes, IpmParams, LjkoState, LjkoStep, StepReport, StepWorkspace,
};
pub use mesh::{
    build_mesh, build_structured_mesh, compute_geometry, load_mesh, parse_mesh, validate_admissibility,
    AdmissibleMesh, MeshPattern, Point, RawMesh, Rect,
};
