//! CSV output for fields, trajectories and study results.

use std::io::Write;

use crate::error::Result;
use crate::experiments::ConvergenceRow;
use crate::fields::{CellField, WeightScheme};
use crate::flow::Trajectory;
use crate::mesh::AdmissibleMesh;

/// `cell_index,x_K,y_K,value`
pub fn write_cell_field(out: &mut impl Write, rho: &CellField, mesh: &AdmissibleMesh) -> Result<()> {
    rho.check(mesh)?;
    writeln!(out, "cell_index,x_K,y_K,value")?;
    for (k, (c, v)) in mesh.cells().iter().zip(rho.iter()).enumerate() {
        writeln!(out, "{k},{:e},{:e},{:e}", c.center.x, c.center.y, v)?;
    }
    Ok(())
}

/// `n,t,mass,energy,action,newton_iters,outer_iters,residual`, starting with
/// the initial density at `n = 0`.
pub fn write_trajectory(out: &mut impl Write, traj: &Trajectory) -> Result<()> {
    writeln!(out, "n,t,mass,energy,action,newton_iters,outer_iters,residual")?;
    writeln!(out, "0,0,{:e},{:e},0,0,0,0", traj.initial_mass, traj.initial_energy)?;
    for (n, d) in traj.steps.iter().enumerate() {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{},{},{:e}",
            n + 1,
            d.time,
            d.mass,
            d.energy,
            d.action,
            d.report.newton_iterations,
            d.report.outer_iterations,
            d.report.delta0
        )?;
    }
    Ok(())
}

/// `h,tau,eps_a,rate_a,eps_b,rate_b,eps_c,rate_c` where `a`, `b`, `c` are the
/// centered, linear and mass-weighted schemes. Schemes absent from `studies`
/// and the first-level rates are left empty.
pub fn write_convergence(out: &mut impl Write, studies: &[(WeightScheme, Vec<ConvergenceRow>)]) -> Result<()> {
    writeln!(out, "h,tau,eps_a,rate_a,eps_b,rate_b,eps_c,rate_c")?;
    let levels = studies.iter().map(|(_, rows)| rows.len()).max().unwrap_or(0);
    for m in 0..levels {
        let first = studies.iter().find_map(|(_, rows)| rows.get(m)).expect("level present in some study");
        let mut line = format!("{:e},{:e}", first.h, first.tau);
        for w in WeightScheme::ALL {
            match studies.iter().find(|(s, _)| *s == w).and_then(|(_, rows)| rows.get(m)) {
                Some(r) => {
                    line.push_str(&format!(",{:e},", r.eps));
                    if let Some(rate) = r.rate {
                        line.push_str(&format!("{rate}"));
                    }
                }
                None => line.push_str(",,"),
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// `t,energy,equilibrium_energy`
pub fn write_energy(out: &mut impl Write, series: &[(f64, f64)], equilibrium: f64) -> Result<()> {
    writeln!(out, "t,energy,equilibrium_energy")?;
    for (t, e) in series {
        writeln!(out, "{t:e},{e:e},{equilibrium:e}")?;
    }
    Ok(())
}
