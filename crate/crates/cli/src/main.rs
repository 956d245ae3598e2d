mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ljko_core::experiments::{
    fp_convergence_studies, porous_medium_run, step_defects, FpStudy, InitialDensity, PorousMediumRun,
};
use ljko_core::io::{write_cell_field, write_convergence, write_energy, write_trajectory};
use ljko_core::{energy_series, run_flow_with, IpmParams, MeshPattern, WeightScheme};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ljko_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }

    fn is_solver_failure(&self) -> bool {
        matches!(
            self.kind(),
            "singular_system" | "newton_divergence" | "outer_cap_exceeded"
        )
    }
}

#[derive(Parser)]
#[command(name = "ljko", version, about = "Finite-volume LJKO solver for Wasserstein gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Space-time convergence study against an exact Fokker–Planck solution.
    FpConvergence {
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Weight schemes to run; all three when omitted.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<WeightScheme>,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long, default_value = "staggered")]
        mesh: MeshPattern,
        #[arg(long)]
        out: PathBuf,
    },
    /// Porous-medium flow from a cross-shaped density towards the Barenblatt profile.
    PorousMedium {
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long = "T", default_value_t = 0.7)]
        horizon: f64,
        #[arg(long, default_value_t = 48)]
        n: usize,
        #[arg(long, default_value_t = 70)]
        steps: usize,
        #[arg(long, default_value = "centered")]
        weights: WeightScheme,
        #[arg(long, default_value = "crisscross")]
        mesh: MeshPattern,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generic run described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `out` key of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({
                "status": "failure",
                "kind": e.kind(),
                "message": e.to_string(),
                "step": match &e { CliError::Core(c) => c.failing_step(), _ => None },
                "level": match &e { CliError::Core(c) => c.failing_level(), _ => None },
            });
            eprintln!("{record}");
            if e.is_solver_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::FpConvergence {
            levels,
            weights,
            g,
            mesh,
            out,
        } => {
            let schemes = if weights.is_empty() { WeightScheme::ALL.to_vec() } else { weights };
            let study = FpStudy {
                g,
                pattern: mesh,
                ..FpStudy::default()
            };
            let results = fp_convergence_studies(levels, &schemes, &IpmParams::default(), &study)?;
            std::fs::create_dir_all(&out)?;
            let mut f = create(&out, "convergence.csv")?;
            write_convergence(&mut f, &results)?;
            f.flush()?;
            for (w, rows) in &results {
                for (m, r) in rows.iter().enumerate() {
                    let rate = r.rate.map_or("-".to_string(), |v| format!("{v:.4}"));
                    println!("{:<8} m={m} h={:.4} tau={:.3e} eps={:.4e} rate={rate}", w.name(), r.h, r.tau, r.eps);
                }
            }
            Ok(())
        }
        Command::PorousMedium {
            gamma,
            horizon,
            n,
            steps,
            weights,
            mesh,
            mass,
            out,
        } => {
            let cfg = PorousMediumRun {
                gamma,
                horizon,
                n,
                steps,
                weights,
                pattern: mesh,
                initial: InitialDensity::Cross { mass },
                ..PorousMediumRun::default()
            };
            let res = porous_medium_run(&cfg, &IpmParams::default())?;
            std::fs::create_dir_all(&out)?;
            let mut f = create(&out, "energy.csv")?;
            write_energy(&mut f, &energy_series(&res.trajectory), res.equilibrium_energy)?;
            f.flush()?;
            let mut f = create(&out, "trajectory.csv")?;
            write_trajectory(&mut f, &res.trajectory)?;
            f.flush()?;
            let times = res.trajectory.times();
            for &(t, _) in &res.snapshot_l1 {
                let k = times.iter().position(|&s| s == t).unwrap_or(0);
                let mut f = create(&out, &format!("density_t{t:.3}.csv"))?;
                write_cell_field(&mut f, &res.trajectory.densities[k], &res.mesh)?;
                f.flush()?;
            }
            let meta = json!({
                "gamma": gamma,
                "T": horizon,
                "n": n,
                "steps": steps,
                "weights": weights.name(),
                "mesh": mesh.name(),
                "domain": [-1.5, 1.5, -1.5, 1.5],
                "initial_datum": "cross [-0.2,0.2]x[-1,1] U [-1,1]x[-0.2,0.2] (approximation of the reference figure)",
                "mass": res.mass,
                "equilibrium_energy": res.equilibrium_energy,
                "sampled_equilibrium_energy": res.sampled_equilibrium_energy,
                "snapshot_l1": res.snapshot_l1,
                "final_l1": res.final_l1,
            });
            std::fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta).expect("valid json"))?;
            let e = res.trajectory.energies();
            println!(
                "mass {:.6} energy {:.6} -> {:.6} equilibrium {:.6} final L1 {:.4e}",
                res.mass,
                e[0],
                e[e.len() - 1],
                res.equilibrium_energy,
                res.final_l1
            );
            Ok(())
        }
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let out = out
                .or(cfg.out.clone())
                .ok_or_else(|| CliError::Config("no output directory (`out` key or --out)".into()))?;
            let rho0 = cfg.initial.sample(&cfg.mesh)?;
            std::fs::create_dir_all(&out)?;
            let traj = run_flow_with(
                &rho0,
                &cfg.schedule,
                cfg.energy.as_ref(),
                cfg.weights,
                &cfg.ipm,
                &cfg.mesh,
                |n, d| {
                    eprintln!(
                        "step {n} t={:.4e} energy={:.8e} newton={} outer={}",
                        d.time, d.energy, d.report.newton_iterations, d.report.outer_iterations
                    )
                },
            )?;
            let mut f = create(&out, "trajectory.csv")?;
            write_trajectory(&mut f, &traj)?;
            f.flush()?;
            let mut f = create(&out, "density_final.csv")?;
            write_cell_field(&mut f, traj.last(), &cfg.mesh)?;
            f.flush()?;
            let (drift, excess) = step_defects(&traj);
            println!(
                "{} cells, {} steps, energy {}: max mass drift {drift:.3e}, max dissipation excess {excess:.3e}",
                cfg.mesh.num_cells(),
                cfg.schedule.len(),
                cfg.energy_label
            );
            Ok(())
        }
    }
}
