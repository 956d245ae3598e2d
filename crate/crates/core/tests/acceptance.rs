//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL` line per criterion and fails if any criterion fails.
//! Conservation, dissipation and positivity are aggregated over all runs.

use std::time::Instant;

use ljko_core::experiments::{fp_convergence_studies, porous_medium_run, step_defects, FpStudy, PorousMediumRun};
use ljko_core::fields::{edge_gradient, inner_cell, inner_edge, reconstruct, reconstruct_adjoint, EdgeField};
use ljko_core::ljko::{kkt_jacobian, kkt_residual, KktResidual};
use ljko_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FP_LEVELS: usize = 5;
const RATE_BAND: (f64, f64) = (1.8, 2.1);
const STATIONARY_TOL: f64 = 1e-7;
const ORACLE_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-12;
const JACOBIAN_TOL: f64 = 1e-5;
const GAP_RATIO: f64 = 0.05;

/// Running totals for the properties checked over every run.
#[derive(Default)]
struct Ledger {
    steps: usize,
    worst_drift: f64,
    worst_excess: f64,
    min_rho: f64,
    min_s: f64,
    eps0: f64,
}

impl Ledger {
    fn new(eps0: f64) -> Self {
        Ledger {
            worst_excess: f64::NEG_INFINITY,
            min_rho: f64::INFINITY,
            min_s: f64::INFINITY,
            eps0,
            ..Ledger::default()
        }
    }

    fn record(&mut self, steps: usize, drift: f64, excess: f64, min_rho: f64, min_s: f64) {
        self.steps += steps;
        self.worst_drift = self.worst_drift.max(drift);
        self.worst_excess = self.worst_excess.max(excess);
        self.min_rho = self.min_rho.min(min_rho);
        self.min_s = self.min_s.min(min_s);
    }

    fn record_trajectory(&mut self, traj: &Trajectory) {
        let (drift, excess) = step_defects(traj);
        let (r, s) = traj.min_iterates();
        self.record(traj.steps.len(), drift, excess, r, s);
    }

    fn record_step(&mut self, prev: &CellField, tau: f64, step: &LjkoStep, energy: &dyn Energy, mesh: &AdmissibleMesh) {
        let drift = (fields::total_mass(&step.rho, mesh).unwrap() - fields::total_mass(prev, mesh).unwrap()).abs();
        let excess = tau * step.report.action + step.report.energy - discrete_energy(prev, energy, mesh).unwrap();
        self.record(1, drift, excess, step.report.min_rho, step.report.min_s);
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<(String, bool)>, name: &str, start: Instant, outcome: Outcome) {
    println!(
        "{} {name}: {} ({:.1}s)",
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
    results.push((name.to_string(), outcome.passed));
}

fn mesh(pattern: MeshPattern, domain: Rect, n: usize) -> AdmissibleMesh {
    compute_geometry(&build_mesh(pattern, domain, n).unwrap()).unwrap()
}

fn fp_convergence(ledger: &mut Ledger) -> Outcome {
    let p = IpmParams::default();
    let study = FpStudy::default();
    let results = match fp_convergence_studies(FP_LEVELS, &WeightScheme::ALL, &p, &study) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: format!("solver failure: {e}"),
            }
        }
    };
    let mut passed = true;
    let mut detail = Vec::new();
    for (w, rows) in &results {
        for r in rows {
            ledger.record(
                ((study.horizon / r.tau).round()) as usize,
                r.max_mass_drift,
                r.max_dissipation_excess,
                r.min_rho,
                r.min_s,
            );
        }
        let rates: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        let checked = &rates[1..];
        passed &= checked.iter().all(|r| (RATE_BAND.0..=RATE_BAND.1).contains(r));
        let eps: Vec<String> = rows.iter().map(|r| format!("{:.4e}", r.eps)).collect();
        let rates: Vec<String> = rates.iter().map(|r| format!("{r:.4}")).collect();
        detail.push(format!("{} eps [{}] rates [{}]", w.name(), eps.join(", "), rates.join(", ")));
    }
    // the three reconstructions must give distinct errors on the finest level
    let finest: Vec<f64> = results.iter().map(|(_, rows)| rows.last().unwrap().eps).collect();
    let distinct = finest.windows(2).all(|w| w[0] != w[1]) && finest[0] != finest[2];
    passed &= distinct;
    Outcome {
        passed,
        detail: format!(
            "{} mesh, rates from m=2 in [{}, {}]; {}; distinct eps {distinct}",
            study.pattern.name(),
            RATE_BAND.0,
            RATE_BAND.1,
            detail.join("; ")
        ),
    }
}

fn stationary(ledger: &mut Ledger) -> Outcome {
    let p = IpmParams::default();
    let fp = FokkerPlanck::default();
    let mut worst: f64 = 0.0;
    for pattern in [MeshPattern::Crisscross, MeshPattern::Staggered] {
        let m = mesh(pattern, Rect::unit_square(), 8);
        for c in [0.3, 1.0, 4.0] {
            let prev = CellField::constant(m.num_cells(), c);
            for tau in [1e-3, 1.0, 100.0] {
                for w in WeightScheme::ALL {
                    let step = ljko_step(&prev, tau, &fp, w, &p, &m).unwrap();
                    ledger.record_step(&prev, tau, &step, &fp, &m);
                    worst = worst.max(step.rho.iter().map(|r| (r - c).abs()).fold(0.0, f64::max));
                }
            }
        }
    }
    Outcome {
        passed: worst <= STATIONARY_TOL,
        detail: format!("max |rho^n - rho^(n-1)| = {worst:.2e} (tol {STATIONARY_TOL:.0e})"),
    }
}

/// Golden-section minimization of a convex function on `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

fn two_cell_oracle(ledger: &mut Ledger) -> Outcome {
    let raw = RawMesh::new(
        vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.45, 0.8), Point::new(0.6, -0.55)],
        vec![[0, 1, 2], [0, 3, 1]],
    )
    .unwrap();
    let m = compute_geometry(&raw).unwrap();
    assert_eq!((m.num_cells(), m.num_edges()), (2, 1));
    let e = m.edges()[0].clone();
    let (k, l) = e.cells;
    let (mk, ml) = (m.cells()[k].measure, m.cells()[l].measure);
    let p = IpmParams {
        eps0: 1e-10,
        ..IpmParams::default()
    };
    let energies: Vec<(&str, Box<dyn Energy>)> = vec![
        ("entropy", Box::new(FokkerPlanck::new(Potential::QuadraticHalf))),
        ("gamma=2", Box::new(PorousMedium::new(2.0, Potential::QuadraticHalf).unwrap())),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for (_, energy) in &energies {
        for _ in 0..5 {
            let prev = CellField::new(vec![rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)]);
            let tau: f64 = 10f64.powf(rng.random_range(-2.0..0.5));
            for w in WeightScheme::ALL {
                let (lk, ll) = match w {
                    WeightScheme::Centered => (0.5, 0.5),
                    WeightScheme::LinearInterp => (e.dist_l / e.dist, e.dist_k / e.dist),
                    WeightScheme::MassWeighted => (e.dist_k / e.dist, e.dist_l / e.dist),
                };
                // the flux F from K to L moves τ F m_σ of mass
                let dens = |f: f64| (prev[k] - tau * f * e.measure / mk, prev[l] + tau * f * e.measure / ml);
                let objective = |f: f64| {
                    let (rk, rl) = dens(f);
                    let r = lk * rk + ll * rl;
                    let kinetic = if f == 0.0 { 0.0 } else { f * f / (2.0 * r) * e.measure * e.dist };
                    tau * kinetic
                        + energy.value(rk, m.cells()[k].center) * mk
                        + energy.value(rl, m.cells()[l].center) * ml
                };
                let hi = prev[k] * mk / (tau * e.measure);
                let lo = -prev[l] * ml / (tau * e.measure);
                let f = golden(objective, lo, hi);
                let (rk, rl) = dens(f);
                let step = ljko_step(&prev, tau, energy.as_ref(), w, &p, &m).unwrap();
                ledger.record_step(&prev, tau, &step, energy.as_ref(), &m);
                worst = worst.max((step.rho[k] - rk).abs()).max((step.rho[l] - rl).abs());
            }
        }
    }
    Outcome {
        passed: worst <= ORACLE_TOL,
        detail: format!(
            "{} energies x 5 draws x 3 schemes, max |rho - rho_oracle| = {worst:.2e} (tol {ORACLE_TOL:.0e})",
            energies.len()
        ),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn operator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_adj: f64 = 0.0;
    let mut worst_flux: f64 = 0.0;
    let meshes = [
        mesh(MeshPattern::Crisscross, Rect::unit_square(), 4),
        mesh(MeshPattern::Staggered, Rect::unit_square(), 4),
    ];
    for m in &meshes {
        for w in WeightScheme::ALL {
            for _ in 0..100 {
                let rho = CellField::new((0..m.num_cells()).map(|_| rng.random_range(0.0..3.0)).collect());
                let u = EdgeField::new((0..m.num_edges()).map(|_| rng.random_range(-2.0..2.0)).collect());
                let phi = CellField::new((0..m.num_cells()).map(|_| rng.random_range(-1.0..1.0)).collect());

                let lhs = inner_edge(&reconstruct(&rho, w, m).unwrap(), &u, m).unwrap();
                let rhs = inner_cell(&rho, &reconstruct_adjoint(&u, w, m).unwrap(), m).unwrap();
                worst_adj = worst_adj.max(rel(lhs, rhs));

                // edge-by-edge sum written out from the geometry
                let mut by_edges = 0.0;
                for e in m.edges() {
                    let (k, l) = e.cells;
                    let (lk, ll) = match w {
                        WeightScheme::Centered => (0.5, 0.5),
                        WeightScheme::LinearInterp => (e.dist_l / e.dist, e.dist_k / e.dist),
                        WeightScheme::MassWeighted => (e.dist_k / e.dist, e.dist_l / e.dist),
                    };
                    let grad = (phi[l] - phi[k]) / e.dist;
                    by_edges += (lk * rho[k] + ll * rho[l]) * grad * grad * e.measure * e.dist;
                }
                let g = edge_gradient(&phi, m).unwrap();
                let g2 = EdgeField::new(g.iter().map(|v| v * v).collect());
                let by_cells = inner_cell(&rho, &reconstruct_adjoint(&g2, w, m).unwrap(), m).unwrap();
                worst_flux = worst_flux.max(rel(by_edges, by_cells));
            }
        }
    }
    Outcome {
        passed: worst_adj <= IDENTITY_TOL && worst_flux <= IDENTITY_TOL,
        detail: format!(
            "n=4, 100 draws x 3 schemes x 2 patterns: adjointness {worst_adj:.1e}, flux elimination {worst_flux:.1e} (tol {IDENTITY_TOL:.0e})"
        ),
    }
}

fn interleave(r: &KktResidual) -> Vec<f64> {
    (0..r.continuity.len())
        .flat_map(|k| [r.continuity[k], r.dual[k], r.complementarity[k]])
        .collect()
}

fn jacobian_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for pattern in [MeshPattern::Crisscross, MeshPattern::Staggered] {
        let m = mesh(pattern, Rect::unit_square(), 2);
        let n = m.num_cells();
        let energies: Vec<Box<dyn Energy>> = vec![
            Box::new(FokkerPlanck::new(Potential::LinearDrift { g: 1.0 })),
            Box::new(PorousMedium::new(2.0, Potential::QuadraticHalf).unwrap()),
        ];
        for energy in &energies {
            for w in WeightScheme::ALL {
                let prev = CellField::new((0..n).map(|_| rng.random_range(0.2..2.0)).collect());
                let state = LjkoState {
                    rho: CellField::new((0..n).map(|_| rng.random_range(0.2..2.0)).collect()),
                    phi: CellField::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()),
                    s: CellField::new((0..n).map(|_| rng.random_range(0.01..1.0)).collect()),
                    mu: 1e-3,
                };
                let tau = 0.1;
                let jac = kkt_jacobian(&state, &prev, tau, energy.as_ref(), w, &m).unwrap();
                for _ in 0..20 {
                    let d: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let h = 1e-6;
                    let shifted = |sign: f64| {
                        let mut s = state.clone();
                        for k in 0..n {
                            s.rho[k] += sign * h * d[3 * k];
                            s.phi[k] += sign * h * d[3 * k + 1];
                            s.s[k] += sign * h * d[3 * k + 2];
                        }
                        interleave(&kkt_residual(&s, &prev, tau, energy.as_ref(), w, &m).unwrap())
                    };
                    let (plus, minus) = (shifted(1.0), shifted(-1.0));
                    let fd: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                    let jd = jac.apply(&d);
                    let num: f64 = fd.iter().zip(&jd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    let den: f64 = jd.iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst = worst.max(num / den);
                    count += 1;
                }
            }
        }
    }
    Outcome {
        passed: worst <= JACOBIAN_TOL,
        detail: format!("n=2, {count} directions, max relative error {worst:.2e} (tol {JACOBIAN_TOL:.0e})"),
    }
}

fn barenblatt_relaxation(ledger: &mut Ledger) -> Outcome {
    let cfg = PorousMediumRun::default();
    let res = match porous_medium_run(&cfg, &IpmParams::default()) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: format!("solver failure: {e}"),
            }
        }
    };
    ledger.record_trajectory(&res.trajectory);
    let e = res.trajectory.energies();
    let e_inf = res.equilibrium_energy;
    let monotone = e.windows(2).all(|w| w[1] < w[0]);
    let above = e.iter().all(|&v| v > e_inf);
    let gap_ratio = (e[e.len() - 1] - e_inf) / (e[0] - e_inf);
    let l1: Vec<f64> = res.snapshot_l1.iter().map(|(_, d)| *d).collect();
    let l1_decreasing = l1.windows(2).all(|w| w[1] < w[0]);
    let snapshots: Vec<String> = res.snapshot_l1.iter().map(|(t, d)| format!("t={t:.2}: {d:.4e}")).collect();
    Outcome {
        passed: monotone && above && gap_ratio <= GAP_RATIO && l1_decreasing,
        detail: format!(
            "{} n={} steps={}: energy {:.6} -> {:.6}, Barenblatt {:.6} (sampled {:.6}); monotone {monotone}, above {above}, final/initial gap {gap_ratio:.4} (tol {GAP_RATIO}); L1 [{}] decreasing {l1_decreasing}",
            cfg.pattern.name(),
            cfg.n,
            cfg.steps,
            e[0],
            e[e.len() - 1],
            e_inf,
            res.sampled_equilibrium_energy,
            snapshots.join(", ")
        ),
    }
}

#[test]
fn acceptance() {
    let eps0 = IpmParams::default().eps0;
    let mut ledger = Ledger::new(eps0);
    let mut results = Vec::new();

    let t = Instant::now();
    report(&mut results, "operator identities", t, operator_identities());
    let t = Instant::now();
    report(&mut results, "jacobian finite differences", t, jacobian_check());
    let t = Instant::now();
    report(&mut results, "stationary uniform density", t, stationary(&mut ledger));
    let t = Instant::now();
    report(&mut results, "two-cell oracle", t, two_cell_oracle(&mut ledger));
    let t = Instant::now();
    report(&mut results, "barenblatt relaxation", t, barenblatt_relaxation(&mut ledger));
    let t = Instant::now();
    report(&mut results, "fokker-planck convergence rates", t, fp_convergence(&mut ledger));

    let t = Instant::now();
    let tol = 10.0 * ledger.eps0;
    report(
        &mut results,
        "conservation and dissipation",
        t,
        Outcome {
            passed: ledger.worst_drift <= tol && ledger.worst_excess <= tol,
            detail: format!(
                "{} steps: max mass drift {:.2e}, max tau*action + E(n) - E(n-1) = {:.2e} (tol {tol:.0e})",
                ledger.steps, ledger.worst_drift, ledger.worst_excess
            ),
        },
    );
    report(
        &mut results,
        "positivity",
        t,
        Outcome {
            passed: ledger.min_rho > 0.0 && ledger.min_s > 0.0,
            detail: format!(
                "{} steps: min rho {:.3e}, min s {:.3e} over accepted iterates",
                ledger.steps, ledger.min_rho, ledger.min_s
            ),
        },
    );

    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
