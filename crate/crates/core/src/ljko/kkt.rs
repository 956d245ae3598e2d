//! Barrier-perturbed optimality system of one LJKO step, its exact Jacobian
//! and the sparse direct solve for the Newton direction.
//!
//! Unknowns are interleaved per cell: `(ρ_K, φ_K, s_K)` occupy positions
//! `3K, 3K+1, 3K+2`, and rows follow the same layout (continuity, dual,
//! complementarity).

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::fields::{CellField, WeightScheme};
use crate::mesh::AdmissibleMesh;

/// Interior-point iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct LjkoState {
    pub rho: CellField,
    pub phi: CellField,
    /// Slack `s = -λ`, the multiplier of `ρ ≥ 0`.
    pub s: CellField,
    /// Barrier parameter.
    pub mu: f64,
}

impl LjkoState {
    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_s(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_interior(&self) -> Result<()> {
        if let Some(k) = self.rho.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::Domain(format!("density {:e} in cell {k} is not positive", self.rho[k])));
        }
        if let Some(k) = self.s.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Domain(format!("slack {:e} in cell {k} is not positive", self.s[k])));
        }
        Ok(())
    }
}

/// The three residual blocks, one value per cell each.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    /// `(ρ_K - ρ^{n-1}_K) m_K - τ Σ_{σ∈Σ_K} (R_Σρ)_σ ((φ_L - φ_K)/d_σ) m_σ`
    pub continuity: CellField,
    /// `(φ_K - E'(ρ_K) + s_K) m_K + (τ/2) (R_T(((φ_L - φ_K)/d_σ)²))_K m_K`
    pub dual: CellField,
    /// `s_K ρ_K - μ`
    pub complementarity: CellField,
}

impl KktResidual {
    /// `δ_μ`: max norm with the first two blocks divided by `m_K`.
    pub fn barrier_norm(&self, mesh: &AdmissibleMesh) -> f64 {
        let mut norm: f64 = 0.0;
        for (k, c) in mesh.cells().iter().enumerate() {
            norm = norm
                .max(self.continuity[k].abs() / c.measure)
                .max(self.dual[k].abs() / c.measure)
                .max(self.complementarity[k].abs());
        }
        norm
    }

    /// `δ₀`: residual of the unperturbed system, with the complementarity
    /// measured as `Σ_K s_K ρ_K m_K / |Ω|`.
    pub fn optimality_norm(&self, state: &LjkoState, mesh: &AdmissibleMesh) -> f64 {
        let mut norm: f64 = 0.0;
        let mut gap = 0.0;
        for (k, c) in mesh.cells().iter().enumerate() {
            norm = norm
                .max(self.continuity[k].abs() / c.measure)
                .max(self.dual[k].abs() / c.measure);
            gap += state.s[k] * state.rho[k] * c.measure;
        }
        norm.max(gap / mesh.area())
    }

    fn interleaved(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.continuity.len());
        for k in 0..self.continuity.len() {
            out.extend_from_slice(&[self.continuity[k], self.dual[k], self.complementarity[k]]);
        }
        out
    }
}

/// Newton direction over `(ρ, φ, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub rho: CellField,
    pub phi: CellField,
    pub s: CellField,
}

impl Direction {
    fn from_interleaved(x: &[f64]) -> Self {
        let n = x.len() / 3;
        let pick = |v: usize| CellField::new((0..n).map(|k| x[3 * k + v]).collect());
        Direction {
            rho: pick(0),
            phi: pick(1),
            s: pick(2),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rho
            .iter()
            .chain(self.phi.iter())
            .chain(self.s.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy)]
struct EdgeCoeffs {
    k: usize,
    l: usize,
    lk: f64,
    ll: f64,
    m: f64,
    d: f64,
}

/// Data of one LJKO step that stays fixed while the iterate changes.
pub(crate) struct KktProblem<'a> {
    pub prev: &'a CellField,
    pub tau: f64,
    pub energy: &'a dyn Energy,
    pub mesh: &'a AdmissibleMesh,
    edges: Vec<EdgeCoeffs>,
}

impl<'a> KktProblem<'a> {
    pub fn new(
        prev: &'a CellField,
        tau: f64,
        energy: &'a dyn Energy,
        w: WeightScheme,
        mesh: &'a AdmissibleMesh,
    ) -> Result<Self> {
        prev.check(mesh)?;
        let edges = mesh
            .edges()
            .iter()
            .map(|e| {
                let (lk, ll) = w.weights(e);
                EdgeCoeffs {
                    k: e.cells.0,
                    l: e.cells.1,
                    lk,
                    ll,
                    m: e.measure,
                    d: e.dist,
                }
            })
            .collect();
        Ok(KktProblem {
            prev,
            tau,
            energy,
            mesh,
            edges,
        })
    }

    fn check_state(&self, state: &LjkoState) -> Result<()> {
        state.rho.check(self.mesh)?;
        state.phi.check(self.mesh)?;
        state.s.check(self.mesh)?;
        state.check_interior()
    }

    pub fn residual(&self, state: &LjkoState) -> Result<KktResidual> {
        self.check_state(state)?;
        let (rho, phi, s) = (&state.rho, &state.phi, &state.s);
        let tau = self.tau;
        let cells = self.mesh.cells();
        let mut r1 = Vec::with_capacity(cells.len());
        let mut r2 = Vec::with_capacity(cells.len());
        let mut r3 = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            r1.push((rho[k] - self.prev[k]) * c.measure);
            r2.push((phi[k] - self.energy.prime(rho[k], c.center) + s[k]) * c.measure);
            r3.push(s[k] * rho[k] - state.mu);
        }
        for e in &self.edges {
            let g = (phi[e.l] - phi[e.k]) / e.d;
            let r = e.lk * rho[e.k] + e.ll * rho[e.l];
            let flux = tau * r * g * e.m;
            r1[e.k] -= flux;
            r1[e.l] += flux;
            let kin = 0.5 * tau * g * g * e.m * e.d;
            r2[e.k] += e.lk * kin;
            r2[e.l] += e.ll * kin;
        }
        Ok(KktResidual {
            continuity: r1.into(),
            dual: r2.into(),
            complementarity: r3.into(),
        })
    }

    pub fn jacobian(&self, state: &LjkoState, pattern: &Arc<KktPattern>) -> Result<KktMatrix> {
        self.check_state(state)?;
        let (rho, phi, s) = (&state.rho, &state.phi, &state.s);
        let tau = self.tau;
        let mut values = Vec::with_capacity(pattern.indices.len());
        for (k, c) in self.mesh.cells().iter().enumerate() {
            let m = c.measure;
            values.extend_from_slice(&[
                m,
                -self.energy.second(rho[k], c.center) * m,
                m,
                m,
                s[k],
                rho[k],
            ]);
        }
        for e in &self.edges {
            let g = (phi[e.l] - phi[e.k]) / e.d;
            let r = e.lk * rho[e.k] + e.ll * rho[e.l];
            let a = tau * g * e.m;
            let b = tau * r * e.m / e.d;
            values.extend_from_slice(&[
                // continuity row of K
                -a * e.lk,
                -a * e.ll,
                b,
                -b,
                // continuity row of L
                a * e.lk,
                a * e.ll,
                -b,
                b,
                // dual row of K
                -a * e.lk,
                a * e.lk,
                // dual row of L
                -a * e.ll,
                a * e.ll,
            ]);
        }
        debug_assert_eq!(values.len(), pattern.indices.len());
        Ok(KktMatrix {
            pattern: Arc::clone(pattern),
            values,
        })
    }
}

/// Fixed sparsity pattern of the KKT matrix on a mesh. Duplicate entries are
/// summed.
#[derive(Debug)]
pub struct KktPattern {
    dim: usize,
    indices: Vec<(usize, usize)>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    schur: Option<SchurPattern>,
}

const RHO: usize = 0;
const PHI: usize = 1;
const SLACK: usize = 2;

impl KktPattern {
    pub fn new(mesh: &AdmissibleMesh) -> Result<Self> {
        let dim = 3 * mesh.num_cells();
        let at = |cell: usize, var: usize| 3 * cell + var;
        let mut indices = Vec::with_capacity(6 * mesh.num_cells() + 12 * mesh.num_edges());
        for k in 0..mesh.num_cells() {
            let (cont, dual, comp) = (at(k, 0), at(k, 1), at(k, 2));
            indices.extend_from_slice(&[
                (cont, at(k, RHO)),
                (dual, at(k, RHO)),
                (dual, at(k, PHI)),
                (dual, at(k, SLACK)),
                (comp, at(k, RHO)),
                (comp, at(k, SLACK)),
            ]);
        }
        for e in mesh.edges() {
            let (k, l) = e.cells;
            indices.extend_from_slice(&[
                (at(k, 0), at(k, RHO)),
                (at(k, 0), at(l, RHO)),
                (at(k, 0), at(k, PHI)),
                (at(k, 0), at(l, PHI)),
                (at(l, 0), at(k, RHO)),
                (at(l, 0), at(l, RHO)),
                (at(l, 0), at(k, PHI)),
                (at(l, 0), at(l, PHI)),
                (at(k, 1), at(k, PHI)),
                (at(k, 1), at(l, PHI)),
                (at(l, 1), at(k, PHI)),
                (at(l, 1), at(l, PHI)),
            ]);
        }
        let pairs: Vec<Pair<usize, usize>> = indices.iter().map(|&(r, c)| Pair::new(r, c)).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(dim, dim, &pairs)
            .map_err(|e| Error::InvalidParameter(format!("cannot build KKT pattern: {e:?}")))?;
        let schur = SchurPattern::new(dim / 3, &indices);
        Ok(KktPattern {
            dim,
            indices,
            symbolic,
            argsort,
            schur,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Assembled Jacobian values on a [`KktPattern`].
#[derive(Debug, Clone)]
pub struct KktMatrix {
    pattern: Arc<KktPattern>,
    values: Vec<f64>,
}

impl KktMatrix {
    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    /// `J x` for an interleaved vector `x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.pattern.dim];
        for (&(r, c), v) in self.pattern.indices.iter().zip(&self.values) {
            y[r] += v * x[c];
        }
        y
    }

    /// Entry `(row, col)` with duplicates summed.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(&(r, c), _)| r == row && c == col)
            .map(|(_, v)| v)
            .sum()
    }

    /// Columns with a structurally present entry in `row`.
    pub fn row_pattern(&self, row: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = self.pattern.indices.iter().filter(|(r, _)| *r == row).map(|&(_, c)| c).collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    fn to_csc(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::new_from_argsort(self.pattern.symbolic.clone(), &self.pattern.argsort, &self.values)
            .map_err(|e| Error::InvalidParameter(format!("cannot assemble KKT matrix: {e:?}")))
    }
}

/// Sparse LU solver that keeps the symbolic factorization between calls.
pub(crate) struct KktSolver {
    pub pattern: Arc<KktPattern>,
    symbolic: Option<SymbolicLu<usize>>,
}

/// Relative bound on `‖J d + r‖ / ‖r‖` accepted from the direct solve.
const LINEAR_SOLVE_TOL: f64 = 1e-10;

impl KktSolver {
    pub fn new(mesh: &AdmissibleMesh) -> Result<Self> {
        Ok(KktSolver {
            pattern: Arc::new(KktPattern::new(mesh)?),
            symbolic: None,
        })
    }

    pub fn solve(&mut self, state: &LjkoState, jac: &KktMatrix, residual: &KktResidual) -> Result<Direction> {
        let rhs: Vec<f64> = residual.interleaved().iter().map(|v| -v).collect();
        if let Some(schur) = &self.pattern.schur {
            if let Some(reduced) = schur.factor(&jac.values) {
                if let Some(x) = refine(jac, &rhs, |b| schur.solve(&reduced, &jac.values, b)) {
                    return Ok(Direction::from_interleaved(&x));
                }
            }
        }
        let singular = || Error::SingularSystem {
            mu: state.mu,
            rho_norm: norm_inf(&state.rho),
            phi_norm: norm_inf(&state.phi),
            s_norm: norm_inf(&state.s),
        };
        let csc = jac.to_csc()?;
        if self.symbolic.is_none() {
            self.symbolic = Some(SymbolicLu::try_new(csc.symbolic()).map_err(|_| singular())?);
        }
        let symbolic = self.symbolic.clone().expect("symbolic factorization initialised above");
        let lu = Lu::try_new_with_symbolic(symbolic, csc.as_ref()).map_err(|_| singular())?;
        refine(jac, &rhs, |b| solve_dense_rhs(&lu, b))
            .map(|x| Direction::from_interleaved(&x))
            .ok_or_else(singular)
    }
}

/// Solves `J x = rhs` with up to two rounds of iterative refinement. `None`
/// unless the relative residual reaches [`LINEAR_SOLVE_TOL`].
fn refine(jac: &KktMatrix, rhs: &[f64], solve: impl Fn(&[f64]) -> Vec<f64>) -> Option<Vec<f64>> {
    let rhs_norm = norm_inf(rhs);
    if rhs_norm == 0.0 {
        return Some(vec![0.0; rhs.len()]);
    }
    let mut x = solve(rhs);
    for round in 0..=2 {
        let jx = jac.apply(&x);
        let defect: Vec<f64> = rhs.iter().zip(&jx).map(|(b, a)| b - a).collect();
        let err = norm_inf(&defect);
        if !err.is_finite() {
            return None;
        }
        if err <= LINEAR_SOLVE_TOL * rhs_norm {
            return Some(x);
        }
        if round == 2 {
            break;
        }
        for (xi, ci) in x.iter_mut().zip(solve(&defect)) {
            *xi += ci;
        }
    }
    None
}

/// Block elimination of the Newton system onto the potential unknowns. The
/// complementarity rows give `δs`, the dual rows (diagonal in `ρ`) give `δρ`,
/// and what is left is `(L - J₁₁ D⁻¹ J₂₂) δφ = b̃`, where `J₁₁`, `L` are the
/// `ρ`, `φ` blocks of the continuity rows, `J₂₂` the `φ` block of the dual rows
/// and `D` the diagonal remaining in the dual rows. Here `J₂₂ = J₁₁ᵀ` and
/// `D < 0`, so the reduced matrix is symmetric positive definite.
#[derive(Debug)]
struct SchurPattern {
    cells: usize,
    /// `(entry, row cell, column cell)` of the continuity/ρ entries.
    cont_rho: Vec<(usize, usize, usize)>,
    /// `(entry, row cell, column cell)` of the dual/φ entries.
    dual_phi: Vec<(usize, usize, usize)>,
    /// `(entry, cell)` of the diagonal couplings.
    dual_rho: Vec<(usize, usize)>,
    dual_s: Vec<(usize, usize)>,
    comp_rho: Vec<(usize, usize)>,
    comp_s: Vec<(usize, usize)>,
    /// Lower-triangle entries of `L`, then of the products `(e₁, e₂, j)`.
    laplace: Vec<usize>,
    products: Vec<(usize, usize, usize)>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: SymbolicLlt<usize>,
}

struct ReducedFactor {
    d: Vec<f64>,
    dual_s: Vec<f64>,
    comp_rho: Vec<f64>,
    comp_s: Vec<f64>,
    llt: Llt<usize, f64>,
}

impl SchurPattern {
    /// `None` when the pattern does not have the block structure above.
    fn new(cells: usize, indices: &[(usize, usize)]) -> Option<Self> {
        let (mut cont_rho, mut cont_phi, mut dual_phi) = (Vec::new(), Vec::new(), Vec::new());
        let (mut dual_rho, mut dual_s, mut comp_rho, mut comp_s) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (e, &(r, c)) in indices.iter().enumerate() {
            let (k, j) = (r / 3, c / 3);
            match (r % 3, c % 3) {
                (0, RHO) => cont_rho.push((e, k, j)),
                (0, PHI) => cont_phi.push((e, k, j)),
                (1, PHI) => dual_phi.push((e, k, j)),
                (1, RHO) if k == j => dual_rho.push((e, k)),
                (1, SLACK) if k == j => dual_s.push((e, k)),
                (2, RHO) if k == j => comp_rho.push((e, k)),
                (2, SLACK) if k == j => comp_s.push((e, k)),
                _ => return None,
            }
        }
        let mut dual_rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cells];
        for &(e, j, i) in &dual_phi {
            dual_rows[j].push((e, i));
        }
        let (mut laplace, mut products, mut pairs) = (Vec::new(), Vec::new(), Vec::new());
        for &(e, k, i) in &cont_phi {
            if k >= i {
                laplace.push(e);
                pairs.push(Pair::new(k, i));
            }
        }
        for &(e1, k, j) in &cont_rho {
            for &(e2, i) in &dual_rows[j] {
                if k >= i {
                    products.push((e1, e2, j));
                    pairs.push(Pair::new(k, i));
                }
            }
        }
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(cells, cells, &pairs).ok()?;
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower).ok()?;
        Some(SchurPattern {
            cells,
            cont_rho,
            dual_phi,
            dual_rho,
            dual_s,
            comp_rho,
            comp_s,
            laplace,
            products,
            symbolic,
            argsort,
            llt,
        })
    }

    fn gather(&self, entries: &[(usize, usize)], values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells];
        for &(e, k) in entries {
            out[k] += values[e];
        }
        out
    }

    /// `None` when `D` has a zero entry or the reduced matrix is not positive
    /// definite.
    fn factor(&self, values: &[f64]) -> Option<ReducedFactor> {
        let dual_rho = self.gather(&self.dual_rho, values);
        let dual_s = self.gather(&self.dual_s, values);
        let comp_rho = self.gather(&self.comp_rho, values);
        let comp_s = self.gather(&self.comp_s, values);
        let d: Vec<f64> = (0..self.cells)
            .map(|k| dual_rho[k] - dual_s[k] * comp_rho[k] / comp_s[k])
            .collect();
        if d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return None;
        }
        let reduced: Vec<f64> = self
            .laplace
            .iter()
            .map(|&e| values[e])
            .chain(self.products.iter().map(|&(e1, e2, j)| -values[e1] * values[e2] / d[j]))
            .collect();
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, &reduced).ok()?;
        let llt = Llt::try_new_with_symbolic(self.llt.clone(), mat.as_ref(), Side::Lower).ok()?;
        Some(ReducedFactor {
            d,
            dual_s,
            comp_rho,
            comp_s,
            llt,
        })
    }

    /// Solves `J x = b` for an interleaved `b`.
    fn solve(&self, f: &ReducedFactor, values: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.cells;
        let q: Vec<f64> = (0..n).map(|k| b[3 * k + 1] - f.dual_s[k] * b[3 * k + 2] / f.comp_s[k]).collect();
        let mut rhs: Vec<f64> = (0..n).map(|k| b[3 * k]).collect();
        for &(e, k, j) in &self.cont_rho {
            rhs[k] -= values[e] * q[j] / f.d[j];
        }
        let phi = solve_dense_rhs_llt(&f.llt, &rhs);
        let mut t = vec![0.0; n];
        for &(e, j, i) in &self.dual_phi {
            t[j] += values[e] * phi[i];
        }
        let mut x = vec![0.0; 3 * n];
        for k in 0..n {
            let rho = (q[k] - t[k]) / f.d[k];
            x[3 * k] = rho;
            x[3 * k + 1] = phi[k];
            x[3 * k + 2] = (b[3 * k + 2] - f.comp_rho[k] * rho) / f.comp_s[k];
        }
        x
    }
}

fn solve_dense_rhs_llt(llt: &Llt<usize, f64>, rhs: &[f64]) -> Vec<f64> {
    let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = llt.solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

fn solve_dense_rhs(lu: &Lu<usize, f64>, rhs: &[f64]) -> Vec<f64> {
    let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual of the barrier-perturbed optimality system at `state`.
pub fn kkt_residual(
    state: &LjkoState,
    prev: &CellField,
    tau: f64,
    energy: &dyn Energy,
    w: WeightScheme,
    mesh: &AdmissibleMesh,
) -> Result<KktResidual> {
    KktProblem::new(prev, tau, energy, w, mesh)?.residual(state)
}

/// Exact Jacobian of [`kkt_residual`] with respect to `(ρ, φ, s)`.
pub fn kkt_jacobian(
    state: &LjkoState,
    prev: &CellField,
    tau: f64,
    energy: &dyn Energy,
    w: WeightScheme,
    mesh: &AdmissibleMesh,
) -> Result<KktMatrix> {
    let pattern = Arc::new(KktPattern::new(mesh)?);
    KktProblem::new(prev, tau, energy, w, mesh)?.jacobian(state, &pattern)
}

/// Solves `J d = -r` by sparse LU.
pub fn newton_direction(state: &LjkoState, residual: &KktResidual, jacobian: &KktMatrix) -> Result<Direction> {
    let mut solver = KktSolver {
        pattern: Arc::clone(&jacobian.pattern),
        symbolic: None,
    };
    solver.solve(state, jacobian, residual)
}

/// Fraction-to-boundary step: `min(1, f · α_max)` with `α_max` the largest
/// step keeping `ρ` and `s` positive.
pub fn step_length(state: &LjkoState, dir: &Direction, fraction_to_boundary: f64) -> f64 {
    let ratio = |x: &[f64], dx: &[f64]| {
        x.iter()
            .zip(dx)
            .filter(|(_, &d)| d < 0.0)
            .map(|(&v, &d)| -v / d)
            .fold(f64::INFINITY, f64::min)
    };
    let alpha_max = ratio(&state.rho, &dir.rho).min(ratio(&state.s, &dir.s));
    (fraction_to_boundary * alpha_max).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{FokkerPlanck, Potential, PorousMedium};
    use crate::mesh::{build_mesh, build_structured_mesh, compute_geometry, MeshPattern, Rect};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn staggered(n: usize) -> AdmissibleMesh {
        compute_geometry(&build_mesh(MeshPattern::Staggered, Rect::unit_square(), n).unwrap()).unwrap()
    }

    fn random_state(n: usize, mu: f64, rng: &mut ChaCha8Rng) -> LjkoState {
        let pos = |rng: &mut ChaCha8Rng| CellField::new((0..n).map(|_| rng.random_range(0.2..2.0)).collect());
        let rho = pos(rng);
        let s = pos(rng);
        let phi = CellField::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        LjkoState { rho, phi, s, mu }
    }

    #[test]
    fn uniform_stationary_state_has_zero_residual() {
        let mesh = staggered(3);
        let (c, mu) = (1.7, 1e-3);
        let n = mesh.num_cells();
        let fp = FokkerPlanck::default();
        let state = LjkoState {
            rho: CellField::constant(n, c),
            // block 2 vanishes only once the slack is subtracted from E'(ρ)
            phi: CellField::constant(n, c.ln() + 1.0 - mu / c),
            s: CellField::constant(n, mu / c),
            mu,
        };
        let prev = CellField::constant(n, c);
        for w in WeightScheme::ALL {
            let r = kkt_residual(&state, &prev, 0.3, &fp, w, &mesh).unwrap();
            assert!(r.continuity.iter().all(|v| *v == 0.0));
            assert!(r.dual.iter().all(|v| v.abs() < 1e-15));
            assert!(r.complementarity.iter().all(|v| v.abs() < 1e-18));
        }
    }

    #[test]
    fn constant_phi_reduces_continuity_to_mass_change() {
        let mesh = staggered(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = random_state(mesh.num_cells(), 0.1, &mut rng);
        state.phi = CellField::constant(mesh.num_cells(), 0.4);
        let prev = CellField::constant(mesh.num_cells(), 1.0);
        let r = kkt_residual(&state, &prev, 0.5, &FokkerPlanck::default(), WeightScheme::LinearInterp, &mesh).unwrap();
        for (k, c) in mesh.cells().iter().enumerate() {
            assert_relative_eq!(r.continuity[k], (state.rho[k] - 1.0) * c.measure, epsilon = 1e-15);
        }
    }

    /// Independent evaluation of the perturbed optimality system, cell by
    /// cell through the adjacency lists.
    fn residual_by_cells(
        state: &LjkoState,
        prev: &CellField,
        tau: f64,
        e: &dyn Energy,
        w: WeightScheme,
        mesh: &AdmissibleMesh,
    ) -> Vec<[f64; 3]> {
        (0..mesh.num_cells())
            .map(|k| {
                let c = &mesh.cells()[k];
                let mut flux_sum = 0.0;
                let mut adj = 0.0;
                for r in mesh.cell_edges(k) {
                    let edge = &mesh.edges()[r.edge];
                    let other = if r.is_k { edge.cells.1 } else { edge.cells.0 };
                    let (lk, ll) = w.weights(edge);
                    let lam_self = if r.is_k { lk } else { ll };
                    let rho_sigma = lk * state.rho[edge.cells.0] + ll * state.rho[edge.cells.1];
                    let grad_from_k = (state.phi[other] - state.phi[k]) / edge.dist;
                    flux_sum += rho_sigma * grad_from_k * edge.measure;
                    adj += grad_from_k.powi(2) * lam_self * edge.measure * edge.dist / c.measure;
                }
                [
                    (state.rho[k] - prev[k]) * c.measure - tau * flux_sum,
                    (state.phi[k] - e.prime(state.rho[k], c.center) + state.s[k]) * c.measure
                        + 0.5 * tau * adj * c.measure,
                    state.s[k] * state.rho[k] - state.mu,
                ]
            })
            .collect()
    }

    #[test]
    fn residual_matches_cellwise_evaluation() {
        let mesh = compute_geometry(&build_structured_mesh(Rect::unit_square(), 1).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pm = PorousMedium::new(2.0, Potential::QuadraticHalf).unwrap();
        let fp = FokkerPlanck::new(Potential::LinearDrift { g: 1.0 });
        for e in [&pm as &dyn Energy, &fp] {
            for w in WeightScheme::ALL {
                let state = random_state(4, 0.01, &mut rng);
                let prev = CellField::new((0..4).map(|_| rng.random_range(0.5..1.5)).collect());
                let got = kkt_residual(&state, &prev, 0.2, e, w, &mesh).unwrap();
                let want = residual_by_cells(&state, &prev, 0.2, e, w, &mesh);
                for k in 0..4 {
                    assert_relative_eq!(got.continuity[k], want[k][0], epsilon = 1e-14);
                    assert_relative_eq!(got.dual[k], want[k][1], epsilon = 1e-14);
                    assert_relative_eq!(got.complementarity[k], want[k][2], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn nonpositive_iterates_are_rejected() {
        let mesh = staggered(2);
        let n = mesh.num_cells();
        let mut state = LjkoState {
            rho: CellField::constant(n, 1.0),
            phi: CellField::zeros(n),
            s: CellField::constant(n, 1.0),
            mu: 1.0,
        };
        state.rho[0] = 0.0;
        let prev = CellField::constant(n, 1.0);
        let fp = FokkerPlanck::default();
        assert!(matches!(
            kkt_residual(&state, &prev, 1.0, &fp, WeightScheme::Centered, &mesh),
            Err(Error::Domain(_))
        ));
        state.rho[0] = 1.0;
        state.s[1] = -1.0;
        assert!(kkt_jacobian(&state, &prev, 1.0, &fp, WeightScheme::Centered, &mesh).is_err());
    }

    #[test]
    fn stencil_and_complementarity_rows() {
        let mesh = staggered(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = random_state(mesh.num_cells(), 0.1, &mut rng);
        let prev = CellField::constant(mesh.num_cells(), 1.0);
        let jac = kkt_jacobian(&state, &prev, 0.3, &FokkerPlanck::default(), WeightScheme::MassWeighted, &mesh).unwrap();
        for k in 0..mesh.num_cells() {
            let mut allowed: Vec<usize> = vec![k];
            for r in mesh.cell_edges(k) {
                let e = &mesh.edges()[r.edge];
                allowed.push(if r.is_k { e.cells.1 } else { e.cells.0 });
            }
            for col in jac.row_pattern(3 * k) {
                assert!(allowed.contains(&(col / 3)));
                assert_ne!(col % 3, SLACK);
            }
            assert_eq!(jac.row_pattern(3 * k + 2), vec![3 * k, 3 * k + 2]);
            assert_eq!(jac.get(3 * k + 2, 3 * k), state.s[k]);
            assert_eq!(jac.get(3 * k + 2, 3 * k + 2), state.rho[k]);
        }
    }

    #[test]
    fn direction_vanishes_at_a_root() {
        let mesh = staggered(2);
        let n = mesh.num_cells();
        let (c, mu) = (0.8, 1e-2);
        let state = LjkoState {
            rho: CellField::constant(n, c),
            phi: CellField::constant(n, c.ln() + 1.0 - mu / c),
            s: CellField::constant(n, mu / c),
            mu,
        };
        let prev = CellField::constant(n, c);
        let fp = FokkerPlanck::default();
        let r = kkt_residual(&state, &prev, 1.0, &fp, WeightScheme::Centered, &mesh).unwrap();
        let j = kkt_jacobian(&state, &prev, 1.0, &fp, WeightScheme::Centered, &mesh).unwrap();
        let d = newton_direction(&state, &r, &j).unwrap();
        assert!(d.max_abs() < 1e-14);
    }

    #[test]
    fn direction_solves_the_linear_system_deterministically() {
        let mesh = staggered(4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state = random_state(mesh.num_cells(), 0.05, &mut rng);
        let prev = CellField::new((0..mesh.num_cells()).map(|_| rng.random_range(0.5..1.5)).collect());
        let fp = FokkerPlanck::new(Potential::LinearDrift { g: 1.0 });
        let w = WeightScheme::LinearInterp;
        let r = kkt_residual(&state, &prev, 0.1, &fp, w, &mesh).unwrap();
        let j = kkt_jacobian(&state, &prev, 0.1, &fp, w, &mesh).unwrap();
        let d1 = newton_direction(&state, &r, &j).unwrap();
        let d2 = newton_direction(&state, &r, &j).unwrap();
        assert_eq!(d1, d2);
        let x: Vec<f64> = (0..mesh.num_cells()).flat_map(|k| [d1.rho[k], d1.phi[k], d1.s[k]]).collect();
        let jx = j.apply(&x);
        let rr = r.interleaved();
        let scale = rr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in jx.iter().zip(&rr) {
            assert!((a + b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn reduced_solve_matches_full_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for pattern in [MeshPattern::Crisscross, MeshPattern::Staggered] {
            let mesh = compute_geometry(&build_mesh(pattern, Rect::unit_square(), 5).unwrap()).unwrap();
            let n = mesh.num_cells();
            let energies: [&dyn Energy; 2] = [
                &FokkerPlanck::new(Potential::LinearDrift { g: 1.0 }),
                &PorousMedium::new(2.0, Potential::QuadraticHalf).unwrap(),
            ];
            for energy in energies {
                for w in WeightScheme::ALL {
                    let state = random_state(n, 1e-3, &mut rng);
                    let prev = CellField::new((0..n).map(|_| rng.random_range(0.0..1.5)).collect());
                    let r = kkt_residual(&state, &prev, 0.2, energy, w, &mesh).unwrap();
                    let j = kkt_jacobian(&state, &prev, 0.2, energy, w, &mesh).unwrap();
                    let schur = j.pattern.schur.as_ref().expect("LJKO pattern has the block structure");
                    let reduced = schur.factor(&j.values).expect("reduced matrix is positive definite");
                    let rhs: Vec<f64> = r.interleaved().iter().map(|v| -v).collect();
                    let x = schur.solve(&reduced, &j.values, &rhs);

                    let csc = j.to_csc().unwrap();
                    let lu = Lu::try_new_with_symbolic(SymbolicLu::try_new(csc.symbolic()).unwrap(), csc.as_ref())
                        .unwrap();
                    let y = solve_dense_rhs(&lu, &rhs);
                    let scale = norm_inf(&y);
                    for (a, b) in x.iter().zip(&y) {
                        assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn step_length_ratio_test() {
        let state = LjkoState {
            rho: CellField::new(vec![1.0]),
            phi: CellField::zeros(1),
            s: CellField::new(vec![1.0]),
            mu: 1.0,
        };
        let dir = Direction {
            rho: CellField::new(vec![-2.0]),
            phi: CellField::zeros(1),
            s: CellField::zeros(1),
        };
        assert_relative_eq!(step_length(&state, &dir, 0.95), 0.475, epsilon = 1e-15);
        let up = Direction {
            rho: CellField::new(vec![3.0]),
            phi: CellField::new(vec![-9.0]),
            s: CellField::new(vec![0.5]),
        };
        assert_eq!(step_length(&state, &up, 0.95), 1.0);
    }

    #[test]
    fn step_length_keeps_iterates_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let state = random_state(10, 1.0, &mut rng);
            let dir = Direction {
                rho: CellField::new((0..10).map(|_| rng.random_range(-50.0..5.0)).collect()),
                phi: CellField::zeros(10),
                s: CellField::new((0..10).map(|_| rng.random_range(-50.0..5.0)).collect()),
            };
            let a = step_length(&state, &dir, 0.95);
            assert!(a > 0.0 && a <= 1.0);
            for k in 0..10 {
                assert!(state.rho[k] + a * dir.rho[k] > 0.0);
                assert!(state.s[k] + a * dir.s[k] > 0.0);
            }
        }
    }
}
