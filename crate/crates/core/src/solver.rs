//! Ground states of the semilinear eigenproblem at a fixed parameter point:
//! damped self-consistent field iteration on the linearized operator,
//! the eigenvalue-energy identity, the `O`/`T` linearizations, and the
//! spectral-gap report.

use thiserror::Error;

use crate::coeff::{evaluate_potential, AffinePotential, CoeffError, ParamVector};
use crate::spatial::{
    add_diagonal, assemble_stiffness, smallest_eigpair, EigPair, FieldOnGrid, FieldRole, Grid,
    SparseSymmetricOperator, SpatialError,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error("pair (d, p) = ({d}, {p}) is not admissible")]
    NotAdmissible { d: usize, p: u32 },
    #[error("eta must be positive (got {0})")]
    NonPositiveEta(f64),
    #[error(
        "SCF did not converge in {iters} iterations (residual {residual:e}); best iterate attached"
    )]
    IterationLimit {
        iters: usize,
        residual: f64,
        best: Box<GroundState>,
    },
    #[error("converged state is not strictly positive (min node value {min_value:e})")]
    PositivityViolation { min_value: f64 },
    #[error("spectral gap is not positive (gap {gap:e})")]
    NonPositiveGap { gap: f64 },
    #[error("gap {gap:e} fell below its witness {witness:e} beyond tolerance")]
    GapBelowWitness { gap: f64, witness: f64 },
}

/// Admissible (dimension, power) pairs for the ground eigenpair: any power in
/// d = 1, 2; `p <= d/(d-2)` beyond.
pub fn admissible(d: usize, p: u32) -> bool {
    p >= 1 && (d <= 2 || p as f64 <= d as f64 / (d as f64 - 2.0))
}

/// Stricter admissibility needed for energy derivatives: `p <= 2/(d-2)` when
/// d >= 3.
pub fn admissible_energy(d: usize, p: u32) -> bool {
    p >= 1 && (d <= 2 || p as f64 <= 2.0 / (d as f64 - 2.0))
}

/// Fixed problem data: grid, diffusion field, affine potential, nonlinearity
/// strength `eta` and power `p`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    grid: Grid,
    a: FieldOnGrid,
    pot: AffinePotential,
    eta: f64,
    p: u32,
}

impl ProblemSpec {
    pub fn new(
        grid: Grid,
        a: FieldOnGrid,
        pot: AffinePotential,
        eta: f64,
        p: u32,
    ) -> Result<Self, SolverError> {
        if !admissible(grid.dim(), p) || p < 2 {
            return Err(SolverError::NotAdmissible { d: grid.dim(), p });
        }
        if eta <= 0.0 {
            return Err(SolverError::NonPositiveEta(eta));
        }
        Ok(ProblemSpec {
            grid,
            a,
            pot,
            eta,
            p,
        })
    }

    /// Unit diffusion on the given grid.
    pub fn with_unit_diffusion(
        grid: Grid,
        pot: AffinePotential,
        eta: f64,
        p: u32,
    ) -> Result<Self, SolverError> {
        let a = FieldOnGrid::constant(&grid, FieldRole::Diffusion, 1.0)
            .expect("unit diffusion is valid");
        ProblemSpec::new(grid, a, pot, eta, p)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pot(&self) -> &AffinePotential {
        &self.pot
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn stiffness(&self) -> Result<SparseSymmetricOperator, SpatialError> {
        assemble_stiffness(&self.grid, &self.a)
    }

    fn nonlinear_diag(&self, u: &[f64], factor: f64) -> Vec<f64> {
        u.iter()
            .map(|&x| factor * self.eta * x.abs().powi(self.p as i32 - 1))
            .collect()
    }
}

/// Solver knobs; `tol` doubles as the relative nonlinear-residual target.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub damping: f64,
    pub max_iters: usize,
    pub warm_start: Option<FieldOnGrid>,
}

impl SolveOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        SolveOptions {
            tol: if grid.dim() == 1 { 1e-10 } else { 1e-8 },
            damping: 0.5,
            max_iters: 2000,
            warm_start: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_warm_start(mut self, u: FieldOnGrid) -> Self {
        self.warm_start = Some(u);
        self
    }
}

/// Converged ground state at one parameter point.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub u: FieldOnGrid,
    pub lambda: f64,
    pub energy: f64,
    pub scf_iters: usize,
    pub residual: f64,
    pub y: ParamVector,
    /// Diagnostic: whether the SCF energy was non-increasing after the first
    /// iterate.
    pub energy_monotone: bool,
}

/// Discrete energy `E[u] = <A u, u>_h + sum_h b u^2 + 2 eta/(p+1) sum_h |u|^(p+1)`
/// with the stiffness quadratic form carrying the gradient term.
pub fn energy(spec: &ProblemSpec, y: &ParamVector, u: &FieldOnGrid) -> Result<f64, SolverError> {
    let b = evaluate_potential(&spec.pot, y, &spec.grid)?;
    let stiff = spec.stiffness()?;
    Ok(energy_with_field(spec, &stiff, &b, u.values()))
}

fn energy_with_field(
    spec: &ProblemSpec,
    stiff: &SparseSymmetricOperator,
    b: &FieldOnGrid,
    u: &[f64],
) -> f64 {
    let grid = &spec.grid;
    let grad_term = grid.dot(&stiff.apply(u), u);
    let pot_term: f64 = grid.cell_volume()
        * u.iter()
            .zip(b.values())
            .map(|(&x, &bv)| bv * x * x)
            .sum::<f64>();
    let nl_term: f64 = grid.cell_volume()
        * u.iter()
            .map(|&x| x.abs().powi(spec.p as i32 + 1))
            .sum::<f64>()
        * 2.0
        * spec.eta
        / (spec.p as f64 + 1.0);
    grad_term + pot_term + nl_term
}

/// Rayleigh quotient and residual of `u` in its own linearization `O(u)`.
fn self_consistent_pair(
    spec: &ProblemSpec,
    base: &SparseSymmetricOperator,
    u: &[f64],
) -> (f64, f64) {
    let op = base
        .add_diagonal(&spec.nonlinear_diag(u, 1.0))
        .expect("sizes match by construction");
    let au = op.apply(u);
    let lambda = spec.grid.dot(&au, u);
    let diff: Vec<f64> = au.iter().zip(u).map(|(a, x)| a - lambda * x).collect();
    (lambda, spec.grid.norm(&diff))
}

/// Ground state by damped SCF: repeatedly take the smallest eigenvector of
/// the operator frozen at the current iterate, mix, renormalize. Stops when
/// the nonlinear residual `||O(u)u - lambda u||_h` falls below `tol |lambda|`
/// and the iterate and eigenvalue have settled.
pub fn solve_ground(
    spec: &ProblemSpec,
    y: &ParamVector,
    opts: &SolveOptions,
) -> Result<GroundState, SolverError> {
    let grid = &spec.grid;
    let b = evaluate_potential(&spec.pot, y, grid)?;
    let stiff = spec.stiffness()?;
    let base = add_diagonal(&stiff, &b)?;
    let eig_tol = opts.tol;

    let mut u: Vec<f64> = match &opts.warm_start {
        Some(w) => {
            let mut v = w.values().to_vec();
            grid.normalize(&mut v);
            v
        }
        None => {
            // ground mode of the linear part: right sign and nodal structure
            let linear = smallest_eigpair(&base, grid, eig_tol, None)?;
            linear.vector.values().to_vec()
        }
    };
    let base_damping = opts.damping.clamp(1e-3, 1.0);
    let mut damping = base_damping;
    const DAMPING_FLOOR: f64 = 1e-3;
    let (mut lambda, mut residual) = self_consistent_pair(spec, &base, &u);
    let mut prev_energy = energy_with_field(spec, &stiff, &b, &u);
    let mut energy_monotone = true;

    for iter in 1..=opts.max_iters {
        let frozen = base.add_diagonal(&spec.nonlinear_diag(&u, 1.0))?;
        let warm = FieldOnGrid::new(grid, FieldRole::State, u.clone())?;
        let pair = smallest_eigpair(&frozen, grid, eig_tol, Some(&warm))?;

        // pick the mixing weight that most reduces the nonlinear residual;
        // strong nonlinearities destabilize the undamped map and need small
        // weights, mild ones converge fastest near the requested damping
        let mix = |d: f64| -> (Vec<f64>, f64, f64) {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(pair.vector.values())
                .map(|(&a, &v)| (1.0 - d) * a + d * v)
                .collect();
            grid.normalize(&mut trial);
            let (l, r) = self_consistent_pair(spec, &base, &trial);
            (trial, l, r)
        };
        let mut chosen = (damping, mix(damping));
        for cand in [damping * 2.0, damping * 0.5, damping * 0.25] {
            let cand = cand.clamp(DAMPING_FLOOR, base_damping);
            if cand == chosen.0 {
                continue;
            }
            let trial = mix(cand);
            if trial.2 < (chosen.1).2 {
                chosen = (cand, trial);
            }
        }
        damping = chosen.0;
        let (u_next, lambda_next, res_next) = chosen.1;

        let e_next = energy_with_field(spec, &stiff, &b, &u_next);
        if iter > 1 && e_next > prev_energy + 1e-13 * prev_energy.abs() {
            energy_monotone = false;
        }
        prev_energy = e_next;

        let du = {
            let diff: Vec<f64> = u_next.iter().zip(&u).map(|(a, b)| a - b).collect();
            grid.norm(&diff)
        };
        let dl = (lambda_next - lambda).abs();
        u = u_next;
        lambda = lambda_next;
        residual = res_next;

        if residual <= opts.tol * lambda.abs() && du <= opts.tol && dl <= opts.tol * lambda.abs() {
            let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
            if min_value <= 0.0 {
                return Err(SolverError::PositivityViolation { min_value });
            }
            let energy = energy_with_field(spec, &stiff, &b, &u);
            return Ok(GroundState {
                u: FieldOnGrid::new(grid, FieldRole::State, u)?,
                lambda,
                energy,
                scf_iters: iter,
                residual,
                y: y.clone(),
                energy_monotone,
            });
        }
    }

    let energy = energy_with_field(spec, &stiff, &b, &u);
    let best = GroundState {
        u: FieldOnGrid::new(grid, FieldRole::State, u)?,
        lambda,
        energy,
        scf_iters: opts.max_iters,
        residual,
        y: y.clone(),
        energy_monotone,
    };
    Err(SolverError::IterationLimit {
        iters: opts.max_iters,
        residual,
        best: Box::new(best),
    })
}

/// Smallest eigenpair of the second linearization
/// `T(y) = -div(a grad) + b(y) + p eta u^(p-1)` at a converged ground state.
pub fn linearized_ground_t(
    spec: &ProblemSpec,
    gs: &GroundState,
    tol: f64,
) -> Result<EigPair, SolverError> {
    let b = evaluate_potential(&spec.pot, &gs.y, &spec.grid)?;
    let base = add_diagonal(&spec.stiffness()?, &b)?;
    let op_t = base.add_diagonal(&spec.nonlinear_diag(gs.u.values(), spec.p as f64))?;
    Ok(smallest_eigpair(&op_t, &spec.grid, tol, Some(&gs.u))?)
}

/// Gap between the ground eigenvalues of `T` and `O` at one parameter point,
/// together with the proof-chain witness `(p-1) eta int u^(p-1) u_T^2`.
#[derive(Clone, Debug)]
pub struct GapReport {
    pub lambda: f64,
    pub lambda_t: f64,
    pub gap: f64,
    pub lower_witness: f64,
    pub y: ParamVector,
}

pub fn gap_report(
    spec: &ProblemSpec,
    gs: &GroundState,
    tol: f64,
) -> Result<GapReport, SolverError> {
    let pair_t = linearized_ground_t(spec, gs, tol)?;
    let gap = pair_t.value - gs.lambda;
    let witness_vec: Vec<f64> =
        gs.u.values()
            .iter()
            .zip(pair_t.vector.values())
            .map(|(&u, &ut)| u.abs().powi(spec.p as i32 - 1) * ut * ut)
            .collect();
    let lower_witness = (spec.p as f64 - 1.0)
        * spec.eta
        * spec.grid.cell_volume()
        * witness_vec.iter().sum::<f64>();
    if gap <= 0.0 {
        return Err(SolverError::NonPositiveGap { gap });
    }
    if gap < lower_witness - 10.0 * tol * gs.lambda.abs().max(1.0) {
        return Err(SolverError::GapBelowWitness {
            gap,
            witness: lower_witness,
        });
    }
    Ok(GapReport {
        lambda: gs.lambda,
        lambda_t: pair_t.value,
        gap,
        lower_witness,
        y: gs.y.clone(),
    })
}

/// Pointwise amplitude bound `u <= (lambda/eta)^(1/(p-1))`, allowing 1e-8
/// relative slack for discretization round-off.
pub fn verify_amplitude_bound(spec: &ProblemSpec, gs: &GroundState) -> bool {
    let cap = (gs.lambda / spec.eta).powf(1.0 / (spec.p as f64 - 1.0));
    gs.u.max() <= cap * (1.0 + 1e-8)
}

/// `int u^(p+1)` in the discrete quadrature; the nonlinear moment entering
/// the eigenvalue-energy identity.
pub fn nonlinear_moment(spec: &ProblemSpec, u: &FieldOnGrid) -> f64 {
    spec.grid.cell_volume()
        * u.values()
            .iter()
            .map(|&x| x.abs().powi(spec.p as i32 + 1))
            .sum::<f64>()
}

/// Residual of the identity `lambda = E + eta (p-1)/(p+1) int u^(p+1)`.
pub fn identity_residual(spec: &ProblemSpec, gs: &GroundState) -> f64 {
    let correction =
        spec.eta * (spec.p as f64 - 1.0) / (spec.p as f64 + 1.0) * nonlinear_moment(spec, &gs.u);
    gs.lambda - gs.energy - correction
}
