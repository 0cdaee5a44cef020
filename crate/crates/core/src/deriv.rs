//! Finite-difference estimates of parametric mixed derivatives of the ground
//! eigenvalue, energy, and eigenfunction, plus the scale-free growth-bound
//! scan. Estimates stop at total order three; tensor stencils beyond that
//! drown in solver noise.

use std::collections::HashMap;

use thiserror::Error;

use crate::coeff::{CoeffError, ParamVector};
use crate::multiindex::{factorial, MultiIndex};
use crate::solver::{
    admissible_energy, nonlinear_moment, solve_ground, GroundState, ProblemSpec, SolveOptions,
    SolverError,
};
use crate::spatial::{assemble_stiffness, FieldOnGrid, FieldRole};

#[derive(Debug, Error)]
pub enum DerivError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("derivative order {0} exceeds the supported maximum of 3")]
    OrderTooHigh(u64),
    #[error("stencil leaves the parameter box at coordinate {coord} (value {value})")]
    StencilLeavesDomain { coord: u32, value: f64 },
    #[error("(d, p) pair is not admissible for energy derivatives")]
    NotEnergyAdmissible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivTarget {
    Lambda,
    Energy,
    UL2Norm,
    UH1Norm,
}

impl DerivTarget {
    pub fn label(&self) -> &'static str {
        match self {
            DerivTarget::Lambda => "lambda",
            DerivTarget::Energy => "energy",
            DerivTarget::UL2Norm => "u_l2",
            DerivTarget::UH1Norm => "u_h1",
        }
    }
}

/// One finite-difference mixed-derivative estimate.
#[derive(Clone, Debug)]
pub struct DerivEstimate {
    pub nu: MultiIndex,
    pub target: DerivTarget,
    pub value: f64,
    pub step: f64,
    pub richardson_order: u32,
    pub y: ParamVector,
}

/// Central-difference weights per coordinate order (offset, weight); the
/// weight scale is `1/step^order`.
fn stencil(order: u32) -> (&'static [(i32, f64)], u32) {
    match order {
        1 => (&[(-1, -0.5), (1, 0.5)], 2),
        2 => (
            &[
                (-2, -1.0 / 12.0),
                (-1, 4.0 / 3.0),
                (0, -2.5),
                (1, 4.0 / 3.0),
                (2, -1.0 / 12.0),
            ],
            4,
        ),
        3 => (
            &[
                (-3, 0.125),
                (-2, -1.0),
                (-1, 1.625),
                (1, -1.625),
                (2, 1.0),
                (3, -0.125),
            ],
            4,
        ),
        _ => unreachable!("orders above 3 are rejected before stencil lookup"),
    }
}

/// Ground-state cache over stencil points; keys are exact bit patterns so
/// shared points between tensor stencils are solved once. Insertion order is
/// preserved and the most recent solve seeds the next warm start, keeping
/// the whole scan deterministic.
struct StencilSolver<'a> {
    spec: &'a ProblemSpec,
    opts: SolveOptions,
    cache: Vec<(Vec<u64>, GroundState)>,
}

impl<'a> StencilSolver<'a> {
    fn new(spec: &'a ProblemSpec, opts: &SolveOptions) -> Self {
        StencilSolver {
            spec,
            opts: opts.clone(),
            cache: Vec::new(),
        }
    }

    fn solve(&mut self, y: &ParamVector) -> Result<&GroundState, DerivError> {
        let key: Vec<u64> = y.coords().iter().map(|v| v.to_bits()).collect();
        if let Some(pos) = self.cache.iter().position(|(k, _)| k == &key) {
            return Ok(&self.cache[pos].1);
        }
        let warm = self.cache.last().map(|(_, g)| g.u.clone());
        let mut opts = self.opts.clone();
        opts.warm_start = warm;
        let gs = solve_ground(self.spec, y, &opts)?;
        self.cache.push((key, gs));
        Ok(&self.cache.last().expect("just pushed").1)
    }
}

/// The tensor-product stencil of `nu` over `y`: a list of (shifted point,
/// combined weight) pairs with the `1/step^|nu|` scale included.
fn tensor_stencil(
    y: &ParamVector,
    nu: &MultiIndex,
    step: f64,
) -> Result<(Vec<(ParamVector, f64)>, u32), DerivError> {
    if nu.order() > 3 {
        return Err(DerivError::OrderTooHigh(nu.order()));
    }
    let mut points: Vec<(ParamVector, f64)> = vec![(y.clone(), 1.0)];
    let mut accuracy = u32::MAX;
    for (coord, ord) in nu.iter() {
        let (weights, acc) = stencil(ord);
        accuracy = accuracy.min(acc);
        let scale = step.powi(-(ord as i32));
        let mut next: Vec<(ParamVector, f64)> = Vec::with_capacity(points.len() * weights.len());
        for (base, w0) in &points {
            for &(offset, w) in weights {
                let shifted = base
                    .shifted((coord - 1) as usize, offset as f64 * step)
                    .map_err(|_| DerivError::StencilLeavesDomain {
                        coord,
                        value: base.coord((coord - 1) as usize) + offset as f64 * step,
                    })?;
                next.push((shifted, w0 * w * scale));
            }
        }
        points = next;
    }
    Ok((points, accuracy))
}

fn eval_scalar(
    solver: &mut StencilSolver,
    spec: &ProblemSpec,
    points: &[(ParamVector, f64)],
    target: DerivTarget,
) -> Result<f64, DerivError> {
    match target {
        DerivTarget::Lambda | DerivTarget::Energy => {
            let mut acc = 0.0;
            for (point, w) in points {
                let gs = solver.solve(point)?;
                acc += w * match target {
                    DerivTarget::Lambda => gs.lambda,
                    DerivTarget::Energy => gs.energy,
                    _ => unreachable!(),
                };
            }
            Ok(acc)
        }
        DerivTarget::UL2Norm | DerivTarget::UH1Norm => {
            // difference the sign-aligned fields, then take the norm
            let n = spec.grid().len();
            let mut field = vec![0.0; n];
            for (point, w) in points {
                let gs = solver.solve(point)?;
                for (f, &u) in field.iter_mut().zip(gs.u.values()) {
                    *f += w * u;
                }
            }
            match target {
                DerivTarget::UL2Norm => Ok(spec.grid().norm(&field)),
                DerivTarget::UH1Norm => {
                    let ones = FieldOnGrid::constant(spec.grid(), FieldRole::Diffusion, 1.0)
                        .expect("unit field");
                    let lap = assemble_stiffness(spec.grid(), &ones).map_err(SolverError::from)?;
                    Ok(spec.grid().dot(&lap.apply(&field), &field).max(0.0).sqrt())
                }
                _ => unreachable!(),
            }
        }
    }
}

/// Tensor-product central-difference estimate of `d^nu target` at `y`,
/// optionally sharpened by one Richardson step (`richardson_order = 1`
/// combines the estimates at `step` and `step/2`).
pub fn fd_mixed(
    spec: &ProblemSpec,
    y: &ParamVector,
    nu: &MultiIndex,
    target: DerivTarget,
    step: f64,
    richardson_order: u32,
    opts: &SolveOptions,
) -> Result<DerivEstimate, DerivError> {
    let mut solver = StencilSolver::new(spec, opts);
    let (points, accuracy) = tensor_stencil(y, nu, step)?;
    let coarse = eval_scalar(&mut solver, spec, &points, target)?;
    let value = if richardson_order >= 1 {
        let (points_fine, _) = tensor_stencil(y, nu, step * 0.5)?;
        let fine = eval_scalar(&mut solver, spec, &points_fine, target)?;
        let factor = 2f64.powi(accuracy as i32);
        (factor * fine - coarse) / (factor - 1.0)
    } else {
        coarse
    };
    Ok(DerivEstimate {
        nu: nu.clone(),
        target,
        value,
        step,
        richardson_order,
        y: y.clone(),
    })
}

/// One row of a growth-bound scan: the estimate and its scale-free ratio
/// `r(nu) = |estimate| / (|nu|! prod ||b_i||^nu_i)`.
#[derive(Clone, Debug)]
pub struct BoundRow {
    pub nu: MultiIndex,
    pub estimate: f64,
    pub ratio: f64,
    pub step: f64,
    pub y: ParamVector,
}

/// Scan summary over all requested indices and samples. `cross_order_sup` is
/// `max r(nu)^(1/|nu|)`; a single bounding constant exists exactly when this
/// stays comparable to the first-order ratios.
#[derive(Clone, Debug)]
pub struct BoundRatioReport {
    pub rows: Vec<BoundRow>,
    pub per_order_max: Vec<(u64, f64)>,
    pub cross_order_sup: f64,
    pub first_order_max: f64,
}

/// All multi-indices over `coords` with `1 <= |nu| <= order_cap`, in
/// deterministic lexicographic order.
pub fn indices_up_to(coords: &[u32], order_cap: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let m = coords.len();
    let mut exps = vec![0u32; m];
    loop {
        let total: u32 = exps.iter().sum();
        if (1..=order_cap).contains(&total) {
            let pairs: Vec<(u32, u32)> = coords
                .iter()
                .zip(&exps)
                .filter(|(_, &e)| e > 0)
                .map(|(&c, &e)| (c, e))
                .collect();
            out.push(MultiIndex::from_pairs(&pairs));
        }
        // odometer with per-digit cap order_cap
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if exps[i] < order_cap {
                exps[i] += 1;
                for e in exps.iter_mut().skip(i + 1) {
                    *e = 0;
                }
                break;
            }
        }
    }
}

/// Estimates every mixed derivative of the eigenvalue over `coords` up to
/// `order_cap` at each sample and reports scale-free ratios against
/// `|nu|! prod ||b_i||^nu_i`.
pub fn bound_scan(
    spec: &ProblemSpec,
    y_samples: &[ParamVector],
    order_cap: u32,
    coords: &[u32],
    step_first: f64,
    step_higher: f64,
    opts: &SolveOptions,
) -> Result<BoundRatioReport, DerivError> {
    assert!(order_cap <= 3 && !coords.is_empty() && coords.len() <= 4);
    let norms = spec.pot().sup_norms();
    let indices = indices_up_to(coords, order_cap);
    let mut rows = Vec::new();
    for y in y_samples {
        let mut solver = StencilSolver::new(spec, opts);
        for nu in &indices {
            let step = if nu.order() == 1 {
                step_first
            } else {
                step_higher
            };
            let (points, _) = tensor_stencil(y, nu, step)?;
            let estimate = eval_scalar(&mut solver, spec, &points, DerivTarget::Lambda)?;
            let mut denom = num::ToPrimitive::to_f64(&factorial(nu.order())).unwrap_or(f64::MAX);
            for (coord, e) in nu.iter() {
                let b = norms[(coord - 1) as usize];
                denom *= b.powi(e as i32);
            }
            rows.push(BoundRow {
                nu: nu.clone(),
                estimate,
                ratio: estimate.abs() / denom,
                step,
                y: y.clone(),
            });
        }
    }
    let mut per_order: HashMap<u64, f64> = HashMap::new();
    let mut first_order_max: f64 = 0.0;
    for row in &rows {
        let order = row.nu.order();
        let normalized = row.ratio.powf(1.0 / order as f64);
        let slot = per_order.entry(order).or_insert(0.0);
        *slot = slot.max(normalized);
        if order == 1 {
            first_order_max = first_order_max.max(row.ratio);
        }
    }
    let mut per_order_max: Vec<(u64, f64)> = per_order.into_iter().collect();
    per_order_max.sort_by_key(|&(o, _)| o);
    let cross_order_sup = per_order_max.iter().fold(0.0f64, |acc, &(_, v)| acc.max(v));
    Ok(BoundRatioReport {
        rows,
        per_order_max,
        cross_order_sup,
        first_order_max,
    })
}

/// Energy derivative cross-check: the direct finite difference of the ground
/// energy against the route through the eigenvalue identity,
/// `d^nu E = d^nu lambda - eta (p-1)/(p+1) d^nu (int u^(p+1))`.
#[derive(Clone, Debug)]
pub struct EnergyDerivCheck {
    pub direct: DerivEstimate,
    pub via_identity: f64,
    pub rel_err: f64,
}

pub fn energy_deriv_check(
    spec: &ProblemSpec,
    y: &ParamVector,
    nu: &MultiIndex,
    step: f64,
    opts: &SolveOptions,
) -> Result<EnergyDerivCheck, DerivError> {
    if !admissible_energy(spec.grid().dim(), spec.p()) {
        return Err(DerivError::NotEnergyAdmissible);
    }
    if nu.order() > 2 {
        return Err(DerivError::OrderTooHigh(nu.order()));
    }
    let mut solver = StencilSolver::new(spec, opts);
    let (points, _) = tensor_stencil(y, nu, step)?;
    let direct_value = eval_scalar(&mut solver, spec, &points, DerivTarget::Energy)?;
    let lambda_fd = eval_scalar(&mut solver, spec, &points, DerivTarget::Lambda)?;
    // moment route reuses the cached stencil solves
    let mut moment_fd = 0.0;
    for (point, w) in &points {
        let gs = solver.solve(point)?;
        moment_fd += w * nonlinear_moment(spec, &gs.u);
    }
    let factor = spec.eta() * (spec.p() as f64 - 1.0) / (spec.p() as f64 + 1.0);
    let via_identity = lambda_fd - factor * moment_fd;
    let scale = direct_value.abs().max(via_identity.abs()).max(1e-12);
    let rel_err = (direct_value - via_identity).abs() / scale;
    let direct = DerivEstimate {
        nu: nu.clone(),
        target: DerivTarget::Energy,
        value: direct_value,
        step,
        richardson_order: 0,
        y: y.clone(),
    };
    Ok(EnergyDerivCheck {
        direct,
        via_identity,
        rel_err,
    })
}
