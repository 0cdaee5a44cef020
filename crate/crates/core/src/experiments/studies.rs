//! The four study drivers: spectral-gap scan, QMC convergence, dimension
//! truncation, and the derivative-bound scan. Each study pre-draws all of
//! its randomness from the run seed, parallelizes over independent solves,
//! and merges in a fixed order, so identical configs give identical tables.

use rayon::prelude::*;
use thiserror::Error;

use crate::coeff::{evaluate_potential, sample_y, CoeffError, ParamVector};
use crate::deriv::{bound_scan, BoundRatioReport, DerivError};
use crate::multiindex::factorial;
use crate::qmc::{
    cbc_construct, combine_shift_values, default_theta, LatticeRule, PodWeights, QmcError,
};
use crate::solver::{
    gap_report, solve_ground, GroundState, ProblemSpec, SolveOptions, SolverError,
};
use crate::spatial::FieldOnGrid;
use crate::util::{pairwise_sum, stream_rng};

use super::config::{ConfigError, ExperimentConfig};
use super::slope::{fit_slope, SlopeError, SlopeFit};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error(transparent)]
    Qmc(#[from] QmcError),
    #[error(transparent)]
    Slope(#[from] SlopeError),
    #[error("gap scan failed at sample {index}: {source}")]
    GapSample {
        index: usize,
        source: Box<SolverError>,
    },
}

fn solve_with_warm(
    spec: &ProblemSpec,
    y: &ParamVector,
    opts: &SolveOptions,
    warm: Option<&FieldOnGrid>,
) -> Result<GroundState, SolverError> {
    let mut opts = opts.clone();
    opts.warm_start = warm.cloned();
    solve_ground(spec, y, &opts)
}

// ---------------------------------------------------------------- gap scan

#[derive(Clone, Debug)]
pub struct GapRow {
    pub index: usize,
    pub lambda: f64,
    pub lambda_t: f64,
    pub gap: f64,
    pub witness: f64,
}

#[derive(Clone, Debug)]
pub struct GapScanResult {
    pub rows: Vec<GapRow>,
    pub min_gap: f64,
    pub median_gap: f64,
    pub max_gap: f64,
    pub min_witness: f64,
}

/// Ground and linearized eigenvalues at `samples` random parameter points;
/// errors out if any gap fails positivity or its witness bound.
pub fn run_gap_scan(cfg: &ExperimentConfig) -> Result<GapScanResult, StudyError> {
    cfg.require_active_dim(cfg.gap.s, "gap.s")?;
    let spec = cfg.build_problem()?;
    let opts = cfg.solve_options();
    let ys = sample_y(cfg.gap.s, cfg.seed, cfg.gap.samples);
    let rows: Vec<GapRow> = ys
        .par_iter()
        .enumerate()
        .map(|(index, y)| -> Result<GapRow, StudyError> {
            let gs = solve_ground(&spec, y, &opts).map_err(|e| StudyError::GapSample {
                index,
                source: Box::new(e),
            })?;
            let report = gap_report(&spec, &gs, opts.tol).map_err(|e| StudyError::GapSample {
                index,
                source: Box::new(e),
            })?;
            Ok(GapRow {
                index,
                lambda: report.lambda,
                lambda_t: report.lambda_t,
                gap: report.gap,
                witness: report.lower_witness,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    gaps.sort_by(f64::total_cmp);
    let min_gap = gaps[0];
    let median_gap = gaps[gaps.len() / 2];
    let max_gap = gaps[gaps.len() - 1];
    let min_witness = rows.iter().map(|r| r.witness).fold(f64::INFINITY, f64::min);
    Ok(GapScanResult {
        rows,
        min_gap,
        median_gap,
        max_gap,
        min_witness,
    })
}

// ------------------------------------------------------- QMC convergence

#[derive(Clone, Debug)]
pub struct QmcRateRow {
    pub target: &'static str,
    pub n: u64,
    pub s: usize,
    pub shifts: usize,
    pub seed: u64,
    pub mean: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug)]
pub struct QmcRateResult {
    pub rows: Vec<QmcRateRow>,
    pub fits: Vec<(&'static str, SlopeFit)>,
    pub alpha: f64,
    pub theta: f64,
    pub rules: Vec<LatticeRule>,
}

fn qmc_targets(cfg: &ExperimentConfig) -> Vec<&'static str> {
    let mut targets = vec!["lambda"];
    if cfg.qmc.include_energy {
        targets.push("energy");
    }
    if cfg.qmc.include_functional {
        targets.push("functional");
    }
    targets
}

/// Fixed dual profile representing a functional of the eigenfunction: the
/// discrete inner product with the first Dirichlet mode.
fn functional_profile(spec: &ProblemSpec) -> Vec<f64> {
    (0..spec.grid().len())
        .map(|i| {
            let x = spec.grid().coords(i);
            let fx = (std::f64::consts::PI * x[0]).sin();
            if spec.grid().dim() == 1 {
                fx
            } else {
                fx * (std::f64::consts::PI * x[1]).sin()
            }
        })
        .collect()
}

/// Shift-averaged lattice estimates of the expectation of the ground
/// eigenvalue (optionally energy and a fixed eigenfunction functional) for
/// each rule size, with the fitted RMSE decay rates.
pub fn run_qmc_convergence(cfg: &ExperimentConfig) -> Result<QmcRateResult, StudyError> {
    cfg.require_active_dim(cfg.qmc.s, "qmc.s")?;
    let spec = cfg.build_problem()?;
    let opts = cfg.solve_options();
    let s = cfg.qmc.s;
    let q = cfg.nominal_q();
    let theta = cfg.qmc.theta.unwrap_or_else(|| default_theta(q));
    let alpha = crate::qmc::alpha_for_q(q.min(1.0), cfg.qmc.delta)?;
    let beta: Vec<f64> = spec.pot().sup_norms()[..s].to_vec();
    let weights = PodWeights::new(&beta, theta)?;
    let rules: Vec<LatticeRule> = cfg
        .qmc
        .n_list
        .iter()
        .map(|&n| cbc_construct(n, s, &weights))
        .collect::<Result<_, _>>()?;
    let targets = qmc_targets(cfg);
    let profile = functional_profile(&spec);

    // pre-draw every shift: index = n_idx * shifts + r
    let shifts: Vec<Vec<f64>> = (0..rules.len() * cfg.qmc.shifts)
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, "qmc_shift", i as u64);
            (0..s).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect()
        })
        .collect();

    // one task per (rule, shift): a full pass over the rule's points with
    // warm-started solves, producing one rule value per target
    let tasks: Vec<(usize, usize)> = (0..rules.len())
        .flat_map(|ni| (0..cfg.qmc.shifts).map(move |r| (ni, r)))
        .collect();
    let shift_values: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(ni, r)| -> Result<Vec<f64>, StudyError> {
            let rule = &rules[ni];
            let shift = &shifts[ni * cfg.qmc.shifts + r];
            let points = rule.points(shift);
            let mut warm: Option<FieldOnGrid> = None;
            let mut per_target: Vec<Vec<f64>> =
                vec![Vec::with_capacity(points.len()); targets.len()];
            for point in &points {
                let y = ParamVector::new(point.clone())?;
                let gs = solve_with_warm(&spec, &y, &opts, warm.as_ref())?;
                for (ti, target) in targets.iter().enumerate() {
                    let value = match *target {
                        "lambda" => gs.lambda,
                        "energy" => gs.energy,
                        "functional" => spec.grid().dot(&profile, gs.u.values()),
                        _ => unreachable!(),
                    };
                    per_target[ti].push(value);
                }
                warm = Some(gs.u);
            }
            Ok(per_target
                .iter()
                .map(|vals| pairwise_sum(vals) / rule.n() as f64)
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (ti, target) in targets.iter().enumerate() {
        let mut points = Vec::new();
        for (ni, rule) in rules.iter().enumerate() {
            let values: Vec<f64> = (0..cfg.qmc.shifts)
                .map(|r| shift_values[ni * cfg.qmc.shifts + r][ti])
                .collect();
            let est = combine_shift_values(&values, rule.n(), s, cfg.seed);
            rows.push(QmcRateRow {
                target,
                n: rule.n(),
                s,
                shifts: cfg.qmc.shifts,
                seed: cfg.seed,
                mean: est.mean,
                rmse: est.rmse,
            });
            points.push((rule.n() as f64, est.rmse.max(1e-300)));
        }
        fits.push((*target, fit_slope(&points)?));
    }
    Ok(QmcRateResult {
        rows,
        fits,
        alpha,
        theta,
        rules,
    })
}

// ------------------------------------------------------------- truncation

#[derive(Clone, Debug)]
pub struct TruncRow {
    pub s: usize,
    pub strong_err: f64,
    pub weak_err: f64,
    pub weak_se: f64,
}

#[derive(Clone, Debug)]
pub struct TruncationResult {
    pub rows: Vec<TruncRow>,
    pub strong_fit: SlopeFit,
    pub weak_fit: SlopeFit,
    pub strong_target: f64,
    pub weak_target: f64,
}

/// Strong and weak dimension-truncation errors against the `s_ref`
/// reference. The strong error is a max over a fixed random sample; the weak
/// error integrates the pointwise difference with a shifted lattice rule
/// over the reference box (or plain Monte Carlo with `mc_fallback`).
pub fn run_truncation(cfg: &ExperimentConfig) -> Result<TruncationResult, StudyError> {
    cfg.require_active_dim(cfg.truncation.s_ref, "truncation.s_ref")?;
    let spec = cfg.build_problem()?;
    let opts = cfg.solve_options();
    let tr = &cfg.truncation;
    let s_ref = tr.s_ref;
    let actives: Vec<usize> = tr.s_list.iter().copied().filter(|&s| s < s_ref).collect();

    // strong error: max over a fixed Monte Carlo sample
    let strong_ys = sample_y(s_ref, cfg.seed ^ 0x5ead, tr.m_strong);
    let strong_tables: Vec<Vec<f64>> = strong_ys
        .par_iter()
        .map(|y| -> Result<Vec<f64>, StudyError> {
            let reference = solve_ground(&spec, y, &opts)?;
            let mut diffs = Vec::with_capacity(actives.len());
            for &s in &actives {
                let gs = solve_with_warm(&spec, &y.truncate(s), &opts, Some(&reference.u))?;
                diffs.push((reference.lambda - gs.lambda).abs());
            }
            Ok(diffs)
        })
        .collect::<Result<_, _>>()?;
    let strong_err: Vec<f64> = (0..actives.len())
        .map(|si| strong_tables.iter().map(|t| t[si]).fold(0.0f64, f64::max))
        .collect();

    // first-order control variate: tail gradients at the anchor, so the
    // mean-zero linear part of each pointwise difference cancels instead of
    // dominating the outer-integration noise
    let fd_step = 1e-3;
    let grad_origin: Vec<f64> = (0..s_ref)
        .into_par_iter()
        .map(|j| -> Result<f64, StudyError> {
            let plus = ParamVector::origin(s_ref).shifted(j, fd_step)?;
            let minus = ParamVector::origin(s_ref).shifted(j, -fd_step)?;
            let lp = solve_ground(&spec, &plus, &opts)?.lambda;
            let lm = solve_ground(&spec, &minus, &opts)?.lambda;
            Ok((lp - lm) / (2.0 * fd_step))
        })
        .collect::<Result<_, _>>()?;

    // weak error: common outer points for the reference and every truncation
    let outer_points: Vec<Vec<Vec<f64>>> = if tr.mc_fallback {
        let per_group = tr.mc_samples / tr.r_outer;
        let ys = sample_y(s_ref, cfg.seed ^ 0xac1d, per_group * tr.r_outer);
        ys.chunks(per_group)
            .map(|chunk| chunk.iter().map(|y| y.coords().to_vec()).collect())
            .collect()
    } else {
        let q = cfg.nominal_q();
        let weights = PodWeights::new(&spec.pot().sup_norms()[..s_ref], default_theta(q))?;
        let rule = cbc_construct(tr.n_outer, s_ref, &weights)?;
        (0..tr.r_outer)
            .map(|r| {
                let mut rng = stream_rng(cfg.seed, "trunc_shift", r as u64);
                let shift: Vec<f64> = (0..s_ref)
                    .map(|_| rand::Rng::gen::<f64>(&mut rng))
                    .collect();
                rule.points(&shift)
            })
            .collect()
    };
    // per (group, point): differences for each truncation level
    let group_means: Vec<Vec<f64>> = outer_points
        .par_iter()
        .map(|points| -> Result<Vec<f64>, StudyError> {
            let mut sums: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len()); actives.len()];
            let mut warm: Option<FieldOnGrid> = None;
            for point in points {
                let y = ParamVector::new(point.clone())?;
                let reference = solve_with_warm(&spec, &y, &opts, warm.as_ref())?;
                for (si, &s) in actives.iter().enumerate() {
                    let gs = solve_with_warm(&spec, &y.truncate(s), &opts, Some(&reference.u))?;
                    let linear_part: f64 = (s..s_ref).map(|j| y.coord(j) * grad_origin[j]).sum();
                    sums[si].push(reference.lambda - gs.lambda - linear_part);
                }
                warm = Some(reference.u);
            }
            Ok(sums
                .iter()
                .map(|vals| pairwise_sum(vals) / points.len() as f64)
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let r_groups = group_means.len() as f64;
    let weak: Vec<(f64, f64)> = (0..actives.len())
        .map(|si| {
            let vals: Vec<f64> = group_means.iter().map(|g| g[si]).collect();
            let mean = pairwise_sum(&vals) / r_groups;
            let var: f64 =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r_groups - 1.0);
            (mean, (var / r_groups).sqrt())
        })
        .collect();

    let mut rows: Vec<TruncRow> = actives
        .iter()
        .enumerate()
        .map(|(si, &s)| TruncRow {
            s,
            strong_err: strong_err[si],
            weak_err: weak[si].0,
            weak_se: weak[si].1,
        })
        .collect();
    if tr.s_list.contains(&s_ref) {
        rows.push(TruncRow {
            s: s_ref,
            strong_err: 0.0,
            weak_err: 0.0,
            weak_se: 0.0,
        });
    }

    let strong_points: Vec<(f64, f64)> = actives
        .iter()
        .zip(&strong_err)
        .map(|(&s, &e)| (s as f64, e.max(1e-300)))
        .collect();
    let weak_points: Vec<(f64, f64)> = actives
        .iter()
        .zip(&weak)
        .map(|(&s, &(m, _))| (s as f64, m.abs().max(1e-300)))
        .collect();
    let strong_fit = fit_slope(&strong_points)?;
    let weak_fit = fit_slope(&weak_points)?;
    let theta_dec = cfg.potential.theta_dec;
    Ok(TruncationResult {
        rows,
        strong_fit,
        weak_fit,
        strong_target: 1.0 - theta_dec,
        weak_target: 1.0 - 2.0 * theta_dec,
    })
}

// ------------------------------------------------------------- deriv scan

#[derive(Clone, Debug)]
pub struct DerivScanResult {
    pub report: BoundRatioReport,
    /// `r(0)` rows: the eigenvalue itself at each sample.
    pub zero_order: Vec<f64>,
}

/// Mixed-derivative estimates over the configured coordinates with
/// scale-free growth ratios.
pub fn run_deriv_scan(cfg: &ExperimentConfig) -> Result<DerivScanResult, StudyError> {
    let max_coord = cfg.deriv.coords.iter().copied().max().unwrap_or(1) as usize;
    cfg.require_active_dim(max_coord, "deriv.coords")?;
    let spec = cfg.build_problem()?;
    let opts = cfg.solve_options();
    let dv = &cfg.deriv;
    let dim = dv.coords.iter().copied().max().unwrap_or(1) as usize;
    // keep the stencil inside the box by shrinking toward the origin
    let margin = 4.0 * dv.step_higher.max(dv.step_first);
    let ys: Vec<ParamVector> = sample_y(dim, cfg.seed ^ 0xde21, dv.samples)
        .into_iter()
        .map(|y| {
            ParamVector::new(
                y.coords()
                    .iter()
                    .map(|v| v * (1.0 - 2.0 * margin))
                    .collect(),
            )
            .expect("shrunk sample stays inside the box")
        })
        .collect();
    let report = bound_scan(
        &spec,
        &ys,
        dv.order_cap,
        &dv.coords,
        dv.step_first,
        dv.step_higher,
        &opts,
    )?;
    let zero_order: Vec<f64> = ys
        .par_iter()
        .map(|y| solve_ground(&spec, y, &opts).map(|gs| gs.lambda))
        .collect::<Result<_, _>>()
        .map_err(StudyError::Solver)?;
    Ok(DerivScanResult { report, zero_order })
}

/// Scale-free factorial normalization used in reports: `|nu|! prod b^nu`.
pub fn bound_denominator(order: u64) -> f64 {
    num::ToPrimitive::to_f64(&factorial(order)).unwrap_or(f64::MAX)
}

/// Nonnegativity spot check used by the CLI before long sweeps; errors on
/// the first violating node, returns the sampled floor otherwise.
pub fn potential_floor(cfg: &ExperimentConfig, sample: usize) -> Result<f64, StudyError> {
    let spec = cfg.build_problem()?;
    let mut floor = f64::INFINITY;
    for y in sample_y(cfg.potential.s_max, cfg.seed ^ 0xf100, sample) {
        let field = evaluate_potential(spec.pot(), &y, spec.grid())?;
        floor = floor.min(field.min());
    }
    Ok(floor)
}
