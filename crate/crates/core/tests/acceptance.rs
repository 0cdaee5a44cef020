//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its runtime. Tolerances are pinned here, not
//! configurable.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::field_reassign_with_default)]

use std::time::{Duration, Instant};

use pareig::coeff::{sample_y, AffinePotential, FieldGen, ParamVector};
use pareig::deriv::{fd_mixed, DerivTarget};
use pareig::experiments::{run_gap_scan, run_qmc_convergence, run_truncation, ExperimentConfig};
use pareig::multiindex::{
    check_falling_inequalities, enumerate_partitions, gamma_expansion, ggcombi_lhs, ggcombi_rhs,
    multinomial, order_shapes, verify_gamma_against_oracle, MultiIndex, PartitionConstraint,
    Rational, SymbolicPoly,
};
use pareig::qmc::{bernoulli2, cbc_construct, shift_avg_error_sq, LatticeRule, PodWeights};
use pareig::solver::{
    identity_residual, solve_ground, verify_amplitude_bound, ProblemSpec, SolveOptions,
};
use pareig::spatial::Grid;
use pareig::util::stream_rng;
use rand::Rng;

struct Criterion {
    name: &'static str,
    budget: Duration,
    start: Instant,
}

impl Criterion {
    fn new(name: &'static str, budget: Duration) -> Self {
        Criterion {
            name,
            budget,
            start: Instant::now(),
        }
    }

    fn pass(self) {
        let elapsed = self.start.elapsed();
        println!("criterion {}: PASS ({:.2?})", self.name, elapsed);
        assert!(
            elapsed <= self.budget,
            "criterion {} exceeded its {:?} budget ({:?})",
            self.name,
            self.budget,
            elapsed
        );
    }
}

macro_rules! criterion_assert {
    ($c:expr, $cond:expr, $($msg:tt)+) => {
        if !$cond {
            println!("criterion {}: FAIL ({:.2?})", $c.name, $c.start.elapsed());
            panic!($($msg)+);
        }
    };
}

/// All dense multi-indices over `vars` coordinates with `1 <= |nu| <= cap`.
fn dense_indices(vars: usize, cap: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; vars];
    loop {
        let total: u32 = exps.iter().sum();
        if (1..=cap).contains(&total) {
            out.push(MultiIndex::from_dense(&exps));
        }
        let mut i = vars;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if exps[i] < cap {
                exps[i] += 1;
                for e in exps.iter_mut().skip(i + 1) {
                    *e = 0;
                }
                break;
            }
        }
    }
}

#[test]
fn criterion_01_combinatorial_exactness() {
    let c = Criterion::new("1 (derivative-expansion oracle)", Duration::from_secs(10));

    // worked fixture: order (1,2), power 4 collapses to coefficients 4, 12, 24, 24
    let terms = gamma_expansion(4, &MultiIndex::from_dense(&[1, 2])).unwrap();
    let mut coeffs: Vec<i64> = terms
        .iter()
        .map(|t| i64::try_from(t.coefficient.to_integer()).unwrap())
        .collect();
    coeffs.sort_unstable();
    criterion_assert!(
        c,
        coeffs == vec![4, 12, 24, 24],
        "fixture coefficients {:?}",
        coeffs
    );

    let mut rng = stream_rng(0xacce97, "criterion-1", 0);
    for p in 2..=5u32 {
        for nu in dense_indices(3, 4) {
            for _ in 0..20 {
                let u = SymbolicPoly::random(&mut rng, 3, 4, 3, 6);
                criterion_assert!(
                    c,
                    verify_gamma_against_oracle(&u, p, &nu),
                    "oracle mismatch at p = {}, nu = {:?}",
                    p,
                    nu
                );
            }
        }
    }
    c.pass();
}

#[test]
fn criterion_02_falling_factorials_and_partition_bound() {
    let c = Criterion::new(
        "2 (falling factorials, partition bound)",
        Duration::from_secs(30),
    );
    criterion_assert!(
        c,
        check_falling_inequalities(30),
        "falling-factorial inequalities"
    );
    for order in 1..=6u32 {
        for nu in order_shapes(order) {
            for p in 1..=4u32 {
                let lhs = ggcombi_lhs(p, &nu);
                let rhs = ggcombi_rhs(p, &nu);
                criterion_assert!(c, lhs <= rhs, "bound failed at p = {}, nu = {:?}", p, nu);
            }
        }
    }
    // the multinomial sum collapses exactly on the worked case
    let target = MultiIndex::from_dense(&[1, 2]);
    let total: Rational = enumerate_partitions(&target, 3, PartitionConstraint::NonzeroStrict)
        .map(|seq| multinomial(&target, seq.parts()).unwrap())
        .sum();
    criterion_assert!(
        c,
        total == pareig::multiindex::rational_int(6),
        "3 orderings x 2"
    );
    c.pass();
}

#[test]
fn criterion_03_linear_limit_eigenpair() {
    let c = Criterion::new("3 (linear-limit eigenpair)", Duration::from_secs(1));
    let grid = Grid::unit_interval(200);
    let pot = AffinePotential::from_modes(FieldGen::Constant(0.0), vec![]).unwrap();
    let spec = ProblemSpec::with_unit_diffusion(grid, pot, 1e-12, 3).unwrap();
    let opts = SolveOptions::for_grid(spec.grid());
    let gs = solve_ground(&spec, &ParamVector::origin(0), &opts).unwrap();
    let pi = std::f64::consts::PI;
    criterion_assert!(
        c,
        (gs.lambda - pi * pi).abs() <= 1e-3,
        "lambda = {}",
        gs.lambda
    );
    let h = spec.grid().mesh_width()[0];
    let exact: Vec<f64> = (0..spec.grid().len())
        .map(|i| 2.0f64.sqrt() * (pi * (i + 1) as f64 * h).sin())
        .collect();
    let diff: Vec<f64> =
        gs.u.values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| a - b)
            .collect();
    let err = spec.grid().norm(&diff);
    criterion_assert!(c, err <= 1e-2, "eigenfunction L2 error {}", err);
    c.pass();
}

fn fifty_configurations() -> Vec<(ParamVector, u32, f64)> {
    // 50 deterministic (y, p, eta) combinations over p in {2, 3} and
    // eta in {0.1, 1, 10}
    let ys = sample_y(8, 0xacce97, 50);
    ys.into_iter()
        .enumerate()
        .map(|(i, y)| {
            let p = if i % 2 == 0 { 2 } else { 3 };
            let eta = [0.1, 1.0, 10.0][i % 3];
            (y, p, eta)
        })
        .collect()
}

#[test]
fn criterion_04_eigenvalue_energy_identity() {
    let c = Criterion::new("4 (eigenvalue-energy identity)", Duration::from_secs(120));
    let grid = Grid::unit_interval(100);
    let pot = AffinePotential::algebraic_bump(1.0, 2.0, 8, 0.1).unwrap();
    for (y, p, eta) in fifty_configurations() {
        let spec = ProblemSpec::with_unit_diffusion(grid.clone(), pot.clone(), eta, p).unwrap();
        let opts = SolveOptions::for_grid(spec.grid());
        let gs = solve_ground(&spec, &y, &opts).unwrap();
        let residual = identity_residual(&spec, &gs).abs();
        criterion_assert!(
            c,
            residual <= 1e-8 * gs.lambda.abs(),
            "identity residual {:e} at p = {}, eta = {}",
            residual,
            p,
            eta
        );
    }
    c.pass();
}

#[test]
fn criterion_05_positivity_and_amplitude_bound() {
    let c = Criterion::new("5 (positivity, amplitude bound)", Duration::from_secs(120));
    let grid = Grid::unit_interval(100);
    let pot = AffinePotential::algebraic_bump(1.0, 2.0, 8, 0.1).unwrap();
    for (y, p, eta) in fifty_configurations() {
        let spec = ProblemSpec::with_unit_diffusion(grid.clone(), pot.clone(), eta, p).unwrap();
        let opts = SolveOptions::for_grid(spec.grid());
        let gs = solve_ground(&spec, &y, &opts).unwrap();
        criterion_assert!(
            c,
            gs.u.min() > 0.0,
            "positivity at p = {}, eta = {}",
            p,
            eta
        );
        criterion_assert!(
            c,
            verify_amplitude_bound(&spec, &gs),
            "amplitude bound at p = {}, eta = {} (max u = {}, cap = {})",
            p,
            eta,
            gs.u.max(),
            (gs.lambda / eta).powf(1.0 / (p as f64 - 1.0))
        );
    }
    c.pass();
}

#[test]
fn criterion_06_spectral_gap_scan() {
    let c = Criterion::new(
        "6 (spectral gap over 200 samples)",
        Duration::from_secs(300),
    );
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 0xacce97;
    cfg.problem = pareig::experiments::config::ProblemBlock {
        d: 1,
        p: 3,
        eta: 1.0,
        cells: 100,
    };
    cfg.potential.theta_dec = 2.0;
    cfg.potential.s_max = 16;
    cfg.gap.samples = 200;
    cfg.gap.s = 16;
    cfg.validate().unwrap();
    let result = run_gap_scan(&cfg).unwrap();
    criterion_assert!(c, result.min_gap > 0.0, "min gap {}", result.min_gap);
    for row in &result.rows {
        criterion_assert!(
            c,
            row.gap >= row.witness - 1e-8,
            "gap {} below witness {} at sample {}",
            row.gap,
            row.witness,
            row.index
        );
    }
    c.pass();
}

#[test]
fn criterion_07_exact_derivative_control() {
    let c = Criterion::new(
        "7 (constant-mode derivative control)",
        Duration::from_secs(60),
    );
    let grid = Grid::unit_interval(100);
    let cmod = 0.5;
    let pot = AffinePotential::from_modes(
        FieldGen::Constant(1.0),
        vec![FieldGen::Constant(cmod), FieldGen::Constant(0.3)],
    )
    .unwrap();
    let spec = ProblemSpec::with_unit_diffusion(grid, pot, 1.0, 3).unwrap();
    let opts = SolveOptions::for_grid(spec.grid());
    let y = ParamVector::new(vec![0.05, -0.1]).unwrap();

    let d1 = fd_mixed(
        &spec,
        &y,
        &MultiIndex::unit(1),
        DerivTarget::Lambda,
        1e-3,
        0,
        &opts,
    )
    .unwrap()
    .value;
    criterion_assert!(
        c,
        (d1 - cmod).abs() <= 1e-6 * cmod,
        "d lambda/d y1 = {}",
        d1
    );

    let d2 = fd_mixed(
        &spec,
        &y,
        &MultiIndex::from_pairs(&[(1, 2)]),
        DerivTarget::Lambda,
        3e-3,
        0,
        &opts,
    )
    .unwrap()
    .value;
    criterion_assert!(c, d2.abs() <= 1e-5, "second derivative {}", d2);

    let d11 = fd_mixed(
        &spec,
        &y,
        &MultiIndex::from_pairs(&[(1, 1), (2, 1)]),
        DerivTarget::Lambda,
        3e-3,
        0,
        &opts,
    )
    .unwrap()
    .value;
    criterion_assert!(c, d11.abs() <= 1e-5, "mixed derivative {}", d11);
    c.pass();
}

#[test]
fn criterion_08_qmc_machinery_oracles() {
    let c = Criterion::new("8 (QMC oracles)", Duration::from_secs(60));

    // Bernoulli lattice identity
    for n in [3u64, 5, 7, 127, 251] {
        let sum: f64 = (0..n).map(|k| bernoulli2(k as f64 / n as f64)).sum();
        let lhs = sum / n as f64;
        let rhs = 1.0 / (6.0 * (n * n) as f64);
        criterion_assert!(c, (lhs - rhs).abs() <= 1e-12, "N = {}", n);
    }

    // POD recursion vs explicit subset sums
    let mut rng = stream_rng(0xacce97, "criterion-8", 0);
    for n in [3u64, 5, 7] {
        for s in 1..=4usize {
            let beta: Vec<f64> = (0..s).map(|_| 0.1 + rng.gen::<f64>()).collect();
            let theta = 0.55 + 0.4 * rng.gen::<f64>();
            let w = PodWeights::new(&beta, theta).unwrap();
            let z: Vec<u64> = (0..s).map(|_| 1 + rng.gen_range(0..n - 1)).collect();
            let rule = LatticeRule::new(n, z).unwrap();
            let fast = shift_avg_error_sq(&rule, &w).unwrap();
            let mut brute = 0.0;
            for mask in 1u32..(1 << s) {
                let subset: Vec<usize> = (0..s).filter(|j| mask & (1 << j) != 0).collect();
                let mut lattice = 0.0;
                for k in 0..n {
                    let mut prod = 1.0;
                    for &j in &subset {
                        prod *= bernoulli2(((k * rule.components()[j]) % n) as f64 / n as f64);
                    }
                    lattice += prod;
                }
                brute += w.weight_of(&subset) * lattice / n as f64;
            }
            criterion_assert!(
                c,
                (fast - brute).abs() <= 1e-12 * brute.abs().max(1e-300),
                "recursion mismatch at N = {}, s = {}",
                n,
                s
            );
        }
    }

    // CBC equals exhaustive per-step search for s <= 2, N <= 13
    for n in [3u64, 5, 7, 11, 13] {
        let w = PodWeights::new(&[1.0, 0.5], 0.7).unwrap();
        let cbc = cbc_construct(n, 2, &w).unwrap();
        let mut best1: Option<(f64, u64)> = None;
        for z1 in 1..n {
            let e = shift_avg_error_sq(&LatticeRule::new(n, vec![z1]).unwrap(), &w).unwrap();
            if best1.is_none_or(|(be, _)| e < be * (1.0 - 1e-12)) {
                best1 = Some((e, z1));
            }
        }
        let z1 = best1.unwrap().1;
        criterion_assert!(c, cbc.components()[0] == z1, "first component at N = {}", n);
        let mut best2: Option<(f64, u64)> = None;
        for z2 in 1..n {
            let e = shift_avg_error_sq(&LatticeRule::new(n, vec![z1, z2]).unwrap(), &w).unwrap();
            if best2.is_none_or(|(be, _)| e < be * (1.0 - 1e-12)) {
                best2 = Some((e, z2));
            }
        }
        criterion_assert!(
            c,
            cbc.components()[1] == best2.unwrap().1,
            "second component at N = {}",
            n
        );
    }
    c.pass();
}

fn qmc_rate_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = seed;
    cfg.problem = pareig::experiments::config::ProblemBlock {
        d: 1,
        p: 3,
        eta: 1.0,
        cells: 100,
    };
    cfg.potential.theta_dec = 4.0;
    cfg.potential.s_max = 8;
    cfg.qmc.s = 4;
    cfg.qmc.n_list = vec![127, 251, 503, 1009];
    cfg.qmc.shifts = 16;
    cfg.qmc.delta = 0.05;
    cfg.validate().unwrap();
    cfg
}

#[test]
fn criterion_09_qmc_convergence_rate() {
    let c = Criterion::new("9 (QMC RMSE rate)", Duration::from_secs(1800));
    let result = run_qmc_convergence(&qmc_rate_config(42)).unwrap();
    let slope = result.fits[0].1.slope;
    // statistical criterion: one retry with a fresh seed before failing
    let slope = if slope <= -0.8 {
        slope
    } else {
        println!(
            "criterion 9: slope {:.3} missed -0.8, retrying with second seed",
            slope
        );
        run_qmc_convergence(&qmc_rate_config(4242)).unwrap().fits[0]
            .1
            .slope
    };
    criterion_assert!(
        c,
        slope <= -0.8,
        "fitted RMSE slope {:.3} (target <= -0.8)",
        slope
    );
    c.pass();
}

#[test]
fn criterion_10_truncation_rates() {
    let c = Criterion::new("10 (dimension-truncation rates)", Duration::from_secs(1200));
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 42;
    cfg.problem = pareig::experiments::config::ProblemBlock {
        d: 1,
        p: 3,
        eta: 1.0,
        cells: 100,
    };
    cfg.potential.theta_dec = 2.0;
    cfg.potential.s_max = 64;
    cfg.truncation.s_list = vec![2, 4, 8, 16, 32];
    cfg.truncation.s_ref = 64;
    cfg.truncation.n_outer = 2003;
    cfg.truncation.r_outer = 8;
    cfg.truncation.m_strong = 64;
    cfg.validate().unwrap();
    let result = run_truncation(&cfg).unwrap();
    criterion_assert!(
        c,
        (result.strong_fit.slope - (-1.0)).abs() <= 0.3,
        "strong slope {:.3} outside -1 +- 0.3",
        result.strong_fit.slope
    );
    criterion_assert!(
        c,
        (result.weak_fit.slope - (-3.0)).abs() <= 0.5,
        "weak slope {:.3} outside -3 +- 0.5",
        result.weak_fit.slope
    );
    c.pass();
}
