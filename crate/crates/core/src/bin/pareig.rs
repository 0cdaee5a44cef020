//! Command-line driver: single solves, the four studies, CBC vector
//! construction, and the exact combinatorial self-checks.
//!
//! Exit codes: 0 success, 1 usage or I/O failure, 2 hard assertion failure
//! (positivity, gap, identity), 3 soft failure (an empirical rate missed its
//! band; outputs are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pareig::coeff::ParamVector;
use pareig::experiments::{
    config::RunMeta, emit_csv, emit_plot_script, fmt_f64, run_deriv_scan, run_gap_scan,
    run_qmc_convergence, run_truncation, studies::potential_floor, ExperimentConfig,
};
use pareig::multiindex::{
    check_falling_inequalities, ggcombi_lhs, ggcombi_rhs, order_shapes,
    verify_gamma_against_oracle, MultiIndex, SymbolicPoly,
};
use pareig::qmc::{cbc_construct, default_theta, format_generating_vector, PodWeights};
use pareig::solver::solve_ground;
use pareig::util::stream_rng;

#[derive(Parser)]
#[command(
    name = "pareig",
    version,
    about = "Parametric semilinear ground states, derivative scans, and lattice-rule quadrature"
)]
struct Cli {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (falls back to PAREIG_OUT_DIR, then ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rayon worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the ground state at one parameter point and print diagnostics.
    Solve {
        /// Comma-separated coordinates of y (e.g. "0.1,-0.25"); origin if omitted.
        #[arg(long)]
        y: Option<String>,
        /// Also write the eigenfunction samples to <out>/solution.csv.
        #[arg(long)]
        write_field: bool,
    },
    /// Ground/linearized eigenvalue gaps over random parameters.
    GapScan,
    /// Finite-difference derivative-bound scan.
    DerivScan,
    /// Shift-averaged lattice-rule convergence study.
    Qmc,
    /// Dimension-truncation convergence study.
    Truncation,
    /// Construct a CBC generating vector and write it to a file.
    Cbc {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        s: usize,
        /// Smoothing exponent; derived from the configured decay if omitted.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Exact combinatorial self-checks (falling factorials, partition bound,
    /// derivative-expansion oracle).
    VerifyCombinatorics {
        #[arg(long, default_value_t = 30)]
        n_max: u64,
        #[arg(long, default_value_t = 6)]
        order_cap: u32,
        #[arg(long, default_value_t = 4)]
        p_max: u32,
        #[arg(long, default_value_t = 5)]
        polys: usize,
    },
}

const EXIT_SOFT: u8 = 3;
const EXIT_HARD: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool already initialized")?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    let out_dir = cfg.resolved_out_dir();
    let meta = RunMeta::of(&cfg);

    match cli.cmd {
        Cmd::Solve { y, write_field } => cmd_solve(&cfg, &out_dir, y, write_field),
        Cmd::GapScan => cmd_gap_scan(&cfg, &out_dir, &meta),
        Cmd::DerivScan => cmd_deriv_scan(&cfg, &out_dir, &meta),
        Cmd::Qmc => cmd_qmc(&cfg, &out_dir, &meta),
        Cmd::Truncation => cmd_truncation(&cfg, &out_dir, &meta),
        Cmd::Cbc { n, s, theta } => cmd_cbc(&cfg, &out_dir, n, s, theta),
        Cmd::VerifyCombinatorics {
            n_max,
            order_cap,
            p_max,
            polys,
        } => cmd_verify(n_max, order_cap, p_max, polys),
    }
}

/// Every study writes a sidecar naming the triple approximation (mesh width,
/// reference dimension, shifts) behind its numbers.
fn write_run_header(
    cfg: &ExperimentConfig,
    meta: &RunMeta,
    out_dir: &Path,
    study: &str,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let h = 1.0 / cfg.problem.cells as f64;
    let text = format!(
        "study: {study}\nversion: {}\nconfig_hash: {}\nseed: {}\n\
         approximation: h={h} (d={}), s_max={}, shifts={} -- all reported \
         quantities are discrete, truncated, shift-averaged proxies\n",
        meta.version,
        meta.config_hash,
        meta.seed,
        cfg.problem.d,
        cfg.potential.s_max,
        cfg.qmc.shifts,
    );
    std::fs::write(out_dir.join(format!("{study}_meta.txt")), text)?;
    Ok(())
}

fn parse_y(text: &str) -> Result<ParamVector> {
    let coords: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    Ok(ParamVector::new(coords.context("parsing y coordinates")?)?)
}

fn cmd_solve(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    y: Option<String>,
    write_field: bool,
) -> Result<ExitCode> {
    let spec = cfg.build_problem()?;
    let opts = cfg.solve_options();
    let y = match y {
        Some(text) => parse_y(&text)?,
        None => ParamVector::origin(cfg.potential.s_max.min(8)),
    };
    let t0 = Instant::now();
    let gs = solve_ground(&spec, &y, &opts)?;
    println!("lambda    = {}", fmt_f64(gs.lambda));
    println!("energy    = {}", fmt_f64(gs.energy));
    println!("residual  = {:e}", gs.residual);
    println!("scf_iters = {}", gs.scf_iters);
    println!("u range   = [{:e}, {:e}]", gs.u.min(), gs.u.max());
    println!("monotone  = {}", gs.energy_monotone);
    println!("elapsed   = {:.3?}", t0.elapsed());
    if write_field {
        let rows: Vec<Vec<String>> = (0..spec.grid().len())
            .map(|i| {
                let x = spec.grid().coords(i);
                vec![fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(gs.u.values()[i])]
            })
            .collect();
        let path = out_dir.join("solution.csv");
        emit_csv(&["x", "y", "u"], &rows, &path)?;
        println!("field     -> {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gap_scan(cfg: &ExperimentConfig, out_dir: &Path, meta: &RunMeta) -> Result<ExitCode> {
    write_run_header(cfg, meta, out_dir, "gap_scan")?;
    let result = match run_gap_scan(cfg) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("gap scan hard failure: {err}");
            return Ok(ExitCode::from(EXIT_HARD));
        }
    };
    let mut rows = Vec::new();
    for r in &result.rows {
        let mut row = vec![
            r.index.to_string(),
            fmt_f64(r.lambda),
            fmt_f64(r.lambda_t),
            fmt_f64(r.gap),
            fmt_f64(r.witness),
        ];
        row.extend(meta.values());
        rows.push(row);
    }
    let path = out_dir.join("gap_scan.csv");
    emit_csv(
        &[
            "index",
            "lambda",
            "lambda_t",
            "gap",
            "witness",
            "config_hash",
            "seed",
            "version",
        ],
        &rows,
        &path,
    )?;
    emit_plot_script(out_dir)?;
    println!(
        "gap scan: {} samples, min/median/max gap = {} / {} / {}, min witness = {}",
        result.rows.len(),
        fmt_f64(result.min_gap),
        fmt_f64(result.median_gap),
        fmt_f64(result.max_gap),
        fmt_f64(result.min_witness),
    );
    println!("table -> {}", path.display());
    if result.min_gap <= 0.0 {
        eprintln!("hard failure: nonpositive gap");
        return Ok(ExitCode::from(EXIT_HARD));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_deriv_scan(cfg: &ExperimentConfig, out_dir: &Path, meta: &RunMeta) -> Result<ExitCode> {
    write_run_header(cfg, meta, out_dir, "deriv_scan")?;
    let result = run_deriv_scan(cfg)?;
    let mut rows = Vec::new();
    for r in &result.report.rows {
        let mut row = vec![
            r.nu.packed(),
            "lambda".to_string(),
            fmt_f64(r.estimate),
            fmt_f64(r.step),
            fmt_f64(r.ratio),
        ];
        row.extend(meta.values());
        rows.push(row);
    }
    let path = out_dir.join("deriv_scan.csv");
    emit_csv(
        &[
            "nu",
            "target",
            "value",
            "step",
            "ratio",
            "config_hash",
            "seed",
            "version",
        ],
        &rows,
        &path,
    )?;
    emit_plot_script(out_dir)?;
    println!("deriv scan: {} estimates", result.report.rows.len());
    for (order, max) in &result.report.per_order_max {
        println!("  order {}: max r^(1/|nu|) = {}", order, fmt_f64(*max));
    }
    println!(
        "  cross-order sup = {} (first-order max = {})",
        fmt_f64(result.report.cross_order_sup),
        fmt_f64(result.report.first_order_max),
    );
    println!("table -> {}", path.display());
    // the single-constant structure is reported, not asserted: third-order
    // stencils can be noise-dominated
    if result.report.cross_order_sup > 10.0 * result.report.first_order_max.max(1e-12) {
        println!("note: cross-order ratio exceeds 10x the first-order scale");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_qmc(cfg: &ExperimentConfig, out_dir: &Path, meta: &RunMeta) -> Result<ExitCode> {
    write_run_header(cfg, meta, out_dir, "qmc")?;
    potential_floor(cfg, 64)?;
    let result = run_qmc_convergence(cfg)?;
    let mut rows = Vec::new();
    for r in &result.rows {
        let mut row = vec![
            r.target.to_string(),
            r.n.to_string(),
            r.s.to_string(),
            r.shifts.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.rmse),
        ];
        row.extend(meta.values());
        rows.push(row);
    }
    let path = out_dir.join("qmc.csv");
    emit_csv(
        &[
            "target",
            "n",
            "s",
            "shifts",
            "mean",
            "rmse",
            "config_hash",
            "seed",
            "version",
        ],
        &rows,
        &path,
    )?;
    emit_plot_script(out_dir)?;
    for rule in &result.rules {
        let file = out_dir.join(format!("cbc_n{}_s{}.txt", rule.n(), rule.dim()));
        std::fs::write(&file, format_generating_vector(rule, result.theta))?;
    }
    let mut soft = false;
    println!(
        "qmc convergence: alpha = {:.4}, theta = {:.4}",
        result.alpha, result.theta
    );
    for (target, fit) in &result.fits {
        println!(
            "  {}: fitted rmse slope {:.3} (R^2 {:.3}); target -alpha = {:.3}",
            target, fit.slope, fit.r_squared, -result.alpha
        );
        // soft band over the largest-N triplet
        let pts = &fit.points;
        if pts.len() >= 3 {
            let tail = &pts[pts.len() - 3..];
            let n = 3.0;
            let sx: f64 = tail.iter().map(|p| p.0).sum();
            let sy: f64 = tail.iter().map(|p| p.1).sum();
            let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
            let tail_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            if tail_slope > -result.alpha + 0.15 {
                println!(
                    "  warning: {} largest-N triplet slope {:.3} misses -alpha + 0.15",
                    target, tail_slope
                );
                soft = true;
            }
        }
    }
    println!("table -> {}", path.display());
    Ok(if soft {
        ExitCode::from(EXIT_SOFT)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_truncation(cfg: &ExperimentConfig, out_dir: &Path, meta: &RunMeta) -> Result<ExitCode> {
    write_run_header(cfg, meta, out_dir, "truncation")?;
    potential_floor(cfg, 64)?;
    let result = run_truncation(cfg)?;
    let mut rows = Vec::new();
    for r in &result.rows {
        let mut row = vec![
            r.s.to_string(),
            fmt_f64(r.strong_err),
            fmt_f64(r.weak_err),
            fmt_f64(r.weak_se),
        ];
        row.extend(meta.values());
        rows.push(row);
    }
    let path = out_dir.join("truncation.csv");
    emit_csv(
        &[
            "s",
            "strong_err",
            "weak_err",
            "weak_se",
            "config_hash",
            "seed",
            "version",
        ],
        &rows,
        &path,
    )?;
    emit_plot_script(out_dir)?;
    println!(
        "truncation: strong slope {:.3} (target {:.1}), weak slope {:.3} (target {:.1})",
        result.strong_fit.slope, result.strong_target, result.weak_fit.slope, result.weak_target,
    );
    println!("table -> {}", path.display());
    let mut soft = false;
    if (result.strong_fit.slope - result.strong_target).abs() > 0.3 {
        println!("warning: strong slope outside +-0.3 band");
        soft = true;
    }
    if (result.weak_fit.slope - result.weak_target).abs() > 0.5 {
        println!("warning: weak slope outside +-0.5 band");
        soft = true;
    }
    Ok(if soft {
        ExitCode::from(EXIT_SOFT)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_cbc(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    n: u64,
    s: usize,
    theta: Option<f64>,
) -> Result<ExitCode> {
    let pot = cfg.build_potential()?;
    if s > pot.num_modes() {
        bail!(
            "s = {s} exceeds the configured potential dimension {}",
            pot.num_modes()
        );
    }
    let theta = theta.unwrap_or_else(|| default_theta(cfg.nominal_q()));
    let weights = PodWeights::new(&pot.sup_norms()[..s], theta)?;
    let t0 = Instant::now();
    let rule = cbc_construct(n, s, &weights)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("cbc_n{}_s{}.txt", n, s));
    std::fs::write(&path, format_generating_vector(&rule, theta))?;
    println!(
        "cbc: N = {}, s = {}, theta = {:.4}, z = {:?} ({:.2?})",
        n,
        s,
        theta,
        rule.components(),
        t0.elapsed()
    );
    println!("vector -> {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(n_max: u64, order_cap: u32, p_max: u32, polys: usize) -> Result<ExitCode> {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, t0: Instant| {
        println!(
            "{}: {} ({:.2?})",
            if ok { "PASS" } else { "FAIL" },
            name,
            t0.elapsed()
        );
        all_ok &= ok;
    };

    let t0 = Instant::now();
    check(
        &format!("falling-factorial inequalities up to n = {n_max}"),
        check_falling_inequalities(n_max),
        t0,
    );

    let t0 = Instant::now();
    let mut partition_ok = true;
    for order in 1..=order_cap {
        for nu in order_shapes(order) {
            for p in 1..=p_max {
                if ggcombi_lhs(p, &nu) > ggcombi_rhs(p, &nu) {
                    eprintln!("  bound failed at p = {p}, nu = {}", nu.packed());
                    partition_ok = false;
                }
            }
        }
    }
    check(
        &format!("partition bound for |nu| <= {order_cap}, p <= {p_max}"),
        partition_ok,
        t0,
    );

    let t0 = Instant::now();
    let mut oracle_ok = true;
    let mut rng = stream_rng(0xc0ffee, "verify-gamma", 0);
    for p in 2..=p_max.max(2) {
        for order in 1..=3u32 {
            for nu in order_shapes(order) {
                if nu.max_coord() > 3 {
                    continue;
                }
                for _ in 0..polys {
                    let u = SymbolicPoly::random(&mut rng, 3, 4, 3, 4);
                    if !verify_gamma_against_oracle(&u, p, &nu) {
                        eprintln!("  oracle mismatch at p = {p}, nu = {}", nu.packed());
                        oracle_ok = false;
                    }
                }
            }
        }
    }
    check(
        &format!(
            "derivative-expansion oracle, p <= {}, {polys} polynomials",
            p_max.max(2)
        ),
        oracle_ok,
        t0,
    );

    // the worked coefficient fixture
    let t0 = Instant::now();
    let terms = pareig::multiindex::gamma_expansion(4, &MultiIndex::from_dense(&[1, 2]))?;
    let coeffs: Vec<i64> = terms
        .iter()
        .map(|t| i64::try_from(t.coefficient.to_integer()).unwrap_or(-1))
        .collect();
    check(
        "order-(1,2) power-4 fixture (4, 24, 12, 24)",
        coeffs == vec![4, 24, 12, 24],
        t0,
    );

    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_HARD)
    })
}
