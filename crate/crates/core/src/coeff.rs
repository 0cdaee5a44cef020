//! The affine parametric potential `b(x, y) = b0(x) + sum_j y_j b_j(x)`,
//! its decay family, truncation to finitely many active dimensions, and
//! tail-sum diagnostics.

use rand::Rng;
use thiserror::Error;

use crate::spatial::{FieldOnGrid, FieldRole, Grid};
use crate::util::{pow_tail, stream_rng, zeta};

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("parameter {index} = {value} lies outside [-1/2, 1/2]")]
    ParameterOutOfRange { index: usize, value: f64 },
    #[error("parameter vector has {got} coordinates but the potential stores {available} modes")]
    TooManyActiveDims { got: usize, available: usize },
    #[error(
        "potential is negative at node {node} (value {value:e}); nonnegativity assumption violated"
    )]
    NegativeAtNode { node: usize, value: f64 },
    #[error("mode sup-norms must be non-increasing (mode {index})")]
    NormsNotDecreasing { index: usize },
    #[error("decay exponent must exceed 1 (got {0})")]
    BadDecayExponent(f64),
    #[error("r must lie in (0, 1) (got {0})")]
    BadEllRExponent(f64),
    #[error("sup-norm sequence is not in ell^r for r = {r} with decay exponent {theta_dec}")]
    NotSummable { r: f64, theta_dec: f64 },
}

/// Closed-form spatial profile of one potential term. Sup-norms over the
/// open unit domain are known exactly for every variant.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldGen {
    Constant(f64),
    /// `amplitude * sin(freq pi x)` in 1D, tensorized
    /// `amplitude * sin(freq pi x1) sin(freq pi x2)` in 2D.
    Sine {
        amplitude: f64,
        freq: u32,
    },
    /// Gaussian bump of unit peak at an interior center, tensorized across
    /// axes in 2D; the peak is attained inside the domain, so the sup-norm
    /// is exactly `|amplitude|`.
    Bump {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl FieldGen {
    pub fn eval(&self, x: &[f64; 2], dim: usize) -> f64 {
        match *self {
            FieldGen::Constant(c) => c,
            FieldGen::Sine { amplitude, freq } => {
                let fx = (freq as f64 * std::f64::consts::PI * x[0]).sin();
                if dim == 1 {
                    amplitude * fx
                } else {
                    amplitude * fx * (freq as f64 * std::f64::consts::PI * x[1]).sin()
                }
            }
            FieldGen::Bump {
                amplitude,
                center,
                width,
            } => {
                let gx = (-(x[0] - center[0]).powi(2) / (2.0 * width * width)).exp();
                if dim == 1 {
                    amplitude * gx
                } else {
                    amplitude * gx * (-(x[1] - center[1]).powi(2) / (2.0 * width * width)).exp()
                }
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match *self {
            FieldGen::Constant(c) => c.abs(),
            FieldGen::Sine { amplitude, .. } => amplitude.abs(),
            FieldGen::Bump { amplitude, .. } => amplitude.abs(),
        }
    }
}

/// Deterministic low-discrepancy center for bump mode `j` (1-based), kept
/// away from the boundary.
fn bump_center(j: usize) -> [f64; 2] {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    const SILVER: f64 = std::f64::consts::SQRT_2 - 1.0;
    let spread = |t: f64| 0.15 + 0.7 * t.fract();
    [spread(j as f64 * GOLDEN), spread(j as f64 * SILVER)]
}

/// How the mode sup-norms decay. `Algebraic` describes the infinite family
/// `||b_j|| = c j^(-theta_dec)`; `Finite` means only the stored modes exist
/// (used for hand-built fixtures such as constant modes).
#[derive(Clone, Debug, PartialEq)]
pub enum DecaySpec {
    Algebraic { c: f64, theta_dec: f64 },
    Finite,
}

impl DecaySpec {
    /// Nominal summability exponent: the sup-norm sequence lies in `ell^q`
    /// for every `q > 1/theta_dec`; `1/theta_dec` is the recorded nominal.
    pub fn nominal_q(&self) -> Option<f64> {
        match self {
            DecaySpec::Algebraic { theta_dec, .. } => Some(1.0 / theta_dec),
            DecaySpec::Finite => None,
        }
    }
}

/// Affine random potential: `b0` plus modes with recorded sup-norms.
#[derive(Clone, Debug)]
pub struct AffinePotential {
    b0: FieldGen,
    modes: Vec<FieldGen>,
    sup_norms: Vec<f64>,
    decay: DecaySpec,
}

impl AffinePotential {
    /// Oscillatory family `b_j(x) = c j^(-theta_dec) sin(j pi x)`
    /// (tensorized in 2D) with `b0 = c zeta(theta_dec)/2 + margin`, which
    /// keeps `b >= margin` for every parameter in `U`.
    ///
    /// The eigenvalue's sensitivity to mode `j` carries an extra oscillatory
    /// decay here (the overlap with `u^2` shrinks like `j^-3`, and even
    /// frequencies nearly cancel by parity), so rate experiments against the
    /// plain sup-norm decay should use `algebraic_bump` instead.
    pub fn algebraic_sine(
        c: f64,
        theta_dec: f64,
        s_max: usize,
        margin: f64,
    ) -> Result<Self, CoeffError> {
        if theta_dec <= 1.0 {
            return Err(CoeffError::BadDecayExponent(theta_dec));
        }
        assert!(c > 0.0 && margin >= 0.0);
        let modes: Vec<FieldGen> = (1..=s_max)
            .map(|j| FieldGen::Sine {
                amplitude: c * (j as f64).powf(-theta_dec),
                freq: j as u32,
            })
            .collect();
        let sup_norms = modes.iter().map(|m| m.sup_norm()).collect();
        let b0 = FieldGen::Constant(c * zeta(theta_dec) / 2.0 + margin);
        Ok(AffinePotential {
            b0,
            modes,
            sup_norms,
            decay: DecaySpec::Algebraic { c, theta_dec },
        })
    }

    /// Bump family `b_j(x) = c j^(-theta_dec) exp(-(x - x_j)^2 / 2 w^2)` with
    /// deterministic interior centers and fixed width. Every mode overlaps
    /// the ground state at order one, so parametric sensitivities track the
    /// sup-norm decay itself; this is the family rate experiments use.
    pub fn algebraic_bump(
        c: f64,
        theta_dec: f64,
        s_max: usize,
        margin: f64,
    ) -> Result<Self, CoeffError> {
        if theta_dec <= 1.0 {
            return Err(CoeffError::BadDecayExponent(theta_dec));
        }
        assert!(c > 0.0 && margin >= 0.0);
        let modes: Vec<FieldGen> = (1..=s_max)
            .map(|j| FieldGen::Bump {
                amplitude: c * (j as f64).powf(-theta_dec),
                center: bump_center(j),
                width: 0.12,
            })
            .collect();
        let sup_norms = modes.iter().map(|m| m.sup_norm()).collect();
        let b0 = FieldGen::Constant(c * zeta(theta_dec) / 2.0 + margin);
        Ok(AffinePotential {
            b0,
            modes,
            sup_norms,
            decay: DecaySpec::Algebraic { c, theta_dec },
        })
    }

    /// Explicit finite mode family; sup-norms must be non-increasing.
    pub fn from_modes(b0: FieldGen, modes: Vec<FieldGen>) -> Result<Self, CoeffError> {
        let sup_norms: Vec<f64> = modes.iter().map(|m| m.sup_norm()).collect();
        for i in 1..sup_norms.len() {
            if sup_norms[i] > sup_norms[i - 1] {
                return Err(CoeffError::NormsNotDecreasing { index: i });
            }
        }
        Ok(AffinePotential {
            b0,
            modes,
            sup_norms,
            decay: DecaySpec::Finite,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn sup_norms(&self) -> &[f64] {
        &self.sup_norms
    }

    pub fn decay(&self) -> &DecaySpec {
        &self.decay
    }

    pub fn b0(&self) -> &FieldGen {
        &self.b0
    }

    pub fn mode(&self, j: usize) -> &FieldGen {
        &self.modes[j]
    }
}

/// Point in the anchored parameter box: `s` active coordinates in
/// `[-1/2, 1/2]`, all later coordinates semantically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    y: Vec<f64>,
}

impl ParamVector {
    pub fn new(y: Vec<f64>) -> Result<Self, CoeffError> {
        for (index, &value) in y.iter().enumerate() {
            if !value.is_finite() || value.abs() > 0.5 {
                return Err(CoeffError::ParameterOutOfRange { index, value });
            }
        }
        Ok(ParamVector { y })
    }

    pub fn origin(s: usize) -> Self {
        ParamVector { y: vec![0.0; s] }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.y
    }

    /// Coordinate `j` (0-based); zero beyond the active dimension, matching
    /// the anchored truncation `(y_s; 0)`.
    pub fn coord(&self, j: usize) -> f64 {
        self.y.get(j).copied().unwrap_or(0.0)
    }

    /// Anchored truncation to the first `s` coordinates.
    pub fn truncate(&self, s: usize) -> ParamVector {
        ParamVector {
            y: self.y.iter().copied().take(s).collect(),
        }
    }

    /// Returns a copy with coordinate `j` (0-based) moved by `delta`,
    /// extending with zeros if needed. Errors if the result leaves `U`.
    pub fn shifted(&self, j: usize, delta: f64) -> Result<ParamVector, CoeffError> {
        let mut y = self.y.clone();
        if y.len() <= j {
            y.resize(j + 1, 0.0);
        }
        y[j] += delta;
        ParamVector::new(y)
    }
}

/// Pointwise potential samples `b0(x) + sum_{j <= s} y_j b_j(x)` at the
/// interior nodes; errors if any node comes out negative.
pub fn evaluate_potential(
    pot: &AffinePotential,
    y: &ParamVector,
    grid: &Grid,
) -> Result<FieldOnGrid, CoeffError> {
    if y.dim() > pot.num_modes() {
        return Err(CoeffError::TooManyActiveDims {
            got: y.dim(),
            available: pot.num_modes(),
        });
    }
    let dim = grid.dim();
    let mut values = vec![0.0; grid.len()];
    for (i, v) in values.iter_mut().enumerate() {
        let x = grid.coords(i);
        let mut acc = pot.b0.eval(&x, dim);
        for (j, mode) in pot.modes.iter().enumerate().take(y.dim()) {
            acc += y.coord(j) * mode.eval(&x, dim);
        }
        *v = acc;
    }
    if let Some((node, &value)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(CoeffError::NegativeAtNode { node, value });
    }
    Ok(FieldOnGrid::new(grid, FieldRole::Potential, values).expect("negativity checked above"))
}

/// `sum_{j > s} ||b_j||_inf`. Closed form (partial sum plus Euler-Maclaurin
/// remainder) for algebraic decay; exact finite sum otherwise.
pub fn tail_sum(pot: &AffinePotential, s: usize) -> f64 {
    match pot.decay {
        DecaySpec::Algebraic { c, theta_dec } => c * pow_tail(theta_dec, s as u64),
        DecaySpec::Finite => pot.sup_norms.iter().skip(s).sum(),
    }
}

#[derive(Clone, Debug)]
pub struct TailCheck {
    pub s: usize,
    pub tail: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct TailReport {
    pub r: f64,
    pub checks: Vec<TailCheck>,
    pub all_hold: bool,
}

/// Verifies `sum_{j>s} beta_j <= min(r/(1-r), 1) ||beta||_{ell^r} s^(1-1/r)`
/// for each requested `s`, with `beta_j = ||b_j||_inf`.
pub fn check_tail_inequality(
    pot: &AffinePotential,
    r: f64,
    s_list: &[usize],
) -> Result<TailReport, CoeffError> {
    if !(0.0 < r && r < 1.0) {
        return Err(CoeffError::BadEllRExponent(r));
    }
    let norm_r = match pot.decay {
        DecaySpec::Algebraic { c, theta_dec } => {
            if theta_dec * r <= 1.0 {
                return Err(CoeffError::NotSummable { r, theta_dec });
            }
            (c.powf(r) * zeta(theta_dec * r)).powf(1.0 / r)
        }
        DecaySpec::Finite => pot
            .sup_norms
            .iter()
            .map(|b| b.powf(r))
            .sum::<f64>()
            .powf(1.0 / r),
    };
    let factor = (r / (1.0 - r)).min(1.0);
    let mut checks = Vec::with_capacity(s_list.len());
    let mut all_hold = true;
    for &s in s_list {
        assert!(s >= 1, "tail bound needs s >= 1");
        let tail = tail_sum(pot, s);
        let bound = factor * norm_r * (s as f64).powf(1.0 - 1.0 / r);
        let margin = bound - tail;
        all_hold &= margin >= 0.0;
        checks.push(TailCheck {
            s,
            tail,
            bound,
            margin,
        });
    }
    Ok(TailReport {
        r,
        checks,
        all_hold,
    })
}

/// `count` iid Uniform[-1/2, 1/2]^s draws from the deterministic stream for
/// `seed`; identical seeds give identical output on every platform.
pub fn sample_y(s: usize, rng_seed: u64, count: usize) -> Vec<ParamVector> {
    assert!(s >= 1);
    let mut rng = stream_rng(rng_seed, "sample_y", 0);
    (0..count)
        .map(|_| {
            let y: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() - 0.5).collect();
            ParamVector { y }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn default_pot() -> AffinePotential {
        AffinePotential::algebraic_sine(1.0, 2.0, 32, 0.1).unwrap()
    }

    #[test]
    fn potential_at_origin_is_b0() {
        let grid = Grid::unit_interval(16);
        let pot = default_pot();
        let field = evaluate_potential(&pot, &ParamVector::origin(4), &grid).unwrap();
        let b0 = zeta(2.0) / 2.0 + 0.1;
        for &v in field.values() {
            assert!((v - b0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_single_mode_shifts_uniformly() {
        let grid = Grid::unit_interval(8);
        let pot =
            AffinePotential::from_modes(FieldGen::Constant(1.0), vec![FieldGen::Constant(0.6)])
                .unwrap();
        let y = ParamVector::new(vec![0.5]).unwrap();
        let field = evaluate_potential(&pot, &y, &grid).unwrap();
        for &v in field.values() {
            assert!((v - 1.3).abs() < 1e-15);
        }
    }

    #[test]
    fn spot_value_two_modes() {
        // modes c j^-2 sin(j pi x), y = (1/2, -1/2), b0 = zeta(2)/2:
        // at x = 1/2 the j = 2 mode vanishes, value = b0 + sin(pi/2)/2
        let grid = Grid::unit_interval(16);
        let pot = AffinePotential::algebraic_sine(1.0, 2.0, 8, 0.0).unwrap();
        let y = ParamVector::new(vec![0.5, -0.5]).unwrap();
        let field = evaluate_potential(&pot, &y, &grid).unwrap();
        let mid = grid.len() / 2; // node at x = 1/2
        assert!((grid.coords(mid)[0] - 0.5).abs() < 1e-14);
        let expected = zeta(2.0) / 2.0 + 0.5;
        assert!((field.values()[mid] - expected).abs() < 1e-12);
        assert!(field.min() >= 0.0);
    }

    #[test]
    fn affine_in_y() {
        let grid = Grid::unit_interval(20);
        let pot = default_pot();
        let ya = ParamVector::new(vec![0.3, -0.2, 0.1]).unwrap();
        let yb = ParamVector::new(vec![-0.4, 0.5, 0.0]).unwrap();
        let alpha = 0.37;
        let mix = ParamVector::new(
            ya.coords()
                .iter()
                .zip(yb.coords())
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        )
        .unwrap();
        let fa = evaluate_potential(&pot, &ya, &grid).unwrap();
        let fb = evaluate_potential(&pot, &yb, &grid).unwrap();
        let fm = evaluate_potential(&pot, &mix, &grid).unwrap();
        for i in 0..grid.len() {
            let lin = alpha * fa.values()[i] + (1.0 - alpha) * fb.values()[i];
            let rel = (fm.values()[i] - lin).abs() / lin.abs().max(1.0);
            assert!(rel <= 1e-13);
        }
    }

    #[test]
    fn nonnegative_over_random_sample() {
        let grid = Grid::unit_interval(32);
        let pot = default_pot();
        for y in sample_y(16, 99, 1000) {
            let field = evaluate_potential(&pot, &y, &grid).unwrap();
            assert!(field.min() >= 0.0);
        }
    }

    #[test]
    fn tail_sum_zeta_two() {
        let pot = AffinePotential::algebraic_sine(1.0, 2.0, 4, 0.0).unwrap();
        assert!((tail_sum(&pot, 0) - PI * PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn tail_sum_cubic_decay() {
        let pot = AffinePotential::algebraic_sine(1.0, 3.0, 4, 0.0).unwrap();
        // sum_{j>10} j^-3, computed independently with mpmath
        assert!((tail_sum(&pot, 10) - 4.524917485401034e-3).abs() < 1e-13);
    }

    #[test]
    fn tail_sum_decreasing_with_limit_exponent() {
        let pot = AffinePotential::algebraic_sine(2.0, 2.0, 4, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        let mut points = Vec::new();
        for s in [1usize, 2, 4, 8, 16, 32, 64, 128] {
            let t = tail_sum(&pot, s);
            assert!(t < prev);
            prev = t;
            points.push(((s as f64).ln(), t.ln()));
        }
        // log tail / log s approaches 1 - theta_dec = -1
        let last = &points[points.len() - 2..];
        let slope = (last[1].1 - last[0].1) / (last[1].0 - last[0].0);
        assert!((slope - (-1.0)).abs() < 0.05, "slope {}", slope);
    }

    #[test]
    fn tail_inequality_holds_for_cubic_decay() {
        let pot = AffinePotential::algebraic_sine(1.0, 3.0, 4, 0.0).unwrap();
        let report = check_tail_inequality(&pot, 0.5, &[1, 4, 8, 16, 32]).unwrap();
        assert!(report.all_hold);
        for c in &report.checks {
            assert!(c.margin > 0.0, "s={} margin {}", c.s, c.margin);
        }
    }

    #[test]
    fn tail_inequality_rejects_bad_r() {
        let pot = default_pot();
        assert!(matches!(
            check_tail_inequality(&pot, 1.0, &[4]),
            Err(CoeffError::BadEllRExponent(_))
        ));
        assert!(matches!(
            check_tail_inequality(&pot, 0.4, &[4]),
            Err(CoeffError::NotSummable { .. })
        ));
    }

    #[test]
    fn sample_y_deterministic_and_in_range() {
        let a = sample_y(6, 1234, 50);
        let b = sample_y(6, 1234, 50);
        assert_eq!(a, b);
        assert!(sample_y(3, 1, 0).is_empty());
        for y in &a {
            for &v in y.coords() {
                assert!((-0.5..=0.5).contains(&v));
            }
        }
    }

    #[test]
    fn sample_y_mean_within_clt_band() {
        let n = 100_000;
        let samples = sample_y(2, 777, n);
        for j in 0..2 {
            let mean: f64 = samples.iter().map(|y| y.coord(j)).sum::<f64>() / n as f64;
            let band = 4.0 * (1.0 / 12.0f64).sqrt() / (n as f64).sqrt();
            assert!(mean.abs() < band, "mean {} band {}", mean, band);
        }
    }

    #[test]
    fn param_vector_validation() {
        assert!(ParamVector::new(vec![0.51]).is_err());
        assert!(ParamVector::new(vec![0.5, -0.5]).is_ok());
        let y = ParamVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(y.truncate(2).coords(), &[0.1, 0.2]);
        assert_eq!(y.coord(7), 0.0);
        assert!(y.shifted(0, 0.45).is_err());
        assert_eq!(
            y.shifted(4, 0.25).unwrap().coords(),
            &[0.1, 0.2, 0.3, 0.0, 0.25]
        );
    }

    #[test]
    fn negative_potential_is_reported_with_node() {
        let grid = Grid::unit_interval(8);
        let pot =
            AffinePotential::from_modes(FieldGen::Constant(0.1), vec![FieldGen::Constant(0.4)])
                .unwrap();
        let y = ParamVector::new(vec![-0.5]).unwrap();
        match evaluate_potential(&pot, &y, &grid) {
            Err(CoeffError::NegativeAtNode { node: 0, value }) => {
                assert!((value - (-0.1)).abs() < 1e-15);
            }
            other => panic!(
                "expected negativity error, got {:?}",
                other.map(|f| f.min())
            ),
        }
    }
}
