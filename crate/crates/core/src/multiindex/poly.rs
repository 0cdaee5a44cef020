//! Sparse multivariate polynomials over exact rationals; the independent
//! oracle for the derivative-expansion identity.

use std::collections::BTreeMap;

use num::{One, Zero};

use super::{MultiIndex, Rational};

/// Polynomial in finitely many variables `y_1..y_k`, stored as a map from
/// monomial exponent (a `MultiIndex`) to nonzero rational coefficient.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SymbolicPoly {
    terms: BTreeMap<MultiIndex, Rational>,
}

impl SymbolicPoly {
    pub fn zero() -> Self {
        SymbolicPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(MultiIndex::zero(), c);
        }
        SymbolicPoly { terms }
    }

    /// The variable `y_coord` (1-based).
    pub fn var(coord: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(MultiIndex::unit(coord), Rational::one());
        SymbolicPoly { terms }
    }

    pub fn from_terms(pairs: Vec<(MultiIndex, Rational)>) -> Self {
        let mut terms: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (m, c) in pairs {
            let entry = terms.entry(m).or_insert_with(Rational::zero);
            *entry += c;
        }
        terms.retain(|_, c| !c.is_zero());
        SymbolicPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &SymbolicPoly) -> SymbolicPoly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let entry = terms.entry(m.clone()).or_insert_with(Rational::zero);
            *entry += c;
        }
        terms.retain(|_, c| !c.is_zero());
        SymbolicPoly { terms }
    }

    pub fn scale(&self, factor: &Rational) -> SymbolicPoly {
        if factor.is_zero() {
            return SymbolicPoly::zero();
        }
        SymbolicPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * factor))
                .collect(),
        }
    }

    pub fn mul(&self, other: &SymbolicPoly) -> SymbolicPoly {
        let mut terms: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.add(mb);
                let entry = terms.entry(m).or_insert_with(Rational::zero);
                *entry += ca * cb;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        SymbolicPoly { terms }
    }

    pub fn pow(&self, exponent: u32) -> SymbolicPoly {
        let mut acc = SymbolicPoly::constant(Rational::one());
        for _ in 0..exponent {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact partial derivative with respect to `y_coord`.
    pub fn diff(&self, coord: u32) -> SymbolicPoly {
        let unit = MultiIndex::unit(coord);
        let mut terms: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.exponent(coord);
            if e == 0 {
                continue;
            }
            let lowered = m.checked_sub(&unit).expect("exponent checked above");
            let coeff = c * Rational::from(num::BigInt::from(e));
            let entry = terms.entry(lowered).or_insert_with(Rational::zero);
            *entry += coeff;
        }
        terms.retain(|_, c| !c.is_zero());
        SymbolicPoly { terms }
    }

    /// Repeated differentiation `d^nu`.
    pub fn diff_multi(&self, nu: &MultiIndex) -> SymbolicPoly {
        let mut acc = self.clone();
        for (coord, e) in nu.iter() {
            for _ in 0..e {
                acc = acc.diff(coord);
                if acc.is_zero() {
                    return acc;
                }
            }
        }
        acc
    }

    /// Random sparse polynomial with small rational coefficients and total
    /// degree at most `max_degree`; the randomized oracle sweeps draw their
    /// test inputs here.
    pub fn random(
        rng: &mut impl rand::Rng,
        num_vars: u32,
        num_terms: usize,
        max_degree: u32,
        max_abs_coef: i64,
    ) -> SymbolicPoly {
        let mut terms = Vec::with_capacity(num_terms + 1);
        // keep a constant term so powers do not collapse to monomials
        let c0 = rng.gen_range(1..=max_abs_coef);
        terms.push((MultiIndex::zero(), Rational::from(num::BigInt::from(c0))));
        for _ in 0..num_terms {
            let exps: Vec<u32> = loop {
                let cand: Vec<u32> = (0..num_vars)
                    .map(|_| rng.gen_range(0..=max_degree))
                    .collect();
                if cand.iter().sum::<u32>() <= max_degree {
                    break cand;
                }
            };
            let num = rng.gen_range(-max_abs_coef..=max_abs_coef);
            let den = rng.gen_range(1..=4i64);
            if num == 0 {
                continue;
            }
            terms.push((
                MultiIndex::from_dense(&exps),
                Rational::new(num::BigInt::from(num), num::BigInt::from(den)),
            ));
        }
        SymbolicPoly::from_terms(terms)
    }

    /// Exact evaluation at a rational point given densely (`y_1..y_k`).
    pub fn eval(&self, point: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (coord, e) in m.iter() {
                let y = point
                    .get(coord as usize - 1)
                    .cloned()
                    .unwrap_or_else(Rational::zero);
                for _ in 0..e {
                    term *= &y;
                }
            }
            acc += term;
        }
        acc
    }
}
