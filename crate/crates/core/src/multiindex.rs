//! Exact multi-index algebra and the combinatorics behind the derivative
//! expansion of integer powers.
//!
//! Everything in this module is exact: coefficients are arbitrary-precision
//! rationals, enumeration is explicit, and there are no tolerances. Floating
//! point only enters the PDE and quadrature modules.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

pub mod poly;

pub use poly::SymbolicPoly;

/// Exactness carrier for all combinatorial identities.
pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MultiIndexError {
    #[error("partition parts do not sum to the target index")]
    PartsSumMismatch,
    #[error("expansion requires a nonzero multi-index")]
    ZeroIndex,
    #[error("power must satisfy p >= {0}")]
    PowerTooSmall(u32),
}

/// Finitely supported sequence of non-negative integers: the index of a
/// parametric mixed derivative. Stored sparsely as `(coordinate, exponent)`
/// pairs with coordinates starting at 1, strictly increasing, and no zero
/// exponents.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex {
            entries: Vec::new(),
        }
    }

    /// The unit index `e_i` (coordinates are 1-based).
    pub fn unit(coord: u32) -> Self {
        assert!(coord >= 1, "coordinates are 1-based");
        MultiIndex {
            entries: vec![(coord, 1)],
        }
    }

    /// Builds from `(coordinate, exponent)` pairs; zero exponents are dropped
    /// and duplicate coordinates are summed.
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Self {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for &(c, e) in pairs {
            assert!(c >= 1, "coordinates are 1-based");
            if e > 0 {
                *map.entry(c).or_insert(0) += e;
            }
        }
        MultiIndex {
            entries: map.into_iter().collect(),
        }
    }

    /// Builds from a dense exponent vector; slice position `i` is coordinate
    /// `i + 1`.
    pub fn from_dense(exps: &[u32]) -> Self {
        MultiIndex {
            entries: exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| (i as u32 + 1, e))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total order `|nu|`.
    pub fn order(&self) -> u64 {
        self.entries.iter().map(|&(_, e)| e as u64).sum()
    }

    pub fn exponent(&self, coord: u32) -> u32 {
        self.entries
            .binary_search_by_key(&coord, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(c, _)| c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn max_coord(&self) -> u32 {
        self.entries.last().map(|&(c, _)| c).unwrap_or(0)
    }

    /// Componentwise partial order `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.entries.iter().all(|&(c, e)| e <= other.exponent(c))
    }

    /// Strict partial order: `self <= other` and `self != other`.
    pub fn lt(&self, other: &MultiIndex) -> bool {
        self.le(other) && self != other
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut map: BTreeMap<u32, u32> = self.entries.iter().copied().collect();
        for &(c, e) in &other.entries {
            *map.entry(c).or_insert(0) += e;
        }
        MultiIndex {
            entries: map.into_iter().collect(),
        }
    }

    /// `self - other` when `other <= self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        let entries = self
            .entries
            .iter()
            .map(|&(c, e)| (c, e - other.exponent(c)))
            .filter(|&(_, e)| e > 0)
            .collect();
        Some(MultiIndex { entries })
    }

    /// `nu! = prod_i nu_i!`.
    pub fn factorial(&self) -> BigInt {
        self.entries
            .iter()
            .map(|&(_, e)| factorial(e as u64))
            .product()
    }

    /// Compact dense rendering used in CSV output, e.g. `(1,2)` -> "1.2".
    pub fn packed(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let m = self.max_coord();
        (1..=m)
            .map(|c| self.exponent(c).to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nu[{}]", self.packed())
    }
}

pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    let k = k.min(n - k);
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `[1/2]_n = |(1/2)(1/2 - 1)...(1/2 - (n-1))|`, exactly; `1` for `n = 0`.
pub fn falling_half(n: u64) -> Rational {
    let mut num = BigInt::one();
    for k in 0..n {
        // |1/2 - k| = |1 - 2k| / 2
        let odd = if k == 0 { 1 } else { 2 * k - 1 };
        num *= BigInt::from(odd);
    }
    Rational::new(num, BigInt::from(2u64).pow(n as u32))
}

/// Checks both falling-factorial inequalities exactly for all orders up to
/// `n_max`: `[1/2]_n <= n! <= 2^(n+1) [1/2]_n` for `0 <= n <= n_max`, and the
/// binomial convolution bound
/// `sum_{i=1}^{n-1} C(n,i) [1/2]_i [1/2]_{n-i} <= 2 [1/2]_n` for `n >= 2`.
pub fn check_falling_inequalities(n_max: u64) -> bool {
    for n in 0..=n_max {
        let fh = falling_half(n);
        let nf = Rational::from(factorial(n));
        let two_pow = Rational::from(BigInt::from(2u64).pow(n as u32 + 1));
        if fh > nf || nf > two_pow * &fh {
            return false;
        }
        if n >= 2 {
            let mut conv = Rational::zero();
            for i in 1..n {
                conv += Rational::from(binomial(n, i)) * falling_half(i) * falling_half(n - i);
            }
            if conv > Rational::from(BigInt::from(2)) * fh {
                return false;
            }
        }
    }
    true
}

/// Ordered sequence of multi-indices summing to a target. Under the
/// `NonzeroStrict` constraint every part is nonzero and strictly below the
/// target in the componentwise order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct PartitionSequence {
    target: MultiIndex,
    parts: Vec<MultiIndex>,
}

impl PartitionSequence {
    pub fn new(target: MultiIndex, parts: Vec<MultiIndex>) -> Result<Self, MultiIndexError> {
        let sum = parts.iter().fold(MultiIndex::zero(), |acc, p| acc.add(p));
        if sum != target {
            return Err(MultiIndexError::PartsSumMismatch);
        }
        Ok(PartitionSequence { target, parts })
    }

    pub fn target(&self) -> &MultiIndex {
        &self.target
    }

    pub fn parts(&self) -> &[MultiIndex] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Canonically sorted copy of the parts; fixtures and term merging key on
    /// this form.
    pub fn sorted_parts(&self) -> Vec<MultiIndex> {
        let mut parts = self.parts.clone();
        parts.sort();
        parts
    }
}

/// `prod_j nu_j! / (m_{1j}! m_{2j}! ... m_{nj}!)` for an ordered partition of
/// `target`; exact, and an integer whenever the parts sum to the target.
pub fn multinomial(target: &MultiIndex, parts: &[MultiIndex]) -> Result<Rational, MultiIndexError> {
    let sum = parts.iter().fold(MultiIndex::zero(), |acc, p| acc.add(p));
    if &sum != target {
        return Err(MultiIndexError::PartsSumMismatch);
    }
    let mut denom = BigInt::one();
    for p in parts {
        denom *= p.factorial();
    }
    Ok(Rational::new(target.factorial(), denom))
}

/// Scalar multinomial `n! / (k_1! ... k_m!)`.
pub fn scalar_multinomial(n: u64, ks: &[u64]) -> BigInt {
    debug_assert_eq!(ks.iter().sum::<u64>(), n);
    let mut denom = BigInt::one();
    for &k in ks {
        denom *= factorial(k);
    }
    factorial(n) / denom
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PartitionConstraint {
    /// Every part `m_j` satisfies `0 != m_j < target`.
    NonzeroStrict,
    /// Parts range over all of `0 <= m_j <= target`.
    Unconstrained,
}

/// Streams every ordered sequence `(m_1, ..., m_n)` with `sum m_j = target`
/// exactly once, in lexicographic order of the dense part vectors. Counts
/// grow factorially in `|target|`, hence the lazy iterator.
pub fn enumerate_partitions(
    target: &MultiIndex,
    n: usize,
    constraint: PartitionConstraint,
) -> PartitionIter {
    assert!(n >= 1, "need at least one part");
    let axes: Vec<u32> = target.support().collect();
    let caps: Vec<u32> = target.iter().map(|(_, e)| e).collect();
    PartitionIter {
        axes,
        target_dense: caps.clone(),
        target: target.clone(),
        n,
        constraint,
        frames: vec![Frame {
            rem: caps,
            cur: None,
            exhausted: false,
        }],
        parts: Vec::new(),
        done: false,
    }
}

struct Frame {
    /// Remainder available to this and all later parts.
    rem: Vec<u32>,
    /// Current candidate at this level, `None` before the first.
    cur: Option<Vec<u32>>,
    /// Only meaningful on the last level, whose sole candidate is `rem`.
    exhausted: bool,
}

pub struct PartitionIter {
    axes: Vec<u32>,
    target_dense: Vec<u32>,
    target: MultiIndex,
    n: usize,
    constraint: PartitionConstraint,
    frames: Vec<Frame>,
    parts: Vec<Vec<u32>>,
    done: bool,
}

impl PartitionIter {
    fn dense_to_index(&self, dense: &[u32]) -> MultiIndex {
        let pairs: Vec<(u32, u32)> = self
            .axes
            .iter()
            .zip(dense)
            .filter(|(_, &e)| e > 0)
            .map(|(&c, &e)| (c, e))
            .collect();
        MultiIndex { entries: pairs }
    }

    fn part_admissible(&self, cand: &[u32], rem: &[u32], parts_left_after: usize) -> bool {
        match self.constraint {
            PartitionConstraint::Unconstrained => true,
            PartitionConstraint::NonzeroStrict => {
                let order: u64 = cand.iter().map(|&e| e as u64).sum();
                if order == 0 {
                    return false;
                }
                // cand <= rem <= target holds by construction, so strictness
                // only fails when the candidate is the full target
                if cand == &self.target_dense[..] {
                    return false;
                }
                // every later part still needs order >= 1
                let rem_after: u64 = rem.iter().zip(cand).map(|(&r, &c)| (r - c) as u64).sum();
                rem_after >= parts_left_after as u64
            }
        }
    }

    /// Odometer step over dense vectors bounded componentwise by `caps`.
    fn next_candidate(cur: &mut Option<Vec<u32>>, caps: &[u32]) -> bool {
        match cur {
            None => {
                *cur = Some(vec![0; caps.len()]);
                true
            }
            Some(c) => {
                for i in (0..c.len()).rev() {
                    if c[i] < caps[i] {
                        c[i] += 1;
                        for d in c.iter_mut().skip(i + 1) {
                            *d = 0;
                        }
                        return true;
                    }
                }
                false
            }
        }
    }
}

impl Iterator for PartitionIter {
    type Item = PartitionSequence;

    fn next(&mut self) -> Option<PartitionSequence> {
        if self.done {
            return None;
        }
        loop {
            let depth = match self.frames.len() {
                0 => {
                    self.done = true;
                    return None;
                }
                l => l - 1,
            };
            if depth == self.n - 1 {
                // the last part is forced to the remainder
                let frame = self.frames.last_mut().unwrap();
                if frame.exhausted {
                    self.frames.pop();
                    self.parts.truncate(self.frames.len().saturating_sub(1));
                    continue;
                }
                frame.exhausted = true;
                let forced = frame.rem.clone();
                if self.part_admissible(&forced, &forced, 0) {
                    let mut parts: Vec<MultiIndex> =
                        self.parts.iter().map(|d| self.dense_to_index(d)).collect();
                    parts.push(self.dense_to_index(&forced));
                    return Some(PartitionSequence {
                        target: self.target.clone(),
                        parts,
                    });
                }
                continue;
            }
            // free level: advance its odometer to the next admissible candidate
            let parts_left_after = self.n - depth - 1;
            let rem = self.frames[depth].rem.clone();
            let mut advanced = false;
            loop {
                let frame = &mut self.frames[depth];
                if !Self::next_candidate(&mut frame.cur, &rem) {
                    break;
                }
                let cand = frame.cur.as_ref().unwrap().clone();
                if self.part_admissible(&cand, &rem, parts_left_after) {
                    let child_rem: Vec<u32> = rem.iter().zip(&cand).map(|(&r, &c)| r - c).collect();
                    self.parts.truncate(depth);
                    self.parts.push(cand);
                    self.frames.push(Frame {
                        rem: child_rem,
                        cur: None,
                        exhausted: false,
                    });
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                self.frames.pop();
                self.parts.truncate(self.frames.len().saturating_sub(1));
            }
        }
    }
}

/// One term of the expansion of `d^nu(u^p)`: `coefficient * u^u_power *
/// prod_j d^{m_j} u`, with the derivative parts canonically sorted.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GammaTerm {
    pub coefficient: Rational,
    pub u_power: u32,
    pub parts: PartitionSequence,
}

/// Full expansion of the mixed derivative of an integer power:
///
/// ```text
/// d^nu(u^p) = p u^(p-1) d^nu u
///           + sum_{n=0}^{p-2} C(p,n) u^n
///             sum_{parts} multinomial(nu; m_1..m_{p-n}) prod_j d^{m_j} u
/// ```
///
/// where the inner sum runs over ordered sequences of `p - n` parts, each
/// nonzero and strictly below `nu`. Terms with the same `u` power and the
/// same multiset of derivative parts are merged, so the returned coefficients
/// match the collected form (the order-(1,2), p = 4 case collapses to
/// coefficients 4, 12, 24, 24).
pub fn gamma_expansion(p: u32, nu: &MultiIndex) -> Result<Vec<GammaTerm>, MultiIndexError> {
    if nu.is_zero() {
        return Err(MultiIndexError::ZeroIndex);
    }
    if p < 2 {
        return Err(MultiIndexError::PowerTooSmall(2));
    }
    let mut merged: BTreeMap<(u32, Vec<MultiIndex>), Rational> = BTreeMap::new();
    for n in 0..=p - 2 {
        let parts_count = (p - n) as usize;
        let outer = Rational::from(binomial(p as u64, n as u64));
        for seq in enumerate_partitions(nu, parts_count, PartitionConstraint::NonzeroStrict) {
            let coeff = &outer * multinomial(nu, seq.parts())?;
            let key = (n, seq.sorted_parts());
            *merged.entry(key).or_insert_with(Rational::zero) += coeff;
        }
    }
    let mut terms = vec![GammaTerm {
        coefficient: Rational::from(BigInt::from(p)),
        u_power: p - 1,
        parts: PartitionSequence {
            target: nu.clone(),
            parts: vec![nu.clone()],
        },
    }];
    // lower-order terms, highest u power first
    for ((n, parts), coefficient) in merged.into_iter().rev() {
        terms.push(GammaTerm {
            coefficient,
            u_power: n,
            parts: PartitionSequence {
                target: nu.clone(),
                parts,
            },
        });
    }
    Ok(terms)
}

/// Validates the expansion against exact repeated symbolic differentiation:
/// `d^nu(u^p)` computed term by term must equal the evaluated expansion as a
/// polynomial identity, with no tolerance.
pub fn verify_gamma_against_oracle(u: &SymbolicPoly, p: u32, nu: &MultiIndex) -> bool {
    let lhs = u.pow(p).diff_multi(nu);
    let terms = match gamma_expansion(p, nu) {
        Ok(t) => t,
        Err(_) => return false,
    };
    let mut rhs = SymbolicPoly::zero();
    for term in &terms {
        let mut prod = u.pow(term.u_power).scale(&term.coefficient);
        for part in term.parts.parts() {
            prod = prod.mul(&u.diff_multi(part));
        }
        rhs = rhs.add(&prod);
    }
    lhs == rhs
}

/// Exact left-hand side of the falling-factorial partition bound: the sum
/// over nonzero strict partitions of `nu` into `p` ordered parts of
/// `multinomial * prod_j [1/2]_{|m_j|}`. Zero when no partition exists. The
/// bound states this never exceeds `2^(p-1) [1/2]_{|nu|}`.
pub fn ggcombi_lhs(p: u32, nu: &MultiIndex) -> Rational {
    assert!(p >= 1 && !nu.is_zero());
    let mut acc = Rational::zero();
    for seq in enumerate_partitions(nu, p as usize, PartitionConstraint::NonzeroStrict) {
        let mut term = multinomial(nu, seq.parts()).expect("parts sum to target");
        for part in seq.parts() {
            term *= falling_half(part.order());
        }
        acc += term;
    }
    acc
}

/// Right-hand side of the same bound, `2^(p-1) [1/2]_{|nu|}`.
pub fn ggcombi_rhs(p: u32, nu: &MultiIndex) -> Rational {
    Rational::from(BigInt::from(2u64).pow(p - 1)) * falling_half(nu.order())
}

/// All multi-index shapes of a given total order up to coordinate
/// relabeling: one representative per integer partition, exponents
/// non-increasing over coordinates 1, 2, ...
pub fn order_shapes(order: u32) -> Vec<MultiIndex> {
    fn rec(remaining: u32, cap: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if remaining == 0 {
            out.push(MultiIndex::from_dense(prefix));
            return;
        }
        let hi = remaining.min(cap);
        for part in (1..=hi).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if order == 0 {
        out.push(MultiIndex::zero());
        return out;
    }
    rec(order, order, &mut Vec::new(), &mut out);
    out
}

pub fn rational_int(n: i64) -> Rational {
    Rational::from(BigInt::from(n))
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// True when `r` is a non-negative integer; several identities in this module
/// must produce integers and tests assert it.
pub fn is_nonneg_integer(r: &Rational) -> bool {
    r.is_integer() && !r.is_negative()
}
