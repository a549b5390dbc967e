//! Effective surjectivity of supersingular reduction for two-class genera:
//! Hecke eigenvalues from theta data, the ratios `r_c` and `r̃_c`, the
//! candidate sets `C_a`, and the depth-first search over conductors.

use crate::arith::{self, factorize, kronecker};
use crate::binary_qf::{self, OrderParams};
use crate::exec::Execution;
use crate::genus::{self, GenusError, GenusRecord};
use crate::rational::{self, frac, int, Rational};
use crate::ternary_qf::TernaryForm;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Published `(ℓ, count, max)` for `N = 1`.
pub const PUBLISHED: [(u64, usize, u64); 3] = [(11, 116, 5124), (17, 93, 3990), (19, 165, 8502)];

/// Fundamental discriminants searched for an auxiliary `D₀` satisfy `|D₀| <= 100`.
pub const AUX_DISC_BOUND: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurjectivityError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invariant failed: {0}")]
    Invariant(String),
    #[error("no usable auxiliary discriminant for p = {p}: tried {tried:?}")]
    NoAuxiliaryDiscriminant { p: u64, tried: Vec<(i64, String)> },
    #[error(transparent)]
    Genus(#[from] GenusError),
}

impl SurjectivityError {
    pub fn is_validation(&self) -> bool {
        match self {
            SurjectivityError::Precondition(_) => true,
            SurjectivityError::Invariant(_) | SurjectivityError::NoAuxiliaryDiscriminant { .. } => false,
            SurjectivityError::Genus(e) => e.is_validation(),
        }
    }
}

fn require_two_classes(genus: &GenusRecord) -> Result<(), SurjectivityError> {
    if genus.len() != 2 {
        return Err(SurjectivityError::Precondition(format!(
            "a two-class genus is required, got {} classes",
            genus.len()
        )));
    }
    Ok(())
}

/// `a_g(n) = r(Q_s, n) − r(gen(Q_s), n)`, the cusp part of `θ_{Q_s}`.
pub fn cusp_coefficient(genus: &GenusRecord, class: usize, n: u64) -> Result<Rational, SurjectivityError> {
    let q = genus
        .classes
        .get(class)
        .ok_or_else(|| SurjectivityError::Precondition(format!("no class {class}")))?;
    let r = q.gram.rep_count(n).map_err(GenusError::from)?;
    Ok(int(r as i64) - genus::genus_avg(genus, n, false)?)
}

/// Where an eigenvalue came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    /// `a_g(|D₀|p²) = a_g(|D₀|)·(a(p) − (D₀/p))` on the theta series.
    Theta { d0: i64 },
    /// `p + 1 − #E(𝔽_p)` on an elliptic curve of conductor `ℓ`.
    PointCount,
}

/// `a_p = p + 1 − #E(𝔽_p)` for `E: y² + a1·xy + a3·y = x³ + a2·x² + a4·x + a6`.
pub fn point_count_ap(curve: [i64; 5], p: u64) -> i64 {
    let [a1, a2, a3, a4, a6] = curve;
    let p = p as i64;
    let mut points = 1; // point at infinity
    if p == 2 {
        for x in 0..2 {
            for y in 0..2 {
                let lhs = y * y + a1 * x * y + a3 * y;
                let rhs = x * x * x + a2 * x * x + a4 * x + a6;
                if (lhs - rhs).rem_euclid(2) == 0 {
                    points += 1;
                }
            }
        }
    } else {
        // (2y + a1·x + a3)² = 4x³ + b2·x² + 2·b4·x + b6
        let (b2, b4, b6) = (a1 * a1 + 4 * a2, 2 * a4 + a1 * a3, a3 * a3 + 4 * a6);
        for x in 0..p {
            let f = (4 * x * x % p * x + b2 * x % p * x + 2 * b4 * x + b6).rem_euclid(p);
            points += 1 + i64::from(kronecker(f, p));
        }
    }
    p + 1 - points
}

/// Minimal models of the optimal curves of conductor 11, 17, 19.
pub fn reference_curve(ell: u64) -> Option<[i64; 5]> {
    match ell {
        11 => Some([0, -1, 1, -10, -20]),
        17 => Some([1, -1, 1, -1, -14]),
        19 => Some([0, 1, 1, -9, -15]),
        _ => None,
    }
}

#[derive(Debug, Clone)]
enum Source {
    Theta { genus: Box<GenusRecord>, aux: Vec<(i64, Rational)> },
    Curve([i64; 5]),
}

/// Hecke eigenvalues `a(p)` of the weight-2 newform of level `ℓ`, filled on
/// demand, extended to all `n` prime to `ℓ` by the Hecke recursion.
#[derive(Debug, Clone)]
pub struct EigenvalueTable {
    ell: u64,
    entries: BTreeMap<u64, (i64, Provenance)>,
    source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EigenvalueEntry {
    pub p: u64,
    pub a: i64,
    #[serde(flatten)]
    pub provenance: Provenance,
}

impl EigenvalueTable {
    /// Eigenvalues derived from the cusp part of the theta series of a two-class genus.
    pub fn from_theta(genus: &GenusRecord, ell: u64) -> Result<Self, SurjectivityError> {
        require_two_classes(genus)?;
        let mut aux = Vec::new();
        for d0 in arith::negative_fundamentals(AUX_DISC_BOUND) {
            if kronecker(d0, ell as i64) != -1 {
                continue;
            }
            aux.push((d0, cusp_coefficient(genus, 0, d0.unsigned_abs())?));
        }
        Ok(Self {
            ell,
            entries: BTreeMap::new(),
            source: Source::Theta { genus: Box::new(genus.clone()), aux },
        })
    }

    /// Eigenvalues from point counts on an elliptic curve of conductor `ℓ`.
    pub fn from_curve(ell: u64, curve: [i64; 5]) -> Self {
        Self { ell, entries: BTreeMap::new(), source: Source::Curve(curve) }
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    fn compute(&self, p: u64) -> Result<(i64, Provenance), SurjectivityError> {
        if !arith::is_prime(p) || p == self.ell {
            return Err(SurjectivityError::Precondition(format!(
                "eigenvalue requested at p = {p}: must be a prime different from ell = {}",
                self.ell
            )));
        }
        let (a, prov) = match &self.source {
            Source::Curve(curve) => (point_count_ap(*curve, p), Provenance::PointCount),
            Source::Theta { genus, aux } => {
                let (a, d0) = derive_from_aux(genus, self.ell, p, aux)?;
                (a, Provenance::Theta { d0 })
            }
        };
        if (a * a) as u64 > 4 * p {
            return Err(SurjectivityError::Invariant(format!(
                "|a({p})| = {} violates the Hasse bound 2·sqrt({p})",
                a.abs()
            )));
        }
        Ok((a, prov))
    }

    /// Makes `a(p)` available for every prime in `primes`, computing missing
    /// entries under `exec`.
    pub fn ensure_all(&mut self, primes: &[u64], exec: Execution) -> Result<(), SurjectivityError> {
        let missing: Vec<u64> = primes
            .iter()
            .copied()
            .filter(|p| !self.entries.contains_key(p))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let this = &*self;
        let results = exec.map(missing.clone(), |p| this.compute(p));
        for (p, r) in missing.into_iter().zip(results) {
            self.entries.insert(p, r?);
        }
        Ok(())
    }

    pub fn ensure(&mut self, p: u64) -> Result<i64, SurjectivityError> {
        self.ensure_all(&[p], Execution::Sequential)?;
        Ok(self.entries[&p].0)
    }

    pub fn insert(&mut self, p: u64, a: i64, provenance: Provenance) {
        self.entries.insert(p, (a, provenance));
    }

    pub fn get(&self, p: u64) -> Option<i64> {
        self.entries.get(&p).map(|e| e.0)
    }

    pub fn entries(&self) -> Vec<EigenvalueEntry> {
        self.entries
            .iter()
            .map(|(&p, &(a, provenance))| EigenvalueEntry { p, a, provenance })
            .collect()
    }

    /// `a(p^m)` by `a(p^{k+1}) = a(p)·a(p^k) − p·a(p^{k−1})`.
    pub fn a_prime_power(&mut self, p: u64, m: u32) -> Result<i128, SurjectivityError> {
        let ap = i128::from(self.ensure(p)?);
        Ok(prime_power_coefficient(ap, p, m))
    }

    /// `a(n)` for `n` prime to `ℓ`, by multiplicativity.
    pub fn a_n(&mut self, n: u64) -> Result<i128, SurjectivityError> {
        if n == 0 || n % self.ell == 0 {
            return Err(SurjectivityError::Precondition(format!("a(n) needs n >= 1 prime to ell, got {n}")));
        }
        let mut out = 1i128;
        for &(p, m) in factorize(n).expect("n >= 1").factors() {
            out *= self.a_prime_power(p, m)?;
        }
        Ok(out)
    }
}

fn prime_power_coefficient(ap: i128, p: u64, m: u32) -> i128 {
    let (mut prev, mut cur) = (0i128, 1i128);
    for _ in 0..m {
        let next = ap * cur - i128::from(p) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn derive_from_aux(
    genus: &GenusRecord,
    ell: u64,
    p: u64,
    aux: &[(i64, Rational)],
) -> Result<(i64, i64), SurjectivityError> {
    let mut tried = Vec::new();
    for (d0, base) in aux {
        if d0.unsigned_abs() % p == 0 {
            tried.push((*d0, format!("{p} divides D0")));
            continue;
        }
        if base.is_zero() {
            tried.push((*d0, "a_g(|D0|) = 0".into()));
            continue;
        }
        let a = eigenvalue_from_ratio(genus, p, *d0, base, 0)?;
        let _ = ell;
        return Ok((a, *d0));
    }
    Err(SurjectivityError::NoAuxiliaryDiscriminant { p, tried })
}

fn eigenvalue_from_ratio(
    genus: &GenusRecord,
    p: u64,
    d0: i64,
    base: &Rational,
    class: usize,
) -> Result<i64, SurjectivityError> {
    let top = cusp_coefficient(genus, class, d0.unsigned_abs() * p * p)?;
    let ratio = top / base;
    if !rational::is_integral(&ratio) {
        return Err(SurjectivityError::Invariant(format!(
            "a_g(|D0|p^2)/a_g(|D0|) = {} is not integral (p = {p}, D0 = {d0})",
            rational::to_ratio_string(&ratio)
        )));
    }
    let ratio = ratio.to_integer().to_i64().expect("small");
    Ok(ratio + i64::from(kronecker(d0, p as i64)))
}

/// `a(p)` from the theta series using the auxiliary discriminant `d0` and class `class`.
pub fn derive_eigenvalue_with(
    genus: &GenusRecord,
    ell: u64,
    p: u64,
    d0: i64,
    class: usize,
) -> Result<i64, SurjectivityError> {
    require_two_classes(genus)?;
    if !arith::is_prime(p) || p == ell {
        return Err(SurjectivityError::Precondition(format!("p = {p} must be a prime different from ell")));
    }
    if !arith::is_negative_fundamental(d0) || kronecker(d0, ell as i64) != -1 || d0.unsigned_abs() % p == 0 {
        return Err(SurjectivityError::Precondition(format!(
            "D0 = {d0} must be fundamental, inert at ell = {ell} and prime to p = {p}"
        )));
    }
    let base = cusp_coefficient(genus, class, d0.unsigned_abs())?;
    if base.is_zero() {
        return Err(SurjectivityError::Precondition(format!("a_g(|{d0}|) = 0")));
    }
    eigenvalue_from_ratio(genus, p, d0, &base, class)
}

/// `a(p)` from the theta series with the first usable auxiliary discriminant.
pub fn derive_eigenvalue(genus: &GenusRecord, ell: u64, p: u64) -> Result<(i64, i64), SurjectivityError> {
    let mut table = EigenvalueTable::from_theta(genus, ell)?;
    let a = table.ensure(p)?;
    match table.entries[&p].1 {
        Provenance::Theta { d0 } => Ok((a, d0)),
        Provenance::PointCount => unreachable!("theta table"),
    }
}

/// A rational or `+∞` (vanishing denominator).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtRational {
    Finite(Rational),
    Infinite,
}

impl ExtRational {
    pub fn le(&self, bound: &Rational) -> bool {
        matches!(self, ExtRational::Finite(r) if r <= bound)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::Finite(r) => Some(r),
            ExtRational::Infinite => None,
        }
    }
}

impl std::fmt::Display for ExtRational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtRational::Finite(r) => write!(f, "{}", rational::to_ratio_string(r)),
            ExtRational::Infinite => write!(f, "inf"),
        }
    }
}

/// Multiplicative `±1` assignment on primes standing in for a Kronecker character.
pub type SignPattern = BTreeMap<u64, i32>;

fn eps(pattern: &SignPattern, n: u64) -> i32 {
    factorize(n).expect("n >= 1").primes().map(|p| pattern.get(&p).copied().unwrap_or(1)).product()
}

/// `r_c` from its defining divisor sums.
pub fn r_c(table: &mut EigenvalueTable, c: u64, pattern: &SignPattern) -> Result<ExtRational, SurjectivityError> {
    if arith::gcd(c, table.ell()) != 1 || c == 0 {
        return Err(SurjectivityError::Precondition(format!("c = {c} must be positive and prime to ell")));
    }
    let fc = factorize(c).expect("c >= 1");
    let mut num: i128 = 0;
    let mut den: i128 = 0;
    for (c1, mu1) in fc.squarefree_divisors() {
        num += i128::from(mu1 * eps(pattern, c1)) * i128::from(c / c1);
        let inner = factorize(c / c1).expect(">= 1");
        for (c2, mu2) in inner.squarefree_divisors() {
            den += i128::from(mu1 * mu2 * eps(pattern, c2)) * table.a_n(c / (c1 * c2))?;
        }
    }
    Ok(if den == 0 {
        ExtRational::Infinite
    } else {
        ExtRational::Finite(Rational::new(num.into(), den.abs().into()))
    })
}

/// `r_{p^m}` for the sign `ε` at `p`:
/// `(p^m − ε·p^{m−1}) / |a(p^m) − ε·a(p^{m−1}) − a(p^{m−1}) + ε·a(p^{m−2})|`.
pub fn r_prime_power(
    table: &mut EigenvalueTable,
    p: u64,
    m: u32,
    eps: i32,
) -> Result<ExtRational, SurjectivityError> {
    if m == 0 {
        return Ok(ExtRational::Finite(Rational::one()));
    }
    let ap = i128::from(table.ensure(p)?);
    Ok(r_prime_power_from(ap, p, m, eps))
}

fn r_prime_power_from(ap: i128, p: u64, m: u32, eps: i32) -> ExtRational {
    let a = |k: i64| if k < 0 { 0 } else { prime_power_coefficient(ap, p, k as u32) };
    let e = i128::from(eps);
    let m = i64::from(m);
    let pp = i128::from(p);
    let num = pp.pow(m as u32) - e * pp.pow(m as u32 - 1);
    let den = a(m) - e * a(m - 1) - a(m - 1) + e * a(m - 2);
    if den == 0 {
        ExtRational::Infinite
    } else {
        ExtRational::Finite(Rational::new(num.into(), den.abs().into()))
    }
}

/// `min_ε r_{p^m}` with the minimising sign (`+1` on ties).
pub fn worst_r_prime_power(
    table: &mut EigenvalueTable,
    p: u64,
    m: u32,
) -> Result<(ExtRational, i32), SurjectivityError> {
    let ap = i128::from(table.ensure(p)?);
    Ok(worst_from(ap, p, m))
}

fn worst_from(ap: i128, p: u64, m: u32) -> (ExtRational, i32) {
    let plus = r_prime_power_from(ap, p, m, 1);
    let minus = r_prime_power_from(ap, p, m, -1);
    match (&plus, &minus) {
        (ExtRational::Infinite, ExtRational::Finite(_)) => (minus, -1),
        (ExtRational::Finite(x), ExtRational::Finite(y)) if y < x => (minus, -1),
        _ => (plus, 1),
    }
}

/// `r̃_c = φ(c) / (2^{2v(c)}·σ₀(c)·√c)` as `coef·√c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TildeR {
    pub coef: Rational,
    pub radicand: u64,
}

impl TildeR {
    pub fn new(c: u64) -> Self {
        let f = factorize(c).expect("c >= 1");
        let v = f.distinct_primes();
        let den = 4i64.pow(v) * f.sigma0() as i64 * c as i64;
        // φ(c)/(4^v σ₀ √c) = φ(c)/(4^v σ₀ c)·√c, then pull square factors out of √c
        let s = f.square_root_part();
        let radicand = c / (s * s);
        TildeR { coef: frac(f.euler_phi() as i64 * s as i64, den), radicand }
    }

    pub fn exceeds(&self, a: &Rational) -> bool {
        rational::sum_with_sqrt_exceeds(&Rational::zero(), &self.coef, self.radicand, a)
    }

    pub fn to_f64(&self) -> f64 {
        rational::to_f64(&self.coef) * (self.radicand as f64).sqrt()
    }
}

pub fn tilde_r(c: u64) -> TildeR {
    TildeR::new(c)
}

/// `true` when `r̃_{p^m} > a` (exact).
fn tilde_exceeds(p: u64, m: u32, a: &Rational) -> bool {
    TildeR::new(p.pow(m)).exceeds(a)
}

/// `true` when the Deligne bound `r_{p^m} ≥ φ(p^m) / ((m+1)p^{m/2} + 2m·p^{(m−1)/2} + (m−1)p^{(m−2)/2})`
/// already exceeds `a`.
fn deligne_excludes(p: u64, m: u32, a: &Rational) -> bool {
    // denominator as X + Y√p
    let pi = |k: u32| int(p.pow(k) as i64);
    let mut x = Rational::zero();
    let mut y = Rational::zero();
    let mut add = |coef: i64, twice_exp: i64| {
        if coef == 0 || twice_exp < 0 {
            return;
        }
        let k = (twice_exp / 2) as u32;
        if twice_exp % 2 == 0 {
            x += int(coef) * pi(k);
        } else {
            y += int(coef) * pi(k);
        }
    };
    let m64 = i64::from(m);
    add(m64 + 1, m64);
    add(2 * m64, m64 - 1);
    add(m64 - 1, m64 - 2);
    let phi = int((p.pow(m) - p.pow(m - 1)) as i64);
    // φ > a·(X + Y√p)  ⟺  −aX − aY√p > −φ
    rational::sum_with_sqrt_exceeds(&-(a * &x), &-(a * &y), p, &-phi)
}

/// Largest integer `p` with `(p − 1)² <= 64a²p`, i.e. `r̃_p <= a`.
pub fn p_cutoff(a: &Rational) -> u64 {
    let a2 = a * a * int(64);
    let fits = |p: u64| int(((p - 1) * (p - 1)) as i64) <= &a2 * int(p as i64);
    let mut p = 1u64;
    while fits(p + 1) {
        p += 1;
    }
    p
}

/// `((4a + √(16a² + 4))/2)²`, the root of `(p − 1)/(4√p) = a`; reported alongside [`p_cutoff`].
pub fn p_cutoff_published(a: &Rational) -> f64 {
    let a = rational::to_f64(a);
    ((4.0 * a + (16.0 * a * a + 4.0).sqrt()) / 2.0).powi(2)
}

/// `M_{p,a}`: every `m > M_{p,a}` has `r̃_{p^m} > a`.
pub fn m_cutoff(p: u64, a: &Rational) -> u32 {
    let start = if p == 2 { 2 } else { 1 };
    let mut m = start;
    while !tilde_exceeds(p, m, a) {
        m += 1;
    }
    (m - 1).max(if p == 2 { 1 } else { 0 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub p: u64,
    pub m: u32,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub r: Rational,
    pub sign: i32,
}

/// `C_a = {(p, m) : min_ε r_{p^m} <= a}`, `p ≠ ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub a: Rational,
    pub p_cutoff: u64,
    pub p_cutoff_published: f64,
    pub entries: Vec<Candidate>,
    /// Pairs evaluated exactly with eigenvalues.
    pub evaluated: usize,
    /// Pairs discarded by the Deligne bound alone.
    pub discarded_by_bound: usize,
}

/// `(p, m)` pairs inside the `P_a`/`M_{p,a}` window not already excluded
/// by the Deligne bound.
fn window(ell: u64, a: &Rational) -> (u64, Vec<(u64, u32)>, usize) {
    let pa = p_cutoff(a);
    let mut pairs = Vec::new();
    let mut discarded = 0;
    // p = 2, 3 are always inspected: r̃ is not monotone in m from m = 1 there
    for p in arith::primes_up_to(pa.max(3)) {
        if p == ell {
            continue;
        }
        for m in 1..=m_cutoff(p, a) {
            if deligne_excludes(p, m, a) {
                discarded += 1;
            } else {
                pairs.push((p, m));
            }
        }
    }
    (pa, pairs, discarded)
}

pub fn candidate_set(
    table: &mut EigenvalueTable,
    a: &Rational,
    exec: Execution,
) -> Result<CandidateSet, SurjectivityError> {
    if !a.is_positive() {
        return Err(SurjectivityError::Precondition("threshold a must be positive".into()));
    }
    let (pa, pairs, discarded) = window(table.ell(), a);
    let primes: Vec<u64> = pairs.iter().map(|&(p, _)| p).collect();
    table.ensure_all(&primes, exec)?;
    let mut entries = Vec::new();
    for &(p, m) in &pairs {
        let (r, sign) = worst_r_prime_power(table, p, m)?;
        if let ExtRational::Finite(r) = r {
            if &r <= a {
                entries.push(Candidate { p, m, r, sign });
            }
        }
    }
    Ok(CandidateSet {
        a: a.clone(),
        p_cutoff: pa,
        p_cutoff_published: p_cutoff_published(a),
        entries,
        evaluated: pairs.len(),
        discarded_by_bound: discarded,
    })
}

/// `r_min = Π_p min_{m≥0} r_{p^m}` with the per-prime minima below 1.
pub fn r_min(
    table: &mut EigenvalueTable,
    exec: Execution,
) -> Result<(Rational, BTreeMap<u64, Rational>), SurjectivityError> {
    let c1 = candidate_set(table, &Rational::one(), exec)?;
    let mut minima: BTreeMap<u64, Rational> = BTreeMap::new();
    for cand in c1.entries {
        let e = minima.entry(cand.p).or_insert_with(Rational::one);
        if cand.r < *e {
            *e = cand.r;
        }
    }
    minima.retain(|_, v| *v < Rational::one());
    let prod = minima.values().fold(Rational::one(), |acc, v| acc * v);
    Ok((prod, minima))
}

/// A conductor found by the search, with its worst-case `r_c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub c: u64,
    pub v: u32,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub r_c: Rational,
    /// Sign `ε(p)` realising `r_c`, per prime of `c`.
    pub signs: Vec<(u64, i32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchLevels {
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub threshold: Rational,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub r_min: Rational,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub a: Rational,
    /// `S_v` for `v = 1, 2, …`.
    pub levels: Vec<Vec<u64>>,
    pub nodes: Vec<Node>,
}

impl SearchLevels {
    pub fn conductors(&self) -> Vec<u64> {
        let mut all: Vec<u64> = self.levels.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Depth-first construction of `S_1, S_2, …` for threshold `m`:
/// children of `c'` are `c'·p^m` with `(p, m) ∈ C_{a'}`, `p ∤ c'`,
/// `a' = m / r_{c'}`, kept when `r_{c'p^m} <= m`. Every conductor in the
/// answer is reached: drop its prime power with the largest `r`.
pub fn search_levels(
    table: &mut EigenvalueTable,
    threshold: &Rational,
    exec: Execution,
) -> Result<SearchLevels, SurjectivityError> {
    let (rmin, _) = r_min(table, exec)?;
    let a = threshold / &rmin;
    let mut nodes: BTreeMap<u64, Node> = BTreeMap::new();
    let root = Node { c: 1, v: 0, r_c: Rational::one(), signs: Vec::new() };
    let mut frontier = vec![root];
    let mut levels = Vec::new();
    let mut cache: BTreeMap<Rational, CandidateSet> = BTreeMap::new();
    while !frontier.is_empty() {
        let mut next: BTreeMap<u64, Node> = BTreeMap::new();
        for parent in &frontier {
            // r_{c'p^m} = r_{c'}·r_{p^m} <= m forces r_{p^m} <= m / r_{c'}
            let a_prime = threshold / &parent.r_c;
            let cands = match cache.get(&a_prime) {
                Some(c) => c.clone(),
                None => {
                    let c = candidate_set(table, &a_prime, exec)?;
                    cache.insert(a_prime.clone(), c.clone());
                    c
                }
            };
            for cand in &cands.entries {
                if parent.c % cand.p == 0 {
                    continue;
                }
                let r = &parent.r_c * &cand.r;
                if &r > threshold {
                    continue;
                }
                let c = parent.c * cand.p.pow(cand.m);
                if nodes.contains_key(&c) || next.contains_key(&c) {
                    continue;
                }
                let mut signs = parent.signs.clone();
                signs.push((cand.p, cand.sign));
                signs.sort_unstable();
                next.insert(c, Node { c, v: parent.v + 1, r_c: r, signs });
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next.keys().copied().collect());
        frontier = next.values().cloned().collect();
        nodes.extend(next);
    }
    Ok(SearchLevels { threshold: threshold.clone(), r_min: rmin, a, levels, nodes: nodes.into_values().collect() })
}

/// How the search interprets the quantities it cannot pin down from first principles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assumptions {
    pub sign_convention: String,
    pub conductor_one: String,
    pub thresholds: String,
    pub eigenvalues: String,
    pub p_cutoff: String,
    pub threshold_override: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassThreshold {
    pub gram: TernaryForm,
    pub w: u64,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub m_s: Rational,
    pub count: usize,
    pub max: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Published {
    pub count: usize,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub ell: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub count: usize,
    pub max: Option<u64>,
    pub conductors: Vec<u64>,
    pub classes: Vec<ClassThreshold>,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub threshold: Rational,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub r_min: Rational,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub a: Rational,
    pub candidates: CandidateSet,
    pub levels: Vec<Vec<u64>>,
    pub nodes: Vec<Node>,
    pub eigenvalues: Vec<EigenvalueEntry>,
    pub assumptions: Assumptions,
    pub published: Option<Published>,
    pub matches_published: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    /// Replaces every `m_s` by this value.
    pub threshold: Option<Rational>,
    pub exec: Execution,
}

/// `m_s = max(1, w_{s'}/w_s)` per class of a two-class genus.
pub fn class_thresholds(genus: &GenusRecord) -> Result<Vec<Rational>, SurjectivityError> {
    require_two_classes(genus)?;
    let w: Vec<i64> = genus.classes.iter().map(|c| c.w as i64).collect();
    Ok(vec![frac(w[1], w[0]).max(Rational::one()), frac(w[0], w[1]).max(Rational::one())])
}

pub fn published(ell: u64) -> Option<Published> {
    PUBLISHED.iter().find(|(l, _, _)| *l == ell).map(|&(_, count, max)| Published { count, max })
}

/// Full search for `(ℓ, N = 1)`: per-class thresholds, their union, and the
/// comparison with the published counts.
pub fn dfs_search(
    genus: &GenusRecord,
    ell: u64,
    n: u64,
    table: &mut EigenvalueTable,
    options: &SearchOptions,
) -> Result<SearchReport, SurjectivityError> {
    if n != 1 {
        return Err(SurjectivityError::Precondition(format!("N = {n}: only N = 1 is supported")));
    }
    require_two_classes(genus)?;
    if table.ell() != ell {
        return Err(SurjectivityError::Precondition("eigenvalue table is for a different ell".into()));
    }
    let ms = class_thresholds(genus)?;
    let thresholds: Vec<Rational> = match &options.threshold {
        Some(t) if !t.is_positive() => {
            return Err(SurjectivityError::Precondition("threshold must be positive".into()))
        }
        Some(t) => vec![t.clone(); ms.len()],
        None => ms.clone(),
    };
    let top = thresholds.iter().max().expect("two classes").clone();
    let union = search_levels(table, &top, options.exec)?;
    let mut classes = Vec::new();
    for (i, t) in thresholds.iter().enumerate() {
        let found = if *t == top { union.clone() } else { search_levels(table, t, options.exec)? };
        let cs = found.conductors();
        classes.push(ClassThreshold {
            gram: genus.classes[i].gram,
            w: genus.classes[i].w,
            m_s: t.clone(),
            count: cs.len(),
            max: cs.last().copied(),
        });
    }
    let conductors = union.conductors();
    let candidates = candidate_set(table, &union.a, options.exec)?;
    let published = published(ell);
    let count = conductors.len();
    let max = conductors.last().copied();
    let matches_published = published.map(|p| p.count == count && Some(p.max) == max);
    let assumptions = Assumptions {
        sign_convention: "worst case: at each prime the sign in {+1,-1} minimising r_{p^m} is taken independently".into(),
        conductor_one: "c = 1 is the root S_0 and is not counted".into(),
        thresholds: format!(
            "m_s = max(1, w_s'/w_s) from unit weights {:?}: {}",
            genus.classes.iter().map(|c| c.w).collect::<Vec<_>>(),
            ms.iter().map(rational::to_ratio_string).collect::<Vec<_>>().join(", ")
        ),
        eigenvalues: "a(p) from the cusp part of the theta series via a_g(|D0|p^2) = a_g(|D0|)(a(p) - (D0/p))".into(),
        p_cutoff: "P_a = largest p with (p-1)^2 <= 64 a^2 p; pairs with Deligne lower bound > a are discarded exactly".into(),
        threshold_override: options.threshold.as_ref().map(rational::to_ratio_string),
    };
    Ok(SearchReport {
        ell,
        n,
        count,
        max,
        conductors,
        classes,
        threshold: top,
        r_min: union.r_min.clone(),
        a: union.a.clone(),
        candidates,
        levels: union.levels.clone(),
        nodes: union.nodes.clone(),
        eigenvalues: table.entries(),
        assumptions,
        published,
        matches_published,
    })
}

/// Lemma-form verdict for one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaVerdict {
    pub class: usize,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub m_s: Rational,
    /// `φ(c) > m_s·2^{2v(c)}·σ₀(c)·√c`.
    pub surjective_guaranteed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremVerdict {
    pub class: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// The same comparison with raw automorph counts in `Σ 1/w`.
    pub rhs_automorph_weights: f64,
    pub calibration_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub c: u64,
    pub lemma: Vec<LemmaVerdict>,
    pub theorem: Option<Vec<TheoremVerdict>>,
    pub note: Option<String>,
}

/// Evaluates the lemma-form inequality for every class and, when `d` is
/// given, the general theorem-form inequality with the single cusp line.
pub fn theorem_bound(
    genus: &GenusRecord,
    ell: u64,
    c: u64,
    d: Option<i64>,
) -> Result<BoundReport, SurjectivityError> {
    require_two_classes(genus)?;
    if c == 0 || arith::gcd(c, ell) != 1 {
        return Err(SurjectivityError::Precondition(format!("c = {c} must be positive and prime to ell")));
    }
    let f = factorize(c).expect("c >= 1");
    let v = f.distinct_primes();
    let ms = class_thresholds(genus)?;
    let phi = int(f.euler_phi() as i64);
    let k = int(4i64.pow(v) * f.sigma0() as i64);
    let lemma = ms
        .iter()
        .enumerate()
        .map(|(class, m)| LemmaVerdict {
            class,
            m_s: m.clone(),
            // φ > m·k·√c  ⟺  φ² > m²k²c (all positive)
            surjective_guaranteed: &phi * &phi > m * m * &k * &k * int(c as i64),
        })
        .collect();
    let mut note = None;
    let theorem = match d {
        None => None,
        Some(_) if c <= 2 => {
            note = Some("theorem form requires c > 2".into());
            None
        }
        Some(d) => {
            let params = OrderParams::new(d, 1).map_err(|e| SurjectivityError::Precondition(e.to_string()))?;
            let gamma = binary_qf::gamma_ratio(&params);
            let lhs = (c as f64).sqrt() / (2f64.powi(2 * v as i32 + 1) * f.sigma0() as f64 * (c as f64).ln());
            let mass_w = rational::to_f64(&genus.mass);
            let mass_aut: f64 = genus.classes.iter().map(|c| 1.0 / c.automorphs as f64).sum();
            let mut out = Vec::new();
            for class in 0..genus.len() {
                let ag = rational::to_f64(&cusp_coefficient(genus, class, d.unsigned_abs())?).abs();
                let base = ag / (std::f64::consts::LN_2 * rational::to_f64(&gamma));
                let (rhs, rhs_aut) = (base * mass_w, base * mass_aut);
                out.push(TheoremVerdict {
                    class,
                    lhs,
                    rhs,
                    holds: lhs > rhs,
                    rhs_automorph_weights: rhs_aut,
                    calibration_sensitive: (lhs > rhs) != (lhs > rhs_aut),
                });
            }
            Some(out)
        }
    };
    if c == 1 {
        note = Some("c = 1: phi(1) = 1 never exceeds m_s, no conclusion".into());
    }
    Ok(BoundReport { c, lemma, theorem, note })
}
