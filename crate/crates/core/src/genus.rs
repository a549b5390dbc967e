//! Genera of positive ternary forms: local Jordan symbols, class enumeration
//! for a fixed determinant, the Gross genus of supersingular points, and
//! genus-averaged representation numbers.

use crate::arith::{self, factorize, kronecker};
use crate::exec::Execution;
use crate::rational::{self, frac, Rational};
use crate::ternary_qf::{Matrix, TernaryError, TernaryForm};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Largest determinant accepted by [`enumerate_classes`].
pub const MAX_DISC: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenusError {
    #[error("determinant {0} outside 1..={MAX_DISC}")]
    DiscOutOfRange(u64),
    #[error("only N = 1 is supported (got N = {0})")]
    UnsupportedLevel(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("no qualifying genus for ell = {ell}:\n{report}")]
    NoQualifyingGenus { ell: u64, report: String },
    #[error("ambiguous genus for ell = {ell}:\n{report}")]
    Ambiguous { ell: u64, report: String },
    #[error("mass {mass} is not (ell-1)/24 = {target} up to an integral factor")]
    MassCalibration { mass: String, target: String },
    #[error(transparent)]
    Form(#[from] TernaryError),
}

impl GenusError {
    /// `true` for bad input, `false` for a failed internal consistency check.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            GenusError::DiscOutOfRange(_) | GenusError::UnsupportedLevel(_) | GenusError::NotPrime(_) | GenusError::Form(_)
        )
    }
}

type Q = Ratio<i128>;

fn valuation(x: &Q, p: i128) -> Option<i32> {
    if x.is_zero() {
        return None;
    }
    let mut v = 0;
    let (mut n, mut d) = (*x.numer(), *x.denom());
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    while d % p == 0 {
        d /= p;
        v -= 1;
    }
    Some(v)
}

/// Unit part `x / p^v(x)` reduced modulo `m` (with `p ∤ m·den`).
fn unit_mod(x: &Q, p: i128, m: i128) -> i128 {
    let v = valuation(x, p).expect("nonzero");
    let scaled = if v >= 0 {
        x / Q::from_integer(p.pow(v as u32))
    } else {
        x * Q::from_integer(p.pow((-v) as u32))
    };
    let n = scaled.numer().rem_euclid(m);
    let d = scaled.denom().rem_euclid(m);
    // d is a unit mod m; invert by search (m is tiny here)
    let inv = (1..m).find(|i| (d * i).rem_euclid(m) == 1).expect("unit");
    (n * inv).rem_euclid(m)
}

/// One block of a `p`-adic Jordan splitting: `1×1` or (at `p = 2`) an even `2×2`.
#[derive(Debug, Clone)]
struct Block {
    scale: i32,
    entries: Vec<Vec<Q>>,
}

impl Block {
    fn det(&self) -> Q {
        match self.entries.len() {
            1 => self.entries[0][0],
            _ => self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0],
        }
    }
}

/// `ℤ_p`-Jordan splitting of an integral symmetric matrix by exact
/// elimination with `p`-adically minimal pivots.
fn jordan_blocks(gram: &Matrix, p: u64) -> Vec<Block> {
    let p = p as i128;
    let mut m: Vec<Vec<Q>> = gram
        .iter()
        .map(|r| r.iter().map(|&x| Q::from_integer(i128::from(x))).collect())
        .collect();
    let mut active: Vec<usize> = vec![0, 1, 2];
    let mut blocks = Vec::new();
    while !active.is_empty() {
        let mut best: Option<(i32, usize, usize)> = None;
        for &i in &active {
            for &j in &active {
                if let Some(v) = valuation(&m[i][j], p) {
                    // prefer diagonal pivots at equal valuation
                    let better = match best {
                        None => true,
                        Some((bv, bi, bj)) => v < bv || (v == bv && i == j && bi != bj),
                    };
                    if better {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, i, j)) = best else {
            unreachable!("nondegenerate matrix");
        };
        if i == j || p != 2 {
            let i = if i == j {
                i
            } else {
                // b_i += b_j gives a diagonal entry of valuation v for odd p
                for k in 0..3 {
                    let t = m[j][k];
                    m[i][k] += t;
                }
                for k in 0..3 {
                    let t = m[k][j];
                    m[k][i] += t;
                }
                i
            };
            let piv = m[i][i];
            let rest: Vec<usize> = active.iter().copied().filter(|&k| k != i).collect();
            for &r in &rest {
                let f = m[r][i] / piv;
                for &c in &rest {
                    let t = f * m[i][c];
                    m[r][c] -= t;
                }
            }
            for &r in &rest {
                m[r][i] = Q::zero();
                m[i][r] = Q::zero();
            }
            blocks.push(Block { scale: v, entries: vec![vec![piv]] });
            active = rest;
        } else {
            let b = [[m[i][i], m[i][j]], [m[j][i], m[j][j]]];
            let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
            let inv = [[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]];
            let rest: Vec<usize> = active.iter().copied().filter(|&k| k != i && k != j).collect();
            for &r in &rest {
                let row = [m[r][i], m[r][j]];
                let f = [
                    row[0] * inv[0][0] + row[1] * inv[1][0],
                    row[0] * inv[0][1] + row[1] * inv[1][1],
                ];
                for &c in &rest {
                    let t = f[0] * m[i][c] + f[1] * m[j][c];
                    m[r][c] -= t;
                }
            }
            blocks.push(Block { scale: v, entries: vec![b[0].to_vec(), b[1].to_vec()] });
            active = rest;
        }
    }
    blocks
}

/// One Jordan constituent `2^scale`-modular (or `p^scale`) of rank `rank`.
///
/// `sign` is the Legendre symbol of the unit determinant for odd `p`, and the
/// Conway–Sloane sign `ε = (2 / unit det)` at `p = 2`, where `odd` is the type
/// (true for type I) and `oddity` the trace of the unit diagonal mod 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Constituent {
    pub scale: u32,
    pub rank: u32,
    pub sign: i8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub odd: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oddity: Option<u8>,
}

/// Local symbol at one prime.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LocalSymbol {
    pub p: u64,
    pub constituents: Vec<Constituent>,
}

impl fmt::Display for LocalSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}:", self.p)?;
        for c in &self.constituents {
            let s = if c.sign > 0 { '+' } else { '-' };
            write!(f, " {}^{}{}{}", self.p, c.scale, s, c.rank)?;
            match (c.odd, c.oddity) {
                (Some(true), Some(t)) => write!(f, "_{t}")?,
                (Some(false), _) => write!(f, "_II")?,
                _ => {}
            }
        }
        Ok(())
    }
}

/// Local symbols at every `p | 2·det`, 2-adic part in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GenusSymbol {
    pub disc: i64,
    pub locals: Vec<LocalSymbol>,
}

impl GenusSymbol {
    pub fn at(&self, p: u64) -> Option<&LocalSymbol> {
        self.locals.iter().find(|l| l.p == p)
    }
}

impl fmt::Display for GenusSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.locals.iter().map(|l| l.to_string()).collect();
        write!(f, "det={} [{}]", self.disc, parts.join("; "))
    }
}

/// Jordan symbol at an odd prime `p`: `(scale, rank, (unit det / p))`.
pub fn odd_local_symbol(gram: &Matrix, p: u64) -> LocalSymbol {
    assert!(p % 2 == 1 && arith::is_prime(p));
    let mut by_scale: BTreeMap<i32, (u32, i128)> = BTreeMap::new();
    for b in jordan_blocks(gram, p) {
        let u = unit_mod(&b.entries[0][0], p as i128, p as i128);
        let e = by_scale.entry(b.scale).or_insert((0, 1));
        e.0 += 1;
        e.1 = (e.1 * u).rem_euclid(p as i128);
    }
    LocalSymbol {
        p,
        constituents: by_scale
            .into_iter()
            .map(|(k, (rank, u))| Constituent {
                scale: k as u32,
                rank,
                sign: kronecker(u as i64, p as i64) as i8,
                odd: None,
                oddity: None,
            })
            .collect(),
    }
}

/// Raw 2-adic Conway–Sloane data per scale: `(scale, rank, det mod 8, odd, oddity)`.
fn raw_two_adic(gram: &Matrix) -> Vec<(i32, u32, i128, bool, i128)> {
    let mut by_scale: BTreeMap<i32, (u32, Q, bool, i128)> = BTreeMap::new();
    for b in jordan_blocks(gram, 2) {
        let e = by_scale.entry(b.scale).or_insert((0, Q::one(), false, 0));
        e.0 += b.entries.len() as u32;
        e.1 *= b.det();
        if b.entries.len() == 1 {
            e.2 = true;
            e.3 += unit_mod(&b.entries[0][0], 2, 8);
        }
    }
    by_scale
        .into_iter()
        .map(|(k, (rank, det, odd, t))| (k, rank, unit_mod(&det, 2, 8), odd, t.rem_euclid(8)))
        .collect()
}

/// Canonical 2-adic symbol: determinants to signs, oddity fusion over
/// compartments, then sign walking along trains towards the train start.
pub fn two_adic_symbol(gram: &Matrix) -> LocalSymbol {
    let raw = raw_two_adic(gram);
    let mut sym: Vec<(i32, u32, i8, bool, i128)> = raw
        .iter()
        .map(|&(k, n, d, odd, t)| (k, n, if matches!(d, 1 | 7) { 1 } else { -1 }, odd, t))
        .collect();
    // compartments: maximal runs of odd constituents at consecutive scales
    let mut compartments: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < sym.len() {
        if sym[i].3 {
            let mut c = vec![i];
            let mut v = sym[i].0;
            i += 1;
            while i < sym.len() && sym[i].3 && sym[i].0 == v + 1 {
                c.push(i);
                v += 1;
                i += 1;
            }
            compartments.push(c);
        } else {
            i += 1;
        }
    }
    for c in &compartments {
        let total: i128 = c.iter().map(|&i| sym[i].4).sum();
        for &i in c {
            sym[i].4 = 0;
        }
        sym[c[0]].4 = total.rem_euclid(8);
    }
    // trains: broken by two adjacent even constituents (absent scales are even)
    let mut trains: Vec<Vec<usize>> = Vec::new();
    if !sym.is_empty() {
        let mut cur = vec![0];
        for i in 1..sym.len() {
            let (prev, now) = (sym[i - 1], sym[i]);
            let gap = now.0 - prev.0;
            let breaks = gap > 2 || (gap == 2 && !(prev.3 && now.3)) || (!prev.3 && !now.3);
            if breaks {
                trains.push(std::mem::take(&mut cur));
            }
            cur.push(i);
        }
        trains.push(cur);
    }
    for t in &trains {
        for &j in t.iter().skip(1).rev() {
            if sym[j].2 == -1 {
                sym[j].2 = 1;
                sym[j - 1].2 = -sym[j - 1].2;
                // each compartment touched by the walk changes oddity by 4
                for c in compartments.iter().filter(|c| c.contains(&(j - 1)) || c.contains(&j)) {
                    sym[c[0]].4 = (sym[c[0]].4 + 4).rem_euclid(8);
                }
            }
        }
    }
    LocalSymbol {
        p: 2,
        constituents: sym
            .into_iter()
            .map(|(k, n, s, odd, t)| Constituent {
                scale: k as u32,
                rank: n,
                sign: s,
                odd: Some(odd),
                oddity: odd.then_some(t as u8),
            })
            .collect(),
    }
}

/// Local symbol at any prime: odd Jordan symbol or canonical 2-adic symbol.
pub fn local_symbol(gram: &Matrix, p: u64) -> LocalSymbol {
    if p == 2 {
        two_adic_symbol(gram)
    } else {
        odd_local_symbol(gram, p)
    }
}

pub fn genus_symbol(q: &TernaryForm) -> GenusSymbol {
    let disc = q.disc();
    let mut primes: Vec<u64> = factorize(disc as u64).expect("det > 0").primes().collect();
    if !primes.contains(&2) {
        primes.insert(0, 2);
    }
    GenusSymbol {
        disc,
        locals: primes.into_iter().map(|p| local_symbol(q.gram(), p)).collect(),
    }
}

pub fn same_genus(q1: &TernaryForm, q2: &TernaryForm) -> bool {
    genus_symbol(q1) == genus_symbol(q2)
}

/// One representative per `GL₃(ℤ)`-class of positive forms with `det(A) = disc`,
/// as canonical forms in increasing order.
pub fn enumerate_classes(disc: u64) -> Result<Vec<TernaryForm>, GenusError> {
    enumerate_classes_with(disc, 1, Execution::default())
}

/// Scan of candidate reduced coefficients `a <= b <= c`, `|2·A12|, |2·A13| <= a`,
/// `|2·A23| <= b`, `abc <= 2·slack·disc`; `slack > 1` widens the scan and
/// serves as a completeness certificate.
pub fn enumerate_classes_with(
    disc: u64,
    slack: u64,
    exec: Execution,
) -> Result<Vec<TernaryForm>, GenusError> {
    if disc == 0 || disc > MAX_DISC {
        return Err(GenusError::DiscOutOfRange(disc));
    }
    let cap = 2 * slack.max(1) as i64 * disc as i64;
    let d = disc as i64;
    let mut seeds: Vec<(i64, i64)> = Vec::new();
    let mut a = 1;
    while a * a * a <= cap {
        let mut b = a;
        while a * b * b <= cap {
            seeds.push((a, b));
            b += 1;
        }
        a += 1;
    }
    let candidates: Vec<Vec<TernaryForm>> = exec.map(seeds, |(a, b)| {
        let mut out = Vec::new();
        for f in -(a / 2)..=a / 2 {
            let m12 = a * b - f * f;
            for e in -(a / 2)..=a / 2 {
                for dd in -(b / 2)..=b / 2 {
                    // det = m12·c + (2·f·dd·e − a·dd² − b·e²)
                    let rest = 2 * f * dd * e - a * dd * dd - b * e * e;
                    let num = d - rest;
                    if num % m12 != 0 {
                        continue;
                    }
                    let c = num / m12;
                    if c < b || a * b * c > cap {
                        continue;
                    }
                    if let Ok(q) = TernaryForm::from_entries(a, b, c, dd, e, f) {
                        debug_assert_eq!(q.disc(), d);
                        out.push(q.canonical_form().0);
                    }
                }
            }
        }
        out
    });
    let mut classes: Vec<TernaryForm> = candidates.into_iter().flatten().collect();
    classes.sort_unstable();
    classes.dedup();
    Ok(classes)
}

/// A class in a genus, with its automorph count and calibrated unit weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassEntry {
    pub gram: TernaryForm,
    pub automorphs: u64,
    /// `automorphs / weight_factor`: the order of the unit group of the
    /// corresponding maximal order.
    pub w: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenusRecord {
    pub disc: i64,
    pub level: u64,
    pub symbol: GenusSymbol,
    pub classes: Vec<ClassEntry>,
    /// Ratio `|Aut(Q_s)| / w_s`, fixed by the mass calibration.
    pub weight_factor: u64,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub mass: Rational,
}

impl GenusRecord {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn forms(&self) -> Vec<TernaryForm> {
        self.classes.iter().map(|c| c.gram).collect()
    }

    /// Index of the class equivalent to `q`.
    pub fn class_of(&self, q: &TernaryForm) -> Option<usize> {
        let canon = q.canonical_form().0;
        self.classes.iter().position(|c| c.gram.canonical_form().0 == canon)
    }
}

fn describe_genera(genera: &[(GenusSymbol, u64, Vec<TernaryForm>)]) -> String {
    let mut out = String::new();
    for (sym, level, forms) in genera {
        out.push_str(&format!("  level {level}, {} classes, {sym}\n", forms.len()));
    }
    out
}

/// Gross genus for `(ell, N)`: the genus of determinant `4N²ℓ²` with level `Nℓ`
/// whose local symbols at `ℓ` and `2` are those of the Gross lattice.
pub fn gross_genus(ell: u64, n: u64) -> Result<GenusRecord, GenusError> {
    gross_genus_with(ell, n, Execution::default())
}

pub fn gross_genus_with(ell: u64, n: u64, exec: Execution) -> Result<GenusRecord, GenusError> {
    if n != 1 {
        return Err(GenusError::UnsupportedLevel(n));
    }
    if !arith::is_prime(ell) {
        return Err(GenusError::NotPrime(ell));
    }
    let disc = 4 * ell * ell;
    if disc > MAX_DISC {
        return Err(GenusError::DiscOutOfRange(disc));
    }
    let classes = enumerate_classes_with(disc, 1, exec)?;
    let mut genera: Vec<(GenusSymbol, u64, Vec<TernaryForm>)> = Vec::new();
    for q in classes {
        let sym = genus_symbol(&q);
        let level = q.level();
        match genera.iter_mut().find(|(s, _, _)| *s == sym) {
            Some(g) => g.2.push(q),
            None => genera.push((sym, level, vec![q])),
        }
    }
    let ell_ref = gross_local_matrix(ell);
    let two_ref: Matrix = if ell == 2 {
        [[3, 2, 2], [2, 4, 0], [2, 0, 4]]
    } else {
        [[-1, 0, 0], [0, 0, -2], [0, -2, 0]]
    };
    let want_ell = local_symbol(&ell_ref, ell);
    let want_two = two_adic_symbol(&two_ref);
    let qualifying: Vec<&(GenusSymbol, u64, Vec<TernaryForm>)> = genera
        .iter()
        .filter(|(s, level, _)| {
            *level == n * ell && s.at(ell) == Some(&want_ell) && s.at(2) == Some(&want_two)
        })
        .collect();
    let report = || describe_genera(&genera);
    match qualifying.len() {
        0 => Err(GenusError::NoQualifyingGenus { ell, report: report() }),
        1 => {
            let (sym, level, forms) = qualifying[0].clone();
            build_record(sym, level, forms, frac(ell as i64 - 1, 24))
        }
        _ => Err(GenusError::Ambiguous { ell, report: report() }),
    }
}

/// Gram matrix of `G ⊗ ℤ_ℓ` for the maximal order of the ramified quaternion
/// algebra: `(2α, 2β, 2αβ)` with `α² = -ℓ`, `β² = u` for a non-residue `u`,
/// i.e. `4·diag(ℓ, -u, -ℓu)`. For `ℓ ≡ 3 mod 4`, `u = -1` gives `4·diag(ℓ, 1, ℓ)`.
pub fn gross_local_matrix(ell: u64) -> Matrix {
    if ell == 2 {
        return [[3, 2, 2], [2, 4, 0], [2, 0, 4]];
    }
    let e = ell as i64;
    let u = if ell % 4 == 3 {
        -1
    } else {
        (2..e).find(|&u| kronecker(u, e) == -1).expect("odd prime has a non-residue")
    };
    [[4 * e, 0, 0], [0, -4 * u, 0], [0, 0, -4 * e * u]]
}

fn build_record(
    symbol: GenusSymbol,
    level: u64,
    forms: Vec<TernaryForm>,
    target_mass: Rational,
) -> Result<GenusRecord, GenusError> {
    let auts: Vec<u64> = forms.iter().map(|q| q.automorph_count()).collect();
    let raw_mass: Rational = auts.iter().map(|&a| frac(1, a as i64)).sum();
    let factor = &target_mass / &raw_mass;
    let bad = || GenusError::MassCalibration {
        mass: rational::to_ratio_string(&raw_mass),
        target: rational::to_ratio_string(&target_mass),
    };
    if !rational::is_integral(&factor) || !factor.is_positive() {
        return Err(bad());
    }
    let factor: u64 = factor.to_integer().try_into().map_err(|_| bad())?;
    if auts.iter().any(|a| a % factor != 0) {
        return Err(bad());
    }
    let classes: Vec<ClassEntry> = forms
        .into_iter()
        .zip(&auts)
        .map(|(gram, &a)| ClassEntry { gram, automorphs: a, w: a / factor })
        .collect();
    let mass = classes.iter().map(|c| frac(1, c.w as i64)).sum();
    Ok(GenusRecord { disc: symbol.disc, level, symbol, classes, weight_factor: factor, mass })
}

/// `Σ_s r(Q_s, n)/|Aut(Q_s)|` (or with `r*` when `primitive`).
pub fn weighted_rep_sum(genus: &GenusRecord, n: u64, primitive: bool) -> Result<Rational, GenusError> {
    let mut s = Rational::zero();
    for c in &genus.classes {
        let r = if primitive { c.gram.primitive_rep_count(n)? } else { c.gram.rep_count(n)? };
        s += frac(r as i64, c.automorphs as i64);
    }
    Ok(s)
}

/// Genus average `Σ r(Q_s,n)/w_s / Σ 1/w_s`.
pub fn genus_avg(genus: &GenusRecord, n: u64, primitive: bool) -> Result<Rational, GenusError> {
    let total: Rational = genus.classes.iter().map(|c| frac(1, c.automorphs as i64)).sum();
    Ok(weighted_rep_sum(genus, n, primitive)? / total)
}
