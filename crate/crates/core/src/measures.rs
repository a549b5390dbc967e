//! Probability measures on the supersingular classes: the canonical measure
//! `μ_can ∝ 1/w_s` and the Heegner measures `μ_{D,c}`, with the exact
//! distribution-relation check in the two-class case.

use crate::arith::{self, kronecker};
use crate::binary_qf::{self, OrderParams};
use crate::exec::Execution;
use crate::genus::{GenusError, GenusRecord};
use crate::rational::{self, frac, Rational};
use crate::ternary_qf::TernaryForm;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invariant failed: {0}")]
    Invariant(String),
    #[error(transparent)]
    Genus(#[from] GenusError),
}

impl MeasureError {
    pub fn is_validation(&self) -> bool {
        match self {
            MeasureError::Precondition(_) => true,
            MeasureError::Invariant(_) => false,
            MeasureError::Genus(e) => e.is_validation(),
        }
    }
}

/// Exact probability vector indexed by the classes of a genus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measure {
    pub forms: Vec<TernaryForm>,
    pub values: Vec<Rational>,
}

impl Measure {
    pub fn total(&self) -> Rational {
        self.values.iter().sum()
    }
}

/// `μ_can(s) = (1/w_s) / Σ_{s'} 1/w_{s'}`.
pub fn mu_canonical(genus: &GenusRecord) -> Measure {
    let inv: Vec<Rational> = genus.classes.iter().map(|c| frac(1, c.w as i64)).collect();
    let total: Rational = inv.iter().sum();
    Measure { forms: genus.forms(), values: inv.into_iter().map(|x| x / &total).collect() }
}

/// Number of distinct primes of `N`.
fn nu(n: u64) -> u32 {
    arith::factorize(n).expect("N >= 1").distinct_primes()
}

/// Validates `(D, c)` against `(ℓ, N)`: `ℓ` inert in `ℚ(√D)`, `(c, Nℓ) = 1`.
pub fn check_heegner_params(ell: u64, n: u64, params: &OrderParams) -> Result<(), MeasureError> {
    if n != 1 {
        return Err(MeasureError::Precondition(format!("N = {n}: only N = 1 is supported")));
    }
    let d = params.fundamental();
    if kronecker(d, ell as i64) != -1 {
        return Err(MeasureError::Precondition(format!(
            "ell = {ell} is not inert in Q(sqrt({d})): kronecker({d}, {ell}) = {}",
            kronecker(d, ell as i64)
        )));
    }
    if arith::gcd(params.conductor(), n * ell) != 1 {
        return Err(MeasureError::Precondition(format!(
            "gcd(c, N·ell) = gcd({}, {}) != 1",
            params.conductor(),
            n * ell
        )));
    }
    Ok(())
}

/// `μ_{D,c}(s) = u_{D,c}·r*(Q_s, d_c) / (|Aut(Q_s)|·2^{ν(N)}·h(O_{D,c}))`.
///
/// The values are not renormalised: their sum being exactly 1 is checked and
/// a violation is reported as an invariant failure.
pub fn mu_heegner(
    genus: &GenusRecord,
    ell: u64,
    params: &OrderParams,
    n: u64,
) -> Result<Measure, MeasureError> {
    check_heegner_params(ell, n, params)?;
    let u = binary_qf::unit_count(params) as i64;
    let h = binary_qf::class_number_order(params) as i64;
    let scale = 1i64 << nu(n);
    let mut values = Vec::with_capacity(genus.len());
    for c in &genus.classes {
        let r = c.gram.primitive_rep_count(params.dc()).map_err(GenusError::from)?;
        values.push(frac(u * r as i64, c.automorphs as i64 * scale * h));
    }
    let m = Measure { forms: genus.forms(), values };
    let total = m.total();
    if total != frac(1, 1) {
        return Err(MeasureError::Invariant(format!(
            "mu_(D={},c={}) sums to {} instead of 1",
            params.fundamental(),
            params.conductor(),
            rational::to_ratio_string(&total)
        )));
    }
    Ok(m)
}

/// Total variation `½ Σ |m1(s) − m2(s)|`.
pub fn tv_distance(m1: &Measure, m2: &Measure) -> Result<Rational, MeasureError> {
    if m1.forms != m2.forms {
        return Err(MeasureError::Precondition("measures live on different genera".into()));
    }
    let s: Rational = m1.values.iter().zip(&m2.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / frac(2, 1))
}

/// Both sides of `μ_{D,cr} − μ_can = (a(r)/(r+1))·(μ_{D,c} − μ_can)` per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecursionCheck {
    pub holds: bool,
    #[serde(serialize_with = "rational::serialize_ratios")]
    pub lhs: Vec<Rational>,
    #[serde(serialize_with = "rational::serialize_ratios")]
    pub rhs: Vec<Rational>,
}

/// Exact distribution-relation check for a two-class genus at an inert prime `r`
/// with Hecke eigenvalue `a_r`.
pub fn recursion_check(
    genus: &GenusRecord,
    ell: u64,
    params: &OrderParams,
    r: u64,
    a_r: i64,
) -> Result<RecursionCheck, MeasureError> {
    if genus.len() != 2 {
        return Err(MeasureError::Precondition(format!(
            "recursion check needs a two-class genus, got {} classes",
            genus.len()
        )));
    }
    if !arith::is_prime(r) {
        return Err(MeasureError::Precondition(format!("r = {r} is not prime")));
    }
    if kronecker(params.fundamental(), r as i64) != -1 {
        return Err(MeasureError::Precondition(format!(
            "r = {r} is not inert in Q(sqrt({}))",
            params.fundamental()
        )));
    }
    if arith::gcd(r, params.conductor() * ell) != 1 {
        return Err(MeasureError::Precondition(format!("r = {r} divides c·N·ell")));
    }
    let can = mu_canonical(genus);
    let base = mu_heegner(genus, ell, params, 1)?;
    let lifted = mu_heegner(
        genus,
        ell,
        &params
            .with_conductor(params.conductor() * r)
            .map_err(|e| MeasureError::Precondition(e.to_string()))?,
        1,
    )?;
    let factor = frac(a_r, r as i64 + 1);
    let lhs: Vec<Rational> = lifted.values.iter().zip(&can.values).map(|(a, b)| a - b).collect();
    let rhs: Vec<Rational> =
        base.values.iter().zip(&can.values).map(|(a, b)| &factor * (a - b)).collect();
    Ok(RecursionCheck { holds: lhs == rhs, lhs, rhs })
}

/// One class in a serialised measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassValue {
    pub gram: TernaryForm,
    pub w: u64,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub mu: Rational,
}

/// JSON document for `μ_{D,c}` and its distance to `μ_can`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasureReport {
    pub ell: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "D")]
    pub d: i64,
    pub c: u64,
    pub classes: Vec<ClassValue>,
    #[serde(serialize_with = "rational::serialize_ratio")]
    pub tv_to_canonical: Rational,
}

pub fn measure_report(
    genus: &GenusRecord,
    ell: u64,
    params: &OrderParams,
    n: u64,
) -> Result<MeasureReport, MeasureError> {
    let mu = mu_heegner(genus, ell, params, n)?;
    let tv = tv_distance(&mu, &mu_canonical(genus))?;
    Ok(MeasureReport {
        ell,
        n,
        d: params.fundamental(),
        c: params.conductor(),
        classes: genus
            .classes
            .iter()
            .zip(mu.values)
            .map(|(c, mu)| ClassValue { gram: c.gram, w: c.w, mu })
            .collect(),
        tv_to_canonical: tv,
    })
}

/// `tv(μ_{D,c}, μ_can)` for each conductor, computed under `exec`.
pub fn tv_series(
    genus: &GenusRecord,
    ell: u64,
    d: i64,
    conductors: &[u64],
    exec: Execution,
) -> Result<Vec<(u64, Rational)>, MeasureError> {
    let can = mu_canonical(genus);
    let params: Vec<OrderParams> = conductors
        .iter()
        .map(|&c| OrderParams::new(d, c).map_err(|e| MeasureError::Precondition(e.to_string())))
        .collect::<Result<_, _>>()?;
    exec.map(params, |p| {
        let mu = mu_heegner(genus, ell, &p, 1)?;
        Ok((p.conductor(), tv_distance(&mu, &can)?))
    })
    .into_iter()
    .collect()
}

/// `true` when `value ≤ 2√p/(p+1) · base`, decided exactly by squaring.
pub fn within_ramanujan_decay(value: &Rational, base: &Rational, p: u64) -> bool {
    if value.is_negative() || base.is_negative() {
        return false;
    }
    if value.is_zero() {
        return true;
    }
    // value·(p+1) ≤ 2√p·base  ⟺  (value·(p+1))² ≤ 4p·base²
    let lhs = value * frac(p as i64 + 1, 1);
    &lhs * &lhs <= frac(4 * p as i64, 1) * base * base
}
