//! Imaginary quadratic orders `O_{D,c}`: reduced binary forms, class numbers
//! (by enumeration and by the conductor formula), unit counts.

use crate::arith::{self, factorize, kronecker};
use crate::rational::{frac, Rational};
use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BinaryQfError {
    #[error("discriminant {0} is not negative")]
    NotNegative(i64),
    #[error("discriminant {0} is not congruent to 0 or 1 mod 4")]
    BadResidue(i64),
    #[error("{0} is not a fundamental discriminant")]
    NotFundamental(i64),
    #[error("conductor must be positive")]
    ZeroConductor,
    #[error("D·c² overflows for D = {d}, c = {c}")]
    Overflow { d: i64, c: u64 },
}

/// A pair `(D, c)`: negative fundamental discriminant and conductor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OrderParams {
    #[serde(rename = "D")]
    d: i64,
    c: u64,
}

impl OrderParams {
    pub fn new(d: i64, c: u64) -> Result<Self, BinaryQfError> {
        if d >= 0 {
            return Err(BinaryQfError::NotNegative(d));
        }
        if !matches!(d.rem_euclid(4), 0 | 1) {
            return Err(BinaryQfError::BadResidue(d));
        }
        if !arith::is_negative_fundamental(d) {
            return Err(BinaryQfError::NotFundamental(d));
        }
        if c == 0 {
            return Err(BinaryQfError::ZeroConductor);
        }
        let c2 = i64::try_from(c)
            .ok()
            .and_then(|c| c.checked_mul(c))
            .and_then(|c2| c2.checked_mul(d))
            .ok_or(BinaryQfError::Overflow { d, c })?;
        debug_assert!(c2 < 0);
        Ok(Self { d, c })
    }

    pub fn fundamental(&self) -> i64 {
        self.d
    }

    pub fn conductor(&self) -> u64 {
        self.c
    }

    /// Discriminant of the order, `D·c²`.
    pub fn discriminant(&self) -> i64 {
        self.d * (self.c * self.c) as i64
    }

    /// `d_c = -D·c²`.
    pub fn dc(&self) -> u64 {
        self.discriminant().unsigned_abs()
    }

    pub fn with_conductor(&self, c: u64) -> Result<Self, BinaryQfError> {
        Self::new(self.d, c)
    }
}

/// Binary form `a x² + b xy + c y²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BinaryForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl BinaryForm {
    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_primitive(&self) -> bool {
        self.a.gcd(&self.b).gcd(&self.c) == 1
    }

    pub fn is_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        a > 0 && b.abs() <= a && a <= c && !((b.abs() == a || a == c) && b < 0)
    }

    pub fn eval(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }
}

fn check_discriminant(disc: i64) -> Result<(), BinaryQfError> {
    if disc >= 0 {
        return Err(BinaryQfError::NotNegative(disc));
    }
    if !matches!(disc.rem_euclid(4), 0 | 1) {
        return Err(BinaryQfError::BadResidue(disc));
    }
    Ok(())
}

/// Primitive reduced forms of discriminant `disc`, one per proper class,
/// sorted lexicographically by `(a, b, c)`.
pub fn reduced_forms(disc: i64) -> Result<Vec<BinaryForm>, BinaryQfError> {
    check_discriminant(disc)?;
    let n = disc.unsigned_abs();
    let a_max = arith::isqrt(u128::from(n / 3)) as i64;
    let mut out = Vec::new();
    for a in 1..=a_max {
        for b in -a..=a {
            let num = b * b - disc;
            if num % (4 * a) != 0 {
                continue;
            }
            let form = BinaryForm { a, b, c: num / (4 * a) };
            if form.is_reduced() && form.is_primitive() {
                out.push(form);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Class number of primitive forms of discriminant `disc` by enumeration.
pub fn class_number(disc: i64) -> Result<u64, BinaryQfError> {
    reduced_forms(disc).map(|v| v.len() as u64)
}

/// `#O^×` for the order of discriminant `disc`.
pub fn units_of_discriminant(disc: i64) -> u64 {
    match disc {
        -3 => 6,
        -4 => 4,
        _ => 2,
    }
}

/// `u_{D,c}`, the order of the unit group of `O_{D,c}`.
pub fn unit_count(params: &OrderParams) -> u64 {
    units_of_discriminant(params.discriminant())
}

/// `h(D)` for a fundamental `D < 0` via Dirichlet's class number formula
/// `h(D) = -(u / 2|D|) Σ_{a=1}^{|D|} (D/a)·a`.
pub fn fundamental_class_number(d: i64) -> Result<u64, BinaryQfError> {
    if !arith::is_negative_fundamental(d) {
        return Err(BinaryQfError::NotFundamental(d));
    }
    let m = d.abs();
    let s: i64 = (1..m).map(|a| i64::from(kronecker(d, a)) * a).sum();
    let u = units_of_discriminant(d) as i64;
    let num = -u * s;
    debug_assert_eq!(num % (2 * m), 0);
    Ok((num / (2 * m)) as u64)
}

/// `h(O_{D,c})` from the conductor formula
/// `h(D)·c / [O_D^× : O_{D,c}^×] · Π_{p|c} (1 - (D/p)/p)`.
pub fn class_number_order(params: &OrderParams) -> u64 {
    let h = fundamental_class_number(params.fundamental()).expect("validated");
    let u1 = units_of_discriminant(params.fundamental());
    let uc = unit_count(params);
    let mut num = h * uc;
    let fac = factorize(params.conductor()).expect("conductor is positive");
    for &(p, e) in fac.factors() {
        let chi = kronecker(params.fundamental(), p as i64) as i64;
        num *= p.pow(e - 1) * (p as i64 - chi) as u64;
    }
    debug_assert_eq!(num % u1, 0);
    num / u1
}

/// `#Γ_{D,c}`: size of a Galois orbit of Heegner points, `#Pic(O_{D,c})`.
pub fn gamma_size(params: &OrderParams) -> u64 {
    class_number_order(params)
}

/// `#Γ_{D,c} / u_{D,c}` as an exact rational.
pub fn gamma_ratio(params: &OrderParams) -> Rational {
    frac(gamma_size(params) as i64, unit_count(params) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bf(a: i64, b: i64, c: i64) -> BinaryForm {
        BinaryForm { a, b, c }
    }

    #[test]
    fn reduced_form_examples() {
        assert_eq!(reduced_forms(-4).unwrap(), vec![bf(1, 0, 1)]);
        assert_eq!(
            reduced_forms(-23).unwrap(),
            vec![bf(1, 1, 6), bf(2, -1, 3), bf(2, 1, 3)]
        );
        assert_eq!(reduced_forms(-12).unwrap(), vec![bf(1, 0, 3)]);
        assert_eq!(reduced_forms(5), Err(BinaryQfError::NotNegative(5)));
        assert_eq!(reduced_forms(-6), Err(BinaryQfError::BadResidue(-6)));
    }

    #[test]
    fn class_number_examples() {
        let p = |d, c| OrderParams::new(d, c).unwrap();
        assert_eq!(class_number_order(&p(-3, 1)), 1);
        assert_eq!(class_number_order(&p(-3, 2)), 1);
        assert_eq!(class_number_order(&p(-4, 1)), 1);
        assert_eq!(gamma_size(&p(-23, 1)), 3);
        assert_eq!(class_number(-23), Ok(3));
    }

    /// Units of the order: solutions of the principal form = 1.
    fn units_by_count(disc: i64) -> u64 {
        let principal = reduced_forms(disc).unwrap()[0];
        let mut count = 0;
        for x in -3i64..=3 {
            for y in -3i64..=3 {
                if principal.eval(x, y) == 1 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn unit_count_examples() {
        let p = |d, c| OrderParams::new(d, c).unwrap();
        assert_eq!(unit_count(&p(-3, 1)), 6);
        assert_eq!(unit_count(&p(-4, 1)), 4);
        assert_eq!(unit_count(&p(-3, 2)), 2);
        for (d, c) in [(-3, 1), (-4, 1), (-3, 2), (-4, 3), (-7, 1), (-23, 5)] {
            let params = p(d, c);
            assert_eq!(unit_count(&params), units_by_count(params.discriminant()));
        }
    }

    #[test]
    fn gamma_ratio_example() {
        // #Γ_{-3,2}/u_{-3,2} = 2·(1 - (-3/2)/2)·#Γ_{-3,1}/u_{-3,1} = 1/2
        let lhs = gamma_ratio(&OrderParams::new(-3, 2).unwrap());
        let rhs = frac(2, 1) * frac(3, 2) * frac(1, 6);
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, frac(1, 2));
    }

    #[test]
    fn gamma_ratio_prime_power_identity() {
        for d in arith::negative_fundamentals(100) {
            let base = gamma_ratio(&OrderParams::new(d, 1).unwrap());
            for p in arith::primes_up_to(13) {
                let chi = kronecker(d, p as i64) as i64;
                for k in 1..=3u32 {
                    let pk = p.pow(k);
                    let lhs = gamma_ratio(&OrderParams::new(d, pk).unwrap());
                    let rhs =
                        frac(pk as i64, 1) * (frac(1, 1) - frac(chi, p as i64)) * base.clone();
                    assert_eq!(lhs, rhs, "D = {d}, p^k = {pk}");
                }
            }
        }
    }

    #[test]
    fn dirichlet_formula_matches_enumeration() {
        for d in arith::negative_fundamentals(500) {
            assert_eq!(
                fundamental_class_number(d).unwrap(),
                class_number(d).unwrap(),
                "D = {d}"
            );
        }
    }

    #[test]
    fn reduced_forms_are_reduced_primitive_and_correct_discriminant() {
        for disc in (3..2000i64).map(|n| -n).filter(|d| matches!(d.rem_euclid(4), 0 | 1)) {
            for f in reduced_forms(disc).unwrap() {
                assert!(f.is_reduced() && f.is_primitive());
                assert_eq!(f.discriminant(), disc);
            }
        }
    }

    #[test]
    fn order_params_validation() {
        assert_eq!(OrderParams::new(-12, 1), Err(BinaryQfError::NotFundamental(-12)));
        assert_eq!(OrderParams::new(-3, 0), Err(BinaryQfError::ZeroConductor));
        assert_eq!(OrderParams::new(5, 1), Err(BinaryQfError::NotNegative(5)));
        assert_eq!(OrderParams::new(-6, 1), Err(BinaryQfError::BadResidue(-6)));
        let p = OrderParams::new(-3, 5).unwrap();
        assert_eq!(p.discriminant(), -75);
        assert_eq!(p.dc(), 75);
    }
}
