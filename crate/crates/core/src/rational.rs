//! Exact rationals and the `"p/q"` string encoding used in every report.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serializer;

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `"p/q"` in lowest terms; integers keep the `"/1"` suffix so consumers
/// never see a bare number.
pub fn to_ratio_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"p/q"` or a bare integer.
pub fn parse_ratio(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            (!q.is_zero()).then(|| Rational::new(p, q))
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

pub fn serialize_ratio<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_ratio_string(r))
}

pub fn serialize_ratios<S: Serializer>(rs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(to_ratio_string))
}

pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact test of `x + y·√n > z` for rationals `x, y, z` and `n >= 0`.
pub fn sum_with_sqrt_exceeds(x: &Rational, y: &Rational, n: u64, z: &Rational) -> bool {
    // x + y√n > z  ⟺  y√n > z - x
    let rhs = z - x;
    let n = int(n as i64);
    match (y.is_negative(), rhs.is_negative()) {
        // y√n >= 0 > rhs, strict unless both vanish
        (false, true) => true,
        (false, false) => {
            if y.is_zero() || n.is_zero() {
                return rhs.is_negative();
            }
            y * y * &n > &rhs * &rhs
        }
        (true, false) => false,
        // both sides negative: |y|√n < |rhs|
        (true, true) => y * y * &n < &rhs * &rhs,
    }
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

pub fn is_integral(r: &Rational) -> bool {
    r.denom().is_one()
}
