//! Deterministic integer primitives: factorization by trial division,
//! the Kronecker symbol, and the multiplicative functions built on them.

use num_integer::Integer;
use thiserror::Error;

/// Largest argument accepted by [`factorize`].
pub const FACTOR_LIMIT: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("argument must be a positive integer, got 0")]
    Zero,
    #[error("{0} exceeds the supported range 2^63")]
    TooLarge(u64),
}

/// Prime factorization `n = Π p^e` with primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    n: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Exponent of `p` in `n` (0 when `p` does not divide `n`).
    pub fn valuation(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Number of distinct prime divisors, `v(n)`.
    pub fn distinct_primes(&self) -> u32 {
        self.factors.len() as u32
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn moebius(&self) -> i32 {
        if !self.is_squarefree() {
            return 0;
        }
        if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn sigma0(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| u64::from(e) + 1).product()
    }

    pub fn euler_phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    /// All positive divisors in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let current = divs.clone();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                divs.extend(current.iter().map(|d| d * pk));
            }
        }
        divs.sort_unstable();
        divs
    }

    /// Squarefree divisors paired with their Möbius value.
    pub fn squarefree_divisors(&self) -> Vec<(u64, i32)> {
        let mut out = vec![(1u64, 1i32)];
        for &(p, _) in &self.factors {
            let current = out.clone();
            out.extend(current.into_iter().map(|(d, mu)| (d * p, -mu)));
        }
        out.sort_unstable();
        out
    }

    /// Largest `e` with `e^2 | n`, i.e. the square part root.
    pub fn square_root_part(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| p.pow(e / 2)).product()
    }
}

/// Factorizes `n` by trial division.
pub fn factorize(n: u64) -> Result<Factorization, ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    if n > FACTOR_LIMIT {
        return Err(ArithError::TooLarge(n));
    }
    let mut factors = Vec::new();
    let mut m = n;
    for p in [2u64, 3] {
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    // 6k ± 1 wheel
    let mut p = 5u64;
    while p <= m / p {
        for q in [p, p + 2] {
            if m % q == 0 {
                let mut e = 0;
                while m % q == 0 {
                    m /= q;
                    e += 1;
                }
                factors.push((q, e));
            }
        }
        p += 6;
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Ok(Factorization { n, factors })
}

pub fn moebius(n: u64) -> Result<i32, ArithError> {
    factorize(n).map(|f| f.moebius())
}

pub fn sigma0(n: u64) -> Result<u64, ArithError> {
    factorize(n).map(|f| f.sigma0())
}

pub fn euler_phi(n: u64) -> Result<u64, ArithError> {
    factorize(n).map(|f| f.euler_phi())
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    matches!(factorize(n), Ok(f) if f.factors.len() == 1 && f.factors[0].1 == 1)
}

/// Primes `p <= bound`, sieve of Eratosthenes.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    primes
}

/// Floor of the square root.
pub fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// `Some(r)` when `n = r^2`.
pub fn exact_sqrt(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let r = isqrt(n as u128) as i128;
    (r * r == n).then_some(r)
}

/// Kronecker symbol `(a/n)` for arbitrary integers.
///
/// Conventions: `(a/0) = [a = ±1]`, `(a/-1) = sign(a)` (with `(0/-1) = 1`),
/// `(a/2)` from `a mod 8`.
pub fn kronecker(a: i64, n: i64) -> i32 {
    let mut a = i128::from(a);
    let mut n = i128::from(n);
    if n == 0 {
        return i32::from(a == 1 || a == -1);
    }
    let mut sign = 1;
    if n < 0 {
        n = -n;
        if a < 0 {
            sign = -1;
        }
    }
    // strip powers of two from n
    let twos = n.trailing_zeros();
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        n >>= twos;
        if twos % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
            sign = -sign;
        }
    }
    // Jacobi symbol (a/n) for odd positive n
    a = a.rem_euclid(n);
    while a != 0 {
        let t = a.trailing_zeros();
        a >>= t;
        if t % 2 == 1 && matches!(n % 8, 3 | 5) {
            sign = -sign;
        }
        if a % 4 == 3 && n % 4 == 3 {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        sign
    } else {
        0
    }
}

/// `true` for negative fundamental discriminants.
pub fn is_negative_fundamental(d: i64) -> bool {
    if d >= 0 {
        return false;
    }
    let m = d.unsigned_abs();
    match d.rem_euclid(4) {
        1 => factorize(m).map(|f| f.is_squarefree()).unwrap_or(false),
        0 => {
            let q = m / 4;
            // D/4 ≡ 2, 3 mod 4 in terms of D/4 itself (negative)
            let r = (d / 4).rem_euclid(4);
            (r == 2 || r == 3) && factorize(q).map(|f| f.is_squarefree()).unwrap_or(false)
        }
        _ => false,
    }
}

/// Negative fundamental discriminants `d` with `-bound <= d < 0`, descending.
pub fn negative_fundamentals(bound: u64) -> Vec<i64> {
    (1..=bound as i64)
        .map(|m| -m)
        .filter(|&d| is_negative_fundamental(d))
        .collect()
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn divisors_by_scan(n: u64) -> Vec<u64> {
        (1..=n).filter(|d| n % d == 0).collect()
    }

    #[test]
    fn factorization_examples() {
        assert_eq!(factorize(484).unwrap().factors(), &[(2, 2), (11, 2)]);
        assert!(factorize(1).unwrap().factors().is_empty());
        assert_eq!(
            factorize(5124).unwrap().factors(),
            &[(2, 2), (3, 1), (7, 1), (61, 1)]
        );
        assert_eq!(factorize(0), Err(ArithError::Zero));
    }

    #[test]
    fn factorization_matches_trial_scan() {
        for n in 1..3000u64 {
            let f = factorize(n).unwrap();
            let product: u64 = f.factors().iter().map(|&(p, e)| p.pow(e)).product();
            assert_eq!(product, n);
            assert!(f.factors().windows(2).all(|w| w[0].0 < w[1].0));
            assert_eq!(f.divisors(), divisors_by_scan(n));
        }
    }

    #[test]
    fn multiplicative_function_examples() {
        assert_eq!(moebius(30), Ok(-1));
        assert_eq!(sigma0(5124), Ok(divisors_by_scan(5124).len() as u64));
        assert_eq!(sigma0(5124), Ok(24));
        assert_eq!(euler_phi(11), Ok(10));
        assert_eq!(euler_phi(0), Err(ArithError::Zero));
        assert_eq!(moebius(0), Err(ArithError::Zero));
    }

    #[test]
    fn kronecker_examples() {
        for n in -50..50 {
            if n != 0 {
                assert_eq!(kronecker(1, n), 1);
            }
        }
        assert_eq!(kronecker(-3, 2), -1);
        assert_eq!(kronecker(-3, 11), -1);
        assert_eq!(kronecker(5, 0), 0);
        assert_eq!(kronecker(-1, 0), 1);
        assert_eq!(kronecker(-7, -1), -1);
        assert_eq!(kronecker(7, -1), 1);
    }

    #[test]
    fn kronecker_agrees_with_euler_criterion() {
        for p in primes_up_to(200).into_iter().filter(|&p| p > 2) {
            for a in -300i64..300 {
                let r = a.rem_euclid(p as i64) as u64;
                let euler = if r == 0 {
                    0
                } else {
                    let mut acc = 1u64;
                    for _ in 0..(p - 1) / 2 {
                        acc = acc * r % p;
                    }
                    if acc == 1 {
                        1
                    } else {
                        -1
                    }
                };
                assert_eq!(kronecker(a, p as i64), euler, "({a}/{p})");
            }
        }
    }

    #[test]
    fn moebius_sums_vanish() {
        for n in 1..=10_000u64 {
            let f = factorize(n).unwrap();
            let s: i32 = f.divisors().iter().map(|&d| moebius(d).unwrap()).sum();
            assert_eq!(s, i32::from(n == 1), "n = {n}");
        }
    }

    #[test]
    fn kronecker_multiplicative_on_grid() {
        for a in -100i64..100 {
            for b in -100i64..100 {
                for n in [1i64, 2, 3, 4, 5, 8, 9, 12, 15, 16, 21, 97, -1, -6] {
                    // (0/-1) = 1 breaks multiplicativity in the top argument
                    if n < 0 && a * b == 0 {
                        continue;
                    }
                    assert_eq!(
                        kronecker(a * b, n),
                        kronecker(a, n) * kronecker(b, n),
                        "top ({a}*{b}/{n})"
                    );
                }
            }
        }
        for a in [-23i64, -15, -8, -7, -4, -3, 0, 1, 2, 5, 12, 17] {
            for m in -100i64..100 {
                for n in -100i64..100 {
                    if m == 0 || n == 0 {
                        continue;
                    }
                    assert_eq!(
                        kronecker(a, m * n),
                        kronecker(a, m) * kronecker(a, n),
                        "bottom ({a}/{m}*{n})"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_exceeds_elementary_bound() {
        let half_log2 = std::f64::consts::LN_2 / 2.0;
        for c in 3..=100_000u64 {
            let phi = euler_phi(c).unwrap() as f64;
            let bound = half_log2 * c as f64 / (c as f64).ln();
            assert!(phi > bound, "c = {c}");
        }
    }

    #[test]
    fn fundamental_discriminants() {
        let small: Vec<i64> = negative_fundamentals(24);
        assert_eq!(small, vec![-3, -4, -7, -8, -11, -15, -19, -20, -23, -24]);
        assert!(!is_negative_fundamental(-12));
        assert!(!is_negative_fundamental(-16));
        assert!(is_negative_fundamental(-56));
    }

    #[test]
    fn sqrt_helpers() {
        assert_eq!(isqrt(99), 9);
        assert_eq!(isqrt(100), 10);
        assert_eq!(exact_sqrt(144), Some(12));
        assert_eq!(exact_sqrt(145), None);
        assert_eq!(exact_sqrt(-4), None);
    }
}
