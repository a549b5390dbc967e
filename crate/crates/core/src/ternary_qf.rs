//! Positive-definite ternary forms `Q(x) = xᵀAx` with integral Gram matrix:
//! exact lattice-point enumeration, theta series, automorphs, level and
//! a canonical form for `GL₃(ℤ)`-equivalence.

use crate::arith::{self, factorize};
use crate::exec::Execution;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest `n` accepted by the representation counters.
pub const MAX_NORM: u64 = 10_000_000;

pub type Vector = [i64; 3];
pub type Matrix = [[i64; 3]; 3];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TernaryError {
    #[error("Gram matrix is not symmetric")]
    NotSymmetric,
    #[error("Gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("norm bound {0} exceeds the limit {MAX_NORM}")]
    BoundTooLarge(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct TernaryForm {
    gram: Matrix,
}

impl TryFrom<Matrix> for TernaryForm {
    type Error = TernaryError;

    fn try_from(gram: Matrix) -> Result<Self, Self::Error> {
        Self::new(gram)
    }
}

impl From<TernaryForm> for Matrix {
    fn from(q: TernaryForm) -> Self {
        q.gram
    }
}

impl TernaryForm {
    pub fn new(gram: Matrix) -> Result<Self, TernaryError> {
        for i in 0..3 {
            for j in 0..3 {
                if gram[i][j] != gram[j][i] {
                    return Err(TernaryError::NotSymmetric);
                }
            }
        }
        let m1 = i128::from(gram[0][0]);
        let m2 = m1 * i128::from(gram[1][1]) - i128::from(gram[0][1]).pow(2);
        if m1 <= 0 || m2 <= 0 || det3(&gram) <= 0 {
            return Err(TernaryError::NotPositiveDefinite);
        }
        Ok(Self { gram })
    }

    /// From `(A11, A22, A33, A23, A13, A12)`.
    pub fn from_entries(
        a11: i64,
        a22: i64,
        a33: i64,
        a23: i64,
        a13: i64,
        a12: i64,
    ) -> Result<Self, TernaryError> {
        Self::new([[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]])
    }

    pub fn diagonal(a: i64, b: i64, c: i64) -> Result<Self, TernaryError> {
        Self::from_entries(a, b, c, 0, 0, 0)
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `det(A)`.
    pub fn disc(&self) -> i64 {
        det3(&self.gram) as i64
    }

    pub fn adjugate(&self) -> Matrix {
        adjugate(&self.gram)
    }

    pub fn eval(&self, x: &Vector) -> i64 {
        self.inner(x, x)
    }

    /// Bilinear form `xᵀAy`.
    pub fn inner(&self, x: &Vector, y: &Vector) -> i64 {
        let mut s = 0;
        for i in 0..3 {
            for j in 0..3 {
                s += x[i] * self.gram[i][j] * y[j];
            }
        }
        s
    }

    /// `UᵀAU`.
    pub fn transform(&self, u: &Matrix) -> Result<Self, TernaryError> {
        Self::new(congruence(&self.gram, u))
    }

    /// Visits every `x` with `Q(x) <= bound` whose last coordinate lies in
    /// `x3_range`, with its norm.
    fn visit<F: FnMut(&Vector, i64)>(&self, bound: i64, x3_range: (i64, i64), mut f: F) {
        let a = self.gram.map(|r| r.map(i128::from));
        let b = i128::from(bound);
        let a11 = a[0][0];
        let m12 = a11 * a[1][1] - a[0][1] * a[0][1];
        let m13 = a11 * a[2][2] - a[0][2] * a[0][2];
        let t = a11 * a[1][2] - a[0][1] * a[0][2];
        let det = det3(&self.gram);
        for x3 in x3_range.0..=x3_range.1 {
            let x3 = i128::from(x3);
            // (m12·x2 + t·x3)² <= a11·(B·m12 − det·x3²)
            let s = a11 * (b * m12 - det * x3 * x3);
            if s < 0 {
                continue;
            }
            let s = arith::isqrt(s as u128) as i128;
            let lo = ceil_div(-t * x3 - s, m12);
            let hi = floor_div(-t * x3 + s, m12);
            for x2 in lo..=hi {
                // (a11·x1 + u)² <= a11·B − (m12·x2² + 2t·x2·x3 + m13·x3²)
                let u = a[0][1] * x2 + a[0][2] * x3;
                let r = a11 * b - (m12 * x2 * x2 + 2 * t * x2 * x3 + m13 * x3 * x3);
                if r < 0 {
                    continue;
                }
                let r = arith::isqrt(r as u128) as i128;
                let lo1 = ceil_div(-u - r, a11);
                let hi1 = floor_div(-u + r, a11);
                for x1 in lo1..=hi1 {
                    let v = [x1 as i64, x2 as i64, x3 as i64];
                    f(&v, self.eval(&v));
                }
            }
        }
    }

    /// Largest `|x3|` over the ellipsoid `Q(x) <= bound`.
    fn x3_extent(&self, bound: i64) -> i64 {
        let m12 = i128::from(self.gram[0][0]) * i128::from(self.gram[1][1])
            - i128::from(self.gram[0][1]).pow(2);
        let det = det3(&self.gram);
        arith::isqrt((i128::from(bound) * m12 / det) as u128) as i64
    }

    /// All `x` with `Q(x) <= bound`, with their norms, in enumeration order.
    pub fn vectors_up_to(&self, bound: u64) -> Result<Vec<(Vector, i64)>, TernaryError> {
        check_bound(bound)?;
        let bound = bound as i64;
        let e = self.x3_extent(bound);
        let mut out = Vec::new();
        self.visit(bound, (-e, e), |v, n| {
            if n <= bound {
                out.push((*v, n));
            }
        });
        Ok(out)
    }

    /// All `x` with `Q(x) = n`, sorted.
    pub fn vectors_of_norm(&self, n: u64) -> Result<Vec<Vector>, TernaryError> {
        let mut out: Vec<Vector> = self
            .vectors_up_to(n)?
            .into_iter()
            .filter(|&(_, m)| m == n as i64)
            .map(|(v, _)| v)
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// `r(Q, n)`: number of `x ∈ ℤ³` with `Q(x) = n`.
    pub fn rep_count(&self, n: u64) -> Result<u64, TernaryError> {
        check_bound(n)?;
        if n == 0 {
            return Ok(1);
        }
        // Solve for x1 directly: (a11·x1 + u)² = a11·n − (m12·x2² + 2t·x2·x3 + m13·x3²).
        let a = self.gram.map(|r| r.map(i128::from));
        let b = n as i128;
        let a11 = a[0][0];
        let m12 = a11 * a[1][1] - a[0][1] * a[0][1];
        let m13 = a11 * a[2][2] - a[0][2] * a[0][2];
        let t = a11 * a[1][2] - a[0][1] * a[0][2];
        let det = det3(&self.gram);
        let e = i128::from(self.x3_extent(n as i64));
        let mut count = 0u64;
        for x3 in -e..=e {
            let s = a11 * (b * m12 - det * x3 * x3);
            if s < 0 {
                continue;
            }
            let s = arith::isqrt(s as u128) as i128;
            for x2 in ceil_div(-t * x3 - s, m12)..=floor_div(-t * x3 + s, m12) {
                let r = a11 * b - (m12 * x2 * x2 + 2 * t * x2 * x3 + m13 * x3 * x3);
                let Some(root) = arith::exact_sqrt(r) else {
                    continue;
                };
                let u = a[0][1] * x2 + a[0][2] * x3;
                let roots = [root, -root];
                for w in &roots[..if root == 0 { 1 } else { 2 }] {
                    if (w - u).rem_euclid(a11) == 0 {
                        count += 1;
                    }
                }
            }
        }
        Ok(count)
    }

    /// `r*(Q, n) = Σ_{e²|n} μ(e)·r(Q, n/e²)`.
    pub fn primitive_rep_count(&self, n: u64) -> Result<u64, TernaryError> {
        check_bound(n)?;
        if n == 0 {
            return Ok(0);
        }
        let f = factorize(n).expect("n >= 1");
        let mut total: i64 = 0;
        for (e, mu) in factorize(f.square_root_part())
            .expect("square part >= 1")
            .squarefree_divisors()
        {
            total += i64::from(mu) * self.rep_count(n / (e * e))? as i64;
        }
        debug_assert!(total >= 0);
        Ok(total as u64)
    }

    /// `[r(Q, 0), …, r(Q, bound)]` in one enumeration pass.
    pub fn theta_coeffs(&self, bound: u64) -> Result<Vec<u64>, TernaryError> {
        self.theta_coeffs_with(bound, Execution::default())
    }

    /// As [`Self::theta_coeffs`], with the sweep over the last coordinate
    /// split into disjoint slabs under `exec`.
    pub fn theta_coeffs_with(&self, bound: u64, exec: Execution) -> Result<Vec<u64>, TernaryError> {
        check_bound(bound)?;
        let b = bound as i64;
        let e = self.x3_extent(b);
        let slabs = match exec {
            Execution::Sequential => 1,
            Execution::Parallel => (2 * e + 1).min(64),
        };
        let width = (2 * e + 1 + slabs - 1) / slabs;
        let ranges: Vec<(i64, i64)> = (0..slabs)
            .map(|k| (-e + k * width, (-e + (k + 1) * width - 1).min(e)))
            .filter(|(lo, hi)| lo <= hi)
            .collect();
        let len = bound as usize + 1;
        let parts = exec.map(ranges, |range| {
            let mut acc = vec![0u32; len];
            self.visit(b, range, |_, n| {
                if n <= b {
                    acc[n as usize] += 1;
                }
            });
            acc
        });
        let mut out = vec![0u64; len];
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                *o += u64::from(p);
            }
        }
        Ok(out)
    }

    /// Orthogonal group `{U ∈ GL₃(ℤ) : UᵀAU = A}`, sorted.
    pub fn automorphs(&self) -> Vec<Matrix> {
        let diag = [self.gram[0][0], self.gram[1][1], self.gram[2][2]];
        let max = *diag.iter().max().expect("three entries") as u64;
        let mut by_norm: BTreeMap<i64, Vec<Vector>> = BTreeMap::new();
        for (v, n) in self.vectors_up_to(max).expect("diagonal entries are small") {
            by_norm.entry(n).or_default().push(v);
        }
        let cand = |i: usize| by_norm.get(&diag[i]).cloned().unwrap_or_default();
        let (c0, c1, c2) = (cand(0), cand(1), cand(2));
        let mut out = Vec::new();
        for u0 in &c0 {
            for u1 in &c1 {
                if self.inner(u0, u1) != self.gram[0][1] {
                    continue;
                }
                for u2 in &c2 {
                    if self.inner(u0, u2) == self.gram[0][2] && self.inner(u1, u2) == self.gram[1][2]
                    {
                        out.push(from_columns(u0, u1, u2));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// `|Aut(Q)|`.
    pub fn automorph_count(&self) -> u64 {
        self.automorphs().len() as u64
    }

    /// Least `M` with `4M·A⁻¹` even integral.
    pub fn level(&self) -> u64 {
        let det = self.disc() as u64;
        let adj = self.adjugate();
        let mut m = 1;
        for row in &adj {
            for &x in row {
                let g = arith::gcd(det, 2 * x.unsigned_abs());
                m = arith::lcm(m, det / g);
            }
        }
        m
    }

    /// Canonical representative of the class of `Q` together with `U` such
    /// that `UᵀAU` is that representative.
    ///
    /// The representative has diagonal equal to the successive minima and the
    /// lexicographically least `(A12, A13, A23)` among all such bases.
    pub fn canonical_form(&self) -> (TernaryForm, Matrix) {
        let (pre, u0) = self.greedy_reduce();
        let bound = pre.gram[0][0].max(pre.gram[1][1]).max(pre.gram[2][2]) as u64;
        let mut vecs = pre.vectors_up_to(bound).expect("reduced diagonal is small");
        vecs.retain(|(_, n)| *n > 0);
        vecs.sort_by_key(|&(v, n)| (n, v));
        let minima = successive_minima(&vecs);
        let of_norm = |n: i64| -> Vec<Vector> {
            vecs.iter().filter(|(_, m)| *m == n).map(|(v, _)| *v).collect()
        };
        let (v1, v2, v3) = (of_norm(minima[0]), of_norm(minima[1]), of_norm(minima[2]));
        let mut best: Option<([i64; 3], Matrix)> = None;
        for b1 in &v1 {
            for b2 in &v2 {
                let a12 = pre.inner(b1, b2);
                if matches!(&best, Some((k, _)) if a12 > k[0]) {
                    continue;
                }
                for b3 in &v3 {
                    let key = [a12, pre.inner(b1, b3), pre.inner(b2, b3)];
                    if matches!(&best, Some((k, _)) if key >= *k) {
                        continue;
                    }
                    let u = from_columns(b1, b2, b3);
                    if det3(&u).abs() == 1 {
                        best = Some((key, u));
                    }
                }
            }
        }
        let (_, u1) = best.expect("a basis realising the successive minima exists in rank 3");
        let u = mat_mul(&u0, &u1);
        let canon = self.transform(&u).expect("congruent to a positive form");
        (canon, u)
    }

    /// Pairwise size reduction of the basis, shortest vectors first.
    fn greedy_reduce(&self) -> (TernaryForm, Matrix) {
        let mut u = IDENTITY;
        let mut g = self.gram;
        loop {
            let mut changed = false;
            // order basis by norm
            let mut idx = [0usize, 1, 2];
            idx.sort_by_key(|&i| g[i][i]);
            if idx != [0, 1, 2] {
                let p = from_columns_idx(&idx);
                u = mat_mul(&u, &p);
                g = congruence(&g, &p);
            }
            for j in 0..3 {
                for i in 0..3 {
                    if i == j {
                        continue;
                    }
                    // b_j -= round(<b_i,b_j>/<b_i,b_i>)·b_i
                    let q = round_div(g[i][j], g[i][i]);
                    if q != 0 && g[j][j] > 0 {
                        let mut e = IDENTITY;
                        e[i][j] = -q;
                        let ng = congruence(&g, &e);
                        if ng[j][j] < g[j][j] {
                            u = mat_mul(&u, &e);
                            g = ng;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (TernaryForm::new(g).expect("congruent to a positive form"), u)
    }
}

/// `Some(U)` with `UᵀA₁U = A₂` when the forms are `GL₃(ℤ)`-equivalent.
pub fn equivalent(q1: &TernaryForm, q2: &TernaryForm) -> Option<Matrix> {
    if q1.disc() != q2.disc() {
        return None;
    }
    let (c1, u1) = q1.canonical_form();
    let (c2, u2) = q2.canonical_form();
    if c1 != c2 {
        return None;
    }
    let u = mat_mul(&u1, &unimodular_inverse(&u2));
    debug_assert_eq!(congruence(&q1.gram, &u), q2.gram);
    Some(u)
}

/// Nonzero coefficients of a theta series as `(n, r(n))` pairs.
pub fn nonzero_coeffs(theta: &[u64]) -> Vec<(u64, u64)> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != 0)
        .map(|(n, &r)| (n as u64, r))
        .collect()
}

/// Primitive counts `r*(n)` from an ordinary theta series.
pub fn primitive_from_theta(theta: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; theta.len()];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let f = factorize(n as u64).expect("n >= 1");
        let mut s: i64 = 0;
        for (e, mu) in factorize(f.square_root_part()).expect(">= 1").squarefree_divisors() {
            s += i64::from(mu) * theta[n / (e * e) as usize] as i64;
        }
        *slot = s as u64;
    }
    out
}

pub const IDENTITY: Matrix = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

fn check_bound(n: u64) -> Result<(), TernaryError> {
    if n > MAX_NORM {
        Err(TernaryError::BoundTooLarge(n))
    } else {
        Ok(())
    }
}

fn det3(a: &Matrix) -> i128 {
    let a = a.map(|r| r.map(i128::from));
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn determinant(a: &Matrix) -> i64 {
    det3(a) as i64
}

pub fn adjugate(a: &Matrix) -> Matrix {
    let mut adj = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            adj[i][j] = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        }
    }
    adj
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Matrix) -> Matrix {
    let mut t = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// `UᵀAU`.
pub fn congruence(a: &Matrix, u: &Matrix) -> Matrix {
    mat_mul(&transpose(u), &mat_mul(a, u))
}

pub fn unimodular_inverse(u: &Matrix) -> Matrix {
    let d = det3(u) as i64;
    assert!(d == 1 || d == -1, "matrix is not unimodular");
    adjugate(u).map(|r| r.map(|x| x * d))
}

fn from_columns(c0: &Vector, c1: &Vector, c2: &Vector) -> Matrix {
    let mut m = [[0i64; 3]; 3];
    for i in 0..3 {
        m[i] = [c0[i], c1[i], c2[i]];
    }
    m
}

fn from_columns_idx(idx: &[usize; 3]) -> Matrix {
    let mut m = [[0i64; 3]; 3];
    for (col, &i) in idx.iter().enumerate() {
        m[i][col] = 1;
    }
    m
}

fn successive_minima(sorted: &[(Vector, i64)]) -> [i64; 3] {
    let mut basis: Vec<Vector> = Vec::new();
    let mut minima = [0i64; 3];
    for (v, n) in sorted {
        let independent = match basis.len() {
            0 => true,
            1 => cross(&basis[0], v) != [0, 0, 0],
            _ => dot(&cross(&basis[0], &basis[1]), v) != 0,
        };
        if independent {
            minima[basis.len()] = *n;
            basis.push(*v);
            if basis.len() == 3 {
                break;
            }
        }
    }
    assert_eq!(basis.len(), 3, "enumeration bound below the third minimum");
    minima
}

fn cross(a: &Vector, b: &Vector) -> Vector {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Vector, b: &Vector) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -(-a).div_euclid(b)
}

fn round_div(a: i64, b: i64) -> i64 {
    (2 * a + b).div_euclid(2 * b)
}
