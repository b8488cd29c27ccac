//! Exact rational scalars, square matrices over Q, covectors and a little
//! integer lattice machinery.
//!
//! Rows are points of Q^n and columns are covectors, so `lambda(x)` is the
//! dot product `x . lambda`, `x . g` is a row times a matrix and `g . lambda`
//! is a matrix times a column.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vectors are linearly dependent")]
    Dependent,
    #[error("cannot parse rational {0:?}")]
    Parse(String),
    #[error("integer overflow in lattice computation")]
    Overflow,
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

pub fn parse_rational(s: &str) -> Result<Rational, LinalgError> {
    let t = s.trim();
    let bad = || LinalgError::Parse(s.to_string());
    match t.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(t.parse().map_err(|_| bad())?)),
    }
}

/// `p/q` with the denominator always written out.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Representative of `r mod 1` in `[0, 1)`.
pub fn frac_part(r: &Rational) -> Rational {
    r - r.floor()
}

pub fn sign_of(r: &Rational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

pub fn lcm_int(a: &BigInt, b: &BigInt) -> BigInt {
    if a.is_zero() || b.is_zero() {
        return BigInt::zero();
    }
    a.lcm(b)
}

/// Least common multiple of the denominators of the given rationals.
pub fn den_lcm<'a, I: IntoIterator<Item = &'a Rational>>(it: I) -> BigInt {
    it.into_iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Least positive rational lying in `a Z ∩ b Z` for positive rationals.
pub fn rational_lcm(a: &Rational, b: &Rational) -> Rational {
    Rational::new(a.numer().lcm(b.numer()), a.denom().gcd(b.denom()))
}

/// Positive generator of `a Z + b Z`.
pub fn rational_gcd(a: &Rational, b: &Rational) -> Rational {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    Rational::new(a.numer().gcd(b.numer()), a.denom().lcm(b.denom()))
}

pub fn dot(x: &[Rational], y: &[Rational]) -> Rational {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn to_i64(b: &BigInt) -> Result<i64, LinalgError> {
    b.to_i64().ok_or(LinalgError::Overflow)
}

/// Square matrix over Q, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QMatrix {
    n: usize,
    e: Vec<Rational>,
}

impl fmt::Debug for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> =
            (0..self.n).map(|i| self.row(i).iter().map(|r| r.to_string()).collect()).collect();
        write!(f, "{rows:?}")
    }
}

impl QMatrix {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut e = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(LinalgError::DimensionMismatch { expected: n, got: r.len() });
            }
            e.extend(r);
        }
        Ok(Self { n, e })
    }

    pub fn from_ints(rows: &[&[i64]]) -> Self {
        let rows = rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect();
        Self::from_rows(rows).expect("square integer matrix")
    }

    pub fn from_columns(cols: &[Vec<Rational>]) -> Result<Self, LinalgError> {
        let n = cols.len();
        let mut e = vec![Rational::zero(); n * n];
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(LinalgError::DimensionMismatch { expected: n, got: c.len() });
            }
            for i in 0..n {
                e[i * n + j] = c[i].clone();
            }
        }
        Ok(Self { n, e })
    }

    pub fn identity(n: usize) -> Self {
        let mut e = vec![Rational::zero(); n * n];
        for i in 0..n {
            e[i * n + i] = Rational::one();
        }
        Self { n, e }
    }

    pub fn scalar(n: usize, c: Rational) -> Self {
        let mut m = Self::identity(n);
        for i in 0..n {
            m.e[i * n + i] = c.clone();
        }
        m
    }

    pub fn diag(d: &[Rational]) -> Self {
        let mut m = Self::identity(d.len());
        for (i, x) in d.iter().enumerate() {
            m.e[i * d.len() + i] = x.clone();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.e[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<Rational> {
        self.e[i * self.n..(i + 1) * self.n].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<Rational> {
        (0..self.n).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.e
    }

    pub fn mul(&self, o: &QMatrix) -> QMatrix {
        assert_eq!(self.n, o.n, "matrix dimensions differ");
        let n = self.n;
        let mut e = vec![Rational::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    e[i * n + j] += a * o.get(k, j);
                }
            }
        }
        QMatrix { n, e }
    }

    pub fn transpose(&self) -> QMatrix {
        let n = self.n;
        let mut e = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                e.push(self.get(j, i).clone());
            }
        }
        QMatrix { n, e }
    }

    pub fn scale(&self, c: &Rational) -> QMatrix {
        QMatrix { n: self.n, e: self.e.iter().map(|x| x * c).collect() }
    }

    pub fn det(&self) -> Rational {
        let n = self.n;
        let mut a = self.e.clone();
        let mut det = Rational::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !a[r * n + c].is_zero()) else {
                return Rational::zero();
            };
            if p != c {
                for j in 0..n {
                    a.swap(p * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = a[c * n + c].clone();
            det *= &piv;
            for r in c + 1..n {
                let f = &a[r * n + c] / &piv;
                if f.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = &a[c * n + j] * &f;
                    a[r * n + j] -= v;
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Result<QMatrix, LinalgError> {
        let n = self.n;
        let mut a = self.e.clone();
        let mut inv = QMatrix::identity(n).e;
        for c in 0..n {
            let p = (c..n).find(|&r| !a[r * n + c].is_zero()).ok_or(LinalgError::Singular)?;
            if p != c {
                for j in 0..n {
                    a.swap(p * n + j, c * n + j);
                    inv.swap(p * n + j, c * n + j);
                }
            }
            let piv = a[c * n + c].clone();
            for j in 0..n {
                a[c * n + j] /= &piv;
                inv[c * n + j] /= &piv;
            }
            for r in 0..n {
                if r == c || a[r * n + c].is_zero() {
                    continue;
                }
                let f = a[r * n + c].clone();
                for j in 0..n {
                    let v = &a[c * n + j] * &f;
                    a[r * n + j] -= v;
                    let w = &inv[c * n + j] * &f;
                    inv[r * n + j] -= w;
                }
            }
        }
        Ok(QMatrix { n, e: inv })
    }

    pub fn sign(&self) -> Result<i32, LinalgError> {
        match sign_of(&self.det()) {
            0 => Err(LinalgError::Singular),
            s => Ok(s),
        }
    }

    /// Matrix times column: `g . lambda`.
    pub fn apply_col(&self, v: &[Rational]) -> Vec<Rational> {
        (0..self.n).map(|i| dot(&self.e[i * self.n..(i + 1) * self.n], v)).collect()
    }

    /// Row times matrix: `x . g`.
    pub fn row_mul(&self, x: &[Rational]) -> Vec<Rational> {
        let n = self.n;
        let mut out = vec![Rational::zero(); n];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for j in 0..n {
                out[j] += xi * self.get(i, j);
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> QMatrix {
        (0..k).fold(QMatrix::identity(self.n), |acc, _| acc.mul(self))
    }

    pub fn is_integral(&self) -> bool {
        self.e.iter().all(|x| x.is_integer())
    }

    /// Least positive `t` with `t * self` integral.
    pub fn integral_scale(&self) -> Rational {
        let l = den_lcm(self.e.iter());
        let g = self.e.iter().fold(BigInt::zero(), |acc, x| acc.gcd(&(x * &l).to_integer()));
        if g.is_zero() {
            return Rational::one();
        }
        Rational::new(l, g)
    }
}

pub struct MatrixOps {
    pub inverse: QMatrix,
    pub transpose: QMatrix,
    pub det: Rational,
    pub sign: i32,
}

pub fn matrix_ops(g: &QMatrix) -> Result<MatrixOps, LinalgError> {
    let det = g.det();
    let sign = sign_of(&det);
    if sign == 0 {
        return Err(LinalgError::Singular);
    }
    Ok(MatrixOps { inverse: g.inverse()?, transpose: g.transpose(), det, sign })
}

/// The cyclic shift with ones at `(1, n)` and `(i + 1, i)`.
pub fn shift_permutation(n: usize) -> QMatrix {
    let mut m = QMatrix { n, e: vec![Rational::zero(); n * n] };
    m.set(0, n - 1, Rational::one());
    for i in 1..n {
        m.set(i, i - 1, Rational::one());
    }
    m
}

/// `(g . lambda)(x) = lambda(x . g)`, i.e. the column `g lambda`.
pub fn covector_action(g: &QMatrix, lambda: &[Rational]) -> Result<Vec<Rational>, LinalgError> {
    if lambda.len() != g.dim() {
        return Err(LinalgError::DimensionMismatch { expected: g.dim(), got: lambda.len() });
    }
    Ok(g.apply_col(lambda))
}

/// The unique `g` with `g . lambda_i = e*_{i+1}`.
pub fn basis_to_group(lambdas: &[Vec<Rational>]) -> Result<QMatrix, LinalgError> {
    let m = QMatrix::from_columns(lambdas)?;
    m.inverse().map_err(|_| LinalgError::Dependent)
}

pub fn standard_covector(n: usize, i: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    v[i] = Rational::one();
    v
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        return if a < 0 { (-a, -1, 0) } else { (a, 1, 0) };
    }
    let (g, x, y) = egcd(b, a.rem_euclid(b));
    (g, y, x - a.div_euclid(b) * y)
}

/// Upper triangular basis of the integer lattice spanned by `gens` together
/// with `modulus * Z^n`. Diagonal entries are positive divisors of `modulus`.
pub fn hnf_mod(gens: &[Vec<i128>], n: usize, modulus: i128) -> Result<Vec<Vec<i128>>, LinalgError> {
    if modulus <= 0 || modulus > (1i128 << 60) {
        return Err(LinalgError::Overflow);
    }
    let m = modulus;
    let mut rows: Vec<Vec<i128>> =
        gens.iter().map(|r| r.iter().map(|x| x.rem_euclid(m)).collect()).collect();
    let mut basis = Vec::with_capacity(n);
    for j in 0..n {
        let mut piv = vec![0i128; n];
        piv[j] = m;
        let mut rest = Vec::with_capacity(rows.len());
        for row in rows.drain(..) {
            if row[j] == 0 {
                if row.iter().any(|&x| x != 0) {
                    rest.push(row);
                }
                continue;
            }
            let (a, b) = (piv[j], row[j]);
            let (g, x, y) = egcd(a, b);
            let (ag, bg) = (a / g, b / g);
            let mut np = vec![0i128; n];
            let mut nr = vec![0i128; n];
            for k in j..n {
                np[k] = (x.rem_euclid(m) * piv[k] % m + y.rem_euclid(m) * row[k] % m) % m;
                nr[k] = (bg.rem_euclid(m) * piv[k] % m - ag.rem_euclid(m) * row[k] % m).rem_euclid(m);
            }
            np[j] = g;
            nr[j] = 0;
            piv = np;
            if nr.iter().any(|&v| v != 0) {
                rest.push(nr);
            }
        }
        basis.push(piv);
        rows = rest;
    }
    Ok(basis)
}

/// Representatives in `[0, modulus)^n` of `L / modulus Z^n` for `L` given by
/// an upper triangular basis from [`hnf_mod`].
pub fn quotient_reps(basis: &[Vec<i128>], modulus: i128) -> Vec<Vec<i128>> {
    let n = basis.len();
    let mut out = vec![vec![0i128; n]];
    for (i, b) in basis.iter().enumerate() {
        let count = modulus / b[i];
        let mut next = Vec::with_capacity(out.len() * count as usize);
        for v in &out {
            for t in 0..count {
                next.push((0..n).map(|k| (v[k] + t * b[k]).rem_euclid(modulus)).collect());
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> QMatrix {
        QMatrix::from_ints(rows)
    }

    #[test]
    fn ops_on_identity_and_swap() {
        let ops = matrix_ops(&QMatrix::identity(2)).unwrap();
        assert_eq!(ops.inverse, QMatrix::identity(2));
        assert_eq!(ops.transpose, QMatrix::identity(2));
        assert_eq!(ops.det, int(1));
        assert_eq!(ops.sign, 1);
        let s = matrix_ops(&m(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(s.det, int(-1));
        assert_eq!(s.sign, -1);
    }

    #[test]
    fn two_by_two_inverse_matches_cofactors() {
        let g = m(&[&[2, 1], &[1, 1]]);
        let ops = matrix_ops(&g).unwrap();
        assert_eq!(ops.inverse, m(&[&[1, -1], &[-1, 2]]));
        assert_eq!(ops.det, int(1));
    }

    #[test]
    fn singular_is_an_error() {
        assert_eq!(matrix_ops(&m(&[&[1, 2], &[2, 4]])).err(), Some(LinalgError::Singular));
    }

    #[test]
    fn shift_entries() {
        assert_eq!(shift_permutation(1), QMatrix::identity(1));
        assert_eq!(shift_permutation(2), m(&[&[0, 1], &[1, 0]]));
        assert_eq!(shift_permutation(3), m(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]]));
    }

    #[test]
    fn covector_examples() {
        let e1 = standard_covector(2, 0);
        assert_eq!(covector_action(&QMatrix::identity(2), &e1).unwrap(), e1);
        assert_eq!(covector_action(&shift_permutation(2), &e1).unwrap(), standard_covector(2, 1));
        // the matrix sending e1* to the all-ones covector, as used for the coboundary tuple
        let alpha = m(&[&[1, 0, 0], &[1, 1, 0], &[1, 0, 1]]);
        assert_eq!(covector_action(&alpha, &standard_covector(3, 0)).unwrap(), vec![int(1); 3]);
        assert!(covector_action(&alpha, &e1).is_err());
    }

    #[test]
    fn basis_to_group_examples() {
        let es: Vec<_> = (0..3).map(|i| standard_covector(3, i)).collect();
        assert_eq!(basis_to_group(&es).unwrap(), QMatrix::identity(3));
        let swapped = vec![standard_covector(2, 1), standard_covector(2, 0)];
        assert_eq!(basis_to_group(&swapped).unwrap(), m(&[&[0, 1], &[1, 0]]));
        let lams = vec![vec![int(1), int(1)], standard_covector(2, 1)];
        let g = basis_to_group(&lams).unwrap();
        assert_eq!(g, m(&[&[1, 0], &[-1, 1]]));
        for (i, l) in lams.iter().enumerate() {
            assert_eq!(covector_action(&g, l).unwrap(), standard_covector(2, i));
        }
        let dep = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert_eq!(basis_to_group(&dep).err(), Some(LinalgError::Dependent));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("-3/6").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational(" 7 ").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert_eq!(fmt_rational(&int(2)), "2/1");
    }

    #[test]
    fn rational_lcm_gcd() {
        assert_eq!(rational_lcm(&rat(1, 2), &rat(1, 3)), int(1));
        assert_eq!(rational_lcm(&rat(2, 3), &int(1)), int(2));
        assert_eq!(rational_gcd(&rat(1, 2), &rat(1, 3)), rat(1, 6));
        assert_eq!(int(3).is_integer(), true);
        assert_eq!(m(&[&[2, 4], &[6, 8]]).scale(&rat(1, 4)).integral_scale(), rat(2, 1));
    }

    #[test]
    fn quotient_reps_count_and_distinct() {
        // lattice spanned by (1,2) and 3 Z^2 has index 3 in Z^2 and 3 points mod 3
        let b = hnf_mod(&[vec![1, 2]], 2, 3).unwrap();
        let reps = quotient_reps(&b, 3);
        assert_eq!(reps.len(), 3);
        let mut sorted = reps.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
        for r in reps {
            // every rep is t*(1,2) mod 3
            assert_eq!((2 * r[0] - r[1]).rem_euclid(3), 0);
        }
    }

    fn small_matrix(n: usize) -> impl Strategy<Value = QMatrix> {
        proptest::collection::vec(-3i64..=3, n * n).prop_map(move |v| {
            let rows = v.chunks(n).map(|c| c.iter().map(|&x| int(x)).collect()).collect();
            QMatrix::from_rows(rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn covector_action_is_a_left_action(a in small_matrix(3), b in small_matrix(3),
                                            l in proptest::collection::vec(-5i64..=5, 3)) {
            let l: Vec<Rational> = l.into_iter().map(int).collect();
            let lhs = covector_action(&a.mul(&b), &l).unwrap();
            let rhs = covector_action(&a, &covector_action(&b, &l).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn inverse_and_transpose_commute(a in small_matrix(3)) {
            prop_assume!(!a.det().is_zero());
            let ops = matrix_ops(&a).unwrap();
            prop_assert_eq!(ops.transpose.inverse().unwrap(), ops.inverse.transpose());
            prop_assert_eq!(a.mul(&ops.inverse), QMatrix::identity(3));
        }

        #[test]
        fn basis_to_group_reproduces_standard_covectors(a in small_matrix(3)) {
            prop_assume!(!a.det().is_zero());
            let lams: Vec<_> = (0..3).map(|j| a.col(j)).collect();
            let g = basis_to_group(&lams).unwrap();
            for (i, l) in lams.iter().enumerate() {
                prop_assert_eq!(covector_action(&g, l).unwrap(), standard_covector(3, i));
            }
        }

        #[test]
        fn hnf_reps_match_brute_force(a in proptest::collection::vec(-6i128..=6, 4), modulus in 1i128..=9) {
            let gens = vec![a[..2].to_vec(), a[2..].to_vec()];
            let b = hnf_mod(&gens, 2, modulus).unwrap();
            let mut reps = quotient_reps(&b, modulus);
            reps.sort();
            let mut brute = Vec::new();
            for s in 0..modulus {
                for t in 0..modulus {
                    brute.push(vec![(s * gens[0][0] + t * gens[1][0]).rem_euclid(modulus),
                                    (s * gens[0][1] + t * gens[1][1]).rem_euclid(modulus)]);
                }
            }
            brute.sort();
            brute.dedup();
            prop_assert_eq!(reps, brute);
        }
    }
}
