//! Signs in the ordered field `R((e_1))..((e_n))`, the perturbed cone function
//! and open simplicial rational cones.
//!
//! A monomial `e^r` dominates `e^s` when, comparing exponents from the last
//! variable down, the first difference has `r_i < s_i`. The sign of a nonzero
//! element is the sign of the coefficient of its dominant monomial.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::qlinalg::{fmt_rational, int, sign_of, LinalgError, QMatrix, Rational};
use crate::series::signed_permutations;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConeError {
    #[error("perturbed cone matrix is singular")]
    Singular,
    #[error("real limits of the perturbed generators are linearly dependent")]
    DegenerateLimit,
    #[error("perturbed cone function is not constant on the open face {0:?}")]
    NonConstantFace(Vec<usize>),
    #[error("cone generators are linearly dependent")]
    Dependent,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Compares exponent vectors by dominance: `Less` means `a` dominates `b`.
pub fn dominance(a: &[u32], b: &[u32]) -> Ordering {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Polynomial in `e_1..e_n` with rational coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EpsPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl EpsPoly {
    pub fn zero(nvars: usize) -> Self {
        EpsPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    pub fn monomial(nvars: usize, e: Vec<u32>, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(e, c);
        }
        p
    }

    /// `e_i^k` (0-based `i`).
    pub fn var_pow(nvars: usize, i: usize, k: u32) -> Self {
        let mut e = vec![0; nvars];
        e[i] = k;
        Self::monomial(nvars, e, Rational::one())
    }

    pub fn from_terms(nvars: usize, terms: &[(Vec<u32>, Rational)]) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p = p.add(&Self::monomial(nvars, e.clone(), c.clone()));
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn add(&self, o: &EpsPoly) -> EpsPoly {
        let mut terms = self.terms.clone();
        for (e, c) in &o.terms {
            let v = terms.entry(e.clone()).or_insert_with(Rational::zero);
            *v += c;
            if v.is_zero() {
                terms.remove(e);
            }
        }
        EpsPoly { nvars: self.nvars, terms }
    }

    pub fn neg(&self) -> EpsPoly {
        EpsPoly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    pub fn sub(&self, o: &EpsPoly) -> EpsPoly {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: &Rational) -> EpsPoly {
        if k.is_zero() {
            return Self::zero(self.nvars);
        }
        EpsPoly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * k)).collect() }
    }

    pub fn mul(&self, o: &EpsPoly) -> EpsPoly {
        let mut terms: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                *terms.entry(e).or_insert_with(Rational::zero) += x * y;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        EpsPoly { nvars: self.nvars, terms }
    }

    /// Dominant monomial and its coefficient.
    pub fn leading(&self) -> Option<(&Vec<u32>, &Rational)> {
        self.terms.iter().min_by(|a, b| dominance(a.0, b.0))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "terms": self.terms.iter().map(|(e, c)| json!({"exponents": e, "coeff": fmt_rational(c)})).collect::<Vec<_>>()
        })
    }
}

impl fmt::Display for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for (e, c) in &self.terms {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("e{}", i + 1) } else { format!("e{}^{k}", i + 1) })
                .collect();
            if mono.is_empty() {
                parts.push(c.to_string());
            } else {
                parts.push(format!("{c}*{}", mono.join("*")));
            }
        }
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn eps_sign(p: &EpsPoly) -> i32 {
    p.leading().map_or(0, |(_, c)| sign_of(c))
}

/// Square matrix over `EpsPoly`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsMat {
    pub n: usize,
    pub e: Vec<Vec<EpsPoly>>,
}

impl EpsMat {
    fn minor(&self, skip_r: usize, skip_c: usize) -> EpsMat {
        let e = (0..self.n)
            .filter(|&i| i != skip_r)
            .map(|i| (0..self.n).filter(|&j| j != skip_c).map(|j| self.e[i][j].clone()).collect())
            .collect();
        EpsMat { n: self.n - 1, e }
    }

    fn nvars(&self) -> usize {
        self.e.first().and_then(|r| r.first()).map_or(0, |p| p.nvars)
    }

    pub fn det(&self) -> EpsPoly {
        self.det_in(self.nvars())
    }

    fn det_in(&self, nv: usize) -> EpsPoly {
        if self.n == 0 {
            return EpsPoly::constant(nv, Rational::one());
        }
        let mut acc = EpsPoly::zero(nv);
        for (p, s) in signed_permutations(self.n) {
            let mut t = EpsPoly::constant(nv, int(s as i64));
            for (i, &j) in p.iter().enumerate() {
                t = t.mul(&self.e[i][j]);
                if t.is_zero() {
                    break;
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    pub fn adjugate(&self) -> EpsMat {
        let n = self.n;
        let nv = self.nvars();
        let e = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let c = self.minor(j, i).det_in(nv);
                        if (i + j) % 2 == 1 {
                            c.neg()
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect();
        EpsMat { n, e }
    }

    /// `self * w` for a rational column `w`.
    pub fn apply(&self, w: &[Rational]) -> Vec<EpsPoly> {
        self.e
            .iter()
            .map(|row| row.iter().zip(w).fold(EpsPoly::zero(row[0].nvars), |acc, (p, x)| acc.add(&p.scale(x))))
            .collect()
    }
}

/// Column `j` is `alpha_j b(e_j)` with `b(e) = (1, e, .., e^(n-1))^T`.
pub fn perturbation_matrix(alphas: &[QMatrix]) -> Result<EpsMat, ConeError> {
    let n = alphas.len();
    let mut e = vec![vec![EpsPoly::zero(n); n]; n];
    for (j, a) in alphas.iter().enumerate() {
        if a.dim() != n {
            return Err(ConeError::Dimension(n, a.dim()));
        }
        for (i, row) in e.iter_mut().enumerate() {
            let mut p = EpsPoly::zero(n);
            for k in 0..n {
                p = p.add(&EpsPoly::var_pow(n, j, k as u32).scale(a.get(i, k)));
            }
            row[j] = p;
        }
    }
    Ok(EpsMat { n, e })
}

/// The perturbed cone `c(alpha_1 b(e_1), .., alpha_n b(e_n))` with its
/// adjugate precomputed for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PerturbedCone {
    pub matrix: EpsMat,
    pub det: EpsPoly,
    pub adj: EpsMat,
    det_sign: i32,
    limits: Vec<Vec<Rational>>,
}

impl PerturbedCone {
    pub fn new(alphas: &[QMatrix]) -> Result<Self, ConeError> {
        let matrix = perturbation_matrix(alphas)?;
        let det = matrix.det();
        let det_sign = eps_sign(&det);
        if det_sign == 0 {
            return Err(ConeError::Singular);
        }
        let adj = matrix.adjugate();
        let limits = alphas.iter().map(|a| a.col(0)).collect();
        Ok(PerturbedCone { matrix, det, adj, det_sign, limits })
    }

    pub fn det_sign(&self) -> i32 {
        self.det_sign
    }

    /// Real limits of the generators (first columns of the `alpha_j`).
    pub fn limits(&self) -> &[Vec<Rational>] {
        &self.limits
    }

    /// `sign det M` if `M^{-1} w > 0` in the ordered field, else 0.
    pub fn eval(&self, w: &[Rational]) -> i32 {
        let inside = self.adj.apply(w).iter().all(|p| eps_sign(p) == self.det_sign);
        if inside {
            self.det_sign
        } else {
            0
        }
    }
}

pub fn sigma_eval(alphas: &[QMatrix], w: &[Rational]) -> Result<i32, ConeError> {
    if w.len() != alphas.len() {
        return Err(ConeError::Dimension(alphas.len(), w.len()));
    }
    Ok(PerturbedCone::new(alphas)?.eval(w))
}

/// Solves `w = sum lambda_j v_j`; `None` when `w` is outside the span.
/// Errors when the generators are dependent.
pub fn cone_coords(gens: &[Vec<Rational>], w: &[Rational]) -> Result<Option<Vec<Rational>>, ConeError> {
    let r = gens.len();
    let n = w.len();
    if gens.iter().any(|g| g.len() != n) {
        return Err(ConeError::Dimension(n, gens.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n)));
    }
    // n equations in r unknowns: rows are coordinates, columns generators
    let mut a: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row: Vec<Rational> = gens.iter().map(|g| g[i].clone()).collect();
            row.push(w[i].clone());
            row
        })
        .collect();
    let mut piv_row = 0;
    let mut pivots = Vec::with_capacity(r);
    for c in 0..r {
        let Some(p) = (piv_row..n).find(|&i| !a[i][c].is_zero()) else {
            return Err(ConeError::Dependent);
        };
        a.swap(piv_row, p);
        let inv = a[piv_row][c].recip();
        for x in a[piv_row].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n {
            if i != piv_row && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for k in c..=r {
                    let d = &a[piv_row][k] * &f;
                    a[i][k] -= d;
                }
            }
        }
        pivots.push(piv_row);
        piv_row += 1;
    }
    if (piv_row..n).any(|i| !a[i][r].is_zero()) {
        return Ok(None);
    }
    Ok(Some(pivots.iter().map(|&i| a[i][r].clone()).collect()))
}

pub fn naive_cone_coords(gens: &[Vec<Rational>], w: &[Rational]) -> Result<(Vec<Rational>, bool), ConeError> {
    if gens.len() != w.len() {
        return Err(ConeError::Dimension(w.len(), gens.len()));
    }
    let l = cone_coords(gens, w)?.ok_or(ConeError::Dependent)?;
    let member = l.iter().all(|x| x.is_positive());
    Ok((l, member))
}

/// Open cone on `r <= n` independent generators, each scaled to a primitive
/// integer vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimplicialCone {
    gens: Vec<Vec<Rational>>,
}

pub fn primitive(v: &[Rational]) -> Vec<Rational> {
    let l = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(l.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return v.to_vec();
    }
    ints.into_iter().map(|x| Rational::from_integer(x / &g)).collect()
}

impl SimplicialCone {
    pub fn new(gens: Vec<Vec<Rational>>) -> Result<Self, ConeError> {
        let n = gens.first().map_or(0, Vec::len);
        if gens.is_empty() || gens.len() > n {
            return Err(ConeError::Dependent);
        }
        let zero = vec![Rational::zero(); n];
        cone_coords(&gens, &zero)?;
        Ok(SimplicialCone { gens: gens.iter().map(|g| primitive(g)).collect() })
    }

    pub fn generators(&self) -> &[Vec<Rational>] {
        &self.gens
    }

    pub fn contains(&self, w: &[Rational]) -> bool {
        matches!(cone_coords(&self.gens, w), Ok(Some(l)) if l.iter().all(|x| x.is_positive()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConeChain {
    pub terms: Vec<(i64, SimplicialCone)>,
}

impl ConeChain {
    pub fn eval(&self, w: &[Rational]) -> i64 {
        self.terms.iter().filter(|(_, c)| c.contains(w)).map(|(s, _)| s).sum()
    }

    pub fn to_json(&self) -> Value {
        json!(self
            .terms
            .iter()
            .map(|(s, c)| json!({
                "sign": s,
                "generators": c.gens.iter().map(|g| g.iter().map(fmt_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
            }))
            .collect::<Vec<_>>())
    }
}

/// The restriction of the perturbed cone to `R^n` as a signed sum of the
/// open faces of the cone on the real limits.
pub fn face_decompose(alphas: &[QMatrix]) -> Result<ConeChain, ConeError> {
    let cone = PerturbedCone::new(alphas)?;
    face_decompose_cone(&cone)
}

pub fn face_decompose_cone(cone: &PerturbedCone) -> Result<ConeChain, ConeError> {
    let n = cone.matrix.n;
    let c = cone.limits();
    if QMatrix::from_columns(c).map_or(true, |m| m.det().is_zero()) {
        return Err(ConeError::DegenerateLimit);
    }
    // adj(M) c_k, one column per generator
    let images: Vec<Vec<EpsPoly>> = c.iter().map(|ck| cone.adj.apply(ck)).collect();
    let mut terms = Vec::new();
    for mask in 1u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
        let mut inside = true;
        for row in 0..n {
            // sign of sum_{k in S} mu_k (adj(M) c_k)_row for all mu > 0
            let mut lead: Option<(&Vec<u32>, i32)> = None;
            let mut mixed = false;
            for &k in &s {
                if let Some((e, coef)) = images[k][row].leading() {
                    let sg = sign_of(coef);
                    match lead {
                        None => lead = Some((e, sg)),
                        Some((le, ls)) => match dominance(e, le) {
                            Ordering::Less => {
                                lead = Some((e, sg));
                                mixed = false;
                            }
                            Ordering::Equal if sg != ls => mixed = true,
                            _ => {}
                        },
                    }
                }
            }
            if mixed {
                return Err(ConeError::NonConstantFace(s));
            }
            if lead.is_none_or(|(_, sg)| sg != cone.det_sign) {
                inside = false;
            }
        }
        if inside {
            let gens = s.iter().map(|&k| c[k].clone()).collect();
            terms.push((cone.det_sign as i64, SimplicialCone::new(gens)?));
        }
    }
    Ok(ConeChain { terms })
}

/// Leading monomials `(coefficient, exponents)` of the adjugate entries.
pub fn adjugate_leading(alphas: &[QMatrix]) -> Result<Vec<Vec<Option<(Rational, Vec<u32>)>>>, ConeError> {
    let cone = PerturbedCone::new(alphas)?;
    Ok(cone
        .adj
        .e
        .iter()
        .map(|row| row.iter().map(|p| p.leading().map(|(e, c)| (c.clone(), e.clone()))).collect())
        .collect())
}

/// The closed-form leading terms of the adjugate for the tuple of powers of
/// the shift permutation (1-based `k`, `i` in the formulas below).
pub fn shift_adjugate_table(n: usize) -> Vec<Vec<(Rational, Vec<u32>)>> {
    let mono = |pairs: &[(usize, u32)]| {
        let mut e = vec![0u32; n];
        for &(i, k) in pairs {
            e[i - 1] += k;
        }
        e
    };
    (1..=n)
        .map(|k| {
            (1..=n)
                .map(|i| {
                    if i == k {
                        (int(1), mono(&[]))
                    } else if k == 1 {
                        (int(-1), mono(&[(i, (n - i + 1) as u32)]))
                    } else if i < k {
                        (int(-1), mono(&[(i, (k - i) as u32)]))
                    } else {
                        (int(1), mono(&[(1, (k - 1) as u32), (i, (n - i + 1) as u32)]))
                    }
                })
                .collect()
        })
        .collect()
}

/// `(1, rho, .., rho^(n-1))`.
pub fn shift_tuple(n: usize) -> Vec<QMatrix> {
    let rho = crate::qlinalg::shift_permutation(n);
    (0..n).map(|k| rho.pow(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::rat;
    use proptest::prelude::*;

    fn mono(e: &[u32], c: i64) -> EpsPoly {
        EpsPoly::monomial(e.len(), e.to_vec(), int(c))
    }

    #[test]
    fn sign_examples() {
        let p = mono(&[1000, 0], 1).add(&mono(&[0, 1], -1000));
        assert_eq!(eps_sign(&p), 1);
        assert_eq!(eps_sign(&mono(&[0, 0], -3).add(&mono(&[1, 0], 1))), -1);
        assert_eq!(eps_sign(&mono(&[0, 1], 1).add(&mono(&[2, 0], -1))), -1);
        assert_eq!(eps_sign(&EpsPoly::zero(2)), 0);
    }

    #[test]
    fn perturbation_matrix_examples() {
        let m = perturbation_matrix(&[QMatrix::from_ints(&[&[5]])]).unwrap();
        assert_eq!(m.e[0][0], mono(&[0], 5));
        let id = QMatrix::identity(2);
        let m = perturbation_matrix(&[id.clone(), id]).unwrap();
        assert_eq!(m.e[0][0], mono(&[0, 0], 1));
        assert_eq!(m.e[1][0], mono(&[1, 0], 1));
        assert_eq!(m.e[0][1], mono(&[0, 0], 1));
        assert_eq!(m.e[1][1], mono(&[0, 1], 1));
        // M_{i+j, j} = e_j^i, indices mod n
        for n in 1..=4 {
            let m = perturbation_matrix(&shift_tuple(n)).unwrap();
            for j in 0..n {
                for i in 0..n {
                    let mut e = vec![0u32; n];
                    e[j] = i as u32;
                    assert_eq!(m.e[(i + j) % n][j], EpsPoly::monomial(n, e, int(1)));
                }
            }
        }
    }

    #[test]
    fn sigma_examples() {
        for n in 1..=4 {
            let t = shift_tuple(n);
            assert_eq!(sigma_eval(&t, &vec![int(1); n]).unwrap(), 1);
            let mut e1 = vec![int(0); n];
            e1[0] = int(1);
            assert_eq!(sigma_eval(&t, &e1).unwrap(), if n == 1 { 1 } else { 0 });
            assert_eq!(sigma_eval(&t, &vec![int(-1); n]).unwrap(), 0);
        }
    }

    #[test]
    fn naive_coords_examples() {
        let std = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        assert_eq!(naive_cone_coords(&std, &[int(2), int(3)]).unwrap(), (vec![int(2), int(3)], true));
        assert_eq!(naive_cone_coords(&std, &[int(1), int(0)]).unwrap(), (vec![int(1), int(0)], false));
        let v = vec![vec![int(1), int(1)], vec![int(1), int(-1)]];
        assert_eq!(naive_cone_coords(&v, &[int(2), int(0)]).unwrap(), (vec![int(1), int(1)], true));
        let dep = vec![vec![int(1), int(1)], vec![int(2), int(2)]];
        assert_eq!(naive_cone_coords(&dep, &[int(2), int(0)]), Err(ConeError::Dependent));
    }

    #[test]
    fn face_examples() {
        for n in 1..=3 {
            let chain = face_decompose(&shift_tuple(n)).unwrap();
            assert_eq!(chain.terms.len(), 1);
            assert_eq!(chain.terms[0].0, 1);
            assert_eq!(chain.terms[0].1.generators().len(), n);
        }
        let g = QMatrix::from_ints(&[&[1, 2], &[3, 1]]);
        let alphas = vec![QMatrix::identity(2), g];
        let chain = face_decompose(&alphas).unwrap();
        for x in -1..=1 {
            for y in -1..=1 {
                let w = [int(x), int(y)];
                assert_eq!(chain.eval(&w), sigma_eval(&alphas, &w).unwrap() as i64);
            }
        }
        let sing = vec![QMatrix::identity(2), QMatrix::from_ints(&[&[2, 0], &[0, 1]])];
        assert_eq!(face_decompose(&sing).err(), Some(ConeError::DegenerateLimit));
    }

    #[test]
    fn shift_adjugate_table_matches() {
        for n in 1..=4 {
            let lead = adjugate_leading(&shift_tuple(n)).unwrap();
            let table = shift_adjugate_table(n);
            for k in 0..n {
                for i in 0..n {
                    assert_eq!(lead[k][i].as_ref(), Some(&table[k][i]), "n={n} k={} i={}", k + 1, i + 1);
                }
            }
        }
    }

    fn arb_poly() -> impl Strategy<Value = EpsPoly> {
        proptest::collection::vec((0u32..3, 0u32..3, -3i64..=3), 0..5).prop_map(|ts| {
            let terms: Vec<(Vec<u32>, Rational)> = ts.into_iter().map(|(a, b, c)| (vec![a, b], int(c))).collect();
            EpsPoly::from_terms(2, &terms)
        })
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = QMatrix> {
        proptest::collection::vec(-3i64..=3, n * n)
            .prop_map(move |v| QMatrix::from_ints(&v.chunks(n).collect::<Vec<_>>()))
            .prop_filter("invertible", |m| !m.det().is_zero())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn order_is_compatible(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            let (sa, sb) = (eps_sign(&a), eps_sign(&b));
            if sa > 0 && sb > 0 {
                prop_assert_eq!(eps_sign(&a.add(&b)), 1);
                prop_assert_eq!(eps_sign(&a.mul(&b)), 1);
            }
            prop_assert_eq!(eps_sign(&a.mul(&b)), sa * sb);
            // transitivity of a < b < c
            if eps_sign(&b.sub(&a)) > 0 && eps_sign(&c.sub(&b)) > 0 {
                prop_assert_eq!(eps_sign(&c.sub(&a)), 1);
            }
            prop_assert_eq!(eps_sign(&a.neg()), -sa);
        }

        #[test]
        fn faces_match_pointwise(a in arb_matrix(2), b in arb_matrix(2), pts in proptest::collection::vec((-6i64..=6, -6i64..=6, 1i64..=3), 100)) {
            let alphas = vec![a, b];
            let Ok(cone) = PerturbedCone::new(&alphas) else { return Ok(()); };
            let chain = match face_decompose_cone(&cone) {
                Ok(c) => c,
                Err(_) => return Ok(()),
            };
            let mut probes: Vec<Vec<Rational>> = pts.iter().map(|&(x, y, d)| vec![rat(x, d), rat(y, d)]).collect();
            for c in cone.limits() {
                probes.push(c.clone());
                probes.push(c.iter().map(|x| -x).collect());
            }
            for w in probes {
                prop_assert_eq!(chain.eval(&w), cone.eval(&w) as i64);
            }
        }

        #[test]
        fn cone_action(a in arb_matrix(2), b in arb_matrix(2), g in arb_matrix(2), pts in proptest::collection::vec((-6i64..=6, -6i64..=6), 20)) {
            let alphas = vec![a.clone(), b.clone()];
            let moved = vec![g.mul(&a), g.mul(&b)];
            let Ok(cone) = PerturbedCone::new(&alphas) else { return Ok(()); };
            let moved = PerturbedCone::new(&moved).unwrap();
            let sg = g.sign().unwrap();
            let git = g.inverse().unwrap().transpose();
            for (x, y) in pts {
                let w = vec![int(x), int(y)];
                prop_assert_eq!(moved.eval(&w), sg * cone.eval(&git.row_mul(&w)));
            }
        }
    }
}
