//! Shintani side: the lattice-point pairing of an open simplicial cone with a
//! test function, and the naive and perturbed cone functions built from it.
//!
//! The pairing is `sum over w in (lattice points of the open cone) of
//! f(w) e^{w.T}`, folded over the half-open fundamental parallelepiped of
//! generators in the period lattice. Results are normalized to the fraction
//! whose denominators are the primitive generator forms, so any two exact
//! evaluation routes produce identical values.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::cyclotomic::{CycError, CycNum};
use crate::epscone::{face_decompose, ConeError, SimplicialCone};
use crate::qlinalg::{frac_part, hnf_mod, quotient_reps, LinalgError, QMatrix, Rational};
use crate::schwartz::{SchwartzError, TestFunction};
use crate::series::{bernoulli, factorial, negative_polylogs, reciprocal_one_minus, FormalFraction, Layout, MultiSeries, SeriesError};

#[derive(Debug, Error)]
pub enum PairingError {
    #[error("cone generators are linearly dependent")]
    Dependent,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("lattice data exceeds the supported integer range")]
    Overflow,
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Schwartz(#[from] SchwartzError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// Points of the support grid inside the half-open parallelepiped
/// `(0,1] v_1 + ... + (0,1] v_r`, with their values.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalDomainPoints {
    pub generators: Vec<Vec<Rational>>,
    pub points: Vec<(Vec<Rational>, CycNum)>,
}

fn to_i128(x: &Rational) -> Result<i128, PairingError> {
    if !x.is_integer() {
        return Err(PairingError::Overflow);
    }
    x.to_integer().to_i128().filter(|v| v.abs() < (1 << 62)).ok_or(PairingError::Overflow)
}

fn r128(x: i128) -> Rational {
    Rational::from_integer(BigInt::from(x))
}

/// Whether `x` lies in the lattice with upper triangular basis `basis`
/// (which contains `modulus * Z^n`).
fn member(x: &[i128], basis: &[Vec<i128>], modulus: i128) -> bool {
    let mut v: Vec<i128> = x.iter().map(|a| a.rem_euclid(modulus)).collect();
    for (j, b) in basis.iter().enumerate() {
        if v[j] % b[j] != 0 {
            return false;
        }
        let q = v[j] / b[j];
        for k in j..v.len() {
            v[k] = (v[k] - q * b[k]).rem_euclid(modulus);
        }
    }
    true
}

fn divisors(m: i128) -> Vec<i128> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= m {
        if m % d == 0 {
            small.push(d);
            if d * d != m {
                large.push(m / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Least positive integer `t` with `t p` in the lattice.
fn ray_step(p: &[i128], basis: &[Vec<i128>], modulus: i128) -> i128 {
    for t in divisors(modulus) {
        let v: Vec<i128> = p.iter().map(|x| x * t).collect();
        if member(&v, basis, modulus) {
            return t;
        }
    }
    modulus
}

fn small_det(rows: &[Vec<i128>]) -> i128 {
    let m = QMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| r128(x)).collect()).collect())
        .expect("square minor");
    m.det().to_integer().to_i128().unwrap_or(0)
}

fn column_subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// All `kappa in [1, D]^r` with `(kappa / D) V` in `offset + L`, where `V`
/// has integer rows and `L` is given by an upper triangular basis containing
/// `modulus * Z^n`. Returns `D` and the points.
fn parallelepiped_points(
    v: &[Vec<i128>],
    basis: &[Vec<i128>],
    modulus: i128,
    offset: &[i128],
) -> Result<(i128, Vec<Vec<i128>>), PairingError> {
    let r = v.len();
    let n = offset.len();
    let mut best: Option<i128> = None;
    for cols in column_subsets(n, r) {
        let minor: Vec<Vec<i128>> = v.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect();
        let d = small_det(&minor).abs();
        if d != 0 && best.is_none_or(|b| d < b) {
            best = Some(d);
        }
    }
    let d = best.ok_or(PairingError::Dependent)?;
    // the lattice spanned by L and the offset
    let mut gens: Vec<Vec<i128>> = basis.to_vec();
    gens.push(offset.to_vec());
    let wide = hnf_mod(&gens, n, modulus)?;
    let big = d.checked_mul(modulus).filter(|&x| x <= 1 << 60).ok_or(PairingError::Overflow)?;
    // kernel of kappa -> kappa V modulo d * wide, read off an echelon form
    let mut aug: Vec<Vec<i128>> = Vec::with_capacity(r + n);
    for (i, row) in v.iter().enumerate() {
        let mut x = row.clone();
        x.extend((0..r).map(|k| i128::from(k == i)));
        aug.push(x);
    }
    for row in &wide {
        let mut x: Vec<i128> = row.iter().map(|a| a * d).collect();
        x.extend(std::iter::repeat_n(0, r));
        aug.push(x);
    }
    let h = hnf_mod(&aug, n + r, big)?;
    let kernel: Vec<Vec<i128>> = h[n..].iter().map(|row| row[n..].to_vec()).collect();
    let kb = hnf_mod(&kernel, r, d)?;
    let mut out = Vec::new();
    for mut kappa in quotient_reps(&kb, d) {
        for x in kappa.iter_mut() {
            if *x == 0 {
                *x = d;
            }
        }
        let mut w = vec![0i128; n];
        for (k, row) in kappa.iter().zip(v) {
            for (wi, x) in w.iter_mut().zip(row) {
                *wi += k * x;
            }
        }
        if w.iter().any(|x| x % d != 0) {
            continue;
        }
        let diff: Vec<i128> = w.iter().zip(offset).map(|(x, o)| x / d - o).collect();
        if member(&diff, basis, modulus) {
            out.push(kappa);
        }
    }
    Ok((d, out))
}

/// Least positive integer multiple of each generator lying in `g Z^n`.
fn period_multiples(gens: &[Vec<Rational>], g: &Rational) -> Vec<Vec<Rational>> {
    gens.iter()
        .map(|v| {
            let k = v.iter().fold(BigInt::one(), |acc, x| acc.lcm((x / g).denom()));
            let k = Rational::from_integer(k);
            v.iter().map(|x| x * &k).collect()
        })
        .collect()
}

fn check_generators(gens: &[Vec<Rational>], n: usize) -> Result<(), PairingError> {
    if gens.is_empty() || gens.len() > n {
        return Err(PairingError::Dependent);
    }
    for g in gens {
        if g.len() != n {
            return Err(PairingError::Dimension(n, g.len()));
        }
    }
    Ok(())
}

/// Lattice points of the half-open parallelepiped on the given generators,
/// each first replaced by its least positive integer multiple in the period
/// lattice of `f`.
pub fn enumerate_fundamental_domain(
    gens: &[Vec<Rational>],
    f: &TestFunction,
) -> Result<FundamentalDomainPoints, PairingError> {
    let n = f.dim();
    check_generators(gens, n)?;
    if f.is_zero() {
        return Ok(FundamentalDomainPoints { generators: gens.to_vec(), points: Vec::new() });
    }
    let scaled = period_multiples(gens, &f.period());
    let (lambdas, d) = direct_points(&scaled, f)?;
    let points = lambdas
        .into_iter()
        .map(|(kappa, val)| {
            let w = combine(&kappa, d, &scaled);
            (w, val)
        })
        .collect();
    Ok(FundamentalDomainPoints { generators: scaled, points })
}

fn combine(kappa: &[i128], d: i128, gens: &[Vec<Rational>]) -> Vec<Rational> {
    let n = gens[0].len();
    let mut w = vec![Rational::zero(); n];
    for (k, g) in kappa.iter().zip(gens) {
        let c = Rational::new(BigInt::from(*k), BigInt::from(d));
        for (wi, x) in w.iter_mut().zip(g) {
            *wi += &c * x;
        }
    }
    w
}

/// Support points of `f` in the parallelepiped on `gens` (already in the
/// period lattice), as `kappa / d` coordinates with values.
fn direct_points(gens: &[Vec<Rational>], f: &TestFunction) -> Result<(Vec<(Vec<i128>, CycNum)>, i128), PairingError> {
    let n = f.dim();
    let h = Rational::from_integer(BigInt::from(f.support_denominator()));
    let v: Vec<Vec<i128>> =
        gens.iter().map(|g| g.iter().map(|x| to_i128(&(x * &h))).collect()).collect::<Result<_, _>>()?;
    let ident: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();
    let (d, kappas) = parallelepiped_points(&v, &ident, 1, &vec![0; n])?;
    let mut out = Vec::new();
    for kappa in kappas {
        let w = combine(&kappa, d, gens);
        let val = f.eval(&w);
        if !val.is_zero() {
            out.push((kappa, val));
        }
    }
    Ok((out, d))
}

/// Sums of `value * e^{mu . u}` with `mu = z / e` for integer `z`, kept as
/// integer power sums per value class.
struct ExpSums {
    layout: std::sync::Arc<Layout>,
    classes: Vec<(CycNum, Vec<BigInt>)>,
}

impl ExpSums {
    fn new(r: usize, deg: usize) -> Self {
        ExpSums { layout: Layout::get(r, deg), classes: Vec::new() }
    }

    fn class(&mut self, value: &CycNum) -> usize {
        if let Some(i) = self.classes.iter().position(|(v, _)| v == value) {
            return i;
        }
        self.classes.push((value.clone(), vec![BigInt::zero(); self.layout.len()]));
        self.classes.len() - 1
    }

    fn add(&mut self, class: usize, z: &[BigInt]) {
        let deg = self.layout.deg;
        let pows: Vec<Vec<BigInt>> = z
            .iter()
            .map(|x| {
                let mut p = Vec::with_capacity(deg + 1);
                p.push(BigInt::one());
                for k in 1..=deg {
                    let next = &p[k - 1] * x;
                    p.push(next);
                }
                p
            })
            .collect();
        let acc = &mut self.classes[class].1;
        for (i, slot) in acc.iter_mut().enumerate() {
            let e = self.layout.mono(i);
            let mut prod = pows[0][e[0] as usize].clone();
            for (j, &k) in e.iter().enumerate().skip(1) {
                if k > 0 {
                    prod *= &pows[j][k as usize];
                }
            }
            *slot += prod;
        }
    }

    fn finish(self, e: &BigInt) -> MultiSeries {
        let layout = self.layout;
        let mut coeffs = vec![CycNum::zero(); layout.len()];
        let dens: Vec<BigInt> = (0..layout.len())
            .map(|i| {
                let m = layout.mono(i);
                let mut d = e.pow(layout.degree_of(i) as u32);
                for &k in m {
                    d *= factorial(k as usize);
                }
                d
            })
            .collect();
        for (val, acc) in &self.classes {
            for (i, s) in acc.iter().enumerate() {
                if !s.is_zero() {
                    let c = val.scale(&Rational::new(s.clone(), dens[i].clone()));
                    coeffs[i] = &coeffs[i] + &c;
                }
            }
        }
        MultiSeries::from_dense(layout, coeffs)
    }
}

/// Coefficients of `u / (1 - e(q) e^{s u})` through `u^deg`.
fn fold_factor(q: &Rational, s: &Rational, deg: usize) -> Result<Vec<CycNum>, PairingError> {
    let mut out = Vec::with_capacity(deg + 1);
    if frac_part(q).is_zero() {
        // -(1/s) sum B_k (s u)^k / k!
        let b = bernoulli(deg);
        let mut sp = s.recip();
        for (k, bk) in b.iter().enumerate() {
            out.push(CycNum::from_rational(&(-bk * &sp / Rational::from_integer(factorial(k)))));
            sp *= s;
        }
        return Ok(out);
    }
    // u * (1 + sum_k Li_{-k}(z) (s u)^k / k!)
    out.push(CycNum::zero());
    if deg == 0 {
        return Ok(out);
    }
    let li = negative_polylogs(q, deg - 1)?;
    let mut sp = Rational::one();
    for (k, l) in li.iter().enumerate() {
        let mut c = l.scale(&(&sp / Rational::from_integer(factorial(k))));
        if k == 0 {
            c = &c + &CycNum::one();
        }
        out.push(c);
        sp *= s;
    }
    Ok(out)
}

/// Normalized fraction `data(u) / prod u_j` with `u_j = gens[j] . T`.
fn to_fraction(data: &MultiSeries, gens: &[Vec<Rational>], n: usize) -> Result<FormalFraction, PairingError> {
    Ok(FormalFraction::from_coordinates(data, gens, gens, n)?)
}

/// The pairing evaluated literally: sum over the period-lattice
/// parallelepiped of the given generators times `prod 1/(1 - e^{v_j . T})`.
pub fn pair_with_generators(gens: &[Vec<Rational>], f: &TestFunction, deg: usize) -> Result<FormalFraction, PairingError> {
    let n = f.dim();
    check_generators(gens, n)?;
    let r = gens.len();
    let prims: Vec<Vec<Rational>> = gens.iter().map(|g| crate::epscone::primitive(g)).collect();
    if f.is_zero() {
        return to_fraction(&MultiSeries::zero(r, deg + r), &prims, n);
    }
    let scaled = period_multiples(gens, &f.period());
    // scaled_j = s_j prims_j
    let scales: Vec<Rational> = scaled
        .iter()
        .zip(&prims)
        .map(|(v, p)| {
            let i = p.iter().position(|x| !x.is_zero()).unwrap();
            &v[i] / &p[i]
        })
        .collect();
    let (points, d) = direct_points(&scaled, f)?;
    let big_e = BigInt::from(d) * scales.iter().fold(BigInt::one(), |acc, s| acc.lcm(s.denom()));
    let er = Rational::from_integer(big_e.clone());
    let mut sums = ExpSums::new(r, deg + r);
    for (kappa, val) in &points {
        let z: Vec<BigInt> = kappa
            .iter()
            .zip(&scales)
            .map(|(k, s)| (Rational::new(BigInt::from(*k), BigInt::from(d)) * s * &er).to_integer())
            .collect();
        let c = sums.class(val);
        sums.add(c, &z);
    }
    let mut data = sums.finish(&big_e);
    for (j, s) in scales.iter().enumerate() {
        data = data.mul_univariate(j, &fold_factor(&Rational::zero(), s, deg + r)?);
    }
    to_fraction(&data, &prims, n)
}

/// The pairing with period-lattice generators, evaluated literally.
pub fn sh_pair_direct(cone: &SimplicialCone, f: &TestFunction, deg: usize) -> Result<FormalFraction, PairingError> {
    let g = if f.is_zero() { Rational::one() } else { f.period() };
    let gens: Vec<Vec<Rational>> = cone.generators().iter().map(|p| p.iter().map(|x| x * &g).collect()).collect();
    pair_with_generators(&gens, f, deg)
}

/// `coeff * e(<twist, w>)` on `offset + L`, in grid units `w = k / h`.
#[derive(Clone, Debug)]
struct Atom {
    coeff: CycNum,
    twist: Vec<Rational>,
    offset: Vec<i128>,
    basis: Vec<Vec<i128>>,
}

fn coset_lattice(keys: &[Vec<i128>], n: usize, per: i128) -> Result<Option<Vec<Vec<i128>>>, PairingError> {
    let k0 = &keys[0];
    let diffs: Vec<Vec<i128>> = keys.iter().skip(1).map(|k| k.iter().zip(k0).map(|(a, b)| a - b).collect()).collect();
    let basis = hnf_mod(&diffs, n, per)?;
    let mut size: i128 = 1;
    for (i, b) in basis.iter().enumerate() {
        size = size.saturating_mul(per / b[i]);
        if size > keys.len() as i128 {
            return Ok(None);
        }
    }
    Ok((size == keys.len() as i128).then_some(basis))
}

/// `x = e(q)` for some rational `q`, if `x` is a root of unity.
fn root_exponent(x: &CycNum) -> Option<Rational> {
    let m = 2 * x.conductor();
    (0..m)
        .map(|k| Rational::new(BigInt::from(k), BigInt::from(m)))
        .find(|q| CycNum::root_of_unity(q).is_ok_and(|z| &z == x))
}

/// `f` as a single character times a coset indicator, when it is one.
fn twisted_atom(
    entries: &[(Vec<i128>, CycNum)],
    n: usize,
    h: i128,
    per: i128,
) -> Result<Option<Atom>, PairingError> {
    let keys: Vec<Vec<i128>> = entries.iter().map(|(k, _)| k.clone()).collect();
    let Some(basis) = coset_lattice(&keys, n, per)? else { return Ok(None) };
    let lookup: BTreeMap<&Vec<i128>, &CycNum> = entries.iter().map(|(k, v)| (k, v)).collect();
    let (k0, v0) = (&entries[0].0, &entries[0].1);
    let inv0 = v0.try_inv()?;
    let hr = r128(h);
    let mut rhs = Vec::with_capacity(n);
    for b in &basis {
        let key: Vec<i128> = k0.iter().zip(b).map(|(a, x)| (a + x).rem_euclid(per)).collect();
        let Some(val) = lookup.get(&key) else { return Ok(None) };
        let Some(q) = root_exponent(&(*val * &inv0)) else { return Ok(None) };
        rhs.push(q);
    }
    let bm = QMatrix::from_rows(basis.iter().map(|b| b.iter().map(|&x| r128(x) / &hr).collect()).collect())?;
    let twist = bm.inverse()?.apply_col(&rhs);
    let perr = r128(per);
    if twist.iter().any(|t| !(t * &perr / &hr).is_integer()) {
        return Ok(None);
    }
    let phase = |k: &[i128]| -> Rational {
        frac_part(&(k.iter().zip(&twist).map(|(a, t)| r128(*a) * t).fold(Rational::zero(), |s, x| s + x) / &hr))
    };
    for (k, v) in entries {
        let d: Vec<i128> = k.iter().zip(k0).map(|(a, b)| a - b).collect();
        if &(v0 * &CycNum::root_of_unity(&phase(&d))?) != v {
            return Ok(None);
        }
    }
    let coeff = v0 * &CycNum::root_of_unity(&-phase(k0))?;
    Ok(Some(Atom { coeff, twist, offset: k0.clone(), basis }))
}

/// Splits `f` into characters times coset indicators.
fn atoms(f: &TestFunction) -> Result<Vec<Atom>, PairingError> {
    let n = f.dim();
    let (h, per, values) = f.grid();
    let (h, per) = (h as i128, per as i128);
    let entries: Vec<(Vec<i128>, CycNum)> =
        values.iter().map(|(k, v)| (k.iter().map(|&x| x as i128).collect(), v.clone())).collect();
    if entries.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(a) = twisted_atom(&entries, n, h, per)? {
        return Ok(vec![a]);
    }
    let mut classes: Vec<(CycNum, Vec<Vec<i128>>)> = Vec::new();
    for (k, v) in &entries {
        match classes.iter_mut().find(|(c, _)| c == v) {
            Some((_, ks)) => ks.push(k.clone()),
            None => classes.push((v.clone(), vec![k.clone()])),
        }
    }
    let zero = vec![Rational::zero(); n];
    let cube: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| if i == j { per } else { 0 }).collect()).collect();
    let mut out = Vec::new();
    for (v, keys) in classes {
        if let Some(basis) = coset_lattice(&keys, n, per)? {
            out.push(Atom { coeff: v, twist: zero.clone(), offset: keys[0].clone(), basis });
        } else {
            for k in keys {
                out.push(Atom { coeff: v.clone(), twist: zero.clone(), offset: k, basis: cube.clone() });
            }
        }
    }
    Ok(out)
}

/// Contribution of one atom in the coordinates `u_j = prims[j] . T`.
fn atom_data(atom: &Atom, prims: &[Vec<i128>], h: i128, per: i128, deg: usize) -> Result<MultiSeries, PairingError> {
    let r = prims.len();
    let hr = r128(h);
    let steps: Vec<i128> = prims.iter().map(|p| ray_step(p, &atom.basis, per)).collect();
    let v: Vec<Vec<i128>> = prims.iter().zip(&steps).map(|(p, t)| p.iter().map(|x| x * t).collect()).collect();
    let (d, kappas) = parallelepiped_points(&v, &atom.basis, per, &atom.offset)?;
    let dot_twist = |k: &[i128]| -> Rational {
        frac_part(&(k.iter().zip(&atom.twist).map(|(a, t)| r128(*a) * t).fold(Rational::zero(), |s, x| s + x) / &hr))
    };
    // mu_j = kappa_j t_j / (d h)
    let big_e = BigInt::from(d) * BigInt::from(h);
    let mut sums = ExpSums::new(r, deg);
    let mut phases: BTreeMap<Rational, usize> = BTreeMap::new();
    for kappa in &kappas {
        let mut w = vec![0i128; prims[0].len()];
        for (k, row) in kappa.iter().zip(&v) {
            for (wi, x) in w.iter_mut().zip(row) {
                *wi += k * x;
            }
        }
        let w: Vec<i128> = w.iter().map(|x| x / d).collect();
        let q = dot_twist(&w);
        let class = match phases.get(&q) {
            Some(&c) => c,
            None => {
                let c = sums.class(&CycNum::root_of_unity(&q)?);
                phases.insert(q, c);
                c
            }
        };
        let z: Vec<BigInt> = kappa.iter().zip(&steps).map(|(k, t)| BigInt::from(k * t)).collect();
        sums.add(class, &z);
    }
    let mut data = sums.finish(&big_e).scale(&atom.coeff);
    for (j, (vj, t)) in v.iter().zip(&steps).enumerate() {
        let q = dot_twist(vj);
        let s = Rational::new(BigInt::from(*t), BigInt::from(h));
        data = data.mul_univariate(j, &fold_factor(&q, &s, deg)?);
    }
    Ok(data)
}

/// The pairing `<cone, f>` through Laurent degree `deg`, with generators in
/// the period lattice of `f`.
pub fn sh_pair(cone: &SimplicialCone, f: &TestFunction, deg: usize) -> Result<FormalFraction, PairingError> {
    let n = f.dim();
    let gens = cone.generators();
    check_generators(gens, n)?;
    let r = gens.len();
    let prims: Vec<Vec<i128>> =
        gens.iter().map(|g| g.iter().map(to_i128).collect()).collect::<Result<_, _>>()?;
    let mut data = MultiSeries::zero(r, deg + r);
    if !f.is_zero() {
        let (h, per, _) = f.grid();
        for atom in atoms(f)? {
            data = data.add(&atom_data(&atom, &prims, h as i128, per as i128, deg + r)?);
        }
    }
    to_fraction(&data, gens, n)
}

/// First columns of the matrices, as rows.
pub fn first_columns(gammas: &[QMatrix]) -> Vec<Vec<Rational>> {
    gammas.iter().map(|g| g.col(0)).collect()
}

/// Pairing of `f` with the open cone on the first columns of the `gammas`.
pub fn phi_nsh(gammas: &[QMatrix], f: &TestFunction, deg: usize) -> Result<FormalFraction, PairingError> {
    let n = f.dim();
    if gammas.len() != n {
        return Err(PairingError::Dimension(n, gammas.len()));
    }
    let cone = SimplicialCone::new(first_columns(gammas)).map_err(|e| match e {
        ConeError::Dependent => PairingError::Dependent,
        e => e.into(),
    })?;
    sh_pair(&cone, f, deg)
}

/// Pairing of `f` with the perturbed cone function, summed over its signed
/// open faces.
pub fn phi_sh(alphas: &[QMatrix], f: &TestFunction, deg: usize) -> Result<FormalFraction, PairingError> {
    let n = f.dim();
    if alphas.len() != n {
        return Err(PairingError::Dimension(n, alphas.len()));
    }
    let chain = face_decompose(alphas)?;
    let mut acc = FormalFraction::zero(n, deg);
    for (s, cone) in &chain.terms {
        let v = sh_pair(cone, f, deg)?;
        acc = acc.add(&v.scale_rat(&Rational::from_integer(BigInt::from(*s))))?;
    }
    Ok(acc)
}

/// The matrix action on pairing values, `T -> T g`.
pub fn act_value(g: &QMatrix, x: &FormalFraction) -> Result<FormalFraction, PairingError> {
    Ok(x.substitute(g)?)
}

/// `(1/d) e^{(T - 2 pi i a)/d} / (1 - e^{(T - 2 pi i a)/d})`, the pairing of
/// the half-line with the Fourier image of `chi(a + dZ)`.
pub fn coset_fourier_closed_form(a: &Rational, d: &Rational, deg: usize) -> Result<FormalFraction, PairingError> {
    let x = reciprocal_one_minus(&-(a / d), &[d.recip()], deg + 1)?;
    Ok(x.sub(&FormalFraction::one(1, deg + 1))?.scale_rat(&d.recip()))
}

/// Product over coordinates of the one-variable closed forms, valid through
/// `deg` in `n = data.len()` variables.
pub fn product_closed_form(data: &[(Rational, Rational)], deg: usize) -> Result<FormalFraction, PairingError> {
    let n = data.len();
    let trust = deg + n;
    let mut prod = FormalFraction::one(n, trust);
    for (j, (a, d)) in data.iter().enumerate() {
        let one = coset_fourier_closed_form(a, d, trust)?;
        let e: Vec<Rational> = (0..n).map(|i| if i == j { Rational::one() } else { Rational::zero() }).collect();
        let poles: Vec<Vec<Rational>> = one.denominators().iter().map(|_| e.clone()).collect();
        prod = prod.mul(&FormalFraction::from_coordinates(one.numerator(), &[e], &poles, n)?)?;
    }
    Ok(prod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epscone::{cone_coords, shift_tuple};
    use crate::qlinalg::{int, rat};
    use crate::schwartz::{act_test, fourier, tensor, Coset};
    use proptest::prelude::*;

    fn chi(base: &[Rational], d: Rational) -> TestFunction {
        TestFunction::chi(base, &d).unwrap()
    }

    fn cone(rows: &[&[i64]]) -> SimplicialCone {
        SimplicialCone::new(rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect()).unwrap()
    }

    fn m(rows: &[&[i64]]) -> QMatrix {
        QMatrix::from_ints(rows)
    }

    fn eq(a: &FormalFraction, b: &FormalFraction, deg: i64) -> bool {
        a.compare(b, deg).unwrap().is_none()
    }

    /// Dense scan of a bounding box at twice the grid resolution.
    fn box_scan(gens: &[Vec<Rational>], f: &TestFunction) -> Vec<(Vec<Rational>, CycNum)> {
        let n = f.dim();
        let scaled = period_multiples(gens, &f.period());
        let mut lo = vec![Rational::zero(); n];
        let mut hi = vec![Rational::zero(); n];
        for v in &scaled {
            for i in 0..n {
                if v[i].is_negative() {
                    lo[i] += &v[i];
                } else {
                    hi[i] += &v[i];
                }
            }
        }
        let step = 2 * f.support_denominator() as i64;
        let axes: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                let a = (&lo[i] * int(step)).floor().to_integer().to_i64().unwrap();
                let b = (&hi[i] * int(step)).ceil().to_integer().to_i64().unwrap();
                (a..=b).map(|k| rat(k, step)).collect()
            })
            .collect();
        let mut pts: Vec<Vec<Rational>> = vec![Vec::new()];
        for a in &axes {
            pts = pts.into_iter().flat_map(|p| a.iter().map(move |x| [p.clone(), vec![x.clone()]].concat())).collect();
        }
        let mut out: Vec<(Vec<Rational>, CycNum)> = pts
            .into_iter()
            .filter(|w| {
                matches!(cone_coords(&scaled, w), Ok(Some(l))
                    if l.iter().all(|x| x.is_positive() && *x <= Rational::one()))
            })
            .map(|w| {
                let v = f.eval(&w);
                (w, v)
            })
            .filter(|(_, v)| !v.is_zero())
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn sorted(mut p: FundamentalDomainPoints) -> Vec<(Vec<Rational>, CycNum)> {
        p.points.sort_by(|a, b| a.0.cmp(&b.0));
        p.points
    }

    #[test]
    fn enumeration_examples() {
        let z = chi(&[int(0)], int(1));
        let p = sorted(enumerate_fundamental_domain(&[vec![int(1)]], &z).unwrap());
        assert_eq!(p, vec![(vec![int(1)], CycNum::one())]);
        let p = sorted(enumerate_fundamental_domain(&[vec![int(2)]], &z).unwrap());
        assert_eq!(p, vec![(vec![int(1)], CycNum::one()), (vec![int(2)], CycNum::one())]);
        let z2 = chi(&[int(0), int(0)], int(1));
        let e = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        let p = sorted(enumerate_fundamental_domain(&e, &z2).unwrap());
        assert_eq!(p, vec![(vec![int(1), int(1)], CycNum::one())]);
        assert!(matches!(
            enumerate_fundamental_domain(&[vec![int(1), int(2)], vec![int(2), int(4)]], &z2),
            Err(PairingError::Dependent)
        ));
    }

    #[test]
    fn enumeration_lower_rank() {
        let f = chi(&[rat(1, 2), int(0), rat(1, 3)], int(1));
        let gens = vec![vec![int(1), int(2), int(0)], vec![int(0), int(1), int(-1)]];
        assert_eq!(sorted(enumerate_fundamental_domain(&gens, &f).unwrap()), box_scan(&gens, &f));
    }

    fn small_function(n: usize) -> impl Strategy<Value = TestFunction> {
        prop::collection::vec(
            (-2i64..3, prop::collection::vec(0i64..6, n), 1i64..4, prop::collection::vec(1i64..4, n)),
            1..3,
        )
        .prop_map(move |terms| {
            let terms: Vec<(CycNum, Coset)> = terms
                .into_iter()
                .map(|(c, a, den, d)| {
                    let base = a.iter().map(|&x| rat(x, den)).collect();
                    let mods = d.iter().map(|&x| int(x)).collect();
                    (CycNum::from_int(c), Coset::new(base, mods).unwrap())
                })
                .collect();
            TestFunction::from_cosets(n, &terms).unwrap()
        })
    }

    fn gens_strategy(n: usize, r: usize) -> impl Strategy<Value = Vec<Vec<Rational>>> {
        prop::collection::vec(prop::collection::vec(-2i64..3, n), r)
            .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().map(int).collect()).collect())
            .prop_filter("independent", |g: &Vec<Vec<Rational>>| cone_coords(g, &vec![Rational::zero(); g[0].len()]).is_ok())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn enumeration_matches_box_scan(f in small_function(2), gens in gens_strategy(2, 2)) {
            prop_assume!(!f.is_zero());
            prop_assert_eq!(sorted(enumerate_fundamental_domain(&gens, &f).unwrap()), box_scan(&gens, &f));
        }

        #[test]
        fn enumeration_matches_box_scan_rank_one(f in small_function(2), gens in gens_strategy(2, 1)) {
            prop_assume!(!f.is_zero());
            prop_assert_eq!(sorted(enumerate_fundamental_domain(&gens, &f).unwrap()), box_scan(&gens, &f));
        }

        #[test]
        fn folded_pairing_matches_literal(f in small_function(2), gens in gens_strategy(2, 2)) {
            let c = SimplicialCone::new(gens).unwrap();
            let a = sh_pair(&c, &f, 4).unwrap();
            let b = sh_pair_direct(&c, &f, 4).unwrap();
            prop_assert!(eq(&a, &b, 4));
            prop_assert_eq!(a.numerator(), b.numerator());
        }

        #[test]
        fn folded_pairing_matches_literal_on_fourier_images(f in small_function(2), gens in gens_strategy(2, 2)) {
            prop_assume!(!f.is_zero());
            let fh = fourier(&f).unwrap();
            let c = SimplicialCone::new(gens).unwrap();
            prop_assert!(eq(&sh_pair(&c, &fh, 3).unwrap(), &sh_pair_direct(&c, &fh, 3).unwrap(), 3));
        }

        #[test]
        fn pairing_is_additive(f in small_function(2), g in small_function(2), gens in gens_strategy(2, 2)) {
            let c = SimplicialCone::new(gens).unwrap();
            let s = sh_pair(&c, &f.add(&g).unwrap(), 4).unwrap();
            let t = sh_pair(&c, &f, 4).unwrap().add(&sh_pair(&c, &g, 4).unwrap()).unwrap();
            prop_assert!(eq(&s, &t, 4));
        }

        #[test]
        fn rescaling_generators(f in small_function(2), gens in gens_strategy(2, 2), k1 in 1i64..4, k2 in 1i64..3) {
            prop_assume!(!f.is_zero());
            let a = pair_with_generators(&gens, &f, 4).unwrap();
            let scaled: Vec<Vec<Rational>> = gens
                .iter()
                .zip([k1, k2])
                .map(|(g, k)| g.iter().map(|x| x * int(k)).collect())
                .collect();
            let b = pair_with_generators(&scaled, &f, 4).unwrap();
            prop_assert!(eq(&a, &b, 4));
        }
    }

    #[test]
    fn fractional_generator_scales() {
        // The Fourier image has period 3/2, so the period-lattice generators
        // are half-integral multiples of the primitive ones.
        let f = TestFunction::chi(&[rat(2, 3), rat(2, 3)], &int(2)).unwrap().neg();
        let fh = fourier(&f).unwrap();
        let gens = vec![vec![int(1), int(-2)], vec![int(-1), int(0)]];
        let c = SimplicialCone::new(gens.clone()).unwrap();
        let base = pair_with_generators(&gens, &fh, 4).unwrap();
        for k in [rat(1, 2), rat(3, 2), int(3)] {
            let g: Vec<Vec<Rational>> = gens.iter().map(|v| v.iter().map(|x| x * &k).collect()).collect();
            assert!(eq(&base, &pair_with_generators(&g, &fh, 4).unwrap(), 4));
        }
        assert!(eq(&base, &sh_pair_direct(&c, &fh, 4).unwrap(), 4));
        assert!(eq(&base, &sh_pair(&c, &fh, 4).unwrap(), 4));
    }

    #[test]
    fn half_line_against_integers() {
        let c = cone(&[&[1]]);
        let v = sh_pair(&c, &chi(&[int(0)], int(1)), 4).unwrap();
        // e^T/(1 - e^T) = -1/T - 1/2 - T/12 + T^3/720 + ...
        let expect = [rat(-1, 1), rat(-1, 2), rat(-1, 12), int(0), rat(1, 720), int(0)];
        assert_eq!(v.denominators().len(), 1);
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(v.numerator().coeff(&[k as u32]), CycNum::from_rational(e));
        }
        assert_eq!(v.trust(), 4);
        let closed = reciprocal_one_minus(&int(0), &[int(1)], 5).unwrap().sub(&FormalFraction::one(1, 5)).unwrap();
        assert!(eq(&v, &closed, 4));
    }

    fn lemma_closed_form(a: &Rational, d: &Rational, deg: usize) -> FormalFraction {
        coset_fourier_closed_form(a, d, deg).unwrap()
    }

    #[test]
    fn one_dimensional_fourier_closed_form() {
        for (a, d) in [(int(0), int(1)), (rat(1, 3), int(1)), (rat(1, 2), int(2)), (rat(2, 3), int(3))] {
            let fh = fourier(&chi(&[a.clone()], d.clone())).unwrap();
            let v = phi_nsh(&[QMatrix::identity(1)], &fh, 8).unwrap();
            assert!(eq(&v, &lemma_closed_form(&a, &d, 8), 8), "a={a} d={d}");
        }
    }

    #[test]
    fn shift_tuple_factorizes() {
        let data = [(rat(1, 3), int(1)), (rat(1, 2), int(2))];
        let fs: Vec<TestFunction> = data.iter().map(|(a, d)| fourier(&chi(std::slice::from_ref(a), d.clone())).unwrap()).collect();
        let f = tensor(&fs).unwrap();
        let v = phi_nsh(&shift_tuple(2), &f, 5).unwrap();
        let prod = product_closed_form(&data, 5).unwrap();
        assert!(eq(&v, &prod, 5));
        let w = phi_sh(&shift_tuple(2), &f, 5).unwrap();
        assert!(eq(&v, &w, 5));
    }

    #[test]
    fn naive_equivariance_instances() {
        let gammas = [m(&[&[1, 2], &[0, 1]]), m(&[&[2, 1], &[1, 1]])];
        let f = chi(&[rat(1, 2), rat(1, 3)], int(1));
        for g in [m(&[&[0, 1], &[1, 0]]), m(&[&[2, 1], &[1, -1]]), m(&[&[1, 3], &[-1, 2]])] {
            let moved: Vec<QMatrix> = gammas.iter().map(|x| g.mul(x)).collect();
            let lhs = phi_nsh(&moved, &f, 5).unwrap();
            let gf = act_test(&g.transpose(), &f).unwrap();
            let rhs = act_value(&g, &phi_nsh(&gammas, &gf, 5).unwrap()).unwrap();
            assert!(eq(&lhs, &rhs, 5));
        }
    }

    #[test]
    fn shintani_equivariance_with_sign() {
        let alphas = [m(&[&[1, 0], &[2, 1]]), m(&[&[1, 1], &[1, 2]])];
        let f = chi(&[rat(1, 3), int(0)], int(2));
        for g in [m(&[&[0, 1], &[1, 0]]), m(&[&[1, 2], &[1, 1]]), m(&[&[2, 1], &[1, 1]])] {
            let moved: Vec<QMatrix> = alphas.iter().map(|x| g.mul(x)).collect();
            let lhs = phi_sh(&moved, &f, 4).unwrap();
            let gf = act_test(&g.transpose(), &f).unwrap();
            let mut rhs = act_value(&g, &phi_sh(&alphas, &gf, 4).unwrap()).unwrap();
            if g.sign().unwrap() < 0 {
                rhs = rhs.neg();
            }
            assert!(eq(&lhs, &rhs, 4));
        }
    }

    #[test]
    fn three_dimensional_folding() {
        let c = cone(&[&[1, 2, 0], &[0, 1, 1], &[1, 0, 2]]);
        let f = chi(&[rat(1, 2), int(0), rat(1, 3)], int(1));
        assert!(eq(&sh_pair(&c, &f, 3).unwrap(), &sh_pair_direct(&c, &f, 3).unwrap(), 3));
        let fh = fourier(&f).unwrap();
        assert!(eq(&sh_pair(&c, &fh, 3).unwrap(), &sh_pair_direct(&c, &fh, 3).unwrap(), 3));
    }
}
