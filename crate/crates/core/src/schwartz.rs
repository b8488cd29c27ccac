//! Locally constant functions with bounded support on Q^n.
//!
//! A function is stored on a cubical grid: it is supported on `(1/h) Z^n` and
//! periodic under `g Z^n`. Values are keyed by the integer vector `h x` in
//! `[0, g h)^n`. The canonical form uses the least period and the least `h`,
//! so structural equality is equality of functions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cyclotomic::{CycError, CycNum, RootSum};
use crate::qlinalg::{den_lcm, fmt_rational, hnf_mod, parse_rational, quotient_reps, rational_lcm, LinalgError, QMatrix, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchwartzError {
    #[error("the zero function has no period")]
    ZeroFunction,
    #[error("value {0} at {1} is not a rational integer")]
    NonInteger(String, String),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("coset moduli must be positive")]
    BadModulus,
    #[error("grid too large")]
    Overflow,
    #[error("invalid test function: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// `prod_i (base_i + moduli_i Z)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coset {
    pub base: Vec<Rational>,
    pub moduli: Vec<Rational>,
}

impl Coset {
    pub fn new(base: Vec<Rational>, moduli: Vec<Rational>) -> Result<Self, SchwartzError> {
        if base.len() != moduli.len() {
            return Err(SchwartzError::Dimension(base.len(), moduli.len()));
        }
        if moduli.iter().any(|d| !d.is_positive()) {
            return Err(SchwartzError::BadModulus);
        }
        let base = base.iter().zip(&moduli).map(|(a, d)| a - d * (a / d).floor()).collect();
        Ok(Coset { base, moduli })
    }

    /// `a + d Z^n`.
    pub fn scalar(base: Vec<Rational>, d: &Rational) -> Result<Self, SchwartzError> {
        let n = base.len();
        Self::new(base, vec![d.clone(); n])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    n: usize,
    h: u64,
    per: u64,
    values: BTreeMap<Vec<i64>, CycNum>,
}

fn to_u64(x: &BigInt) -> Result<u64, SchwartzError> {
    x.to_u64().filter(|&v| v > 0 && v < (1 << 40)).ok_or(SchwartzError::Overflow)
}

fn prime_factors(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            out.push(p);
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        p += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// All integer vectors in `[0, m)^n`.
fn cube(n: usize, m: u64) -> impl Iterator<Item = Vec<i64>> {
    let total = (m as usize).pow(n as u32);
    (0..total).map(move |mut idx| {
        let mut v = vec![0i64; n];
        for x in v.iter_mut().rev() {
            *x = (idx % m as usize) as i64;
            idx /= m as usize;
        }
        v
    })
}

impl TestFunction {
    pub fn zero(n: usize) -> Self {
        TestFunction { n, h: 1, per: 1, values: BTreeMap::new() }
    }

    /// Builds and normalizes a function from raw grid data.
    pub fn from_grid(n: usize, h: u64, per: u64, values: BTreeMap<Vec<i64>, CycNum>) -> Self {
        let mut f = TestFunction { n, h, per, values };
        f.canonicalize();
        f
    }

    /// `sum coeff * indicator(coset)`, normalized.
    pub fn from_cosets(n: usize, terms: &[(CycNum, Coset)]) -> Result<Self, SchwartzError> {
        let mut h = BigInt::one();
        let mut g: Option<Rational> = None;
        for (_, c) in terms {
            if c.base.len() != n {
                return Err(SchwartzError::Dimension(n, c.base.len()));
            }
            h = h.lcm(&den_lcm(c.base.iter().chain(&c.moduli)));
            for d in &c.moduli {
                g = Some(match g {
                    None => d.clone(),
                    Some(x) => rational_lcm(&x, d),
                });
            }
        }
        let Some(g) = g else { return Ok(Self::zero(n)) };
        let per = to_u64(&(&g * Rational::from_integer(h.clone())).to_integer())?;
        let hh = to_u64(&h)?;
        let hr = Rational::from_integer(h);
        let mut values: BTreeMap<Vec<i64>, CycNum> = BTreeMap::new();
        for (coeff, c) in terms {
            let axes: Vec<Vec<i64>> = c
                .base
                .iter()
                .zip(&c.moduli)
                .map(|(a, d)| {
                    let a = (a * &hr).to_integer().to_i64().unwrap();
                    let d = (d * &hr).to_integer().to_i64().unwrap();
                    (0..per as i64 / d).map(|j| a + j * d).collect()
                })
                .collect();
            for p in product(&axes) {
                let e = values.entry(p).or_insert_with(CycNum::zero);
                *e = &*e + coeff;
            }
        }
        Ok(Self::from_grid(n, hh, per, values))
    }

    pub fn indicator(c: &Coset) -> Result<Self, SchwartzError> {
        Self::from_cosets(c.base.len(), &[(CycNum::one(), c.clone())])
    }

    /// Indicator of `a + d Z^n`.
    pub fn chi(base: &[Rational], d: &Rational) -> Result<Self, SchwartzError> {
        Self::indicator(&Coset::scalar(base.to_vec(), d)?)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Support denominator `h`.
    pub fn support_denominator(&self) -> u64 {
        self.h
    }

    /// Period `g`.
    pub fn period(&self) -> Rational {
        Rational::new(BigInt::from(self.per), BigInt::from(self.h))
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw grid data: support denominator `h`, period `g h` in grid units,
    /// and the nonzero values keyed by `h x` on the cell `[0, g h)^n`.
    pub fn grid(&self) -> (u64, u64, &BTreeMap<Vec<i64>, CycNum>) {
        (self.h, self.per, &self.values)
    }

    /// Nonzero values on one period cell, as `(point, value)`.
    pub fn points(&self) -> Vec<(Vec<Rational>, CycNum)> {
        self.values
            .iter()
            .map(|(k, v)| (k.iter().map(|&x| Rational::new(BigInt::from(x), BigInt::from(self.h))).collect(), v.clone()))
            .collect()
    }

    pub fn eval(&self, x: &[Rational]) -> CycNum {
        let h = Rational::from_integer(BigInt::from(self.h));
        let mut key = Vec::with_capacity(self.n);
        for xi in x {
            let s = xi * &h;
            if !s.is_integer() {
                return CycNum::zero();
            }
            key.push(s.to_integer().mod_floor(&BigInt::from(self.per)).to_i64().unwrap());
        }
        self.values.get(&key).cloned().unwrap_or_else(CycNum::zero)
    }

    fn canonicalize(&mut self) {
        self.values.retain(|_, v| !v.is_zero());
        if self.values.is_empty() {
            self.h = 1;
            self.per = 1;
            return;
        }
        // least scalar period dividing the current one
        let mut per = self.per;
        for p in prime_factors(self.per) {
            while per.is_multiple_of(p) && self.has_period(per / p) {
                per /= p;
            }
        }
        if per != self.per {
            self.values.retain(|k, _| k.iter().all(|&x| x < per as i64));
            self.per = per;
        }
        let mut c = self.h.gcd(&self.per);
        for k in self.values.keys() {
            for &x in k {
                c = c.gcd(&(x as u64));
            }
        }
        if c > 1 {
            self.h /= c;
            self.per /= c;
            self.values = std::mem::take(&mut self.values)
                .into_iter()
                .map(|(k, v)| (k.iter().map(|&x| x / c as i64).collect(), v))
                .collect();
        }
    }

    fn has_period(&self, s: u64) -> bool {
        let m = self.per as i64;
        self.values.iter().all(|(k, v)| {
            (0..self.n).all(|i| {
                let mut q = k.clone();
                q[i] = (q[i] + s as i64) % m;
                self.values.get(&q) == Some(v)
            })
        })
    }

    /// Values on a finer grid: `h | h2` and `per / h` divides `per2 / h2`.
    fn regrid(&self, h2: u64, per2: u64) -> BTreeMap<Vec<i64>, CycNum> {
        let s = (h2 / self.h) as i64;
        let step = self.per as i64 * s;
        let reps = (per2 as i64 / step) as u64;
        let mut out = BTreeMap::new();
        for (k, v) in &self.values {
            let base: Vec<i64> = k.iter().map(|x| x * s).collect();
            for t in cube(self.n, reps) {
                let p: Vec<i64> = base.iter().zip(&t).map(|(b, j)| b + j * step).collect();
                out.insert(p, v.clone());
            }
        }
        out
    }

    fn joint_grid(&self, o: &TestFunction) -> Result<(u64, u64), SchwartzError> {
        let h = self.h.lcm(&o.h);
        let g = rational_lcm(&self.period(), &o.period());
        let per = to_u64(&(g * Rational::from_integer(BigInt::from(h))).to_integer())?;
        Ok((h, per))
    }

    pub fn add(&self, o: &TestFunction) -> Result<TestFunction, SchwartzError> {
        if self.n != o.n {
            return Err(SchwartzError::Dimension(self.n, o.n));
        }
        if o.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(o.clone());
        }
        let (h, per) = self.joint_grid(o)?;
        let mut a = self.regrid(h, per);
        for (k, v) in o.regrid(h, per) {
            let e = a.entry(k).or_insert_with(CycNum::zero);
            *e = &*e + &v;
        }
        Ok(Self::from_grid(self.n, h, per, a))
    }

    pub fn scale(&self, c: &CycNum) -> TestFunction {
        let values = self.values.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        Self::from_grid(self.n, self.h, self.per, values)
    }

    pub fn neg(&self) -> TestFunction {
        self.scale(&CycNum::from_int(-1))
    }

    pub fn sub(&self, o: &TestFunction) -> Result<TestFunction, SchwartzError> {
        self.add(&o.neg())
    }

    /// Values as rational integers, or an error naming the first offender.
    pub fn integer_values(&self) -> Result<Vec<(Vec<Rational>, BigInt)>, SchwartzError> {
        self.points()
            .into_iter()
            .map(|(p, v)| match v.as_rational() {
                Some(r) if r.is_integer() => Ok((p, r.to_integer())),
                _ => Err(SchwartzError::NonInteger(v.to_string(), fmt_point(&p))),
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "h": self.h,
            "g": fmt_rational(&self.period()),
            "values": self.points().iter().map(|(p, v)| json!({
                "point": p.iter().map(fmt_rational).collect::<Vec<_>>(),
                "cycnum": v.to_json(),
            })).collect::<Vec<_>>(),
        })
    }

    /// Reads either the grid form `{n, h, g, values}` or the coset-sum form
    /// `{terms: [{coeff, base, moduli}]}` (an `n` field is needed only when
    /// `terms` is empty).
    pub fn from_json(v: &Value) -> Result<TestFunction, SchwartzError> {
        let perr = |s: &str| SchwartzError::Parse(s.to_string());
        let rat = |x: &Value| -> Result<Rational, SchwartzError> {
            match x {
                Value::String(s) => Ok(parse_rational(s)?),
                Value::Number(k) => k.as_i64().map(crate::qlinalg::int).ok_or_else(|| perr("non-integer number")),
                _ => Err(perr("expected a rational")),
            }
        };
        let vec = |x: &Value| -> Result<Vec<Rational>, SchwartzError> {
            x.as_array().ok_or_else(|| perr("expected an array"))?.iter().map(rat).collect()
        };
        if let Some(terms) = v.get("terms") {
            let terms = terms.as_array().ok_or_else(|| perr("terms must be an array"))?;
            let mut out = Vec::new();
            for t in terms {
                let coeff = match t.get("coeff") {
                    None => CycNum::one(),
                    Some(c) => CycNum::from_json(c).map_err(SchwartzError::Parse)?,
                };
                let base = vec(t.get("base").ok_or_else(|| perr("missing base"))?)?;
                let moduli = match t.get("moduli").ok_or_else(|| perr("missing moduli"))? {
                    m @ Value::Array(_) => vec(m)?,
                    m => vec![rat(m)?; base.len()],
                };
                out.push((coeff, Coset::new(base, moduli)?));
            }
            let n = match out.first() {
                Some((_, c)) => c.base.len(),
                None => v.get("n").and_then(Value::as_u64).ok_or_else(|| perr("missing n"))? as usize,
            };
            return Self::from_cosets(n, &out);
        }
        let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| perr("missing n"))? as usize;
        let h = rat(v.get("h").ok_or_else(|| perr("missing h"))?)?;
        let g = rat(v.get("g").ok_or_else(|| perr("missing g"))?)?;
        if !h.is_integer() || !h.is_positive() || !g.is_positive() {
            return Err(perr("h must be a positive integer and g positive"));
        }
        let per = &g * &h;
        if !per.is_integer() {
            return Err(perr("g must lie in (1/h)Z"));
        }
        let mut values = BTreeMap::new();
        for e in v.get("values").and_then(Value::as_array).ok_or_else(|| perr("missing values"))? {
            let p = vec(e.get("point").ok_or_else(|| perr("missing point"))?)?;
            if p.len() != n {
                return Err(SchwartzError::Dimension(n, p.len()));
            }
            let c = CycNum::from_json(e.get("cycnum").ok_or_else(|| perr("missing cycnum"))?).map_err(SchwartzError::Parse)?;
            let key: Option<Vec<i64>> = p
                .iter()
                .map(|x| {
                    let s = x * &h;
                    let k = s.to_integer().to_i64()?;
                    (s.is_integer() && 0 <= k && Rational::from_integer(BigInt::from(k)) < per).then_some(k)
                })
                .collect();
            let key = key.ok_or_else(|| perr("point outside the grid cell"))?;
            values.insert(key, c);
        }
        Ok(Self::from_grid(n, to_u64(&h.to_integer())?, to_u64(&per.to_integer())?, values))
    }
}

fn fmt_point(p: &[Rational]) -> String {
    format!("({})", p.iter().map(fmt_rational).collect::<Vec<_>>().join(", "))
}

fn product(axes: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        let mut next = Vec::with_capacity(out.len() * a.len());
        for p in &out {
            for &x in a {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

pub fn normalize(n: usize, terms: &[(CycNum, Coset)]) -> Result<TestFunction, SchwartzError> {
    TestFunction::from_cosets(n, terms)
}

/// `(g . f)(x) = f(x g)`.
pub fn act_test(g: &QMatrix, f: &TestFunction) -> Result<TestFunction, SchwartzError> {
    let n = f.n;
    if g.dim() != n {
        return Err(SchwartzError::Dimension(n, g.dim()));
    }
    if f.is_zero() {
        return Ok(f.clone());
    }
    let inv = g.inverse()?;
    let hr = Rational::from_integer(BigInt::from(f.h));
    let scaled: Vec<Rational> = inv.entries().iter().map(|x| x / &hr).collect();
    let h_out = to_u64(&den_lcm(scaled.iter()))?;
    let period = f.period();
    let m = &period * g.integral_scale();
    let per_r = &m * Rational::from_integer(BigInt::from(h_out));
    debug_assert!(per_r.is_integer());
    let per_out = to_u64(&per_r.to_integer())?;
    // the lattice g Z^n inv, scaled to integers
    let sc = &period * Rational::from_integer(BigInt::from(h_out));
    let gens: Vec<Vec<i128>> = (0..n)
        .map(|i| inv.row(i).iter().map(|x| (x * &sc).to_integer().to_i128().unwrap()).collect())
        .collect();
    let basis = hnf_mod(&gens, n, per_out as i128)?;
    let reps = quotient_reps(&basis, per_out as i128);
    // support points map by k -> k inv (h_out / h)
    let ratio = Rational::new(BigInt::from(h_out), BigInt::from(f.h));
    let mut values = BTreeMap::new();
    for (k, v) in &f.values {
        let kr: Vec<Rational> = k.iter().map(|&x| Rational::from_integer(BigInt::from(x)) * &ratio).collect();
        let base: Vec<i128> = inv.row_mul(&kr).iter().map(|x| x.to_integer().to_i128().unwrap()).collect();
        for r in &reps {
            let key: Vec<i64> = base.iter().zip(r).map(|(b, x)| (b + x).rem_euclid(per_out as i128) as i64).collect();
            values.insert(key, v.clone());
        }
    }
    Ok(TestFunction::from_grid(n, h_out, per_out, values))
}

/// Product of one-dimensional functions.
pub fn tensor(fs: &[TestFunction]) -> Result<TestFunction, SchwartzError> {
    for f in fs {
        if f.n != 1 {
            return Err(SchwartzError::Dimension(1, f.n));
        }
    }
    let n = fs.len();
    if fs.iter().any(|f| f.is_zero()) {
        return Ok(TestFunction::zero(n));
    }
    let mut h = 1u64;
    let mut g = Rational::one();
    for f in fs {
        h = h.lcm(&f.h);
        g = rational_lcm(&g, &f.period());
    }
    let per = to_u64(&(g * Rational::from_integer(BigInt::from(h))).to_integer())?;
    let grids: Vec<Vec<(i64, CycNum)>> =
        fs.iter().map(|f| f.regrid(h, per).into_iter().map(|(k, v)| (k[0], v)).collect()).collect();
    let mut values: BTreeMap<Vec<i64>, CycNum> = BTreeMap::new();
    values.insert(Vec::new(), CycNum::one());
    for grid in &grids {
        let mut next = BTreeMap::new();
        for (k, v) in &values {
            for (x, w) in grid {
                let mut q = k.clone();
                q.push(*x);
                next.insert(q, v * w);
            }
        }
        values = next;
    }
    Ok(TestFunction::from_grid(n, h, per, values))
}

/// `f^(y) = integral f(x) e(-<x, y>) dx` with `Z^n` of volume one.
pub fn fourier(f: &TestFunction) -> Result<TestFunction, SchwartzError> {
    let n = f.n;
    if f.is_zero() {
        return Ok(f.clone());
    }
    let big_n = f.per;
    let c = big_n.gcd(&f.h);
    let h_out = big_n / c;
    let per_out = f.h * h_out;
    let step = (f.h / c) as i64;
    // 1 / g^n
    let vol = Rational::new(BigInt::from(f.h), BigInt::from(big_n)).pow(n as i32);
    // every value as integer multiples of powers of zeta_l over one denominator
    let mut l = big_n;
    let mut den = BigInt::one();
    for v in f.values.values() {
        let (m, _, d) = v.parts();
        l = l.lcm(&m);
        den = den.lcm(d);
    }
    let mut sum = RootSum::new(l)?;
    let mut support = Vec::with_capacity(f.values.len());
    for (k, v) in &f.values {
        let (m, num, d) = v.parts();
        let scale = &den / d;
        let mut terms = Vec::new();
        for (j, x) in num.iter().enumerate() {
            if !x.is_zero() {
                let c = (x * &scale).to_i128().ok_or(CycError::Overflow)?;
                terms.push((j as u64 * (l / m), c));
            }
        }
        support.push((k, terms));
    }
    let unit = l / big_n;
    let mut values = BTreeMap::new();
    for k in cube(n, big_n) {
        sum.clear();
        for (p, terms) in &support {
            let e = p.iter().zip(&k).map(|(a, b)| a * b).sum::<i64>().rem_euclid(big_n as i64) as u64;
            let shift = (big_n - e) % big_n * unit;
            for &(o, c) in terms {
                sum.add_term(o + shift, c)?;
            }
        }
        if sum.is_zero() {
            continue;
        }
        let val = sum.finish(&den).scale(&vol);
        values.insert(k.iter().map(|x| x * step).collect(), val);
    }
    Ok(TestFunction::from_grid(n, h_out, per_out, values))
}

pub fn period_lattice(f: &TestFunction) -> Result<Rational, SchwartzError> {
    if f.is_zero() {
        return Err(SchwartzError::ZeroFunction);
    }
    Ok(f.period())
}

/// `f = sum b_j chi(a_j + d_j Z^n)` for integer-valued `f`, one term per
/// support point of the canonical grid cell.
pub fn scalar_modulus_decomposition(f: &TestFunction) -> Result<Vec<(BigInt, Vec<Rational>, Rational)>, SchwartzError> {
    let g = f.period();
    Ok(f.integer_values()?.into_iter().map(|(p, b)| (b, p, g.clone())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{int, rat, shift_permutation};
    use proptest::prelude::*;

    fn chi(base: &[Rational], d: Rational) -> TestFunction {
        TestFunction::chi(base, &d).unwrap()
    }

    /// Pointwise oracle on a rational grid.
    fn agree_on(f: &TestFunction, g: &TestFunction, n: usize, den: i64, range: i64) -> bool {
        let axis: Vec<i64> = (-range * den..range * den).collect();
        let axes = vec![axis; n];
        product(&axes).iter().all(|p| {
            let x: Vec<Rational> = p.iter().map(|&k| rat(k, den)).collect();
            f.eval(&x) == g.eval(&x)
        })
    }

    #[test]
    fn normalize_examples() {
        let f = chi(&[int(0)], int(1));
        assert_eq!((f.support_denominator(), f.period()), (1, int(1)));
        assert_eq!(f.points(), vec![(vec![int(0)], CycNum::one())]);
        let f = chi(&[rat(1, 2)], int(1)).add(&chi(&[int(0)], int(1))).unwrap();
        // values 1 at 0 and 1/2; the least period is 1/2
        assert_eq!((f.support_denominator(), f.period()), (2, rat(1, 2)));
        assert_eq!(f.eval(&[int(0)]), CycNum::one());
        assert_eq!(f.eval(&[rat(1, 2)]), CycNum::one());
        assert!(f.eval(&[rat(1, 4)]).is_zero());
        let direct = chi(&[rat(1, 3)], int(1));
        let refined = chi(&[rat(1, 3)], int(2)).add(&chi(&[rat(4, 3)], int(2))).unwrap();
        assert_eq!(direct, refined);
        // chi_Z + chi_{1/2+Z} = chi_{(1/2) Z}
        assert_eq!(f, chi(&[int(0)], rat(1, 2)));
    }

    #[test]
    fn act_test_examples() {
        let f = chi(&[rat(1, 3), rat(1, 2)], int(2));
        assert_eq!(act_test(&QMatrix::identity(2), &f).unwrap(), f);
        let swapped = act_test(&shift_permutation(2), &f).unwrap();
        assert_eq!(swapped, chi(&[rat(1, 2), rat(1, 3)], int(2)));
        let d = QMatrix::diag(&[rat(1, 2), int(1)]);
        let g = act_test(&d, &chi(&[int(0), int(0)], int(1))).unwrap();
        let expected = TestFunction::indicator(&Coset::new(vec![int(0), int(0)], vec![int(2), int(1)]).unwrap()).unwrap();
        assert_eq!(g, expected);
        // pointwise oracle on a 4x4 grid of quarter points
        let base = chi(&[int(0), int(0)], int(1));
        for den in [1, 2, 4] {
            let axes = vec![(0..4 * den).collect::<Vec<i64>>(); 2];
            for p in product(&axes) {
                let x: Vec<Rational> = p.iter().map(|&k| rat(k, den)).collect();
                assert_eq!(g.eval(&x), base.eval(&d.row_mul(&x)));
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let z = chi(&[int(0)], int(1));
        assert_eq!(tensor(&[z.clone(), z.clone()]).unwrap(), chi(&[int(0), int(0)], int(1)));
        let h = chi(&[rat(1, 2)], int(1));
        assert_eq!(tensor(&[h, z]).unwrap(), chi(&[rat(1, 2), int(0)], int(1)));
    }

    #[test]
    fn fourier_examples() {
        let z = chi(&[int(0)], int(1));
        assert_eq!(fourier(&z).unwrap(), z);
        // chi_{1/2 + Z} -> (-1)^k on the integers
        let f = fourier(&chi(&[rat(1, 2)], int(1))).unwrap();
        for k in -3..4 {
            assert_eq!(f.eval(&[int(k)]), CycNum::from_int(if k % 2 == 0 { 1 } else { -1 }));
        }
        assert!(f.eval(&[rat(1, 2)]).is_zero());
        // coset formula (1/d) e(-a k / d) at y = k / d
        for (a, d) in [(rat(1, 3), int(2)), (rat(2, 3), int(3)), (rat(1, 2), rat(3, 2))] {
            let f = fourier(&chi(&[a.clone()], d.clone())).unwrap();
            for k in -4..8 {
                let y = int(k) / &d;
                let expected = CycNum::root_of_unity(&(-&a * &y)).unwrap().scale(&(int(1) / &d));
                assert_eq!(f.eval(&[y]), expected);
                assert!(f.eval(&[&int(k) / &d + rat(1, 7) / &d]).is_zero());
            }
        }
    }

    #[test]
    fn period_examples() {
        assert_eq!(period_lattice(&chi(&[int(0)], int(1))).unwrap(), int(1));
        assert_eq!(period_lattice(&chi(&[rat(1, 3)], int(2))).unwrap(), int(2));
        let f = chi(&[int(0)], int(1)).sub(&chi(&[rat(1, 2)], int(1))).unwrap();
        assert_eq!(period_lattice(&f).unwrap(), int(1));
        assert_eq!(period_lattice(&TestFunction::zero(1)), Err(SchwartzError::ZeroFunction));
    }

    #[test]
    fn decomposition_examples() {
        let f = chi(&[rat(1, 2), int(0)], int(1));
        assert_eq!(scalar_modulus_decomposition(&f).unwrap(), vec![(BigInt::one(), vec![rat(1, 2), int(0)], int(1))]);
        let f = chi(&[int(0), int(0)], int(1)).scale(&CycNum::from_int(2));
        assert_eq!(scalar_modulus_decomposition(&f).unwrap(), vec![(BigInt::from(2), vec![int(0), int(0)], int(1))]);
        let f = TestFunction::indicator(&Coset::new(vec![int(0), int(0)], vec![rat(1, 2), int(1)]).unwrap()).unwrap();
        let terms = scalar_modulus_decomposition(&f).unwrap();
        assert_eq!(terms.len(), 2);
        let rebuilt: Vec<(CycNum, Coset)> = terms
            .iter()
            .map(|(b, a, d)| (CycNum::from_rational(&Rational::from_integer(b.clone())), Coset::scalar(a.clone(), d).unwrap()))
            .collect();
        assert_eq!(TestFunction::from_cosets(2, &rebuilt).unwrap(), f);
        let bad = chi(&[int(0)], int(1)).scale(&CycNum::root_of_unity(&rat(1, 3)).unwrap());
        assert!(matches!(scalar_modulus_decomposition(&bad), Err(SchwartzError::NonInteger(..))));
    }

    #[test]
    fn json_round_trip() {
        let f = chi(&[rat(1, 3), int(0)], int(2)).scale(&CycNum::root_of_unity(&rat(1, 4)).unwrap());
        assert_eq!(TestFunction::from_json(&f.to_json()).unwrap(), f);
        let v = serde_json::json!({"terms": [{"coeff": 1, "base": ["1/3"], "moduli": "2"}]});
        assert_eq!(TestFunction::from_json(&v).unwrap(), chi(&[rat(1, 3)], int(2)));
    }

    fn arb_coset(n: usize) -> impl Strategy<Value = (i64, Coset)> {
        (
            -2i64..=2,
            proptest::collection::vec((0i64..6, 1i64..=6), n),
            proptest::collection::vec((1i64..=3, 1i64..=2), n),
        )
            .prop_map(|(c, base, moduli)| {
                let base = base.iter().map(|&(p, q)| rat(p, q)).collect();
                let moduli = moduli.iter().map(|&(p, q)| rat(p, q)).collect();
                (c, Coset::new(base, moduli).unwrap())
            })
    }

    fn arb_function(n: usize) -> impl Strategy<Value = TestFunction> {
        proptest::collection::vec(arb_coset(n), 1..3).prop_map(move |terms| {
            let terms: Vec<(CycNum, Coset)> = terms.into_iter().map(|(c, k)| (CycNum::from_int(c), k)).collect();
            TestFunction::from_cosets(n, &terms).unwrap()
        })
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = QMatrix> {
        proptest::collection::vec(-3i64..=3, n * n)
            .prop_map(move |v| {
                let rows: Vec<&[i64]> = v.chunks(n).collect();
                QMatrix::from_ints(&rows)
            })
            .prop_filter("invertible", |m| !m.det().is_zero())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn action_is_pointwise(f in arb_function(2), g in arb_matrix(2)) {
            let a = act_test(&g, &f).unwrap();
            let axes = vec![(-6i64..6).collect::<Vec<_>>(); 2];
            for den in [2i64, 3] {
                for p in product(&axes) {
                    let x: Vec<Rational> = p.iter().map(|&k| rat(k, den)).collect();
                    prop_assert_eq!(a.eval(&x), f.eval(&g.row_mul(&x)));
                }
            }
        }

        #[test]
        fn action_composes(f in arb_function(2), g in arb_matrix(2), d in arb_matrix(2)) {
            let lhs = act_test(&g.mul(&d), &f).unwrap();
            let rhs = act_test(&g, &act_test(&d, &f).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn fourier_action_identity(f in arb_function(2), g in arb_matrix(2)) {
            let lhs = fourier(&act_test(&g, &f).unwrap()).unwrap();
            let it = g.inverse().unwrap().transpose();
            let rhs = act_test(&it, &fourier(&f).unwrap()).unwrap().scale(&CycNum::from_rational(&g.det().abs()));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn fourier_of_tensor(a in arb_function(1), b in arb_function(1)) {
            let lhs = fourier(&tensor(&[a.clone(), b.clone()]).unwrap()).unwrap();
            let rhs = tensor(&[fourier(&a).unwrap(), fourier(&b).unwrap()]).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn normalize_is_refinement_invariant(c in arb_coset(2), m in 2i64..=4, axis in 0usize..2) {
            let (_, coset) = c;
            let direct = TestFunction::indicator(&coset).unwrap();
            let mut terms = Vec::new();
            for b in 0..m {
                let mut base = coset.base.clone();
                let mut moduli = coset.moduli.clone();
                base[axis] = &base[axis] + &moduli[axis] * int(b);
                moduli[axis] = &moduli[axis] * int(m);
                terms.push((CycNum::one(), Coset::new(base, moduli).unwrap()));
            }
            let refined = TestFunction::from_cosets(2, &terms).unwrap();
            prop_assert_eq!(&direct, &refined);
            let again = TestFunction::from_grid(2, refined.h, refined.per, refined.values.clone());
            prop_assert_eq!(&again, &refined);
            prop_assert!(agree_on(&direct, &refined, 2, 6, 2));
        }

        #[test]
        fn addition_is_pointwise(a in arb_function(1), b in arb_function(1)) {
            let s = a.add(&b).unwrap();
            for k in -36i64..36 {
                let x = [rat(k, 6)];
                prop_assert_eq!(s.eval(&x), &a.eval(&x) + &b.eval(&x));
            }
        }
    }
}
