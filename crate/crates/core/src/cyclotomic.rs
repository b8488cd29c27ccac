//! Exact arithmetic in cyclotomic fields Q(zeta_N).
//!
//! Elements are kept in the power basis `1, z, .., z^(phi(N)-1)` reduced modulo
//! the N-th cyclotomic polynomial, as integer numerators over one positive
//! common denominator. Elements of different conductors are compared and
//! combined at the least common multiple of their conductors.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::qlinalg::{frac_part, Rational};

pub const DEFAULT_CONDUCTOR_CAP: u64 = 16 * 9 * 5 * 7;

static CONDUCTOR_CAP: AtomicU64 = AtomicU64::new(DEFAULT_CONDUCTOR_CAP);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycError {
    #[error("conductor {needed} exceeds the cap {cap}")]
    ConductorCap { needed: u64, cap: u64 },
    #[error("inverse of zero")]
    InverseOfZero,
    #[error("machine integer overflow in a root-of-unity sum")]
    Overflow,
}

pub fn conductor_cap() -> u64 {
    CONDUCTOR_CAP.load(Ordering::Relaxed)
}

pub fn set_conductor_cap(cap: u64) {
    CONDUCTOR_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub fn check_conductor(n: u64) -> Result<(), CycError> {
    let cap = conductor_cap();
    if n > cap {
        Err(CycError::ConductorCap { needed: n, cap })
    } else {
        Ok(())
    }
}

pub fn euler_phi(n: u64) -> u64 {
    let mut m = n;
    let mut r = n;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            while m.is_multiple_of(p) {
                m /= p;
            }
            r -= r / p;
        }
        p += 1;
    }
    if m > 1 {
        r -= r / m;
    }
    r
}

struct Table {
    phi: usize,
    /// `red[e - phi]` is `x^e mod Phi_n` for `phi <= e < n`.
    red: Vec<Vec<i64>>,
    /// coefficients of `Phi_n`, lowest degree first, monic
    poly: Vec<i64>,
}

fn cyclotomic_poly(n: u64) -> Vec<i64> {
    // Phi_n(x) = Phi_rad(x^(n / rad)), and Phi_rad is x^rad - 1 divided by the
    // cyclotomic polynomials of the proper divisors of rad
    let mut rad = 1;
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            rad *= p;
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        p += 1;
    }
    if m > 1 {
        rad *= m;
    }
    let mut q = vec![0i128; rad as usize + 1];
    q[0] = -1;
    q[rad as usize] = 1;
    for d in 1..rad {
        if rad % d == 0 {
            let b: Vec<i128> = table(d).poly.iter().map(|&c| c as i128).collect();
            q = poly_div_exact(&q, &b);
        }
    }
    let step = (n / rad) as usize;
    let mut out = vec![0i64; (q.len() - 1) * step + 1];
    for (i, c) in q.into_iter().enumerate() {
        out[i * step] = i64::try_from(c).expect("cyclotomic coefficient fits in i64");
    }
    out
}

fn poly_div_exact(a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let dq = r.len() - 1 - db;
    let mut q = vec![0i128; dq + 1];
    for k in (0..=dq).rev() {
        let c = r[k + db];
        q[k] = c;
        if c != 0 {
            for (i, &bi) in b.iter().enumerate() {
                r[k + i] -= c * bi;
            }
        }
    }
    debug_assert!(r.iter().all(|&x| x == 0));
    q
}

fn table(n: u64) -> Arc<Table> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Table>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&n) {
        return t.clone();
    }
    let poly = cyclotomic_poly(n);
    let phi = poly.len() - 1;
    let mut red = Vec::with_capacity(n as usize - phi);
    // x^phi = -(lower part of Phi_n)
    let mut cur: Vec<i64> = poly[..phi].iter().map(|c| -c).collect();
    for _ in phi..n as usize {
        red.push(cur.clone());
        let top = cur[phi - 1];
        let mut next = vec![0i64; phi];
        next[1..phi].copy_from_slice(&cur[..phi - 1]);
        if top != 0 {
            for k in 0..phi {
                next[k] -= top * poly[k];
            }
        }
        cur = next;
    }
    let t = Arc::new(Table { phi, red, poly });
    cache.lock().unwrap().insert(n, t.clone());
    t
}

/// Element of Q(zeta_N) in reduced power-basis form.
#[derive(Clone)]
pub struct CycNum {
    n: u64,
    num: Vec<BigInt>,
    den: BigInt,
}

impl CycNum {
    pub fn zero() -> Self {
        CycNum { n: 1, num: vec![BigInt::zero()], den: BigInt::one() }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(k: i64) -> Self {
        CycNum { n: 1, num: vec![BigInt::from(k)], den: BigInt::one() }
    }

    pub fn from_rational(r: &Rational) -> Self {
        CycNum { n: 1, num: vec![r.numer().clone()], den: r.denom().clone() }
    }

    /// Element with the given rational power-basis coefficients at conductor `n`.
    pub fn from_coefficients(n: u64, coeffs: &[Rational]) -> Result<Self, CycError> {
        check_conductor(n)?;
        let phi = table(n).phi;
        let mut c = coeffs.to_vec();
        c.resize(phi.max(c.len()), Rational::zero());
        let den = c.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let mut raw: Vec<BigInt> = c.iter().map(|r| (r * Rational::from_integer(den.clone())).to_integer()).collect();
        if raw.len() > phi {
            let mut full = vec![BigInt::zero(); n as usize];
            for (i, v) in raw.drain(..).enumerate() {
                full[i % n as usize] += v;
            }
            raw = reduce_full(n, full);
        }
        Ok(Self::normalized(n, raw, den))
    }

    /// `e(q) = exp(2 pi i q)` at conductor equal to the denominator of `q mod 1`.
    pub fn root_of_unity(q: &Rational) -> Result<Self, CycError> {
        let f = frac_part(q);
        let n = f.denom().to_u64().ok_or(CycError::ConductorCap { needed: u64::MAX, cap: conductor_cap() })?;
        check_conductor(n)?;
        let a = f.numer().to_u64().unwrap();
        Ok(Self::zeta_power(n, a))
    }

    /// `zeta_n^a` for `0 <= a`.
    pub fn zeta_power(n: u64, a: u64) -> Self {
        let t = table(n);
        let a = (a % n) as usize;
        let mut num = vec![BigInt::zero(); t.phi];
        if a < t.phi {
            num[a] = BigInt::one();
        } else {
            for (k, &c) in t.red[a - t.phi].iter().enumerate() {
                num[k] = BigInt::from(c);
            }
        }
        CycNum { n, num, den: BigInt::one() }
    }

    fn normalized(n: u64, num: Vec<BigInt>, den: BigInt) -> Self {
        let mut x = CycNum { n, num, den };
        x.normalize();
        x
    }

    fn normalize(&mut self) {
        if self.den.is_negative() {
            self.den = -self.den.clone();
            for v in &mut self.num {
                *v = -v.clone();
            }
        }
        if self.num.iter().all(|v| v.is_zero()) {
            self.den = BigInt::one();
            return;
        }
        if self.den.is_one() {
            return;
        }
        let mut g = self.den.clone();
        for v in &self.num {
            if g.is_one() {
                return;
            }
            if !v.is_zero() {
                g = g.gcd(v);
            }
        }
        if !g.is_one() {
            self.den /= &g;
            for v in &mut self.num {
                *v /= &g;
            }
        }
    }

    pub fn conductor(&self) -> u64 {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|v| v.is_zero())
    }

    pub fn is_rational(&self) -> bool {
        self.num.iter().skip(1).all(|v| v.is_zero())
    }

    /// Rational value when the element lies in Q.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.is_rational() {
            Some(Rational::new(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }

    pub fn coefficients(&self) -> Vec<Rational> {
        self.num.iter().map(|v| Rational::new(v.clone(), self.den.clone())).collect()
    }

    /// Re-express at a conductor that is a multiple of the current one.
    pub fn lift(&self, m: u64) -> CycNum {
        assert!(m.is_multiple_of(self.n), "lift to a non-multiple conductor");
        if m == self.n {
            return self.clone();
        }
        if self.is_rational() {
            let t = table(m);
            let mut num = vec![BigInt::zero(); t.phi];
            num[0] = self.num[0].clone();
            return CycNum { n: m, num, den: self.den.clone() };
        }
        let step = (m / self.n) as usize;
        let mut full = vec![BigInt::zero(); m as usize];
        for (i, v) in self.num.iter().enumerate() {
            if !v.is_zero() {
                full[i * step] += v;
            }
        }
        CycNum { n: m, num: reduce_full(m, full), den: self.den.clone() }
    }

    fn joint(&self, o: &CycNum) -> Result<u64, CycError> {
        let m = self.n.lcm(&o.n);
        check_conductor(m)?;
        Ok(m)
    }

    pub fn try_add(&self, o: &CycNum) -> Result<CycNum, CycError> {
        if o.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(o.clone());
        }
        let m = self.joint(o)?;
        let a = self.lift(m);
        let b = o.lift(m);
        let den = a.den.lcm(&b.den);
        let fa = &den / &a.den;
        let fb = &den / &b.den;
        let num = a.num.iter().zip(&b.num).map(|(x, y)| x * &fa + y * &fb).collect();
        Ok(Self::normalized(m, num, den))
    }

    pub fn try_mul(&self, o: &CycNum) -> Result<CycNum, CycError> {
        if self.is_zero() || o.is_zero() {
            return Ok(CycNum::zero());
        }
        if self.is_rational() {
            return Ok(o.scale_frac(&self.num[0], &self.den));
        }
        if o.is_rational() {
            return Ok(self.scale_frac(&o.num[0], &o.den));
        }
        let m = self.joint(o)?;
        let a = self.lift(m);
        let b = o.lift(m);
        let nn = m as usize;
        let mut full = vec![BigInt::zero(); nn];
        for (i, x) in a.num.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.num.iter().enumerate() {
                if !y.is_zero() {
                    let k = (i + j) % nn;
                    full[k] += x * y;
                }
            }
        }
        Ok(Self::normalized(m, reduce_full(m, full), a.den * b.den))
    }

    fn scale_frac(&self, p: &BigInt, q: &BigInt) -> CycNum {
        Self::normalized(self.n, self.num.iter().map(|v| v * p).collect(), &self.den * q)
    }

    pub fn scale(&self, r: &Rational) -> CycNum {
        if r.is_zero() {
            return CycNum::zero();
        }
        self.scale_frac(r.numer(), r.denom())
    }

    pub fn scale_int(&self, k: &BigInt) -> CycNum {
        self.scale_frac(k, &BigInt::one())
    }

    pub fn try_inv(&self) -> Result<CycNum, CycError> {
        if self.is_zero() {
            return Err(CycError::InverseOfZero);
        }
        if self.is_rational() {
            return Ok(CycNum { n: 1, num: vec![self.den.clone()], den: self.num[0].clone() }.renormalized());
        }
        // extended Euclid for a(x) against Phi_n(x) over Q
        let t = table(self.n);
        let a: Vec<Rational> = self.coefficients();
        let p: Vec<Rational> = t.poly.iter().map(|&c| Rational::from_integer(BigInt::from(c))).collect();
        let (g, s) = ext_gcd_inverse(&a, &p);
        debug_assert!(g.len() == 1);
        let s: Vec<Rational> = s.iter().map(|c| c / &g[0]).collect();
        CycNum::from_coefficients(self.n, &s)
    }

    fn renormalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn pow(&self, k: u32) -> CycNum {
        let mut acc = CycNum::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Image under `zeta_n -> zeta_n^t` for `t` prime to the conductor.
    pub fn galois(&self, t: u64) -> CycNum {
        let nn = self.n as usize;
        let mut full = vec![BigInt::zero(); nn];
        for (i, v) in self.num.iter().enumerate() {
            if !v.is_zero() {
                full[(i * t as usize) % nn] += v;
            }
        }
        Self::normalized(self.n, reduce_full(self.n, full), self.den.clone())
    }
}

/// Unnormalized running sum of cyclotomic numbers; cheaper than repeated
/// `+` because it postpones the content reduction to [`CycAcc::finish`].
#[derive(Clone)]
pub struct CycAcc {
    n: u64,
    num: Vec<BigInt>,
    den: BigInt,
}

impl Default for CycAcc {
    fn default() -> Self {
        Self::new()
    }
}

impl CycAcc {
    pub fn new() -> Self {
        CycAcc { n: 1, num: vec![BigInt::zero()], den: BigInt::one() }
    }

    fn widen(&mut self, m: u64) {
        if m == self.n {
            return;
        }
        let step = (m / self.n) as usize;
        let mut full = vec![BigInt::zero(); m as usize];
        for (i, v) in self.num.drain(..).enumerate() {
            if !v.is_zero() {
                full[i * step] += v;
            }
        }
        self.num = reduce_full(m, full);
        self.n = m;
    }

    /// Adds `x * p / q`.
    pub fn add_scaled(&mut self, x: &CycNum, p: &BigInt, q: &BigInt) {
        if x.is_zero() || p.is_zero() {
            return;
        }
        let m = self.n.lcm(&x.n);
        check_conductor(m).unwrap_or_else(|e| panic!("{e}"));
        self.widen(m);
        let xd = &x.den * q;
        let (fa, fx) = if (&self.den % &xd).is_zero() {
            (None, &self.den / &xd)
        } else {
            let l = self.den.lcm(&xd);
            let fa = &l / &self.den;
            let fx = &l / &xd;
            self.den = l;
            (Some(fa), fx)
        };
        if let Some(fa) = fa {
            for v in &mut self.num {
                if !v.is_zero() {
                    *v *= &fa;
                }
            }
        }
        let f = fx * p;
        if x.n == m {
            for (a, b) in self.num.iter_mut().zip(&x.num) {
                if !b.is_zero() {
                    *a += b * &f;
                }
            }
        } else if x.is_rational() {
            self.num[0] += &x.num[0] * &f;
        } else {
            let l = x.lift(m);
            for (a, b) in self.num.iter_mut().zip(&l.num) {
                if !b.is_zero() {
                    *a += b * &f;
                }
            }
        }
    }

    pub fn add(&mut self, x: &CycNum) {
        self.add_scaled(x, &BigInt::one(), &BigInt::one());
    }

    pub fn add_rat(&mut self, x: &CycNum, r: &Rational) {
        self.add_scaled(x, r.numer(), r.denom());
    }

    pub fn finish(self) -> CycNum {
        CycNum::normalized(self.n, self.num, self.den)
    }
}

/// Sum of integer multiples of powers of `zeta_l`, accumulated in machine
/// integers directly in the reduced basis.
pub struct RootSum {
    l: u64,
    t: Arc<Table>,
    acc: Vec<i128>,
}

impl RootSum {
    pub fn new(l: u64) -> Result<Self, CycError> {
        check_conductor(l)?;
        let t = table(l);
        let acc = vec![0; t.phi];
        Ok(RootSum { l, t, acc })
    }

    pub fn clear(&mut self) {
        self.acc.iter_mut().for_each(|x| *x = 0);
    }

    /// Adds `c * zeta_l^e`.
    pub fn add_term(&mut self, e: u64, c: i128) -> Result<(), CycError> {
        let e = (e % self.l) as usize;
        let phi = self.t.phi;
        if e < phi {
            self.acc[e] = self.acc[e].checked_add(c).ok_or(CycError::Overflow)?;
            return Ok(());
        }
        for (a, &r) in self.acc.iter_mut().zip(&self.t.red[e - phi]) {
            if r != 0 {
                *a = c.checked_mul(r as i128).and_then(|x| a.checked_add(x)).ok_or(CycError::Overflow)?;
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.acc.iter().all(|&x| x == 0)
    }

    /// The accumulated sum divided by `den`.
    pub fn finish(&self, den: &BigInt) -> CycNum {
        CycNum::normalized(self.l, self.acc.iter().map(|&x| BigInt::from(x)).collect(), den.clone())
    }
}

impl CycNum {
    /// `(conductor, numerators, denominator)` of the stored representation.
    pub fn parts(&self) -> (u64, &[BigInt], &BigInt) {
        (self.n, &self.num, &self.den)
    }

    /// `(sum full[i] zeta_n^i) / den` from coefficients modulo `x^n - 1`.
    pub fn from_full(n: u64, full: Vec<BigInt>, den: BigInt) -> Result<CycNum, CycError> {
        check_conductor(n)?;
        assert_eq!(full.len(), n as usize, "one coefficient per power of zeta");
        Ok(Self::normalized(n, reduce_full(n, full), den))
    }
}

fn reduce_full(n: u64, mut full: Vec<BigInt>) -> Vec<BigInt> {
    let t = table(n);
    let phi = t.phi;
    let (low, high) = full.split_at_mut(phi);
    for (e, v) in high.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        for (k, &c) in t.red[e].iter().enumerate() {
            if c != 0 {
                low[k] += v * c;
            }
        }
    }
    full.truncate(phi);
    full
}

type QPoly = Vec<Rational>;

fn trim(p: &mut QPoly) {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_sub_mul(a: &QPoly, q: &QPoly, b: &QPoly) -> QPoly {
    let mut r = a.clone();
    let len = q.len() + b.len() - 1;
    if r.len() < len {
        r.resize(len, Rational::zero());
    }
    for (i, x) in q.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            r[i + j] -= x * y;
        }
    }
    trim(&mut r);
    r
}

fn poly_divmod(a: &QPoly, b: &QPoly) -> (QPoly, QPoly) {
    let mut r = a.clone();
    trim(&mut r);
    let db = b.len() - 1;
    if r.len() < b.len() {
        return (vec![Rational::zero()], r);
    }
    let mut q = vec![Rational::zero(); r.len() - db];
    let lead = b[db].clone();
    for k in (0..q.len()).rev() {
        let c = &r[k + db] / &lead;
        if !c.is_zero() {
            for (i, bi) in b.iter().enumerate() {
                r[k + i] -= &c * bi;
            }
        }
        q[k] = c;
    }
    r.truncate(db.max(1));
    trim(&mut r);
    (q, r)
}

/// Returns `(g, s)` with `s a = g (mod p)` and `g` the gcd (a constant here).
fn ext_gcd_inverse(a: &QPoly, p: &QPoly) -> (QPoly, QPoly) {
    let (mut r0, mut r1) = (p.clone(), a.clone());
    trim(&mut r1);
    let (mut s0, mut s1): (QPoly, QPoly) = (vec![Rational::zero()], vec![Rational::one()]);
    while !(r1.len() == 1 && r1[0].is_zero()) {
        let (q, r) = poly_divmod(&r0, &r1);
        let s2 = poly_sub_mul(&s0, &q, &s1);
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s2);
    }
    (r0, s0)
}

impl PartialEq for CycNum {
    fn eq(&self, o: &CycNum) -> bool {
        if self.n == o.n {
            return self.den == o.den && self.num == o.num;
        }
        let m = self.n.lcm(&o.n);
        let a = self.lift(m);
        let b = o.lift(m);
        a.den == b.den && a.num == b.num
    }
}

impl Eq for CycNum {}

impl fmt::Debug for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coefficients().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})z{}", self.n)?,
                _ => write!(f, "({c})z{}^{i}", self.n)?,
            }
        }
        Ok(())
    }
}

impl Add for &CycNum {
    type Output = CycNum;
    fn add(self, o: &CycNum) -> CycNum {
        self.try_add(o).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Sub for &CycNum {
    type Output = CycNum;
    fn sub(self, o: &CycNum) -> CycNum {
        self.try_add(&-o).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Mul for &CycNum {
    type Output = CycNum;
    fn mul(self, o: &CycNum) -> CycNum {
        self.try_mul(o).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Neg for &CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        CycNum { n: self.n, num: self.num.iter().map(|v| -v).collect(), den: self.den.clone() }
    }
}

impl Neg for CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        -&self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycOp {
    Add,
    Mul,
    Inv,
}

pub fn cyc_arith(a: &CycNum, b: Option<&CycNum>, op: CycOp) -> Result<CycNum, CycError> {
    match op {
        CycOp::Add => a.try_add(b.expect("second operand")),
        CycOp::Mul => a.try_mul(b.expect("second operand")),
        CycOp::Inv => a.try_inv(),
    }
}

pub fn root_of_unity(q: &Rational) -> Result<CycNum, CycError> {
    CycNum::root_of_unity(q)
}

impl CycNum {
    /// `{conductor, coefficients}` with coefficients as `"p/q"` strings.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "conductor": self.n,
            "coefficients": self.coefficients().iter().map(crate::qlinalg::fmt_rational).collect::<Vec<_>>(),
        })
    }

    /// Accepts the object form, a rational string or an integer.
    pub fn from_json(v: &serde_json::Value) -> Result<CycNum, String> {
        use crate::qlinalg::parse_rational;
        match v {
            serde_json::Value::Number(x) => {
                x.as_i64().map(CycNum::from_int).ok_or_else(|| format!("non-integer number {x}"))
            }
            serde_json::Value::String(s) => parse_rational(s).map(|r| CycNum::from_rational(&r)).map_err(|e| e.to_string()),
            serde_json::Value::Object(o) => {
                let n = o.get("conductor").and_then(|x| x.as_u64()).ok_or("missing conductor")?;
                let cs = o.get("coefficients").and_then(|x| x.as_array()).ok_or("missing coefficients")?;
                let coeffs = cs
                    .iter()
                    .map(|c| match c {
                        serde_json::Value::String(s) => parse_rational(s).map_err(|e| e.to_string()),
                        serde_json::Value::Number(x) => x.as_i64().map(crate::qlinalg::int).ok_or_else(|| format!("bad coefficient {x}")),
                        _ => Err(format!("bad coefficient {c}")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                CycNum::from_coefficients(n, &coeffs).map_err(|e| e.to_string())
            }
            _ => Err(format!("cannot read cyclotomic number from {v}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{int, rat};
    use proptest::prelude::*;

    fn e(p: i64, q: i64) -> CycNum {
        root_of_unity(&rat(p, q)).unwrap()
    }

    #[test]
    fn phi_values() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), 4);
        assert_eq!(euler_phi(5040), 1152);
        assert_eq!(cyclotomic_poly(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic_poly(105)[7], -2);
    }

    #[test]
    fn basic_examples() {
        assert_eq!(e(1, 2), CycNum::from_int(-1));
        assert!((&(&CycNum::one() + &e(1, 3)) + &e(2, 3)).is_zero());
        assert_eq!(&e(1, 6) * &e(1, 6), e(1, 3));
        assert_eq!(e(0, 1), CycNum::one());
        assert_eq!(e(1, 4).conductor(), 4);
        assert_eq!(e(1, 4).coefficients(), vec![int(0), int(1)]);
        assert_eq!(e(5, 3), e(2, 3));
        assert_eq!(&e(1, 4) * &e(1, 4), CycNum::from_int(-1));
    }

    #[test]
    fn inverse_of_zero_fails() {
        assert_eq!(CycNum::zero().try_inv().err(), Some(CycError::InverseOfZero));
        assert_eq!(cyc_arith(&CycNum::from_int(2), None, CycOp::Inv).unwrap(), CycNum::from_rational(&rat(1, 2)));
    }

    #[test]
    fn cap_is_enforced() {
        let q = Rational::new(BigInt::from(1), BigInt::from(DEFAULT_CONDUCTOR_CAP + 1));
        assert!(matches!(root_of_unity(&q), Err(CycError::ConductorCap { .. })));
        // lcm of two admissible conductors can overflow the cap too
        let a = root_of_unity(&rat(1, 4999)).unwrap();
        let b = e(1, 2 * 3);
        assert!(a.try_add(&b).is_err());
    }

    #[test]
    fn one_minus_zeta_inverse_closed_form() {
        // 1/(1 - z) = -(1/m) sum j z^j for z of order m
        for m in [3u64, 4, 6, 10, 12] {
            let z = CycNum::zeta_power(m, 1);
            let inv = (&CycNum::one() - &z).try_inv().unwrap();
            let mut s = CycNum::zero();
            for j in 0..m {
                s = &s + &CycNum::zeta_power(m, j).scale(&rat(-(j as i64), m as i64));
            }
            assert_eq!(inv, s);
        }
    }

    fn small_cyc() -> impl Strategy<Value = CycNum> {
        (prop::sample::select(vec![1u64, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 24]), proptest::collection::vec((-5i64..=5, 1i64..=4), 1..8)).prop_map(|(n, cs)| {
            let phi = euler_phi(n) as usize;
            let coeffs: Vec<Rational> = cs.iter().take(phi).map(|&(p, q)| rat(p, q)).collect();
            CycNum::from_coefficients(n, &coeffs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn powers_of_roots(p in 0i64..60, q in 1i64..30, k in 1u32..=12) {
            let z = e(p, q);
            prop_assert_eq!(z.pow(k), e(p * k as i64, q));
        }

        #[test]
        fn lifting_round_trip(x in small_cyc(), k in 1u64..=4) {
            let up = x.lift(x.conductor() * k);
            prop_assert_eq!(&up, &x);
            prop_assert_eq!(up.lift(x.conductor() * k * 2), x);
        }

        #[test]
        fn inverse_multiplies_to_one(x in small_cyc()) {
            prop_assume!(!x.is_zero());
            let inv = x.try_inv().unwrap();
            prop_assert_eq!(&x * &inv, CycNum::one());
        }

        #[test]
        fn ring_laws(a in small_cyc(), b in small_cyc(), c in small_cyc()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a + &b, &b + &a);
        }

        #[test]
        fn galois_is_multiplicative(p in 0i64..12, t in prop::sample::select(vec![1u64, 5, 7, 11])) {
            let z = CycNum::zeta_power(12, p as u64);
            prop_assert_eq!(z.galois(t), CycNum::zeta_power(12, (p as u64 * t) % 12));
        }
    }
}
