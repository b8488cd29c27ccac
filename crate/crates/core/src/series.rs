//! Truncated multivariate power series over cyclotomic numbers and the
//! fraction model `numerator / product of linear forms` used for Laurent
//! series in `T_1, .., T_n`.
//!
//! A [`FormalFraction`] carries a Laurent precision `trust`: with `k` linear
//! forms in the denominator the numerator is exact through total degree
//! `trust + k`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::cyclotomic::{CycAcc, CycError, CycNum};
use crate::qlinalg::{frac_part, int, QMatrix, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("precision exhausted: degree {required} required, {available} available")]
    Precision { required: i64, available: i64 },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("zero linear form")]
    ZeroForm,
    #[error("1 - e(q) e^(lambda T) vanishes identically")]
    VanishingReciprocal,
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// Monomials in `n` variables of total degree at most `deg`, in graded order
/// (degree ascending, then exponent vectors lexicographically descending).
pub struct Layout {
    pub n: usize,
    pub deg: usize,
    monos: Vec<Vec<u32>>,
    offsets: Vec<usize>,
    counts: Vec<Vec<usize>>,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

impl Layout {
    pub fn get(n: usize, deg: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(l) = cache.lock().unwrap().get(&(n, deg)) {
            return l.clone();
        }
        let l = Arc::new(Layout::build(n, deg));
        cache.lock().unwrap().insert((n, deg), l.clone());
        l
    }

    fn build(n: usize, deg: usize) -> Layout {
        // counts[v][d] = monomials of degree d in v variables
        let counts: Vec<Vec<usize>> = (0..=n)
            .map(|v| (0..=deg).map(|d| if v == 0 { usize::from(d == 0) } else { binom(d + v - 1, v - 1) }).collect())
            .collect();
        let mut monos = Vec::new();
        let mut offsets = Vec::with_capacity(deg + 2);
        for d in 0..=deg {
            offsets.push(monos.len());
            let mut cur = vec![0u32; n];
            gen_desc(n, 0, d as u32, &mut cur, &mut monos);
        }
        offsets.push(monos.len());
        Layout { n, deg, monos, offsets, counts }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn mono(&self, i: usize) -> &[u32] {
        &self.monos[i]
    }

    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.offsets[d]..self.offsets[d + 1]
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.monos[i].iter().sum::<u32>() as usize
    }

    /// Index of a monomial, or `None` beyond the truncation degree.
    pub fn rank(&self, e: &[u32]) -> Option<usize> {
        let d: usize = e.iter().map(|&x| x as usize).sum();
        if d > self.deg {
            return None;
        }
        let mut r = self.offsets[d];
        let mut rem = d;
        for i in 0..self.n.saturating_sub(1) {
            let a = e[i] as usize;
            let vars = self.n - 1 - i;
            for x in a + 1..=rem {
                r += self.counts[vars][rem - x];
            }
            rem -= a;
        }
        Some(r)
    }

    /// Rank of the product of two monomials given by index.
    pub fn rank_sum(&self, a: usize, b: usize) -> Option<usize> {
        let s: Vec<u32> = self.monos[a].iter().zip(&self.monos[b]).map(|(x, y)| x + y).collect();
        self.rank(&s)
    }
}

fn gen_desc(n: usize, i: usize, rem: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if n == 0 {
        if rem == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if i == n - 1 {
        cur[i] = rem;
        out.push(cur.clone());
        return;
    }
    for a in (0..=rem).rev() {
        cur[i] = a;
        gen_desc(n, i + 1, rem - a, cur, out);
    }
    cur[i] = 0;
}

/// Dense truncated power series.
#[derive(Clone)]
pub struct MultiSeries {
    layout: Arc<Layout>,
    c: Vec<CycNum>,
}

impl PartialEq for MultiSeries {
    fn eq(&self, o: &Self) -> bool {
        self.layout.n == o.layout.n && self.layout.deg == o.layout.deg && self.c == o.c
    }
}

impl fmt::Debug for MultiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, v) in self.c.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({v})")?;
            for (j, &e) in self.layout.mono(i).iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*T{}", j + 1)?,
                    _ => write!(f, "*T{}^{e}", j + 1)?,
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(deg {})", self.layout.deg + 1)
    }
}

impl MultiSeries {
    pub fn zero(n: usize, deg: usize) -> Self {
        let layout = Layout::get(n, deg);
        let c = vec![CycNum::zero(); layout.len()];
        MultiSeries { layout, c }
    }

    pub fn constant(n: usize, deg: usize, v: CycNum) -> Self {
        let mut s = Self::zero(n, deg);
        s.c[0] = v;
        s
    }

    pub fn one(n: usize, deg: usize) -> Self {
        Self::constant(n, deg, CycNum::one())
    }

    pub fn from_dense(layout: Arc<Layout>, c: Vec<CycNum>) -> Self {
        assert_eq!(layout.len(), c.len());
        MultiSeries { layout, c }
    }

    /// Linear form `sum l_i T_i`.
    pub fn linear(l: &[Rational], deg: usize) -> Self {
        let n = l.len();
        let mut s = Self::zero(n, deg);
        if deg >= 1 {
            for (i, v) in l.iter().enumerate() {
                let mut e = vec![0u32; n];
                e[i] = 1;
                let r = s.layout.rank(&e).unwrap();
                s.c[r] = CycNum::from_rational(v);
            }
        }
        s
    }

    pub fn nvars(&self) -> usize {
        self.layout.n
    }

    pub fn degree(&self) -> usize {
        self.layout.deg
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[CycNum] {
        &self.c
    }

    pub fn coeff(&self, e: &[u32]) -> CycNum {
        self.layout.rank(e).map(|r| self.c[r].clone()).unwrap_or_else(CycNum::zero)
    }

    pub fn set_coeff(&mut self, e: &[u32], v: CycNum) {
        let r = self.layout.rank(e).expect("exponent within truncation");
        self.c[r] = v;
    }

    /// Nonzero terms in graded order.
    pub fn terms(&self) -> Vec<(Vec<u32>, CycNum)> {
        self.c
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (self.layout.mono(i).to_vec(), v.clone()))
            .collect()
    }

    /// Lowest total degree with a nonzero coefficient.
    pub fn order(&self) -> Option<usize> {
        self.c.iter().position(|v| !v.is_zero()).map(|i| self.layout.degree_of(i))
    }

    pub fn truncate(&self, deg: usize) -> MultiSeries {
        let n = self.nvars();
        if deg == self.degree() {
            return self.clone();
        }
        let layout = Layout::get(n, deg);
        let mut c = vec![CycNum::zero(); layout.len()];
        let m = layout.len().min(self.c.len());
        c[..m].clone_from_slice(&self.c[..m]);
        MultiSeries { layout, c }
    }

    pub fn add(&self, o: &MultiSeries) -> MultiSeries {
        assert_eq!(self.nvars(), o.nvars(), "series dimensions differ");
        let deg = self.degree().min(o.degree());
        let a = self.truncate(deg);
        let c = a.c.iter().zip(&o.c).map(|(x, y)| x + y).collect();
        MultiSeries { layout: a.layout, c }
    }

    pub fn neg(&self) -> MultiSeries {
        MultiSeries { layout: self.layout.clone(), c: self.c.iter().map(|x| -x).collect() }
    }

    pub fn sub(&self, o: &MultiSeries) -> MultiSeries {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: &CycNum) -> MultiSeries {
        MultiSeries { layout: self.layout.clone(), c: self.c.iter().map(|x| x * k).collect() }
    }

    pub fn scale_rat(&self, k: &Rational) -> MultiSeries {
        MultiSeries { layout: self.layout.clone(), c: self.c.iter().map(|x| x.scale(k)).collect() }
    }

    /// Product truncated at `deg`, using only coefficients each factor holds.
    pub fn mul_to(&self, o: &MultiSeries, deg: usize) -> MultiSeries {
        assert_eq!(self.nvars(), o.nvars(), "series dimensions differ");
        let layout = Layout::get(self.nvars(), deg);
        let mut acc: Vec<CycAcc> = vec![CycAcc::new(); layout.len()];
        for (i, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let di = self.layout.degree_of(i);
            if di > deg {
                break;
            }
            for (j, y) in o.c.iter().enumerate() {
                if o.layout.degree_of(j) + di > deg {
                    break;
                }
                if y.is_zero() {
                    continue;
                }
                let s: Vec<u32> = self.layout.mono(i).iter().zip(o.layout.mono(j)).map(|(a, b)| a + b).collect();
                let r = layout.rank(&s).unwrap();
                acc[r].add(&(x * y));
            }
        }
        MultiSeries { layout, c: acc.into_iter().map(CycAcc::finish).collect() }
    }

    pub fn mul(&self, o: &MultiSeries) -> MultiSeries {
        self.mul_to(o, self.degree().min(o.degree()))
    }

    /// Product with a series in the single variable `j` (coefficients by
    /// power), keeping the current truncation degree.
    pub fn mul_univariate(&self, j: usize, coeffs: &[CycNum]) -> MultiSeries {
        let deg = self.degree();
        let mut acc: Vec<CycAcc> = vec![CycAcc::new(); self.layout.len()];
        for (i, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let mut e = self.layout.mono(i).to_vec();
            let d = self.layout.degree_of(i);
            for (k, c) in coeffs.iter().enumerate().take(deg - d + 1) {
                if !c.is_zero() {
                    e[j] += k as u32;
                    acc[self.layout.rank(&e).unwrap()].add(&(x * c));
                    e[j] -= k as u32;
                }
            }
        }
        MultiSeries { layout: self.layout.clone(), c: acc.into_iter().map(CycAcc::finish).collect() }
    }

    /// Product with a linear form; the truncation degree goes up by one.
    pub fn mul_linear(&self, l: &[Rational]) -> MultiSeries {
        let n = self.nvars();
        let layout = Layout::get(n, self.degree() + 1);
        let mut acc: Vec<CycAcc> = vec![CycAcc::new(); layout.len()];
        for (i, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let mut e = self.layout.mono(i).to_vec();
            for (k, lk) in l.iter().enumerate() {
                if lk.is_zero() {
                    continue;
                }
                e[k] += 1;
                let r = layout.rank(&e).unwrap();
                e[k] -= 1;
                acc[r].add_rat(x, lk);
            }
        }
        MultiSeries { layout, c: acc.into_iter().map(CycAcc::finish).collect() }
    }

    pub fn is_zero_through(&self, deg: usize) -> bool {
        let end = self.layout.offsets[(deg + 1).min(self.layout.deg + 1)];
        self.c[..end].iter().all(|v| v.is_zero())
    }

    /// `self(l_1 . T, .., l_r . T)` as a series in `n` variables, where
    /// `self` has `r` variables and `forms[j]` has length `n`.
    pub fn compose_linear(&self, forms: &[Vec<Rational>], n: usize) -> MultiSeries {
        let r = self.nvars();
        assert_eq!(forms.len(), r, "one form per variable");
        let deg = self.degree();
        let src = &self.layout;
        let dst = Layout::get(n, deg);
        let mut acc: Vec<CycAcc> = vec![CycAcc::new(); dst.len()];
        // expansions of the source monomials of the previous degree
        let mut prev: Vec<Vec<Rational>> = vec![vec![Rational::one()]];
        for d in 0..=deg {
            let range = src.degree_range(d);
            let dr = dst.degree_range(d);
            let cur: Vec<Vec<Rational>> = if d == 0 {
                prev.clone()
            } else {
                let prange = src.degree_range(d - 1);
                let pdr = dst.degree_range(d - 1);
                range
                    .clone()
                    .map(|ia| {
                        let a = src.mono(ia);
                        let j = a.iter().position(|&x| x > 0).unwrap();
                        let mut b = a.to_vec();
                        b[j] -= 1;
                        let ib = src.rank(&b).unwrap() - prange.start;
                        let mut out = vec![Rational::zero(); dr.len()];
                        for (k, c) in prev[ib].iter().enumerate() {
                            if c.is_zero() {
                                continue;
                            }
                            let mut e = dst.mono(pdr.start + k).to_vec();
                            for (i, li) in forms[j].iter().enumerate() {
                                if li.is_zero() {
                                    continue;
                                }
                                e[i] += 1;
                                out[dst.rank(&e).unwrap() - dr.start] += c * li;
                                e[i] -= 1;
                            }
                        }
                        out
                    })
                    .collect()
            };
            for (k, ia) in range.enumerate() {
                let v = &self.c[ia];
                if v.is_zero() {
                    continue;
                }
                for (m, c) in cur[k].iter().enumerate() {
                    if !c.is_zero() {
                        acc[dr.start + m].add_rat(v, c);
                    }
                }
            }
            prev = cur;
        }
        MultiSeries { layout: dst, c: acc.into_iter().map(CycAcc::finish).collect() }
    }

    /// `T -> T g`, i.e. `T_j` becomes `T . (column j of g)`.
    pub fn substitute(&self, g: &QMatrix) -> MultiSeries {
        let forms: Vec<Vec<Rational>> = (0..g.dim()).map(|j| g.col(j)).collect();
        self.compose_linear(&forms, g.dim())
    }
}

/// Linear form `c . T` scaled to a primitive integer vector whose first
/// nonzero entry is positive.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct LinForm {
    c: Vec<BigInt>,
}

impl LinForm {
    /// Splits `v` as `scale * form` with `form` canonical.
    pub fn canonical(v: &[Rational]) -> Result<(LinForm, Rational), SeriesError> {
        let first = v.iter().find(|x| !x.is_zero()).ok_or(SeriesError::ZeroForm)?;
        let l = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(l.clone())).to_integer()).collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        let sgn = if first.is_positive() { BigInt::one() } else { -BigInt::one() };
        let c: Vec<BigInt> = ints.iter().map(|x| x / &g * &sgn).collect();
        Ok((LinForm { c }, Rational::new(g * sgn, l)))
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.c
    }

    pub fn as_rationals(&self) -> Vec<Rational> {
        self.c.iter().map(|x| Rational::from_integer(x.clone())).collect()
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }
}

impl fmt::Display for LinForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(i, x)| if x.is_one() { format!("T{}", i + 1) } else { format!("{x}*T{}", i + 1) })
            .collect();
        write!(f, "({})", parts.join(" + "))
    }
}

/// `num / prod(dens)` with Laurent precision `trust`.
#[derive(Clone, Debug)]
pub struct FormalFraction {
    num: MultiSeries,
    dens: Vec<LinForm>,
    trust: i64,
}

#[derive(Clone, Debug)]
pub struct Discrepancy {
    pub degree: usize,
    pub exponent: Vec<u32>,
    pub lhs: CycNum,
    pub rhs: CycNum,
}

fn multiset_lcm(a: &[LinForm], b: &[LinForm]) -> Vec<LinForm> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            out.push(b[j].clone());
            j += 1;
        } else {
            out.push(a[i].clone());
            i += 1;
            j += 1;
        }
    }
    out
}

fn multiset_minus(a: &[LinForm], b: &[LinForm]) -> Vec<LinForm> {
    let mut out = Vec::new();
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j < b.len() && b[j] == *x {
            j += 1;
        } else {
            out.push(x.clone());
        }
    }
    out
}

impl FormalFraction {
    /// `num / prod(dens)`; the numerator's truncation fixes the precision.
    pub fn new(num: MultiSeries, mut dens: Vec<LinForm>) -> Self {
        dens.sort();
        let trust = num.degree() as i64 - dens.len() as i64;
        FormalFraction { num, dens, trust }
    }

    pub fn from_series(s: MultiSeries) -> Self {
        Self::new(s, Vec::new())
    }

    pub fn zero(n: usize, trust: usize) -> Self {
        Self::from_series(MultiSeries::zero(n, trust))
    }

    pub fn one(n: usize, trust: usize) -> Self {
        Self::from_series(MultiSeries::one(n, trust))
    }

    /// Numerator in coordinates `s_j = forms[j] . T` divided by the given
    /// linear forms (not necessarily canonical).
    pub fn from_coordinates(
        data: &MultiSeries,
        forms: &[Vec<Rational>],
        poles: &[Vec<Rational>],
        n: usize,
    ) -> Result<Self, SeriesError> {
        let mut num = data.compose_linear(forms, n);
        let mut dens = Vec::with_capacity(poles.len());
        let mut scale = Rational::one();
        for p in poles {
            let (f, s) = LinForm::canonical(p)?;
            scale /= s;
            dens.push(f);
        }
        if !scale.is_one() {
            num = num.scale_rat(&scale);
        }
        Ok(Self::new(num, dens))
    }

    pub fn numerator(&self) -> &MultiSeries {
        &self.num
    }

    pub fn denominators(&self) -> &[LinForm] {
        &self.dens
    }

    pub fn trust(&self) -> i64 {
        self.trust
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    fn laurent_order(&self) -> Option<i64> {
        self.num.order().map(|o| o as i64 - self.dens.len() as i64)
    }

    fn num_degree_for(&self, trust: i64, k: usize) -> Result<usize, SeriesError> {
        let d = trust + k as i64;
        if d < 0 {
            return Err(SeriesError::Precision { required: trust, available: self.trust });
        }
        Ok(d as usize)
    }

    /// Numerator over the denominators `target` (a super-multiset of ours).
    fn over(&self, target: &[LinForm], trust: i64) -> Result<MultiSeries, SeriesError> {
        let extra = multiset_minus(target, &self.dens);
        let mut num = self.num.clone();
        for l in &extra {
            num = num.mul_linear(&l.as_rationals());
        }
        Ok(num.truncate(self.num_degree_for(trust, target.len())?))
    }

    pub fn add(&self, o: &FormalFraction) -> Result<FormalFraction, SeriesError> {
        if self.nvars() != o.nvars() {
            return Err(SeriesError::Dimension(self.nvars(), o.nvars()));
        }
        let trust = self.trust.min(o.trust);
        let dens = multiset_lcm(&self.dens, &o.dens);
        let a = self.over(&dens, trust)?;
        let b = o.over(&dens, trust)?;
        Ok(FormalFraction { num: a.add(&b), dens, trust })
    }

    pub fn neg(&self) -> FormalFraction {
        FormalFraction { num: self.num.neg(), dens: self.dens.clone(), trust: self.trust }
    }

    pub fn sub(&self, o: &FormalFraction) -> Result<FormalFraction, SeriesError> {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: &CycNum) -> FormalFraction {
        FormalFraction { num: self.num.scale(k), dens: self.dens.clone(), trust: self.trust }
    }

    pub fn scale_rat(&self, k: &Rational) -> FormalFraction {
        FormalFraction { num: self.num.scale_rat(k), dens: self.dens.clone(), trust: self.trust }
    }

    pub fn mul(&self, o: &FormalFraction) -> Result<FormalFraction, SeriesError> {
        if self.nvars() != o.nvars() {
            return Err(SeriesError::Dimension(self.nvars(), o.nvars()));
        }
        let big = i64::MAX / 4;
        let t1 = self.trust.saturating_add(o.laurent_order().unwrap_or(big));
        let t2 = o.trust.saturating_add(self.laurent_order().unwrap_or(big));
        let mut trust = t1.min(t2);
        if trust >= big / 2 {
            // both numerators vanish identically
            trust = self.trust.min(o.trust);
        }
        let mut dens = self.dens.clone();
        dens.extend(o.dens.iter().cloned());
        dens.sort();
        let deg = self.num_degree_for(trust, dens.len())?;
        Ok(FormalFraction { num: self.num.mul_to(&o.num, deg), dens, trust })
    }

    /// Drops precision to `trust`.
    pub fn truncate(&self, trust: i64) -> Result<FormalFraction, SeriesError> {
        if trust > self.trust {
            return Err(SeriesError::Precision { required: trust, available: self.trust });
        }
        let deg = self.num_degree_for(trust, self.dens.len())?;
        Ok(FormalFraction { num: self.num.truncate(deg), dens: self.dens.clone(), trust })
    }

    /// `T -> T g` on numerator and denominators.
    pub fn substitute(&self, g: &QMatrix) -> Result<FormalFraction, SeriesError> {
        let mut num = self.num.substitute(g);
        let mut dens = Vec::with_capacity(self.dens.len());
        let mut scale = Rational::one();
        for l in &self.dens {
            let (f, s) = LinForm::canonical(&g.apply_col(&l.as_rationals()))?;
            scale /= s;
            dens.push(f);
        }
        if !scale.is_one() {
            num = num.scale_rat(&scale);
        }
        Ok(FormalFraction::new(num, dens))
    }

    /// First coefficient where the cross-multiplied numerators differ.
    pub fn compare(&self, o: &FormalFraction, deg: i64) -> Result<Option<Discrepancy>, SeriesError> {
        for x in [self, o] {
            if x.trust < deg {
                return Err(SeriesError::Precision { required: deg, available: x.trust });
            }
        }
        let dens = multiset_lcm(&self.dens, &o.dens);
        let a = self.over(&dens, deg)?;
        let b = o.over(&dens, deg)?;
        for (i, (x, y)) in a.c.iter().zip(&b.c).enumerate() {
            if x != y {
                return Ok(Some(Discrepancy {
                    degree: a.layout.degree_of(i),
                    exponent: a.layout.mono(i).to_vec(),
                    lhs: x.clone(),
                    rhs: y.clone(),
                }));
            }
        }
        Ok(None)
    }

    pub fn is_zero_through(&self, deg: i64) -> Result<bool, SeriesError> {
        let z = FormalFraction::zero(self.nvars(), deg.max(0) as usize);
        Ok(self.compare(&z, deg)?.is_none())
    }
}

impl fmt::Display for FormalFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.num)?;
        for d in &self.dens {
            write!(f, " / {d}")?;
        }
        Ok(())
    }
}

pub fn eq_fraction(x: &FormalFraction, y: &FormalFraction, deg: i64) -> Result<bool, SeriesError> {
    Ok(x.compare(y, deg)?.is_none())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FracOp {
    Add,
    Mul,
}

pub fn frac_arith(x: &FormalFraction, y: &FormalFraction, op: FracOp) -> Result<FormalFraction, SeriesError> {
    match op {
        FracOp::Add => x.add(y),
        FracOp::Mul => x.mul(y),
    }
}

/// Coefficients of `dT_1, .., dT_n`.
#[derive(Clone, Debug)]
pub struct OneForm {
    pub coeffs: Vec<FormalFraction>,
}

impl OneForm {
    pub fn zero(n: usize, trust: usize) -> Self {
        OneForm { coeffs: vec![FormalFraction::zero(n, trust); n] }
    }

    /// `f . (l . dT)`.
    pub fn along(f: &FormalFraction, l: &[Rational]) -> Self {
        OneForm { coeffs: l.iter().map(|c| f.scale_rat(c)).collect() }
    }

    pub fn add(&self, o: &OneForm) -> Result<OneForm, SeriesError> {
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.add(b)).collect::<Result<_, _>>()?;
        Ok(OneForm { coeffs })
    }
}

/// Coefficient of `dT_1 ^ .. ^ dT_n`.
#[derive(Clone, Debug)]
pub struct TopForm {
    pub coeff: FormalFraction,
}

impl TopForm {
    pub fn zero(n: usize, trust: usize) -> Self {
        TopForm { coeff: FormalFraction::zero(n, trust) }
    }

    pub fn add(&self, o: &TopForm) -> Result<TopForm, SeriesError> {
        Ok(TopForm { coeff: self.coeff.add(&o.coeff)? })
    }

    pub fn neg(&self) -> TopForm {
        TopForm { coeff: self.coeff.neg() }
    }

    pub fn scale_rat(&self, k: &Rational) -> TopForm {
        TopForm { coeff: self.coeff.scale_rat(k) }
    }

    /// Pullback along `T -> T g`, which also multiplies by `det g`.
    pub fn substitute(&self, g: &QMatrix) -> Result<TopForm, SeriesError> {
        Ok(TopForm { coeff: self.coeff.substitute(g)?.scale_rat(&g.det()) })
    }
}

fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    if n == 0 {
        return vec![(Vec::new(), 1)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            // inserting at pos moves the new element past (len - pos) others
            let sign = if (p.len() - pos) % 2 == 0 { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

/// Signed permutations of `0..n` (Leibniz expansion).
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    permutations(n)
}

pub fn wedge(forms: &[OneForm]) -> Result<TopForm, SeriesError> {
    let n = forms.len();
    let mut acc: Option<FormalFraction> = None;
    for (p, s) in permutations(n) {
        let mut term = forms[0].coeffs[p[0]].clone();
        for (i, &pi) in p.iter().enumerate().skip(1) {
            term = term.mul(&forms[i].coeffs[pi])?;
        }
        if s < 0 {
            term = term.neg();
        }
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    Ok(TopForm { coeff: acc.expect("at least one form") })
}

/// Bernoulli numbers `B_0..B_m` with `B_1 = -1/2`.
pub fn bernoulli(m: usize) -> Vec<Rational> {
    let mut b = vec![Rational::zero(); m + 1];
    b[0] = Rational::one();
    for k in 1..=m {
        let mut s = Rational::zero();
        let mut c = BigInt::one();
        for (j, bj) in b.iter().enumerate().take(k) {
            s += bj * Rational::from_integer(c.clone());
            c = c * BigInt::from(k + 1 - j) / BigInt::from(j + 1);
        }
        b[k] = -s / Rational::from_integer(BigInt::from(k + 1));
    }
    b
}

pub fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `1/(1 - z)` for `z = e(q)` with `q` not an integer.
pub fn inv_one_minus_root(q: &Rational) -> Result<CycNum, SeriesError> {
    let f = frac_part(q);
    if f.is_zero() {
        return Err(SeriesError::VanishingReciprocal);
    }
    // for z of exact order m: sum_{j<m} j z^j = m / (z - 1)
    let m: u64 = f.denom().try_into().map_err(|_| CycError::ConductorCap { needed: u64::MAX, cap: 0 })?;
    let a: u64 = f.numer().try_into().unwrap();
    crate::cyclotomic::check_conductor(m)?;
    let coeffs: Vec<Rational> = {
        let mut full = vec![Rational::zero(); m as usize];
        for j in 0..m {
            full[((a * j) % m) as usize] += int(-(j as i64));
        }
        full.into_iter().map(|x| x / int(m as i64)).collect()
    };
    Ok(CycNum::from_coefficients(m, &coeffs)?)
}

/// `Li_{-k}(z)` for `k = 0..=m` at `z = e(q)`, `q` not an integer.
pub fn negative_polylogs(q: &Rational, m: usize) -> Result<Vec<CycNum>, SeriesError> {
    let w = &inv_one_minus_root(q)? - &CycNum::one();
    let mut pows = vec![CycNum::one(), w.clone()];
    for k in 2..=m + 1 {
        let next = &pows[k - 1] * &w;
        pows.push(next);
    }
    // Li_{-k} = P_k(w) with P_0 = w and P_{k+1} = (w + w^2) P_k'
    let mut poly: Vec<BigInt> = vec![BigInt::zero(), BigInt::one()];
    let mut out = Vec::with_capacity(m + 1);
    for _ in 0..=m {
        let mut acc = CycAcc::new();
        for (i, c) in poly.iter().enumerate() {
            if !c.is_zero() {
                acc.add_scaled(&pows[i], c, &BigInt::one());
            }
        }
        out.push(acc.finish());
        let mut next = vec![BigInt::zero(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate().skip(1) {
            let d = c * BigInt::from(i);
            next[i] += &d;
            next[i + 1] += &d;
        }
        poly = next;
    }
    Ok(out)
}

/// Taylor coefficients through `s^deg` of `s * d/ds log(1 - e(-r) e^{c s})`,
/// a power series in `s` even when `r` is an integer.
pub fn one_minus_dlog_series(r: &Rational, c: &Rational, deg: usize) -> Result<Vec<CycNum>, SeriesError> {
    let mut out = Vec::with_capacity(deg + 1);
    if frac_part(r).is_zero() {
        // -y e^y/(1 - e^y) = y/(1 - e^{-y}) = sum B_k^+ y^k / k!
        let b = bernoulli(deg);
        let mut cp = Rational::one();
        for (k, bk) in b.iter().enumerate() {
            let bk = if k == 1 { -bk.clone() } else { bk.clone() };
            out.push(CycNum::from_rational(&(bk * &cp / Rational::from_integer(factorial(k)))));
            cp *= c;
        }
        return Ok(out);
    }
    // -c s h(z e^{cs}) with h(x) = x/(1 - x) = sum Li_{-m}(z) (cs)^m / m!
    let li = negative_polylogs(&-r, deg.saturating_sub(1))?;
    out.push(CycNum::zero());
    let mut cp = c.clone();
    for (m, l) in li.iter().enumerate().take(deg) {
        out.push(l.scale(&(-&cp / Rational::from_integer(factorial(m)))));
        cp *= c;
    }
    Ok(out)
}

fn univariate(c: Vec<CycNum>) -> MultiSeries {
    let deg = c.len() - 1;
    MultiSeries::from_dense(Layout::get(1, deg), c)
}

/// `e(q) e^{lambda . T}` through degree `deg`.
pub fn exp_affine(q: &Rational, lambda: &[Rational], deg: usize) -> Result<MultiSeries, SeriesError> {
    let z = CycNum::root_of_unity(q)?;
    let c: Vec<CycNum> =
        (0..=deg).map(|k| z.scale(&Rational::new(BigInt::one(), factorial(k)))).collect();
    Ok(univariate(c).compose_linear(&[lambda.to_vec()], lambda.len()))
}

/// `1 / (1 - e(q) e^{lambda . T})` with Laurent precision `deg`.
pub fn reciprocal_one_minus(q: &Rational, lambda: &[Rational], deg: usize) -> Result<FormalFraction, SeriesError> {
    let n = lambda.len();
    let is_zero_form = lambda.iter().all(|x| x.is_zero());
    if frac_part(q).is_zero() {
        if is_zero_form {
            return Err(SeriesError::VanishingReciprocal);
        }
        // 1/(1 - e^y) = -(1/y) sum B_k y^k / k!
        let b = bernoulli(deg + 1);
        let c: Vec<CycNum> = b
            .iter()
            .enumerate()
            .map(|(k, bk)| CycNum::from_rational(&(-bk / Rational::from_integer(factorial(k)))))
            .collect();
        return FormalFraction::from_coordinates(&univariate(c), &[lambda.to_vec()], &[lambda.to_vec()], n);
    }
    // 1/(1 - z e^y) = 1 + h(z e^y)
    let li = negative_polylogs(q, deg)?;
    let c: Vec<CycNum> = li
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let v = l.scale(&Rational::new(BigInt::one(), factorial(k)));
            if k == 0 {
                &v + &CycNum::one()
            } else {
                v
            }
        })
        .collect();
    FormalFraction::from_coordinates(&univariate(c), &[lambda.to_vec()], &[], n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{int, rat};
    use proptest::prelude::*;

    fn q(x: i64) -> CycNum {
        CycNum::from_int(x)
    }

    fn qr(p: i64, d: i64) -> CycNum {
        CycNum::from_rational(&rat(p, d))
    }

    #[test]
    fn layout_rank_matches_enumeration() {
        for n in 1..=4 {
            let l = Layout::get(n, 6);
            for i in 0..l.len() {
                assert_eq!(l.rank(l.mono(i)), Some(i));
            }
        }
        let l = Layout::get(2, 2);
        let order: Vec<Vec<u32>> = (0..l.len()).map(|i| l.mono(i).to_vec()).collect();
        assert_eq!(order, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn exp_examples() {
        let s = exp_affine(&int(0), &[int(1)], 2).unwrap();
        assert_eq!(s.coeffs(), &[q(1), q(1), qr(1, 2)]);
        let s = exp_affine(&rat(1, 2), &[int(1)], 1).unwrap();
        assert_eq!(s.coeffs(), &[q(-1), q(-1)]);
    }

    #[test]
    fn exp_two_variables_against_multinomial_oracle() {
        let z = CycNum::root_of_unity(&rat(1, 3)).unwrap();
        let s = exp_affine(&rat(1, 3), &[int(1), int(1)], 2).unwrap();
        // (T1+T2)^k/k!: coefficient of T1^a T2^b is 1/(a! b!)
        for a in 0..=2u32 {
            for b in 0..=(2 - a) {
                let oracle = rat(1, (factorial(a as usize) * factorial(b as usize)).try_into().unwrap());
                assert_eq!(s.coeff(&[a, b]), z.scale(&oracle));
            }
        }
    }

    #[test]
    fn reciprocal_half_matches_geometric_oracle() {
        // 1/(1 + e^T) by long division of power series: 1/2 - T/4 + 0 T^2 + T^3/48
        let r = reciprocal_one_minus(&rat(1, 2), &[int(1)], 3).unwrap();
        assert!(r.denominators().is_empty());
        assert_eq!(r.numerator().coeffs(), &[qr(1, 2), qr(-1, 4), q(0), qr(1, 48)]);
    }

    #[test]
    fn reciprocal_pole_case_and_bernoulli_companion() {
        // 1/(e^T - 1) = -1/(1 - e^T) = 1/T - 1/2 + T/12 + ...
        let r = reciprocal_one_minus(&int(0), &[int(1)], 2).unwrap();
        assert_eq!(r.denominators().len(), 1);
        let companion = r.neg();
        let expected = FormalFraction::new(univariate(vec![q(1), qr(-1, 2), qr(1, 12), q(0)]), vec![LinForm::canonical(&[int(1)]).unwrap().0]);
        assert!(eq_fraction(&companion, &expected, 2).unwrap());
        assert_eq!(reciprocal_one_minus(&int(3), &[int(0)], 2).err(), Some(SeriesError::VanishingReciprocal));
    }

    #[test]
    fn fraction_arith_examples() {
        let t = LinForm::canonical(&[int(1)]).unwrap().0;
        let x = FormalFraction::new(univariate(vec![q(-1), qr(-1, 2), qr(-1, 12), q(0)]), vec![t.clone()]);
        let zero = FormalFraction::zero(1, 4);
        assert!(eq_fraction(&x.add(&zero).unwrap(), &x, 2).unwrap());
        let inv_t = FormalFraction::new(univariate(vec![q(1), q(0), q(0)]), vec![t.clone()]);
        let tt = FormalFraction::from_series(univariate(vec![q(0), q(1), q(0), q(0)]));
        assert!(eq_fraction(&inv_t.mul(&tt).unwrap(), &FormalFraction::one(1, 1), 1).unwrap());
        let sum = x.add(&inv_t).unwrap();
        let expected = FormalFraction::from_series(univariate(vec![qr(-1, 2), qr(-1, 12)]));
        assert!(eq_fraction(&sum, &expected, 1).unwrap());
        // 1/T vs (1+T)/T differ at degree 0
        let other = FormalFraction::new(univariate(vec![q(1), q(1), q(0)]), vec![t]);
        assert!(!eq_fraction(&inv_t, &other, 1).unwrap());
    }

    #[test]
    fn exp_over_one_minus_exp_identity() {
        // e^T/(1 - e^T) = -1 - 1/(e^T - 1) = -1 + 1/(1 - e^T)
        let d = 6;
        let lhs = FormalFraction::from_series(exp_affine(&int(0), &[int(1)], d + 1).unwrap())
            .mul(&reciprocal_one_minus(&int(0), &[int(1)], d + 1).unwrap())
            .unwrap();
        let rhs = FormalFraction::one(1, d).neg().add(&reciprocal_one_minus(&int(0), &[int(1)], d).unwrap()).unwrap();
        assert!(eq_fraction(&lhs, &rhs, d as i64).unwrap());
    }

    #[test]
    fn precision_errors_are_reported() {
        let x = FormalFraction::one(1, 2);
        assert!(matches!(eq_fraction(&x, &x, 5), Err(SeriesError::Precision { .. })));
    }

    #[test]
    fn substitute_examples() {
        let g = QMatrix::from_ints(&[&[2, 0], &[0, 1]]);
        let s = MultiSeries::linear(&[int(1), int(0)], 2);
        assert_eq!(s.substitute(&QMatrix::identity(2)), s);
        assert_eq!(s.substitute(&g), MultiSeries::linear(&[int(2), int(0)], 2));
        let rho = crate::qlinalg::shift_permutation(2);
        let s = MultiSeries::linear(&[int(1), int(3)], 2);
        assert_eq!(s.substitute(&rho), MultiSeries::linear(&[int(3), int(1)], 2));
        let top = TopForm { coeff: FormalFraction::from_series(s.clone()) };
        let moved = top.substitute(&rho).unwrap();
        let expected = FormalFraction::from_series(MultiSeries::linear(&[int(-3), int(-1)], 2));
        assert!(eq_fraction(&moved.coeff, &expected, 2).unwrap());
    }

    #[test]
    fn wedge_examples() {
        let one = FormalFraction::one(2, 3);
        let dt1 = OneForm::along(&one, &[int(1), int(0)]);
        let dt2 = OneForm::along(&one, &[int(0), int(1)]);
        let w = wedge(&[dt1.clone(), dt2.clone()]).unwrap();
        assert!(eq_fraction(&w.coeff, &one, 3).unwrap());
        let w = wedge(&[dt2.clone(), dt1.clone()]).unwrap();
        assert!(eq_fraction(&w.coeff, &one.neg(), 3).unwrap());
        let s = dt1.add(&dt2).unwrap();
        assert!(wedge(&[s.clone(), s]).unwrap().coeff.is_zero_through(3).unwrap());
    }

    #[test]
    fn bernoulli_numbers() {
        let b = bernoulli(6);
        assert_eq!(b, vec![int(1), rat(-1, 2), rat(1, 6), int(0), rat(-1, 30), int(0), rat(1, 42)]);
    }

    #[test]
    fn polylog_values_against_direct_sums() {
        // Li_0(z) = z/(1-z); at z = -1 that is -1/2, Li_{-1}(-1) = -1/4
        let li = negative_polylogs(&rat(1, 2), 2).unwrap();
        assert_eq!(li[0], qr(-1, 2));
        assert_eq!(li[1], qr(-1, 4));
        assert_eq!(li[2], q(0));
    }

    fn small_series(n: usize, deg: usize) -> impl Strategy<Value = MultiSeries> {
        let len = Layout::get(n, deg).len();
        proptest::collection::vec((-4i64..=4, 0i64..3), len).prop_map(move |v| {
            let c = v
                .iter()
                .map(|&(a, k)| if k == 0 { CycNum::from_int(a) } else { CycNum::root_of_unity(&rat(k, 3)).unwrap().scale(&int(a)) })
                .collect();
            MultiSeries::from_dense(Layout::get(n, deg), c)
        })
    }

    fn small_matrix() -> impl Strategy<Value = QMatrix> {
        proptest::collection::vec(-2i64..=2, 4).prop_map(|v| QMatrix::from_ints(&[&v[..2], &v[2..]]))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn substitution_composes(s in small_series(2, 3), a in small_matrix(), b in small_matrix()) {
            prop_assert_eq!(s.substitute(&b.mul(&a)), s.substitute(&a).substitute(&b));
        }

        #[test]
        fn fraction_arith_laws(a in small_series(2, 4), b in small_series(2, 4), c in small_series(2, 4)) {
            let l1 = LinForm::canonical(&[int(1), int(2)]).unwrap().0;
            let l2 = LinForm::canonical(&[int(1), int(-1)]).unwrap().0;
            let x = FormalFraction::new(a, vec![l1.clone()]);
            let y = FormalFraction::new(b, vec![l2.clone()]);
            let z = FormalFraction::new(c, vec![l1, l2]);
            let xy = x.mul(&y).unwrap();
            prop_assert!(eq_fraction(&xy, &y.mul(&x).unwrap(), xy.trust()).unwrap());
            let left = x.add(&y).unwrap().add(&z).unwrap();
            let right = x.add(&y.add(&z).unwrap()).unwrap();
            prop_assert!(eq_fraction(&left, &right, left.trust().min(right.trust())).unwrap());
            let p = xy.mul(&z).unwrap();
            let q = x.mul(&y.mul(&z).unwrap()).unwrap();
            let t = p.trust().min(q.trust());
            prop_assert!(eq_fraction(&p, &q, t).unwrap());
        }

        #[test]
        fn wedge_is_alternating_and_multilinear(a in small_series(2, 3), b in small_series(2, 3), c in small_series(2, 3)) {
            let f = |s: &MultiSeries| FormalFraction::from_series(s.clone());
            let w1 = OneForm { coeffs: vec![f(&a), f(&b)] };
            let w2 = OneForm { coeffs: vec![f(&c), f(&a)] };
            let w3 = OneForm { coeffs: vec![f(&b), f(&c)] };
            let x = wedge(&[w1.clone(), w2.clone()]).unwrap();
            let y = wedge(&[w2.clone(), w1.clone()]).unwrap();
            prop_assert!(eq_fraction(&x.coeff, &y.neg().coeff, 3).unwrap());
            let sum = wedge(&[w1.add(&w3).unwrap(), w2.clone()]).unwrap();
            let parts = x.add(&wedge(&[w3, w2]).unwrap()).unwrap();
            prop_assert!(eq_fraction(&sum.coeff, &parts.coeff, 3).unwrap());
        }

        #[test]
        fn reciprocal_times_one_minus_is_one(p in 0i64..6, d in 1i64..=6, l1 in -2i64..=2, l2 in -2i64..=2) {
            prop_assume!(l1 != 0 || l2 != 0);
            let qv = rat(p, d);
            let lam = vec![int(l1), int(l2)];
            let deg = 5;
            let r = reciprocal_one_minus(&qv, &lam, deg).unwrap();
            let e = exp_affine(&qv, &lam, deg + 2).unwrap();
            let one_minus = MultiSeries::one(2, deg + 2).sub(&e);
            let prod = r.mul(&FormalFraction::from_series(one_minus)).unwrap();
            prop_assert!(prod.trust() >= deg as i64);
            prop_assert!(eq_fraction(&prod, &FormalFraction::one(2, deg), deg as i64).unwrap());
        }
    }
}
