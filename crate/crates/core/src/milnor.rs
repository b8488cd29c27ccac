//! Stevens side: trigonometric units, formal Milnor symbols, the
//! distributions built from `1 - e(z)`, the symbol-valued cochain and
//! cocycle, and the logarithmic derivative into top forms.
//!
//! Symbols are formal words. Identities that hold modulo Steinberg-type
//! relations are certified by comparing logarithmic derivatives.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cyclotomic::{CycAcc, CycError, CycNum};
use crate::modular::product_sum;
use crate::qlinalg::{
    basis_to_group, covector_action, fmt_rational, frac_part, parse_rational, standard_covector, LinalgError, QMatrix,
    Rational,
};
use crate::schwartz::{act_test, scalar_modulus_decomposition, SchwartzError, TestFunction};
use crate::series::{
    exp_affine, one_minus_dlog_series, reciprocal_one_minus, wedge, FormalFraction, Layout, MultiSeries, OneForm,
    SeriesError, TopForm,
};

#[derive(Debug, Error)]
pub enum MilnorError {
    #[error("test function has non-integer values")]
    NonInteger,
    #[error("covector tuple is degenerate")]
    Degenerate,
    #[error("covector is zero")]
    ZeroCovector,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("coefficient {0} exceeds the supported range")]
    Overflow(String),
    #[error("partial sum {0} does not match the supplied unit")]
    Unrepresentable(usize),
    #[error("invalid symbol JSON: {0}")]
    Parse(String),
    #[error(transparent)]
    Schwartz(SchwartzError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

impl From<SchwartzError> for MilnorError {
    fn from(e: SchwartzError) -> Self {
        match e {
            SchwartzError::NonInteger(..) => MilnorError::NonInteger,
            e => MilnorError::Schwartz(e),
        }
    }
}

/// `e(-r) e^{lambda . T}`, i.e. `exp(2 pi i (lambda(z) - r))`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrigParam {
    pub r: Rational,
    pub lambda: Vec<Rational>,
}

impl TrigParam {
    pub fn new(r: Rational, lambda: Vec<Rational>) -> Result<Self, MilnorError> {
        if lambda.iter().all(Zero::is_zero) {
            return Err(MilnorError::ZeroCovector);
        }
        Ok(TrigParam { r: frac_part(&r), lambda })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn inverse(&self) -> TrigParam {
        TrigParam { r: frac_part(&-&self.r), lambda: self.lambda.iter().map(|x| -x).collect() }
    }

    fn to_json(&self, exp: i64) -> Value {
        json!({"r": fmt_rational(&self.r), "lambda": self.lambda.iter().map(fmt_rational).collect::<Vec<_>>(), "exp": exp})
    }
}

/// `sign * prod eps^k * prod (1 - eps)^k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrigUnit {
    pub sign: i8,
    pub eps: Vec<(TrigParam, i64)>,
    pub one_minus: Vec<(TrigParam, i64)>,
}

fn merge_factors(fs: Vec<(TrigParam, i64)>) -> Vec<(TrigParam, i64)> {
    let mut m: BTreeMap<TrigParam, i64> = BTreeMap::new();
    for (p, k) in fs {
        *m.entry(p).or_insert(0) += k;
    }
    m.into_iter().filter(|(_, k)| *k != 0).collect()
}

impl TrigUnit {
    pub fn one() -> Self {
        TrigUnit { sign: 1, eps: Vec::new(), one_minus: Vec::new() }
    }

    pub fn minus_one() -> Self {
        TrigUnit { sign: -1, eps: Vec::new(), one_minus: Vec::new() }
    }

    pub fn eps(p: TrigParam) -> Self {
        TrigUnit { sign: 1, eps: vec![(p, 1)], one_minus: Vec::new() }
    }

    pub fn one_minus(p: TrigParam) -> Self {
        TrigUnit { sign: 1, eps: Vec::new(), one_minus: vec![(p, 1)] }
    }

    /// Merges equal factors and drops zero exponents.
    pub fn canonical(&self) -> TrigUnit {
        TrigUnit { sign: self.sign, eps: merge_factors(self.eps.clone()), one_minus: merge_factors(self.one_minus.clone()) }
    }

    pub fn mul(&self, o: &TrigUnit) -> TrigUnit {
        TrigUnit {
            sign: self.sign * o.sign,
            eps: merge_factors(self.eps.iter().chain(&o.eps).cloned().collect()),
            one_minus: merge_factors(self.one_minus.iter().chain(&o.one_minus).cloned().collect()),
        }
    }

    pub fn pow(&self, k: i64) -> TrigUnit {
        let scale = |fs: &[(TrigParam, i64)]| fs.iter().map(|(p, e)| (p.clone(), e * k)).collect();
        TrigUnit {
            sign: if self.sign < 0 && k % 2 != 0 { -1 } else { 1 },
            eps: merge_factors(scale(&self.eps)),
            one_minus: merge_factors(scale(&self.one_minus)),
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut TrigParam> {
        self.eps.iter_mut().chain(self.one_minus.iter_mut()).map(|(p, _)| p)
    }

    /// The unit as a Laurent series in `n` variables.
    pub fn series(&self, n: usize, deg: usize) -> Result<FormalFraction, MilnorError> {
        let mut acc = FormalFraction::one(n, deg);
        if self.sign < 0 {
            acc = acc.neg();
        }
        for (p, k) in &self.eps {
            let q = if *k > 0 { p.clone() } else { p.inverse() };
            let e = FormalFraction::from_series(exp_affine(&-&q.r, &q.lambda, deg)?);
            for _ in 0..k.unsigned_abs() {
                acc = acc.mul(&e)?;
            }
        }
        for (p, k) in &self.one_minus {
            let f = if *k > 0 {
                let s = MultiSeries::one(n, deg).sub(&exp_affine(&-&p.r, &p.lambda, deg)?);
                FormalFraction::from_series(s)
            } else {
                reciprocal_one_minus(&-&p.r, &p.lambda, deg)?
            };
            for _ in 0..k.unsigned_abs() {
                acc = acc.mul(&f)?;
            }
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "sign": self.sign,
            "eps": self.eps.iter().map(|(p, k)| p.to_json(*k)).collect::<Vec<_>>(),
            "one_minus": self.one_minus.iter().map(|(p, k)| p.to_json(*k)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<TrigUnit, MilnorError> {
        let perr = |s: &str| MilnorError::Parse(s.to_string());
        let rat = |x: &Value| -> Result<Rational, MilnorError> {
            match x {
                Value::String(s) => Ok(parse_rational(s)?),
                Value::Number(k) => k.as_i64().map(crate::qlinalg::int).ok_or_else(|| perr("non-integer number")),
                _ => Err(perr("expected a rational")),
            }
        };
        let factors = |key: &str| -> Result<Vec<(TrigParam, i64)>, MilnorError> {
            let Some(list) = v.get(key) else { return Ok(Vec::new()) };
            list.as_array()
                .ok_or_else(|| perr("factor list must be an array"))?
                .iter()
                .map(|f| {
                    let r = rat(f.get("r").ok_or_else(|| perr("missing r"))?)?;
                    let lambda = f
                        .get("lambda")
                        .and_then(Value::as_array)
                        .ok_or_else(|| perr("missing lambda"))?
                        .iter()
                        .map(rat)
                        .collect::<Result<Vec<_>, _>>()?;
                    let exp = f.get("exp").map_or(Some(1), Value::as_i64).ok_or_else(|| perr("bad exp"))?;
                    Ok((TrigParam::new(r, lambda)?, exp))
                })
                .collect()
        };
        let sign = match v.get("sign").map_or(Some(1), Value::as_i64) {
            Some(1) => 1,
            Some(-1) => -1,
            _ => return Err(perr("sign must be 1 or -1")),
        };
        Ok(TrigUnit { sign, eps: factors("eps")?, one_minus: factors("one_minus")? }.canonical())
    }
}

/// An ordered tuple of units.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KSymbol {
    pub units: Vec<TrigUnit>,
}

/// A formal integer combination of symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KChain {
    pub terms: Vec<(i64, KSymbol)>,
}

impl KChain {
    pub fn add(&self, o: &KChain) -> KChain {
        KChain { terms: self.terms.iter().chain(&o.terms).cloned().collect() }
    }

    pub fn scale(&self, k: i64) -> KChain {
        KChain { terms: self.terms.iter().map(|(c, s)| (c * k, s.clone())).collect() }
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(c, s)| json!({"coeff": c, "symbol": s.units.iter().map(TrigUnit::to_json).collect::<Vec<_>>()}))
                .collect(),
        )
    }

    pub fn from_json(v: &Value) -> Result<KChain, MilnorError> {
        let perr = |s: &str| MilnorError::Parse(s.to_string());
        let terms = v
            .as_array()
            .ok_or_else(|| perr("chain must be an array"))?
            .iter()
            .map(|t| {
                let c = t.get("coeff").and_then(Value::as_i64).ok_or_else(|| perr("missing coeff"))?;
                let units = t
                    .get("symbol")
                    .and_then(Value::as_array)
                    .ok_or_else(|| perr("missing symbol"))?
                    .iter()
                    .map(TrigUnit::from_json)
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((c, KSymbol { units }))
            })
            .collect::<Result<Vec<_>, MilnorError>>()?;
        Ok(KChain { terms })
    }
}

fn small(b: &BigInt) -> Result<i64, MilnorError> {
    b.to_i64().ok_or_else(|| MilnorError::Overflow(b.to_string()))
}

/// `1 - e((z_i - a)/d)` on an `n`-dimensional space.
pub fn coordinate_eta(a: &Rational, d: &Rational, n: usize, i: usize) -> TrigUnit {
    let lambda = standard_covector(n, i).into_iter().map(|x| x / d).collect();
    TrigUnit::one_minus(TrigParam { r: frac_part(&(a / d)), lambda })
}

/// `prod (1 - e((z - a)/d))^b` over a one-dimensional coset presentation
/// `sum b chi(a + dZ)`.
pub fn eta_cosets(terms: &[(i64, Rational, Rational)]) -> TrigUnit {
    terms.iter().fold(TrigUnit::one(), |acc, (b, a, d)| acc.mul(&coordinate_eta(a, d, 1, 0).pow(*b)))
}

/// `prod (e((z - a)/2d) - e((a - z)/2d))^b`, written as
/// `-e((a - z)/2d) (1 - e((z - a)/d))`.
pub fn eta_plus_cosets(terms: &[(i64, Rational, Rational)]) -> TrigUnit {
    terms.iter().fold(TrigUnit::one(), |acc, (b, a, d)| {
        let two_d = d * Rational::from_integer(BigInt::from(2));
        let e = TrigParam { r: frac_part(&-(a / &two_d)), lambda: vec![-two_d.recip()] };
        let one = TrigUnit { sign: -1, eps: vec![(e, 1)], one_minus: Vec::new() }.mul(&coordinate_eta(a, d, 1, 0));
        acc.mul(&one.pow(*b))
    })
}

fn one_dim_terms(f: &TestFunction) -> Result<Vec<(i64, Rational, Rational)>, MilnorError> {
    if f.dim() != 1 {
        return Err(MilnorError::Dimension(1, f.dim()));
    }
    scalar_modulus_decomposition(f)?.into_iter().map(|(b, p, g)| Ok((small(&b)?, p[0].clone(), g))).collect()
}

/// The multiplicative distribution `eta` on an integer-valued function of
/// one variable.
pub fn eta(f: &TestFunction) -> Result<TrigUnit, MilnorError> {
    Ok(eta_cosets(&one_dim_terms(f)?))
}

/// The sign-symmetric variant of `eta`.
pub fn eta_plus(f: &TestFunction) -> Result<TrigUnit, MilnorError> {
    Ok(eta_plus_cosets(&one_dim_terms(f)?))
}

/// `(u|_g)(x) = u(x g^{-1})`: every covector `lambda` becomes `g^{-1} lambda`.
pub fn unit_action(g: &QMatrix, u: &TrigUnit) -> Result<TrigUnit, MilnorError> {
    let inv = g.inverse()?;
    let mut out = u.clone();
    for p in out.params_mut() {
        if p.lambda.len() != g.dim() {
            return Err(MilnorError::Dimension(g.dim(), p.lambda.len()));
        }
        p.lambda = inv.apply_col(&p.lambda);
    }
    Ok(out.canonical())
}

pub fn symbol_action(g: &QMatrix, s: &KSymbol) -> Result<KSymbol, MilnorError> {
    Ok(KSymbol { units: s.units.iter().map(|u| unit_action(g, u)).collect::<Result<_, _>>()? })
}

/// The cochain on a covector basis: move the basis to the standard one,
/// split the moved function into cosets of `d Z^n`, take coordinatewise
/// `eta`, and move back.
pub fn xi_st(lambdas: &[Vec<Rational>], f: &TestFunction) -> Result<KChain, MilnorError> {
    let n = f.dim();
    if lambdas.len() != n {
        return Err(MilnorError::Dimension(n, lambdas.len()));
    }
    for l in lambdas {
        if l.len() != n {
            return Err(MilnorError::Dimension(n, l.len()));
        }
    }
    let g = basis_to_group(lambdas).map_err(|e| match e {
        LinalgError::Dependent | LinalgError::Singular => MilnorError::Degenerate,
        e => e.into(),
    })?;
    let moved = act_test(&g, f)?;
    let mut terms = Vec::new();
    for (b, p, d) in scalar_modulus_decomposition(&moved)? {
        let units = (0..n).map(|i| coordinate_eta(&p[i], &d, n, i)).collect();
        terms.push((small(&b)?, symbol_action(&g, &KSymbol { units })?));
    }
    Ok(KChain { terms })
}

/// The cocycle on a tuple of matrices, through the first columns.
pub fn phi_st(gammas: &[QMatrix], f: &TestFunction) -> Result<KChain, MilnorError> {
    let n = f.dim();
    if gammas.len() != n {
        return Err(MilnorError::Dimension(n, gammas.len()));
    }
    let e1 = standard_covector(n, 0);
    let lambdas = gammas.iter().map(|g| covector_action(g, &e1)).collect::<Result<Vec<_>, _>>()?;
    xi_st(&lambdas, f)
}

/// `dlog u` as a one-form, with Laurent precision `deg`.
pub fn dlog_unit(u: &TrigUnit, n: usize, deg: usize) -> Result<OneForm, MilnorError> {
    let mut acc = OneForm::zero(n, deg);
    for (p, k) in &u.eps {
        if p.dim() != n {
            return Err(MilnorError::Dimension(n, p.dim()));
        }
        let c = FormalFraction::one(n, deg).scale_rat(&Rational::from_integer(BigInt::from(*k)));
        acc = acc.add(&OneForm::along(&c, &p.lambda))?;
    }
    for (p, k) in &u.one_minus {
        if p.dim() != n {
            return Err(MilnorError::Dimension(n, p.dim()));
        }
        // dlog(1 - eps) = (1 - 1/(1 - eps)) lambda . dT
        let c = FormalFraction::one(n, deg + 1)
            .sub(&reciprocal_one_minus(&-&p.r, &p.lambda, deg + 1)?)?
            .scale_rat(&Rational::from_integer(BigInt::from(*k)));
        acc = acc.add(&OneForm::along(&c, &p.lambda))?;
    }
    Ok(acc)
}

/// `sum c dlog x_1 ^ .. ^ dlog x_n` through the generic wedge.
pub fn dlog_chain_generic(c: &KChain, n: usize, deg: usize) -> Result<TopForm, MilnorError> {
    let mut acc = TopForm::zero(n, deg);
    for (k, s) in &c.terms {
        if s.units.len() != n {
            return Err(MilnorError::Dimension(n, s.units.len()));
        }
        let forms = s.units.iter().map(|u| dlog_unit(u, n, deg)).collect::<Result<Vec<_>, _>>()?;
        acc = acc.add(&wedge(&forms)?.scale_rat(&Rational::from_integer(BigInt::from(*k))))?;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum FactorKind {
    Eps,
    OneMinus,
}

/// A factor along `c p` with `p` primitive integral and `c > 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RankOne {
    kind: FactorKind,
    r: Rational,
    c: Rational,
}

fn split_direction(lambda: &[Rational]) -> (Vec<Rational>, Rational) {
    let p = crate::epscone::primitive(lambda);
    let i = p.iter().position(|x| !x.is_zero()).expect("nonzero covector");
    let c = &lambda[i] / &p[i];
    (p, c)
}

/// Outer product of a univariate series with a series in the remaining
/// variables, accumulated into `acc` (layout with one more variable).
fn outer_into(acc: &mut [CycAcc], layout: &Layout, u: &[CycNum], child: &MultiSeries) {
    let deg = layout.deg;
    let cl = child.layout();
    let mut e = vec![0u32; layout.n];
    for (i, x) in child.coeffs().iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        let d = cl.degree_of(i);
        e[1..].copy_from_slice(cl.mono(i));
        for (t, ut) in u.iter().enumerate().take(deg - d + 1) {
            if !ut.is_zero() {
                e[0] = t as u32;
                acc[layout.rank(&e).expect("in range")].add(&(ut * x));
            }
        }
    }
}

/// `sum coeff prod_j series[ids_j](u_j)`, evaluated level by level so that
/// shared prefixes are multiplied once.
fn trie_sum(entries: &BTreeMap<Vec<usize>, i64>, series: &[Vec<CycNum>], n: usize, deg: usize) -> MultiSeries {
    // last position: plain sums of univariate series
    let mut level: BTreeMap<Vec<usize>, MultiSeries> = BTreeMap::new();
    {
        let lay = Layout::get(1, deg);
        let mut sums: BTreeMap<Vec<usize>, Vec<CycAcc>> = BTreeMap::new();
        for (ids, k) in entries {
            let acc = sums.entry(ids[..n - 1].to_vec()).or_insert_with(|| vec![CycAcc::new(); deg + 1]);
            let kr = Rational::from_integer(BigInt::from(*k));
            for (a, s) in acc.iter_mut().zip(&series[ids[n - 1]]) {
                if !s.is_zero() {
                    a.add_rat(s, &kr);
                }
            }
        }
        for (p, acc) in sums {
            level.insert(p, MultiSeries::from_dense(lay.clone(), acc.into_iter().map(CycAcc::finish).collect()));
        }
    }
    for k in (0..n - 1).rev() {
        let lay = Layout::get(n - k, deg);
        let mut next: BTreeMap<Vec<usize>, Vec<CycAcc>> = BTreeMap::new();
        for (prefix, child) in &level {
            let acc = next.entry(prefix[..k].to_vec()).or_insert_with(|| vec![CycAcc::new(); lay.len()]);
            outer_into(acc, &lay, &series[prefix[k]], child);
        }
        level = next
            .into_iter()
            .map(|(p, acc)| (p, MultiSeries::from_dense(lay.clone(), acc.into_iter().map(CycAcc::finish).collect())))
            .collect();
    }
    level.remove(&Vec::new()).unwrap_or_else(|| MultiSeries::zero(n, deg))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    crate::series::signed_permutations(n).into_iter().map(|(p, _)| p).collect()
}

/// Position order minimizing the multiplication work of `trie_sum`.
fn best_order(entries: &BTreeMap<Vec<usize>, i64>, n: usize, deg: usize) -> Vec<usize> {
    let monos = |vars: usize| Layout::get(vars, deg).len();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for perm in permutations(n) {
        let mut cost = 0usize;
        for k in 1..n {
            let prefixes: std::collections::BTreeSet<Vec<usize>> =
                entries.keys().map(|ids| perm[..k].iter().map(|&j| ids[j]).collect()).collect();
            cost += prefixes.len() * monos(n - k + 1);
        }
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    best.map(|(_, p)| p).unwrap_or_default()
}

/// Group size from which grouped products are evaluated multi-modularly.
const MODULAR_THRESHOLD: usize = 16;

/// `sum c dlog x_1 ^ .. ^ dlog x_n`, expanded into wedges of rank-one
/// factors grouped by their direction tuples.
pub fn dlog_chain(c: &KChain, n: usize, deg: usize) -> Result<TopForm, MilnorError> {
    let top = deg + n;
    let mut ids: HashMap<RankOne, usize> = HashMap::new();
    let mut series: Vec<Vec<CycNum>> = Vec::new();
    let mut groups: BTreeMap<Vec<Vec<Rational>>, BTreeMap<Vec<usize>, i64>> = BTreeMap::new();
    for (coeff, s) in &c.terms {
        if s.units.len() != n {
            return Err(MilnorError::Dimension(n, s.units.len()));
        }
        // per entry: (direction, factor id, exponent)
        let mut entries: Vec<Vec<(Vec<Rational>, usize, i64)>> = Vec::with_capacity(n);
        for u in &s.units {
            let mut list = Vec::new();
            let all = u
                .eps
                .iter()
                .map(|f| (FactorKind::Eps, f))
                .chain(u.one_minus.iter().map(|f| (FactorKind::OneMinus, f)));
            for (kind, (p, k)) in all {
                if p.dim() != n {
                    return Err(MilnorError::Dimension(n, p.dim()));
                }
                let (dir, scale) = split_direction(&p.lambda);
                let key = RankOne { kind, r: p.r.clone(), c: scale };
                let id = match ids.get(&key) {
                    Some(&i) => i,
                    None => {
                        let s = match key.kind {
                            FactorKind::OneMinus => one_minus_dlog_series(&key.r, &key.c, top)?,
                            FactorKind::Eps => {
                                let mut v = vec![CycNum::zero(); top + 1];
                                if top > 0 {
                                    v[1] = CycNum::from_rational(&key.c);
                                }
                                v
                            }
                        };
                        series.push(s);
                        ids.insert(key, series.len() - 1);
                        series.len() - 1
                    }
                };
                list.push((dir, id, *k));
            }
            entries.push(list);
        }
        let mut choice = vec![0usize; n];
        if entries.iter().any(Vec::is_empty) {
            continue;
        }
        loop {
            let dirs: Vec<Vec<Rational>> = (0..n).map(|j| entries[j][choice[j]].0.clone()).collect();
            let fids: Vec<usize> = (0..n).map(|j| entries[j][choice[j]].1).collect();
            let w: i64 = (0..n).map(|j| entries[j][choice[j]].2).product::<i64>() * coeff;
            *groups.entry(dirs).or_default().entry(fids).or_insert(0) += w;
            let mut j = 0;
            while j < n {
                choice[j] += 1;
                if choice[j] < entries[j].len() {
                    break;
                }
                choice[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
    }
    let mut acc = FormalFraction::zero(n, deg);
    for (dirs, mut terms) in groups {
        terms.retain(|_, k| *k != 0);
        if terms.is_empty() {
            continue;
        }
        let det = QMatrix::from_rows(dirs.clone())?.det();
        if det.is_zero() {
            continue;
        }
        let order = best_order(&terms, n, top);
        let permuted: BTreeMap<Vec<usize>, i64> =
            terms.iter().map(|(ids, k)| (order.iter().map(|&j| ids[j]).collect(), *k)).collect();
        let data = if n >= 2 && permuted.len() >= MODULAR_THRESHOLD {
            product_sum(&permuted, &series, n, top)?
        } else {
            trie_sum(&permuted, &series, n, top)
        };
        let forms: Vec<Vec<Rational>> = order.iter().map(|&j| dirs[j].clone()).collect();
        let frac = FormalFraction::from_coordinates(&data, &forms, &forms, n)?.scale_rat(&det);
        acc = acc.add(&frac)?;
    }
    Ok(TopForm { coeff: acc })
}

fn alternating_faces(units: &[TrigUnit]) -> KChain {
    let terms = (0..units.len())
        .map(|i| {
            let face: Vec<TrigUnit> = units.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, u)| u.clone()).collect();
            (if i % 2 == 0 { 1 } else { -1 }, KSymbol { units: face })
        })
        .collect();
    KChain { terms }
}

/// Checks the supplied partial sums `u_1 + .. + u_k` as series.
pub fn check_partial_sums(units: &[TrigUnit], partial: &[TrigUnit], deg: usize) -> Result<(), MilnorError> {
    let n = units.len();
    if partial.len() != n {
        return Err(MilnorError::Dimension(n, partial.len()));
    }
    let mut sum = FormalFraction::zero(n, deg);
    for (k, (u, p)) in units.iter().zip(partial).enumerate() {
        sum = sum.add(&u.series(n, deg)?)?;
        if sum.compare(&p.series(n, deg)?, deg as i64)?.is_some() {
            return Err(MilnorError::Unrepresentable(k + 1));
        }
    }
    Ok(())
}

/// `sum_i (-1)^i dlog {u_0, .., (omit u_i), .., u_n}` with `u_0` the last
/// partial sum.
pub fn dedekind_residual(units: &[TrigUnit], partial: &[TrigUnit], deg: usize) -> Result<TopForm, MilnorError> {
    check_partial_sums(units, partial, deg)?;
    let n = units.len();
    let mut all = vec![partial[n - 1].clone()];
    all.extend(units.iter().cloned());
    dlog_chain(&alternating_faces(&all), n, deg)
}

/// Whether the reciprocity residual vanishes through degree `deg`.
pub fn dedekind_wedge_check(units: &[TrigUnit], partial: &[TrigUnit], deg: usize) -> Result<bool, MilnorError> {
    Ok(dedekind_residual(units, partial, deg)?.coeff.is_zero_through(deg as i64)?)
}

/// `eps_m = e((z_m - a_m)/d)` for `m = 1..n`, and `eps_0` for the sum.
fn coboundary_params(a: &[Rational], d: &Rational) -> Vec<TrigParam> {
    let n = a.len();
    let total: Rational = a.iter().fold(Rational::zero(), |s, x| s + x);
    let mut out = vec![TrigParam { r: frac_part(&(&total / d)), lambda: vec![d.recip(); n] }];
    for (i, ai) in a.iter().enumerate() {
        out.push(TrigParam {
            r: frac_part(&(ai / d)),
            lambda: standard_covector(n, i).into_iter().map(|x| x / d).collect(),
        });
    }
    out
}

/// The telescoping units `u_i = (1 - eps_i) prod_{m<i} eps_m` and their
/// partial sums `1 - prod_{m<=k} eps_m`.
pub fn telescoping_units(a: &[Rational], d: &Rational) -> (Vec<TrigUnit>, Vec<TrigUnit>) {
    let n = a.len();
    let eps = coboundary_params(a, d);
    let mut units = Vec::with_capacity(n);
    let mut partial = Vec::with_capacity(n);
    for i in 1..=n {
        let mut u = TrigUnit::one_minus(eps[i].clone());
        for e in &eps[1..i] {
            u = u.mul(&TrigUnit::eps(e.clone()));
        }
        units.push(u);
        let r = (1..=i).fold(Rational::zero(), |s, m| s + &eps[m].r);
        let lambda = (0..n).map(|j| if j < i { d.recip() } else { Rational::zero() }).collect();
        partial.push(TrigUnit::one_minus(TrigParam { r: frac_part(&r), lambda }));
    }
    (units, partial)
}

/// Outcome of the coboundary certificate.
#[derive(Clone, Debug)]
pub struct CoboundaryCheck {
    /// dlog of the alternating sum of cochain values on the faces.
    pub coboundary: TopForm,
    /// dlog of the explicit correction terms, each with a constant factor.
    pub correction: TopForm,
    pub pass: bool,
}

/// The faces `[e_1* + .. + e_n*, e_1*, .., e_n*]` with entry `i` omitted.
pub fn coboundary_faces(n: usize) -> Vec<Vec<Vec<Rational>>> {
    let mut all = vec![vec![Rational::one(); n]];
    all.extend((0..n).map(|i| standard_covector(n, i)));
    (0..=n).map(|i| all.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.clone()).collect()).collect()
}

/// Certifies that the coboundary of the cochain on
/// `[e_1* + .. + e_n*, e_1*, .., e_n*]` at `chi(a + d Z^n)` is a sum of
/// symbols with a pure exponential entry, at the dlog level.
pub fn stevens_coboundary_check(a: &[Rational], d: &Rational, deg: usize) -> Result<CoboundaryCheck, MilnorError> {
    let n = a.len();
    let f = TestFunction::chi(a, d)?;
    let mut chain = KChain::default();
    for (i, face) in coboundary_faces(n).iter().enumerate() {
        let sign = if i % 2 == 0 { 1 } else { -1 };
        chain = chain.add(&xi_st(face, &f)?.scale(sign));
    }
    let coboundary = dlog_chain(&chain, n, deg)?;

    // expand u_j = (1 - eps_j) prod_{m<j} eps_m entrywise; every choice with
    // an exponential entry is a correction term
    let eps = coboundary_params(a, d);
    let choices: Vec<Vec<TrigUnit>> = (0..=n)
        .map(|j| {
            let mut c = vec![TrigUnit::one_minus(eps[j].clone())];
            if j >= 1 {
                c.extend(eps[1..j].iter().map(|e| TrigUnit::eps(e.clone())));
            }
            c
        })
        .collect();
    let mut corrections = KChain::default();
    for i in 0..=n {
        let sign = if i % 2 == 0 { 1 } else { -1 };
        let entries: Vec<&Vec<TrigUnit>> = choices.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c).collect();
        let mut pick = vec![0usize; n];
        loop {
            if pick.iter().any(|&p| p > 0) {
                let units = entries.iter().zip(&pick).map(|(c, &p)| c[p].clone()).collect();
                corrections.terms.push((-sign, KSymbol { units }));
            }
            let mut j = 0;
            while j < n {
                pick[j] += 1;
                if pick[j] < entries[j].len() {
                    break;
                }
                pick[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
    }
    let correction = dlog_chain(&corrections, n, deg)?;
    let pass = coboundary.coeff.compare(&correction.coeff, deg as i64)?.is_none();
    Ok(CoboundaryCheck { coboundary, correction, pass })
}
