//! Verification suites tying the pairing, cone and symbol layers together,
//! with deterministic reports for the command-line driver and the
//! acceptance tests.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::cyclotomic::{CycError, CycNum};
use crate::epscone::{adjugate_leading, shift_adjugate_table, shift_tuple, sigma_eval, ConeError, PerturbedCone};
use crate::milnor::{
    dedekind_residual, dlog_chain, dlog_unit, eta, eta_cosets, phi_st, stevens_coboundary_check, telescoping_units,
    MilnorError,
};
use crate::qlinalg::{fmt_rational, int, rat, LinalgError, QMatrix, Rational};
use crate::schwartz::{act_test, fourier, tensor, Coset, SchwartzError, TestFunction};
use crate::series::{FormalFraction, SeriesError, TopForm};
use crate::solomon_hu::{
    act_value, coset_fourier_closed_form, first_columns, phi_nsh, phi_sh, product_closed_form, PairingError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Milnor(#[from] MilnorError),
    #[error(transparent)]
    Schwartz(#[from] SchwartzError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// Lowest-degree coefficient at which two sides differ.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct FirstDiscrepancy {
    pub degree: usize,
    pub exponent: Vec<u32>,
    pub lhs: String,
    pub rhs: String,
}

/// One checked instance.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub label: String,
    pub inputs: Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<FirstDiscrepancy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CaseReport {
    fn verdict(label: &str, inputs: Value, pass: bool, detail: Option<String>) -> Self {
        CaseReport { label: label.to_string(), inputs, pass, discrepancy: None, detail }
    }

    fn failed(label: &str, inputs: Value, err: &dyn std::fmt::Display) -> Self {
        Self::verdict(label, inputs, false, Some(format!("error: {err}")))
    }
}

/// Outcome of a check or suite. The runtime is kept out of the serialized
/// form so reports are byte-identical across runs.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub inputs: Value,
    pub pass: bool,
    pub cases: Vec<CaseReport>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl VerificationReport {
    pub fn new(check: &str, inputs: Value) -> Self {
        VerificationReport { check: check.to_string(), inputs, pass: true, cases: Vec::new(), runtime: Duration::ZERO }
    }

    pub fn push(&mut self, case: CaseReport) {
        self.pass &= case.pass;
        self.cases.push(case);
    }

    pub fn extend(&mut self, cases: impl IntoIterator<Item = CaseReport>) {
        for c in cases {
            self.push(c);
        }
    }

    fn timed(mut self, start: Instant) -> Self {
        self.runtime = start.elapsed();
        self
    }

    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.pass).count()
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{}: {verdict} ({} of {} cases pass)", self.check, self.cases.len() - self.failures(), self.cases.len());
        let _ = writeln!(s, "  inputs: {}", self.inputs);
        for c in &self.cases {
            let _ = writeln!(s, "  [{}] {} {}", if c.pass { "PASS" } else { "FAIL" }, c.label, c.inputs);
            if let Some(d) = &c.discrepancy {
                let _ = writeln!(s, "    first discrepancy at degree {} exponent {:?}: lhs = {}, rhs = {}", d.degree, d.exponent, d.lhs, d.rhs);
            }
            if let Some(d) = &c.detail {
                let _ = writeln!(s, "    {d}");
            }
        }
        s
    }
}

/// Compares two fractions through `deg` and records the first difference.
pub fn compare_case(label: &str, inputs: Value, lhs: &FormalFraction, rhs: &FormalFraction, deg: usize) -> CaseReport {
    match lhs.compare(rhs, deg as i64) {
        Ok(None) => CaseReport::verdict(label, inputs, true, None),
        Ok(Some(d)) => CaseReport {
            label: label.to_string(),
            inputs,
            pass: false,
            discrepancy: Some(FirstDiscrepancy { degree: d.degree, exponent: d.exponent, lhs: d.lhs.to_string(), rhs: d.rhs.to_string() }),
            detail: None,
        },
        Err(e) => CaseReport::failed(label, inputs, &e),
    }
}

pub fn matrix_json(g: &QMatrix) -> Value {
    json!(g.rows().iter().map(|r| r.iter().map(fmt_rational).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn vec_json(v: &[Rational]) -> Value {
    json!(v.iter().map(fmt_rational).collect::<Vec<_>>())
}

/// A pairing value as `{numerator: [{exponent, coeff}], denominators}`.
pub fn fraction_json(x: &FormalFraction) -> Value {
    json!({
        "numerator": x.numerator().terms().iter().map(|(e, c)| json!({"exponent": e, "coeff": c.to_json()})).collect::<Vec<_>>(),
        "denominators": x.denominators().iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "trust": x.trust(),
    })
}

// ---------------------------------------------------------------------------
// random inputs

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer matrix with entries in `[-b, b]`, possibly singular.
fn any_matrix(rng: &mut ChaCha8Rng, n: usize, b: i64) -> QMatrix {
    let rows: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-b..=b)).collect()).collect();
    let r: Vec<&[i64]> = rows.iter().map(|x| x.as_slice()).collect();
    QMatrix::from_ints(&r)
}

pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize, b: i64) -> QMatrix {
    loop {
        let g = any_matrix(rng, n, b);
        if !g.det().is_zero() {
            return g;
        }
    }
}

/// Invertible matrices with entries in `[-3, 3]` whose first columns are
/// linearly independent.
pub fn random_tuple(rng: &mut ChaCha8Rng, n: usize) -> Vec<QMatrix> {
    loop {
        let gs: Vec<QMatrix> = (0..n).map(|_| random_invertible(rng, n, 3)).collect();
        if !first_column_det(&gs).is_zero() {
            return gs;
        }
    }
}

pub fn first_column_det(gammas: &[QMatrix]) -> Rational {
    QMatrix::from_columns(&first_columns(gammas)).map(|m| m.det()).unwrap_or_else(|_| Rational::zero())
}

/// A modulus in `{1, .., dmax}` and a base point in `[0, d)^n` whose
/// common denominator is at most 6.
pub fn random_coset(rng: &mut ChaCha8Rng, n: usize, dmax: i64) -> (Vec<Rational>, Rational) {
    let d = rng.gen_range(1..=dmax);
    (random_base(rng, n, d), int(d))
}

/// A point of `[0, d)^n` whose common denominator is at most 6.
pub fn random_base(rng: &mut ChaCha8Rng, n: usize, d: i64) -> Vec<Rational> {
    let q = rng.gen_range(1..=6i64);
    (0..n).map(|_| rat(rng.gen_range(0..q * d), q)).collect()
}

/// A product coset with independent moduli and a base point of common
/// denominator at most 6.
fn random_product_coset(rng: &mut ChaCha8Rng, n: usize) -> Coset {
    let moduli: Vec<Rational> = (0..n).map(|_| rat(rng.gen_range(1..=3), rng.gen_range(1..=2))).collect();
    let q = rng.gen_range(1..=6i64);
    let base = moduli.iter().map(|d| rat(rng.gen_range(0..6 * q), q) % d).collect();
    Coset::new(base, moduli).expect("positive moduli")
}

/// An integer combination of one or two product cosets.
fn random_function(rng: &mut ChaCha8Rng, n: usize) -> TestFunction {
    let k = rng.gen_range(1..=2);
    let terms: Vec<(CycNum, Coset)> =
        (0..k).map(|_| (CycNum::from_int([1i64, 2, -1, -2][rng.gen_range(0..4)]), random_product_coset(rng, n))).collect();
    TestFunction::from_cosets(n, &terms).expect("same dimension")
}

fn coset_json(a: &[Rational], d: &Rational) -> Value {
    json!({"base": vec_json(a), "modulus": fmt_rational(d)})
}

// ---------------------------------------------------------------------------
// main comparison

/// How the two sides of the main comparison are matched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignConvention {
    /// `dlog Phi^St(f) = (-1)^n Phi^NSh(f^) dT`.
    Literal,
    /// The same with an extra factor `sign det(first columns)`.
    DetTwisted,
}

/// Both sides of the main comparison, computed once.
pub struct MainComparison {
    pub n: usize,
    pub deg: usize,
    pub inputs: Value,
    pub lhs: TopForm,
    pub rhs: FormalFraction,
    pub det_sign: i32,
}

impl MainComparison {
    pub fn compute(gammas: &[QMatrix], f: &TestFunction, deg: usize) -> Result<Self, HarnessError> {
        let n = f.dim();
        if gammas.len() != n || gammas.iter().any(|g| g.dim() != n) {
            return Err(HarnessError::Degenerate(format!("expected {n} matrices of size {n}")));
        }
        let det = first_column_det(gammas);
        if det.is_zero() {
            return Err(HarnessError::Degenerate("first columns are linearly dependent".into()));
        }
        let inputs = json!({
            "gammas": gammas.iter().map(matrix_json).collect::<Vec<_>>(),
            "f": f.to_json(),
            "degree": deg,
        });
        let lhs = dlog_chain(&phi_st(gammas, f)?, n, deg)?;
        let rhs = phi_nsh(gammas, &fourier(f)?, deg)?;
        Ok(MainComparison { n, deg, inputs, lhs, rhs, det_sign: if det.is_positive() { 1 } else { -1 } })
    }

    pub fn case(&self, convention: SignConvention) -> CaseReport {
        let mut sign = if self.n.is_multiple_of(2) { 1 } else { -1 };
        let label = match convention {
            SignConvention::Literal => "dlog St = (-1)^n NSh(fourier)",
            SignConvention::DetTwisted => {
                sign *= self.det_sign;
                "dlog St = (-1)^n sign(det) NSh(fourier)"
            }
        };
        let mut inputs = self.inputs.clone();
        inputs["first_column_det_sign"] = json!(self.det_sign);
        compare_case(label, inputs, &self.lhs.coeff, &self.rhs.scale_rat(&int(sign as i64)), self.deg)
    }
}

/// Checks the main comparison on one input.
pub fn compare_main(gammas: &[QMatrix], f: &TestFunction, deg: usize, convention: SignConvention) -> Result<VerificationReport, HarnessError> {
    let start = Instant::now();
    let m = MainComparison::compute(gammas, f, deg)?;
    let mut r = VerificationReport::new("compare-main", m.inputs.clone());
    r.push(m.case(convention));
    Ok(r.timed(start))
}

// ---------------------------------------------------------------------------
// equivariance

/// `Phi^NSh(g gammas)(f) = Phi^NSh(gammas)(g^T . f)|_g`, and the same for
/// `Phi^Sh` with a factor `sign det g`.
pub fn cocycle_equivariance_cases(rng: &mut ChaCha8Rng, n: usize, trials: usize, deg: usize, twisted: bool) -> Vec<CaseReport> {
    let label = if twisted { "Sh equivariance (sign-twisted)" } else { "NSh equivariance" };
    (0..trials)
        .map(|_| {
            let gammas = random_tuple(rng, n);
            let g = random_invertible(rng, n, 2);
            let (a, d) = random_coset(rng, n, 3);
            let inputs = json!({
                "gammas": gammas.iter().map(matrix_json).collect::<Vec<_>>(),
                "g": matrix_json(&g),
                "f": coset_json(&a, &d),
                "degree": deg,
            });
            let run = || -> Result<(FormalFraction, FormalFraction), HarnessError> {
                let f = TestFunction::chi(&a, &d)?;
                let moved: Vec<QMatrix> = gammas.iter().map(|x| g.mul(x)).collect();
                let gf = act_test(&g.transpose(), &f)?;
                if twisted {
                    let lhs = phi_sh(&moved, &f, deg)?;
                    let rhs = act_value(&g, &phi_sh(&gammas, &gf, deg)?)?;
                    Ok((lhs, rhs.scale_rat(&int(g.sign()? as i64))))
                } else {
                    Ok((phi_nsh(&moved, &f, deg)?, act_value(&g, &phi_nsh(&gammas, &gf, deg)?)?))
                }
            };
            match run() {
                Ok((l, r)) => compare_case(label, inputs, &l, &r, deg),
                Err(e) => CaseReport::failed(label, inputs, &e),
            }
        })
        .collect()
}

fn fourier_action_sides(f: &TestFunction, g: &QMatrix, with_det: bool) -> Result<(TestFunction, TestFunction), HarnessError> {
    let lhs = fourier(&act_test(g, f)?)?;
    let mut rhs = act_test(&g.inverse()?.transpose(), &fourier(f)?)?;
    if with_det {
        rhs = rhs.scale(&CycNum::from_rational(&g.det().abs()));
    }
    Ok((lhs, rhs))
}

/// `fourier(g . f) = |det g| (g^{-T} . fourier(f))` on random inputs.
pub fn fourier_action_cases(rng: &mut ChaCha8Rng, n: usize, trials: usize) -> Vec<CaseReport> {
    (0..trials)
        .map(|_| {
            let f = random_function(rng, n);
            let g = random_invertible(rng, n, 3);
            let inputs = json!({"f": f.to_json(), "g": matrix_json(&g)});
            match fourier_action_sides(&f, &g, true) {
                Ok((l, r)) => CaseReport::verdict("fourier-action identity", inputs, l == r, None),
                Err(e) => CaseReport::failed("fourier-action identity", inputs, &e),
            }
        })
        .collect()
}

/// The fourier-action identity with the `|det g|` factor dropped must fail
/// on some instance with `|det g| != 1`.
pub fn fourier_mutation_case(rng: &mut ChaCha8Rng, n: usize, trials: usize) -> CaseReport {
    let mut detected = 0;
    let mut eligible = 0;
    for _ in 0..trials {
        let f = random_function(rng, n);
        let g = random_invertible(rng, n, 3);
        if g.det().abs().is_one() {
            continue;
        }
        eligible += 1;
        if let Ok((l, r)) = fourier_action_sides(&f, &g, false) {
            if l != r {
                detected += 1;
            }
        }
    }
    let detail = format!("corrupted identity rejected on {detected} of {eligible} instances with |det g| != 1");
    CaseReport::verdict("mutation: drop |det g| factor", json!({"n": n, "trials": trials}), eligible > 0 && detected == eligible, Some(detail))
}

/// Fourier of a product coset against
/// `(1/prod d) e(-<a, y>) chi(prod (1/d_i) Z)`, pointwise on the joint grid.
pub fn product_coset_fourier_cases(rng: &mut ChaCha8Rng, n: usize, trials: usize) -> Vec<CaseReport> {
    (0..trials)
        .map(|_| {
            let c = random_product_coset(rng, n);
            let inputs = json!({"base": vec_json(&c.base), "moduli": vec_json(&c.moduli)});
            let run = || -> Result<bool, HarnessError> {
                let fh = fourier(&TestFunction::indicator(&c)?)?;
                let (h, per, _) = fh.grid();
                // the closed form lives on prod (1/d_i) Z; scan a common period
                let mut den = BigInt::from(h);
                let mut period = fh.period();
                for d in &c.moduli {
                    den = num_integer::Integer::lcm(&den, d.numer());
                    period = crate::qlinalg::rational_lcm(&period, &d.recip());
                }
                let _ = per;
                let steps = (&period * Rational::from_integer(den.clone())).to_integer();
                let steps: i64 = crate::qlinalg::to_i64(&steps)?;
                let scale: Rational = c.moduli.iter().fold(Rational::one(), |s, d| s * d).recip();
                let mut idx = vec![0i64; n];
                loop {
                    let y: Vec<Rational> = idx.iter().map(|&k| Rational::new(BigInt::from(k), den.clone())).collect();
                    let on_lattice = y.iter().zip(&c.moduli).all(|(yi, d)| (yi * d).is_integer());
                    let expect = if on_lattice {
                        let phase: Rational = y.iter().zip(&c.base).fold(Rational::zero(), |s, (yi, ai)| s - yi * ai);
                        CycNum::root_of_unity(&phase)?.scale(&scale)
                    } else {
                        CycNum::zero()
                    };
                    if fh.eval(&y) != expect {
                        return Ok(false);
                    }
                    let mut j = 0;
                    loop {
                        if j == n {
                            return Ok(true);
                        }
                        idx[j] += 1;
                        if idx[j] < steps {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                }
            };
            match run() {
                Ok(p) => CaseReport::verdict("product-coset fourier formula", inputs, p, None),
                Err(e) => CaseReport::failed("product-coset fourier formula", inputs, &e),
            }
        })
        .collect()
}

/// The shift-tuple pairing of a tensor of one-variable Fourier images
/// factors into one-variable closed forms.
pub fn factorization_cases(rng: &mut ChaCha8Rng, n: usize, trials: usize, deg: usize) -> Vec<CaseReport> {
    (0..trials)
        .map(|_| {
            let data: Vec<(Rational, Rational)> = (0..n)
                .map(|_| {
                    let (a, d) = random_coset(rng, 1, 3);
                    (a[0].clone(), d)
                })
                .collect();
            let inputs = json!(data.iter().map(|(a, d)| coset_json(std::slice::from_ref(a), d)).collect::<Vec<_>>());
            let run = || -> Result<(FormalFraction, FormalFraction), HarnessError> {
                let fs = data.iter().map(|(a, d)| fourier(&TestFunction::chi(std::slice::from_ref(a), d)?)).collect::<Result<Vec<_>, _>>()?;
                let v = phi_nsh(&shift_tuple(n), &tensor(&fs)?, deg)?;
                Ok((v, product_closed_form(&data, deg)?))
            };
            match run() {
                Ok((l, r)) => compare_case("shift-tuple factorization", inputs, &l, &r, deg),
                Err(e) => CaseReport::failed("shift-tuple factorization", inputs, &e),
            }
        })
        .collect()
}

/// `sigma(g alphas)(w) = sign(det g) sigma(alphas)(w g^{-T})` on probe points.
pub fn cone_action_cases(rng: &mut ChaCha8Rng, n: usize, trials: usize) -> Vec<CaseReport> {
    (0..trials)
        .map(|_| {
            let alphas: Vec<QMatrix> = (0..n).map(|_| random_invertible(rng, n, 3)).collect();
            let g = random_invertible(rng, n, 3);
            let pts: Vec<Vec<Rational>> = (0..20).map(|_| (0..n).map(|_| int(rng.gen_range(-6..=6))).collect()).collect();
            let inputs = json!({"alphas": alphas.iter().map(matrix_json).collect::<Vec<_>>(), "g": matrix_json(&g)});
            let run = || -> Result<Option<String>, HarnessError> {
                let cone = match PerturbedCone::new(&alphas) {
                    Ok(c) => c,
                    Err(ConeError::Dependent) => return Ok(None),
                    Err(e) => return Err(e.into()),
                };
                let moved: Vec<QMatrix> = alphas.iter().map(|a| g.mul(a)).collect();
                let moved = PerturbedCone::new(&moved)?;
                let sg = g.sign()?;
                let git = g.inverse()?.transpose();
                for w in &pts {
                    let (l, r) = (moved.eval(w), sg * cone.eval(&git.row_mul(w)));
                    if l != r {
                        return Ok(Some(format!("at w = {}: {l} vs {r}", vec_json(w))));
                    }
                }
                Ok(None)
            };
            match run() {
                Ok(None) => CaseReport::verdict("cone action", inputs, true, None),
                Ok(Some(d)) => CaseReport::verdict("cone action", inputs, false, Some(d)),
                Err(e) => CaseReport::failed("cone action", inputs, &e),
            }
        })
        .collect()
}

/// All equivariance families on `trials` random instances each.
pub fn suite_equivariance(seed: u64, n: usize, trials: usize, deg: usize) -> VerificationReport {
    let start = Instant::now();
    let mut rng = rng(seed);
    let mut r = VerificationReport::new("suite-equivariance", json!({"seed": seed, "n": n, "trials": trials, "degree": deg}));
    r.extend(cocycle_equivariance_cases(&mut rng, n, trials, deg, false));
    r.extend(cocycle_equivariance_cases(&mut rng, n, trials, deg, true));
    r.extend(fourier_action_cases(&mut rng, n, trials));
    r.push(fourier_mutation_case(&mut rng, n, trials.max(5)));
    r.extend(factorization_cases(&mut rng, n, trials, deg));
    r.extend(cone_action_cases(&mut rng, n, trials));
    r.timed(start)
}

// ---------------------------------------------------------------------------
// cone suite

/// Coordinates from `{-2, -1, 0, 1, 3}`: every sign pattern, with interior
/// and boundary points.
pub fn orthant_probe_grid(n: usize) -> Vec<Vec<Rational>> {
    let vals = [-2i64, -1, 0, 1, 3];
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out.into_iter().flat_map(|p: Vec<Rational>| vals.iter().map(move |&v| [p.clone(), vec![int(v)]].concat())).collect();
    }
    out
}

/// The shift-tuple cone function against the open positive orthant.
pub fn orthant_case(n: usize) -> CaseReport {
    let grid = orthant_probe_grid(n);
    let inputs = json!({"n": n, "probe_points": grid.len()});
    let alphas = shift_tuple(n);
    let mut mismatch = None;
    for w in &grid {
        let expect = i32::from(w.iter().all(|x| x.is_positive()));
        match sigma_eval(&alphas, w) {
            Ok(v) if v == expect => {}
            Ok(v) => {
                mismatch = Some(format!("at w = {}: sigma = {v}, indicator = {expect}", vec_json(w)));
                break;
            }
            Err(e) => return CaseReport::failed("shift-tuple cone = orthant", inputs, &e),
        }
    }
    let pass = mismatch.is_none();
    CaseReport::verdict("shift-tuple cone = orthant", inputs, pass, mismatch)
}

/// Leading adjugate monomials of the shift-tuple perturbation matrix
/// against the closed-form table.
pub fn adjugate_case(n: usize) -> CaseReport {
    let inputs = json!({"n": n});
    match adjugate_leading(&shift_tuple(n)) {
        Ok(lead) => {
            let table = shift_adjugate_table(n);
            let mut detail = None;
            'outer: for (k, (row, trow)) in lead.iter().zip(&table).enumerate() {
                for (i, (x, t)) in row.iter().zip(trow).enumerate() {
                    if x.as_ref() != Some(t) {
                        detail = Some(format!("entry ({}, {}): {x:?} vs {t:?}", k + 1, i + 1));
                        break 'outer;
                    }
                }
            }
            CaseReport::verdict("adjugate leading terms", inputs, detail.is_none(), detail)
        }
        Err(e) => CaseReport::failed("adjugate leading terms", inputs, &e),
    }
}

/// Random points with denominators up to 7 and no zero coordinate.
fn general_points(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<Rational>> {
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let mut p = 0;
                    while p == 0 {
                        p = rng.gen_range(-40..=40i64);
                    }
                    rat(p, rng.gen_range(1..=7))
                })
                .collect()
        })
        .collect()
}

/// `w -> sum_i (-1)^i sigma(alphas without i)(w)` is constant on probes.
pub fn cocycle_constancy_cases(rng: &mut ChaCha8Rng, tuples: usize, points: usize) -> Vec<CaseReport> {
    let n = 2;
    let mut out = Vec::new();
    while out.len() < tuples {
        let alphas: Vec<QMatrix> = (0..=n).map(|_| random_invertible(rng, n, 3)).collect();
        let faces: Vec<Vec<QMatrix>> = (0..=n).map(|i| alphas.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, a)| a.clone()).collect()).collect();
        if faces.iter().any(|f| matches!(PerturbedCone::new(f), Err(ConeError::Dependent))) {
            continue;
        }
        let pts = general_points(rng, n, points);
        let inputs = json!({"alphas": alphas.iter().map(matrix_json).collect::<Vec<_>>(), "probe_points": points});
        let run = || -> Result<Vec<i32>, HarnessError> {
            pts.iter()
                .map(|w| {
                    let mut s = 0;
                    for (i, f) in faces.iter().enumerate() {
                        let v = sigma_eval(f, w)?;
                        s += if i % 2 == 0 { v } else { -v };
                    }
                    Ok(s)
                })
                .collect()
        };
        out.push(match run() {
            Ok(vals) => {
                let first = vals[0];
                let pass = vals.iter().all(|&v| v == first);
                let detail = if pass { format!("constant value {first}") } else { format!("values {vals:?}") };
                CaseReport::verdict("coboundary of cone cochain is constant", inputs, pass, Some(detail))
            }
            Err(e) => CaseReport::failed("coboundary of cone cochain is constant", inputs, &e),
        });
    }
    out
}

/// Orthant comparison, adjugate table and a coboundary constancy spot check.
pub fn suite_cone(n: usize) -> VerificationReport {
    let start = Instant::now();
    let mut r = VerificationReport::new("suite-cone", json!({"n": n}));
    r.push(orthant_case(n));
    r.push(adjugate_case(n));
    let mut rng = rng(n as u64);
    r.extend(cocycle_constancy_cases(&mut rng, 2, 50));
    r.timed(start)
}

// ---------------------------------------------------------------------------
// symbol certificates

/// Reciprocity residual of the telescoping units for `chi(a + dZ^n)`.
pub fn reciprocity_case(a: &[Rational], d: &Rational, deg: usize) -> CaseReport {
    let n = a.len();
    let inputs = json!({"coset": coset_json(a, d), "degree": deg});
    let (units, partial) = telescoping_units(a, d);
    match dedekind_residual(&units, &partial, deg) {
        Ok(res) => compare_case("reciprocity residual vanishes", inputs, &res.coeff, &FormalFraction::zero(n, deg), deg),
        Err(e) => CaseReport::failed("reciprocity residual vanishes", inputs, &e),
    }
}

pub fn suite_reciprocity(seed: u64, n: usize, trials: usize, deg: usize) -> VerificationReport {
    let start = Instant::now();
    let mut rng = rng(seed);
    let mut r = VerificationReport::new("suite-reciprocity", json!({"seed": seed, "n": n, "trials": trials, "degree": deg}));
    for _ in 0..trials {
        let (a, d) = random_coset(&mut rng, n, 2);
        r.push(reciprocity_case(&a, &d, deg));
    }
    r.timed(start)
}

/// Coboundary of the symbol cochain against its explicit correction terms.
pub fn coboundary_case(a: &[Rational], d: &Rational, deg: usize) -> CaseReport {
    let inputs = json!({"coset": coset_json(a, d), "degree": deg});
    match stevens_coboundary_check(a, d, deg) {
        Ok(c) => compare_case("coboundary equals correction", inputs, &c.coboundary.coeff, &c.correction.coeff, deg),
        Err(e) => CaseReport::failed("coboundary equals correction", inputs, &e),
    }
}

pub fn suite_coboundary(seed: u64, n: usize, trials: usize, deg: usize) -> VerificationReport {
    let start = Instant::now();
    let mut rng = rng(seed);
    let mut r = VerificationReport::new("suite-coboundary", json!({"seed": seed, "n": n, "trials": trials, "degree": deg}));
    for _ in 0..trials {
        let (a, d) = random_coset(&mut rng, n, 3);
        r.push(coboundary_case(&a, &d, deg));
    }
    r.timed(start)
}

/// `eta(chi(a + dZ))` against the `m`-fold refined presentation, as
/// logarithmic derivatives.
pub fn eta_refinement_case(a: &Rational, d: &Rational, m: i64, deg: usize) -> CaseReport {
    let inputs = json!({"coset": coset_json(std::slice::from_ref(a), d), "m": m, "degree": deg});
    let refined: Vec<(i64, Rational, Rational)> = (0..m).map(|b| (1, a + d * int(b), d * int(m))).collect();
    let run = || -> Result<(FormalFraction, FormalFraction), HarnessError> {
        let direct = eta(&TestFunction::chi(std::slice::from_ref(a), d)?)?;
        let l = dlog_unit(&direct, 1, deg)?;
        let r = dlog_unit(&eta_cosets(&refined), 1, deg)?;
        Ok((l.coeffs[0].clone(), r.coeffs[0].clone()))
    };
    match run() {
        Ok((l, r)) => compare_case("eta refinement (dlog)", inputs, &l, &r, deg),
        Err(e) => CaseReport::failed("eta refinement (dlog)", inputs, &e),
    }
}

/// Normal form of a coset against its `m`-fold refinement along one axis.
pub fn normalize_refinement_case(c: &Coset, m: i64, axis: usize) -> CaseReport {
    let n = c.base.len();
    let inputs = json!({"base": vec_json(&c.base), "moduli": vec_json(&c.moduli), "m": m, "axis": axis});
    let run = || -> Result<bool, HarnessError> {
        let direct = TestFunction::indicator(c)?;
        let terms = (0..m)
            .map(|b| {
                let mut base = c.base.clone();
                let mut moduli = c.moduli.clone();
                base[axis] = &base[axis] + &moduli[axis] * int(b);
                moduli[axis] = &moduli[axis] * int(m);
                Ok((CycNum::one(), Coset::new(base, moduli)?))
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(direct == TestFunction::from_cosets(n, &terms)?)
    };
    match run() {
        Ok(p) => CaseReport::verdict("normalize refinement", inputs, p, None),
        Err(e) => CaseReport::failed("normalize refinement", inputs, &e),
    }
}

pub fn suite_refinement(seed: u64, n: usize, trials: usize, deg: usize) -> VerificationReport {
    let start = Instant::now();
    let mut rng = rng(seed);
    let mut r = VerificationReport::new("suite-refinement", json!({"seed": seed, "n": n, "trials": trials, "degree": deg}));
    for _ in 0..trials {
        let (a, d) = random_coset(&mut rng, 1, 3);
        for m in 2..=4 {
            r.push(eta_refinement_case(&a[0], &d, m, deg));
        }
        let c = random_product_coset(&mut rng, n.max(1));
        for m in 2..=4 {
            let axis = rng.gen_range(0..n.max(1));
            r.push(normalize_refinement_case(&c, m, axis));
        }
    }
    r.timed(start)
}

/// The half-line pairing of `fourier(chi(a + dZ))` against its closed form.
pub fn closed_form_case(a: &Rational, d: &Rational, deg: usize) -> CaseReport {
    let inputs = json!({"coset": coset_json(std::slice::from_ref(a), d), "degree": deg});
    let run = || -> Result<(FormalFraction, FormalFraction), HarnessError> {
        let fh = fourier(&TestFunction::chi(std::slice::from_ref(a), d)?)?;
        Ok((phi_nsh(&[QMatrix::identity(1)], &fh, deg)?, coset_fourier_closed_form(a, d, deg)?))
    };
    match run() {
        Ok((l, r)) => compare_case("half-line closed form", inputs, &l, &r, deg),
        Err(e) => CaseReport::failed("half-line closed form", inputs, &e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epscone::shift_tuple;

    fn literal(gammas: &[QMatrix], f: &TestFunction, deg: usize) -> VerificationReport {
        compare_main(gammas, f, deg, SignConvention::Literal).unwrap()
    }

    #[test]
    fn main_comparison_on_the_half_line() {
        let f = TestFunction::chi(&[rat(1, 3)], &int(2)).unwrap();
        let r = literal(&[QMatrix::identity(1)], &f, 6);
        assert!(r.pass, "{}", r.to_text());
    }

    #[test]
    fn main_comparison_on_the_shift_tuple() {
        let f = TestFunction::chi(&[int(0), int(0)], &int(1)).unwrap();
        let r = literal(&shift_tuple(2), &f, 6);
        assert!(r.pass, "{}", r.to_text());
    }

    #[test]
    fn main_comparison_random_plane_tuples() {
        let f = TestFunction::chi(&[rat(1, 2), rat(1, 3)], &int(2)).unwrap();
        let mut g = rng(5);
        for _ in 0..4 {
            let gammas = random_tuple(&mut g, 2);
            let m = MainComparison::compute(&gammas, &f, 6).unwrap();
            assert!(m.case(SignConvention::DetTwisted).pass);
            assert_eq!(m.case(SignConvention::Literal).pass, m.det_sign > 0);
        }
    }

    #[test]
    fn degenerate_input_is_an_error() {
        let f = TestFunction::chi(&[int(0), int(0)], &int(1)).unwrap();
        let g = QMatrix::identity(2);
        assert!(matches!(compare_main(&[g.clone(), g], &f, 4, SignConvention::Literal), Err(HarnessError::Degenerate(_))));
    }

    #[test]
    fn discrepancy_is_recorded() {
        let f = TestFunction::chi(&[int(0)], &int(1)).unwrap();
        let r = literal(&[QMatrix::from_ints(&[&[-1]])], &f, 4);
        assert!(!r.pass);
        let d = r.cases[0].discrepancy.as_ref().unwrap();
        assert_eq!(d.exponent.len(), 1);
        assert_ne!(d.lhs, d.rhs);
    }

    #[test]
    fn cone_suite_in_the_plane() {
        let r = suite_cone(2);
        assert!(r.pass, "{}", r.to_text());
        assert_eq!(r.cases[0].inputs["probe_points"], 25);
    }

    #[test]
    fn equivariance_suite_is_deterministic() {
        let a = suite_equivariance(1, 1, 4, 4);
        let b = suite_equivariance(1, 1, 4, 4);
        assert!(a.pass, "{}", a.to_text());
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn dilation_equivariance() {
        let gammas = [QMatrix::identity(1)];
        let f = TestFunction::chi(&[rat(1, 2)], &int(1)).unwrap();
        let g = QMatrix::from_ints(&[&[3]]);
        let moved = [g.clone()];
        let lhs = phi_nsh(&moved, &f, 5).unwrap();
        let rhs = act_value(&g, &phi_nsh(&gammas, &act_test(&g, &f).unwrap(), 5).unwrap()).unwrap();
        assert!(compare_case("dilation", Value::Null, &lhs, &rhs, 5).pass);
    }

    #[test]
    fn mutation_is_detected() {
        assert!(fourier_mutation_case(&mut rng(3), 2, 6).pass);
    }

    #[test]
    fn small_certificate_suites() {
        for r in [suite_reciprocity(2, 2, 2, 5), suite_coboundary(2, 2, 2, 5), suite_refinement(2, 2, 2, 6)] {
            assert!(r.pass, "{}", r.to_text());
        }
    }

    #[test]
    fn closed_forms() {
        for (a, d) in [(int(0), int(1)), (rat(2, 3), int(3))] {
            assert!(closed_form_case(&a, &d, 6).pass);
        }
    }
}
