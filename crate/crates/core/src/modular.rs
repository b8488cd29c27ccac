//! Exact multi-modular evaluation of `sum_k c_k prod_j s_{id_kj}(u_j)` for
//! univariate cyclotomic power series `s_id`.
//!
//! Coefficients are cleared to integer vectors in `Z[x]/(x^N - 1)` over a
//! common denominator per degree, evaluated at every `N`-th root of unity
//! modulo primes `p = 1 mod N`, interpolated back and combined by CRT. The
//! prime count comes from an l1 bound on the integer result, so no
//! reconstruction step is heuristic.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cyclotomic::{CycError, CycNum};
use crate::series::{Layout, MultiSeries};

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

fn prime_factors(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut q = 2;
    while q * q <= m {
        if m.is_multiple_of(q) {
            out.push(q);
            while m.is_multiple_of(q) {
                m /= q;
            }
        }
        q += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// Primes `p = 1 mod n` below `2^62`, descending, with a primitive `n`-th
/// root of unity in each.
struct PrimeStream {
    n: u64,
    k: u64,
    factors: Vec<u64>,
}

impl PrimeStream {
    fn new(n: u64) -> Self {
        PrimeStream { n, k: ((1u64 << 62) - 1) / n, factors: prime_factors(n) }
    }

    fn next(&mut self) -> (u64, u64) {
        loop {
            let p = self.k * self.n + 1;
            self.k -= 1;
            if !is_prime(p) {
                continue;
            }
            for h in 2..p {
                let w = pow_mod(h, (p - 1) / self.n, p);
                if self.factors.iter().all(|q| pow_mod(w, self.n / q, p) != 1) {
                    return (p, w);
                }
            }
        }
    }
}

/// Trie of shared prefixes, built once and evaluated per root of unity.
struct Plan {
    n: usize,
    deg: usize,
    /// innermost nodes: `(series id, coefficient)` summed as univariates
    leaves: Vec<Vec<(usize, i64)>>,
    /// outer levels, innermost first: nodes as `(series id, child node)`,
    /// with `ranks[child monomial][t]` giving the parent monomial
    levels: Vec<(Vec<Vec<(usize, usize)>>, Vec<Vec<u32>>, usize)>,
    leaf_ranks: Vec<usize>,
}

impl Plan {
    fn new(entries: &BTreeMap<Vec<usize>, i64>, n: usize, deg: usize) -> Plan {
        let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut leaves: Vec<Vec<(usize, i64)>> = Vec::new();
        for (ids, c) in entries {
            let key = ids[..n - 1].to_vec();
            let next = index.len();
            let i = *index.entry(key).or_insert(next);
            if i == leaves.len() {
                leaves.push(Vec::new());
            }
            leaves[i].push((ids[n - 1], *c));
        }
        let mut keys: Vec<Vec<usize>> = vec![Vec::new(); index.len()];
        for (k, i) in index {
            keys[i] = k;
        }
        let mut levels = Vec::new();
        for k in (0..n - 1).rev() {
            let child = Layout::get(n - k - 1, deg);
            let parent = Layout::get(n - k, deg);
            let mut e = vec![0u32; n - k];
            let ranks: Vec<Vec<u32>> = (0..child.len())
                .map(|i| {
                    e[1..].copy_from_slice(child.mono(i));
                    (0..=deg)
                        .map(|t| {
                            e[0] = t as u32;
                            if child.degree_of(i) + t <= deg {
                                parent.rank(&e).expect("in range") as u32
                            } else {
                                u32::MAX
                            }
                        })
                        .collect()
                })
                .collect();
            let mut idx: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let mut nodes: Vec<Vec<(usize, usize)>> = Vec::new();
            for (ci, key) in keys.iter().enumerate() {
                let next = idx.len();
                let i = *idx.entry(key[..k].to_vec()).or_insert(next);
                if i == nodes.len() {
                    nodes.push(Vec::new());
                }
                nodes[i].push((key[k], ci));
            }
            let mut next_keys = vec![Vec::new(); idx.len()];
            for (key, i) in idx {
                next_keys[i] = key;
            }
            keys = next_keys;
            levels.push((nodes, ranks, parent.len()));
        }
        let one = Layout::get(1, deg);
        let leaf_ranks = (0..=deg).map(|t| one.rank(&[t as u32]).expect("in range")).collect();
        Plan { n, deg, leaves, levels, leaf_ranks }
    }

    /// The dense result at one evaluation point, given `vals[id][t]`.
    fn eval(&self, vals: &[Vec<u64>], coeffs: &[Vec<u64>], p: u64) -> Vec<u64> {
        let mut cur: Vec<Vec<u64>> = self
            .leaves
            .iter()
            .zip(coeffs)
            .map(|(node, cs)| {
                let mut v = vec![0u64; self.deg + 1];
                for ((id, _), &c) in node.iter().zip(cs) {
                    for (t, &x) in vals[*id].iter().enumerate() {
                        let r = self.leaf_ranks[t];
                        v[r] = (v[r] + mul_mod(c, x, p)) % p;
                    }
                }
                v
            })
            .collect();
        for (nodes, ranks, len) in &self.levels {
            cur = nodes
                .iter()
                .map(|node| {
                    let mut v = vec![0u64; *len];
                    for &(id, ci) in node {
                        let s = &vals[id];
                        for (i, &x) in cur[ci].iter().enumerate() {
                            if x == 0 {
                                continue;
                            }
                            for (t, &r) in ranks[i].iter().enumerate() {
                                if r != u32::MAX && s[t] != 0 {
                                    let r = r as usize;
                                    v[r] = (v[r] + mul_mod(s[t], x, p)) % p;
                                }
                            }
                        }
                    }
                    v
                })
                .collect();
        }
        debug_assert_eq!(cur.len(), 1);
        debug_assert_eq!(cur[0].len(), Layout::get(self.n, self.deg).len());
        cur.pop().expect("root node")
    }
}

/// `sum_ids c prod_j series[ids[j]](u_j)` through total degree `deg`.
pub fn product_sum(
    entries: &BTreeMap<Vec<usize>, i64>,
    series: &[Vec<CycNum>],
    n: usize,
    deg: usize,
) -> Result<MultiSeries, CycError> {
    let layout = Layout::get(n, deg);
    if entries.is_empty() {
        return Ok(MultiSeries::zero(n, deg));
    }
    // common conductor and per-degree denominators over the used series
    let mut used: Vec<usize> = entries.keys().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut big_n = 1u64;
    let mut dens = vec![BigInt::one(); deg + 1];
    for &id in &used {
        for (t, c) in series[id].iter().enumerate().take(deg + 1) {
            if c.is_zero() {
                continue;
            }
            let (m, _, d) = c.parts();
            big_n = big_n.lcm(&m);
            dens[t] = dens[t].lcm(d);
        }
    }
    let nn = big_n as usize;
    // sparse integer vectors modulo x^N - 1 and their l1 norms
    let mut ints: BTreeMap<usize, Vec<Vec<(usize, BigInt)>>> = BTreeMap::new();
    let mut l1_max = vec![BigInt::zero(); deg + 1];
    for &id in &used {
        let mut per_t = Vec::with_capacity(deg + 1);
        for t in 0..=deg {
            let c = &series[id][t];
            let mut v: Vec<(usize, BigInt)> = Vec::new();
            if !c.is_zero() {
                let (m, num, d) = c.parts();
                let scale = &dens[t] / d;
                let step = nn / m as usize;
                for (i, a) in num.iter().enumerate() {
                    if !a.is_zero() {
                        v.push((i * step, a * &scale));
                    }
                }
            }
            let l1: BigInt = v.iter().map(|(_, a)| a.abs()).sum();
            if l1 > l1_max[t] {
                l1_max[t] = l1;
            }
            per_t.push(v);
        }
        ints.insert(id, per_t);
    }
    let total: BigInt = entries.values().map(|c| BigInt::from(c.unsigned_abs())).sum();
    let mut bound = BigInt::zero();
    for i in 0..layout.len() {
        let b = layout.mono(i).iter().fold(total.clone(), |acc, &e| acc * &l1_max[e as usize]);
        if b > bound {
            bound = b;
        }
    }
    let need = bound * 2 + 1;

    let plan = Plan::new(entries, n, deg);
    let local: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let remap = |plan: &Plan| -> Plan {
        Plan {
            n: plan.n,
            deg: plan.deg,
            leaves: plan.leaves.iter().map(|l| l.iter().map(|&(id, c)| (local[&id], c)).collect()).collect(),
            levels: plan
                .levels
                .iter()
                .map(|(nodes, r, len)| {
                    (nodes.iter().map(|nd| nd.iter().map(|&(id, ci)| (local[&id], ci)).collect()).collect(), r.clone(), *len)
                })
                .collect(),
            leaf_ranks: plan.leaf_ranks.clone(),
        }
    };
    let plan = remap(&plan);
    let sparse: Vec<&Vec<Vec<(usize, BigInt)>>> = used.iter().map(|id| &ints[id]).collect();

    let mut modulus = BigInt::one();
    let mut acc: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); nn]; layout.len()];
    let mut primes = PrimeStream::new(big_n);
    while modulus < need {
        let (p, w) = primes.next();
        let pb = BigInt::from(p);
        let to_mod = |x: &BigInt| -> u64 { x.mod_floor(&pb).to_u64().expect("reduced") };
        let coeffs: Vec<Vec<u64>> =
            plan.leaves.iter().map(|l| l.iter().map(|&(_, c)| to_mod(&BigInt::from(c))).collect()).collect();
        let res: Vec<Vec<Vec<(usize, u64)>>> =
            sparse.iter().map(|per_t| per_t.iter().map(|v| v.iter().map(|(i, a)| (*i, to_mod(a))).collect()).collect()).collect();
        let mut pows = vec![1u64; nn];
        for j in 1..nn {
            pows[j] = mul_mod(pows[j - 1], w, p);
        }
        // values at every power of the root
        let mut evals: Vec<Vec<u64>> = Vec::with_capacity(nn);
        for k in 0..nn {
            let vals: Vec<Vec<u64>> = res
                .iter()
                .map(|per_t| {
                    per_t
                        .iter()
                        .map(|v| v.iter().fold(0u64, |s, &(i, a)| (s + mul_mod(a, pows[(i * k) % nn], p)) % p))
                        .collect()
                })
                .collect();
            evals.push(plan.eval(&vals, &coeffs, p));
        }
        // inverse transform and CRT step
        let n_inv = pow_mod(big_n % p, p - 2, p);
        let m_inv = pow_mod(to_mod(&modulus), p - 2, p);
        for (mono, slot) in acc.iter_mut().enumerate() {
            for (i, x) in slot.iter_mut().enumerate() {
                let mut s = 0u64;
                for (k, ev) in evals.iter().enumerate() {
                    let e = ev[mono];
                    if e != 0 {
                        s = (s + mul_mod(e, pows[(nn - (i * k) % nn) % nn], p)) % p;
                    }
                }
                let r = mul_mod(s, n_inv, p);
                let cur = to_mod(x);
                let delta = mul_mod((r + p - cur) % p, m_inv, p);
                if delta != 0 {
                    *x += &modulus * BigInt::from(delta);
                }
            }
        }
        modulus *= pb;
    }
    let half = &modulus >> 1;
    let mut out = Vec::with_capacity(layout.len());
    for (mono, slot) in acc.into_iter().enumerate() {
        let full: Vec<BigInt> = slot.into_iter().map(|x| if x > half { x - &modulus } else { x }).collect();
        let den = layout.mono(mono).iter().fold(BigInt::one(), |a, &e| a * &dens[e as usize]);
        out.push(CycNum::from_full(big_n, full, den)?);
    }
    Ok(MultiSeries::from_dense(layout, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::rat;
    use crate::series::one_minus_dlog_series;

    #[test]
    fn primes_and_roots() {
        for n in [1u64, 2, 12, 43, 258, 2520] {
            let mut s = PrimeStream::new(n);
            let (p, w) = s.next();
            assert!(is_prime(p) && p % n == 1 % n);
            assert_eq!(pow_mod(w, n, p), 1);
            for q in prime_factors(n) {
                assert_ne!(pow_mod(w, n / q, p), 1);
            }
        }
        assert!(!is_prime(3215031751));
        assert!(is_prime((1u64 << 61) - 1));
    }

    fn naive(entries: &BTreeMap<Vec<usize>, i64>, series: &[Vec<CycNum>], n: usize, deg: usize) -> MultiSeries {
        let mut acc = MultiSeries::zero(n, deg);
        for (ids, c) in entries {
            let mut term = MultiSeries::constant(n, deg, CycNum::from_int(*c));
            for (j, &id) in ids.iter().enumerate() {
                term = term.mul_univariate(j, &series[id]);
            }
            acc = acc.add(&term);
        }
        acc
    }

    #[test]
    fn matches_direct_products() {
        let deg = 5;
        let series: Vec<Vec<CycNum>> = [(1, 3), (2, 5), (0, 1), (1, 4), (5, 6)]
            .iter()
            .map(|&(a, b)| one_minus_dlog_series(&rat(a, b), &rat(1, b), deg).unwrap())
            .collect();
        for n in 1..=3usize {
            let mut entries = BTreeMap::new();
            let mut seed = 7u64;
            for _ in 0..12 {
                let ids: Vec<usize> = (0..n)
                    .map(|_| {
                        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (seed >> 33) as usize % series.len()
                    })
                    .collect();
                *entries.entry(ids).or_insert(0) += (seed >> 40) as i64 % 5 - 2;
            }
            assert_eq!(product_sum(&entries, &series, n, deg).unwrap(), naive(&entries, &series, n, deg));
        }
    }
}
