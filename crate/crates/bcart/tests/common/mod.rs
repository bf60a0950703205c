//! Independent oracles shared by the integration tests and the acceptance
//! runner.  Nothing here calls the library's likelihood or tree code.

#![allow(dead_code)]

pub mod oracles;

use std::collections::HashMap;

use bcart::data_model::{CovariateSpec, Dataset, PolicyRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

/// 40 one-year records on two tied integer covariates; the count rate jumps
/// with `x1`, `x2` is noise.
pub fn toy_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..40)
        .map(|i| {
            let x1 = (i / 4) as f64;
            let x2 = rng.gen_range(0..5) as f64;
            let lambda = if x1 < 5.0 { 1.0 } else { 1.8 };
            let n = Poisson::new(lambda).unwrap().sample(&mut rng) as u32;
            PolicyRecord { x: vec![x1, x2], v: 1.0, n, s: if n > 0 { 100.0 * n as f64 } else { 0.0 } }
        })
        .collect();
    Dataset::new(vec![CovariateSpec::numeric("x1"), CovariateSpec::numeric("x2")], records).unwrap()
}

fn ln_factorial(n: u32) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `log ∫ Π Poisson(N_i | λ v_i) Gamma(λ | a, b) dλ`.
pub fn poisson_gamma_marginal(recs: &[&PolicyRecord], a: f64, b: f64) -> f64 {
    let sn: f64 = recs.iter().map(|r| r.n as f64).sum();
    let sv: f64 = recs.iter().map(|r| r.v).sum();
    let data: f64 = recs.iter().map(|r| r.n as f64 * r.v.ln() - ln_factorial(r.n)).sum();
    a * b.ln() - ln_gamma(a) + ln_gamma(a + sn) - (a + sn) * (b + sv).ln() + data
}

fn mid(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Admissible `(covariate, threshold)` rules of a node.
pub fn node_rules(recs: &[&PolicyRecord], min_leaf: usize) -> Vec<(usize, f64)> {
    let p = recs.first().map_or(0, |r| r.x.len());
    let mut out = Vec::new();
    for j in 0..p {
        let mut vals: Vec<f64> = recs.iter().map(|r| r.x[j]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = mid(w[0], w[1]);
            let left = recs.iter().filter(|r| r.x[j] <= t).count();
            if left >= min_leaf && recs.len() - left >= min_leaf {
                out.push((j, t));
            }
        }
    }
    out
}

pub struct EnumSpec {
    pub gamma: f64,
    pub rho: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub a: f64,
    pub b: f64,
}

fn enum_node(recs: &[&PolicyRecord], depth: usize, s: &EnumSpec) -> Vec<(String, f64)> {
    let rules = node_rules(recs, s.min_leaf);
    let p = if depth < s.max_depth { s.gamma * (1.0 + depth as f64).powf(-s.rho) } else { 0.0 };
    let leaf_prior = if rules.is_empty() || p == 0.0 { 0.0 } else { (1.0 - p).ln() };
    let mut out = vec![("L".to_string(), leaf_prior + poisson_gamma_marginal(recs, s.a, s.b))];
    if p == 0.0 {
        return out;
    }
    let k = rules.len() as f64;
    for (j, t) in rules {
        let (l, r): (Vec<&PolicyRecord>, Vec<&PolicyRecord>) = recs.iter().partition(|x| x.x[j] <= t);
        let (ls, rs) = (enum_node(&l, depth + 1, s), enum_node(&r, depth + 1, s));
        for (a, la) in &ls {
            for (b, lb) in &rs {
                out.push((format!("(x{j}<={t}:{a},{b})"), p.ln() - k.ln() + la + lb));
            }
        }
    }
    out
}

/// Exact posterior over every admissible tree, keyed by the same canonical
/// signature the library prints.
pub fn enumerate_posterior(ds: &Dataset, s: &EnumSpec) -> HashMap<String, f64> {
    let recs: Vec<&PolicyRecord> = ds.records.iter().collect();
    let all = enum_node(&recs, 0, s);
    let m = all.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = all.iter().map(|x| (x.1 - m).exp()).sum();
    all.into_iter().map(|(k, lp)| (k, (lp - m).exp() / z)).collect()
}

pub fn total_variation(p: &HashMap<String, f64>, q: &HashMap<String, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    0.5 * keys.into_iter().map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

/// All set partitions of `n` points as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            go(i + 1, n, max.max(b), cur, out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut cur = vec![0];
    go(1, n, 0, &mut cur, &mut out);
    out
}

/// Adjusted Rand index by counting agreeing and disagreeing point pairs.
pub fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (both * neither - only_a * only_b) / den
    }
}
