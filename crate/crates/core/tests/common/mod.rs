//! Brute-force reference implementations, written independently of the
//! library: string-keyed maps, explicit position loops, no sparse tricks.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use oasrank::ingest::{EndpointFragment, EndpointRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Weights = BTreeMap<String, f64>;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_bag(rng: &mut ChaCha8Rng, prefix: &str, n_tokens: usize) -> Vec<String> {
    let len = rng.random_range(0..8);
    let mut bag: Vec<String> = (0..len)
        .map(|_| format!("{prefix}{}", rng.random_range(0..n_tokens)))
        .collect();
    bag.sort();
    bag
}

/// A corpus of at most `max_endpoints` records over at most `n_tokens` token
/// types per source. Every record holds at least one token of each source so
/// that a vocabulary with `min_df = 1` always exists.
pub fn synthetic_records(rng: &mut ChaCha8Rng, max_endpoints: usize, n_tokens: usize) -> Vec<EndpointRecord> {
    let n = rng.random_range(2..=max_endpoints);
    let mut names: Vec<String> = Vec::new();
    while names.len() < n {
        let len = rng.random_range(1..7);
        let name: String = std::iter::once('/')
            .chain((0..len).map(|_| (b'a' + rng.random_range(0..4u8)) as char))
            .collect();
        if !names.contains(&name) {
            names.push(name);
        }
    }
    names.sort();
    names
        .into_iter()
        .enumerate()
        .map(|(id, name)| {
            let mut tree_tokens = random_bag(rng, "t", n_tokens);
            tree_tokens.push(format!("t{}", rng.random_range(0..n_tokens)));
            tree_tokens.sort();
            let mut keyword_tokens = random_bag(rng, "k", n_tokens);
            keyword_tokens.push(format!("k{}", rng.random_range(0..n_tokens)));
            keyword_tokens.sort();
            EndpointRecord {
                endpoint_id: id as u32,
                name,
                tree_tokens,
                keyword_tokens,
                raw_text: String::new(),
                quality: rng.random_range(0.0..=1.0),
                source_spec_ids: vec!["synthetic".into()],
                fragment: EndpointFragment::default(),
            }
        })
        .collect()
}

pub fn query_bag(rng: &mut ChaCha8Rng, prefix: &str, n_tokens: usize) -> Vec<String> {
    random_bag(rng, prefix, n_tokens)
}

pub fn doc_freq(bags: &[Vec<String>]) -> BTreeMap<String, usize> {
    let mut df = BTreeMap::new();
    for bag in bags {
        let mut seen: Vec<&String> = bag.iter().collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *df.entry(t.clone()).or_insert(0) += 1;
        }
    }
    df
}

/// `(count / in-vocab total) * ln(N / df)`, keyed by token.
pub fn oracle_tfidf(bag: &[String], df: &BTreeMap<String, usize>, n: usize) -> Weights {
    let in_vocab: Vec<&String> = bag.iter().filter(|t| df.contains_key(*t)).collect();
    let mut out = BTreeMap::new();
    for t in &in_vocab {
        let count = in_vocab.iter().filter(|u| *u == t).count() as f64;
        let w = count / in_vocab.len() as f64 * (n as f64 / df[*t] as f64).ln();
        out.insert((*t).clone(), w);
    }
    out.retain(|_, v| *v != 0.0);
    out
}

pub fn oracle_counts(bag: &[String], df: &BTreeMap<String, usize>) -> Weights {
    let mut out = BTreeMap::new();
    for t in bag.iter().filter(|t| df.contains_key(*t)) {
        *out.entry(t.clone()).or_insert(0.0) += 1.0;
    }
    out
}

/// PPMI over every ordered pair of distinct positions within each bag.
pub fn oracle_ppmi(bags: &[Vec<String>]) -> BTreeMap<(String, String), f64> {
    let mut pair: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut total = 0.0;
    for bag in bags {
        for i in 0..bag.len() {
            for j in 0..bag.len() {
                if i != j {
                    *pair.entry((bag[i].clone(), bag[j].clone())).or_insert(0.0) += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    let mut marginal: BTreeMap<String, f64> = BTreeMap::new();
    for ((a, _), c) in &pair {
        *marginal.entry(a.clone()).or_insert(0.0) += c;
    }
    pair.iter()
        .filter_map(|((a, b), c)| {
            let pmi = (c * total / (marginal[a] * marginal[b])).ln();
            (pmi > 0.0).then(|| ((a.clone(), b.clone()), pmi))
        })
        .collect()
}

pub fn oracle_dot(x: &Weights, y: &Weights) -> f64 {
    x.iter().map(|(k, v)| v * y.get(k).copied().unwrap_or(0.0)).sum()
}

pub fn oracle_cosine(x: &Weights, y: &Weights) -> f64 {
    let (nx, ny) = (oracle_dot(x, x).sqrt(), oracle_dot(y, y).sqrt());
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        oracle_dot(x, y) / (nx * ny)
    }
}

pub fn oracle_bilinear(x: &Weights, y: &Weights, q: &BTreeMap<(String, String), f64>) -> f64 {
    let mut s = 0.0;
    for (a, xa) in x {
        for (b, yb) in y {
            s += xa * yb * q.get(&(a.clone(), b.clone())).copied().unwrap_or(0.0);
        }
    }
    s
}

pub fn oracle_ppmi_cosine(x: &Weights, y: &Weights, q: &BTreeMap<(String, String), f64>) -> f64 {
    let (xx, yy) = (oracle_bilinear(x, x, q), oracle_bilinear(y, y, q));
    if xx <= 0.0 || yy <= 0.0 {
        0.0
    } else {
        oracle_bilinear(x, y, q) / (xx.sqrt() * yy.sqrt())
    }
}

pub fn oracle_levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn oracle_fuzzy(a: &str, b: &str) -> f64 {
    let m = a.chars().count().max(b.chars().count());
    if m == 0 {
        1.0
    } else {
        1.0 - oracle_levenshtein(a, b) as f64 / m as f64
    }
}

pub struct OracleQuery {
    pub name: String,
    pub tree: Vec<String>,
    pub keyword: Vec<String>,
}

/// Triple fusion with the PPMI tree kernel (capped at 1) and TF-IDF text, scored for every
/// candidate, then a plain softmax and division by the max probability.
/// Returns `(id, normalized probability, raw score)` sorted by rank.
pub fn oracle_rank(
    records: &[EndpointRecord],
    query: &OracleQuery,
    w_tree: f64,
    w_text: f64,
    w_fuzzy: f64,
    w_quality: f64,
) -> Vec<(u32, f64, f64)> {
    let n = records.len();
    let tree_bags: Vec<Vec<String>> = records.iter().map(|r| r.tree_tokens.clone()).collect();
    let kw_bags: Vec<Vec<String>> = records.iter().map(|r| r.keyword_tokens.clone()).collect();
    let (tree_df, kw_df) = (doc_freq(&tree_bags), doc_freq(&kw_bags));
    let q = oracle_ppmi(&tree_bags);
    let qx = oracle_counts(&query.tree, &tree_df);
    let qt = oracle_tfidf(&query.keyword, &kw_df, n);
    let raw: Vec<f64> = records
        .iter()
        .map(|r| {
            let tree = oracle_ppmi_cosine(&qx, &oracle_counts(&r.tree_tokens, &tree_df), &q).min(1.0);
            let text = oracle_cosine(&qt, &oracle_tfidf(&r.keyword_tokens, &kw_df, n));
            let fuzzy = oracle_fuzzy(&query.name, &r.name);
            w_tree * tree + w_text * text + w_fuzzy * fuzzy + w_quality * r.quality
        })
        .collect();
    let z: f64 = raw.iter().map(|s| s.exp()).sum();
    let p: Vec<f64> = raw.iter().map(|s| s.exp() / z).collect();
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let mut out: Vec<(u32, f64, f64)> = (0..n).map(|i| (i as u32, p[i] / pmax, raw[i])).collect();
    out.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    out
}
