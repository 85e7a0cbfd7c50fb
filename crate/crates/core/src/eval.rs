//! Retrieval benchmarks: degrade corpus endpoints into queries and check
//! whether the original comes back.
//!
//! Three generators are provided, all deterministic in `(record, seed)`:
//!
//! - **masked**: half of the definitions, operations and responses removed,
//!   half of each remaining definition's properties and of each summary or
//!   description's tokens removed, 30% of the name's characters removed;
//! - **mangled**: the same structural removal, then half of the property names
//!   and text tokens misspelled or swapped for a lexicon synonym, and 30% of the
//!   name's characters replaced;
//! - **draft**: only operation and parameter text is kept, half of the
//!   operations and parameters are dropped, 40% of the tokens of any text longer
//!   than five tokens are masked, and only the last 30% of the name survives.
//!
//! Every "remove a fraction" rounds the number removed down.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::draft::QueryDraft;
use crate::index::CorpusIndex;
use crate::ingest::{EndpointRecord, HttpMethod};
use crate::rank::{check_compatible, rank_with_features, FusionConfig, QueryFeatures, RankError};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];
const DEFAULT_LEXICON: &str = include_str!("../resources/lexicon.tsv");
/// Texts with more tokens than this get masked in draft queries.
const DRAFT_MIN_TOKENS: usize = 5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("reading lexicon: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon line {0}: expected word<TAB>synonym")]
    Lexicon(usize),
}

/// Word -> replacement used by the mangled generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, String>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (w, s) = line.split_once('\t').ok_or(EvalError::Lexicon(i + 1))?;
            entries.insert(w.trim().to_lowercase(), s.trim().to_owned());
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.entries.get(&word.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The small lexicon shipped with the crate.
pub fn bundled_lexicon() -> &'static Lexicon {
    static BUNDLED: std::sync::OnceLock<Lexicon> = std::sync::OnceLock::new();
    BUNDLED.get_or_init(|| Lexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon"))
}

/// Fractions used by the generators. [`DegradeRates::ZERO`] leaves a query
/// unmodified, which turns a benchmark into a self-retrieval check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradeRates {
    /// Definitions, operations, responses (and draft parameters).
    pub structure: f64,
    pub properties: f64,
    pub tokens: f64,
    pub name: f64,
    /// Token fraction masked in long draft texts.
    pub draft_tokens: f64,
}

impl DegradeRates {
    pub const PAPER: DegradeRates = DegradeRates {
        structure: 0.5,
        properties: 0.5,
        tokens: 0.5,
        name: 0.3,
        draft_tokens: 0.4,
    };
    pub const ZERO: DegradeRates = DegradeRates {
        structure: 0.0,
        properties: 0.0,
        tokens: 0.0,
        name: 0.0,
        draft_tokens: 0.0,
    };
}

impl Default for DegradeRates {
    fn default() -> Self {
        Self::PAPER
    }
}

/// `floor(n * rate)`, robust to representation error in `rate`.
pub fn fraction_of(n: usize, rate: f64) -> usize {
    ((n as f64 * rate) + 1e-9).floor() as usize
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Indices to drop: `fraction_of(n, rate)` of `0..n`, chosen uniformly.
fn pick(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<usize> {
    let k = fraction_of(n, rate).min(n);
    let mut out = sample(rng, n, k).into_vec();
    out.sort_unstable();
    out
}

fn random_letter(rng: &mut ChaCha8Rng, not: char) -> char {
    loop {
        let c = (b'a' + rng.random_range(0..26u8)) as char;
        if c != not {
            return c;
        }
    }
}

/// Replaces one random character with a different random lowercase letter.
pub fn misspell(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return String::new();
    }
    let i = rng.random_range(0..chars.len());
    chars[i] = random_letter(rng, chars[i]);
    chars.into_iter().collect()
}

fn remove_keys(map: &mut Map<String, Value>, keys: &[String], rng: &mut ChaCha8Rng, rate: f64) {
    for i in pick(rng, keys.len(), rate) {
        map.remove(&keys[i]);
    }
}

fn method_keys(item: &Map<String, Value>) -> Vec<String> {
    item.keys()
        .filter(|k| HttpMethod::parse(k).is_some())
        .cloned()
        .collect()
}

fn drop_tokens(text: &str, rng: &mut ChaCha8Rng, rate: f64) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let gone = pick(rng, tokens.len(), rate);
    tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| gone.binary_search(i).is_err())
        .map(|(_, t)| *t)
        .collect::<Vec<_>>()
        .join(" ")
}

fn remove_chars(name: &str, rng: &mut ChaCha8Rng, rate: f64) -> String {
    let chars: Vec<char> = name.chars().collect();
    let gone = pick(rng, chars.len(), rate);
    chars
        .iter()
        .enumerate()
        .filter(|(i, _)| gone.binary_search(i).is_err())
        .map(|(_, c)| *c)
        .collect()
}

fn replace_chars(name: &str, rng: &mut ChaCha8Rng, rate: f64) -> String {
    let mut chars: Vec<char> = name.chars().collect();
    for i in pick(rng, chars.len(), rate) {
        chars[i] = random_letter(rng, chars[i]);
    }
    chars.into_iter().collect()
}

fn replace_word(word: &str, rng: &mut ChaCha8Rng, lexicon: &Lexicon) -> String {
    let use_synonym = rng.random_bool(0.5);
    match lexicon.get(word) {
        Some(syn) if use_synonym => syn.to_owned(),
        _ => misspell(word, rng),
    }
}

fn mangle_tokens(text: &str, rng: &mut ChaCha8Rng, rate: f64, lexicon: &Lexicon) -> String {
    let mut tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
    for i in pick(rng, tokens.len(), rate) {
        tokens[i] = replace_word(&tokens[i], rng, lexicon);
    }
    tokens.join(" ")
}

/// Applies `f` to the summary and description of every operation in `item`.
fn map_operation_text(
    item: &mut Map<String, Value>,
    rng: &mut ChaCha8Rng,
    mut f: impl FnMut(&str, &mut ChaCha8Rng) -> String,
) {
    for key in method_keys(item) {
        if let Some(Value::Object(op)) = item.get_mut(&key) {
            for field in ["summary", "description"] {
                if let Some(Value::String(s)) = op.get_mut(field) {
                    *s = f(s, rng);
                }
            }
        }
    }
}

/// Removes operations, their responses and definitions. An endpoint always
/// keeps at least one operation since `floor(n/2) < n`.
fn remove_structure(
    item: &mut Map<String, Value>,
    defs: &mut BTreeMap<String, Value>,
    rng: &mut ChaCha8Rng,
    rate: f64,
) {
    let methods = method_keys(item);
    remove_keys(item, &methods, rng, rate);
    for key in method_keys(item) {
        if let Some(Value::Object(responses)) = item
            .get_mut(&key)
            .and_then(|op| op.as_object_mut())
            .and_then(|op| op.get_mut("responses"))
        {
            let codes: Vec<String> = responses.keys().cloned().collect();
            remove_keys(responses, &codes, rng, rate);
        }
    }
    let names: Vec<String> = defs.keys().cloned().collect();
    for i in pick(rng, names.len(), rate) {
        defs.remove(&names[i]);
    }
}

fn properties_of(schema: &mut Value) -> Option<&mut Map<String, Value>> {
    schema.get_mut("properties").and_then(Value::as_object_mut)
}

fn start(record: &EndpointRecord, seed: u64) -> (Map<String, Value>, BTreeMap<String, Value>, ChaCha8Rng) {
    let item = record.fragment.path_item.as_object().cloned().unwrap_or_default();
    (item, record.fragment.definitions.clone(), rng_for(seed))
}

fn finish(
    record: &EndpointRecord,
    name: String,
    item: Map<String, Value>,
    definitions: BTreeMap<String, Value>,
    seed: u64,
) -> QueryDraft {
    QueryDraft {
        endpoint_name: name,
        path_item: Value::Object(item),
        definitions,
        origin_id: Some(record.endpoint_id),
        seed: Some(seed),
        dense: None,
    }
}

pub fn make_masked_query(record: &EndpointRecord, seed: u64) -> QueryDraft {
    make_masked_query_with(record, seed, &DegradeRates::PAPER)
}

pub fn make_masked_query_with(record: &EndpointRecord, seed: u64, rates: &DegradeRates) -> QueryDraft {
    let (mut item, mut defs, mut rng) = start(record, seed);
    remove_structure(&mut item, &mut defs, &mut rng, rates.structure);
    for schema in defs.values_mut() {
        if let Some(props) = properties_of(schema) {
            let keys: Vec<String> = props.keys().cloned().collect();
            remove_keys(props, &keys, &mut rng, rates.properties);
        }
    }
    map_operation_text(&mut item, &mut rng, |s, rng| drop_tokens(s, rng, rates.tokens));
    let name = remove_chars(&record.name, &mut rng, rates.name);
    finish(record, name, item, defs, seed)
}

pub fn make_mangled_query(record: &EndpointRecord, seed: u64, lexicon: &Lexicon) -> QueryDraft {
    make_mangled_query_with(record, seed, lexicon, &DegradeRates::PAPER)
}

pub fn make_mangled_query_with(
    record: &EndpointRecord,
    seed: u64,
    lexicon: &Lexicon,
    rates: &DegradeRates,
) -> QueryDraft {
    let (mut item, mut defs, mut rng) = start(record, seed);
    remove_structure(&mut item, &mut defs, &mut rng, rates.structure);
    for schema in defs.values_mut() {
        if let Some(props) = properties_of(schema) {
            let keys: Vec<String> = props.keys().cloned().collect();
            for i in pick(&mut rng, keys.len(), rates.properties) {
                let renamed = replace_word(&keys[i], &mut rng, lexicon);
                if let Some(v) = props.remove(&keys[i]) {
                    props.insert(renamed, v);
                }
            }
        }
    }
    map_operation_text(&mut item, &mut rng, |s, rng| {
        mangle_tokens(s, rng, rates.tokens, lexicon)
    });
    let name = replace_chars(&record.name, &mut rng, rates.name);
    finish(record, name, item, defs, seed)
}

pub fn make_draft_query(record: &EndpointRecord, seed: u64) -> QueryDraft {
    make_draft_query_with(record, seed, &DegradeRates::PAPER)
}

/// Keeps the last `max(1, floor(30%))` characters of a nonempty name.
fn name_tail(name: &str, rate: f64) -> String {
    let chars: Vec<char> = name.chars().collect();
    if rate == 0.0 {
        return name.to_owned();
    }
    let keep = fraction_of(chars.len(), rate).max(1).min(chars.len());
    chars[chars.len() - keep..].iter().collect()
}

pub fn make_draft_query_with(record: &EndpointRecord, seed: u64, rates: &DegradeRates) -> QueryDraft {
    let (source, _, mut rng) = start(record, seed);
    let mask = |text: &str, rng: &mut ChaCha8Rng| {
        if text.split_whitespace().count() > DRAFT_MIN_TOKENS {
            drop_tokens(text, rng, rates.draft_tokens)
        } else {
            text.to_owned()
        }
    };
    let mut methods = method_keys(&source);
    for i in pick(&mut rng, methods.len(), rates.structure).into_iter().rev() {
        methods.remove(i);
    }
    let mut item = Map::new();
    for m in methods {
        let Some(op) = source[&m].as_object() else { continue };
        let mut out = Map::new();
        for field in ["summary", "description"] {
            if let Some(s) = op.get(field).and_then(Value::as_str) {
                out.insert(field.into(), Value::String(mask(s, &mut rng)));
            }
        }
        let params: Vec<&Value> = op
            .get("parameters")
            .and_then(Value::as_array)
            .map(|a| a.iter().collect())
            .unwrap_or_default();
        let gone = pick(&mut rng, params.len(), rates.structure);
        let mut kept = Vec::new();
        for (i, p) in params.into_iter().enumerate() {
            if gone.binary_search(&i).is_ok() {
                continue;
            }
            let mut q = Map::new();
            if let Some(name) = p.get("name").and_then(Value::as_str) {
                q.insert("name".into(), Value::String(name.to_owned()));
            }
            if let Some(d) = p.get("description").and_then(Value::as_str) {
                q.insert("description".into(), Value::String(mask(d, &mut rng)));
            }
            kept.push(Value::Object(q));
        }
        if !kept.is_empty() {
            out.insert("parameters".into(), Value::Array(kept));
        }
        item.insert(m, Value::Object(out));
    }
    let name = name_tail(&record.name, rates.name);
    finish(record, name, item, BTreeMap::new(), seed)
}

/// Fraction of runs whose origin is among the first `k` ranked ids.
pub fn recall_at_k(runs: &[(u32, Vec<u32>)], k: usize) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    let hits = runs
        .iter()
        .filter(|(origin, ranked)| ranked.iter().take(k).any(|id| id == origin))
        .count();
    hits as f64 / runs.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub recall_at: BTreeMap<usize, f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub queries: usize,
}

/// One `(recommended, useful)` judgement per pooled item.
pub fn precision_recall_f1(judged: &[(bool, bool)]) -> EvalMetrics {
    let count = |f: fn(&(bool, bool)) -> bool| judged.iter().filter(|j| f(j)).count() as f64;
    let tp = count(|&(r, u)| r && u);
    let fp = count(|&(r, u)| r && !u);
    let fn_ = count(|&(r, u)| !r && u);
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    EvalMetrics {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Masked,
    Mangled,
    Draft,
}

impl std::str::FromStr for QueryMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "masked" => Ok(QueryMode::Masked),
            "mangled" => Ok(QueryMode::Mangled),
            "draft" => Ok(QueryMode::Draft),
            _ => Err(format!("unknown mode {s:?} (masked, mangled, draft)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig<'a> {
    pub n_queries: usize,
    pub mode: QueryMode,
    pub seed: u64,
    pub rates: DegradeRates,
    pub lexicon: &'a Lexicon,
    pub ks: Vec<usize>,
}

impl Default for BenchmarkConfig<'_> {
    fn default() -> Self {
        BenchmarkConfig {
            n_queries: 1000,
            mode: QueryMode::Masked,
            seed: 0,
            rates: DegradeRates::PAPER,
            lexicon: bundled_lexicon(),
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    pub query_id: usize,
    pub origin_id: u32,
    pub seed: u64,
    /// 1-based rank of the origin, if it made the logged top list.
    pub origin_rank: Option<usize>,
    pub top: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub mode: QueryMode,
    pub seed: u64,
    pub metrics: EvalMetrics,
    pub log: Vec<QueryLog>,
}

impl BenchmarkReport {
    /// Per-query JSON lines followed by a summary line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for entry in &self.log {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n")?;
        }
        let summary = serde_json::json!({"summary": {
            "mode": self.mode, "seed": self.seed, "metrics": self.metrics
        }});
        serde_json::to_writer(&mut w, &summary)?;
        w.write_all(b"\n")
    }
}

pub fn make_query(record: &EndpointRecord, seed: u64, config: &BenchmarkConfig<'_>) -> QueryDraft {
    match config.mode {
        QueryMode::Masked => make_masked_query_with(record, seed, &config.rates),
        QueryMode::Mangled => make_mangled_query_with(record, seed, config.lexicon, &config.rates),
        QueryMode::Draft => make_draft_query_with(record, seed, &config.rates),
    }
}

/// Samples endpoints without replacement, degrades each into a query and
/// records where the original lands. Reproducible from `config.seed`.
pub fn run_retrieval_benchmark(
    index: &CorpusIndex,
    fusion: &FusionConfig,
    config: &BenchmarkConfig<'_>,
) -> Result<BenchmarkReport, EvalError> {
    check_compatible(index, fusion)?;
    let mut rng = rng_for(config.seed);
    let n = config.n_queries.min(index.len());
    let origins = sample(&mut rng, index.len(), n).into_vec();
    let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    let top_k = config.ks.iter().copied().max().unwrap_or(1);
    let log: Vec<QueryLog> = origins
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(qid, (&origin, &seed))| {
            let record = &index.records[origin];
            let draft = make_query(record, seed, config);
            let features = QueryFeatures::new(&draft, index, fusion);
            let ranked = rank_with_features(&features, index, fusion, top_k);
            QueryLog {
                query_id: qid,
                origin_id: record.endpoint_id,
                seed,
                origin_rank: ranked
                    .iter()
                    .position(|r| r.endpoint_id == record.endpoint_id)
                    .map(|p| p + 1),
                top: ranked
                    .iter()
                    .map(|r| (r.endpoint_id, r.normalized_probability))
                    .collect(),
            }
        })
        .collect();
    let runs: Vec<(u32, Vec<u32>)> = log
        .iter()
        .map(|l| (l.origin_id, l.top.iter().map(|t| t.0).collect()))
        .collect();
    let metrics = EvalMetrics {
        recall_at: config.ks.iter().map(|&k| (k, recall_at_k(&runs, k))).collect(),
        queries: n,
        ..Default::default()
    };
    Ok(BenchmarkReport {
        mode: config.mode,
        seed: config.seed,
        metrics,
        log,
    })
}
