//! Building, persisting and loading the immutable corpus index.
//!
//! An index is a directory:
//!
//! | file | contents |
//! |------|----------|
//! | `manifest.json` | format version, build settings, ingest report, stats, SHA-256 of every other file |
//! | `records.jsonl` | one [`EndpointRecord`] per line, in id order |
//! | `tree_vocab.tsv`, `keyword_vocab.tsv` | `token<TAB>doc_freq`, in index order |
//! | `stopwords.txt`, `lemma_rules.txt` | the text resources the featurizer was built from |
//! | `*.bin` | sparse matrices (see below) |
//!
//! Matrix blobs are little-endian: the magic `OASM`, a `u32` blob version, `u64`
//! rows, cols and nnz, then `nnz` coordinate triples `(u32 row, u32 col, f64 value)`
//! in row-major order. Nothing in the directory depends on the build machine,
//! time or path, so indexing the same corpus twice yields identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::enrich::{
    enrich_vector, fit_cca, load_dense_embeddings, truncated_svd, CcaProjection, EnrichError,
    TruncatedSvd, CCA_RIDGE, SVD_VARIANCE_TARGET,
};
use crate::featurize::{
    build_vocabulary, FeaturizeError, Featurizer, TokenSource, Vocabulary, KEYWORD_MIN_DF,
    TREE_MIN_DF,
};
use crate::ingest::{
    build_definitions_dict, extract_endpoint_trees, load_corpus_documents, CorpusAccumulator,
    EndpointRecord, IngestReport,
};
use crate::quality::{score_spec, QualityRubric, RubricError};
use crate::text::{RuleLemmatizer, RuleParseError, StopWords};
use crate::vectorize::{build_ppmi, count_vector, tfidf_vector, PpmiMatrix, SparseVector};

pub const FORMAT_VERSION: u32 = 1;
const BLOB_MAGIC: &[u8; 4] = b"OASM";
const BLOB_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 * 3;
const TRIPLE_LEN: usize = 4 + 4 + 8;

const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords.txt");
const DEFAULT_LEMMA_RULES: &str = include_str!("../resources/lemma_rules.txt");

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no valid Swagger 2.0 documents under {0}")]
    NoValidSpecs(PathBuf),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
    #[error("lemma rules: {0}")]
    LemmaRules(#[from] RuleParseError),
    #[error("index format version {found} is not supported (this build reads {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("invalid records: {0}")]
    InvalidRecords(String),
}

fn corrupt(msg: impl Into<String>) -> IndexError {
    IndexError::CorruptIndex(msg.into())
}

/// Everything that controls how a corpus is turned into an index.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub tree_min_df: u32,
    pub keyword_min_df: u32,
    pub rubric: QualityRubric,
    /// Sidecar of dense text embeddings; enables the enriched text features.
    pub embeddings: Option<PathBuf>,
    pub svd_variance_target: f64,
    pub cca_ridge: f64,
    pub stopwords: String,
    pub lemma_rules: String,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            tree_min_df: TREE_MIN_DF,
            keyword_min_df: KEYWORD_MIN_DF,
            rubric: QualityRubric::default(),
            embeddings: None,
            svd_variance_target: SVD_VARIANCE_TARGET,
            cca_ridge: CCA_RIDGE,
            stopwords: DEFAULT_STOPWORDS.to_owned(),
            lemma_rules: DEFAULT_LEMMA_RULES.to_owned(),
        }
    }
}

impl BuildConfig {
    /// Same as the default but with both document-frequency floors set to `min_df`.
    pub fn with_min_df(min_df: u32) -> Self {
        BuildConfig {
            tree_min_df: min_df,
            keyword_min_df: min_df,
            ..Default::default()
        }
    }

    fn settings(&self) -> IndexSettings {
        IndexSettings {
            tree_min_df: self.tree_min_df,
            keyword_min_df: self.keyword_min_df,
            rubric: self.rubric.clone(),
            svd_variance_target: self.svd_variance_target,
            cca_ridge: self.cca_ridge,
        }
    }
}

/// The persisted part of [`BuildConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSettings {
    pub tree_min_df: u32,
    pub keyword_min_df: u32,
    pub rubric: QualityRubric,
    pub svd_variance_target: f64,
    pub cca_ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub format_version: u32,
    pub endpoints: usize,
    pub tree_vocab: usize,
    pub keyword_vocab: usize,
    pub ppmi_tree_nnz: usize,
    pub ppmi_keyword_nnz: usize,
    pub enriched_endpoints: usize,
    pub files_seen: usize,
    pub files_parsed: usize,
    pub files_skipped: usize,
    pub mean_quality: f64,
    pub min_quality: f64,
}

/// Dense-embedding side of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct Enrichment {
    pub svd: TruncatedSvd,
    pub cca: CcaProjection,
    /// Raw sidecar vectors by endpoint id.
    pub dense: BTreeMap<u32, Vec<f64>>,
    /// `concat(u'^T x, v'^T y)` by endpoint id.
    pub enriched: BTreeMap<u32, Vec<f64>>,
}

impl Enrichment {
    pub fn dense_dim(&self) -> usize {
        self.cca.u_proj.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct CorpusIndex {
    pub format_version: u32,
    pub settings: IndexSettings,
    pub report: IngestReport,
    pub records: Vec<EndpointRecord>,
    pub tree_vocab: Vocabulary,
    pub keyword_vocab: Vocabulary,
    pub tree_counts: Vec<SparseVector>,
    pub tree_tfidf: Vec<SparseVector>,
    pub keyword_counts: Vec<SparseVector>,
    pub keyword_tfidf: Vec<SparseVector>,
    pub ppmi_tree: PpmiMatrix,
    pub ppmi_keyword: PpmiMatrix,
    pub enrichment: Option<Enrichment>,
    /// `x^T Q x` of each endpoint's count vector, for the PPMI kernels.
    pub tree_self: Vec<f64>,
    pub keyword_self: Vec<f64>,
    stopwords: String,
    lemma_rules: String,
    featurizer: Featurizer,
}

impl PartialEq for CorpusIndex {
    fn eq(&self, other: &Self) -> bool {
        // The featurizer is a pure function of the two resource texts.
        self.format_version == other.format_version
            && self.settings == other.settings
            && self.report == other.report
            && self.records == other.records
            && self.tree_vocab == other.tree_vocab
            && self.keyword_vocab == other.keyword_vocab
            && self.tree_counts == other.tree_counts
            && self.tree_tfidf == other.tree_tfidf
            && self.keyword_counts == other.keyword_counts
            && self.keyword_tfidf == other.keyword_tfidf
            && self.ppmi_tree == other.ppmi_tree
            && self.ppmi_keyword == other.ppmi_keyword
            && self.enrichment == other.enrichment
            && self.tree_self == other.tree_self
            && self.keyword_self == other.keyword_self
            && self.stopwords == other.stopwords
            && self.lemma_rules == other.lemma_rules
    }
}

fn make_featurizer(stopwords: &str, lemma_rules: &str) -> Result<Featurizer, IndexError> {
    Ok(Featurizer::new(
        Arc::new(RuleLemmatizer::parse(lemma_rules)?),
        StopWords::parse(stopwords),
    ))
}

fn self_products(vectors: &[SparseVector], q: &PpmiMatrix) -> Vec<f64> {
    vectors.par_iter().map(|x| q.bilinear(x, x)).collect()
}

impl CorpusIndex {
    /// Vectorizes already-ingested records. Ids must be `0..n` in order.
    pub fn from_records(
        records: Vec<EndpointRecord>,
        config: &BuildConfig,
        report: IngestReport,
    ) -> Result<CorpusIndex, IndexError> {
        if let Some((pos, r)) = records
            .iter()
            .enumerate()
            .find(|(i, r)| r.endpoint_id as usize != *i)
        {
            return Err(IndexError::InvalidRecords(format!(
                "record {pos} has id {}",
                r.endpoint_id
            )));
        }
        let featurizer = make_featurizer(&config.stopwords, &config.lemma_rules)?;
        let tree_vocab = build_vocabulary(&records, TokenSource::Tree, config.tree_min_df)?;
        let keyword_vocab =
            build_vocabulary(&records, TokenSource::Keyword, config.keyword_min_df)?;
        let n = records.len();
        let vectors = |vocab: &Vocabulary, bag: fn(&EndpointRecord) -> &[String]| {
            let counts: Vec<SparseVector> = records
                .par_iter()
                .map(|r| count_vector(bag(r), vocab))
                .collect();
            let tfidf: Vec<SparseVector> = records
                .par_iter()
                .map(|r| tfidf_vector(bag(r), vocab, n))
                .collect();
            (counts, tfidf)
        };
        let (tree_counts, tree_tfidf) = vectors(&tree_vocab, |r| &r.tree_tokens);
        let (keyword_counts, keyword_tfidf) = vectors(&keyword_vocab, |r| &r.keyword_tokens);
        let ppmi_tree = build_ppmi(records.iter().map(|r| r.tree_tokens.as_slice()), &tree_vocab);
        let ppmi_keyword = build_ppmi(
            records.iter().map(|r| r.keyword_tokens.as_slice()),
            &keyword_vocab,
        );
        Ok(CorpusIndex {
            format_version: FORMAT_VERSION,
            settings: config.settings(),
            report,
            tree_self: self_products(&tree_counts, &ppmi_tree),
            keyword_self: self_products(&keyword_counts, &ppmi_keyword),
            records,
            tree_vocab,
            keyword_vocab,
            tree_counts,
            tree_tfidf,
            keyword_counts,
            keyword_tfidf,
            ppmi_tree,
            ppmi_keyword,
            enrichment: None,
            stopwords: config.stopwords.clone(),
            lemma_rules: config.lemma_rules.clone(),
            featurizer,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The featurizer the index was built with; queries must use the same one.
    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn record(&self, id: u32) -> Option<&EndpointRecord> {
        self.records.get(id as usize)
    }

    /// Ids follow name order, so lookup is a binary search.
    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.records
            .binary_search_by(|r| r.name.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub fn stats(&self) -> IndexStats {
        let q: Vec<f64> = self.records.iter().map(|r| r.quality).collect();
        IndexStats {
            format_version: self.format_version,
            endpoints: self.len(),
            tree_vocab: self.tree_vocab.len(),
            keyword_vocab: self.keyword_vocab.len(),
            ppmi_tree_nnz: self.ppmi_tree.nnz(),
            ppmi_keyword_nnz: self.ppmi_keyword.nnz(),
            enriched_endpoints: self.enrichment.as_ref().map_or(0, |e| e.enriched.len()),
            files_seen: self.report.files_seen,
            files_parsed: self.report.files_parsed,
            files_skipped: self.report.skipped.len(),
            mean_quality: if q.is_empty() {
                0.0
            } else {
                q.iter().sum::<f64>() / q.len() as f64
            },
            min_quality: q.iter().copied().fold(f64::INFINITY, f64::min).min(1.0),
        }
    }

    /// Fits the SVD + CCA projections from dense embeddings keyed by id.
    pub fn attach_embeddings(&mut self, dense: BTreeMap<u32, Vec<f64>>) -> Result<(), IndexError> {
        let (n, v) = (self.len(), self.keyword_vocab.len());
        let mut m = DMatrix::zeros(n, v);
        for (r, x) in self.keyword_tfidf.iter().enumerate() {
            for (c, val) in x.iter() {
                m[(r, c as usize)] = val;
            }
        }
        let svd = truncated_svd(&m, self.settings.svd_variance_target)?;
        let ids: Vec<u32> = dense.keys().copied().collect();
        let dim = dense.values().next().map_or(0, Vec::len);
        let x = DMatrix::from_fn(ids.len(), dim, |r, c| dense[&ids[r]][c]);
        let y_all = svd.transform(&m);
        let y = DMatrix::from_fn(ids.len(), svd.k(), |r, c| y_all[(ids[r] as usize, c)]);
        let cca = fit_cca(&x, &y, None, self.settings.cca_ridge)?;
        let enriched = ids
            .iter()
            .enumerate()
            .map(|(r, &id)| {
                let yr: Vec<f64> = y.row(r).iter().copied().collect();
                (id, enrich_vector(&dense[&id], &yr, &cca))
            })
            .collect();
        self.enrichment = Some(Enrichment {
            svd,
            cca,
            dense,
            enriched,
        });
        Ok(())
    }
}

/// ingest -> quality -> featurize -> vectorize (-> enrich).
pub fn build_index(corpus_dir: &Path, config: &BuildConfig) -> Result<CorpusIndex, IndexError> {
    config.rubric.validate()?;
    let featurizer = make_featurizer(&config.stopwords, &config.lemma_rules)?;
    let (docs, mut report) = load_corpus_documents(corpus_dir)?;
    if docs.is_empty() {
        return Err(IndexError::NoValidSpecs(corpus_dir.to_path_buf()));
    }
    let scored: Vec<_> = docs
        .par_iter()
        .map(|doc| {
            let defs = build_definitions_dict(doc);
            (score_spec(doc, &config.rubric), extract_endpoint_trees(doc, &defs))
        })
        .collect();
    let mut acc = CorpusAccumulator::new();
    for (doc, (quality, trees)) in docs.iter().zip(&scored) {
        for tree in trees {
            acc.merge(tree, doc, *quality, &featurizer);
        }
    }
    if acc.is_empty() {
        return Err(IndexError::NoValidSpecs(corpus_dir.to_path_buf()));
    }
    let records = acc.into_records();
    report.endpoints = records.len();
    let mut index = CorpusIndex::from_records(records, config, report)?;
    if let Some(path) = &config.embeddings {
        let file = BufReader::new(fs::File::open(path)?);
        let dense = load_dense_embeddings(file, |name| index.id_of(name))?;
        let dense = dense.into_iter().map(|(k, v)| (k, v.vector)).collect();
        index.attach_embeddings(dense)?;
    }
    log::info!(
        "indexed {} endpoints from {} of {} files",
        index.len(),
        index.report.files_parsed,
        index.report.files_seen
    );
    Ok(index)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    settings: IndexSettings,
    report: IngestReport,
    stats: IndexStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    enrichment: Option<EnrichmentMeta>,
    /// File name -> lowercase hex SHA-256.
    files: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnrichmentMeta {
    singular_values: Vec<f64>,
    explained_variance_ratio: f64,
    correlations: Vec<f64>,
    ids: Vec<u32>,
}

/// Triples in row-major order with a shape header.
pub fn encode_blob(rows: usize, cols: usize, triples: &[(u32, u32, f64)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + triples.len() * TRIPLE_LEN);
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    for n in [rows, cols, triples.len()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &(r, c, v) in triples {
        out.extend_from_slice(&r.to_le_bytes());
        out.extend_from_slice(&c.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub type Blob = (usize, usize, Vec<(u32, u32, f64)>);

pub fn decode_blob(bytes: &[u8]) -> Result<Blob, IndexError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != BLOB_MAGIC {
        return Err(corrupt("bad blob header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
    if u32_at(4) != BLOB_VERSION {
        return Err(corrupt(format!("unknown blob version {}", u32_at(4))));
    }
    let (rows, cols, nnz) = (u64_at(8), u64_at(16), u64_at(24));
    if bytes.len() != HEADER_LEN + nnz.saturating_mul(TRIPLE_LEN) {
        return Err(corrupt("blob length does not match its header"));
    }
    let triples = bytes[HEADER_LEN..]
        .chunks_exact(TRIPLE_LEN)
        .map(|t| {
            (
                u32::from_le_bytes(t[0..4].try_into().unwrap()),
                u32::from_le_bytes(t[4..8].try_into().unwrap()),
                f64::from_le_bytes(t[8..16].try_into().unwrap()),
            )
        })
        .collect::<Vec<_>>();
    if triples
        .iter()
        .any(|&(r, c, _)| r as usize >= rows || c as usize >= cols)
    {
        return Err(corrupt("blob entry out of range"));
    }
    Ok((rows, cols, triples))
}

fn rows_blob(rows: &[SparseVector], cols: usize) -> Vec<u8> {
    let triples: Vec<_> = rows
        .iter()
        .enumerate()
        .flat_map(|(r, v)| v.iter().map(move |(c, x)| (r as u32, c, x)))
        .collect();
    encode_blob(rows.len(), cols, &triples)
}

fn rows_from_blob(blob: Blob, rows: usize, cols: usize) -> Result<Vec<SparseVector>, IndexError> {
    if blob.0 != rows || blob.1 != cols {
        return Err(corrupt("vector blob shape does not match vocabulary"));
    }
    let mut out = vec![Vec::new(); rows];
    for (r, c, v) in blob.2 {
        out[r as usize].push((c, v));
    }
    Ok(out.into_iter().map(SparseVector::from_pairs).collect())
}

fn dense_blob(m: &DMatrix<f64>) -> Vec<u8> {
    let mut triples = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != 0.0 {
                triples.push((r as u32, c as u32, m[(r, c)]));
            }
        }
    }
    encode_blob(m.nrows(), m.ncols(), &triples)
}

fn dense_from_blob(blob: Blob) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(blob.0, blob.1);
    for (r, c, v) in blob.2 {
        m[(r as usize, c as usize)] = v;
    }
    m
}

fn map_blob(map: &BTreeMap<u32, Vec<f64>>, rows: usize) -> Vec<u8> {
    let cols = map.values().next().map_or(0, Vec::len);
    let triples: Vec<_> = map
        .iter()
        .flat_map(|(&r, v)| {
            v.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(move |(c, &x)| (r, c as u32, x))
        })
        .collect();
    encode_blob(rows, cols, &triples)
}

fn map_from_blob(blob: Blob, ids: &[u32]) -> BTreeMap<u32, Vec<f64>> {
    let mut map: BTreeMap<u32, Vec<f64>> = ids.iter().map(|&i| (i, vec![0.0; blob.1])).collect();
    for (r, c, v) in blob.2 {
        if let Some(row) = map.get_mut(&r) {
            row[c as usize] = v;
        }
    }
    map
}

fn vocab_tsv(v: &Vocabulary) -> Vec<u8> {
    let mut out = String::new();
    for (t, df) in v.tokens().iter().zip(v.doc_freqs()) {
        out.push_str(t);
        out.push('\t');
        out.push_str(&df.to_string());
        out.push('\n');
    }
    out.into_bytes()
}

fn vocab_from_tsv(bytes: &[u8], min_df: u32) -> Result<Vocabulary, IndexError> {
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt("vocabulary is not UTF-8"))?;
    let mut tokens = Vec::new();
    let mut dfs = Vec::new();
    for line in text.lines() {
        let (t, df) = line
            .split_once('\t')
            .ok_or_else(|| corrupt("malformed vocabulary line"))?;
        tokens.push(t.to_owned());
        dfs.push(df.parse().map_err(|_| corrupt("malformed doc freq"))?);
    }
    Vocabulary::from_parts(tokens, dfs, min_df).ok_or_else(|| corrupt("vocabulary out of order"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes the index directory, creating it if needed. The manifest is written last.
pub fn save_index(index: &CorpusIndex, dir: &Path) -> Result<(), IndexError> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut records = Vec::new();
    for r in &index.records {
        serde_json::to_writer(&mut records, r).map_err(std::io::Error::other)?;
        records.push(b'\n');
    }
    files.push(("records.jsonl", records));
    files.push(("tree_vocab.tsv", vocab_tsv(&index.tree_vocab)));
    files.push(("keyword_vocab.tsv", vocab_tsv(&index.keyword_vocab)));
    files.push(("stopwords.txt", index.stopwords.clone().into_bytes()));
    files.push(("lemma_rules.txt", index.lemma_rules.clone().into_bytes()));
    let (nt, nk) = (index.tree_vocab.len(), index.keyword_vocab.len());
    files.push(("tree_counts.bin", rows_blob(&index.tree_counts, nt)));
    files.push(("tree_tfidf.bin", rows_blob(&index.tree_tfidf, nt)));
    files.push(("keyword_counts.bin", rows_blob(&index.keyword_counts, nk)));
    files.push(("keyword_tfidf.bin", rows_blob(&index.keyword_tfidf, nk)));
    let ppmi = |q: &PpmiMatrix| encode_blob(q.dim(), q.dim(), &q.triples().collect::<Vec<_>>());
    files.push(("ppmi_tree.bin", ppmi(&index.ppmi_tree)));
    files.push(("ppmi_keyword.bin", ppmi(&index.ppmi_keyword)));
    let enrichment = index.enrichment.as_ref().map(|e| {
        files.push(("svd_components.bin", dense_blob(&e.svd.components)));
        files.push(("cca_u.bin", dense_blob(&e.cca.u_proj)));
        files.push(("cca_v.bin", dense_blob(&e.cca.v_proj)));
        files.push(("dense.bin", map_blob(&e.dense, index.len())));
        files.push(("enriched.bin", map_blob(&e.enriched, index.len())));
        EnrichmentMeta {
            singular_values: e.svd.singular_values.clone(),
            explained_variance_ratio: e.svd.explained_variance_ratio,
            correlations: e.cca.correlations.clone(),
            ids: e.dense.keys().copied().collect(),
        }
    });
    let mut checksums = BTreeMap::new();
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)?;
        checksums.insert(name.to_string(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        format_version: index.format_version,
        settings: index.settings.clone(),
        report: index.report.clone(),
        stats: index.stats(),
        enrichment,
        files: checksums,
    };
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(std::io::Error::other)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Reads and verifies an index directory written by [`save_index`].
pub fn load_index(dir: &Path) -> Result<CorpusIndex, IndexError> {
    let manifest_bytes = fs::read(dir.join("manifest.json"))?;
    let raw: serde_json::Value = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| corrupt(format!("manifest: {e}")))?;
    let found = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("manifest has no format_version"))? as u32;
    if found != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch {
            found,
            supported: FORMAT_VERSION,
        });
    }
    let manifest: Manifest =
        serde_json::from_value(raw).map_err(|e| corrupt(format!("manifest: {e}")))?;
    let read = |name: &str| -> Result<Vec<u8>, IndexError> {
        let expected = manifest
            .files
            .get(name)
            .ok_or_else(|| corrupt(format!("manifest does not list {name}")))?;
        let bytes = fs::read(dir.join(name))?;
        if &sha256_hex(&bytes) != expected {
            return Err(corrupt(format!("checksum mismatch for {name}")));
        }
        Ok(bytes)
    };
    let text = |name: &str| -> Result<String, IndexError> {
        String::from_utf8(read(name)?).map_err(|_| corrupt(format!("{name} is not UTF-8")))
    };

    let mut records = Vec::new();
    for line in BufReader::new(read("records.jsonl")?.as_slice()).lines() {
        let line = line?;
        records.push(
            serde_json::from_str::<EndpointRecord>(&line)
                .map_err(|e| corrupt(format!("records: {e}")))?,
        );
    }
    let settings = manifest.settings;
    let tree_vocab = vocab_from_tsv(&read("tree_vocab.tsv")?, settings.tree_min_df)?;
    let keyword_vocab = vocab_from_tsv(&read("keyword_vocab.tsv")?, settings.keyword_min_df)?;
    let (n, nt, nk) = (records.len(), tree_vocab.len(), keyword_vocab.len());
    let rows = |name: &str, cols: usize| rows_from_blob(decode_blob(&read(name)?)?, n, cols);
    let ppmi = |name: &str, dim: usize| -> Result<PpmiMatrix, IndexError> {
        let (r, c, triples) = decode_blob(&read(name)?)?;
        if r != dim || c != dim {
            return Err(corrupt(format!("{name} has the wrong shape")));
        }
        PpmiMatrix::from_triples(dim, triples).ok_or_else(|| corrupt(format!("{name} is invalid")))
    };
    let tree_counts = rows("tree_counts.bin", nt)?;
    let keyword_counts = rows("keyword_counts.bin", nk)?;
    let ppmi_tree = ppmi("ppmi_tree.bin", nt)?;
    let ppmi_keyword = ppmi("ppmi_keyword.bin", nk)?;
    let enrichment = match manifest.enrichment {
        None => None,
        Some(meta) => {
            let blob = |name: &str| -> Result<Blob, IndexError> { decode_blob(&read(name)?) };
            Some(Enrichment {
                svd: TruncatedSvd {
                    components: dense_from_blob(blob("svd_components.bin")?),
                    singular_values: meta.singular_values,
                    explained_variance_ratio: meta.explained_variance_ratio,
                },
                cca: CcaProjection {
                    u_proj: dense_from_blob(blob("cca_u.bin")?),
                    v_proj: dense_from_blob(blob("cca_v.bin")?),
                    correlations: meta.correlations,
                },
                dense: map_from_blob(blob("dense.bin")?, &meta.ids),
                enriched: map_from_blob(blob("enriched.bin")?, &meta.ids),
            })
        }
    };
    let stopwords = text("stopwords.txt")?;
    let lemma_rules = text("lemma_rules.txt")?;
    Ok(CorpusIndex {
        format_version: manifest.format_version,
        settings,
        report: manifest.report,
        tree_self: self_products(&tree_counts, &ppmi_tree),
        keyword_self: self_products(&keyword_counts, &ppmi_keyword),
        tree_tfidf: rows("tree_tfidf.bin", nt)?,
        keyword_tfidf: rows("keyword_tfidf.bin", nk)?,
        records,
        tree_vocab,
        keyword_vocab,
        tree_counts,
        keyword_counts,
        ppmi_tree,
        ppmi_keyword,
        enrichment,
        featurizer: make_featurizer(&stopwords, &lemma_rules)?,
        stopwords,
        lemma_rules,
    })
}
