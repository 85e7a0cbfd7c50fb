//! Log-linear fusion of similarity features with a quality bias.
//!
//! Each candidate `e` gets a raw score `s(e) = Σ w_k f_k(e, query) + w_q q(e)`;
//! the probability of `e` is the softmax of `s` over the whole corpus, and the
//! reported value is that probability divided by the maximum, i.e.
//! `exp(s(e) - max s)`. Ordering by either is ordering by `s`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draft::QueryDraft;
use crate::enrich::enrich_vector;
use crate::index::CorpusIndex;
use crate::vectorize::{
    cosine, cosine_dense, count_vector, tfidf_vector, PpmiMatrix, SparseVector,
};

pub const DEFAULT_TOP_K: usize = 10;
pub const QUALITY_WEIGHT: f64 = 0.1;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("no features enabled")]
    NoFeatures,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("index has no endpoints")]
    EmptyIndex,
    #[error("incompatible config: {0}")]
    IncompatibleConfig(String),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Tree,
    Text,
    Fuzzy,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Tree, Feature::Text, Feature::Fuzzy];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Tree => "tree",
            Feature::Text => "text",
            Feature::Fuzzy => "fuzzy",
        }
    }

    pub fn parse(s: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeFeaturization {
    Tfidf,
    #[default]
    Ppmi,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextFeaturization {
    #[default]
    Tfidf,
    Ppmi,
    Dense,
    Enriched,
}

/// Enabled features are the keys of `weights`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub weights: BTreeMap<Feature, f64>,
    pub quality_weight: f64,
    #[serde(default)]
    pub tree_featurization: TreeFeaturization,
    #[serde(default)]
    pub text_featurization: TextFeaturization,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig::with_features(Feature::ALL).expect("nonempty")
    }
}

impl FusionConfig {
    /// Default weights for the given features and default featurizations.
    pub fn with_features(
        features: impl IntoIterator<Item = Feature>,
    ) -> Result<FusionConfig, RankError> {
        let (weights, quality_weight) = default_weights(&features.into_iter().collect())?;
        Ok(FusionConfig {
            weights,
            quality_weight,
            tree_featurization: TreeFeaturization::default(),
            text_featurization: TextFeaturization::default(),
        })
    }

    pub fn features(&self) -> impl Iterator<Item = Feature> + '_ {
        self.weights.keys().copied()
    }

    pub fn enabled(&self, feature: Feature) -> bool {
        self.weights.contains_key(&feature)
    }

    pub fn weight(&self, feature: Feature) -> f64 {
        self.weights.get(&feature).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), RankError> {
        if self.weights.is_empty() {
            return Err(RankError::NoFeatures);
        }
        let all = self.weights.values().chain([&self.quality_weight]);
        if all.clone().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RankError::InvalidWeights("weights must be finite and >= 0".into()));
        }
        let sum: f64 = all.sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(RankError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Quality gets 0.1; the remaining 0.9 is split evenly over `features`.
pub fn default_weights(
    features: &BTreeSet<Feature>,
) -> Result<(BTreeMap<Feature, f64>, f64), RankError> {
    if features.is_empty() {
        return Err(RankError::NoFeatures);
    }
    let each = (1.0 - QUALITY_WEIGHT) / features.len() as f64;
    Ok((features.iter().map(|&f| (f, each)).collect(), QUALITY_WEIGHT))
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev(a, b) / max(|a|, |b|)`, with two empty names scoring 1.
pub fn fuzzy_name_score(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Per-feature similarities of one candidate. Disabled features are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeatureScores {
    pub tree: Option<f64>,
    pub text: Option<f64>,
    pub fuzzy: Option<f64>,
    pub quality: f64,
}

impl FeatureScores {
    pub fn get(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::Tree => self.tree,
            Feature::Text => self.text,
            Feature::Fuzzy => self.fuzzy,
        }
    }
}

/// Weighted contribution of every enabled feature plus `quality`; these sum to
/// the raw score.
pub fn contributions(scores: &FeatureScores, config: &FusionConfig) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = config
        .weights
        .iter()
        .map(|(&f, &w)| (f.as_str().to_owned(), w * scores.get(f).unwrap_or(0.0)))
        .collect();
    out.insert("quality".into(), config.quality_weight * scores.quality);
    out
}

/// `Σ w_k f_k + w_q q`.
pub fn fuse(scores: &FeatureScores, config: &FusionConfig) -> f64 {
    let features: f64 = config
        .weights
        .iter()
        .map(|(&f, &w)| w * scores.get(f).unwrap_or(0.0))
        .sum();
    features + config.quality_weight * scores.quality
}

/// Everything about a query that does not depend on the candidate.
#[derive(Debug, Clone)]
pub struct QueryFeatures {
    pub name: String,
    pub tree_counts: SparseVector,
    pub tree_tfidf: SparseVector,
    pub keyword_counts: SparseVector,
    pub keyword_tfidf: SparseVector,
    /// `Q x` for the tree and keyword PPMI matrices, computed on demand.
    tree_qx: Option<(Vec<f64>, f64)>,
    keyword_qx: Option<(Vec<f64>, f64)>,
    dense: Option<Vec<f64>>,
    enriched: Option<Vec<f64>>,
}

impl QueryFeatures {
    pub fn new(draft: &QueryDraft, index: &CorpusIndex, config: &FusionConfig) -> Self {
        let tokens = draft.tokens(index.featurizer());
        Self::from_tokens(
            &draft.endpoint_name,
            &tokens.tree_tokens,
            &tokens.keyword_tokens,
            draft.dense.clone(),
            index,
            config,
        )
    }

    /// Features of an already tokenized query.
    pub fn from_tokens<S: AsRef<str>>(
        name: &str,
        tree_tokens: &[S],
        keyword_tokens: &[S],
        dense: Option<Vec<f64>>,
        index: &CorpusIndex,
        config: &FusionConfig,
    ) -> Self {
        let n = index.len();
        let tree_counts = count_vector(tree_tokens, &index.tree_vocab);
        let keyword_counts = count_vector(keyword_tokens, &index.keyword_vocab);
        let keyword_tfidf = tfidf_vector(keyword_tokens, &index.keyword_vocab, n);
        let quadratic = |x: &SparseVector, q: &PpmiMatrix| {
            let qx = q.mul_vec(x);
            let xqx = x.dot_dense(&qx);
            (qx, xqx)
        };
        let tree_qx = (config.enabled(Feature::Tree)
            && config.tree_featurization == TreeFeaturization::Ppmi)
            .then(|| quadratic(&tree_counts, &index.ppmi_tree));
        let keyword_qx = (config.enabled(Feature::Text)
            && config.text_featurization == TextFeaturization::Ppmi)
            .then(|| quadratic(&keyword_counts, &index.ppmi_keyword));
        let enriched = match (&dense, &index.enrichment) {
            (Some(x), Some(e)) if x.len() == e.dense_dim() => Some(enrich_vector(
                x,
                &e.svd.transform_sparse(&keyword_tfidf),
                &e.cca,
            )),
            _ => None,
        };
        QueryFeatures {
            name: name.to_owned(),
            tree_tfidf: tfidf_vector(tree_tokens, &index.tree_vocab, n),
            tree_counts,
            keyword_counts,
            keyword_tfidf,
            tree_qx,
            keyword_qx,
            dense,
            enriched,
        }
    }
}

/// PPMI-weighted cosine from a precomputed `Qx`, capped at 1 for fusion.
///
/// `Q` has a mostly zero diagonal and is not positive semidefinite, so the raw
/// kernel can exceed 1 for a pair that merely shares correlated tokens; left
/// uncapped it would outrank an exact copy of the query.
fn quadratic_cosine(qx: &(Vec<f64>, f64), y: &SparseVector, yqy: f64) -> f64 {
    if qx.1 <= 0.0 || yqy <= 0.0 {
        return 0.0;
    }
    (y.dot_dense(&qx.0) / (qx.1.sqrt() * yqy.sqrt())).min(1.0)
}

/// Similarities between a query and candidate `id`.
pub fn feature_scores(
    query: &QueryFeatures,
    index: &CorpusIndex,
    id: u32,
    config: &FusionConfig,
) -> FeatureScores {
    let i = id as usize;
    let tree = config.enabled(Feature::Tree).then(|| match &query.tree_qx {
        Some(qx) => quadratic_cosine(qx, &index.tree_counts[i], index.tree_self[i]),
        None => cosine(&query.tree_tfidf, &index.tree_tfidf[i]),
    });
    let text = config.enabled(Feature::Text).then(|| {
        let fallback = || cosine(&query.keyword_tfidf, &index.keyword_tfidf[i]);
        match config.text_featurization {
            TextFeaturization::Tfidf => fallback(),
            TextFeaturization::Ppmi => match &query.keyword_qx {
                Some(qx) => quadratic_cosine(qx, &index.keyword_counts[i], index.keyword_self[i]),
                None => fallback(),
            },
            TextFeaturization::Dense => {
                let cand = index.enrichment.as_ref().and_then(|e| e.dense.get(&id));
                match (&query.dense, cand) {
                    (Some(q), Some(c)) if q.len() == c.len() => cosine_dense(q, c),
                    _ => fallback(),
                }
            }
            TextFeaturization::Enriched => {
                let cand = index.enrichment.as_ref().and_then(|e| e.enriched.get(&id));
                match (&query.enriched, cand) {
                    (Some(q), Some(c)) => cosine_dense(q, c),
                    _ => fallback(),
                }
            }
        }
    });
    let fuzzy = config
        .enabled(Feature::Fuzzy)
        .then(|| fuzzy_name_score(&query.name, &index.records[i].name));
    FeatureScores {
        tree,
        text,
        fuzzy,
        quality: index.records[i].quality,
    }
}

/// Raw score of candidate `id` and its per-feature contributions.
pub fn linear_score(
    query: &QueryFeatures,
    index: &CorpusIndex,
    id: u32,
    config: &FusionConfig,
) -> (f64, BTreeMap<String, f64>) {
    let scores = feature_scores(query, index, id, config);
    (fuse(&scores, config), contributions(&scores, config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub endpoint_id: u32,
    pub name: String,
    /// `P(e | query) / max P`, so the top result has exactly 1.
    pub normalized_probability: f64,
    /// Softmax probability over the whole corpus.
    pub probability: f64,
    pub raw_score: f64,
    pub quality: f64,
    /// Unweighted similarities of the enabled features.
    pub feature_scores: BTreeMap<String, f64>,
    /// Weighted contributions, including quality; they sum to `raw_score`.
    pub feature_breakdown: BTreeMap<String, f64>,
}

pub fn check_compatible(index: &CorpusIndex, config: &FusionConfig) -> Result<(), RankError> {
    config.validate()?;
    if index.is_empty() {
        return Err(RankError::EmptyIndex);
    }
    if config.enabled(Feature::Text)
        && matches!(
            config.text_featurization,
            TextFeaturization::Dense | TextFeaturization::Enriched
        )
        && index.enrichment.is_none()
    {
        return Err(RankError::IncompatibleConfig(
            "index was built without dense embeddings".into(),
        ));
    }
    Ok(())
}

/// Scores every candidate and returns the best `top_k`.
pub fn rank_endpoints(
    query: &QueryDraft,
    index: &CorpusIndex,
    config: &FusionConfig,
    top_k: usize,
) -> Result<Vec<RankedResult>, RankError> {
    check_compatible(index, config)?;
    let features = QueryFeatures::new(query, index, config);
    Ok(rank_with_features(&features, index, config, top_k))
}

/// [`rank_endpoints`] for precomputed query features. The config must already
/// be validated against the index.
pub fn rank_with_features(
    query: &QueryFeatures,
    index: &CorpusIndex,
    config: &FusionConfig,
    top_k: usize,
) -> Vec<RankedResult> {
    let scored: Vec<(u32, f64, FeatureScores)> = (0..index.len() as u32)
        .into_par_iter()
        .map(|id| {
            let s = feature_scores(query, index, id, config);
            (id, fuse(&s, config), s)
        })
        .collect();
    let max = scored
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = scored.iter().map(|s| (s.1 - max).exp()).sum();
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .1
            .total_cmp(&scored[a].1)
            .then(scored[a].0.cmp(&scored[b].0))
    });
    order
        .into_iter()
        .take(top_k)
        .map(|i| {
            let (id, raw, scores) = &scored[i];
            let normalized = (raw - max).exp();
            RankedResult {
                endpoint_id: *id,
                name: index.records[*id as usize].name.clone(),
                normalized_probability: normalized,
                probability: normalized / denom,
                raw_score: *raw,
                quality: scores.quality,
                feature_scores: config
                    .features()
                    .map(|f| (f.as_str().to_owned(), scores.get(f).unwrap_or(0.0)))
                    .collect(),
                feature_breakdown: contributions(scores, config),
            }
        })
        .collect()
}
