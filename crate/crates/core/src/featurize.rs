//! Key-component extraction: tree-path tokens, operation text, keyword tokens
//! and document-frequency filtered vocabularies.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{EndpointRecord, EndpointTree, Schema};
use crate::text::{normalize_identifier, split_words, Lemmatizer, RuleLemmatizer, StopWords};

/// Default document-frequency floor for tree-path tokens.
pub const TREE_MIN_DF: u32 = 10;
/// Default document-frequency floor for keyword tokens.
pub const KEYWORD_MIN_DF: u32 = 15;

const SEP: char = '_';

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeaturizeError {
    #[error("no {0} token appears in at least {1} endpoints")]
    EmptyVocabulary(TokenSource, u32),
    #[error("min_df must be at least 1")]
    InvalidMinDf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenSource {
    Tree,
    Keyword,
}

impl std::fmt::Display for TokenSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TokenSource::Tree => "tree",
            TokenSource::Keyword => "keyword",
        })
    }
}

/// Turns endpoint trees and free text into tokens. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Featurizer {
    lemmatizer: Arc<dyn Lemmatizer>,
    stopwords: Arc<StopWords>,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer::new(Arc::new(RuleLemmatizer::default()), StopWords::default())
    }
}

impl Featurizer {
    pub fn new(lemmatizer: Arc<dyn Lemmatizer>, stopwords: StopWords) -> Self {
        Featurizer {
            lemmatizer,
            stopwords: Arc::new(stopwords),
        }
    }

    fn segment(&self, name: &str) -> String {
        normalize_identifier(name, self.lemmatizer.as_ref())
    }

    /// Variable names prefixed with their ancestry, e.g. `parameters_songid` or
    /// `get_responses_200_artist_artistname`.
    pub fn tree_path_tokens(&self, tree: &EndpointTree) -> Vec<String> {
        let mut out = Vec::new();
        for (method, op) in &tree.operations {
            for param in &op.parameters {
                let seg = self.segment(&param.name);
                if seg.is_empty() {
                    continue;
                }
                let token = format!("parameters{SEP}{seg}");
                out.push(token.clone());
                if let Some(schema) = &param.schema {
                    self.schema_tokens(&token, schema, &mut out);
                }
            }
            for response in &op.responses {
                let code: String = response
                    .code
                    .chars()
                    .filter(char::is_ascii_alphanumeric)
                    .map(|c| c.to_ascii_lowercase())
                    .collect();
                if code.is_empty() {
                    continue;
                }
                let token = format!("{method}{SEP}responses{SEP}{code}");
                out.push(token.clone());
                if let Some(schema) = &response.schema {
                    self.schema_tokens(&token, schema, &mut out);
                }
            }
        }
        out
    }

    fn schema_tokens(&self, prefix: &str, schema: &Schema, out: &mut Vec<String>) {
        let prefix = match schema.model.as_deref().map(|m| self.segment(m)) {
            Some(model) if !model.is_empty() => format!("{prefix}{SEP}{model}"),
            _ => prefix.to_owned(),
        };
        for (name, child) in &schema.properties {
            let seg = self.segment(name);
            if seg.is_empty() {
                continue;
            }
            let token = format!("{prefix}{SEP}{seg}");
            out.push(token.clone());
            self.schema_tokens(&token, child, out);
        }
    }

    /// Operation summaries and descriptions joined with spaces, in method order.
    /// Parameter and response descriptions are left out.
    pub fn extract_text(&self, tree: &EndpointTree) -> String {
        let mut parts: Vec<&str> = Vec::new();
        for op in tree.operations.values() {
            for text in [&op.summary, &op.description].into_iter().flatten() {
                let text = text.trim();
                if !text.is_empty() {
                    parts.push(text);
                }
            }
        }
        parts.join(" ")
    }

    /// Lowercased, split, stop-word filtered and lemmatized words.
    pub fn keyword_tokens(&self, text: &str) -> Vec<String> {
        split_words(text)
            .into_iter()
            .filter_map(|word| {
                let lower = word.to_ascii_lowercase();
                if self.stopwords.contains(&lower) {
                    return None;
                }
                let lemma = self.lemmatizer.lemmatize(&lower);
                (!lemma.is_empty() && !self.stopwords.contains(&lemma)).then_some(lemma)
            })
            .collect()
    }
}

/// Ordered token list with per-token document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<u32>,
    min_df: u32,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its parts. Tokens must be strictly increasing.
    pub fn from_parts(tokens: Vec<String>, doc_freq: Vec<u32>, min_df: u32) -> Option<Self> {
        if tokens.len() != doc_freq.len() || tokens.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Some(Vocabulary {
            tokens,
            doc_freq,
            min_df,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.doc_freq
    }

    pub fn min_df(&self) -> u32 {
        self.min_df
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn doc_freq(&self, index: u32) -> u32 {
        self.doc_freq[index as usize]
    }

    /// In-vocabulary token counts, keyed and ordered by token index.
    pub fn counts<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeMap<u32, u32> {
        let mut counts = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.index_of(t.as_ref()) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Keeps the tokens found in at least `min_df` endpoints.
pub fn build_vocabulary(
    corpus: &[EndpointRecord],
    source: TokenSource,
    min_df: u32,
) -> Result<Vocabulary, FeaturizeError> {
    let bags = corpus.iter().map(|r| match source {
        TokenSource::Tree => r.tree_tokens.as_slice(),
        TokenSource::Keyword => r.keyword_tokens.as_slice(),
    });
    vocabulary_from_bags(bags, source, min_df)
}

pub fn vocabulary_from_bags<'a, S, I>(
    bags: I,
    source: TokenSource,
    min_df: u32,
) -> Result<Vocabulary, FeaturizeError>
where
    S: AsRef<str> + 'a,
    I: IntoIterator<Item = &'a [S]>,
{
    if min_df == 0 {
        return Err(FeaturizeError::InvalidMinDf);
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for bag in bags {
        let mut seen: Vec<&str> = bag.iter().map(AsRef::as_ref).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let (tokens, doc_freq): (Vec<String>, Vec<u32>) = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df)
        .map(|(t, n)| (t.to_owned(), n))
        .unzip();
    if tokens.is_empty() {
        return Err(FeaturizeError::EmptyVocabulary(source, min_df));
    }
    Ok(Vocabulary::from_parts(tokens, doc_freq, min_df).expect("BTreeMap keys are sorted"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{
        build_definitions_dict, extract_endpoint_trees, parse_spec, EndpointFragment, SpecFormat,
    };
    use proptest::prelude::*;
    use serde_json::json;

    fn trees(value: serde_json::Value) -> Vec<EndpointTree> {
        let doc = parse_spec(value.to_string().as_bytes(), SpecFormat::Json).unwrap();
        extract_endpoint_trees(&doc, &build_definitions_dict(&doc))
    }

    fn music() -> EndpointTree {
        trees(json!({
            "swagger": "2.0",
            "paths": {"/songs/{id}/artist": {"get": {
                "summary": "Get artist info",
                "parameters": [{"name": "songID", "in": "path", "description": "ignored"}],
                "responses": {"200": {"description": "OK",
                    "schema": {"$ref": "#/definitions/Artist"}}}}}},
            "definitions": {"Artist": {"properties": {"artistName": {"type": "string"}}}}
        }))
        .remove(0)
    }

    #[test]
    fn tree_tokens_carry_their_ancestry() {
        let tokens = Featurizer::default().tree_path_tokens(&music());
        assert!(tokens.contains(&"parameters_songid".to_owned()));
        assert!(tokens.contains(&"get_responses_200_artist_artistname".to_owned()));
        assert!(tokens.contains(&"get_responses_200".to_owned()));
    }

    #[test]
    fn empty_tree_has_no_tokens() {
        let t = trees(json!({"swagger": "2.0", "paths": {"/a": {"get": {"summary": "x"}}}}));
        assert!(Featurizer::default().tree_path_tokens(&t[0]).is_empty());
    }

    #[test]
    fn same_name_under_different_parents_is_distinct() {
        let t = trees(json!({"swagger": "2.0", "paths": {"/a": {
            "get": {"parameters": [{"name": "id", "in": "query"}],
                    "responses": {"200": {"description": "OK", "schema":
                        {"properties": {"id": {"type": "string"}}}}}}}}}));
        let tokens = Featurizer::default().tree_path_tokens(&t[0]);
        assert!(tokens.contains(&"parameters_id".to_owned()));
        assert!(tokens.contains(&"get_responses_200_id".to_owned()));
    }

    #[test]
    fn text_is_summaries_and_descriptions_only() {
        let f = Featurizer::default();
        assert_eq!(f.extract_text(&music()), "Get artist info");

        let ok_only = trees(json!({"swagger": "2.0", "paths": {"/a": {"get": {
            "responses": {"200": {"description": "OK"}}}}}}));
        assert_eq!(f.extract_text(&ok_only[0]), "");

        let two = trees(json!({"swagger": "2.0", "paths": {"/a": {
            "post": {"description": "B"}, "get": {"description": "A"}}}}));
        assert_eq!(f.extract_text(&two[0]), "A B");
    }

    #[test]
    fn keyword_examples() {
        let f = Featurizer::default();
        assert_eq!(f.keyword_tokens("Returns the albums"), vec!["return", "album"]);
        assert!(f.keyword_tokens("").is_empty());
        assert_eq!(f.keyword_tokens("getArtistInfo"), vec!["get", "artist", "info"]);
    }

    fn record(tree: &[&str], kw: &[&str]) -> EndpointRecord {
        EndpointRecord {
            endpoint_id: 0,
            name: String::new(),
            tree_tokens: tree.iter().map(|s| s.to_string()).collect(),
            keyword_tokens: kw.iter().map(|s| s.to_string()).collect(),
            raw_text: String::new(),
            quality: 1.0,
            source_spec_ids: vec![],
            fragment: EndpointFragment::default(),
        }
    }

    #[test]
    fn vocabulary_thresholds() {
        let mut corpus: Vec<EndpointRecord> = (0..9).map(|_| record(&["rare"], &[])).collect();
        corpus.extend((0..6).map(|_| record(&["common"], &["kw"])));
        corpus.iter_mut().take(15).for_each(|r| r.keyword_tokens.push("kw".into()));

        let tree = build_vocabulary(&corpus, TokenSource::Tree, 10);
        assert_eq!(
            tree.unwrap_err(),
            FeaturizeError::EmptyVocabulary(TokenSource::Tree, 10)
        );
        let all = build_vocabulary(&corpus, TokenSource::Tree, 1).unwrap();
        assert_eq!(all.tokens(), &["common".to_owned(), "rare".to_owned()]);
        assert_eq!(all.doc_freqs(), &[6, 9]);

        // "kw" appears twice in six records but doc frequency counts endpoints: 15.
        let kw = build_vocabulary(&corpus, TokenSource::Keyword, 15).unwrap();
        assert_eq!(kw.tokens(), &["kw".to_owned()]);
        assert_eq!(kw.doc_freq(0), 15);
        assert!(build_vocabulary(&corpus, TokenSource::Keyword, 16).is_err());
        assert_eq!(
            build_vocabulary(&corpus, TokenSource::Keyword, 0).unwrap_err(),
            FeaturizeError::InvalidMinDf
        );
    }

    proptest! {
        #[test]
        fn keyword_tokenization_is_idempotent(text in "\\PC{0,80}") {
            let f = Featurizer::default();
            let once = f.keyword_tokens(&text);
            let twice = f.keyword_tokens(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn keyword_tokenization_ascii_idents(text in "[a-zA-Z0-9_ ]{0,60}") {
            let f = Featurizer::default();
            let once = f.keyword_tokens(&text);
            prop_assert_eq!(f.keyword_tokens(&once.join(" ")), once);
        }

        #[test]
        fn vocabulary_is_deterministic(bags in proptest::collection::vec(
            proptest::collection::vec("[a-d]{1,2}", 0..6), 1..8)) {
            let slices: Vec<&[String]> = bags.iter().map(Vec::as_slice).collect();
            let a = vocabulary_from_bags(slices.clone(), TokenSource::Tree, 1);
            let b = vocabulary_from_bags(slices.into_iter().rev(), TokenSource::Tree, 1);
            prop_assert_eq!(a, b);
        }
    }
}
