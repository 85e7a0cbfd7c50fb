//! Partially written endpoints, the query side of recommendation.
//!
//! A draft can be posted in any of three shapes:
//!
//! - a bare path map: `{"/songs/{id}": {"get": {...}}}`
//! - a partial document: `{"paths": {"/songs/{id}": {...}}, "definitions": {...}}`
//! - an explicit draft: `{"endpoint_name": "/songs/{id}", "path_item": {...}, "definitions": {...}}`
//!
//! ```
//! use oasrank::parse_draft;
//! let draft = parse_draft(&serde_json::json!({
//!     "/songs/{id}": {"get": {"responses": {"200": {"description": "ok"}}}}
//! })).unwrap();
//! assert_eq!(draft.endpoint_name, "/songs/{id}");
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::featurize::Featurizer;
use crate::ingest::{
    extract_endpoint_tree, parse_tree, EndpointRecord, EndpointTree, IngestError, RefContext,
    SpecFormat,
};

#[derive(Debug, Error)]
pub enum DraftError {
    #[error("unparsable draft: {0}")]
    UnparsableDraft(String),
}

impl From<IngestError> for DraftError {
    fn from(e: IngestError) -> Self {
        DraftError::UnparsableDraft(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDraft {
    pub endpoint_name: String,
    pub path_item: Value,
    #[serde(default)]
    pub definitions: BTreeMap<String, Value>,
    /// Endpoint the draft was derived from, when generated by the benchmark.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sentence embedding of the draft's text, when the caller has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<f64>>,
}

/// Tokens and text of a draft, computed once per query.
#[derive(Debug, Clone, PartialEq)]
pub struct DraftTokens {
    pub tree_tokens: Vec<String>,
    pub keyword_tokens: Vec<String>,
    pub text: String,
}

impl QueryDraft {
    pub fn new(endpoint_name: impl Into<String>, path_item: Value) -> Self {
        QueryDraft {
            endpoint_name: endpoint_name.into(),
            path_item,
            definitions: BTreeMap::new(),
            origin_id: None,
            seed: None,
            dense: None,
        }
    }

    /// The stored fragment of a corpus endpoint, unchanged.
    pub fn from_record(record: &EndpointRecord) -> Self {
        QueryDraft {
            endpoint_name: record.name.clone(),
            path_item: record.fragment.path_item.clone(),
            definitions: record.fragment.definitions.clone(),
            origin_id: Some(record.endpoint_id),
            seed: None,
            dense: None,
        }
    }

    pub fn tree(&self) -> EndpointTree {
        extract_endpoint_tree(
            &self.endpoint_name,
            &self.path_item,
            RefContext::definitions_only(&self.definitions),
        )
    }

    pub fn tokens(&self, featurizer: &Featurizer) -> DraftTokens {
        let tree = self.tree();
        let text = featurizer.extract_text(&tree);
        DraftTokens {
            tree_tokens: featurizer.tree_path_tokens(&tree),
            keyword_tokens: featurizer.keyword_tokens(&text),
            text,
        }
    }
}

fn definitions_of(map: &serde_json::Map<String, Value>) -> BTreeMap<String, Value> {
    match map.get("definitions") {
        Some(Value::Object(defs)) => defs.clone().into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

fn first_path(map: &serde_json::Map<String, Value>) -> Option<(String, Value)> {
    map.iter()
        .filter(|(k, _)| k.starts_with('/'))
        .min_by(|a, b| a.0.cmp(b.0))
        .map(|(k, v)| (k.clone(), v.clone()))
}

/// Accepts a draft in any of the module-level shapes. When several paths are
/// present, the lexicographically first one is the query.
pub fn parse_draft(value: &Value) -> Result<QueryDraft, DraftError> {
    let Value::Object(map) = value else {
        return Err(DraftError::UnparsableDraft("expected a JSON object".into()));
    };
    let (name, item) = if let Some(name) = map.get("endpoint_name") {
        let name = name
            .as_str()
            .ok_or_else(|| DraftError::UnparsableDraft("endpoint_name must be a string".into()))?;
        (name.to_owned(), map.get("path_item").cloned().unwrap_or(Value::Null))
    } else if let Some(paths) = map.get("paths") {
        let Value::Object(paths) = paths else {
            return Err(DraftError::UnparsableDraft("paths must be an object".into()));
        };
        first_path(paths)
            .ok_or_else(|| DraftError::UnparsableDraft("paths has no endpoint".into()))?
    } else {
        first_path(map)
            .ok_or_else(|| DraftError::UnparsableDraft("no endpoint path found".into()))?
    };
    if !item.is_object() {
        return Err(DraftError::UnparsableDraft(format!(
            "path item of {name} is not an object"
        )));
    }
    let dense = match map.get("dense") {
        Some(v) => Some(
            serde_json::from_value::<Vec<f64>>(v.clone())
                .map_err(|e| DraftError::UnparsableDraft(format!("dense: {e}")))?,
        ),
        None => None,
    };
    Ok(QueryDraft {
        endpoint_name: name,
        path_item: item,
        definitions: definitions_of(map),
        origin_id: None,
        seed: None,
        dense,
    })
}

/// Parses raw JSON or YAML bytes, then [`parse_draft`].
pub fn parse_draft_bytes(bytes: &[u8], format: SpecFormat) -> Result<QueryDraft, DraftError> {
    parse_draft(&parse_tree(bytes, format)?)
}
