//! Wire types of the `/v1` API. The command line renders the same
//! [`QueryResponse`] so both front ends agree byte for byte.

use std::collections::BTreeMap;

use oasrank::draft::{parse_draft, parse_draft_bytes, DraftError};
use oasrank::index::IndexStats;
use oasrank::ingest::{EndpointRecord, SpecFormat};
use oasrank::rank::{
    Feature, FusionConfig, RankError, RankedResult, TextFeaturization, TreeFeaturization,
    DEFAULT_TOP_K,
};
use oasrank::{rank_endpoints, CorpusIndex, QueryDraft};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    /// A draft tree, or JSON/YAML text holding one.
    pub draft: Value,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_override: Option<ConfigOverride>,
}

/// Partial [`FusionConfig`]. Setting `enabled_features` resets the weights to
/// their defaults for that set unless `weights` is also given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled_features: Option<Vec<Feature>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<Feature, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_featurization: Option<TreeFeaturization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_featurization: Option<TextFeaturization>,
}

impl ConfigOverride {
    pub fn apply(&self, base: &FusionConfig) -> Result<FusionConfig, RankError> {
        let mut config = match &self.enabled_features {
            Some(features) => FusionConfig {
                tree_featurization: base.tree_featurization,
                text_featurization: base.text_featurization,
                ..FusionConfig::with_features(features.iter().copied())?
            },
            None => base.clone(),
        };
        if let Some(weights) = &self.weights {
            config.weights = weights.clone();
        }
        if let Some(q) = self.quality_weight {
            config.quality_weight = q;
        }
        if let Some(t) = self.tree_featurization {
            config.tree_featurization = t;
        }
        if let Some(t) = self.text_featurization {
            config.text_featurization = t;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Accepts a draft tree, or a string of JSON or YAML text.
pub fn draft_from_value(value: &Value) -> Result<QueryDraft, DraftError> {
    match value {
        Value::String(text) => parse_draft_bytes(text.as_bytes(), SpecFormat::Yaml),
        other => parse_draft(other),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    #[serde(flatten)]
    pub result: RankedResult,
    pub source_spec_ids: Vec<String>,
    /// YAML rendering of the stored path item under its name.
    pub preview: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub query: String,
    pub top_k: usize,
    pub config: FusionConfig,
    pub results: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointResponse {
    #[serde(flatten)]
    pub record: EndpointRecord,
    pub preview: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<IndexStats>,
}

pub fn render_preview(record: &EndpointRecord) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert(record.name.clone(), record.fragment.path_item.clone());
    if !record.fragment.definitions.is_empty() {
        let defs = record.fragment.definitions.clone().into_iter().collect();
        doc.insert("definitions".into(), Value::Object(defs));
    }
    serde_yaml::to_string(&doc).unwrap_or_default()
}

pub fn execute_query(
    index: &CorpusIndex,
    draft: &QueryDraft,
    config: &FusionConfig,
    top_k: usize,
) -> Result<QueryResponse, RankError> {
    let results = rank_endpoints(draft, index, config, top_k)?
        .into_iter()
        .map(|result| {
            let record = index.record(result.endpoint_id).expect("ranked ids come from the index");
            Recommendation {
                source_spec_ids: record.source_spec_ids.clone(),
                preview: render_preview(record),
                result,
            }
        })
        .collect();
    Ok(QueryResponse {
        query: draft.endpoint_name.clone(),
        top_k,
        config: config.clone(),
        results,
    })
}
