//! Rubric-based quality grading of Swagger documents.
//!
//! A node scores 0 when it misses a required key, otherwise the fraction of
//! present expected keys whose value has the expected type. Operations are
//! averaged per endpoint, endpoints are averaged per document, and the final
//! score mixes the `paths` and `info` grades.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ingest::{HttpMethod, SpecDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Str,
    List,
    Dict,
    Bool,
}

impl ValueType {
    /// Strict type check, no coercion: numbers are never strings.
    pub fn matches(self, value: &Value) -> bool {
        matches!(
            (self, value),
            (ValueType::Str, Value::String(_))
                | (ValueType::List, Value::Array(_))
                | (ValueType::Dict, Value::Object(_))
                | (ValueType::Bool, Value::Bool(_))
        )
    }
}

/// Required keys and expected key types for one kind of parent node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricRow {
    pub required: BTreeSet<String>,
    pub expected: BTreeMap<String, ValueType>,
}

impl RubricRow {
    fn new(required: &[&str], expected: &[(&str, ValueType)]) -> Self {
        RubricRow {
            required: required.iter().map(|s| s.to_string()).collect(),
            expected: expected.iter().map(|(k, t)| (k.to_string(), *t)).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("reading rubric: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing rubric: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid rubric: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRubric {
    pub info: RubricRow,
    pub operation: RubricRow,
    pub lambda_paths: f64,
    pub lambda_info: f64,
}

impl Default for QualityRubric {
    fn default() -> Self {
        use ValueType::*;
        QualityRubric {
            info: RubricRow::new(
                &["title", "version"],
                &[
                    ("title", Str),
                    ("description", Str),
                    ("termsOfService", Str),
                    ("contact", Dict),
                    ("license", Dict),
                    ("version", Str),
                ],
            ),
            operation: RubricRow::new(
                &["responses"],
                &[
                    ("tags", List),
                    ("summary", Str),
                    ("description", Str),
                    ("externalDocs", Dict),
                    ("operationId", Str),
                    ("consumes", List),
                    ("produces", List),
                    ("parameters", Dict),
                    ("responses", Dict),
                    ("schemes", List),
                    ("deprecated", Bool),
                    ("security", Dict),
                ],
            ),
            lambda_paths: 0.7,
            lambda_info: 0.3,
        }
    }
}

/// On-disk rubric layout: one row per parent key group, plus the mixing weights.
#[derive(Debug, Deserialize)]
struct RubricFile {
    rows: Vec<RubricFileRow>,
    #[serde(default)]
    lambda_paths: Option<f64>,
    #[serde(default)]
    lambda_info: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RubricFileRow {
    parents: Vec<String>,
    required: Vec<String>,
    expected: BTreeMap<String, ValueType>,
}

impl QualityRubric {
    /// Parses a rubric file. Rows whose parents are `info` or any HTTP method
    /// replace the matching default row; weights default to 0.7/0.3.
    pub fn from_json(text: &str) -> Result<Self, RubricError> {
        let file: RubricFile = serde_json::from_str(text)?;
        let mut rubric = QualityRubric::default();
        for row in file.rows {
            let parsed = RubricRow {
                required: row.required.into_iter().collect(),
                expected: row.expected,
            };
            let info = row.parents.iter().any(|p| p == "info");
            let op = row.parents.iter().any(|p| HttpMethod::parse(p).is_some());
            match (info, op) {
                (true, false) => rubric.info = parsed,
                (false, true) => rubric.operation = parsed,
                _ => {
                    return Err(RubricError::Invalid(format!(
                        "row parents {:?} must be either [\"info\"] or HTTP methods",
                        row.parents
                    )))
                }
            }
        }
        if let Some(l) = file.lambda_paths {
            rubric.lambda_paths = l;
        }
        if let Some(l) = file.lambda_info {
            rubric.lambda_info = l;
        }
        rubric.validate()?;
        Ok(rubric)
    }

    pub fn load(path: &Path) -> Result<Self, RubricError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), RubricError> {
        if self.lambda_paths < 0.0
            || self.lambda_info < 0.0
            || (self.lambda_paths + self.lambda_info - 1.0).abs() > 1e-9
        {
            return Err(RubricError::Invalid(
                "lambda_paths and lambda_info must be non-negative and sum to 1".into(),
            ));
        }
        for row in [&self.info, &self.operation] {
            if let Some(k) = row.required.iter().find(|k| !row.expected.contains_key(*k)) {
                return Err(RubricError::Invalid(format!(
                    "required key {k:?} is not an expected key"
                )));
            }
        }
        Ok(())
    }
}

/// Grades one associative node against a rubric row.
pub fn score_node(node: &Value, row: &RubricRow) -> f64 {
    let Some(map) = node.as_object() else {
        return 0.0;
    };
    if row.required.iter().any(|k| !map.contains_key(k)) {
        return 0.0;
    }
    let mut present = 0usize;
    let mut matching = 0usize;
    for (key, ty) in &row.expected {
        if let Some(value) = map.get(key) {
            present += 1;
            if ty.matches(value) {
                matching += 1;
            }
        }
    }
    if present == 0 {
        // Nothing optional present and nothing required missing.
        return 1.0;
    }
    matching as f64 / present as f64
}

pub fn score_info(doc: &SpecDocument, rubric: &QualityRubric) -> f64 {
    doc.info
        .as_ref()
        .map_or(0.0, |info| score_node(info, &rubric.info))
}

/// An operation counts only if at least one of its responses has a description;
/// otherwise it scores 0 instead of being skipped.
pub fn score_operation(op: &Value, rubric: &QualityRubric) -> f64 {
    let described = op
        .get("responses")
        .and_then(Value::as_object)
        .is_some_and(|responses| {
            responses
                .values()
                .any(|r| r.get("description").is_some_and(Value::is_string) || r.get("$ref").is_some())
        });
    if described {
        score_node(op, &rubric.operation)
    } else {
        0.0
    }
}

/// Mean over endpoints of the mean over each endpoint's operations.
/// Path items without operations do not take part.
pub fn score_paths(doc: &SpecDocument, rubric: &QualityRubric) -> f64 {
    let endpoint_scores: Vec<f64> = doc
        .paths
        .values()
        .filter_map(|item| {
            let ops: Vec<f64> = item
                .as_object()?
                .iter()
                .filter(|(k, _)| HttpMethod::parse(k).is_some())
                .map(|(_, op)| score_operation(op, rubric))
                .collect();
            (!ops.is_empty()).then(|| mean(&ops))
        })
        .collect();
    if endpoint_scores.is_empty() {
        0.0
    } else {
        mean(&endpoint_scores)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn combine_scores(paths: f64, info: f64, rubric: &QualityRubric) -> f64 {
    (rubric.lambda_paths * paths + rubric.lambda_info * info).clamp(0.0, 1.0)
}

pub fn score_spec(doc: &SpecDocument, rubric: &QualityRubric) -> f64 {
    combine_scores(score_paths(doc, rubric), score_info(doc, rubric), rubric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_spec, SpecFormat};
    use proptest::prelude::*;
    use serde_json::json;

    fn doc(value: Value) -> SpecDocument {
        parse_spec(value.to_string().as_bytes(), SpecFormat::Json).unwrap()
    }

    #[test]
    fn node_examples() {
        let r = QualityRubric::default();
        assert_eq!(score_node(&json!({"title": "t"}), &r.info), 0.0);
        assert_eq!(score_node(&json!({"title": "t", "version": "1"}), &r.info), 1.0);
        // responses matches dict, summary (an integer) does not match str.
        assert_eq!(
            score_node(&json!({"responses": {}, "summary": 3}), &r.operation),
            0.5
        );
    }

    #[test]
    fn zero_expected_keys_present_scores_one() {
        let row = RubricRow::new(&[], &[("a", ValueType::Str)]);
        assert_eq!(score_node(&json!({"other": 1}), &row), 1.0);
    }

    #[test]
    fn info_examples() {
        let r = QualityRubric::default();
        let full = doc(json!({"swagger": "2.0", "paths": {}, "info": {
            "title": "t", "description": "d", "termsOfService": "x",
            "contact": {}, "license": {}, "version": "1"}}));
        assert_eq!(score_info(&full, &r), 1.0);
        let no_title = doc(json!({"swagger": "2.0", "paths": {}, "info": {"version": "1"}}));
        assert_eq!(score_info(&no_title, &r), 0.0);
        let contact_str = doc(json!({"swagger": "2.0", "paths": {},
            "info": {"title": "t", "version": "1", "contact": "me"}}));
        assert!((score_info(&contact_str, &r) - 2.0 / 3.0).abs() < 1e-12);
        let absent = doc(json!({"swagger": "2.0", "paths": {}}));
        assert_eq!(score_info(&absent, &r), 0.0);
    }

    fn perfect_op() -> Value {
        json!({"summary": "s", "responses": {"200": {"description": "OK"}}})
    }
    fn half_op() -> Value {
        json!({"summary": 1, "responses": {"200": {"description": "OK"}}})
    }
    fn zero_op() -> Value {
        json!({"summary": "s"})
    }

    #[test]
    fn paths_examples() {
        let r = QualityRubric::default();
        let one = doc(json!({"swagger": "2.0", "paths": {"/a": {"get": perfect_op()}}}));
        assert_eq!(score_paths(&one, &r), 1.0);

        let two = doc(json!({"swagger": "2.0", "paths": {
            "/a": {"get": perfect_op()}, "/b": {"get": zero_op()}}}));
        assert_eq!(score_paths(&two, &r), 0.5);

        let nested = doc(json!({"swagger": "2.0", "paths": {
            "/a": {"get": perfect_op(), "post": half_op()}, "/b": {"get": zero_op()}}}));
        assert!((score_paths(&nested, &r) - 0.375).abs() < 1e-12);

        let empty = doc(json!({"swagger": "2.0", "paths": {}}));
        assert_eq!(score_paths(&empty, &r), 0.0);
    }

    #[test]
    fn undescribed_responses_score_zero() {
        let r = QualityRubric::default();
        assert_eq!(score_operation(&json!({"responses": {"200": {}}}), &r), 0.0);
    }

    #[test]
    fn spec_mixing() {
        let r = QualityRubric::default();
        assert_eq!(combine_scores(1.0, 1.0, &r), 1.0);
        assert!((combine_scores(1.0, 0.0, &r) - 0.7).abs() < 1e-12);
        assert!((combine_scores(0.5, 1.0, &r) - 0.65).abs() < 1e-12);
        let d = doc(json!({"swagger": "2.0", "info": {"title": "t", "version": "1"},
            "paths": {"/a": {"get": perfect_op()}}}));
        assert_eq!(score_spec(&d, &r), 1.0);
    }

    #[test]
    fn rubric_file_overrides() {
        let text = r#"{"rows": [{"parents": ["info"], "required": ["title"],
                        "expected": {"title": "str"}}], "lambda_paths": 0.5, "lambda_info": 0.5}"#;
        let r = QualityRubric::from_json(text).unwrap();
        assert_eq!(r.info.required.len(), 1);
        assert_eq!(r.operation, QualityRubric::default().operation);
        assert_eq!(r.lambda_paths, 0.5);

        let bad = r#"{"rows": [], "lambda_paths": 0.9, "lambda_info": 0.3}"#;
        assert!(matches!(QualityRubric::from_json(bad), Err(RubricError::Invalid(_))));
        let not_subset = r#"{"rows": [{"parents": ["get"], "required": ["x"], "expected": {}}]}"#;
        assert!(QualityRubric::from_json(not_subset).is_err());
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(json!("s")),
            Just(json!(1)),
            Just(json!([])),
            Just(json!({})),
            Just(json!(true)),
        ]
    }

    proptest! {
        #[test]
        fn spec_score_in_unit_interval(
            info in proptest::collection::btree_map("(title|version|contact|license|x)", arb_value(), 0..5),
            ops in proptest::collection::vec(
                proptest::collection::btree_map("(summary|responses|tags|parameters|deprecated)", arb_value(), 0..5), 0..4)
        ) {
            let mut paths = serde_json::Map::new();
            for (i, op) in ops.into_iter().enumerate() {
                paths.insert(format!("/p{i}"), json!({"get": op}));
            }
            let d = doc(json!({"swagger": "2.0", "info": info, "paths": paths}));
            let s = score_spec(&d, &QualityRubric::default());
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn adding_a_well_typed_key_never_lowers_the_score(
            extra in proptest::collection::btree_map("(description|termsOfService|contact|license)", arb_value(), 0..4),
            add in "(description|termsOfService)"
        ) {
            let r = QualityRubric::default();
            let mut node = json!({"title": "t", "version": "v"});
            for (k, v) in extra { if k != add { node[k] = v; } }
            let before = score_node(&node, &r.info);
            node[add] = json!("text");
            prop_assert!(score_node(&node, &r.info) >= before);
        }
    }
}
