//! Swagger 2.0 document parsing, `$ref` resolution and endpoint corpus assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use walkdir::WalkDir;

use crate::featurize::Featurizer;

/// Maximum number of `$ref` expansions along a single schema path.
pub const REF_DEPTH_CAP: usize = 5;

// Guards against pathological inline nesting that never goes through a `$ref`.
const STRUCTURAL_DEPTH_CAP: usize = 32;

const DEFINITIONS_PREFIX: &str = "#/definitions/";
const PARAMETERS_PREFIX: &str = "#/parameters/";
const RESPONSES_PREFIX: &str = "#/responses/";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported specification version {0:?} (only Swagger 2.0 is accepted)")]
    UnsupportedVersion(String),
    #[error("document has no paths section")]
    MissingPaths,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecFormat {
    Json,
    Yaml,
}

impl SpecFormat {
    /// Picks the format from a file extension (`.json`, `.yaml`, `.yml`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(SpecFormat::Json),
            "yaml" | "yml" => Some(SpecFormat::Yaml),
            _ => None,
        }
    }
}

/// Parses bytes into a generic tree. Mapping keys of any scalar type become strings.
pub fn parse_tree(bytes: &[u8], format: SpecFormat) -> Result<Value, IngestError> {
    match format {
        SpecFormat::Json => serde_json::from_slice(bytes)
            .map_err(|e| IngestError::MalformedDocument(e.to_string())),
        SpecFormat::Yaml => {
            let yaml: serde_yaml::Value = serde_yaml::from_slice(bytes)
                .map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
            Ok(yaml_to_json(yaml))
        }
    }
}

fn yaml_to_json(value: serde_yaml::Value) -> Value {
    use serde_yaml::Value as Y;
    match value {
        Y::Null => Value::Null,
        Y::Bool(b) => Value::Bool(b),
        Y::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::from(i)
            } else if let Some(u) = n.as_u64() {
                Value::from(u)
            } else {
                n.as_f64()
                    .and_then(serde_json::Number::from_f64)
                    .map(Value::Number)
                    .unwrap_or(Value::Null)
            }
        }
        Y::String(s) => Value::String(s),
        Y::Sequence(items) => Value::Array(items.into_iter().map(yaml_to_json).collect()),
        Y::Mapping(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                out.insert(yaml_key(k), yaml_to_json(v));
            }
            Value::Object(out)
        }
        Y::Tagged(tagged) => yaml_to_json(tagged.value),
    }
}

fn yaml_key(key: serde_yaml::Value) -> String {
    use serde_yaml::Value as Y;
    match key {
        Y::String(s) => s,
        Y::Number(n) => n.to_string(),
        Y::Bool(b) => b.to_string(),
        Y::Null => "null".to_owned(),
        other => serde_json::to_string(&yaml_to_json(other)).unwrap_or_default(),
    }
}

/// A Swagger 2.0 document split into the sections the engine consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub source_id: String,
    pub swagger_version: String,
    pub info: Option<Value>,
    /// Endpoint name to path-item node. Keys always start with `/`.
    pub paths: BTreeMap<String, Value>,
    pub definitions: BTreeMap<String, Value>,
    /// Top-level reusable `parameters` section.
    pub shared_parameters: BTreeMap<String, Value>,
    /// Top-level reusable `responses` section.
    pub shared_responses: BTreeMap<String, Value>,
}

impl SpecDocument {
    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn ref_context(&self) -> RefContext<'_> {
        RefContext {
            definitions: &self.definitions,
            parameters: &self.shared_parameters,
            responses: &self.shared_responses,
        }
    }
}

/// Parses and validates a Swagger 2.0 document.
pub fn parse_spec(bytes: &[u8], format: SpecFormat) -> Result<SpecDocument, IngestError> {
    let tree = parse_tree(bytes, format)?;
    let Value::Object(mut root) = tree else {
        return Err(IngestError::MalformedDocument(
            "top-level node is not a mapping".to_owned(),
        ));
    };

    let version = match root.get("swagger") {
        Some(Value::String(s)) => s.clone(),
        // `swagger: 2.0` without quotes is a YAML float.
        Some(Value::Number(n)) => match n.as_f64() {
            Some(2.0) => "2.0".to_owned(),
            _ => n.to_string(),
        },
        Some(other) => other.to_string(),
        None => match root.get("openapi") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => "unspecified".to_owned(),
        },
    };
    if version != "2.0" {
        return Err(IngestError::UnsupportedVersion(version));
    }

    let paths = match root.remove("paths") {
        Some(Value::Object(paths)) => paths
            .into_iter()
            .filter(|(name, _)| name.starts_with('/'))
            .collect(),
        _ => return Err(IngestError::MissingPaths),
    };

    Ok(SpecDocument {
        source_id: String::new(),
        swagger_version: version,
        info: root.remove("info"),
        paths,
        definitions: object_section(root.remove("definitions")),
        shared_parameters: object_section(root.remove("parameters")),
        shared_responses: object_section(root.remove("responses")),
    })
}

fn object_section(value: Option<Value>) -> BTreeMap<String, Value> {
    match value {
        Some(Value::Object(map)) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

/// Data-model name to schema node, taken from the `definitions` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefinitionsDict {
    pub entries: BTreeMap<String, Value>,
}

impl DefinitionsDict {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Property names declared directly by a model.
    pub fn property_names(&self, model: &str) -> Vec<&str> {
        self.entries
            .get(model)
            .and_then(|schema| schema.get("properties"))
            .and_then(Value::as_object)
            .map(|props| props.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

pub fn build_definitions_dict(doc: &SpecDocument) -> DefinitionsDict {
    DefinitionsDict {
        entries: doc.definitions.clone(),
    }
}

/// Local sections a `$ref` may point into.
#[derive(Debug, Clone, Copy)]
pub struct RefContext<'a> {
    pub definitions: &'a BTreeMap<String, Value>,
    pub parameters: &'a BTreeMap<String, Value>,
    pub responses: &'a BTreeMap<String, Value>,
}

impl<'a> RefContext<'a> {
    pub fn definitions_only(definitions: &'a BTreeMap<String, Value>) -> Self {
        static EMPTY: BTreeMap<String, Value> = BTreeMap::new();
        RefContext {
            definitions,
            parameters: &EMPTY,
            responses: &EMPTY,
        }
    }

    fn lookup_section(&self, reference: &str) -> Option<&'a Value> {
        if let Some(name) = reference.strip_prefix(PARAMETERS_PREFIX) {
            self.parameters.get(&unescape_pointer(name))
        } else if let Some(name) = reference.strip_prefix(RESPONSES_PREFIX) {
            self.responses.get(&unescape_pointer(name))
        } else {
            None
        }
    }
}

fn unescape_pointer(segment: &str) -> String {
    segment.replace("~1", "/").replace("~0", "~")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HttpMethod {
    Get,
    Put,
    Post,
    Delete,
    Options,
    Head,
    Patch,
}

impl HttpMethod {
    /// All methods in rubric order.
    pub const ALL: [HttpMethod; 7] = [
        HttpMethod::Get,
        HttpMethod::Put,
        HttpMethod::Post,
        HttpMethod::Delete,
        HttpMethod::Options,
        HttpMethod::Head,
        HttpMethod::Patch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Get => "get",
            HttpMethod::Put => "put",
            HttpMethod::Post => "post",
            HttpMethod::Delete => "delete",
            HttpMethod::Options => "options",
            HttpMethod::Head => "head",
            HttpMethod::Patch => "patch",
        }
    }

    pub fn parse(key: &str) -> Option<Self> {
        HttpMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(key))
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A schema after `$ref` expansion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    /// Definition name when this node came from a `#/definitions/...` reference.
    pub model: Option<String>,
    pub properties: Vec<(String, Schema)>,
    /// Reference that could not be followed (external, unknown, cyclic or past the cap).
    pub unresolved: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub location: Option<String>,
    pub description: Option<String>,
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub code: String,
    pub description: Option<String>,
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Operation {
    pub summary: Option<String>,
    pub description: Option<String>,
    pub parameters: Vec<Parameter>,
    pub responses: Vec<Response>,
}

/// One path of a document with its operations and all local references expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointTree {
    pub endpoint_name: String,
    pub operations: BTreeMap<HttpMethod, Operation>,
    pub unresolved_refs: Vec<String>,
    pub cyclic_refs: Vec<String>,
}

pub fn extract_endpoint_trees(doc: &SpecDocument, defs: &DefinitionsDict) -> Vec<EndpointTree> {
    let ctx = RefContext {
        definitions: &defs.entries,
        parameters: &doc.shared_parameters,
        responses: &doc.shared_responses,
    };
    doc.paths
        .iter()
        .map(|(name, item)| extract_endpoint_tree(name, item, ctx))
        .collect()
}

/// Builds the tree for a single path item. Never fails: anything that cannot be
/// interpreted is skipped and any reference that cannot be followed is recorded.
pub fn extract_endpoint_tree(name: &str, path_item: &Value, ctx: RefContext<'_>) -> EndpointTree {
    let mut resolver = Resolver {
        ctx,
        stack: Vec::new(),
        unresolved: BTreeSet::new(),
        cyclic: BTreeSet::new(),
    };
    let mut operations = BTreeMap::new();
    let shared: Vec<Value> = path_item
        .get("parameters")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();

    if let Some(item) = path_item.as_object() {
        for (key, node) in item {
            let Some(method) = HttpMethod::parse(key) else {
                continue;
            };
            if !node.is_object() {
                continue;
            }
            operations.insert(method, resolver.operation(node, &shared));
        }
    }

    EndpointTree {
        endpoint_name: name.to_owned(),
        operations,
        unresolved_refs: resolver.unresolved.into_iter().collect(),
        cyclic_refs: resolver.cyclic.into_iter().collect(),
    }
}

struct Resolver<'a> {
    ctx: RefContext<'a>,
    stack: Vec<String>,
    unresolved: BTreeSet<String>,
    cyclic: BTreeSet<String>,
}

impl<'a> Resolver<'a> {
    fn operation(&mut self, node: &Value, shared_params: &[Value]) -> Operation {
        let text = |key: &str| {
            node.get(key)
                .and_then(Value::as_str)
                .map(str::to_owned)
                .filter(|s| !s.trim().is_empty())
        };
        let mut parameters: Vec<Parameter> = Vec::new();
        let own = node
            .get("parameters")
            .and_then(Value::as_array)
            .map(Vec::as_slice)
            .unwrap_or_default();
        for raw in own {
            if let Some(p) = self.parameter(raw) {
                parameters.push(p);
            }
        }
        for raw in shared_params {
            if let Some(p) = self.parameter(raw) {
                let overridden = parameters
                    .iter()
                    .any(|q| q.name == p.name && q.location == p.location);
                if !overridden {
                    parameters.push(p);
                }
            }
        }

        let mut responses = Vec::new();
        if let Some(map) = node.get("responses").and_then(Value::as_object) {
            for (code, raw) in map {
                if code.starts_with("x-") {
                    continue;
                }
                let raw = self.deref_section(raw);
                let Some(raw) = raw else { continue };
                responses.push(Response {
                    code: code.clone(),
                    description: raw
                        .get("description")
                        .and_then(Value::as_str)
                        .map(str::to_owned),
                    schema: raw.get("schema").map(|s| self.schema(s, 0, 0)),
                });
            }
        }

        Operation {
            summary: text("summary"),
            description: text("description"),
            parameters,
            responses,
        }
    }

    fn parameter(&mut self, raw: &Value) -> Option<Parameter> {
        let raw = self.deref_section(raw)?;
        let name = raw.get("name").and_then(Value::as_str)?.to_owned();
        Some(Parameter {
            name,
            location: raw.get("in").and_then(Value::as_str).map(str::to_owned),
            description: raw
                .get("description")
                .and_then(Value::as_str)
                .map(str::to_owned),
            schema: raw.get("schema").map(|s| self.schema(s, 0, 0)),
        })
    }

    /// Follows a `#/parameters/...` or `#/responses/...` reference, if any.
    fn deref_section<'v>(&mut self, raw: &'v Value) -> Option<&'v Value>
    where
        'a: 'v,
    {
        match raw.get("$ref").and_then(Value::as_str) {
            None => Some(raw),
            Some(reference) => match self.ctx.lookup_section(reference) {
                Some(target) => Some(target),
                None => {
                    self.unresolved.insert(reference.to_owned());
                    None
                }
            },
        }
    }

    fn schema(&mut self, node: &Value, ref_depth: usize, depth: usize) -> Schema {
        if depth >= STRUCTURAL_DEPTH_CAP {
            return Schema::default();
        }
        if let Some(reference) = node.get("$ref").and_then(Value::as_str) {
            let Some(model) = reference.strip_prefix(DEFINITIONS_PREFIX).map(unescape_pointer)
            else {
                self.unresolved.insert(reference.to_owned());
                return Schema {
                    unresolved: Some(reference.to_owned()),
                    ..Schema::default()
                };
            };
            let Some(target) = self.ctx.definitions.get(&model) else {
                self.unresolved.insert(reference.to_owned());
                return Schema {
                    unresolved: Some(reference.to_owned()),
                    ..Schema::default()
                };
            };
            if self.stack.contains(&model) {
                self.cyclic.insert(model.clone());
                return Schema {
                    model: Some(model),
                    unresolved: Some(reference.to_owned()),
                    ..Schema::default()
                };
            }
            if ref_depth >= REF_DEPTH_CAP {
                return Schema {
                    model: Some(model),
                    unresolved: Some(reference.to_owned()),
                    ..Schema::default()
                };
            }
            self.stack.push(model.clone());
            let mut resolved = self.schema(target, ref_depth + 1, depth + 1);
            self.stack.pop();
            resolved.model = Some(model);
            return resolved;
        }

        // Arrays are transparent: an array of Artist reads as Artist.
        if let Some(items) = node.get("items") {
            if items.is_object() {
                return self.schema(items, ref_depth, depth + 1);
            }
        }

        let mut out = Schema::default();
        if let Some(parts) = node.get("allOf").and_then(Value::as_array) {
            for part in parts {
                let sub = self.schema(part, ref_depth, depth + 1);
                if out.model.is_none() {
                    out.model = sub.model.clone();
                }
                out.properties.extend(sub.properties);
            }
        }
        if let Some(props) = node.get("properties").and_then(Value::as_object) {
            for (name, prop) in props {
                let child = self.schema(prop, ref_depth, depth + 1);
                out.properties.push((name.clone(), child));
            }
        }
        out
    }
}

/// The stored, self-contained source of an endpoint: its path item and every
/// definition it reaches. Used for previews and to generate benchmark queries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EndpointFragment {
    pub path_item: Value,
    #[serde(default)]
    pub definitions: BTreeMap<String, Value>,
}

impl EndpointFragment {
    /// Copies the path item with `#/parameters` and `#/responses` references inlined,
    /// together with the transitive closure of referenced definitions.
    pub fn from_document(doc: &SpecDocument, name: &str) -> Option<Self> {
        let item = doc.paths.get(name)?;
        let ctx = doc.ref_context();
        let path_item = inline_sections(item, ctx, 0);
        let mut pending = Vec::new();
        collect_definition_refs(&path_item, &mut pending);
        let mut definitions = BTreeMap::new();
        while let Some(model) = pending.pop() {
            if definitions.contains_key(&model) {
                continue;
            }
            if let Some(schema) = doc.definitions.get(&model) {
                collect_definition_refs(schema, &mut pending);
                definitions.insert(model, schema.clone());
            }
        }
        Some(EndpointFragment {
            path_item,
            definitions,
        })
    }

    pub fn tree(&self, name: &str) -> EndpointTree {
        extract_endpoint_tree(name, &self.path_item, RefContext::definitions_only(&self.definitions))
    }
}

fn inline_sections(node: &Value, ctx: RefContext<'_>, depth: usize) -> Value {
    if depth > STRUCTURAL_DEPTH_CAP {
        return node.clone();
    }
    match node {
        Value::Object(map) => {
            if let Some(target) = map
                .get("$ref")
                .and_then(Value::as_str)
                .and_then(|r| ctx.lookup_section(r))
            {
                return inline_sections(target, ctx, depth + 1);
            }
            Value::Object(
                map.iter()
                    .map(|(k, v)| (k.clone(), inline_sections(v, ctx, depth + 1)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|v| inline_sections(v, ctx, depth + 1))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn collect_definition_refs(node: &Value, out: &mut Vec<String>) {
    match node {
        Value::Object(map) => {
            for (k, v) in map {
                if k == "$ref" {
                    if let Some(model) = v.as_str().and_then(|r| r.strip_prefix(DEFINITIONS_PREFIX))
                    {
                        out.push(unescape_pointer(model));
                    }
                } else {
                    collect_definition_refs(v, out);
                }
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_definition_refs(v, out)),
        _ => {}
    }
}

/// One unique endpoint of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointRecord {
    pub endpoint_id: u32,
    pub name: String,
    /// Multiset of tree-path tokens, kept sorted.
    pub tree_tokens: Vec<String>,
    /// Multiset of keyword tokens, kept sorted.
    pub keyword_tokens: Vec<String>,
    pub raw_text: String,
    pub quality: f64,
    pub source_spec_ids: Vec<String>,
    pub fragment: EndpointFragment,
}

/// Single-writer reduction of endpoint trees into unique records keyed by name.
#[derive(Debug, Default)]
pub struct CorpusAccumulator {
    records: BTreeMap<String, EndpointRecord>,
}

impl CorpusAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&EndpointRecord> {
        self.records.get(name)
    }

    /// Adds one endpoint tree. An existing record with the same name absorbs the
    /// new tokens and text, and keeps the best quality of its contributors.
    pub fn merge(
        &mut self,
        tree: &EndpointTree,
        source: &SpecDocument,
        quality: f64,
        featurizer: &Featurizer,
    ) {
        let tree_tokens = featurizer.tree_path_tokens(tree);
        let text = featurizer.extract_text(tree);
        let keyword_tokens = featurizer.keyword_tokens(&text);
        self.merge_parts(
            &tree.endpoint_name,
            tree_tokens,
            keyword_tokens,
            text,
            quality,
            &source.source_id,
            || EndpointFragment::from_document(source, &tree.endpoint_name).unwrap_or_default(),
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn merge_parts(
        &mut self,
        name: &str,
        tree_tokens: Vec<String>,
        keyword_tokens: Vec<String>,
        text: String,
        quality: f64,
        source_id: &str,
        fragment: impl FnOnce() -> EndpointFragment,
    ) {
        let quality = quality.clamp(0.0, 1.0);
        match self.records.get_mut(name) {
            Some(rec) => {
                rec.tree_tokens.extend(tree_tokens);
                rec.tree_tokens.sort_unstable();
                rec.keyword_tokens.extend(keyword_tokens);
                rec.keyword_tokens.sort_unstable();
                if !text.is_empty() {
                    if !rec.raw_text.is_empty() {
                        rec.raw_text.push(' ');
                    }
                    rec.raw_text.push_str(&text);
                }
                rec.quality = rec.quality.max(quality);
                rec.source_spec_ids.push(source_id.to_owned());
            }
            None => {
                let mut tree_tokens = tree_tokens;
                tree_tokens.sort_unstable();
                let mut keyword_tokens = keyword_tokens;
                keyword_tokens.sort_unstable();
                self.records.insert(
                    name.to_owned(),
                    EndpointRecord {
                        endpoint_id: 0,
                        name: name.to_owned(),
                        tree_tokens,
                        keyword_tokens,
                        raw_text: text,
                        quality,
                        source_spec_ids: vec![source_id.to_owned()],
                        fragment: fragment(),
                    },
                );
            }
        }
    }

    /// Finishes the reduction: ids are dense and follow lexicographic name order.
    pub fn into_records(self) -> Vec<EndpointRecord> {
        self.records
            .into_values()
            .enumerate()
            .map(|(id, mut rec)| {
                rec.endpoint_id = id as u32;
                rec
            })
            .collect()
    }
}

/// Functional form of [`CorpusAccumulator::merge`].
pub fn merge_into_corpus(
    mut acc: CorpusAccumulator,
    tree: &EndpointTree,
    source: &SpecDocument,
    quality: f64,
    featurizer: &Featurizer,
) -> CorpusAccumulator {
    acc.merge(tree, source, quality, featurizer);
    acc
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files_seen: usize,
    pub files_parsed: usize,
    pub skipped: Vec<SkippedFile>,
    pub endpoints: usize,
}

/// Lists every `.json`/`.yaml`/`.yml` file below `dir`, sorted by relative path.
pub fn discover_spec_files(dir: &Path) -> std::io::Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is not a directory", dir.display()),
        ));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(std::io::Error::other)?;
        if !entry.file_type().is_file() || SpecFormat::from_path(entry.path()).is_none() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .unwrap_or(entry.path())
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        files.push((rel, entry.into_path()));
    }
    files.sort();
    Ok(files)
}

/// Reads and parses every spec file under `dir` in parallel. Files that fail to
/// read or parse are reported, never fatal. Documents come back in path order.
pub fn load_corpus_documents(dir: &Path) -> std::io::Result<(Vec<SpecDocument>, IngestReport)> {
    let files = discover_spec_files(dir)?;
    let parsed: Vec<Result<SpecDocument, SkippedFile>> = files
        .par_iter()
        .map(|(rel, path)| {
            let skipped = |reason: String| SkippedFile {
                path: rel.clone(),
                reason,
            };
            let bytes = std::fs::read(path).map_err(|e| skipped(e.to_string()))?;
            let format = SpecFormat::from_path(path).expect("filtered by extension");
            parse_spec(&bytes, format)
                .map(|doc| doc.with_source(rel.clone()))
                .map_err(|e| skipped(e.to_string()))
        })
        .collect();

    let mut report = IngestReport {
        files_seen: files.len(),
        ..IngestReport::default()
    };
    let mut docs = Vec::new();
    for result in parsed {
        match result {
            Ok(doc) => docs.push(doc),
            Err(skip) => {
                log::warn!("skipping {}: {}", skip.path, skip.reason);
                report.skipped.push(skip);
            }
        }
    }
    report.files_parsed = docs.len();
    Ok((docs, report))
}
