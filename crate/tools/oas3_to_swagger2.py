#!/usr/bin/env python3
"""Back-convert OpenAPI 3.0 documents that originated as Swagger 2.0 into Swagger 2.0.

The `openapi-directory` npm package ships the APIs.guru corpus after converting
every document to OpenAPI 3.0; `info.x-origin` still records the original
format. This script undoes the structural part of that conversion for documents
whose origin was Swagger 2.0:

  components.schemas     -> definitions
  components.parameters  -> parameters
  components.responses   -> responses
  requestBody            -> `in: body` parameter (or formData parameters)
  response content       -> response `schema`, `produces`
  servers[0]             -> host / basePath / schemes

Usage:
  oas3_to_swagger2.py <openapi-directory/package/api> <out-dir>
"""

import copy
import json
import os
import sys
from urllib.parse import urlparse

METHODS = ["get", "put", "post", "delete", "options", "head", "patch"]
REF_MAP = {
    "#/components/schemas/": "#/definitions/",
    "#/components/parameters/": "#/parameters/",
    "#/components/responses/": "#/responses/",
}
FORM_TYPES = ("application/x-www-form-urlencoded", "multipart/form-data")
PARAM_SCHEMA_KEYS = ("type", "format", "items", "enum", "default", "minimum", "maximum",
                     "pattern", "maxLength", "minLength", "collectionFormat")


def rewrite_refs(node):
    if isinstance(node, dict):
        out = {}
        for k, v in node.items():
            if k == "$ref" and isinstance(v, str):
                for old, new in REF_MAP.items():
                    if v.startswith(old):
                        v = new + v[len(old):]
                out[k] = v
            elif k in ("nullable", "example", "examples", "xml") and not isinstance(v, dict):
                continue
            else:
                out[k] = rewrite_refs(v)
        return out
    if isinstance(node, list):
        return [rewrite_refs(v) for v in node]
    return node


def convert_parameter(p):
    if "$ref" in p:
        return rewrite_refs(p)
    out = {k: p[k] for k in ("name", "in", "description", "required") if k in p}
    schema = p.get("schema") or {}
    if "$ref" in schema:
        out["type"] = "string"
    for k in PARAM_SCHEMA_KEYS:
        if k in schema:
            out[k] = rewrite_refs(schema[k])
    if out.get("in") == "cookie":
        out["in"] = "header"
    return out


def deref(node, components, section):
    if isinstance(node, dict) and "$ref" in node:
        name = node["$ref"].split("/")[-1]
        return components.get(section, {}).get(name, {})
    return node


def convert_request_body(body, components):
    body = deref(body, components, "requestBodies")
    content = body.get("content") or {}
    consumes = list(content.keys())
    params = []
    form = [t for t in consumes if t in FORM_TYPES]
    if form:
        schema = deref(content[form[0]].get("schema") or {}, components, "schemas")
        required = set(schema.get("required") or [])
        for name, prop in (schema.get("properties") or {}).items():
            p = {"name": name, "in": "formData", "required": name in required}
            if isinstance(prop, dict):
                if "description" in prop:
                    p["description"] = prop["description"]
                for k in PARAM_SCHEMA_KEYS:
                    if k in prop:
                        p[k] = rewrite_refs(prop[k])
                if prop.get("format") == "binary":
                    p["type"] = "file"
                    p.pop("format", None)
            params.append(p)
    elif content:
        media = content[consumes[0]]
        p = {"name": body.get("x-body-name", "body"), "in": "body",
             "schema": rewrite_refs(media.get("schema") or {})}
        if "description" in body:
            p["description"] = body["description"]
        if "required" in body:
            p["required"] = body["required"]
        params.append(p)
    return params, consumes


def convert_response(r):
    if "$ref" in r:
        return rewrite_refs(r), []
    out = {"description": r.get("description", "")}
    content = r.get("content") or {}
    produces = list(content.keys())
    for media in content.values():
        if isinstance(media, dict) and "schema" in media:
            out["schema"] = rewrite_refs(media["schema"])
            break
    if "headers" in r:
        out["headers"] = {
            k: {kk: vv for kk, vv in (v.get("schema") or {}).items() if kk in PARAM_SCHEMA_KEYS}
            | ({"description": v["description"]} if "description" in v else {})
            for k, v in r["headers"].items() if isinstance(v, dict)
        }
    return out, produces


def convert_operation(op, components):
    out = {}
    for k in ("tags", "summary", "description", "externalDocs", "operationId", "deprecated"):
        if k in op:
            out[k] = copy.deepcopy(op[k])
    if "security" in op:
        out["security"] = copy.deepcopy(op["security"])
    params = [convert_parameter(p) for p in op.get("parameters") or []]
    consumes = []
    if "requestBody" in op:
        body_params, consumes = convert_request_body(op["requestBody"], components)
        params.extend(body_params)
    if params:
        out["parameters"] = params
    produces = []
    responses = {}
    for code, r in (op.get("responses") or {}).items():
        conv, prod = convert_response(r)
        responses[str(code)] = conv
        produces.extend(t for t in prod if t not in produces)
    if consumes:
        out["consumes"] = consumes
    if produces:
        out["produces"] = produces
    out["responses"] = responses
    for k, v in op.items():
        if k.startswith("x-"):
            out[k] = copy.deepcopy(v)
    return out


def convert(doc):
    components = doc.get("components") or {}
    out = {"swagger": "2.0", "info": copy.deepcopy(doc.get("info") or {})}
    servers = doc.get("servers") or []
    if servers and isinstance(servers[0], dict) and "url" in servers[0]:
        url = urlparse(servers[0]["url"])
        if url.netloc:
            out["host"] = url.netloc
        if url.path and url.path != "/":
            out["basePath"] = url.path
        if url.scheme:
            out["schemes"] = sorted({urlparse(s.get("url", "")).scheme for s in servers
                                     if isinstance(s, dict) and urlparse(s.get("url", "")).scheme})
    for k in ("tags", "externalDocs", "security"):
        if k in doc:
            out[k] = copy.deepcopy(doc[k])
    paths = {}
    for name, item in (doc.get("paths") or {}).items():
        new_item = {}
        if "parameters" in item:
            new_item["parameters"] = [convert_parameter(p) for p in item["parameters"]]
        for m in METHODS:
            if isinstance(item.get(m), dict):
                new_item[m] = convert_operation(item[m], components)
        paths[name] = new_item
    out["paths"] = paths
    if components.get("schemas"):
        out["definitions"] = rewrite_refs(components["schemas"])
    if components.get("parameters"):
        out["parameters"] = {k: convert_parameter(v) for k, v in components["parameters"].items()}
    if components.get("responses"):
        out["responses"] = {k: convert_response(v)[0] for k, v in components["responses"].items()}
    return out


def origin_is_swagger2(doc):
    origin = (doc.get("info") or {}).get("x-origin")
    if isinstance(origin, list) and origin:
        origin = origin[-1]
    return isinstance(origin, dict) and origin.get("format") == "swagger" \
        and str(origin.get("version")) == "2.0"


def main():
    src, dst = sys.argv[1], sys.argv[2]
    converted = skipped = 0
    for root, _, files in os.walk(src):
        for f in sorted(files):
            if not f.endswith(".json"):
                continue
            path = os.path.join(root, f)
            with open(path) as fh:
                doc = json.load(fh)
            if not origin_is_swagger2(doc):
                skipped += 1
                continue
            rel = os.path.relpath(path, src)
            target = os.path.join(dst, rel)
            os.makedirs(os.path.dirname(target), exist_ok=True)
            with open(target, "w") as fh:
                json.dump(convert(doc), fh, indent=1, sort_keys=True)
            converted += 1
    print(f"converted {converted}, skipped {skipped}")


if __name__ == "__main__":
    main()
