//! HTTP request parsing and model-field derivation.
//!
//! Requests arrive as raw text blocks (see [`container`]), are parsed and
//! percent-decoded once into [`HttpRequest`], and are then flattened into
//! the per-field units ([`ModelField`]) the detectors consume.

mod container;
mod decode;

pub use container::{read_container, split_container};
pub use decode::{bytes_to_string, percent_decode, percent_decode_plus};

use crate::error::{Error, Result};

/// Request methods accepted by the parser and the container scanner.
pub const METHODS: [&str; 9] = [
    "GET", "POST", "PUT", "HEAD", "DELETE", "OPTIONS", "PATCH", "TRACE", "CONNECT",
];

/// Headers dropped before one-class feature extraction: session, proxy, and
/// routing context rather than user behavior.
pub const ONECLASS_HEADER_DROP_LIST: [&str; 6] = [
    "Cookie",
    "Set-Cookie",
    "X-Forwarded-For",
    "Via",
    "Host",
    "Referer",
];

/// One raw request block as sliced out of a container file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRequest {
    /// Dataset-unique id, `<filename>:<ordinal>`.
    pub id: String,
    pub text: String,
}

/// A parsed, decoded request.
///
/// All stored strings are percent-decoded exactly once; `+` means space only
/// in query/body parameter values. `raw_text` keeps the original block so
/// encodings destroyed by decoding (e.g. `%00`) stay observable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub id: String,
    pub method: String,
    pub path: String,
    pub query_params: Vec<(String, String)>,
    pub protocol: String,
    pub headers: Vec<(String, String)>,
    /// Set iff the body matched the `name=value(&name=value)*` shape.
    pub body_params: Vec<(String, String)>,
    /// Set iff the body was non-empty and did not parse as parameters.
    pub body_raw: String,
    pub raw_text: String,
}

/// Identity of a model field, the keying used by the n-gram detector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldKey {
    Uri,
    /// Unstructured body contents.
    Body,
    /// Header name, lowercased (header matching is case-insensitive).
    Header(String),
    /// Query/body parameter name, case-sensitive.
    Param(String),
}

impl FieldKey {
    pub fn header(name: &str) -> FieldKey {
        FieldKey::Header(name.to_ascii_lowercase())
    }

    /// Wire name used in model files and config keys.
    pub fn wire_name(&self) -> String {
        match self {
            FieldKey::Uri => "URI".to_string(),
            FieldKey::Body => "BODY".to_string(),
            FieldKey::Header(name) => format!("header:{name}"),
            FieldKey::Param(name) => format!("param:{name}"),
        }
    }

    pub fn parse_wire_name(s: &str) -> Option<FieldKey> {
        match s {
            "URI" => Some(FieldKey::Uri),
            "BODY" => Some(FieldKey::Body),
            _ => {
                if let Some(name) = s.strip_prefix("header:") {
                    Some(FieldKey::header(name))
                } else {
                    s.strip_prefix("param:")
                        .map(|name| FieldKey::Param(name.to_string()))
                }
            }
        }
    }
}

/// One unit of n-gram analysis: a field identity plus its decoded contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelField {
    pub key: FieldKey,
    pub contents: String,
}

/// Parses one raw request block.
///
/// Request-line tokens: first is the method, last is the protocol iff it
/// starts with `HTTP/`, and everything between joined by spaces is the
/// target (attack URIs may contain literal spaces). Absolute-form targets
/// are stripped to their path. A header line without a colon is an error,
/// not a skip: the caller counts malformed requests.
pub fn parse_request(raw: &RawRequest) -> Result<HttpRequest> {
    let malformed = |reason: &str| Error::MalformedRequest {
        id: Some(raw.id.clone()),
        reason: reason.to_string(),
    };

    let mut lines = raw.text.lines();
    let request_line = lines.next().ok_or_else(|| malformed("empty request"))?;
    let tokens: Vec<&str> = request_line.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(malformed("missing request line"));
    }
    let method = tokens[0];
    if !METHODS.contains(&method) {
        return Err(malformed(&format!("unrecognized method {method:?}")));
    }

    let (target_tokens, protocol) = match tokens.last() {
        Some(last) if tokens.len() > 2 && last.starts_with("HTTP/") => {
            (&tokens[1..tokens.len() - 1], last.to_string())
        }
        _ => (&tokens[1..], String::new()),
    };
    if target_tokens.is_empty() {
        return Err(malformed("missing request target"));
    }
    let target = target_tokens.join(" ");
    let target = strip_absolute_form(&target);

    let (path_part, query_part) = match target.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (target, None),
    };
    let path = percent_decode(path_part);
    let query_params = query_part.map(parse_params).unwrap_or_default();

    let mut headers = Vec::new();
    let mut body_lines: Option<Vec<&str>> = None;
    for line in lines {
        match &mut body_lines {
            Some(body) => body.push(line),
            None => {
                if line.trim().is_empty() {
                    body_lines = Some(Vec::new());
                    continue;
                }
                let (name, value) = line
                    .split_once(':')
                    .ok_or_else(|| malformed(&format!("header line without colon: {line:?}")))?;
                headers.push((name.trim().to_string(), percent_decode(value.trim())));
            }
        }
    }

    let body_text = body_lines
        .map(|lines| lines.join("\n"))
        .unwrap_or_default();
    let body_text = body_text.trim_end_matches(['\r', '\n']).to_string();
    let (body_params, body_raw) = if body_text.is_empty() {
        (Vec::new(), String::new())
    } else if body_is_params(&body_text) {
        (parse_params(&body_text), String::new())
    } else {
        (Vec::new(), percent_decode(&body_text))
    };

    Ok(HttpRequest {
        id: raw.id.clone(),
        method: method.to_string(),
        path,
        query_params,
        protocol,
        headers,
        body_params,
        body_raw,
        raw_text: raw.text.clone(),
    })
}

/// Strips `scheme://host` from absolute-form targets, keeping the path.
fn strip_absolute_form(target: &str) -> &str {
    for scheme in ["http://", "https://"] {
        if target.len() >= scheme.len() && target[..scheme.len()].eq_ignore_ascii_case(scheme) {
            let rest = &target[scheme.len()..];
            return match rest.find('/') {
                Some(slash) => &rest[slash..],
                None => "/",
            };
        }
    }
    target
}

/// Splits `a=1&b=2` into decoded pairs. Split happens before decoding so
/// encoded `&`/`=` inside values survive. Empty segments are dropped; a
/// segment without `=` becomes a name with an empty value.
fn parse_params(text: &str) -> Vec<(String, String)> {
    text.split('&')
        .filter(|seg| !seg.is_empty())
        .map(|seg| match seg.split_once('=') {
            Some((name, value)) => (percent_decode(name), percent_decode_plus(value)),
            None => (percent_decode(seg), String::new()),
        })
        .collect()
}

/// `name=value(&name=value)*` shape check on the raw body: every segment
/// non-empty with `=` and a non-empty name, no newlines.
fn body_is_params(body: &str) -> bool {
    if body.contains('\n') {
        return false;
    }
    body.split('&').all(|seg| match seg.split_once('=') {
        Some((name, _)) => !name.is_empty(),
        None => false,
    })
}

/// Flattens a request into its model fields in deterministic order:
/// URI, headers, query parameters, body parameters, then unstructured body.
pub fn extract_model_fields(req: &HttpRequest) -> Vec<ModelField> {
    let mut fields = Vec::with_capacity(
        1 + req.headers.len() + req.query_params.len() + req.body_params.len() + 1,
    );
    fields.push(ModelField {
        key: FieldKey::Uri,
        contents: req.path.clone(),
    });
    for (name, value) in &req.headers {
        fields.push(ModelField {
            key: FieldKey::header(name),
            contents: value.clone(),
        });
    }
    for (name, value) in req.query_params.iter().chain(&req.body_params) {
        fields.push(ModelField {
            key: FieldKey::Param(name.clone()),
            contents: value.clone(),
        });
    }
    if !req.body_raw.is_empty() {
        fields.push(ModelField {
            key: FieldKey::Body,
            contents: req.body_raw.clone(),
        });
    }
    fields
}

/// Returns a copy with the named headers removed (case-insensitive).
pub fn filter_headers(req: &HttpRequest, drop_list: &[&str]) -> HttpRequest {
    let mut filtered = req.clone();
    filtered.headers.retain(|(name, _)| {
        !drop_list
            .iter()
            .any(|dropped| dropped.eq_ignore_ascii_case(name))
    });
    filtered
}
