//! Bag-of-words counts of expert-chosen tokens over a whole request.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::http::HttpRequest;

/// Default token list shipped with the crate.
const BUILTIN_TOKENS: &str = include_str!("../assets/lexicon.txt");

/// Ordered, immutable token list. Order defines the vector index.
#[derive(Debug, Clone)]
pub struct Lexicon {
    tokens: Vec<String>,
    /// ASCII-lowercased byte needles, parallel to `tokens`.
    needles: Vec<Vec<u8>>,
    /// Indexes of tokens matched against the pre-decoding raw text
    /// (percent escapes that decoding would destroy).
    raw_indexes: Vec<usize>,
    hash: String,
}

impl Lexicon {
    /// The expert token list shipped with the crate.
    pub fn builtin() -> &'static Lexicon {
        static BUILTIN: OnceLock<Lexicon> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            Lexicon::from_tokens(
                BUILTIN_TOKENS
                    .lines()
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect(),
            )
            .expect("built-in lexicon is valid")
        })
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Lexicon> {
        if tokens.is_empty() {
            return Err(Error::InvalidLexicon("no tokens".to_string()));
        }
        for (i, token) in tokens.iter().enumerate() {
            if token.is_empty() {
                return Err(Error::InvalidLexicon(format!("empty token at index {i}")));
            }
            if tokens[..i].contains(token) {
                return Err(Error::InvalidLexicon(format!("duplicate token {token:?}")));
            }
        }
        let needles: Vec<Vec<u8>> = tokens
            .iter()
            .map(|t| t.to_ascii_lowercase().into_bytes())
            .collect();
        let raw_indexes = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| is_raw_escape_token(t))
            .map(|(i, _)| i)
            .collect();
        let mut hasher = Sha256::new();
        for token in &tokens {
            hasher.update(token.as_bytes());
            hasher.update(b"\n");
        }
        let hash = format!("{:x}", hasher.finalize());
        Ok(Lexicon {
            tokens,
            needles,
            raw_indexes,
            hash,
        })
    }

    /// Loads a lexicon file: one token per line, order significant, empty
    /// lines skipped.
    pub fn from_file(path: &Path) -> Result<Lexicon> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = crate::http::bytes_to_string(bytes);
        Lexicon::from_tokens(
            text.lines()
                .map(|l| l.strip_suffix('\r').unwrap_or(l))
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Hex digest binding models to the token list and its order.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }
}

/// Percent escapes whose decoded form is invisible in the scan text.
fn is_raw_escape_token(token: &str) -> bool {
    token.len() == 3 && token.starts_with('%') && token[1..].bytes().all(|b| b.is_ascii_hexdigit())
}

/// Per-request token counts, parallel to the lexicon order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub request_id: String,
    pub counts: Vec<u32>,
}

/// Counts every token occurrence in the request's scan text.
///
/// The scan text is the newline-joined concatenation of: path, decoded query
/// string, retained header lines as "Name: value", and the body (decoded
/// parameters re-joined, or the raw body). Matching is case-insensitive via
/// ASCII lowercasing and counts overlapping occurrences; tokens never
/// consume each other ("||" also counts "|" twice). Raw-escape tokens like
/// "%00" are counted in the pre-decoding request text instead, because
/// decoding erases them.
pub fn extract_features(req: &HttpRequest, lex: &Lexicon) -> FeatureVector {
    let scan = scan_text(req).to_ascii_lowercase();
    let scan = scan.as_bytes();
    let raw = req.raw_text.to_ascii_lowercase();
    let raw = raw.as_bytes();

    let mut counts: Vec<u32> = lex
        .needles
        .iter()
        .map(|needle| count_overlapping(scan, needle))
        .collect();
    for &i in &lex.raw_indexes {
        counts[i] = count_overlapping(raw, &lex.needles[i]);
    }
    FeatureVector {
        request_id: req.id.clone(),
        counts,
    }
}

fn scan_text(req: &HttpRequest) -> String {
    let mut parts: Vec<String> = vec![req.path.clone()];
    if !req.query_params.is_empty() {
        parts.push(join_params(&req.query_params));
    }
    for (name, value) in &req.headers {
        parts.push(format!("{name}: {value}"));
    }
    if !req.body_params.is_empty() {
        parts.push(join_params(&req.body_params));
    } else if !req.body_raw.is_empty() {
        parts.push(req.body_raw.clone());
    }
    parts.join("\n")
}

fn join_params(params: &[(String, String)]) -> String {
    params
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join("&")
}

/// Overlapping substring count on bytes. UTF-8 is self-synchronizing, so a
/// valid needle can only match at char boundaries.
fn count_overlapping(haystack: &[u8], needle: &[u8]) -> u32 {
    if needle.is_empty() || haystack.len() < needle.len() {
        return 0;
    }
    let first = needle[0];
    let mut count = 0;
    for i in 0..=haystack.len() - needle.len() {
        if haystack[i] == first && &haystack[i..i + needle.len()] == needle {
            count += 1;
        }
    }
    count
}

/// Writes vectors as CSV for inspection: header row `id` plus the tokens,
/// then one row per vector.
pub fn write_features_csv<W: Write>(
    mut out: W,
    lex: &Lexicon,
    vectors: &[FeatureVector],
) -> std::io::Result<()> {
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain(lex.tokens.iter().map(|t| csv_escape(t)))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for v in vectors {
        let mut row = vec![csv_escape(&v.request_id)];
        row.extend(v.counts.iter().map(|c| c.to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn csv_escape(field: &str) -> String {
    if field.contains(['"', ',', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
