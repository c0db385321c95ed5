//! Reader for files of concatenated raw HTTP requests.

use std::path::Path;

use crate::error::{Error, Result};
use crate::http::{bytes_to_string, RawRequest, METHODS};

/// Reads a container file: concatenated requests where a new request starts
/// at any line beginning with a method token plus space, after at least one
/// blank line (or at file start). Ids are `<filename>:<ordinal>`, 1-based.
pub fn read_container(path: &Path) -> Result<Vec<RawRequest>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = bytes_to_string(bytes);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(split_container(&name, &text))
}

/// Pure splitting core of [`read_container`].
///
/// Non-blank text before any method line still opens a block: it will fail
/// to parse downstream and be counted as malformed rather than vanish.
pub fn split_container(name: &str, text: &str) -> Vec<RawRequest> {
    let mut requests = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    let mut prev_blank = true;

    for line in text.lines() {
        let blank = line.trim().is_empty();
        let starts_request = prev_blank && (current.is_none() || starts_with_method(line));
        if starts_request && !blank {
            if let Some(block) = current.take() {
                requests.push(block);
            }
            current = Some(vec![line]);
        } else if let Some(block) = &mut current {
            block.push(line);
        }
        prev_blank = blank;
    }
    if let Some(block) = current {
        requests.push(block);
    }

    requests
        .into_iter()
        .enumerate()
        .map(|(i, block)| RawRequest {
            id: format!("{name}:{}", i + 1),
            text: block.join("\n").trim_end_matches(['\r', '\n']).to_string(),
        })
        .collect()
}

fn starts_with_method(line: &str) -> bool {
    METHODS
        .iter()
        .any(|m| line.len() > m.len() && line.starts_with(m) && line.as_bytes()[m.len()] == b' ')
}
