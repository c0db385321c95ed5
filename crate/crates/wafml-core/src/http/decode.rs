//! Single-pass percent-decoding with a Latin-1 fallback.

/// Decodes `%XX` escapes in one pass. Invalid escapes stay literal.
///
/// One pass only: "%2527" becomes "%27", never "'". Double-encoded payloads
/// are left for the detectors to flag.
pub fn percent_decode(text: &str) -> String {
    decode_inner(text, false)
}

/// Like [`percent_decode`], additionally mapping literal `+` to space.
///
/// Applies to query/body parameter values only; a decoded `%2B` stays `+`.
pub fn percent_decode_plus(text: &str) -> String {
    decode_inner(text, true)
}

fn decode_inner(text: &str, plus_as_space: bool) -> String {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' => match (hex_val(bytes.get(i + 1)), hex_val(bytes.get(i + 2))) {
                (Some(hi), Some(lo)) => {
                    out.push(hi << 4 | lo);
                    i += 3;
                }
                _ => {
                    out.push(b'%');
                    i += 1;
                }
            },
            b'+' if plus_as_space => {
                out.push(b' ');
                i += 1;
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    bytes_to_string(out)
}

fn hex_val(b: Option<&u8>) -> Option<u8> {
    b.and_then(|&b| (b as char).to_digit(16)).map(|v| v as u8)
}

/// UTF-8 when valid, otherwise Latin-1 (every byte maps to a char).
///
/// Dataset payloads mix UTF-8 with bare high bytes like %F3; lossy
/// replacement would merge distinct bytes into U+FFFD and distort n-grams.
pub fn bytes_to_string(bytes: Vec<u8>) -> String {
    match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.as_bytes().iter().map(|&b| b as char).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_escapes() {
        assert_eq!(percent_decode("a%27b"), "a'b");
        assert_eq!(percent_decode("%3Cscript%3E"), "<script>");
        assert_eq!(percent_decode("no-escapes"), "no-escapes");
    }

    #[test]
    fn single_pass_leaves_double_encoding() {
        assert_eq!(percent_decode("%2527"), "%27");
        assert_eq!(percent_decode("%252527"), "%2527");
    }

    #[test]
    fn invalid_escapes_stay_literal() {
        assert_eq!(percent_decode("%"), "%");
        assert_eq!(percent_decode("%2"), "%2");
        assert_eq!(percent_decode("%zz"), "%zz");
        assert_eq!(percent_decode("100%"), "100%");
    }

    #[test]
    fn plus_is_space_only_when_asked() {
        assert_eq!(percent_decode_plus("a+b"), "a b");
        assert_eq!(percent_decode("a+b"), "a+b");
        // %2B decodes to '+' and is not re-mapped to space.
        assert_eq!(percent_decode_plus("a%2Bb"), "a+b");
    }

    #[test]
    fn latin1_fallback_for_non_utf8_bytes() {
        // 0xF3 alone is invalid UTF-8; Latin-1 maps it to ó.
        assert_eq!(percent_decode("Ram%F3n"), "Ramón");
        // Valid UTF-8 sequences pass through unchanged.
        assert_eq!(percent_decode("Ram%C3%B3n"), "Ramón");
    }

    #[test]
    fn case_insensitive_hex() {
        assert_eq!(percent_decode("%3c%3E"), "<>");
    }
}
