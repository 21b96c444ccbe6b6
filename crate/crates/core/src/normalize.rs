//! Surface-string normalization shared by synonym collision detection,
//! n-gram extraction and mention matching.

use unicode_normalization::UnicodeNormalization;

/// NFKC, lower-case, collapse whitespace runs to a single space, trim.
pub fn normalize(s: &str) -> String {
    let folded: String = s.nfkc().flat_map(char::to_lowercase).collect();
    collapse_whitespace(&folded)
}

/// Collapse runs of whitespace into single spaces and trim both ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
