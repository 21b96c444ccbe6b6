//! Text templates with `{{name}}` placeholders.
//!
//! A template file starts with a `version: <tag>` line; the rest is the body.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    version: String,
    body: String,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(body: &str) -> Result<Vec<Piece<'_>>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find("{{") {
        out.push(Piece::Text(&rest[..open]));
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| Error::Template("unterminated `{{`".into()))?;
        let name = after[..close].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(Error::Template(format!("bad placeholder `{{{{{name}}}}}`")));
        }
        out.push(Piece::Slot(name));
        rest = &after[close + 2..];
    }
    out.push(Piece::Text(rest));
    Ok(out)
}

impl PromptTemplate {
    pub fn new(version: impl Into<String>, body: impl Into<String>) -> Result<Self> {
        let t = Self {
            version: version.into(),
            body: body.into(),
        };
        pieces(&t.body)?;
        Ok(t)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let version = first
            .strip_prefix("version:")
            .ok_or_else(|| Error::Template("first line must be `version: <tag>`".into()))?
            .trim();
        if version.is_empty() {
            return Err(Error::Template("empty version tag".into()));
        }
        Self::new(version, body)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for p in pieces(&self.body).expect("validated at construction") {
            if let Piece::Slot(n) = p {
                if !seen.contains(&n) {
                    seen.push(n);
                }
            }
        }
        seen
    }

    /// Byte offset of the first `{{name}}`.
    pub fn position_of(&self, name: &str) -> Option<usize> {
        let mut offset = 0;
        for p in pieces(&self.body).expect("validated at construction") {
            match p {
                Piece::Text(t) => offset += t.len(),
                Piece::Slot(n) if n == name => return Some(offset),
                Piece::Slot(n) => offset += n.len() + 4,
            }
        }
        None
    }

    /// Substitutes every placeholder in one pass; substituted values are not
    /// rescanned. Unknown placeholders are an error.
    pub fn render(&self, values: &[(&str, String)]) -> Result<String> {
        let map: HashMap<&str, &str> = values.iter().map(|(k, v)| (*k, v.as_str())).collect();
        let mut out = String::with_capacity(self.body.len() * 2);
        for p in pieces(&self.body).expect("validated at construction") {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(n) => out.push_str(
                    map.get(n)
                        .ok_or_else(|| Error::Template(format!("no value for `{{{{{n}}}}}`")))?,
                ),
            }
        }
        Ok(out)
    }
}
