//! Knowledge-base loading, validation and in-group synonym disambiguation.
//!
//! The on-disk format is newline-delimited JSON, one concept per line:
//!
//! ```text
//! {"id":"C0012621","title":"Fluid Discharge","group":"DISO","types":["Finding"],"definitions":[],"synonyms":["Fluid Discharge","Discharge"]}
//! ```
//!
//! An optional first line `{"kb_version": "..."}` pins the version tag that
//! derived artifacts (models, tries) record. Without it the tag is derived
//! from a hash of the file contents.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::normalize::normalize;

pub type ConceptId = String;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub title: String,
    pub group: String,
    #[serde(default)]
    pub types: Vec<String>,
    #[serde(default)]
    pub definitions: Vec<String>,
    pub synonyms: Vec<String>,
}

impl Concept {
    pub fn has_definition(&self) -> bool {
        self.definitions.iter().any(|d| !d.trim().is_empty())
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<String>,
    title: Option<String>,
    group: Option<String>,
    #[serde(default)]
    types: Vec<String>,
    #[serde(default)]
    definitions: Vec<String>,
    synonyms: Option<Vec<String>>,
    kb_version: Option<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    concepts: BTreeMap<ConceptId, Concept>,
    groups: BTreeMap<String, Vec<ConceptId>>,
    version_tag: String,
}

impl KnowledgeBase {
    /// Validates and indexes a list of concepts.
    ///
    /// Exact duplicate synonyms are dropped keeping the first occurrence, and
    /// a title missing from the synonym list is prepended to it.
    pub fn from_concepts(
        concepts: impl IntoIterator<Item = Concept>,
        version_tag: impl Into<String>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for mut concept in concepts {
            validate_concept(&mut concept)?;
            if map.contains_key(&concept.id) {
                return Err(Error::DuplicateConcept(concept.id));
            }
            map.insert(concept.id.clone(), concept);
        }
        let mut groups: BTreeMap<String, Vec<ConceptId>> = BTreeMap::new();
        for c in map.values() {
            groups.entry(c.group.clone()).or_default().push(c.id.clone());
        }
        Ok(Self {
            concepts: map,
            groups,
            version_tag: version_tag.into(),
        })
    }

    pub fn version_tag(&self) -> &str {
        &self.version_tag
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn concept(&self, id: &str) -> Result<&Concept> {
        self.get(id).ok_or_else(|| Error::UnknownConcept(id.to_owned()))
    }

    /// Concepts in ascending id order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn groups(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.groups.contains_key(group)
    }

    /// Ids of the concepts whose group equals `group`, in ascending order.
    pub fn candidates_for_group(&self, group: &str) -> Result<&[ConceptId]> {
        self.groups
            .get(group)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownGroup(group.to_owned()))
    }

    /// Writes the knowledge base in the line-delimited format, header first.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        let header = serde_json::json!({ "kb_version": self.version_tag });
        writeln!(out, "{header}")?;
        for c in self.concepts.values() {
            let line = serde_json::to_string(c).map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn validate_concept(c: &mut Concept) -> Result<()> {
    if c.id.trim().is_empty() {
        return Err(Error::InvalidArgument("concept id must be non-empty".into()));
    }
    if c.group.trim().is_empty() {
        return Err(Error::InvalidArgument(format!(
            "concept `{}` has an empty group",
            c.id
        )));
    }
    if c.synonyms.is_empty() {
        return Err(Error::EmptySynonyms(c.id.clone()));
    }
    let mut seen = HashSet::new();
    c.synonyms.retain(|s| seen.insert(s.clone()));
    if !c.synonyms.contains(&c.title) {
        c.synonyms.insert(0, c.title.clone());
    }
    Ok(())
}

/// Parses the line-delimited KB format from a string.
///
/// `origin` is only used for error messages.
pub fn parse_kb(text: &str, origin: &Path) -> Result<KnowledgeBase> {
    let malformed = |line: usize, message: String| Error::MalformedRecord {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut version_tag = None;
    let mut concepts = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| malformed(line_no, e.to_string()))?;
        if raw.id.is_none() {
            match raw.kb_version {
                Some(tag) if concepts.is_empty() && version_tag.is_none() => {
                    version_tag = Some(tag);
                    continue;
                }
                _ => return Err(malformed(line_no, "missing field `id`".into())),
            }
        }
        if !raw.extra.is_empty() {
            let names: Vec<_> = raw.extra.keys().map(String::as_str).collect();
            log::warn!(
                "{}:{line_no}: ignoring unknown field(s) {}",
                origin.display(),
                names.join(", ")
            );
        }
        let id = raw.id.unwrap_or_default();
        let title = raw
            .title
            .ok_or_else(|| malformed(line_no, "missing field `title`".into()))?;
        let group = raw
            .group
            .ok_or_else(|| malformed(line_no, "missing field `group`".into()))?;
        let synonyms = raw
            .synonyms
            .ok_or_else(|| malformed(line_no, "missing field `synonyms`".into()))?;
        if id.trim().is_empty() || group.trim().is_empty() {
            return Err(malformed(line_no, "`id` and `group` must be non-empty".into()));
        }
        if synonyms.is_empty() {
            return Err(Error::EmptySynonyms(id));
        }
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateConcept(id));
        }
        concepts.push(Concept {
            id,
            title,
            group,
            types: raw.types,
            definitions: raw.definitions,
            synonyms,
        });
    }
    let version_tag = version_tag.unwrap_or_else(|| {
        let digest = Sha256::digest(text.as_bytes());
        format!("sha256:{}", &hex::encode(digest)[..16])
    });
    KnowledgeBase::from_concepts(concepts, version_tag)
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kb(&text, path)
}

/// A synonym removed from a concept because it collides with other concepts
/// of the same group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSynonym {
    pub synonym: String,
    pub collides_with: Vec<ConceptId>,
}

/// A knowledge base whose synonym sets have been stripped of in-group
/// ambiguous surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedKB {
    base: KnowledgeBase,
    kept: BTreeMap<ConceptId, Vec<String>>,
    dropped: BTreeMap<ConceptId, Vec<DroppedSynonym>>,
    fallback: BTreeSet<ConceptId>,
}

/// Removes every synonym whose normalized form names two or more concepts of
/// the same semantic group. Collisions across groups are left alone.
///
/// A concept that would lose all of its synonyms keeps its title and is
/// listed in [`PrunedKB::fallback_concepts`].
pub fn prune_ambiguous_synonyms(kb: &KnowledgeBase) -> PrunedKB {
    // per concept: (normalized, first surface) after in-concept dedup
    let mut surfaces: BTreeMap<&str, Vec<(String, &str)>> = BTreeMap::new();
    for c in kb.concepts() {
        let title_norm = normalize(&c.title);
        let mut seen = HashSet::new();
        let list = c
            .synonyms
            .iter()
            .filter_map(|s| {
                let n = normalize(s);
                // the title is the representative surface of its own form
                let surface = if n == title_norm { &c.title } else { s };
                seen.insert(n.clone()).then_some((n, surface.as_str()))
            })
            .collect();
        surfaces.insert(c.id.as_str(), list);
    }

    let mut kept = BTreeMap::new();
    let mut dropped = BTreeMap::new();
    let mut fallback = BTreeSet::new();

    for ids in kb.groups.values() {
        let mut owners: HashMap<&str, Vec<&str>> = HashMap::new();
        for id in ids {
            for (n, _) in &surfaces[id.as_str()] {
                owners.entry(n.as_str()).or_default().push(id.as_str());
            }
        }
        for id in ids {
            let mut keep = Vec::new();
            let mut drop = Vec::new();
            for (n, surface) in &surfaces[id.as_str()] {
                let o = &owners[n.as_str()];
                if o.len() >= 2 {
                    drop.push(DroppedSynonym {
                        synonym: (*surface).to_owned(),
                        collides_with: o
                            .iter()
                            .filter(|other| **other != id.as_str())
                            .map(|s| (*s).to_owned())
                            .collect(),
                    });
                } else {
                    keep.push((*surface).to_owned());
                }
            }
            if keep.is_empty() {
                let concept = &kb.concepts[id];
                keep.push(concept.title.clone());
                fallback.insert(id.clone());
            }
            kept.insert(id.clone(), keep);
            dropped.insert(id.clone(), drop);
        }
    }

    PrunedKB {
        base: kb.clone(),
        kept,
        dropped,
        fallback,
    }
}

impl PrunedKB {
    pub fn base(&self) -> &KnowledgeBase {
        &self.base
    }

    pub fn version_tag(&self) -> &str {
        self.base.version_tag()
    }

    pub fn kept(&self, id: &str) -> Result<&[String]> {
        self.kept
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownConcept(id.to_owned()))
    }

    pub fn dropped(&self, id: &str) -> Result<&[DroppedSynonym]> {
        self.dropped
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownConcept(id.to_owned()))
    }

    pub fn kept_map(&self) -> &BTreeMap<ConceptId, Vec<String>> {
        &self.kept
    }

    pub fn dropped_map(&self) -> &BTreeMap<ConceptId, Vec<DroppedSynonym>> {
        &self.dropped
    }

    /// Concepts whose every synonym was ambiguous and which retain only
    /// their title.
    pub fn fallback_concepts(&self) -> &BTreeSet<ConceptId> {
        &self.fallback
    }

    pub fn is_fallback(&self, id: &str) -> bool {
        self.fallback.contains(id)
    }

    pub fn candidates_for_group(&self, group: &str) -> Result<&[ConceptId]> {
        self.base.candidates_for_group(group)
    }

    /// All kept synonyms in ascending concept-id order.
    pub fn all_kept(&self) -> impl Iterator<Item = &str> {
        self.kept.values().flatten().map(String::as_str)
    }

    /// A knowledge base whose synonym lists are the kept sets. Writing this
    /// out produces the "pruned KB" file consumed by downstream commands.
    ///
    /// A concept whose title was pruned takes its first kept synonym as
    /// title, so the title never reintroduces an ambiguous surface.
    pub fn to_knowledge_base(&self) -> KnowledgeBase {
        let concepts = self.base.concepts().map(|c| {
            let kept = self.kept[&c.id].clone();
            let title = if kept.contains(&c.title) {
                c.title.clone()
            } else {
                kept[0].clone()
            };
            Concept {
                title,
                synonyms: kept,
                ..c.clone()
            }
        });
        KnowledgeBase::from_concepts(concepts, self.base.version_tag.clone())
            .expect("kept sets of a valid knowledge base are valid")
    }

    /// Line-delimited report of everything pruning removed.
    pub fn write_report(&self, mut out: impl Write) -> std::io::Result<()> {
        for (id, drops) in &self.dropped {
            if drops.is_empty() && !self.fallback.contains(id) {
                continue;
            }
            let line = serde_json::json!({
                "id": id,
                "dropped": drops,
                "fallback_title": self.fallback.contains(id),
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concept(id: &str, group: &str, syns: &[&str]) -> Concept {
        Concept {
            id: id.into(),
            title: syns[0].into(),
            group: group.into(),
            types: vec![],
            definitions: vec![],
            synonyms: syns.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn loads_minimal_record() {
        let text = r#"{"id":"C1","title":"Aortic Stenosis","group":"DISO","synonyms":["Aortic Stenosis","AS"]}"#;
        let kb = parse_kb(text, Path::new("mem")).unwrap();
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.groups().collect::<Vec<_>>(), ["DISO"]);
    }

    #[test]
    fn rejects_duplicate_id() {
        let text = concat!(
            r#"{"id":"C1","title":"a","group":"G","synonyms":["a"]}"#,
            "\n",
            r#"{"id":"C1","title":"b","group":"G","synonyms":["b"]}"#
        );
        assert!(matches!(
            parse_kb(text, Path::new("mem")),
            Err(Error::DuplicateConcept(id)) if id == "C1"
        ));
    }

    #[test]
    fn reports_line_of_malformed_record() {
        let text = concat!(
            r#"{"id":"C1","title":"a","group":"G","synonyms":["a"]}"#,
            "\n",
            r#"{"id":"C2","title":"b","group":"G"}"#
        );
        match parse_kb(text, Path::new("mem")) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_kb("{not json", Path::new("mem")),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_empty_synonyms() {
        let text = r#"{"id":"C1","title":"a","group":"G","synonyms":[]}"#;
        assert!(matches!(
            parse_kb(text, Path::new("mem")),
            Err(Error::EmptySynonyms(_))
        ));
    }

    #[test]
    fn dedups_synonyms_and_inserts_title() {
        let text = r#"{"id":"C1","title":"T","group":"G","synonyms":["a","b","a"],"extra":1}"#;
        let kb = parse_kb(text, Path::new("mem")).unwrap();
        assert_eq!(kb.concept("C1").unwrap().synonyms, ["T", "a", "b"]);
    }

    #[test]
    fn unknown_group() {
        let kb = KnowledgeBase::from_concepts([concept("C1", "DISO", &["x"])], "v").unwrap();
        assert!(matches!(kb.candidates_for_group(""), Err(Error::UnknownGroup(_))));
    }

    #[test]
    fn identity_when_no_collisions() {
        let kb = KnowledgeBase::from_concepts(
            [
                concept("C1", "G", &["alpha", "beta"]),
                concept("C2", "G", &["gamma"]),
                concept("C3", "H", &["alpha"]),
            ],
            "v",
        )
        .unwrap();
        let p = prune_ambiguous_synonyms(&kb);
        for c in kb.concepts() {
            assert_eq!(p.kept(&c.id).unwrap(), c.synonyms.as_slice());
            assert!(p.dropped(&c.id).unwrap().is_empty());
        }
        assert!(p.fallback_concepts().is_empty());
    }

    #[test]
    fn sole_synonym_collision_falls_back_to_title() {
        // C1 = {X}, C2 = {X, Y} in one group. Collision table: "x" -> {C1, C2}.
        // C1 loses everything and keeps its title; C2 keeps Y.
        let kb = KnowledgeBase::from_concepts(
            [concept("C1", "G", &["X"]), concept("C2", "G", &["Y", "x"])],
            "v",
        )
        .unwrap();
        let p = prune_ambiguous_synonyms(&kb);
        assert_eq!(p.kept("C1").unwrap(), ["X"]);
        assert!(p.is_fallback("C1"));
        assert_eq!(p.kept("C2").unwrap(), ["Y"]);
        assert!(!p.is_fallback("C2"));
        assert_eq!(
            p.dropped("C2").unwrap(),
            [DroppedSynonym {
                synonym: "x".into(),
                collides_with: vec!["C1".into()]
            }]
        );
    }

    #[test]
    fn normalized_duplicates_within_concept_collapse() {
        let kb =
            KnowledgeBase::from_concepts([concept("C1", "G", &["Heart", "heart ", "HEART"])], "v")
                .unwrap();
        let p = prune_ambiguous_synonyms(&kb);
        assert_eq!(p.kept("C1").unwrap(), ["Heart"]);
    }

    #[test]
    fn serialization_round_trip() {
        let kb = KnowledgeBase::from_concepts(
            [concept("C1", "G", &["a", "b"]), concept("C2", "H", &["c"])],
            "release-1",
        )
        .unwrap();
        let mut buf = Vec::new();
        kb.write_to(&mut buf).unwrap();
        let back = parse_kb(std::str::from_utf8(&buf).unwrap(), Path::new("mem")).unwrap();
        assert_eq!(back, kb);
    }
}
