//! Choosing the natural-language surface that stands for a concept in a
//! generation target.

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, PrunedKB};
use crate::normalize::normalize;
use crate::tfidf::{cosine, TfidfModel};

/// Scores closer than this are treated as tied.
pub const TIE_EPSILON: f64 = 1e-12;

/// A strategy mapping `(mention, concept)` to one surface string of the
/// concept.
pub trait ConceptRepresentation {
    fn name(&self) -> &'static str;
    fn represent(&self, mention: &str, concept_id: &str) -> Result<String>;
}

/// Picks the kept synonym with the highest similarity to the mention.
///
/// `scores` must be aligned with `kept`. Scores within [`TIE_EPSILON`] of the
/// best are ties and resolve to the lexicographically smallest synonym. When
/// every score is zero the title wins if it survived pruning.
fn pick_best(kept: &[String], scores: &[f64], mention: &str, title: &str) -> String {
    let m = normalize(mention);
    if let Some(exact) = kept.iter().find(|s| normalize(s) == m) {
        return exact.clone();
    }
    let best = scores.iter().copied().fold(0.0_f64, f64::max);
    if best <= 0.0 {
        if kept.iter().any(|s| s == title) {
            return title.to_owned();
        }
        return kept.iter().min().expect("kept set is non-empty").clone();
    }
    kept.iter()
        .zip(scores)
        .filter(|(_, s)| best - **s <= TIE_EPSILON)
        .map(|(k, _)| k)
        .min()
        .expect("at least the maximum is in range")
        .clone()
}

/// The argmax-cosine synonym of `concept_id` for `mention` under the
/// character n-gram TF-IDF model.
pub fn adaptive_representation(
    pruned: &PrunedKB,
    model: &TfidfModel,
    mention: &str,
    concept_id: &str,
) -> Result<String> {
    let concept = pruned.base().concept(concept_id)?;
    let kept = pruned.kept(concept_id)?;
    let mv = model.vectorize(mention);
    let scores: Vec<f64> = kept
        .iter()
        .map(|s| cosine(&mv, &model.vectorize(s)))
        .collect();
    Ok(pick_best(kept, &scores, mention, &concept.title))
}

/// The concept's preferred title, irrespective of the mention.
pub fn static_representation(kb: &KnowledgeBase, concept_id: &str) -> Result<String> {
    Ok(kb.concept(concept_id)?.title.clone())
}

pub struct TfidfRepresentation<'a> {
    pub pruned: &'a PrunedKB,
    pub model: &'a TfidfModel,
}

impl ConceptRepresentation for TfidfRepresentation<'_> {
    fn name(&self) -> &'static str {
        "tfidf"
    }

    fn represent(&self, mention: &str, concept_id: &str) -> Result<String> {
        adaptive_representation(self.pruned, self.model, mention, concept_id)
    }
}

pub struct TitleRepresentation<'a> {
    pub kb: &'a KnowledgeBase,
}

impl ConceptRepresentation for TitleRepresentation<'_> {
    fn name(&self) -> &'static str {
        "title"
    }

    fn represent(&self, _mention: &str, concept_id: &str) -> Result<String> {
        static_representation(self.kb, concept_id)
    }
}

/// Dense text encoder plugged into [`EmbeddingRepresentation`].
pub trait Embedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>>;
}

/// Argmax-cosine representation over dense embeddings. No encoder ships
/// with the crate; callers supply one.
pub struct EmbeddingRepresentation<'a, E: ?Sized> {
    pub pruned: &'a PrunedKB,
    pub embedder: Option<&'a E>,
}

impl<E: Embedder + ?Sized> ConceptRepresentation for EmbeddingRepresentation<'_, E> {
    fn name(&self) -> &'static str {
        "embedding"
    }

    fn represent(&self, mention: &str, concept_id: &str) -> Result<String> {
        let embedder = self.embedder.ok_or(Error::Unsupported("embedding"))?;
        let concept = self.pruned.base().concept(concept_id)?;
        let kept = self.pruned.kept(concept_id)?;
        let mv = embedder.embed(mention)?;
        let mut scores = Vec::with_capacity(kept.len());
        for s in kept {
            scores.push(dense_cosine(&mv, &embedder.embed(s)?));
        }
        Ok(pick_best(kept, &scores, mention, &concept.title))
    }
}

fn dense_cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}
