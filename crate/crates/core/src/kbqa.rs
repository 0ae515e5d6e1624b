//! End-to-end question answering: exact-match entity linking over alias
//! spans, candidate relation retrieval from the KG, and joint
//! (subject, relation) scoring with the trained detector.

use crate::dataspace::KnowledgeGraph;
use crate::encoders::score;
use crate::error::{Error, Result};
use crate::training::TrainedModel;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Immutable lookup structure over a KG: subject → outgoing relations with
/// their objects, and lowercased alias token sequences → entities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleIndex {
    by_subject: BTreeMap<String, BTreeMap<usize, BTreeSet<String>>>,
    aliases: BTreeMap<Vec<String>, BTreeSet<String>>,
    max_alias_len: usize,
}

impl TripleIndex {
    /// Triples whose relation is outside the model vocabulary are skipped:
    /// the detector cannot score them.
    pub fn build(kg: &KnowledgeGraph, model: &TrainedModel) -> TripleIndex {
        let mut by_subject: BTreeMap<String, BTreeMap<usize, BTreeSet<String>>> = BTreeMap::new();
        for (s, r, o) in &kg.triples {
            if let Some(id) = model.relations.id(r) {
                by_subject
                    .entry(s.clone())
                    .or_default()
                    .entry(id)
                    .or_default()
                    .insert(o.clone());
            }
        }
        let mut aliases: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
        let mut max_alias_len = 0;
        for (entity, forms) in &kg.aliases {
            for form in forms {
                if form.is_empty() {
                    continue;
                }
                let key: Vec<String> = form.iter().map(|t| t.to_lowercase()).collect();
                max_alias_len = max_alias_len.max(key.len());
                aliases.entry(key).or_default().insert(entity.clone());
            }
        }
        TripleIndex {
            by_subject,
            aliases,
            max_alias_len,
        }
    }

    pub fn outgoing(&self, subject: &str) -> Option<&BTreeMap<usize, BTreeSet<String>>> {
        self.by_subject.get(subject)
    }
}

/// An alias match: the question span it covers and the entities it names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMatch {
    pub start: usize,
    pub len: usize,
    pub entities: Vec<String>,
}

/// All maximal exact alias matches in the question, case-insensitive.
/// Spans strictly contained in a longer matching span are dropped.
pub fn link_entities(tokens: &[String], index: &TripleIndex) -> Vec<EntityMatch> {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for start in 0..lower.len() {
        let max_len = index.max_alias_len.min(lower.len() - start);
        for len in (1..=max_len).rev() {
            if index.aliases.contains_key(&lower[start..start + len]) {
                spans.push((start, len));
                break; // longest match at this start position
            }
        }
    }
    // drop spans contained in a longer matching span
    let kept: Vec<(usize, usize)> = spans
        .iter()
        .copied()
        .filter(|&(s, l)| {
            !spans
                .iter()
                .any(|&(s2, l2)| l2 > l && s2 <= s && s + l <= s2 + l2)
        })
        .collect();
    kept.into_iter()
        .map(|(start, len)| EntityMatch {
            start,
            len,
            entities: index.aliases[&lower[start..start + len]]
                .iter()
                .cloned()
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    Answered {
        subject: String,
        relation: String,
        object: String,
    },
    Unanswerable,
}

/// Global argmax over (candidate subject, outgoing relation) by detector
/// score. Ties: larger alias-token overlap, then smaller entity id, then
/// smaller relation id. The returned object is the smallest stored one.
pub fn answer(
    model: &TrainedModel,
    relation_vecs: &[Vec<f64>],
    index: &TripleIndex,
    tokens: &[String],
) -> Result<Answer> {
    if tokens.is_empty() {
        return Err(Error::contract("answer: empty question"));
    }
    let matches = link_entities(tokens, index);
    if matches.is_empty() {
        return Ok(Answer::Unanswerable);
    }
    // per-entity best alias overlap (token count)
    let mut overlap: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &matches {
        for e in &m.entities {
            let o = overlap.entry(e.as_str()).or_insert(0);
            *o = (*o).max(m.len);
        }
    }
    let q = model.question_vec(tokens)?;
    // (score, overlap, entity, relation id) under the documented tie order
    let mut best: Option<(f64, usize, &str, usize)> = None;
    for (&entity, &ov) in &overlap {
        let Some(outgoing) = index.outgoing(entity) else {
            continue;
        };
        for &rel in outgoing.keys() {
            let s = score(&q, &relation_vecs[rel])?;
            let better = match best {
                None => true,
                Some((bs, bo, be, br)) => {
                    s > bs
                        || (s == bs
                            && (ov > bo
                                || (ov == bo && (entity < be || (entity == be && rel < br)))))
                }
            };
            if better {
                best = Some((s, ov, entity, rel));
            }
        }
    }
    let Some((_, _, entity, rel)) = best else {
        return Ok(Answer::Unanswerable);
    };
    let object = index.outgoing(entity).unwrap()[&rel]
        .iter()
        .next()
        .unwrap()
        .clone();
    Ok(Answer::Answered {
        subject: entity.to_string(),
        relation: model.relations.name(rel).to_string(),
        object,
    })
}

/// Micro fraction where both predicted subject and relation match the
/// gold pair; Unanswerable counts as wrong.
pub fn kbqa_accuracy(predictions: &[Answer], golds: &[(String, String)]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::contract(format!(
            "kbqa_accuracy: {} predictions vs {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::contract("kbqa_accuracy: no predictions"));
    }
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, (gs, gr))| {
            matches!(p, Answer::Answered { subject, relation, .. }
                if subject == gs && relation == gr)
        })
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}
