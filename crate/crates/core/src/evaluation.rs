//! Relation prediction, micro/macro accuracy, the seen-rate diagnostic,
//! repeated-resplit cross validation, the relation-count ablation, and
//! PCA export of relation representations.

use crate::dataspace::{balanced_resplit, DatasetSplit, KnowledgeGraph, QASample, ResplitTargets};
use crate::encoders::{score, EmbeddingTable, ModelDims};
use crate::error::{Error, Result};
use crate::training::{derive_seed, train_variant, ModelVariant, TrainConfig, TrainedModel};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample: usize,
    pub gold: usize,
    pub predicted: usize,
    pub candidates: Vec<usize>,
    pub gold_seen: bool,
    pub predicted_seen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub micro: f64,
    pub macro_acc: f64,
    /// Per-gold-relation accuracy, over relations present in the records.
    pub per_relation: BTreeMap<usize, f64>,
    pub samples: usize,
}

/// Argmax of `score(q, r)` over the candidate relations; ties go to the
/// smallest relation id.
pub fn predict_relation(
    question_vec: &[f64],
    relation_vecs: &[Vec<f64>],
    candidates: &[usize],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::contract("predict_relation: empty candidate set"));
    }
    let mut best: Option<(f64, usize)> = None;
    for &c in candidates {
        if c >= relation_vecs.len() {
            return Err(Error::contract(format!(
                "candidate {} out of range for {} relations",
                c,
                relation_vecs.len()
            )));
        }
        let s = score(question_vec, &relation_vecs[c])?;
        let better = match best {
            None => true,
            Some((bs, bc)) => s > bs || (s == bs && c < bc),
        };
        if better {
            best = Some((s, c));
        }
    }
    Ok(best.unwrap().1)
}

pub fn micro_accuracy(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::contract("micro_accuracy: no records"));
    }
    let correct = records.iter().filter(|r| r.predicted == r.gold).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Unweighted mean of per-gold-relation accuracies, over the relations
/// that occur in the records.
pub fn macro_accuracy(records: &[PredictionRecord]) -> Result<f64> {
    Ok(metric_report(records)?.macro_acc)
}

pub fn metric_report(records: &[PredictionRecord]) -> Result<MetricReport> {
    if records.is_empty() {
        return Err(Error::contract("metric_report: no records"));
    }
    let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per.entry(r.gold).or_insert((0, 0));
        e.1 += 1;
        if r.predicted == r.gold {
            e.0 += 1;
        }
    }
    let per_relation: BTreeMap<usize, f64> = per
        .iter()
        .map(|(&rel, &(c, n))| (rel, c as f64 / n as f64))
        .collect();
    let macro_acc = per_relation.values().sum::<f64>() / per_relation.len() as f64;
    Ok(MetricReport {
        micro: micro_accuracy(records)?,
        macro_acc,
        per_relation,
        samples: records.len(),
    })
}

/// Fraction of predictions landing in the seen set, per gold (unseen)
/// relation, macro-averaged over the gold relations present.
pub fn seen_rate(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::contract("seen_rate: no records"));
    }
    let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records {
        if r.gold_seen {
            return Err(Error::contract(format!(
                "seen_rate: record for sample {} has a seen gold relation",
                r.sample
            )));
        }
        let e = per.entry(r.gold).or_insert((0, 0));
        e.1 += 1;
        if r.predicted_seen {
            e.0 += 1;
        }
    }
    Ok(per.values().map(|&(s, n)| s as f64 / n as f64).sum::<f64>() / per.len() as f64)
}

/// Candidate relation ids per subject entity: the subject's outgoing
/// relations in the KG, restricted to the model's vocabulary.
pub fn subject_candidates(
    kg: &KnowledgeGraph,
    model: &TrainedModel,
) -> BTreeMap<String, Vec<usize>> {
    let mut map: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (s, r, _) in &kg.triples {
        if let Some(id) = model.relations.id(r) {
            map.entry(s.clone()).or_default().insert(id);
        }
    }
    map.into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// Score one split part with gold-subject candidate sets; subjects absent
/// from the KG fall back to the full relation vocabulary.
pub fn predict_records(
    model: &TrainedModel,
    samples: &[QASample],
    candidates: &BTreeMap<String, Vec<usize>>,
    relation_vecs: &[Vec<f64>],
) -> Result<Vec<PredictionRecord>> {
    let all: Vec<usize> = (0..model.relations.len()).collect();
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let gold = model
            .relations
            .id(&s.relation)
            .ok_or_else(|| Error::contract(format!("unknown relation {}", s.relation)))?;
        let cands = candidates
            .get(&s.subject)
            .map(|v| v.as_slice())
            .unwrap_or(&all);
        let q = model.question_vec(&s.question)?;
        let predicted = predict_relation(&q, relation_vecs, cands)?;
        out.push(PredictionRecord {
            sample: i,
            gold,
            predicted,
            candidates: cands.to_vec(),
            gold_seen: model.is_seen(gold),
            predicted_seen: model.is_seen(predicted),
        });
    }
    Ok(out)
}

/// The full Table-2/5 column set: micro/macro for Test-seen, Test-unseen,
/// and their union, plus the seen rate on Test-unseen.
pub fn evaluate_model(
    model: &TrainedModel,
    split: &DatasetSplit,
    kg: &KnowledgeGraph,
) -> Result<BTreeMap<String, f64>> {
    let candidates = subject_candidates(kg, model);
    let rel_vecs = model.relation_vecs()?;
    let seen_records = predict_records(model, &split.test_seen, &candidates, &rel_vecs)?;
    let unseen_records = predict_records(model, &split.test_unseen, &candidates, &rel_vecs)?;
    let mut all_records = seen_records.clone();
    all_records.extend(unseen_records.iter().cloned());

    let mut out = BTreeMap::new();
    let seen_rep = metric_report(&seen_records)?;
    let unseen_rep = metric_report(&unseen_records)?;
    let all_rep = metric_report(&all_records)?;
    out.insert("test-seen/micro".into(), seen_rep.micro);
    out.insert("test-seen/macro".into(), seen_rep.macro_acc);
    out.insert("test-unseen/micro".into(), unseen_rep.micro);
    out.insert("test-unseen/macro".into(), unseen_rep.macro_acc);
    out.insert("all/micro".into(), all_rep.micro);
    out.insert("all/macro".into(), all_rep.macro_acc);
    out.insert("test-unseen/seen-rate".into(), seen_rate(&unseen_records)?);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValReport {
    pub folds: Vec<BTreeMap<String, f64>>,
    pub mean: BTreeMap<String, f64>,
    /// Sample standard deviation (n−1 denominator).
    pub std: BTreeMap<String, f64>,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Table-style "77.3±7.6" rendering of a fraction as a percentage.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.1}±{:.1}", mean * 100.0, std * 100.0)
}

/// k independent resplit+train+eval runs with fold-derived seeds.
pub fn cross_validate(
    samples: &[QASample],
    kg: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    k: usize,
    variant: ModelVariant,
    dims: &ModelDims,
    config: &TrainConfig,
    targets: &ResplitTargets,
    tolerance: f64,
    seed: u64,
) -> Result<CrossValReport> {
    if k < 2 {
        return Err(Error::contract("cross_validate: k must be at least 2"));
    }
    if samples.len() < 5 * k {
        return Err(Error::contract(format!(
            "cross_validate: {} samples is too small for {} folds",
            samples.len(),
            k
        )));
    }
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let fold_seed = derive_seed(seed, 100, fold as u64);
        let split = balanced_resplit(samples, fold_seed, targets, tolerance)?;
        let fold_config = TrainConfig {
            seed: fold_seed,
            ..*config
        };
        let model = train_variant(&split, kg, embeddings, variant, dims, &fold_config, None)?;
        folds.push(evaluate_model(&model, &split, kg)?);
    }
    let keys: Vec<String> = folds[0].keys().cloned().collect();
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    for key in keys {
        let vals: Vec<f64> = folds.iter().filter_map(|f| f.get(&key)).copied().collect();
        let (m, s) = mean_and_std(&vals);
        mean.insert(key.clone(), m);
        std.insert(key, s);
    }
    Ok(CrossValReport { folds, mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub relation_count: usize,
    pub macro_unseen: f64,
}

/// Restrict the training side of a split to `count` seen relations,
/// dropping seen-side samples of the excluded relations.
fn restrict_split(split: &DatasetSplit, count: usize, seed: u64) -> Result<DatasetSplit> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let train_rels: BTreeSet<&str> = split.train.iter().map(|s| s.relation.as_str()).collect();
    if count == 0 || count > train_rels.len() {
        return Err(Error::contract(format!(
            "ablation count {} infeasible with {} training relations",
            count,
            train_rels.len()
        )));
    }
    let mut rels: Vec<&str> = train_rels.into_iter().collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rels.shuffle(&mut rng);
    let keep: BTreeSet<&str> = rels[..count].iter().copied().collect();
    let filter = |part: &[QASample]| {
        part.iter()
            .filter(|s| keep.contains(s.relation.as_str()))
            .cloned()
            .collect::<Vec<QASample>>()
    };
    Ok(DatasetSplit {
        train: filter(&split.train),
        dev_seen: filter(&split.dev_seen),
        dev_unseen: split.dev_unseen.clone(),
        test_seen: filter(&split.test_seen),
        test_unseen: split.test_unseen.clone(),
    })
}

/// Retrain baseline and final variants with progressively fewer training
/// relations; reports Test-unseen macro accuracy per (model, count).
pub fn relation_count_ablation(
    split: &DatasetSplit,
    kg: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    counts: &[usize],
    dims: &ModelDims,
    config: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    if counts.is_empty() {
        return Err(Error::contract("relation_count_ablation: no counts given"));
    }
    let mut rows = Vec::new();
    for &count in counts {
        let sub = restrict_split(split, count, derive_seed(config.seed, 200, count as u64))?;
        for variant in [ModelVariant::BaselineFinetune, ModelVariant::AdversarialAdapterRecon] {
            let model = train_variant(&sub, kg, embeddings, variant, dims, config, None)?;
            let metrics = evaluate_model(&model, &sub, kg)?;
            rows.push(AblationRow {
                model: variant.as_str().to_string(),
                relation_count: count,
                macro_unseen: metrics["test-unseen/macro"],
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Two-component projection per input id.
    pub projections: BTreeMap<usize, [f64; 2]>,
    /// Fraction of total variance captured by each component.
    pub explained: [f64; 2],
    /// The (sign-normalized) principal axes.
    pub components: [Vec<f64>; 2],
}

// per-step delta understates eigenvector error by the eigengap factor, so
// the stop threshold sits well below the accuracy the axes must deliver
const PCA_TOLERANCE: f64 = 1e-14;
const PCA_MAX_ITERS: usize = 500_000;

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Dominant eigenpair of a symmetric PSD matrix by power iteration;
/// deterministic start along the largest-diagonal coordinate.
fn power_iteration(m: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let d = m.len();
    let start = (0..d).max_by(|&a, &b| m[a][a].partial_cmp(&m[b][b]).unwrap())?;
    let mut v = vec![0.0; d];
    v[start] = 1.0;
    for _ in 0..PCA_MAX_ITERS {
        let mut next = mat_vec(m, &v);
        if normalize(&mut next) == 0.0 {
            return None;
        }
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = next;
        if delta < PCA_TOLERANCE {
            break;
        }
    }
    let mv = mat_vec(m, &v);
    let lambda: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
    Some((lambda, v))
}

fn sign_normalize(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Mean-center, take the top-2 principal axes of the covariance by power
/// iteration with deflation, and project.
pub fn pca_project(vectors: &BTreeMap<usize, Vec<f64>>) -> Result<PcaResult> {
    if vectors.len() < 3 {
        return Err(Error::contract(format!(
            "pca_project needs at least 3 vectors, got {}",
            vectors.len()
        )));
    }
    let d = vectors.values().next().unwrap().len();
    if d < 2 {
        return Err(Error::contract("pca_project needs dimension at least 2"));
    }
    for v in vectors.values() {
        if v.len() != d {
            return Err(Error::dim("pca_project", "inconsistent vector dimensions"));
        }
    }
    let n = vectors.len();
    let mut mean = vec![0.0; d];
    for v in vectors.values() {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }
    let centered: BTreeMap<usize, Vec<f64>> = vectors
        .iter()
        .map(|(&id, v)| (id, v.iter().zip(&mean).map(|(x, m)| x - m).collect()))
        .collect();

    let mut cov = vec![vec![0.0; d]; d];
    for v in centered.values() {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += v[i] * v[j] / (n - 1) as f64;
            }
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    if trace <= 0.0 {
        return Err(Error::Degenerate("pca_project: zero-variance data".into()));
    }

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut lambdas = [0.0f64; 2];
    for c in 0..2 {
        match power_iteration(&cov) {
            Some((lambda, mut v)) if lambda > 0.0 => {
                sign_normalize(&mut v);
                lambdas[c] = lambda;
                // deflate: cov ← cov − λ v vᵀ
                for i in 0..d {
                    for j in 0..d {
                        cov[i][j] -= lambda * v[i] * v[j];
                    }
                }
                components.push(v);
            }
            _ => {
                if c == 0 {
                    return Err(Error::Degenerate("pca_project: rank-0 covariance".into()));
                }
                // rank-1 data: second axis carries no variance; keep a
                // deterministic orthogonal axis with zero projection
                lambdas[c] = 0.0;
                components.push(vec![0.0; d]);
            }
        }
    }

    let projections: BTreeMap<usize, [f64; 2]> = centered
        .iter()
        .map(|(&id, v)| {
            let x: f64 = v.iter().zip(&components[0]).map(|(a, b)| a * b).sum();
            let y: f64 = v.iter().zip(&components[1]).map(|(a, b)| a * b).sum();
            (id, [x, y])
        })
        .collect();
    Ok(PcaResult {
        projections,
        explained: [lambdas[0] / trace, lambdas[1] / trace],
        components: [components[0].clone(), components[1].clone()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sample: usize, gold: usize, predicted: usize, gold_seen: bool, predicted_seen: bool) -> PredictionRecord {
        PredictionRecord {
            sample,
            gold,
            predicted,
            candidates: vec![gold, predicted],
            gold_seen,
            predicted_seen,
        }
    }

    #[test]
    fn predict_single_candidate_and_ties() {
        let rels = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let q = vec![0.0, 1.0];
        assert_eq!(predict_relation(&q, &rels, &[0]).unwrap(), 0);
        // candidates 1 and 2 score identically → smaller id
        assert_eq!(predict_relation(&q, &rels, &[2, 1]).unwrap(), 1);
        assert!(predict_relation(&q, &rels, &[]).is_err());
    }

    #[test]
    fn predict_matches_brute_force() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let rels: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let q: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cands = [0, 2, 3, 5];
            let brute = cands
                .iter()
                .copied()
                .map(|c| (score(&q, &rels[c]).unwrap(), c))
                .fold((f64::NEG_INFINITY, usize::MAX), |acc, (s, c)| {
                    if s > acc.0 { (s, c) } else { acc }
                })
                .1;
            assert_eq!(predict_relation(&q, &rels, &cands).unwrap(), brute);
        }
    }

    #[test]
    fn micro_macro_hand_enumeration() {
        // r1: 2/2 correct, r2: 0/1 → micro 2/3, macro 0.5
        let records = vec![rec(0, 1, 1, true, true), rec(1, 1, 1, true, true), rec(2, 2, 1, true, true)];
        assert!((micro_accuracy(&records).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((macro_accuracy(&records).unwrap() - 0.5).abs() < 1e-15);
        // duplicating every record leaves both unchanged
        let doubled: Vec<_> = records.iter().chain(&records).cloned().collect();
        assert_eq!(micro_accuracy(&doubled).unwrap(), micro_accuracy(&records).unwrap());
        assert_eq!(macro_accuracy(&doubled).unwrap(), macro_accuracy(&records).unwrap());
        assert!(micro_accuracy(&[]).is_err());
    }

    #[test]
    fn all_correct_gives_ones() {
        let records = vec![rec(0, 1, 1, true, true), rec(1, 2, 2, true, true)];
        assert_eq!(micro_accuracy(&records).unwrap(), 1.0);
        assert_eq!(macro_accuracy(&records).unwrap(), 1.0);
    }

    #[test]
    fn seen_rate_hand_enumeration() {
        // gold u1 (id 5): 1 of 2 predictions seen; gold u2 (id 6): 0 of 1
        let records = vec![
            rec(0, 5, 1, false, true),
            rec(1, 5, 6, false, false),
            rec(2, 6, 6, false, false),
        ];
        assert!((seen_rate(&records).unwrap() - 0.25).abs() < 1e-15);
        // all predictions unseen → 0
        let clean = vec![rec(0, 5, 5, false, false)];
        assert_eq!(seen_rate(&clean).unwrap(), 0.0);
        // seen gold is a contract violation
        assert!(seen_rate(&[rec(0, 1, 1, true, true)]).is_err());
    }

    #[test]
    fn mean_std_formula() {
        let (m, s) = mean_and_std(&[0.6, 0.8]);
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.1414213562373095).abs() < 1e-12);
        let (m2, s2) = mean_and_std(&[0.5, 0.5, 0.5]);
        assert_eq!((m2, s2), (0.5, 0.0));
        assert_eq!(format_mean_std(0.773, 0.076), "77.3±7.6");
    }

    #[test]
    fn pca_axis_aligned_data() {
        let vectors: BTreeMap<usize, Vec<f64>> = [
            (0, vec![-2.0, 0.0]),
            (1, vec![0.0, 0.0]),
            (2, vec![2.0, 0.0]),
        ]
        .into();
        let out = pca_project(&vectors).unwrap();
        assert!((out.explained[0] - 1.0).abs() < 1e-9);
        assert!(out.explained[1].abs() < 1e-9);
        // first axis is ±x with the sign convention making it +x
        assert!((out.components[0][0] - 1.0).abs() < 1e-9);
        assert!((out.projections[&0][0] + 2.0).abs() < 1e-9);
        assert!((out.projections[&2][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pca_preserves_top_subspace_inner_products() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // rank-2 data: inner products of projections must match the
        // centered originals exactly (all variance lives in the plane)
        let basis = [vec![1.0, 2.0, -1.0, 0.5], vec![0.0, 1.0, 1.0, -2.0]];
        let vectors: BTreeMap<usize, Vec<f64>> = (0..8)
            .map(|i| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (i, (0..4).map(|j| a * basis[0][j] + b * basis[1][j]).collect())
            })
            .collect();
        let out = pca_project(&vectors).unwrap();
        assert!(out.explained[0] + out.explained[1] > 1.0 - 1e-8);
        let mut mean = vec![0.0; 4];
        for v in vectors.values() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / 8.0;
            }
        }
        for i in 0..8usize {
            for j in 0..8usize {
                let orig: f64 = (0..4)
                    .map(|k| (vectors[&i][k] - mean[k]) * (vectors[&j][k] - mean[k]))
                    .sum();
                let proj = out.projections[&i][0] * out.projections[&j][0]
                    + out.projections[&i][1] * out.projections[&j][1];
                assert!((orig - proj).abs() < 1e-8, "({}, {}): {} vs {}", i, j, orig, proj);
            }
        }
    }

    #[test]
    fn pca_degenerate_inputs() {
        let two: BTreeMap<usize, Vec<f64>> = [(0, vec![1.0, 2.0]), (1, vec![3.0, 4.0])].into();
        assert!(pca_project(&two).is_err());
        let flat: BTreeMap<usize, Vec<f64>> = (0..4).map(|i| (i, vec![1.0, 2.0])).collect();
        assert!(matches!(pca_project(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pca_two_distinct_points_plus_duplicate() {
        // all variance along the difference vector (3,4)/5
        let vectors: BTreeMap<usize, Vec<f64>> = [
            (0, vec![0.0, 0.0]),
            (1, vec![3.0, 4.0]),
            (2, vec![0.0, 0.0]),
        ]
        .into();
        let out = pca_project(&vectors).unwrap();
        assert!((out.components[0][0] - 0.6).abs() < 1e-9);
        assert!((out.components[0][1] - 0.8).abs() < 1e-9);
    }
}
