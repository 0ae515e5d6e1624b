//! Detector pretraining (which produces the pseudo targets) and joint
//! training of all model variants, including the Wasserstein alternation
//! schedule for the adversarial adapters.

use crate::adapter::{
    self, apply_adapter, reconstruction_loss_node, wgan_d_loss_node, wgan_g_loss_node,
    PseudoTargetStore, ADAPTER_B, ADAPTER_W, DISC_PREFIX,
};
use crate::autodiff::{run_loss, Binding, NodeId, ParamSet, RmsPropState, Tape};
use crate::dataspace::{DatasetSplit, KnowledgeGraph, QASample, RelationVocabulary};
use crate::encoders::{
    self, encode_question, encode_relation, init_bilstm_params, tokenize_relation, EmbeddingTable,
    ModelDims, Vocabulary, PAD_ID, UNK_ID,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Mix a base seed with two stream indices (splitmix64 finalizer); every
/// consumer of randomness derives its own stream from the single run seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Negative samples per question (K).
    pub negatives: usize,
    /// Hinge margin γ.
    pub margin: f64,
    /// Discriminator clip bound c.
    pub clip: f64,
    pub dropout: f64,
    pub lambda_adapter: f64,
    pub lambda_recon: f64,
    pub n_critic: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 256,
            negatives: 256,
            margin: 0.1,
            clip: 0.1,
            dropout: 0.2,
            lambda_adapter: 1.0,
            lambda_recon: 1.0,
            n_critic: 5,
            epochs: 20,
            patience: 5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin <= 0.0 {
            return Err(Error::contract("margin must be positive"));
        }
        if self.negatives < 1 {
            return Err(Error::contract("need at least one negative sample"));
        }
        if self.clip <= 0.0 {
            return Err(Error::contract("clip bound must be positive"));
        }
        if self.learning_rate <= 0.0 || self.dropout < 0.0 || self.dropout >= 1.0 {
            return Err(Error::contract("rates out of range"));
        }
        if self.batch_size == 0 {
            return Err(Error::contract("batch size must be positive"));
        }
        Ok(())
    }
}

/// The Table-2 model grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelVariant {
    BaselineFinetune,
    BaselineFrozen,
    FrozenPlusMapping,
    BasicAdapter,
    BasicAdapterRecon,
    AdversarialAdapter,
    AdversarialAdapterRecon,
}

pub const ALL_VARIANTS: [ModelVariant; 7] = [
    ModelVariant::BaselineFinetune,
    ModelVariant::BaselineFrozen,
    ModelVariant::FrozenPlusMapping,
    ModelVariant::BasicAdapter,
    ModelVariant::BasicAdapterRecon,
    ModelVariant::AdversarialAdapter,
    ModelVariant::AdversarialAdapterRecon,
];

impl ModelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::BaselineFinetune => "baseline-finetune",
            ModelVariant::BaselineFrozen => "baseline-frozen",
            ModelVariant::FrozenPlusMapping => "frozen-plus-mapping",
            ModelVariant::BasicAdapter => "basic-adapter",
            ModelVariant::BasicAdapterRecon => "basic-adapter-recon",
            ModelVariant::AdversarialAdapter => "adversarial-adapter",
            ModelVariant::AdversarialAdapterRecon => "adversarial-adapter-recon",
        }
    }

    pub fn parse(s: &str) -> Result<ModelVariant> {
        ALL_VARIANTS
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {:?}", s)))
    }

    /// The relation-level input passes through the mapping G.
    pub fn uses_adapter(&self) -> bool {
        !matches!(self, ModelVariant::BaselineFinetune | ModelVariant::BaselineFrozen)
    }

    pub fn uses_mse(&self) -> bool {
        matches!(self, ModelVariant::BasicAdapter | ModelVariant::BasicAdapterRecon)
    }

    pub fn uses_recon(&self) -> bool {
        matches!(
            self,
            ModelVariant::BasicAdapterRecon | ModelVariant::AdversarialAdapterRecon
        )
    }

    pub fn adversarial(&self) -> bool {
        matches!(
            self,
            ModelVariant::AdversarialAdapter | ModelVariant::AdversarialAdapterRecon
        )
    }

    /// The relation-level embedding table is fine-tuned.
    pub fn finetunes_relations(&self) -> bool {
        matches!(self, ModelVariant::BaselineFinetune)
    }

    pub fn requires_pseudo_targets(&self) -> bool {
        self.uses_mse() || self.adversarial()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev_seen_acc: f64,
    pub dev_unseen_acc: f64,
}

/// Everything needed to score questions against relations, plus the
/// training provenance; serializes losslessly as the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub variant: ModelVariant,
    pub dims: ModelDims,
    pub config: TrainConfig,
    pub word_vocab: Vocabulary,
    pub relations: RelationVocabulary,
    /// Relations occurring in Train (the seen set S).
    pub seen: BTreeSet<usize>,
    /// Word ids of the tokenized relation names, per relation id.
    pub rel_tokens: Vec<Vec<usize>>,
    /// Frozen general embeddings e_g, per relation id.
    pub general_rel: Vec<Vec<f64>>,
    pub params: ParamSet,
    pub pseudo_targets: Option<PseudoTargetStore>,
    pub log: Vec<EpochLog>,
}

impl TrainedModel {
    pub fn is_seen(&self, rel: usize) -> bool {
        self.seen.contains(&rel)
    }

    /// Relation-level input vector node for a relation under this variant.
    fn relation_level_node(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        rel: usize,
        mask: Option<&Tensor>,
    ) -> Result<NodeId> {
        match self.variant {
            ModelVariant::BaselineFinetune => tape.row(binding["rel_emb"], rel),
            ModelVariant::BaselineFrozen => {
                tape.constant(Tensor::vector(self.general_rel[rel].clone()))
            }
            _ => {
                let e = tape.constant(Tensor::vector(self.general_rel[rel].clone()))?;
                apply_adapter(tape, binding, ADAPTER_W, ADAPTER_B, e, mask)
            }
        }
    }

    fn relation_node(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        rel: usize,
        mask: Option<&Tensor>,
    ) -> Result<NodeId> {
        let level = self.relation_level_node(tape, binding, rel, mask)?;
        encode_relation(tape, binding, &self.rel_tokens[rel], level, &self.dims)
    }

    /// r_f for a relation at evaluation time (no dropout).
    pub fn relation_vec(&self, rel: usize) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let binding = self.params.bind(&mut tape, |_| true)?;
        let node = self.relation_node(&mut tape, &binding, rel, None)?;
        Ok(tape.forward(node).data().to_vec())
    }

    /// r_f for every relation, indexed by relation id.
    pub fn relation_vecs(&self) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let binding = self.params.bind(&mut tape, |_| true)?;
        (0..self.relations.len())
            .map(|r| {
                let node = self.relation_node(&mut tape, &binding, r, None)?;
                Ok(tape.forward(node).data().to_vec())
            })
            .collect()
    }

    pub fn word_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.word_vocab.id(t)).collect()
    }

    /// q_f for a question at evaluation time.
    pub fn question_vec(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::contract("question_vec: empty question"));
        }
        let ids = self.word_ids(tokens);
        let mut tape = Tape::new();
        let binding = self.params.bind(&mut tape, |_| true)?;
        let node = encode_question(&mut tape, &binding, &ids, &self.dims)?;
        Ok(tape.forward(node).data().to_vec())
    }

    /// The general relation-level vector table (frozen input contract).
    pub fn general_embedding(&self, rel: usize) -> &[f64] {
        &self.general_rel[rel]
    }
}

// ---------------------------------------------------------------------------
// Negative sampling and the hinge objective
// ---------------------------------------------------------------------------

/// Draw K negatives from `pool` (gold excluded): without replacement when
/// the pool is large enough, with replacement otherwise.
pub fn sample_negatives(
    gold: usize,
    pool: &[usize],
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let pool: Vec<usize> = pool.iter().copied().filter(|&r| r != gold).collect();
    if pool.is_empty() {
        return Err(Error::contract("sample_negatives: empty pool"));
    }
    if pool.len() >= k {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(rng);
        Ok(idx[..k].iter().map(|&i| pool[i]).collect())
    } else {
        Ok((0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect())
    }
}

/// Σ over negatives of max(0, γ − s(q, r⁺) + s(q, r⁻)).
pub fn hinge_ranking_loss(
    q: &[f64],
    positive: &[f64],
    negatives: &[Vec<f64>],
    margin: f64,
) -> Result<f64> {
    if margin <= 0.0 {
        return Err(Error::contract("hinge margin must be positive"));
    }
    if negatives.is_empty() {
        return Err(Error::contract("hinge loss needs at least one negative"));
    }
    let sp = encoders::score(q, positive)?;
    let mut total = 0.0;
    for n in negatives {
        let sn = encoders::score(q, n)?;
        total += (margin - sp + sn).max(0.0);
    }
    Ok(total)
}

/// Tape form of the hinge objective over precomputed score nodes.
pub fn hinge_loss_node(
    tape: &mut Tape,
    s_pos: NodeId,
    s_negs: &[NodeId],
    margin: f64,
) -> Result<NodeId> {
    if margin <= 0.0 {
        return Err(Error::contract("hinge margin must be positive"));
    }
    if s_negs.is_empty() {
        return Err(Error::contract("hinge loss needs at least one negative"));
    }
    let gamma = tape.constant(Tensor::scalar(margin))?;
    let terms: Vec<NodeId> = s_negs
        .iter()
        .map(|&sn| {
            let d = tape.sub(gamma, s_pos)?;
            let z = tape.add(d, sn)?;
            tape.relu(z)
        })
        .collect::<Result<_>>()?;
    let cat = tape.concat(&terms)?;
    tape.sum(cat)
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

fn build_model(
    split: &DatasetSplit,
    embeddings: &EmbeddingTable,
    variant: ModelVariant,
    dims: &ModelDims,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::contract("training split is empty"));
    }
    if embeddings.dim != dims.relation_dim {
        return Err(Error::dim(
            "build_model",
            format!(
                "embedding table dim {} vs relation dim {}",
                embeddings.dim, dims.relation_dim
            ),
        ));
    }
    let all_samples: Vec<&QASample> = split.parts().iter().flat_map(|(_, v)| v.iter()).collect();
    let relations = RelationVocabulary::from_samples(all_samples.iter().copied());

    let mut word_vocab = Vocabulary::new();
    for s in &all_samples {
        for t in &s.question {
            word_vocab.add(t);
        }
    }
    let mut rel_tokens = Vec::with_capacity(relations.len());
    for r in relations.ids() {
        let toks = tokenize_relation(relations.name(r))?;
        rel_tokens.push(toks.iter().map(|t| word_vocab.add(t)).collect::<Vec<usize>>());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, 0));

    // word embedding table: pretrained rows where available, the mean
    // vector for the unknown row, zeros for padding
    let mean = embeddings.mean_vector();
    let mut word_rows: Vec<Vec<f64>> = Vec::with_capacity(word_vocab.len());
    for id in 0..word_vocab.len() {
        let token = word_vocab.token(id);
        let row = if id == PAD_ID {
            vec![0.0; dims.word_dim]
        } else if id == UNK_ID {
            mean.clone()
        } else if let Some(v) = embeddings.get(token) {
            v.to_vec()
        } else {
            // out-of-vocabulary tokens start at the mean vector (still
            // trainable): tokens that never receive gradient stay at a
            // common, non-discriminative point instead of random noise
            mean.clone()
        };
        if row.len() != dims.word_dim {
            return Err(Error::dim(
                "build_model",
                format!("word vector len {} vs word dim {}", row.len(), dims.word_dim),
            ));
        }
        word_rows.push(row);
    }

    // general relation-level embeddings e_g (frozen throughout)
    let mut general_rel = Vec::with_capacity(relations.len());
    for r in relations.ids() {
        let v = embeddings
            .get(relations.name(r))
            .map(|v| v.to_vec())
            .unwrap_or_else(|| mean.clone());
        general_rel.push(v);
    }

    let mut params = ParamSet::new();
    params.insert("word_emb", Tensor::from_rows(&word_rows)?);
    init_bilstm_params(&mut params, "lstm1", dims.word_dim, dims.hidden, &mut rng);
    init_bilstm_params(&mut params, "lstm2", 2 * dims.hidden, dims.hidden, &mut rng);
    if dims.relation_dim != dims.word_dim {
        params.insert(
            "rel_proj",
            encoders::glorot_matrix(&mut rng, dims.word_dim, dims.relation_dim),
        );
    }
    if variant.finetunes_relations() {
        params.insert("rel_emb", Tensor::from_rows(&general_rel)?);
    }
    if variant.uses_adapter() {
        adapter::init_adapter_params(&mut params, dims.relation_dim, false, &mut rng);
    }
    if variant.uses_recon() {
        adapter::init_reverse_adapter_params(&mut params, dims.relation_dim, false, &mut rng);
    }
    if variant.adversarial() {
        adapter::init_discriminator_params(&mut params, dims.relation_dim, dims.disc_hidden, &mut rng);
    }

    let seen: BTreeSet<usize> = split
        .train
        .iter()
        .filter_map(|s| relations.id(&s.relation))
        .collect();

    Ok(TrainedModel {
        variant,
        dims: *dims,
        config: *config,
        word_vocab,
        relations,
        seen,
        rel_tokens,
        general_rel,
        params,
        pseudo_targets: None,
        log: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

fn dropout_mask(rng: &mut impl Rng, dim: usize, rate: f64) -> Option<Tensor> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - rate;
    let data = (0..dim)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    Some(Tensor::vector(data))
}

fn sample_relation_batch(pool: &[usize], size: usize, rng: &mut impl Rng) -> Vec<usize> {
    if pool.len() <= size {
        return pool.to_vec();
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(rng);
    idx[..size].iter().map(|&i| pool[i]).collect()
}

/// One adversarial cycle: n_critic critic updates (each followed by the
/// clip), then one generator update carrying the reconstruction term when
/// the variant enables it.
pub fn wgan_alternation_step(
    model: &mut TrainedModel,
    optimizer: &mut RmsPropState,
    rng: &mut impl Rng,
    seen: &[usize],
    all_relations: &[usize],
) -> Result<()> {
    if !model.variant.adversarial() {
        return Err(Error::contract("wgan_alternation_step requires an adversarial variant"));
    }
    let pseudo = model
        .pseudo_targets
        .clone()
        .ok_or_else(|| Error::contract("adversarial training requires pseudo targets"))?;
    let config = model.config;

    for _ in 0..config.n_critic {
        let fake_batch = sample_relation_batch(seen, config.batch_size, rng);
        let real_batch = sample_relation_batch(seen, config.batch_size, rng);
        let (_, grads) = run_loss(
            &model.params,
            |name| !name.starts_with(DISC_PREFIX),
            |tape, binding| {
                let mut fake_scores = Vec::new();
                for &r in &fake_batch {
                    let e = tape.constant(Tensor::vector(model.general_rel[r].clone()))?;
                    let mapped = apply_adapter(tape, binding, ADAPTER_W, ADAPTER_B, e, None)?;
                    fake_scores.push(adapter::discriminator_score(tape, binding, mapped)?);
                }
                let mut real_scores = Vec::new();
                for &r in &real_batch {
                    let target = pseudo.get(r).ok_or_else(|| {
                        Error::contract(format!("no pseudo target for seen relation {}", r))
                    })?;
                    let t = tape.constant(Tensor::vector(target.to_vec()))?;
                    real_scores.push(adapter::discriminator_score(tape, binding, t)?);
                }
                wgan_d_loss_node(tape, &fake_scores, &real_scores)
            },
        )?;
        optimizer.step(&mut model.params, &grads, config.learning_rate)?;
        model.params.clip_prefix(DISC_PREFIX, config.clip)?;
    }

    let fake_batch = sample_relation_batch(seen, config.batch_size, rng);
    let recon_batch = if model.variant.uses_recon() {
        sample_relation_batch(all_relations, config.batch_size, rng)
    } else {
        Vec::new()
    };
    let variant = model.variant;
    let (_, grads) = run_loss(
        &model.params,
        |name| {
            !(name.starts_with("adapter.") || (variant.uses_recon() && name.starts_with("readapter.")))
        },
        |tape, binding| {
            let mut fake_scores = Vec::new();
            for &r in &fake_batch {
                let e = tape.constant(Tensor::vector(model.general_rel[r].clone()))?;
                let mapped = apply_adapter(tape, binding, ADAPTER_W, ADAPTER_B, e, None)?;
                fake_scores.push(adapter::discriminator_score(tape, binding, mapped)?);
            }
            let g_loss = wgan_g_loss_node(tape, &fake_scores)?;
            let mut total = tape.scale(g_loss, config.lambda_adapter)?;
            if !recon_batch.is_empty() {
                let inputs: Vec<NodeId> = recon_batch
                    .iter()
                    .map(|&r| tape.constant(Tensor::vector(model.general_rel[r].clone())))
                    .collect::<Result<_>>()?;
                let recon = reconstruction_loss_node(tape, binding, &inputs)?;
                let weighted = tape.scale(recon, config.lambda_recon)?;
                total = tape.add(total, weighted)?;
            }
            Ok(total)
        },
    )?;
    optimizer.step(&mut model.params, &grads, config.learning_rate)?;
    Ok(())
}

struct PreparedSample {
    word_ids: Vec<usize>,
    gold: usize,
}

fn detector_step(
    model: &mut TrainedModel,
    optimizer: &mut RmsPropState,
    batch: &[&PreparedSample],
    neg_pool: &[usize],
    seen: &[usize],
    all_relations: &[usize],
    rng: &mut impl Rng,
) -> Result<f64> {
    let config = model.config;
    let variant = model.variant;
    let pseudo = model.pseudo_targets.clone();

    // negatives per sample, plus the union of relations to encode once
    let mut negatives: Vec<Vec<usize>> = Vec::with_capacity(batch.len());
    let mut needed: BTreeSet<usize> = BTreeSet::new();
    for s in batch {
        let negs = sample_negatives(s.gold, neg_pool, config.negatives, rng)?;
        needed.insert(s.gold);
        needed.extend(negs.iter().copied());
        negatives.push(negs);
    }
    let mse_batch = if variant.uses_mse() {
        sample_relation_batch(seen, config.batch_size, rng)
    } else {
        Vec::new()
    };
    let recon_batch = if variant.uses_recon() && !variant.adversarial() {
        sample_relation_batch(all_relations, config.batch_size, rng)
    } else {
        Vec::new()
    };
    let masks: BTreeMap<usize, Option<Tensor>> = needed
        .iter()
        .map(|&r| (r, dropout_mask(rng, model.dims.relation_dim, config.dropout)))
        .collect();

    // word embeddings stay frozen at their pretrained values: the desk-
    // scale vocabulary is small enough that trainable word vectors turn
    // into per-relation lookup tables, masking the relation-level channel
    let (loss, grads) = run_loss(
        &model.params,
        |name| name == "word_emb" || name.starts_with(DISC_PREFIX),
        |tape, binding| {
            let mut rel_nodes: BTreeMap<usize, NodeId> = BTreeMap::new();
            for &r in &needed {
                let mask = if variant.uses_adapter() {
                    masks[&r].as_ref()
                } else {
                    None
                };
                rel_nodes.insert(r, model.relation_node(tape, binding, r, mask)?);
            }
            let mut per_sample = Vec::with_capacity(batch.len());
            for (s, negs) in batch.iter().zip(&negatives) {
                let q = encode_question(tape, binding, &s.word_ids, &model.dims)?;
                let s_pos = tape.cosine(q, rel_nodes[&s.gold])?;
                let s_negs: Vec<NodeId> = negs
                    .iter()
                    .map(|&n| tape.cosine(q, rel_nodes[&n]))
                    .collect::<Result<_>>()?;
                per_sample.push(hinge_loss_node(tape, s_pos, &s_negs, config.margin)?);
            }
            let mut total = tape.mean_of(&per_sample)?;
            if !mse_batch.is_empty() {
                let pseudo = pseudo
                    .as_ref()
                    .ok_or_else(|| Error::contract("mse adapter variant requires pseudo targets"))?;
                let mut pairs = Vec::new();
                for &r in &mse_batch {
                    let target = pseudo.get(r).ok_or_else(|| {
                        Error::contract(format!("no pseudo target for seen relation {}", r))
                    })?;
                    let t = tape.constant(Tensor::vector(target.to_vec()))?;
                    let e = tape.constant(Tensor::vector(model.general_rel[r].clone()))?;
                    let mapped = apply_adapter(tape, binding, ADAPTER_W, ADAPTER_B, e, None)?;
                    pairs.push((t, mapped));
                }
                let mse = adapter::mse_loss_node(tape, &pairs)?;
                let weighted = tape.scale(mse, config.lambda_adapter)?;
                total = tape.add(total, weighted)?;
            }
            if !recon_batch.is_empty() {
                let inputs: Vec<NodeId> = recon_batch
                    .iter()
                    .map(|&r| tape.constant(Tensor::vector(model.general_rel[r].clone())))
                    .collect::<Result<_>>()?;
                let recon = reconstruction_loss_node(tape, binding, &inputs)?;
                let weighted = tape.scale(recon, config.lambda_recon)?;
                total = tape.add(total, weighted)?;
            }
            Ok(total)
        },
    )?;
    optimizer.step(&mut model.params, &grads, config.learning_rate)?;
    Ok(loss)
}

fn dev_accuracy(
    model: &TrainedModel,
    samples: &[QASample],
    candidates: &BTreeMap<String, Vec<usize>>,
    rel_vecs: &[Vec<f64>],
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let all: Vec<usize> = (0..model.relations.len()).collect();
    let mut correct = 0usize;
    for s in samples {
        let gold = match model.relations.id(&s.relation) {
            Some(g) => g,
            None => continue,
        };
        let cands = candidates.get(&s.subject).map(|v| v.as_slice()).unwrap_or(&all);
        let q = model.question_vec(&s.question)?;
        let mut best: Option<(f64, usize)> = None;
        for &c in cands {
            let sc = encoders::score(&q, &rel_vecs[c])?;
            let better = match best {
                None => true,
                Some((bs, bc)) => sc > bs || (sc == bs && c < bc),
            };
            if better {
                best = Some((sc, c));
            }
        }
        if best.map(|(_, c)| c) == Some(gold) {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

fn subject_candidate_map(
    kg: &KnowledgeGraph,
    relations: &RelationVocabulary,
) -> BTreeMap<String, Vec<usize>> {
    let mut map: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (s, r, _) in &kg.triples {
        if let Some(id) = relations.id(r) {
            map.entry(s.clone()).or_default().insert(id);
        }
    }
    map.into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// Model selection metric per phase: pretraining early-stops on Dev-seen
/// micro; joint training selects on the balanced mean of Dev-seen and
/// Dev-unseen micro, the same data the full-scale protocol tunes on.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Selection {
    DevSeen,
    DevCombined,
}

fn run_training(
    model: &mut TrainedModel,
    split: &DatasetSplit,
    kg: &KnowledgeGraph,
    selection: Selection,
) -> Result<()> {
    let config = model.config;
    if model.variant.requires_pseudo_targets() && model.pseudo_targets.is_none() {
        return Err(Error::contract(format!(
            "variant {} requires pseudo targets",
            model.variant.as_str()
        )));
    }

    let prepared: Vec<PreparedSample> = split
        .train
        .iter()
        .map(|s| {
            Ok(PreparedSample {
                word_ids: model.word_ids(&s.question),
                gold: model
                    .relations
                    .id(&s.relation)
                    .ok_or_else(|| Error::contract(format!("unknown relation {}", s.relation)))?,
            })
        })
        .collect::<Result<_>>()?;
    let seen: Vec<usize> = model.seen.iter().copied().collect();
    let all_relations: Vec<usize> = (0..model.relations.len()).collect();
    if seen.len() < 2 {
        return Err(Error::contract("need at least 2 seen relations for negative sampling"));
    }
    let candidates = subject_candidate_map(kg, &model.relations);

    let mut optimizer = RmsPropState::new(0.9, 1e-8);
    let mut best_dev = f64::NEG_INFINITY;
    let mut best_params: Option<ParamSet> = None;
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1, epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.seed,
                2 + epoch as u64,
                bi as u64,
            ));
            let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &prepared[i]).collect();
            epoch_loss += detector_step(
                model,
                &mut optimizer,
                &batch,
                &seen,
                &seen,
                &all_relations,
                &mut rng,
            )?;
            batches += 1;
            if model.variant.adversarial() {
                wgan_alternation_step(model, &mut optimizer, &mut rng, &seen, &all_relations)?;
            }
        }

        let rel_vecs = model.relation_vecs()?;
        let dev_seen_acc = dev_accuracy(model, &split.dev_seen, &candidates, &rel_vecs)?;
        let dev_unseen_acc = dev_accuracy(model, &split.dev_unseen, &candidates, &rel_vecs)?;
        model.log.push(EpochLog {
            epoch,
            loss: epoch_loss / batches.max(1) as f64,
            dev_seen_acc,
            dev_unseen_acc,
        });

        let selector = match selection {
            Selection::DevSeen => dev_seen_acc,
            // unweighted mean: the dev pool is unseen-heavy, and size
            // weighting would let the selector trade away seen accuracy
            Selection::DevCombined => (dev_seen_acc + dev_unseen_acc) / 2.0,
        };
        if selector > best_dev {
            best_dev = selector;
            best_params = Some(model.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    if let Some(p) = best_params {
        model.params = p;
    }
    Ok(())
}

/// Train the fine-tuning baseline and snapshot the fine-tuned relation
/// embeddings of every seen relation as the pseudo targets.
pub fn pretrain_baseline(
    split: &DatasetSplit,
    kg: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    dims: &ModelDims,
    config: &TrainConfig,
) -> Result<(TrainedModel, PseudoTargetStore)> {
    let mut model = build_model(split, embeddings, ModelVariant::BaselineFinetune, dims, config)?;
    run_training(&mut model, split, kg, Selection::DevSeen)?;
    let table = model
        .params
        .get("rel_emb")
        .ok_or_else(|| Error::contract("pretrained model has no relation table"))?;
    let mut store = PseudoTargetStore::new(dims.relation_dim);
    for &r in &model.seen {
        store.insert(r, table.row(r).data().to_vec())?;
    }
    model.pseudo_targets = Some(store.clone());
    Ok((model, store))
}

/// Parameter names shared between the pretrained detector and a joint
/// model: the encoders, not the relation-level path.
fn is_encoder_param(name: &str) -> bool {
    name == "word_emb" || name == "rel_proj" || name.starts_with("lstm1") || name.starts_with("lstm2")
}

/// Joint training of any variant. Adapter variants continue from a
/// pretrained baseline: its encoder parameters warm-start the joint model
/// and its fine-tuned relation rows become the pseudo targets — the
/// targets only make sense in the geometry of the encoder they were
/// fine-tuned with.
pub fn train_with_adapter(
    split: &DatasetSplit,
    kg: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    baseline: Option<&TrainedModel>,
    variant: ModelVariant,
    dims: &ModelDims,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    let mut model = build_model(split, embeddings, variant, dims, config)?;
    if let Some(b) = baseline {
        for (name, t) in b.params.iter() {
            if !is_encoder_param(name) {
                continue;
            }
            match model.params.get(name) {
                Some(own) if own.shape() == t.shape() => {
                    model.params.insert(name.clone(), t.clone());
                }
                _ => {
                    return Err(Error::contract(format!(
                        "baseline parameter {} does not match the joint model",
                        name
                    )))
                }
            }
        }
        model.pseudo_targets = b.pseudo_targets.clone();
    }
    run_training(&mut model, split, kg, Selection::DevCombined)?;
    Ok(model)
}

/// Train a variant end to end, running the pretraining stage first when
/// the variant builds on it and no baseline was supplied.
pub fn train_variant(
    split: &DatasetSplit,
    kg: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    variant: ModelVariant,
    dims: &ModelDims,
    config: &TrainConfig,
    baseline: Option<TrainedModel>,
) -> Result<TrainedModel> {
    if variant == ModelVariant::BaselineFinetune && baseline.is_none() {
        return pretrain_baseline(split, kg, embeddings, dims, config).map(|(m, _)| m);
    }
    let baseline = match (variant.uses_adapter(), baseline) {
        (true, None) => Some(pretrain_baseline(split, kg, embeddings, dims, config)?.0),
        (_, b) => b,
    };
    train_with_adapter(split, kg, embeddings, baseline.as_ref(), variant, dims, config)
}
