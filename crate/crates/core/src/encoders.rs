//! Vocabulary, embedding tables, BiLSTM sequence encoders, and the
//! question/relation encoders producing the matching vectors.
//!
//! The question encoder is a 2-layer BiLSTM with residual summation and
//! max-over-time pooling. The relation encoder reuses the first (word
//! level) BiLSTM and appends the relation-level vector to the word token
//! sequence as one extra pseudo-token.

use crate::autodiff::{Binding, NodeId, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token inventory with dense ids; id 0 is padding, id 1 is the unknown token.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new()
    }
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        v.add(PAD_TOKEN);
        v.add(UNK_TOKEN);
        v
    }

    pub fn add(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Id of a token, or the unknown id when absent.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Pretrained vectors keyed by token (words and full relation names share
/// one table when they live in the same space).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub trainable: bool,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            dim,
            trainable: false,
            tokens: Vec::new(),
            vectors: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, vec: Vec<f64>) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::Format(format!(
                "embedding for {:?} has dim {}, table dim {}",
                token,
                vec.len(),
                self.dim
            )));
        }
        if let Some(&i) = self.index.get(token) {
            self.vectors[i] = vec;
            return Ok(());
        }
        self.index.insert(token.to_string(), self.vectors.len());
        self.tokens.push(token.to_string());
        self.vectors.push(vec);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.vectors[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.tokens.iter().zip(self.vectors.iter())
    }

    /// Mean of all stored vectors; used to seed the unknown-token row.
    pub fn mean_vector(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        if self.vectors.is_empty() {
            return m;
        }
        for v in &self.vectors {
            for (mi, &x) in m.iter_mut().zip(v) {
                *mi += x;
            }
        }
        let n = self.vectors.len() as f64;
        for mi in &mut m {
            *mi /= n;
        }
        m
    }
}

/// Encoder/table dimensions. Defaults follow the full-scale configuration;
/// desk-scale runs override them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub word_dim: usize,
    pub relation_dim: usize,
    pub hidden: usize,
    pub disc_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word_dim: 300,
            relation_dim: 300,
            hidden: 256,
            disc_hidden: 256,
        }
    }
}

impl ModelDims {
    /// Output dimension of the BiLSTM encoders.
    pub fn encoding_dim(&self) -> usize {
        2 * self.hidden
    }
}

const GATES: [&str; 4] = ["i", "f", "o", "c"];
const DIRS: [&str; 2] = ["fwd", "bwd"];

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, data).expect("sized by construction")
}

pub fn glorot_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    glorot(rng, rows, cols)
}

/// Register one BiLSTM layer's parameters under `prefix`.
pub fn init_bilstm_params(params: &mut ParamSet, prefix: &str, input_dim: usize, hidden: usize, rng: &mut impl Rng) {
    for dir in DIRS {
        for gate in GATES {
            params.insert(format!("{prefix}.{dir}.{gate}.w"), glorot(rng, hidden, input_dim));
            params.insert(format!("{prefix}.{dir}.{gate}.u"), glorot(rng, hidden, hidden));
            params.insert(format!("{prefix}.{dir}.{gate}.b"), Tensor::zeros(&[hidden]));
        }
    }
}

fn lstm_cell(
    tape: &mut Tape,
    binding: &Binding,
    prefix: &str,
    dir: &str,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let gate = |tape: &mut Tape, g: &str, x: NodeId, h: NodeId| -> Result<NodeId> {
        let w = binding[&format!("{prefix}.{dir}.{g}.w")];
        let u = binding[&format!("{prefix}.{dir}.{g}.u")];
        let b = binding[&format!("{prefix}.{dir}.{g}.b")];
        let wx = tape.matmul(w, x)?;
        let uh = tape.matmul(u, h)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let i = {
        let z = gate(tape, "i", x, h)?;
        tape.sigmoid(z)?
    };
    let f = {
        let z = gate(tape, "f", x, h)?;
        tape.sigmoid(z)?
    };
    let o = {
        let z = gate(tape, "o", x, h)?;
        tape.sigmoid(z)?
    };
    let g = {
        let z = gate(tape, "c", x, h)?;
        tape.tanh(z)?
    };
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_new = tape.add(fc, ig)?;
    let ct = tape.tanh(c_new)?;
    let h_new = tape.mul(o, ct)?;
    Ok((h_new, c_new))
}

/// Run the BiLSTM registered under `prefix` over a sequence of input
/// vector nodes; per-step forward/backward hidden states are concatenated,
/// so each output has dimension 2·hidden.
pub fn bilstm_encode(
    tape: &mut Tape,
    binding: &Binding,
    prefix: &str,
    inputs: &[NodeId],
    hidden: usize,
) -> Result<Vec<NodeId>> {
    if inputs.is_empty() {
        return Err(Error::contract("bilstm_encode: empty input sequence"));
    }
    let run_dir = |tape: &mut Tape, dir: &str, order: Vec<usize>| -> Result<Vec<NodeId>> {
        let mut h = tape.constant(Tensor::zeros(&[hidden]))?;
        let mut c = tape.constant(Tensor::zeros(&[hidden]))?;
        let mut out = vec![0usize; inputs.len()];
        for &t in &order {
            let (h2, c2) = lstm_cell(tape, binding, prefix, dir, inputs[t], h, c)?;
            h = h2;
            c = c2;
            out[t] = h;
        }
        Ok(out)
    };
    let fwd = run_dir(tape, "fwd", (0..inputs.len()).collect())?;
    let bwd = run_dir(tape, "bwd", (0..inputs.len()).rev().collect())?;
    fwd.iter()
        .zip(&bwd)
        .map(|(&f, &b)| tape.concat(&[f, b]))
        .collect()
}

/// Encode a question: embeddings → shared word BiLSTM → second BiLSTM →
/// residual sum → max-over-time pooling.
pub fn encode_question(
    tape: &mut Tape,
    binding: &Binding,
    word_ids: &[usize],
    dims: &ModelDims,
) -> Result<NodeId> {
    if word_ids.is_empty() {
        return Err(Error::contract("encode_question: empty question"));
    }
    let table = binding["word_emb"];
    let embs: Vec<NodeId> = word_ids
        .iter()
        .map(|&id| tape.row(table, id))
        .collect::<Result<_>>()?;
    let layer1 = bilstm_encode(tape, binding, "lstm1", &embs, dims.hidden)?;
    let layer2 = bilstm_encode(tape, binding, "lstm2", &layer1, dims.hidden)?;
    let summed: Vec<NodeId> = layer1
        .iter()
        .zip(&layer2)
        .map(|(&a, &b)| tape.add(a, b))
        .collect::<Result<_>>()?;
    tape.max_over_time(&summed)
}

/// Split a relation name into lowercase word tokens on '.' and '_'.
pub fn tokenize_relation(name: &str) -> Result<Vec<String>> {
    if name.is_empty() {
        return Err(Error::contract("tokenize_relation: empty relation name"));
    }
    Ok(name
        .split(['.', '_'])
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect())
}

/// Encode a relation from its word tokens plus a relation-level vector
/// node. The relation-level vector joins the sequence as one extra
/// pseudo-token, projected when the relation dim differs from the word dim;
/// the word-level BiLSTM is shared with the question encoder.
pub fn encode_relation(
    tape: &mut Tape,
    binding: &Binding,
    word_ids: &[usize],
    relation_vec: NodeId,
    dims: &ModelDims,
) -> Result<NodeId> {
    let rv = tape.forward(relation_vec);
    if rv.len() != dims.relation_dim {
        return Err(Error::dim(
            "encode_relation",
            format!("relation vector len {} vs dim {}", rv.len(), dims.relation_dim),
        ));
    }
    let rel_token = if dims.relation_dim == dims.word_dim {
        relation_vec
    } else {
        tape.matmul(binding["rel_proj"], relation_vec)?
    };
    let table = binding["word_emb"];
    let mut seq: Vec<NodeId> = word_ids
        .iter()
        .map(|&id| tape.row(table, id))
        .collect::<Result<_>>()?;
    seq.push(rel_token);
    let outs = bilstm_encode(tape, binding, "lstm1", &seq, dims.hidden)?;
    tape.max_over_time(&outs)
}

/// Cosine similarity between a question encoding and a relation encoding.
pub fn score(q: &[f64], r: &[f64]) -> Result<f64> {
    crate::tensor::cosine(q, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::run_loss;
    use crate::autodiff::finite_difference_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_dims() -> ModelDims {
        ModelDims {
            word_dim: 3,
            relation_dim: 3,
            hidden: 2,
            disc_hidden: 4,
        }
    }

    fn setup_params(dims: &ModelDims, vocab_size: usize, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        params.insert("word_emb", glorot_matrix(&mut rng, vocab_size, dims.word_dim));
        init_bilstm_params(&mut params, "lstm1", dims.word_dim, dims.hidden, &mut rng);
        init_bilstm_params(&mut params, "lstm2", 2 * dims.hidden, dims.hidden, &mut rng);
        params
    }

    #[test]
    fn tokenize_freebase_paths() {
        assert_eq!(
            tokenize_relation("music.recording.producer").unwrap(),
            vec!["music", "recording", "producer"]
        );
        assert_eq!(
            tokenize_relation("people.person.place_of_birth").unwrap(),
            vec!["people", "person", "place", "of", "birth"]
        );
        assert_eq!(tokenize_relation("x").unwrap(), vec!["x"]);
        assert!(tokenize_relation("").is_err());
    }

    #[test]
    fn zero_weights_zero_inputs_give_zero_outputs() {
        let dims = small_dims();
        let mut params = ParamSet::new();
        for dir in ["fwd", "bwd"] {
            for gate in ["i", "f", "o", "c"] {
                params.insert(format!("lstm1.{dir}.{gate}.w"), Tensor::zeros(&[dims.hidden, dims.word_dim]));
                params.insert(format!("lstm1.{dir}.{gate}.u"), Tensor::zeros(&[dims.hidden, dims.hidden]));
                params.insert(format!("lstm1.{dir}.{gate}.b"), Tensor::zeros(&[dims.hidden]));
            }
        }
        let mut tape = Tape::new();
        let binding = params.bind(&mut tape, |_| true).unwrap();
        let x0 = tape.constant(Tensor::zeros(&[dims.word_dim])).unwrap();
        let x1 = tape.constant(Tensor::zeros(&[dims.word_dim])).unwrap();
        let outs = bilstm_encode(&mut tape, &binding, "lstm1", &[x0, x1], dims.hidden).unwrap();
        for o in outs {
            assert!(tape.forward(o).data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn bilstm_empty_sequence_rejected() {
        let dims = small_dims();
        let params = setup_params(&dims, 4, 1);
        let mut tape = Tape::new();
        let binding = params.bind(&mut tape, |_| true).unwrap();
        assert!(bilstm_encode(&mut tape, &binding, "lstm1", &[], dims.hidden).is_err());
    }

    /// Independent scalar-loop LSTM oracle.
    fn lstm_oracle(
        params: &ParamSet,
        prefix: &str,
        dir: &str,
        inputs: &[Vec<f64>],
        hidden: usize,
    ) -> Vec<Vec<f64>> {
        let get = |name: String| params.get(&name).unwrap();
        let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut out = Vec::new();
        for x in inputs {
            let mut gates = BTreeMap::new();
            for g in ["i", "f", "o", "c"] {
                let w = get(format!("{prefix}.{dir}.{g}.w"));
                let u = get(format!("{prefix}.{dir}.{g}.u"));
                let b = get(format!("{prefix}.{dir}.{g}.b"));
                let mut z = vec![0.0; hidden];
                for r in 0..hidden {
                    let mut acc = b.data()[r];
                    for j in 0..x.len() {
                        acc += w.get2(r, j) * x[j];
                    }
                    for j in 0..hidden {
                        acc += u.get2(r, j) * h[j];
                    }
                    z[r] = acc;
                }
                gates.insert(g, z);
            }
            let mut c2 = vec![0.0; hidden];
            let mut h2 = vec![0.0; hidden];
            for r in 0..hidden {
                let i = sigma(gates["i"][r]);
                let f = sigma(gates["f"][r]);
                let o = sigma(gates["o"][r]);
                let g = gates["c"][r].tanh();
                c2[r] = f * c[r] + i * g;
                h2[r] = o * c2[r].tanh();
            }
            h = h2;
            c = c2;
            out.push(h.clone());
        }
        out
    }

    #[test]
    fn bilstm_matches_scalar_oracle() {
        let dims = small_dims();
        let params = setup_params(&dims, 4, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..dims.word_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();

        let mut tape = Tape::new();
        let binding = params.bind(&mut tape, |_| true).unwrap();
        let nodes: Vec<NodeId> = inputs
            .iter()
            .map(|v| tape.constant(Tensor::vector(v.clone())).unwrap())
            .collect();
        let outs = bilstm_encode(&mut tape, &binding, "lstm1", &nodes, dims.hidden).unwrap();

        let fwd = lstm_oracle(&params, "lstm1", "fwd", &inputs, dims.hidden);
        let rev_inputs: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
        let mut bwd = lstm_oracle(&params, "lstm1", "bwd", &rev_inputs, dims.hidden);
        bwd.reverse();

        for t in 0..inputs.len() {
            let got = tape.forward(outs[t]).data();
            let want: Vec<f64> = fwd[t].iter().chain(&bwd[t]).copied().collect();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "step {}: {} vs {}", t, g, w);
            }
        }
    }

    #[test]
    fn question_encoding_dim_and_order_sensitivity() {
        let dims = small_dims();
        let params = setup_params(&dims, 6, 3);
        let encode = |ids: &[usize]| {
            let mut tape = Tape::new();
            let binding = params.bind(&mut tape, |_| true).unwrap();
            let q = encode_question(&mut tape, &binding, ids, &dims).unwrap();
            tape.forward(q).data().to_vec()
        };
        let a = encode(&[2, 3, 4]);
        let b = encode(&[4, 3, 2]);
        assert_eq!(a.len(), dims.encoding_dim());
        assert_ne!(a, b, "permuting token order should change q_f");
        // one-token question: pooling over a single step
        let single = encode(&[2]);
        assert_eq!(single.len(), dims.encoding_dim());
        // determinism
        assert_eq!(a, encode(&[2, 3, 4]));
    }

    #[test]
    fn relation_encoding_depends_on_relation_vector() {
        let dims = small_dims();
        let params = setup_params(&dims, 6, 5);
        let encode = |rel: Vec<f64>| {
            let mut tape = Tape::new();
            let binding = params.bind(&mut tape, |_| true).unwrap();
            let rv = tape.constant(Tensor::vector(rel)).unwrap();
            let r = encode_relation(&mut tape, &binding, &[2, 3], rv, &dims).unwrap();
            tape.forward(r).data().to_vec()
        };
        let a = encode(vec![0.5, -0.2, 0.3]);
        let b = encode(vec![-0.5, 0.8, 0.1]);
        assert_eq!(a.len(), dims.encoding_dim());
        assert_ne!(a, b);
        assert_eq!(a, encode(vec![0.5, -0.2, 0.3]));
    }

    #[test]
    fn score_properties() {
        let v = [0.3, -0.4, 0.5];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((score(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!((score(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((score(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
        // scale invariance
        let scaled: Vec<f64> = v.iter().map(|x| 3.7 * x).collect();
        let u = [0.9, 0.1, -0.2];
        assert!((score(&v, &u).unwrap() - score(&scaled, &u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn encoder_gradients_pass_finite_difference_check() {
        let dims = small_dims();
        let params = setup_params(&dims, 5, 11);
        let eval = |p: &ParamSet| {
            run_loss(p, |_| false, |tape, b| {
                let q = encode_question(tape, b, &[2, 3], &dims)?;
                let rv = tape.constant(Tensor::vector(vec![0.4, -0.1, 0.2]))?;
                let r = encode_relation(tape, b, &[4], rv, &dims)?;
                tape.cosine(q, r)
            })
        };
        let report = finite_difference_check(eval, &params, 1e-5, 1e-4).unwrap();
        assert!(report.pass, "max err {}", report.max_relative_error);
    }

    #[test]
    fn unknown_words_map_to_unk_row() {
        let mut vocab = Vocabulary::new();
        vocab.add("known");
        assert_eq!(vocab.id("known"), 2);
        assert_eq!(vocab.id("missing"), UNK_ID);
    }
}
