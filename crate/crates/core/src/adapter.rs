//! The representation adapter G, its reverse G', the Wasserstein critic D,
//! and the adapter loss functions.
//!
//! G and G' are square linear maps on the relation embedding space,
//! initialized near the identity. D is a small feed-forward critic with a
//! tanh hidden layer and a linear output (no squashing).

use crate::autodiff::{Binding, NodeId, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const ADAPTER_W: &str = "adapter.w";
pub const ADAPTER_B: &str = "adapter.b";
pub const REVERSE_W: &str = "readapter.w";
pub const REVERSE_B: &str = "readapter.b";
pub const DISC_PREFIX: &str = "disc.";

/// Fine-tuned task-space vectors for seen relations, keyed by relation id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PseudoTargetStore {
    pub dim: usize,
    map: BTreeMap<usize, Vec<f64>>,
}

impl PseudoTargetStore {
    pub fn new(dim: usize) -> PseudoTargetStore {
        PseudoTargetStore {
            dim,
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, relation: usize, vec: Vec<f64>) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::dim(
                "pseudo_target",
                format!("vector len {} vs dim {}", vec.len(), self.dim),
            ));
        }
        self.map.insert(relation, vec);
        Ok(())
    }

    pub fn get(&self, relation: usize) -> Option<&[f64]> {
        self.map.get(&relation).map(|v| v.as_slice())
    }

    pub fn relations(&self) -> impl Iterator<Item = usize> + '_ {
        self.map.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn identity_plus_noise(rng: &mut impl Rng, d: usize, noise: f64) -> Tensor {
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            data[i * d + j] = if i == j { 1.0 } else { 0.0 } + rng.gen_range(-noise..noise);
        }
    }
    Tensor::matrix(d, d, data).expect("square by construction")
}

/// Register G: identity plus U(-0.01, 0.01) noise, bias optional.
pub fn init_adapter_params(params: &mut ParamSet, dim: usize, bias: bool, rng: &mut impl Rng) {
    params.insert(ADAPTER_W, identity_plus_noise(rng, dim, 0.01));
    if bias {
        params.insert(ADAPTER_B, Tensor::zeros(&[dim]));
    }
}

/// Register G' with the same initialization scheme as G.
pub fn init_reverse_adapter_params(params: &mut ParamSet, dim: usize, bias: bool, rng: &mut impl Rng) {
    params.insert(REVERSE_W, identity_plus_noise(rng, dim, 0.01));
    if bias {
        params.insert(REVERSE_B, Tensor::zeros(&[dim]));
    }
}

/// Register the critic D: dim → hidden (tanh) → 1 (linear).
pub fn init_discriminator_params(params: &mut ParamSet, dim: usize, hidden: usize, rng: &mut impl Rng) {
    params.insert("disc.w1", crate::encoders::glorot_matrix(rng, hidden, dim));
    params.insert("disc.b1", Tensor::zeros(&[hidden]));
    params.insert("disc.w2", crate::encoders::glorot_matrix(rng, 1, hidden));
    params.insert("disc.b2", Tensor::zeros(&[1]));
}

/// G(e_g) (or G'(v) via the reverse parameter names) with an optional
/// dropout mask applied to the output during training.
pub fn apply_adapter(
    tape: &mut Tape,
    binding: &Binding,
    w_name: &str,
    b_name: &str,
    input: NodeId,
    dropout_mask: Option<&Tensor>,
) -> Result<NodeId> {
    let w = *binding
        .get(w_name)
        .ok_or_else(|| Error::contract(format!("adapter parameter {} not bound", w_name)))?;
    let mut out = tape.matmul(w, input)?;
    if let Some(&b) = binding.get(b_name) {
        out = tape.add(out, b)?;
    }
    if let Some(mask) = dropout_mask {
        out = tape.dropout(out, mask.clone())?;
    }
    Ok(out)
}

/// Critic score of a vector node: unbounded real.
pub fn discriminator_score(tape: &mut Tape, binding: &Binding, v: NodeId) -> Result<NodeId> {
    let z1 = tape.matmul(binding["disc.w1"], v)?;
    let z1 = tape.add(z1, binding["disc.b1"])?;
    let h = tape.tanh(z1)?;
    let z2 = tape.matmul(binding["disc.w2"], h)?;
    tape.add(z2, binding["disc.b2"])
}

/// Squared euclidean distance between two vector nodes.
pub fn squared_distance(tape: &mut Tape, a: NodeId, b: NodeId) -> Result<NodeId> {
    let d = tape.sub(a, b)?;
    let sq = tape.mul(d, d)?;
    tape.sum(sq)
}

/// Mean over pairs of ||target − mapped||²₂ (batch-mean form of the MSE
/// adapter objective over seen relations).
pub fn mse_loss_node(tape: &mut Tape, pairs: &[(NodeId, NodeId)]) -> Result<NodeId> {
    if pairs.is_empty() {
        return Err(Error::contract("mse adapter loss over an empty batch"));
    }
    let terms: Vec<NodeId> = pairs
        .iter()
        .map(|&(target, mapped)| squared_distance(tape, target, mapped))
        .collect::<Result<_>>()?;
    tape.mean_of(&terms)
}

/// mean(D(fake)) − mean(D(real)); minimized in critic steps.
pub fn wgan_d_loss_node(tape: &mut Tape, fake: &[NodeId], real: &[NodeId]) -> Result<NodeId> {
    if fake.is_empty() || real.is_empty() {
        return Err(Error::contract("wgan_d_loss: empty batch"));
    }
    let mf = tape.mean_of(fake)?;
    let mr = tape.mean_of(real)?;
    tape.sub(mf, mr)
}

/// −mean(D(fake)); minimized in generator steps with D frozen.
pub fn wgan_g_loss_node(tape: &mut Tape, fake: &[NodeId]) -> Result<NodeId> {
    if fake.is_empty() {
        return Err(Error::contract("wgan_g_loss: empty batch"));
    }
    let m = tape.mean_of(fake)?;
    tape.scale(m, -1.0)
}

/// Mean over the batch of ||G'(G(e_g)) − e_g||²₂; the batch may mix seen
/// and unseen relations.
pub fn reconstruction_loss_node(
    tape: &mut Tape,
    binding: &Binding,
    inputs: &[NodeId],
) -> Result<NodeId> {
    if inputs.is_empty() {
        return Err(Error::contract("reconstruction loss over an empty batch"));
    }
    let terms: Vec<NodeId> = inputs
        .iter()
        .map(|&e| {
            let mapped = apply_adapter(tape, binding, ADAPTER_W, ADAPTER_B, e, None)?;
            let back = apply_adapter(tape, binding, REVERSE_W, REVERSE_B, mapped, None)?;
            squared_distance(tape, back, e)
        })
        .collect::<Result<_>>()?;
    tape.mean_of(&terms)
}

// ---------------------------------------------------------------------------
// Value-level wrappers (convenience for evaluation and tests)
// ---------------------------------------------------------------------------

/// MSE adapter loss over a batch of seen relation ids, as a plain value.
/// `general` maps a relation id to its frozen e_g vector.
pub fn mse_adapter_loss(
    params: &ParamSet,
    targets: &PseudoTargetStore,
    general: &dyn Fn(usize) -> Option<Vec<f64>>,
    batch: &[usize],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("mse_adapter_loss: empty batch"));
    }
    let (value, _) = crate::autodiff::run_loss(params, |_| true, |tape, binding| {
        let mut pairs = Vec::new();
        for &r in batch {
            let target = targets.get(r).ok_or_else(|| {
                Error::contract(format!("relation {} has no pseudo target (not seen)", r))
            })?;
            let e_g = general(r)
                .ok_or_else(|| Error::contract(format!("relation {} has no general embedding", r)))?;
            let t = tape.constant(Tensor::vector(target.to_vec()))?;
            let e = tape.constant(Tensor::vector(e_g))?;
            let mapped = apply_adapter(tape, binding, ADAPTER_W, ADAPTER_B, e, None)?;
            pairs.push((t, mapped));
        }
        mse_loss_node(tape, &pairs)
    })?;
    Ok(value)
}

/// Reconstruction loss over a batch of relation ids, as a plain value.
pub fn reconstruction_loss(
    params: &ParamSet,
    general: &dyn Fn(usize) -> Option<Vec<f64>>,
    batch: &[usize],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("reconstruction_loss: empty batch"));
    }
    let (value, _) = crate::autodiff::run_loss(params, |_| true, |tape, binding| {
        let inputs: Vec<NodeId> = batch
            .iter()
            .map(|&r| {
                let e_g = general(r).ok_or_else(|| {
                    Error::contract(format!("relation {} has no general embedding", r))
                })?;
                tape.constant(Tensor::vector(e_g))
            })
            .collect::<Result<_>>()?;
        reconstruction_loss_node(tape, binding, &inputs)
    })?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_check, run_loss};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adapter_params(d: usize, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        init_adapter_params(&mut p, d, false, &mut rng);
        init_reverse_adapter_params(&mut p, d, false, &mut rng);
        p
    }

    #[test]
    fn identity_adapter_is_identity() {
        let mut p = ParamSet::new();
        p.insert(ADAPTER_W, Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let mut tape = Tape::new();
        let b = p.bind(&mut tape, |_| true).unwrap();
        let e = tape.constant(Tensor::vector(vec![0.3, -0.8])).unwrap();
        let out = apply_adapter(&mut tape, &b, ADAPTER_W, ADAPTER_B, e, None).unwrap();
        assert_eq!(tape.forward(out).data(), &[0.3, -0.8]);
    }

    #[test]
    fn diagonal_adapter_direct_value() {
        let mut p = ParamSet::new();
        p.insert(ADAPTER_W, Tensor::matrix(2, 2, vec![2.0, 0.0, 0.0, 3.0]).unwrap());
        let mut tape = Tape::new();
        let b = p.bind(&mut tape, |_| true).unwrap();
        let e = tape.constant(Tensor::vector(vec![1.0, 1.0])).unwrap();
        let out = apply_adapter(&mut tape, &b, ADAPTER_W, ADAPTER_B, e, None).unwrap();
        assert_eq!(tape.forward(out).data(), &[2.0, 3.0]);
    }

    #[test]
    fn zero_adapter_gives_zero() {
        let mut p = ParamSet::new();
        p.insert(ADAPTER_W, Tensor::zeros(&[2, 2]));
        let mut tape = Tape::new();
        let b = p.bind(&mut tape, |_| true).unwrap();
        let e = tape.constant(Tensor::vector(vec![1.0, -2.0])).unwrap();
        let out = apply_adapter(&mut tape, &b, ADAPTER_W, ADAPTER_B, e, None).unwrap();
        assert_eq!(tape.forward(out).data(), &[0.0, 0.0]);
    }

    #[test]
    fn mse_loss_direct_values() {
        // ê=(1,0) vs mapped=(0,1) → 2.0; mean with an exact pair → 1.0.
        let mut tape = Tape::new();
        let t1 = tape.constant(Tensor::vector(vec![1.0, 0.0])).unwrap();
        let m1 = tape.constant(Tensor::vector(vec![0.0, 1.0])).unwrap();
        let single = mse_loss_node(&mut tape, &[(t1, m1)]).unwrap();
        assert_eq!(tape.forward(single).item(), 2.0);

        let t2 = tape.constant(Tensor::vector(vec![0.5, -0.5])).unwrap();
        let both = mse_loss_node(&mut tape, &[(t1, m1), (t2, t2)]).unwrap();
        assert_eq!(tape.forward(both).item(), 1.0);
    }

    #[test]
    fn mse_loss_requires_pseudo_target() {
        let p = adapter_params(2, 1);
        let mut targets = PseudoTargetStore::new(2);
        targets.insert(0, vec![1.0, 0.0]).unwrap();
        let general = |r: usize| if r < 2 { Some(vec![0.1, 0.2]) } else { None };
        // relation 1 is not seen → contract error
        assert!(mse_adapter_loss(&p, &targets, &general, &[0, 1]).is_err());
        // exact match on relation 0 → loss value matches formula
        let v = mse_adapter_loss(&p, &targets, &general, &[0]).unwrap();
        assert!(v >= 0.0);
    }

    #[test]
    fn discriminator_zero_weights() {
        let mut p = ParamSet::new();
        p.insert("disc.w1", Tensor::zeros(&[3, 2]));
        p.insert("disc.b1", Tensor::zeros(&[3]));
        p.insert("disc.w2", Tensor::zeros(&[1, 3]));
        p.insert("disc.b2", Tensor::vector(vec![0.75]));
        let mut tape = Tape::new();
        let b = p.bind(&mut tape, |_| true).unwrap();
        let v = tape.constant(Tensor::vector(vec![5.0, -3.0])).unwrap();
        let s = discriminator_score(&mut tape, &b, v).unwrap();
        // zero hidden weights → output equals the output bias
        assert_eq!(tape.forward(s).item(), 0.75);
    }

    #[test]
    fn discriminator_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (d, h) = (3, 4);
        let mut p = ParamSet::new();
        init_discriminator_params(&mut p, d, h, &mut rng);
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        let b = p.bind(&mut tape, |_| true).unwrap();
        let vn = tape.constant(Tensor::vector(v.clone())).unwrap();
        let s = discriminator_score(&mut tape, &b, vn).unwrap();

        // hand-rolled forward
        let w1 = p.get("disc.w1").unwrap();
        let w2 = p.get("disc.w2").unwrap();
        let b1 = p.get("disc.b1").unwrap();
        let b2 = p.get("disc.b2").unwrap();
        let mut expect = b2.data()[0];
        for r in 0..h {
            let mut z = b1.data()[r];
            for j in 0..d {
                z += w1.get2(r, j) * v[j];
            }
            expect += w2.get2(0, r) * z.tanh();
        }
        assert!((tape.forward(s).item() - expect).abs() < 1e-12);
    }

    #[test]
    fn wgan_losses_direct_values() {
        let mut tape = Tape::new();
        let c = |tape: &mut Tape, x: f64| tape.constant(Tensor::scalar(x)).unwrap();
        let f1 = c(&mut tape, 1.0);
        let f3 = c(&mut tape, 3.0);
        let r2 = c(&mut tape, 2.0);
        let r4 = c(&mut tape, 4.0);
        let d = wgan_d_loss_node(&mut tape, &[f1, f3], &[r2, r4]).unwrap();
        assert_eq!(tape.forward(d).item(), -1.0);
        let g = wgan_g_loss_node(&mut tape, &[f1, f3]).unwrap();
        assert_eq!(tape.forward(g).item(), -2.0);
        // identical batches → 0
        let same = wgan_d_loss_node(&mut tape, &[f1, f3], &[f1, f3]).unwrap();
        assert_eq!(tape.forward(same).item(), 0.0);
    }

    #[test]
    fn reconstruction_direct_values() {
        // d=1: G: x→2x, G': x→0.25x, e=1 → (0.5 − 1)² = 0.25
        let mut p = ParamSet::new();
        p.insert(ADAPTER_W, Tensor::matrix(1, 1, vec![2.0]).unwrap());
        p.insert(REVERSE_W, Tensor::matrix(1, 1, vec![0.25]).unwrap());
        let general = |_: usize| Some(vec![1.0]);
        let v = reconstruction_loss(&p, &general, &[0]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_exact_inverse_is_zero() {
        // orthonormal W and its transpose as reverse
        let c = 0.6f64;
        let s = 0.8f64;
        let mut p = ParamSet::new();
        p.insert(ADAPTER_W, Tensor::matrix(2, 2, vec![c, -s, s, c]).unwrap());
        p.insert(REVERSE_W, Tensor::matrix(2, 2, vec![c, s, -s, c]).unwrap());
        let general = |_: usize| Some(vec![0.3, -0.7]);
        let v = reconstruction_loss(&p, &general, &[0, 1]).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn g_loss_gradient_is_negated_fake_term_of_d_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, h) = (3, 4);
        let mut p = ParamSet::new();
        init_adapter_params(&mut p, d, false, &mut rng);
        init_discriminator_params(&mut p, d, h, &mut rng);
        let e: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let real: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // freeze D, differentiate wrt G for both losses
        let frozen = |name: &str| name.starts_with(DISC_PREFIX);
        let (_, g_grads) = run_loss(&p, frozen, |tape, b| {
            let ec = tape.constant(Tensor::vector(e.clone()))?;
            let fake = apply_adapter(tape, b, ADAPTER_W, ADAPTER_B, ec, None)?;
            let fs = discriminator_score(tape, b, fake)?;
            wgan_g_loss_node(tape, &[fs])
        })
        .unwrap();
        let (_, d_grads) = run_loss(&p, frozen, |tape, b| {
            let ec = tape.constant(Tensor::vector(e.clone()))?;
            let fake = apply_adapter(tape, b, ADAPTER_W, ADAPTER_B, ec, None)?;
            let fs = discriminator_score(tape, b, fake)?;
            let rc = tape.constant(Tensor::vector(real.clone()))?;
            let rs = discriminator_score(tape, b, rc)?;
            wgan_d_loss_node(tape, &[fs], &[rs])
        })
        .unwrap();
        let gg = g_grads.get(ADAPTER_W).unwrap();
        let dg = d_grads.get(ADAPTER_W).unwrap();
        for (a, b) in gg.data().iter().zip(dg.data()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn adapter_losses_pass_gradient_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (d, h) = (3, 4);
        let mut p = ParamSet::new();
        init_adapter_params(&mut p, d, false, &mut rng);
        init_reverse_adapter_params(&mut p, d, false, &mut rng);
        init_discriminator_params(&mut p, d, h, &mut rng);
        let e: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mse = |p: &ParamSet| {
            run_loss(p, |_| false, |tape, b| {
                let ec = tape.constant(Tensor::vector(e.clone()))?;
                let tc = tape.constant(Tensor::vector(target.clone()))?;
                let mapped = apply_adapter(tape, b, ADAPTER_W, ADAPTER_B, ec, None)?;
                mse_loss_node(tape, &[(tc, mapped)])
            })
        };
        assert!(finite_difference_check(mse, &p, 1e-5, 1e-4).unwrap().pass);

        let wgan = |p: &ParamSet| {
            run_loss(p, |_| false, |tape, b| {
                let ec = tape.constant(Tensor::vector(e.clone()))?;
                let fake = apply_adapter(tape, b, ADAPTER_W, ADAPTER_B, ec, None)?;
                let fs = discriminator_score(tape, b, fake)?;
                let rc = tape.constant(Tensor::vector(target.clone()))?;
                let rs = discriminator_score(tape, b, rc)?;
                wgan_d_loss_node(tape, &[fs], &[rs])
            })
        };
        let report = finite_difference_check(wgan, &p, 1e-5, 1e-4).unwrap();
        assert!(report.pass, "per-param errors: {:?}", report.per_param);

        let recon = |p: &ParamSet| {
            run_loss(p, |_| false, |tape, b| {
                let ec = tape.constant(Tensor::vector(e.clone()))?;
                reconstruction_loss_node(tape, b, &[ec])
            })
        };
        assert!(finite_difference_check(recon, &p, 1e-5, 1e-4).unwrap().pass);
    }
}
