//! Minimal reverse-mode automatic differentiation over dense tensors.
//!
//! Values are computed eagerly as nodes are appended to the tape, so
//! `forward` is a cache lookup and repeated evaluation is bit-identical.
//! The tape is acyclic by construction: an op may only reference nodes
//! that already exist.

use crate::error::{Error, Result};
use crate::tensor::{dot, Tensor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type NodeId = usize;
pub type Binding = BTreeMap<String, NodeId>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// [m,k]·[k,n] -> [m,n], or [m,k]·[k] -> [m].
    MatMul(NodeId, NodeId),
    /// Row lookup into a matrix node (embedding lookup).
    Row(NodeId, usize),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    /// Elementwise max over a list of equally shaped vectors.
    MaxOverTime(Vec<NodeId>),
    Sum(NodeId),
    Mean(NodeId),
    /// Multiplication by a caller-supplied mask (inverted dropout).
    Dropout(NodeId, Tensor),
    Cosine(NodeId, NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
    trainable: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, trainable: bool) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::contract(format!(
                "non-finite value produced by {:?}",
                op_name(&op)
            )));
        }
        self.nodes.push(Node { op, value, trainable });
        Ok(self.nodes.len() - 1)
    }

    /// Cached output of a node.
    pub fn forward(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn constant(&mut self, t: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, t, false)
    }

    /// Trainable leaf; its gradient is reported by `backward`.
    pub fn param(&mut self, t: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, t, true)
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.val(a), self.val(b));
        if ta.shape().len() != 2 {
            return Err(Error::dim("matmul", format!("left operand shape {:?}", ta.shape())));
        }
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let value = match tb.shape().len() {
            1 => {
                if tb.len() != k {
                    return Err(Error::dim(
                        "matmul",
                        format!("[{},{}]·[{}]", m, k, tb.len()),
                    ));
                }
                let mut out = vec![0.0; m];
                for i in 0..m {
                    out[i] = dot(&ta.data()[i * k..(i + 1) * k], tb.data());
                }
                Tensor::vector(out)
            }
            2 => {
                let (k2, n) = (tb.shape()[0], tb.shape()[1]);
                if k2 != k {
                    return Err(Error::dim(
                        "matmul",
                        format!("[{},{}]·[{},{}]", m, k, k2, n),
                    ));
                }
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = ta.get2(i, p);
                        if aip == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            out[i * n + j] += aip * tb.get2(p, j);
                        }
                    }
                }
                Tensor::matrix(m, n, out)?
            }
            _ => {
                return Err(Error::dim(
                    "matmul",
                    format!("right operand shape {:?}", tb.shape()),
                ))
            }
        };
        self.push(Op::MatMul(a, b), value, false)
    }

    pub fn row(&mut self, table: NodeId, idx: usize) -> Result<NodeId> {
        let t = self.val(table);
        if t.shape().len() != 2 || idx >= t.rows() {
            return Err(Error::dim(
                "row",
                format!("row {} of shape {:?}", idx, t.shape()),
            ));
        }
        let value = t.row(idx);
        self.push(Op::Row(table, idx), value, false)
    }

    fn binary_elementwise(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        mk: impl Fn(NodeId, NodeId) -> Op,
    ) -> Result<NodeId> {
        let (ta, tb) = (self.val(a), self.val(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim(
                name,
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(mk(a, b), value, false)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value = self.val(a).map(|x| c * x);
        self.push(Op::Scale(a, c), value, false)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.val(a).map(f64::tanh);
        self.push(Op::Tanh(a), value, false)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.val(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), value, false)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.val(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), value, false)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("concat of zero nodes"));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.val(p).data());
        }
        let value = Tensor::vector(data);
        self.push(Op::Concat(parts.to_vec()), value, false)
    }

    pub fn max_over_time(&mut self, steps: &[NodeId]) -> Result<NodeId> {
        if steps.is_empty() {
            return Err(Error::contract("max_over_time of an empty sequence"));
        }
        let d = self.val(steps[0]).len();
        for &s in steps {
            if self.val(s).len() != d {
                return Err(Error::dim(
                    "max_over_time",
                    format!("{} vs {} entries", self.val(s).len(), d),
                ));
            }
        }
        let mut out = self.val(steps[0]).data().to_vec();
        for &s in &steps[1..] {
            for (o, &x) in out.iter_mut().zip(self.val(s).data()) {
                if x > *o {
                    *o = x;
                }
            }
        }
        self.push(Op::MaxOverTime(steps.to_vec()), Tensor::vector(out), false)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let value = Tensor::scalar(self.val(a).data().iter().sum());
        self.push(Op::Sum(a), value, false)
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.val(a);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        self.push(Op::Mean(a), value, false)
    }

    pub fn dropout(&mut self, a: NodeId, mask: Tensor) -> Result<NodeId> {
        let t = self.val(a);
        if t.shape() != mask.shape() {
            return Err(Error::dim(
                "dropout",
                format!("{:?} vs mask {:?}", t.shape(), mask.shape()),
            ));
        }
        let data = t.data().iter().zip(mask.data()).map(|(&x, &m)| x * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        self.push(Op::Dropout(a, mask), value, false)
    }

    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let s = crate::tensor::cosine(self.val(a).data(), self.val(b).data())?;
        self.push(Op::Cosine(a, b), Tensor::scalar(s), false)
    }

    /// Mean of a list of scalar nodes.
    pub fn mean_of(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        let all = self.concat(scalars)?;
        self.mean(all)
    }

    /// Gradients of a scalar loss with respect to every trainable leaf.
    /// Unreachable parameters get zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<BTreeMap<NodeId, Tensor>> {
        if !self.val(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.val(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Tensor::scalar(1.0));

        for id in (0..=loss).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.val(*a), self.val(*b));
                    let (m, k) = (ta.shape()[0], ta.shape()[1]);
                    if tb.shape().len() == 1 {
                        let gy = g.data();
                        let mut da = vec![0.0; m * k];
                        let mut db = vec![0.0; k];
                        for i in 0..m {
                            for j in 0..k {
                                da[i * k + j] += gy[i] * tb.data()[j];
                                db[j] += ta.get2(i, j) * gy[i];
                            }
                        }
                        accumulate(&mut grads, *a, Tensor::matrix(m, k, da)?);
                        accumulate(&mut grads, *b, Tensor::vector(db));
                    } else {
                        let n = tb.shape()[1];
                        let mut da = vec![0.0; m * k];
                        let mut db = vec![0.0; k * n];
                        for i in 0..m {
                            for j in 0..n {
                                let gij = g.get2(i, j);
                                if gij == 0.0 {
                                    continue;
                                }
                                for p in 0..k {
                                    da[i * k + p] += gij * tb.get2(p, j);
                                    db[p * n + j] += ta.get2(i, p) * gij;
                                }
                            }
                        }
                        accumulate(&mut grads, *a, Tensor::matrix(m, k, da)?);
                        accumulate(&mut grads, *b, Tensor::matrix(k, n, db)?);
                    }
                }
                Op::Row(table, idx) => {
                    let t = self.val(*table);
                    let mut dt = Tensor::zeros(t.shape());
                    let c = t.cols();
                    dt.data_mut()[idx * c..(idx + 1) * c].copy_from_slice(g.data());
                    accumulate(&mut grads, *table, dt);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let da = ew(&g, self.val(*b));
                    let db = ew(&g, self.val(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.map(|x| c * x));
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[id].value;
                    let da = zip3(&g, y, |gx, yx| gx * (1.0 - yx * yx));
                    accumulate(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[id].value;
                    let da = zip3(&g, y, |gx, yx| gx * yx * (1.0 - yx));
                    accumulate(&mut grads, *a, da);
                }
                Op::Relu(a) => {
                    let x = self.val(*a);
                    let da = zip3(&g, x, |gx, xv| if xv > 0.0 { gx } else { 0.0 });
                    accumulate(&mut grads, *a, da);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.val(p).len();
                        let shape = self.val(p).shape().to_vec();
                        let dp = Tensor::new(shape, g.data()[off..off + n].to_vec())?;
                        accumulate(&mut grads, p, dp);
                        off += n;
                    }
                }
                Op::MaxOverTime(steps) => {
                    // Gradient routes to the earliest argmax per coordinate.
                    let d = self.val(steps[0]).len();
                    let mut per_step: Vec<Tensor> =
                        steps.iter().map(|&s| Tensor::zeros(self.val(s).shape())).collect();
                    for j in 0..d {
                        let mut best = 0usize;
                        let mut best_v = self.val(steps[0]).data()[j];
                        for (t, &s) in steps.iter().enumerate().skip(1) {
                            let v = self.val(s).data()[j];
                            if v > best_v {
                                best_v = v;
                                best = t;
                            }
                        }
                        per_step[best].data_mut()[j] = g.data()[j];
                    }
                    for (&s, ds) in steps.iter().zip(per_step) {
                        accumulate(&mut grads, s, ds);
                    }
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    accumulate(&mut grads, *a, self.val(*a).map(|_| gv));
                }
                Op::Mean(a) => {
                    let n = self.val(*a).len() as f64;
                    let gv = g.item() / n;
                    accumulate(&mut grads, *a, self.val(*a).map(|_| gv));
                }
                Op::Dropout(a, mask) => {
                    let da = ew(&g, mask);
                    accumulate(&mut grads, *a, da);
                }
                Op::Cosine(a, b) => {
                    let (u, v) = (self.val(*a).data(), self.val(*b).data());
                    let (nu, nv) = (dot(u, u).sqrt(), dot(v, v).sqrt());
                    let s = self.nodes[id].value.item();
                    let gv = g.item();
                    let da: Vec<f64> = u
                        .iter()
                        .zip(v)
                        .map(|(&ui, &vi)| gv * (vi / (nu * nv) - s * ui / (nu * nu)))
                        .collect();
                    let db: Vec<f64> = u
                        .iter()
                        .zip(v)
                        .map(|(&ui, &vi)| gv * (ui / (nu * nv) - s * vi / (nv * nv)))
                        .collect();
                    accumulate(&mut grads, *a, Tensor::vector(da));
                    accumulate(&mut grads, *b, Tensor::vector(db));
                }
            }
        }

        let mut out = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if node.trainable {
                let g = match (id <= loss, grads[id].take()) {
                    (true, Some(g)) => g,
                    _ => Tensor::zeros(node.value.shape()),
                };
                out.insert(id, g);
            }
        }
        Ok(out)
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Row(..) => "row",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::Tanh(..) => "tanh",
        Op::Sigmoid(..) => "sigmoid",
        Op::Relu(..) => "relu",
        Op::Concat(..) => "concat",
        Op::MaxOverTime(..) => "max_over_time",
        Op::Sum(..) => "sum",
        Op::Mean(..) => "mean",
        Op::Dropout(..) => "dropout",
        Op::Cosine(..) => "cosine",
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut grads[id] {
        Some(g) => {
            for (x, &d) in g.data_mut().iter_mut().zip(delta.data()) {
                *x += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn ew(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data).expect("elementwise shapes checked at forward")
}

fn zip3(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("elementwise shapes checked at forward")
}

// ---------------------------------------------------------------------------
// Named parameter sets
// ---------------------------------------------------------------------------

/// Named trainable tensors; ordering is the sorted name order, which keeps
/// every consumer deterministic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    map: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.map.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Bind every parameter into the tape. Parameters for which `frozen`
    /// returns true become constants and receive no gradient.
    pub fn bind(&self, tape: &mut Tape, frozen: impl Fn(&str) -> bool) -> Result<Binding> {
        let mut binding = Binding::new();
        for (name, t) in &self.map {
            let id = if frozen(name) {
                tape.constant(t.clone())?
            } else {
                tape.param(t.clone())?
            };
            binding.insert(name.clone(), id);
        }
        Ok(binding)
    }

    /// Clamp every entry of every parameter whose name starts with `prefix`
    /// into [-c, c].
    pub fn clip_prefix(&mut self, prefix: &str, c: f64) -> Result<()> {
        if c <= 0.0 {
            return Err(Error::contract(format!("clip bound must be positive, got {}", c)));
        }
        for (name, t) in self.map.iter_mut() {
            if name.starts_with(prefix) {
                for x in t.data_mut() {
                    *x = x.clamp(-c, c);
                }
            }
        }
        Ok(())
    }
}

/// Clamp every entry of a tensor into [-c, c].
pub fn clip_parameters(t: &mut Tensor, c: f64) -> Result<()> {
    if c <= 0.0 {
        return Err(Error::contract(format!("clip bound must be positive, got {}", c)));
    }
    for x in t.data_mut() {
        *x = x.clamp(-c, c);
    }
    Ok(())
}

/// Build a loss over bound parameters, run backward, and return the loss
/// value plus gradients keyed by parameter name.
pub fn run_loss<F>(
    params: &ParamSet,
    frozen: impl Fn(&str) -> bool,
    build: F,
) -> Result<(f64, BTreeMap<String, Tensor>)>
where
    F: FnOnce(&mut Tape, &Binding) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let binding = params.bind(&mut tape, frozen)?;
    let loss = build(&mut tape, &binding)?;
    let value = tape.forward(loss).item();
    let node_grads = tape.backward(loss)?;
    let mut grads = BTreeMap::new();
    for (name, &id) in &binding {
        if let Some(g) = node_grads.get(&id) {
            grads.insert(name.clone(), g.clone());
        }
    }
    Ok((value, grads))
}

// ---------------------------------------------------------------------------
// RMSProp
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmsPropState {
    pub rho: f64,
    pub epsilon: f64,
    acc: BTreeMap<String, Tensor>,
}

impl RmsPropState {
    pub fn new(rho: f64, epsilon: f64) -> RmsPropState {
        RmsPropState {
            rho,
            epsilon,
            acc: BTreeMap::new(),
        }
    }

    /// acc' = rho·acc + (1-rho)·g², w' = w − lr·g/√(acc'+eps), elementwise.
    pub fn step(
        &mut self,
        params: &mut ParamSet,
        grads: &BTreeMap<String, Tensor>,
        lr: f64,
    ) -> Result<()> {
        for (name, g) in grads {
            let w = params
                .get_mut(name)
                .ok_or_else(|| Error::contract(format!("unknown parameter {}", name)))?;
            if w.shape() != g.shape() {
                return Err(Error::dim(
                    "rmsprop_step",
                    format!("{}: {:?} vs grad {:?}", name, w.shape(), g.shape()),
                ));
            }
            let acc = self
                .acc
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(w.shape()));
            for i in 0..w.len() {
                let gi = g.data()[i];
                let a = self.rho * acc.data()[i] + (1.0 - self.rho) * gi * gi;
                acc.data_mut()[i] = a;
                w.data_mut()[i] -= lr * gi / (a + self.epsilon).sqrt();
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error per parameter name.
    pub per_param: BTreeMap<String, f64>,
    pub max_relative_error: f64,
    pub pass: bool,
    pub tolerance: f64,
}

/// Compare analytic gradients to central finite differences.
///
/// `eval` must return the loss value and analytic gradients at the given
/// parameters; the numeric side only uses the loss value.
pub fn finite_difference_check<F>(
    mut eval: F,
    params: &ParamSet,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, BTreeMap<String, Tensor>)>,
{
    if step <= 0.0 {
        return Err(Error::contract(format!("step must be positive, got {}", step)));
    }
    let (_, analytic) = eval(params)?;
    let mut per_param = BTreeMap::new();
    let mut max_err = 0.0f64;
    for (name, base) in params.iter() {
        let mut worst = 0.0f64;
        let a_grad = analytic.get(name);
        for i in 0..base.len() {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().data_mut()[i] += step;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().data_mut()[i] -= step;
            let fp = eval(&plus)?.0;
            let fm = eval(&minus)?.0;
            let numeric = (fp - fm) / (2.0 * step);
            let a = a_grad.map(|g| g.data()[i]).unwrap_or(0.0);
            // differences below the central-difference noise floor (step²)
            // are indistinguishable from exact agreement; without this,
            // roundoff noise over the 1e-8 denominator floor spuriously
            // flags coordinates whose true gradient is zero
            let diff = (a - numeric).abs();
            let err = if diff <= step * step {
                0.0
            } else {
                diff / a.abs().max(numeric.abs()).max(1e-8)
            };
            if err > worst {
                worst = err;
            }
        }
        if worst > max_err {
            max_err = worst;
        }
        per_param.insert(name.clone(), worst);
    }
    Ok(GradCheckReport {
        per_param,
        max_relative_error: max_err,
        pass: max_err <= tolerance,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_step() -> f64 {
        1e-5
    }

    #[test]
    fn max_over_time_elementwise() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![1.0, 4.0])).unwrap();
        let b = tape.constant(Tensor::vector(vec![3.0, 2.0])).unwrap();
        let m = tape.max_over_time(&[a, b]).unwrap();
        assert_eq!(tape.forward(m).data(), &[3.0, 4.0]);
    }

    #[test]
    fn square_gradient() {
        // f(x) = x·x at x=3 → df/dx = 6
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![3.0])).unwrap();
        let y = tape.mul(x, x).unwrap();
        let loss = tape.sum(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads[&x].data(), &[6.0]);
    }

    #[test]
    fn constant_loss_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![3.0])).unwrap();
        let c = tape.constant(Tensor::scalar(5.0)).unwrap();
        let loss = tape.sum(c).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads[&x].data(), &[0.0]);
    }

    #[test]
    fn cosine_gradient_orthogonal() {
        // d cos(u,v)/du at u=(1,0), v=(0,1) is (0,1).
        let mut tape = Tape::new();
        let u = tape.param(Tensor::vector(vec![1.0, 0.0])).unwrap();
        let v = tape.constant(Tensor::vector(vec![0.0, 1.0])).unwrap();
        let s = tape.cosine(u, v).unwrap();
        let grads = tape.backward(s).unwrap();
        let g = grads[&u].data();
        assert!((g[0] - 0.0).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let build = || {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::vector(vec![0.3, -0.7])).unwrap();
            let y = tape.tanh(x).unwrap();
            let z = tape.sigmoid(y).unwrap();
            tape.forward(z).clone()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn rmsprop_single_step() {
        let mut params = ParamSet::new();
        params.insert("w", Tensor::vector(vec![1.0]));
        let mut state = RmsPropState::new(0.9, 1e-8);
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Tensor::vector(vec![2.0]));
        state.step(&mut params, &grads, 1e-4).unwrap();
        // acc' = 0.1·4 = 0.4, w' = 1 − 1e-4·2/√(0.4+1e-8)
        let expect = 1.0 - 1e-4 * 2.0 / (0.4f64 + 1e-8).sqrt();
        assert!((params.get("w").unwrap().data()[0] - expect).abs() < 1e-15);
        assert!((params.get("w").unwrap().data()[0] - 0.9996838).abs() < 1e-6);
    }

    #[test]
    fn rmsprop_zero_gradient_keeps_weights() {
        let mut params = ParamSet::new();
        params.insert("w", Tensor::vector(vec![1.5]));
        let mut state = RmsPropState::new(0.9, 1e-8);
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Tensor::vector(vec![1.0]));
        state.step(&mut params, &grads, 1e-4).unwrap();
        let before = params.get("w").unwrap().clone();
        grads.insert("w".to_string(), Tensor::vector(vec![0.0]));
        state.step(&mut params, &grads, 1e-4).unwrap();
        assert_eq!(params.get("w").unwrap(), &before);
    }

    #[test]
    fn rmsprop_zero_lr_keeps_weights() {
        let mut params = ParamSet::new();
        params.insert("w", Tensor::vector(vec![1.5]));
        let mut state = RmsPropState::new(0.9, 1e-8);
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Tensor::vector(vec![3.0]));
        state.step(&mut params, &grads, 0.0).unwrap();
        assert_eq!(params.get("w").unwrap().data(), &[1.5]);
    }

    #[test]
    fn clip_saturates_and_is_idempotent() {
        let mut t = Tensor::vector(vec![0.15, -0.2, 0.05]);
        clip_parameters(&mut t, 0.1).unwrap();
        assert_eq!(t.data(), &[0.1, -0.1, 0.05]);
        let once = t.clone();
        clip_parameters(&mut t, 0.1).unwrap();
        assert_eq!(t, once);
        assert!(clip_parameters(&mut t, 0.0).is_err());
    }

    #[test]
    fn gradcheck_quadratic_passes() {
        let mut params = ParamSet::new();
        params.insert("w", Tensor::vector(vec![0.7, -1.2, 3.0]));
        let eval = |p: &ParamSet| {
            run_loss(p, |_| false, |tape, b| {
                let w = b["w"];
                let sq = tape.mul(w, w)?;
                tape.sum(sq)
            })
        };
        let report = finite_difference_check(eval, &params, fd_step(), 1e-4).unwrap();
        assert!(report.pass, "max err {}", report.max_relative_error);
    }

    #[test]
    fn gradcheck_zero_tolerance_fails() {
        let mut params = ParamSet::new();
        // x⁴ has truncation error h²·4x per coordinate, well above the
        // noise floor at these magnitudes, so zero tolerance must fail
        params.insert("w", Tensor::vector(vec![2.0, -3.0]));
        let eval = |p: &ParamSet| {
            run_loss(p, |_| false, |tape, b| {
                let w = b["w"];
                let sq = tape.mul(w, w)?;
                let quart = tape.mul(sq, sq)?;
                tape.sum(quart)
            })
        };
        let report = finite_difference_check(eval, &params, fd_step(), 0.0).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn gradcheck_all_ops() {
        // One composite touching every differentiable op kind.
        let mut params = ParamSet::new();
        params.insert("w", Tensor::matrix(3, 4, (0..12).map(|i| 0.1 * i as f64 - 0.5).collect()).unwrap());
        params.insert("x", Tensor::vector(vec![0.3, -0.2, 0.8, 0.1]));
        params.insert("y", Tensor::vector(vec![0.5, -0.4, 0.2]));
        let mask = Tensor::vector(vec![1.25, 0.0, 1.25]);
        let eval = |p: &ParamSet| {
            let mask = mask.clone();
            run_loss(p, |_| false, move |tape, b| {
                let wx = tape.matmul(b["w"], b["x"])?;
                let t = tape.tanh(wx)?;
                let s = tape.sigmoid(b["y"])?;
                let m = tape.mul(t, s)?;
                let r = tape.relu(m)?;
                let d = tape.dropout(r, mask)?;
                let mx = tape.max_over_time(&[d, s])?;
                let cat = tape.concat(&[mx, t])?;
                let sc = tape.scale(cat, 0.7)?;
                let cos = tape.cosine(sc, sc)?; // constant 1, still differentiable path
                let mean = tape.mean(sc)?;
                let su = tape.sum(sc)?;
                let a = tape.add(mean, su)?;
                tape.add(a, cos)
            })
        };
        let report = finite_difference_check(eval, &params, fd_step(), 1e-4).unwrap();
        assert!(report.pass, "max err {}", report.max_relative_error);
    }
}
