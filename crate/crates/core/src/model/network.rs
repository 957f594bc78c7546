use crate::autodiff::{xavier_init, Graph, NodeId, Parameter, Tensor};
use crate::{Error, Result};

use super::spec::{ArchitectureSpec, FusionVariant, LossWeights, Reduction, ShapePlan};

const HEAD_PREFIX: &str = "head.";

/// SplitMix64 finalizer, used to derive per-parameter seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// All learnable state of both pathways and the fusion head.
#[derive(Clone, Debug)]
pub struct MarsModel {
    spec: ArchitectureSpec,
    plan: ShapePlan,
    variant: FusionVariant,
    classes: usize,
    params: Vec<Parameter>,
}

/// Graph nodes produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardNodes {
    pub input: NodeId,
    pub latent_1d: NodeId,
    pub latent_2d: NodeId,
    /// `[B, N, T]`; absent in inference mode.
    pub recon_1d: Option<NodeId>,
    /// `[B, 1, T, N]`; absent in inference mode.
    pub recon_2d: Option<NodeId>,
    /// Input laid out as the 2-D pathway sees it, `[B, 1, T, N]`.
    pub plane: NodeId,
    /// Projected pathway features (v2/v3).
    pub projected: Option<(NodeId, NodeId)>,
    /// Gated sum of the projected features (v2/v3).
    pub fused: Option<NodeId>,
    pub logits: NodeId,
    /// Symmetric KL between pathway feature distributions (v3, training).
    pub fairness: Option<NodeId>,
}

/// Scalar values of the objective terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub classification: f64,
    pub reconstruction: f64,
    pub weight_decay: f64,
    pub fairness: Option<f64>,
}

/// `J_s + β₁·J_r + β₂·Ψ + β₃·SDKL`, the last term only when present.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(c.classification
        + w.reconstruction * c.reconstruction
        + w.weight_decay * c.weight_decay
        + c.fairness.map_or(0.0, |f| w.fairness * f))
}

/// Outcome of one accumulated gradient evaluation.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub components: LossComponents,
    pub total: f64,
    pub logits: Tensor,
}

/// Lazily binds model parameters into a graph.
struct Binding {
    ids: Vec<Option<NodeId>>,
    track: bool,
}

impl Binding {
    fn new(count: usize, track: bool) -> Self {
        Self {
            ids: vec![None; count],
            track,
        }
    }

    fn get(&mut self, g: &mut Graph, params: &[Parameter], i: usize) -> NodeId {
        *self.ids[i].get_or_insert_with(|| {
            if self.track {
                g.param(&params[i])
            } else {
                g.input(params[i].value.clone())
            }
        })
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Train,
    Infer,
}

impl MarsModel {
    /// Builds a model with Xavier-initialized weights and zero biases.
    pub fn new(
        spec: ArchitectureSpec,
        variant: FusionVariant,
        classes: usize,
        seed: u64,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
        }
        let plan = spec.plan()?;
        let shapes = Self::param_shapes(&spec, &plan, variant, classes);
        let params = shapes
            .into_iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let value = if shape.len() >= 2 {
                    xavier_init(&shape, mix_seed(seed, i as u64 + 1))
                } else {
                    Tensor::zeros(&shape)
                };
                Parameter::new(name, value)
            })
            .collect();
        Ok(Self {
            spec,
            plan,
            variant,
            classes,
            params,
        })
    }

    fn param_shapes(
        spec: &ArchitectureSpec,
        plan: &ShapePlan,
        variant: FusionVariant,
        classes: usize,
    ) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let s1 = &plan.stages_1d;
        for (i, l) in spec.conv1d.iter().enumerate() {
            out.push((format!("enc1d.{i}.weight"), vec![s1[i + 1].0, s1[i].0, l.kernel]));
            out.push((format!("enc1d.{i}.bias"), vec![s1[i + 1].0]));
        }
        for (j, i) in (0..spec.conv1d.len()).rev().enumerate() {
            let l = spec.conv1d[i];
            out.push((format!("dec1d.{j}.weight"), vec![s1[i + 1].0, s1[i].0, l.kernel]));
            out.push((format!("dec1d.{j}.bias"), vec![s1[i].0]));
        }
        let s2 = &plan.stages_2d;
        for (i, l) in spec.conv2d.iter().enumerate() {
            let [kh, kw] = l.kernel;
            out.push((format!("enc2d.{i}.weight"), vec![s2[i + 1].0, s2[i].0, kh, kw]));
            out.push((format!("enc2d.{i}.bias"), vec![s2[i + 1].0]));
        }
        for (j, i) in (0..spec.conv2d.len()).rev().enumerate() {
            let [kh, kw] = spec.conv2d[i].kernel;
            out.push((format!("dec2d.{j}.weight"), vec![s2[i + 1].0, s2[i].0, kh, kw]));
            out.push((format!("dec2d.{j}.bias"), vec![s2[i].0]));
        }
        out.extend(Self::head_shapes(spec, plan, variant, classes));
        out
    }

    fn head_shapes(
        spec: &ArchitectureSpec,
        plan: &ShapePlan,
        variant: FusionVariant,
        classes: usize,
    ) -> Vec<(String, Vec<usize>)> {
        let m = spec.fusion_dim;
        match variant {
            FusionVariant::V1 => vec![
                (
                    "head.classifier.weight".into(),
                    vec![classes, plan.latent_1d + plan.latent_2d],
                ),
                ("head.classifier.bias".into(), vec![classes]),
            ],
            FusionVariant::V2 | FusionVariant::V3 => vec![
                ("head.proj1d.weight".into(), vec![m, plan.latent_1d]),
                ("head.proj1d.bias".into(), vec![m]),
                ("head.proj2d.weight".into(), vec![m, plan.latent_2d]),
                ("head.proj2d.bias".into(), vec![m]),
                ("head.classifier.weight".into(), vec![classes, m]),
                ("head.classifier.bias".into(), vec![classes]),
            ],
        }
    }

    /// Keeps every pathway parameter of `pretrained` and attaches a freshly
    /// Xavier-initialized fusion head for `classes` classes.
    pub fn with_fresh_head(pretrained: &MarsModel, classes: usize, seed: u64) -> Result<Self> {
        let mut model = MarsModel::new(pretrained.spec.clone(), pretrained.variant, classes, seed)?;
        for (dst, src) in model.params.iter_mut().zip(&pretrained.params) {
            if dst.name.starts_with(HEAD_PREFIX) {
                break;
            }
            debug_assert_eq!(dst.name, src.name);
            dst.value = src.value.clone();
        }
        Ok(model)
    }

    /// Copies pathway parameters from `source`, checking that every pathway
    /// tensor has the same shape.
    pub fn copy_pathways_from(&mut self, source: &MarsModel) -> Result<()> {
        let src: Vec<&Parameter> = source.pathway_params().collect();
        let dst_count = self.pathway_params().count();
        if src.len() != dst_count {
            return Err(Error::shape(format!(
                "pathway parameter count {} vs {dst_count}",
                src.len()
            )));
        }
        for (d, s) in self.params.iter_mut().zip(src) {
            if d.name != s.name || d.value.shape() != s.value.shape() {
                return Err(Error::shape(format!(
                    "pathway tensor {} {:?} vs {} {:?}",
                    s.name,
                    s.value.shape(),
                    d.name,
                    d.value.shape()
                )));
            }
            d.value = s.value.clone();
        }
        Ok(())
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn variant(&self) -> FusionVariant {
        self.variant
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn pathway_params(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter().filter(|p| !p.name.starts_with(HEAD_PREFIX))
    }

    pub fn head_params(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter().filter(|p| p.name.starts_with(HEAD_PREFIX))
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Replaces all parameter values, e.g. from a checkpoint.
    pub fn load_values(&mut self, values: Vec<(String, Tensor)>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::shape(format!(
                "checkpoint holds {} tensors, model expects {}",
                values.len(),
                self.params.len()
            )));
        }
        for (p, (name, t)) in self.params.iter().zip(&values) {
            if p.name != *name || p.value.shape() != t.shape() {
                return Err(Error::shape(format!(
                    "checkpoint tensor {name} {:?}, model expects {} {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }
        for (p, (_, t)) in self.params.iter_mut().zip(values) {
            p.value = t;
        }
        Ok(())
    }

    fn index(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let s = x.shape();
        if s.len() != 3 || s[1] != self.spec.channels || s[2] != self.spec.window {
            return Err(Error::shape(format!(
                "model expects [B, {}, {}] windows, got {s:?}",
                self.spec.channels, self.spec.window
            )));
        }
        Ok(s[0])
    }

    fn encode_1d_nodes(&self, g: &mut Graph, b: &mut Binding, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for (i, l) in self.spec.conv1d.iter().enumerate() {
            let w = b.get(g, &self.params, self.index(&format!("enc1d.{i}.weight")));
            let bias = b.get(g, &self.params, self.index(&format!("enc1d.{i}.bias")));
            h = g.conv1d(h, w, bias, l.stride)?;
            h = g.relu(h);
        }
        let batch = g.value(x).shape()[0];
        g.reshape(h, &[batch, self.plan.latent_1d])
    }

    fn decode_1d_nodes(&self, g: &mut Graph, b: &mut Binding, latent: NodeId) -> Result<NodeId> {
        let batch = g.value(latent).shape()[0];
        let &(c, l) = self.plan.stages_1d.last().unwrap();
        let mut h = g.reshape(latent, &[batch, c, l])?;
        let n = self.spec.conv1d.len();
        for (j, i) in (0..n).rev().enumerate() {
            let w = b.get(g, &self.params, self.index(&format!("dec1d.{j}.weight")));
            let bias = b.get(g, &self.params, self.index(&format!("dec1d.{j}.bias")));
            h = g.deconv1d(h, w, bias, self.spec.conv1d[i].stride)?;
            if j + 1 < n {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    fn encode_2d_nodes(&self, g: &mut Graph, b: &mut Binding, plane: NodeId) -> Result<NodeId> {
        let mut h = plane;
        for (i, l) in self.spec.conv2d.iter().enumerate() {
            let w = b.get(g, &self.params, self.index(&format!("enc2d.{i}.weight")));
            let bias = b.get(g, &self.params, self.index(&format!("enc2d.{i}.bias")));
            h = g.conv2d(h, w, bias, (l.stride[0], l.stride[1]))?;
            h = g.relu(h);
        }
        let batch = g.value(plane).shape()[0];
        g.reshape(h, &[batch, self.plan.latent_2d])
    }

    fn decode_2d_nodes(&self, g: &mut Graph, b: &mut Binding, latent: NodeId) -> Result<NodeId> {
        let batch = g.value(latent).shape()[0];
        let &(c, hh, ww) = self.plan.stages_2d.last().unwrap();
        let mut h = g.reshape(latent, &[batch, c, hh, ww])?;
        let n = self.spec.conv2d.len();
        for (j, i) in (0..n).rev().enumerate() {
            let w = b.get(g, &self.params, self.index(&format!("dec2d.{j}.weight")));
            let bias = b.get(g, &self.params, self.index(&format!("dec2d.{j}.bias")));
            let s = self.spec.conv2d[i].stride;
            h = g.deconv2d(h, w, bias, (s[0], s[1]))?;
            if j + 1 < n {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    fn dense_named(&self, g: &mut Graph, b: &mut Binding, x: NodeId, name: &str) -> Result<NodeId> {
        let w = b.get(g, &self.params, self.index(&format!("head.{name}.weight")));
        let bias = b.get(g, &self.params, self.index(&format!("head.{name}.bias")));
        g.dense(x, w, bias)
    }

    fn forward_nodes(&self, g: &mut Graph, b: &mut Binding, x: &Tensor, mode: Mode) -> Result<ForwardNodes> {
        let batch = self.check_input(x)?;
        let input = g.input(x.clone());
        let t = g.transpose_last2(input)?;
        let plane = g.reshape(t, &[batch, 1, self.spec.window, self.spec.channels])?;

        let latent_1d = self.encode_1d_nodes(g, b, input)?;
        let latent_2d = self.encode_2d_nodes(g, b, plane)?;

        let (recon_1d, recon_2d) = match mode {
            Mode::Train => (
                Some(self.decode_1d_nodes(g, b, latent_1d)?),
                Some(self.decode_2d_nodes(g, b, latent_2d)?),
            ),
            Mode::Infer => (None, None),
        };

        let (logits, projected, fused, fairness) = match self.variant {
            FusionVariant::V1 => {
                // Feature-level: [κ2D κ1D].
                let cat = g.concat(latent_2d, latent_1d)?;
                (self.dense_named(g, b, cat, "classifier")?, None, None, None)
            }
            FusionVariant::V2 | FusionVariant::V3 => {
                let p1 = self.dense_named(g, b, latent_1d, "proj1d")?;
                let p2 = self.dense_named(g, b, latent_2d, "proj2d")?;
                let fused = gated_fusion(g, p2, p1)?;
                let logits = self.dense_named(g, b, fused, "classifier")?;
                let fairness = match (self.variant, mode) {
                    (FusionVariant::V3, Mode::Train) => Some(fairness_penalty(g, p1, p2)?),
                    _ => None,
                };
                (logits, Some((p1, p2)), Some(fused), fairness)
            }
        };
        Ok(ForwardNodes {
            input,
            latent_1d,
            latent_2d,
            recon_1d,
            recon_2d,
            plane,
            projected,
            fused,
            logits,
            fairness,
        })
    }

    /// Records a full training-mode forward pass (both decoders and, for v3,
    /// the fairness term) with tracked parameters. Returns the nodes and the
    /// graph node of every parameter, in parameter order.
    pub fn forward_train(&self, g: &mut Graph, x: &Tensor) -> Result<(ForwardNodes, Vec<NodeId>)> {
        let mut b = Binding::new(self.params.len(), true);
        let nodes = self.forward_nodes(g, &mut b, x, Mode::Train)?;
        let ids = (0..self.params.len())
            .map(|i| b.get(g, &self.params, i))
            .collect();
        Ok((nodes, ids))
    }

    /// Adds the composite objective to the graph. Returns the total node and
    /// the node of each component.
    pub fn objective(
        &self,
        g: &mut Graph,
        nodes: &ForwardNodes,
        param_ids: &[NodeId],
        labels: &[usize],
        weights: &LossWeights,
    ) -> Result<(NodeId, [Option<NodeId>; 4])> {
        weights.validate()?;
        let js = g.cross_entropy(nodes.logits, labels)?;
        let (r1, r2) = nodes
            .recon_1d
            .zip(nodes.recon_2d)
            .ok_or_else(|| Error::invalid("objective needs a training-mode forward pass"))?;
        let mut jr = reconstruction_loss(g, nodes.input, nodes.plane, r1, r2)?;
        if weights.reconstruction_reduction == Reduction::Mean {
            let values = g.value(nodes.input).len() as f64;
            jr = g.scale(jr, 1.0 / values);
        }
        let mut psi: Option<NodeId> = None;
        for (p, &id) in self.params.iter().zip(param_ids) {
            if p.is_weight() {
                let s = g.sum_squares(id);
                psi = Some(match psi {
                    Some(acc) => g.add(acc, s)?,
                    None => s,
                });
            }
        }
        let psi = psi.expect("model has weight tensors");

        let mut total = js;
        let scaled = g.scale(jr, weights.reconstruction);
        total = g.add(total, scaled)?;
        let scaled = g.scale(psi, weights.weight_decay);
        total = g.add(total, scaled)?;
        if let Some(f) = nodes.fairness {
            let scaled = g.scale(f, weights.fairness);
            total = g.add(total, scaled)?;
        }
        Ok((total, [Some(js), Some(jr), Some(psi), nodes.fairness]))
    }

    /// Forward + backward on one mini-batch; gradients are added to each
    /// parameter's `grad`.
    pub fn accumulate_gradients(
        &mut self,
        x: &Tensor,
        labels: &[usize],
        weights: &LossWeights,
    ) -> Result<StepOutcome> {
        let mut g = Graph::new();
        let (nodes, ids) = self.forward_train(&mut g, x)?;
        let (total, parts) = self.objective(&mut g, &nodes, &ids, labels, weights)?;
        let grads = g.backward(total)?;
        for (p, id) in self.params.iter_mut().zip(&ids) {
            if let Some(gr) = grads.get(*id) {
                p.grad.add_assign(gr);
            }
        }
        let val = |n: Option<NodeId>| n.map(|n| g.value(n).item());
        let components = LossComponents {
            classification: val(parts[0]).unwrap(),
            reconstruction: val(parts[1]).unwrap(),
            weight_decay: val(parts[2]).unwrap(),
            fairness: val(parts[3]),
        };
        Ok(StepOutcome {
            components,
            total: g.value(total).item(),
            logits: g.value(nodes.logits).clone(),
        })
    }

    /// Evaluates the objective without touching gradients.
    pub fn loss(&self, x: &Tensor, labels: &[usize], weights: &LossWeights) -> Result<f64> {
        let mut g = Graph::new();
        let (nodes, ids) = self.forward_train(&mut g, x)?;
        let (total, _) = self.objective(&mut g, &nodes, &ids, labels, weights)?;
        Ok(g.value(total).item())
    }

    /// Class logits `[B, K]` (encoders and fusion head only).
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let mut b = Binding::new(self.params.len(), false);
        let nodes = self.forward_nodes(&mut g, &mut b, x, Mode::Infer)?;
        Ok(g.value(nodes.logits).clone())
    }

    /// Predicted class per window, evaluated in chunks of `chunk` windows.
    pub fn predict(&self, windows: &[&[f64]], chunk: usize) -> Result<Vec<usize>> {
        let (n, t) = (self.spec.channels, self.spec.window);
        let mut out = Vec::with_capacity(windows.len());
        for part in windows.chunks(chunk.max(1)) {
            let mut data = Vec::with_capacity(part.len() * n * t);
            for w in part {
                if w.len() != n * t {
                    return Err(Error::shape(format!(
                        "window of {} values, model expects {n}x{t}",
                        w.len()
                    )));
                }
                data.extend_from_slice(w);
            }
            let logits = self.logits(&Tensor::new(vec![part.len(), n, t], data)?)?;
            out.extend(argmax_rows(logits.data(), self.classes));
        }
        Ok(out)
    }

    /// 1-D pathway latent `[B, latent_1d]`.
    pub fn encode_1d(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut g = Graph::new();
        let mut b = Binding::new(self.params.len(), false);
        let input = g.input(x.clone());
        let l = self.encode_1d_nodes(&mut g, &mut b, input)?;
        Ok(g.value(l).clone())
    }

    /// 2-D pathway latent `[B, latent_2d]`.
    pub fn encode_2d(&self, x: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(x)?;
        let mut g = Graph::new();
        let mut b = Binding::new(self.params.len(), false);
        let input = g.input(x.clone());
        let t = g.transpose_last2(input)?;
        let plane = g.reshape(t, &[batch, 1, self.spec.window, self.spec.channels])?;
        let l = self.encode_2d_nodes(&mut g, &mut b, plane)?;
        Ok(g.value(l).clone())
    }

    /// Reconstruction `[B, N, T]` from a 1-D latent.
    pub fn decode_1d(&self, latent: &Tensor) -> Result<Tensor> {
        let s = latent.shape();
        if s.len() != 2 || s[1] != self.plan.latent_1d {
            return Err(Error::shape(format!(
                "1-D latent must be [B, {}], got {s:?}",
                self.plan.latent_1d
            )));
        }
        let mut g = Graph::new();
        let mut b = Binding::new(self.params.len(), false);
        let l = g.input(latent.clone());
        let r = self.decode_1d_nodes(&mut g, &mut b, l)?;
        Ok(g.value(r).clone())
    }

    /// Reconstruction `[B, 1, T, N]` from a 2-D latent.
    pub fn decode_2d(&self, latent: &Tensor) -> Result<Tensor> {
        let s = latent.shape();
        if s.len() != 2 || s[1] != self.plan.latent_2d {
            return Err(Error::shape(format!(
                "2-D latent must be [B, {}], got {s:?}",
                self.plan.latent_2d
            )));
        }
        let mut g = Graph::new();
        let mut b = Binding::new(self.params.len(), false);
        let l = g.input(latent.clone());
        let r = self.decode_2d_nodes(&mut g, &mut b, l)?;
        Ok(g.value(r).clone())
    }
}

/// `√σ(p2D) ⊙ p2D + √(1 − σ(p1D)) ⊙ p1D`, with `1 − σ(x)` evaluated as
/// `σ(−x)`.
pub fn gated_fusion(g: &mut Graph, p2d: NodeId, p1d: NodeId) -> Result<NodeId> {
    let gate2 = g.sqrt_sigmoid(p2d);
    let a = g.mul(gate2, p2d)?;
    let neg = g.neg(p1d);
    let gate1 = g.sqrt_sigmoid(neg);
    let b = g.mul(gate1, p1d)?;
    g.add(a, b)
}

/// Batch-mean feature per pathway → softmax → sum-normalization → symmetric
/// KL divergence.
pub fn fairness_penalty(g: &mut Graph, p1d: NodeId, p2d: NodeId) -> Result<NodeId> {
    if g.value(p1d).shape()[0] == 0 {
        return Err(Error::invalid("fairness penalty needs a non-empty batch"));
    }
    let m1 = g.mean_batch(p1d)?;
    let m2 = g.mean_batch(p2d)?;
    let s1 = g.softmax(m1);
    let s2 = g.softmax(m2);
    let q1 = g.normalize_sum(s1)?;
    let q2 = g.normalize_sum(s2)?;
    g.sdkl(q1, q2)
}

/// `½·Σ‖x̂₁ − x‖² + Σ‖x̂₂ − xᵀ‖²` over the batch.
pub fn reconstruction_loss(
    g: &mut Graph,
    x: NodeId,
    plane: NodeId,
    recon_1d: NodeId,
    recon_2d: NodeId,
) -> Result<NodeId> {
    let e1 = g.squared_error(recon_1d, x)?;
    let e1 = g.scale(e1, 0.5);
    let e2 = g.squared_error(recon_2d, plane)?;
    g.add(e1, e2)
}

pub fn argmax_rows(logits: &[f64], classes: usize) -> impl Iterator<Item = usize> + '_ {
    logits.chunks(classes).map(|row| {
        row.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    })
}
