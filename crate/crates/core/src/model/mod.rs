//! The hybrid network: a 1-D and a 2-D convolutional denoising pathway, three
//! fusion heads and the composite objective.

mod network;
mod spec;

pub use network::{
    argmax_rows, fairness_penalty, gated_fusion, reconstruction_loss, total_loss, ForwardNodes,
    LossComponents, MarsModel, StepOutcome,
};
pub use spec::{
    ArchitectureSpec, Conv1dLayer, Conv2dLayer, FusionVariant, LossWeights, Reduction, ShapePlan,
};

use crate::autodiff::{Graph, Parameter, Tensor};
use crate::{Error, Result};

/// Mean softmax cross-entropy of `[B, K]` logits.
pub fn loss_classification(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut g = Graph::new();
    let l = g.input(logits.clone());
    let loss = g.cross_entropy(l, labels)?;
    Ok(g.value(loss).item())
}

/// Two-pathway reconstruction error for windows `x` `[B, N, T]`, a 1-D
/// reconstruction `[B, N, T]` and a 2-D reconstruction `[B, 1, T, N]`.
pub fn loss_reconstruction(x: &Tensor, recon_1d: &Tensor, recon_2d: &Tensor) -> Result<f64> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(Error::shape(format!("windows must be [B, N, T], got {s:?}")));
    }
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let t = g.transpose_last2(xi)?;
    let plane = g.reshape(t, &[s[0], 1, s[2], s[1]])?;
    let r1 = g.input(recon_1d.clone());
    let r2 = g.input(recon_2d.clone());
    let l = reconstruction_loss(&mut g, xi, plane, r1, r2)?;
    Ok(g.value(l).item())
}

/// `Σ‖W‖²` over weight tensors; biases are excluded.
pub fn loss_weight_decay(params: &[Parameter]) -> f64 {
    params
        .iter()
        .filter(|p| p.is_weight())
        .map(|p| p.value.sum_squares())
        .sum()
}

/// Feature-level fusion input: the 2-D latent followed by the 1-D latent.
pub fn concat_latents(latent_2d: &[f64], latent_1d: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(latent_2d.len() + latent_1d.len());
    out.extend_from_slice(latent_2d);
    out.extend_from_slice(latent_1d);
    out
}

/// Decision-level fusion of two equal-length projected features.
pub fn fuse_decision(p2d: &[f64], p1d: &[f64]) -> Result<Vec<f64>> {
    if p2d.len() != p1d.len() || p2d.is_empty() {
        return Err(Error::shape(format!(
            "fusion inputs of length {} and {}",
            p2d.len(),
            p1d.len()
        )));
    }
    let mut g = Graph::new();
    let a = g.input(Tensor::new(vec![1, p2d.len()], p2d.to_vec())?);
    let b = g.input(Tensor::new(vec![1, p1d.len()], p1d.to_vec())?);
    let f = gated_fusion(&mut g, a, b)?;
    Ok(g.value(f).data().to_vec())
}

/// Symmetric KL penalty between the batch feature distributions of two
/// projected `[B, M]` feature sets.
pub fn fairness_value(p1d: &Tensor, p2d: &Tensor) -> Result<f64> {
    if p1d.shape() != p2d.shape() || p1d.rank() != 2 {
        return Err(Error::shape(format!(
            "fairness inputs {:?} and {:?}",
            p1d.shape(),
            p2d.shape()
        )));
    }
    let mut g = Graph::new();
    let a = g.input(p1d.clone());
    let b = g.input(p2d.clone());
    let f = fairness_penalty(&mut g, a, b)?;
    Ok(g.value(f).item())
}
