use lcp_autodiff::{Axis, Tensor, Value};

use crate::error::Result;
use crate::nets::{input_gradient_of_log_prob, BoundPolicy, BoundRoa, GpScope};

/// `E‖∇ₛ log π(a|s)‖²` over the rows of a minibatch, differentiable w.r.t.
/// the policy parameters.
pub fn lcp_penalty(
    policy: &BoundPolicy,
    obs: &Tensor,
    latent: Option<&Tensor>,
    action: &Tensor,
    scope: GpScope,
) -> Result<Value> {
    let grad = input_gradient_of_log_prob(policy, obs, latent, action, scope)?;
    let rows = grad.shape().rows as f64;
    Ok(grad.square()?.sum()?.scale(1.0 / rows)?)
}

fn row_norm_mean(x: &Value) -> Result<Value> {
    Ok(x.square()?.sum_axis(Axis::Col)?.sqrt()?.mean()?)
}

/// `λ‖z^μ − sg[z^φ]‖ + ‖sg[z^μ] − z^φ‖`, each norm averaged over rows.
pub fn roa_loss_from_latents(z_mu: &Value, z_phi: &Value, lambda: f64) -> Result<Value> {
    let pull_mu = row_norm_mean(&z_mu.sub(&z_phi.detach())?)?;
    let pull_phi = row_norm_mean(&z_mu.detach().sub(z_phi)?)?;
    Ok(pull_mu.scale(lambda)?.add(&pull_phi)?)
}

/// ROA loss for privileged rows and their stacked observation histories.
pub fn roa_loss(roa: &BoundRoa, privileged: &Value, history: &Value, lambda: f64) -> Result<Value> {
    let z_mu = roa.encode_privileged(privileged)?;
    let z_phi = roa.encode_history(history)?;
    roa_loss_from_latents(&z_mu, &z_phi, lambda)
}

/// PPO clipped surrogate `mean(min(r A, clip(r, 1 ± ε) A))` with
/// `r = exp(log π − log π_old)`; returned with the sign to be maximized.
pub fn clipped_surrogate(
    log_prob: &Value,
    old_log_prob: &Value,
    advantages: &Value,
    clip: f64,
) -> Result<Value> {
    let ratio = log_prob.sub(old_log_prob)?.exp()?;
    let unclipped = ratio.mul(advantages)?;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip)?.mul(advantages)?;
    Ok(unclipped.minimum(&clipped)?.mean()?)
}
