//! Loss functions and advantage estimation for the edge agent.
//!
//! The critic minimizes the mean absolute error against one-step TD targets;
//! the actor maximizes the clipped importance-sampling surrogate (minimized
//! here with a leading negation) and is additionally pulled toward the
//! expert's actions by a cross-entropy term. Advantage targets are treated as
//! constants: no gradient flows through them.

use crate::tensorlite::{log_softmax, softmax, GradientSet, MaskedModel};

use super::{AgentError, Transition};

/// Backward recursion of the generalized advantage estimator plus the
/// one-step TD critic targets, from already-evaluated state values.
///
/// `values[t]` is V(s_t) and `next_values[t]` is V(s'_t); for a contiguous
/// batch the latter equals V(s_{t+1}) with the final entry bootstrapping the
/// cut-off tail.
pub fn gae_from_values(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    let n = rewards.len();
    if n == 0 {
        return Err(AgentError::EmptyBatch);
    }
    assert_eq!(values.len(), n);
    assert_eq!(next_values.len(), n);
    let deltas: Vec<f64> = (0..n)
        .map(|t| rewards[t] + gamma * next_values[t] - values[t])
        .collect();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        acc = deltas[t] + gamma * lambda * acc;
        advantages[t] = acc;
    }
    let targets: Vec<f64> = (0..n)
        .map(|t| rewards[t] + gamma * next_values[t])
        .collect();
    Ok((advantages, targets))
}

/// GAE advantages and critic targets for a contiguous batch, evaluating the
/// critic at every state and at the final bootstrap state.
pub fn compute_gae(
    batch: &[Transition],
    critic: &MaskedModel,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = batch.iter().map(|t| critic.forward(&t.state).0[0]).collect();
    let next_values: Vec<f64> = batch
        .iter()
        .map(|t| critic.forward(&t.next_state).0[0])
        .collect();
    gae_from_values(&rewards, &values, &next_values, gamma, lambda)
}

/// Mean absolute error of the critic against fixed targets, with its
/// gradient.
pub fn critic_loss(
    critic: &MaskedModel,
    batch: &[Transition],
    targets: &[f64],
) -> (f64, GradientSet) {
    assert_eq!(batch.len(), targets.len());
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = GradientSet::zeros(critic.params().len());
    for (t, &target) in batch.iter().zip(targets) {
        let (out, cache) = critic.forward(&t.state);
        let err = target - out[0];
        loss += err.abs() / n;
        // d|target - v|/dv = -sign(target - v); zero subgradient at the kink
        let dout = if err > 0.0 {
            -1.0 / n
        } else if err < 0.0 {
            1.0 / n
        } else {
            0.0
        };
        grad.add_scaled(&critic.backward(&cache, &[dout]), 1.0);
    }
    (loss, grad)
}

/// Mean absolute error between predictions and targets (scalar form of the
/// critic objective).
pub fn mean_absolute_error(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let n = predictions.len() as f64;
    predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p).abs())
        .sum::<f64>()
        / n
}

/// Per-sample clipped surrogate objective (to be maximized).
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Negated clipped-surrogate actor objective with its gradient. Advantages
/// are constants; the gradient flows through the probability ratio only when
/// the unclipped branch attains the minimum.
pub fn actor_loss(
    actor: &MaskedModel,
    batch: &[Transition],
    advantages: &[f64],
    clip: f64,
) -> (f64, GradientSet) {
    assert_eq!(batch.len(), advantages.len());
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = GradientSet::zeros(actor.params().len());
    for (t, &adv) in batch.iter().zip(advantages) {
        let (logits, cache) = actor.forward(&t.state);
        let logp = log_softmax(&logits);
        let ratio = (logp[t.action] - t.logp_old).exp();
        let objective = clipped_objective(ratio, adv, clip);
        loss -= objective / n;
        let unclipped = ratio * adv;
        if unclipped <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv {
            // d(-R*A)/dlogits = -A * R * (onehot(a) - softmax)
            let probs = softmax(&logits);
            let scale = -adv * ratio / n;
            let mut dout: Vec<f64> = probs.iter().map(|&p| -p * scale).collect();
            dout[t.action] += scale;
            grad.add_scaled(&actor.backward(&cache, &dout), 1.0);
        }
    }
    (loss, grad)
}

/// Cross-entropy between the policy and the expert's one-hot action, averaged
/// over the batch, with its gradient.
pub fn imitation_loss(actor: &MaskedModel, batch: &[Transition]) -> (f64, GradientSet) {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = GradientSet::zeros(actor.params().len());
    for t in batch {
        let (logits, cache) = actor.forward(&t.state);
        let logp = log_softmax(&logits);
        loss -= logp[t.expert_action] / n;
        let probs = softmax(&logits);
        let mut dout: Vec<f64> = probs.iter().map(|&p| p / n).collect();
        dout[t.expert_action] -= 1.0 / n;
        grad.add_scaled(&actor.backward(&cache, &dout), 1.0);
    }
    (loss, grad)
}

/// Blend of the three losses: `alpha * (critic + actor) + (1 - alpha) * imitation`.
pub fn total_loss(alpha: f64, l_c: f64, l_a: f64, l_i: f64) -> Result<f64, AgentError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AgentError::BadAlpha(alpha));
    }
    Ok(alpha * (l_c + l_a) + (1.0 - alpha) * l_i)
}
