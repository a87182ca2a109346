//! Per-intersection edge agent: a PPO actor-critic pair steered by an expert
//! through a cross-entropy imitation term, with the blend weight shifting
//! from imitation toward reinforcement as episodes accumulate.
//!
//! One transition is stored per signal decision; once the trajectory memory
//! holds a full mini-batch the agent trains on it, emits the pre-step
//! gradient of the blended loss for federated sharing, and clears the memory.

mod losses;

pub use losses::{
    actor_loss, clipped_objective, compute_gae, critic_loss, gae_from_values, imitation_loss,
    mean_absolute_error, total_loss,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pressure::{
    intersection_hp, intersection_pressure, maxhp_select, road_hp, road_pressure,
};
use crate::simcore::IntersectionObservation;
use crate::tensorlite::{
    load_model, log_softmax, make_mask, save_model, softmax, GradientSet, LayerShape, Mask,
    MaskedModel, TensorError,
};

/// State vector length: twelve directed-road pressures plus the phase.
pub const STATE_DIM: usize = 13;
/// One action per control phase.
pub const NUM_ACTIONS: usize = crate::netmodel::NUM_PHASES;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("balance factor {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("gradient shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Layer shapes of the actor network.
pub fn actor_shapes() -> Vec<LayerShape> {
    vec![
        LayerShape::new(STATE_DIM, 13),
        LayerShape::new(13, 32),
        LayerShape::new(32, NUM_ACTIONS),
    ]
}

/// Layer shapes of the critic network.
pub fn critic_shapes() -> Vec<LayerShape> {
    vec![LayerShape::new(STATE_DIM, 13), LayerShape::new(13, 32), LayerShape::new(32, 1)]
}

/// Which road/intersection metric feeds the state and reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureKind {
    Hybrid,
    Count,
}

/// Encoded observation.
pub type EncodedState = [f64; STATE_DIM];

/// One trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EncodedState,
    pub action: usize,
    pub expert_action: usize,
    pub reward: f64,
    pub next_state: EncodedState,
    /// Log probability of `action` under the policy that chose it.
    pub logp_old: f64,
}

/// Twelve road pressures in directed-road order, then the phase scaled to
/// `[0, 1]`.
pub fn encode_state(obs: &IntersectionObservation, kind: PressureKind) -> EncodedState {
    let mut s = [0.0; STATE_DIM];
    for m in 0..12 {
        s[m] = match kind {
            PressureKind::Hybrid => road_hp(obs, m),
            PressureKind::Count => road_pressure(obs, m),
        };
    }
    s[12] = obs.phase as f64 / (NUM_ACTIONS - 1) as f64;
    s
}

/// Reward: the negated intersection pressure.
pub fn reward(obs: &IntersectionObservation, kind: PressureKind) -> f64 {
    match kind {
        PressureKind::Hybrid => -intersection_hp(obs),
        PressureKind::Count => -intersection_pressure(obs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Sample,
    Greedy,
}

/// Softmax policy over the actor's logits. `Sample` draws from the
/// categorical distribution; `Greedy` takes the argmax with ties broken
/// toward the lowest index. Returns the action and its log probability.
pub fn select_action(
    actor: &MaskedModel,
    state: &EncodedState,
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
) -> (usize, f64) {
    let (logits, _) = actor.forward(state);
    let logp = log_softmax(&logits);
    let action = match mode {
        ActionMode::Greedy => {
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            best
        }
        ActionMode::Sample => {
            let probs = softmax(&logits);
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            let mut chosen = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                cum += p;
                if u < cum {
                    chosen = i;
                    break;
                }
            }
            chosen
        }
    };
    (action, logp[action])
}

/// Blend-weight schedule for the total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    /// `alpha = clamp(slope * episode, 0, 1)`; episodes count from one.
    Slope(f64),
    /// Constant alpha (ablations).
    Fixed(f64),
}

impl AlphaSchedule {
    pub fn alpha_for(&self, episode: u32) -> f64 {
        match *self {
            AlphaSchedule::Slope(slope) => (slope * episode as f64).clamp(0.0, 1.0),
            AlphaSchedule::Fixed(a) => a.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub clip: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub alpha: AlphaSchedule,
    pub pressure: PressureKind,
    /// Apply the local optimizer step before sharing the gradient.
    pub local_step: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            lambda: 0.95,
            batch_size: 5,
            clip: 0.2,
            lr_actor: 0.0005,
            lr_critic: 0.001,
            alpha: AlphaSchedule::Slope(0.001),
            pressure: PressureKind::Hybrid,
            local_step: true,
        }
    }
}

/// Losses of one training batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub critic: f64,
    pub actor: f64,
    pub imitation: f64,
    pub total: f64,
    pub alpha: f64,
}

/// Pre-step gradient of the blended loss over both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGradient {
    pub actor: GradientSet,
    pub critic: GradientSet,
}

struct PendingDecision {
    state: EncodedState,
    action: usize,
    expert_action: usize,
    logp: f64,
}

/// The per-intersection learner. Owns its two networks, trajectory memory,
/// and action-sampling RNG; never touches another agent's state.
pub struct PpoAgent {
    id: usize,
    actor: MaskedModel,
    critic: MaskedModel,
    cfg: AgentConfig,
    memory: Vec<Transition>,
    pending: Option<PendingDecision>,
    rng: ChaCha8Rng,
    episode: u32,
}

impl PpoAgent {
    pub fn new(id: usize, actor: MaskedModel, critic: MaskedModel, cfg: AgentConfig, seed: u64) -> PpoAgent {
        assert_eq!(actor.input_dim(), STATE_DIM);
        assert_eq!(actor.output_dim(), NUM_ACTIONS);
        assert_eq!(critic.output_dim(), 1);
        PpoAgent {
            id,
            actor,
            critic,
            cfg,
            memory: Vec::new(),
            pending: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            episode: 1,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn actor(&self) -> &MaskedModel {
        &self.actor
    }

    pub fn critic(&self) -> &MaskedModel {
        &self.critic
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.alpha.alpha_for(self.episode)
    }

    /// Resets per-episode state; trajectory batches never straddle episodes.
    pub fn begin_episode(&mut self, episode: u32) {
        self.episode = episode;
        self.memory.clear();
        self.pending = None;
    }

    /// Closes the previous decision's transition against the newly observed
    /// state, if one is open.
    pub fn complete_pending(&mut self, obs: &IntersectionObservation) {
        if let Some(p) = self.pending.take() {
            let next_state = encode_state(obs, self.cfg.pressure);
            self.memory.push(Transition {
                state: p.state,
                action: p.action,
                expert_action: p.expert_action,
                reward: reward(obs, self.cfg.pressure),
                next_state,
                logp_old: p.logp,
            });
        }
    }

    /// Chooses the next phase and records the open decision; the expert label
    /// is taken on the same observation.
    pub fn decide(&mut self, obs: &IntersectionObservation, mode: ActionMode) -> usize {
        let state = encode_state(obs, self.cfg.pressure);
        let (action, logp) = select_action(&self.actor, &state, mode, &mut self.rng);
        let expert_action = maxhp_select(obs);
        self.pending = Some(PendingDecision { state, action, expert_action, logp });
        action
    }

    /// Whether the memory holds a full mini-batch.
    pub fn batch_ready(&self) -> bool {
        self.memory.len() >= self.cfg.batch_size
    }

    /// Trains on the buffered mini-batch: computes the three losses and the
    /// pre-step gradient of their blend, applies one local optimizer step per
    /// network (unless disabled), and clears the memory.
    pub fn train_on_batch(&mut self) -> Result<(LossReport, AgentGradient), AgentError> {
        assert_eq!(
            self.memory.len(),
            self.cfg.batch_size,
            "lockstep cadence fills batches exactly"
        );
        let batch = std::mem::take(&mut self.memory);
        let alpha = self.alpha();
        let (advantages, targets) =
            compute_gae(&batch, &self.critic, self.cfg.gamma, self.cfg.lambda)?;
        let (l_c, g_c) = critic_loss(&self.critic, &batch, &targets);
        let (l_a, g_a) = actor_loss(&self.actor, &batch, &advantages, self.cfg.clip);
        let (l_i, g_i) = imitation_loss(&self.actor, &batch);
        let total = total_loss(alpha, l_c, l_a, l_i)?;

        let mut actor_grad = GradientSet::zeros(g_a.len());
        actor_grad.add_scaled(&g_a, alpha);
        actor_grad.add_scaled(&g_i, 1.0 - alpha);
        let mut critic_grad = GradientSet::zeros(g_c.len());
        critic_grad.add_scaled(&g_c, alpha);

        if self.cfg.local_step {
            self.actor.adam_step(&actor_grad, self.cfg.lr_actor);
            self.critic.adam_step(&critic_grad, self.cfg.lr_critic);
        }
        Ok((
            LossReport { critic: l_c, actor: l_a, imitation: l_i, total, alpha },
            AgentGradient { actor: actor_grad, critic: critic_grad },
        ))
    }

    /// Applies a federated gradient: masks it with this agent's own masks and
    /// takes one optimizer step per network.
    pub fn apply_aggregated(&mut self, actor_grad: &[f64], critic_grad: &[f64]) -> Result<(), AgentError> {
        if actor_grad.len() != self.actor.params().len() {
            return Err(AgentError::ShapeMismatch {
                expected: self.actor.params().len(),
                got: actor_grad.len(),
            });
        }
        if critic_grad.len() != self.critic.params().len() {
            return Err(AgentError::ShapeMismatch {
                expected: self.critic.params().len(),
                got: critic_grad.len(),
            });
        }
        let mut ag = GradientSet { values: actor_grad.to_vec() };
        ag.apply_mask(self.actor.mask());
        let mut cg = GradientSet { values: critic_grad.to_vec() };
        cg.apply_mask(self.critic.mask());
        self.actor.adam_step(&ag, self.cfg.lr_actor);
        self.critic.adam_step(&cg, self.cfg.lr_critic);
        Ok(())
    }

    pub fn actor_mask(&self) -> &Mask {
        self.actor.mask()
    }

    pub fn critic_mask(&self) -> &Mask {
        self.critic.mask()
    }

    /// Serialized footprint: both model checkpoints plus the schedule state.
    pub fn save(&self) -> Vec<u8> {
        let actor = save_model(&self.actor);
        let critic = save_model(&self.critic);
        let mut out = Vec::with_capacity(actor.len() + critic.len() + 32);
        out.extend_from_slice(b"FLA1");
        out.extend_from_slice(&(self.id as u32).to_le_bytes());
        out.extend_from_slice(&self.episode.to_le_bytes());
        match self.cfg.alpha {
            AlphaSchedule::Slope(s) => {
                out.push(0);
                out.extend_from_slice(&s.to_le_bytes());
            }
            AlphaSchedule::Fixed(a) => {
                out.push(1);
                out.extend_from_slice(&a.to_le_bytes());
            }
        }
        out.extend_from_slice(&(actor.len() as u32).to_le_bytes());
        out.extend_from_slice(&actor);
        out.extend_from_slice(&(critic.len() as u32).to_le_bytes());
        out.extend_from_slice(&critic);
        out
    }

    /// Restores networks and schedule state from `save` output.
    pub fn load(data: &[u8], cfg: AgentConfig, seed: u64) -> Result<PpoAgent, AgentError> {
        let corrupt = |m: &str| AgentError::Tensor(TensorError::Corrupt(m.into()));
        if data.len() < 25 || &data[0..4] != b"FLA1" {
            return Err(corrupt("bad agent header"));
        }
        let id = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
        let episode = u32::from_le_bytes(data[8..12].try_into().unwrap());
        let kind = data[12];
        let value = f64::from_le_bytes(data[13..21].try_into().unwrap());
        let alpha = match kind {
            0 => AlphaSchedule::Slope(value),
            1 => AlphaSchedule::Fixed(value),
            _ => return Err(corrupt("bad schedule kind")),
        };
        let mut pos = 21;
        let mut take_blob = |pos: &mut usize| -> Result<&[u8], AgentError> {
            if *pos + 4 > data.len() {
                return Err(corrupt("truncated blob length"));
            }
            let len = u32::from_le_bytes(data[*pos..*pos + 4].try_into().unwrap()) as usize;
            *pos += 4;
            if *pos + len > data.len() {
                return Err(corrupt("truncated blob"));
            }
            let blob = &data[*pos..*pos + len];
            *pos += len;
            Ok(blob)
        };
        let actor = load_model(take_blob(&mut pos)?)?;
        let critic = load_model(take_blob(&mut pos)?)?;
        let mut agent = PpoAgent::new(id, actor, critic, AgentConfig { alpha, ..cfg }, seed);
        agent.episode = episode;
        Ok(agent)
    }
}

/// Seeded dense actor/critic pair (no pruning).
pub fn dense_pair(seed: u64) -> (MaskedModel, MaskedModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = MaskedModel::dense(&actor_shapes(), &mut rng);
    let critic = MaskedModel::dense(&critic_shapes(), &mut rng);
    (actor, critic)
}

/// Seeded pruned actor/critic pair at the given per-matrix rates.
pub fn pruned_pair(seed: u64, rates: &[f64]) -> Result<(MaskedModel, MaskedModel), AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_shapes = actor_shapes();
    let c_shapes = critic_shapes();
    let a_params = crate::tensorlite::xavier_params(&a_shapes, &mut rng);
    let c_params = crate::tensorlite::xavier_params(&c_shapes, &mut rng);
    let actor = MaskedModel::new(a_shapes.clone(), a_params, make_mask(&a_shapes, rates, seed.wrapping_add(1))?);
    let critic = MaskedModel::new(c_shapes.clone(), c_params, make_mask(&c_shapes, rates, seed.wrapping_add(2))?);
    Ok((actor, critic))
}
