//! Belief over the live candidate set: similarity-softmax initialization,
//! entropy, conditioning on observations, the multiplicative history update,
//! and the commitment trigger.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Candidate, CandidateSet, ConversationHistory, Observation, TriggerConfig, UpdateConfig};
use crate::similarity::{SimilarityError, SimilarityProvider};

pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("belief has {probs} entries for {members} candidates")]
    Misaligned { probs: usize, members: usize },
    #[error("belief entry {0} is negative or not finite")]
    BadEntry(usize),
    #[error("belief sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("candidate `{0}` is not in the current belief support set")]
    NotASubset(String),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// `b_t`: probabilities aligned index-for-index with a [`CandidateSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    set: CandidateSet,
    probs: Vec<f64>,
}

impl BeliefState {
    pub fn new(set: CandidateSet, probs: Vec<f64>) -> Result<Self, BeliefError> {
        if probs.len() != set.len() {
            return Err(BeliefError::Misaligned {
                probs: probs.len(),
                members: set.len(),
            });
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(BeliefError::BadEntry(i));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(BeliefError::NotNormalized(total));
        }
        Ok(Self { set, probs })
    }

    /// Normalizes non-negative weights; all-zero weights become uniform.
    pub fn from_weights(set: CandidateSet, weights: Vec<f64>) -> Result<Self, BeliefError> {
        if weights.len() != set.len() {
            return Err(BeliefError::Misaligned {
                probs: weights.len(),
                members: set.len(),
            });
        }
        if let Some(i) = weights.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(BeliefError::BadEntry(i));
        }
        let total: f64 = weights.iter().sum();
        let probs = if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / set.len() as f64; set.len()]
        };
        Ok(Self { set, probs })
    }

    pub fn uniform(set: CandidateSet) -> Self {
        let n = set.len();
        Self {
            probs: vec![1.0 / n as f64; n],
            set,
        }
    }

    pub fn set(&self) -> &CandidateSet {
        &self.set
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, id: &str) -> Option<f64> {
        self.set.position(id).map(|i| self.probs[i])
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the most probable candidate; ties go to the lowest id.
    pub fn argmax_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.len() {
            let (p, q) = (self.probs[i], self.probs[best]);
            if p > q || (p == q && self.set.get(i).id < self.set.get(best).id) {
                best = i;
            }
        }
        best
    }

    pub fn argmax(&self) -> &Candidate {
        self.set.get(self.argmax_index())
    }

    /// Candidate indices ordered by descending belief, ties by id.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.set.get(a).id.cmp(&self.set.get(b).id))
        });
        idx
    }

    /// 1-based rank of `id` in [`Self::ranking`].
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        let pos = self.set.position(id)?;
        self.ranking().iter().position(|&i| i == pos).map(|r| r + 1)
    }

    /// Conditions on `obs` and drops inconsistent candidates from the set.
    /// `None` if no probability mass survives.
    pub fn restrict(&self, obs: &Observation) -> Option<BeliefState> {
        let keep: Vec<bool> = self.set.iter().map(|c| obs.admits(c)).collect();
        let mass: f64 = self.probs.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p).sum();
        if mass <= 0.0 {
            return None;
        }
        let set = self.set.retain_indices(|i| keep[i])?;
        let probs = self
            .probs
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(p, _)| p / mass)
            .collect();
        Some(BeliefState { set, probs })
    }
}

/// Max-subtracted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `b_0`: softmax over `sim(c, h_0)`.
pub fn init_belief(
    set: CandidateSet,
    history: &ConversationHistory,
    provider: &dyn SimilarityProvider,
) -> Result<BeliefState, BeliefError> {
    let sims = set
        .iter()
        .map(|c| provider.sim(c, history))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BeliefState {
        probs: softmax(&sims),
        set,
    })
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(b: &BeliefState) -> f64 {
    entropy_of(b.probs())
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    h.max(0.0)
}

/// Zeroes out candidates inconsistent with `obs` and renormalizes, keeping
/// alignment with the original set. `None` marks an impossible branch.
pub fn posterior_given_observation(b: &BeliefState, obs: &Observation) -> Option<BeliefState> {
    let masked: Vec<f64> = b
        .set()
        .iter()
        .zip(b.probs())
        .map(|(c, p)| if obs.admits(c) { *p } else { 0.0 })
        .collect();
    let mass: f64 = masked.iter().sum();
    if mass <= 0.0 {
        return None;
    }
    Some(BeliefState {
        set: b.set().clone(),
        probs: masked.into_iter().map(|p| p / mass).collect(),
    })
}

/// `b_{t+1}(c) ∝ b_t(c) · sim(c, h_{t+1})^δ` over `new_set`. Negative
/// similarities count as zero; if every weight vanishes the result is uniform
/// over `new_set`.
pub fn update_belief(
    b: &BeliefState,
    new_set: &CandidateSet,
    new_history: &ConversationHistory,
    provider: &dyn SimilarityProvider,
    cfg: &UpdateConfig,
) -> Result<BeliefState, BeliefError> {
    let mut weights = Vec::with_capacity(new_set.len());
    for c in new_set.iter() {
        let prior = b.prob_of(&c.id).ok_or_else(|| BeliefError::NotASubset(c.id.clone()))?;
        let s = provider.sim(c, new_history)?.max(0.0);
        weights.push(prior * s.powf(cfg.delta));
    }
    BeliefState::from_weights(new_set.clone(), weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitDecision {
    Continue,
    DirectCommit,
    RefinedCommit,
}

/// Commitment trigger. `turn` is the 1-based index of the turn about to be
/// taken, so `turn >= max_turns` means this is the last utterance available.
pub fn should_commit(b: &BeliefState, turn: usize, cfg: &TriggerConfig) -> CommitDecision {
    let n = b.set().len();
    if n <= 2 {
        return CommitDecision::RefinedCommit;
    }
    let ratio = entropy(b) / (n as f64).ln();
    if ratio < cfg.epsilon && b.max_prob() >= cfg.theta {
        return CommitDecision::DirectCommit;
    }
    if turn >= cfg.max_turns {
        return CommitDecision::RefinedCommit;
    }
    CommitDecision::Continue
}
