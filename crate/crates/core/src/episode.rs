//! The per-conversation decision loop.
//!
//! Each turn: check the commitment trigger, otherwise propose actions and
//! plan; realize the chosen action as an utterance; read the user's reply;
//! extend the history, prune the candidate set and reweight the belief. A
//! turn is one agent utterance. An accepted commit ends the episode with
//! success; running out of turns ends it with failure.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{entropy, init_belief, should_commit, update_belief, BeliefError, BeliefState, CommitDecision};
use crate::domain::{prune, Action, CandidateSet, ConversationHistory, DomainError, HyperParams, Outcome, Speaker};
use crate::infogain::expected_information_gain;
use crate::llmclient::{parse_structured, prompts, ChatExchange, ChatModel};
use crate::planner::{plan, PlannerOptions, SearchContext};
use crate::proposer::{
    propose_deterministic, propose_llm, render_belief_topk, render_candidates, render_history, ActionSet,
};
use crate::similarity::SimilarityProvider;
use crate::simulator::User;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("the user left the conversation")]
    UserLeft,
    #[error("episode already finished")]
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Template,
    Llm,
}

/// How the action is chosen once the trigger says to continue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Mcts,
    /// Uniform draw from the action set.
    Random,
    /// Highest single-step EIG, no lookahead.
    GreedyEig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub hyper: HyperParams,
    pub planner: PlannerOptions,
    pub selection: Selection,
    /// Action proposer.
    pub proposer: Mode,
    /// Utterance realization.
    pub utterance: Mode,
    /// Refined commitment.
    pub refined_commit: Mode,
}

/// Shared collaborators for a run.
#[derive(Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub provider: &'a dyn SimilarityProvider,
    pub model: Option<&'a dyn ChatModel>,
    pub cfg: &'a EngineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UtteranceContent {
    Ask { question: String, options: Vec<String> },
    Commit { candidate_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub content: UtteranceContent,
}

pub fn template_utterance(action: &Action, b: &BeliefState) -> Utterance {
    match action {
        Action::Ask { attribute, options } => Utterance {
            text: format!("Which {attribute}? Options: {}, or none of these.", options.join(", ")),
            content: UtteranceContent::Ask {
                question: format!("Which {attribute}?"),
                options: options.clone(),
            },
        },
        Action::Commit { candidate_id } => {
            let text = b
                .set()
                .position(candidate_id)
                .map(|i| b.set().get(i).text.clone())
                .unwrap_or_else(|| candidate_id.clone());
            Utterance {
                text: format!("I suggest: {text}"),
                content: UtteranceContent::Commit {
                    candidate_id: candidate_id.clone(),
                },
            }
        }
    }
}

/// Renders `action` as the agent's message. In `Llm` mode any model failure
/// falls back to the template; the second value names the failure.
pub fn realize_utterance(
    action: &Action,
    history: &ConversationHistory,
    b: &BeliefState,
    mode: Mode,
    model: Option<&dyn ChatModel>,
) -> (Utterance, Option<String>) {
    let template = template_utterance(action, b);
    if mode == Mode::Template {
        return (template, None);
    }
    let Some(model) = model else {
        return (template, Some("no model configured".into()));
    };
    let prompt_t = prompts::realize_utterance();
    let text = prompt_t
        .render(&[
            ("history", &render_history(history)),
            ("candidates", &render_candidates(b)),
            ("belief_topk", &render_belief_topk(b, 5)),
            ("action", &action.to_string()),
        ])
        .and_then(|p| model.complete(&ChatExchange::user(model.model_name(), p)))
        .and_then(|reply| parse_structured(&reply, &prompt_t))
        .and_then(|f| {
            f.get("utterance")
                .and_then(|v| v.as_str())
                .filter(|s| !s.trim().is_empty())
                .map(str::to_string)
                .ok_or_else(|| crate::llmclient::LlmError::Parse("empty utterance".into()))
        });
    match text {
        Ok(t) => (
            Utterance {
                text: t,
                content: template.content,
            },
            None,
        ),
        Err(e) => (template, Some(e.to_string())),
    }
}

/// Picks the candidate to commit to when the trigger or the planner asks for
/// a refined commitment. Template mode (and every model failure) uses the
/// belief argmax.
pub fn refined_commit(
    history: &ConversationHistory,
    b: &BeliefState,
    mode: Mode,
    model: Option<&dyn ChatModel>,
) -> (Action, Option<String>) {
    let fallback = Action::commit(b.argmax().id.clone());
    if b.set().len() == 1 || mode == Mode::Template {
        return (fallback, None);
    }
    let Some(model) = model else {
        return (fallback, Some("no model configured".into()));
    };
    let t = prompts::refined_commit();
    let picked = t
        .render(&[
            ("history", &render_history(history)),
            ("candidates", &render_candidates(b)),
            ("belief_topk", &render_belief_topk(b, 5)),
        ])
        .and_then(|p| model.complete(&ChatExchange::user(model.model_name(), p)))
        .and_then(|reply| parse_structured(&reply, &t));
    match picked {
        Ok(f) => match f.get("candidate_id").and_then(|v| v.as_str()) {
            Some(id) if b.set().contains(id) => (Action::commit(id), None),
            Some(id) => (fallback, Some(format!("model picked `{id}`, not a live candidate"))),
            None => (fallback, Some("candidate_id is not a string".into())),
        },
        Err(e) => (fallback, Some(e.to_string())),
    }
}

/// What happened at one turn, with the state it started from and the state
/// it left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSnapshot {
    pub schema_version: u32,
    pub episode: usize,
    /// 1-based.
    pub turn: usize,
    pub decision: CommitDecision,
    pub action: Action,
    pub utterance: String,
    pub outcome: Outcome,
    pub reply: String,
    pub candidates_before: usize,
    pub entropy_before: f64,
    pub target_rank_before: Option<usize>,
    pub candidates_after: usize,
    pub entropy_after: f64,
    pub target_rank_after: Option<usize>,
    /// The reply contradicted every candidate and pruning was undone.
    pub rollback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallbacks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub target_id: Option<String>,
    pub success: bool,
    pub turns: usize,
    pub committed: Option<String>,
    pub trace: Vec<TurnSnapshot>,
}

impl EpisodeResult {
    /// One JSON object per turn.
    pub fn write_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        for snap in &self.trace {
            serde_json::to_writer(&mut w, snap)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub episode: usize,
    /// Turns used so far.
    pub turn: usize,
    pub history: ConversationHistory,
    pub belief: BeliefState,
    pub trace: Vec<TurnSnapshot>,
    pub seed: u64,
    /// Evaluation only; never consulted by the agent.
    pub target_id: Option<String>,
    finished: bool,
}

impl EpisodeState {
    pub fn start(
        episode: usize,
        set: CandidateSet,
        history: ConversationHistory,
        provider: &dyn SimilarityProvider,
        seed: u64,
        target_id: Option<String>,
    ) -> Result<Self, EpisodeError> {
        let belief = init_belief(set, &history, provider)?;
        Ok(Self::from_belief(episode, belief, history, seed, target_id))
    }

    pub fn from_belief(
        episode: usize,
        belief: BeliefState,
        history: ConversationHistory,
        seed: u64,
        target_id: Option<String>,
    ) -> Self {
        Self {
            episode,
            turn: 0,
            history,
            belief,
            trace: Vec::new(),
            seed,
            target_id,
            finished: false,
        }
    }

    pub fn candidates(&self) -> &CandidateSet {
        self.belief.set()
    }

    fn target_rank(&self) -> Option<usize> {
        self.target_id.as_deref().and_then(|id| self.belief.rank_of(id))
    }

    fn finish(&mut self, success: bool, committed: Option<String>) -> EpisodeResult {
        self.finished = true;
        EpisodeResult {
            episode: self.episode,
            target_id: self.target_id.clone(),
            success,
            turns: self.turn,
            committed,
            trace: std::mem::take(&mut self.trace),
        }
    }
}

pub enum TurnResult {
    Continue(EpisodeState),
    Finished(EpisodeResult),
}

/// Decision made at the start of a turn, before anything is said.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnDecision {
    pub decision: CommitDecision,
    pub proposed: Option<ActionSet>,
    pub plan: Option<crate::planner::PlanResult>,
    pub action: Action,
    pub fallbacks: Vec<String>,
}

fn turn_seed(seed: u64, turn: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(turn as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trigger check, proposal and planning for the next turn of `state`.
pub fn decide(state: &EpisodeState, ctx: &EpisodeContext<'_>) -> TurnDecision {
    let cfg = ctx.cfg;
    let b = &state.belief;
    let turn = state.turn + 1;
    let decision = should_commit(b, turn, &cfg.hyper.trigger);
    let mut fallbacks = Vec::new();
    match decision {
        CommitDecision::DirectCommit => TurnDecision {
            decision,
            proposed: None,
            plan: None,
            action: Action::commit(b.argmax().id.clone()),
            fallbacks,
        },
        CommitDecision::RefinedCommit => {
            let (action, fb) = refined_commit(&state.history, b, cfg.refined_commit, ctx.model);
            fallbacks.extend(fb);
            TurnDecision {
                decision,
                proposed: None,
                plan: None,
                action,
                fallbacks,
            }
        }
        CommitDecision::Continue => {
            let proposed = match (cfg.proposer, ctx.model) {
                (Mode::Llm, Some(m)) => {
                    let p = propose_llm(&state.history, b, m);
                    fallbacks.extend(p.fallback.map(|f| format!("proposer: {f}")));
                    p.actions
                }
                (Mode::Llm, None) => {
                    fallbacks.push("proposer: no model configured".into());
                    propose_deterministic(b)
                }
                (Mode::Template, _) => propose_deterministic(b),
            };
            let seed = turn_seed(state.seed, turn);
            let (chosen, plan_result) = match cfg.selection {
                Selection::Mcts => {
                    let search_ctx = cfg.planner.history_in_search.then_some(SearchContext {
                        history: &state.history,
                        provider: ctx.provider,
                    });
                    let r = plan(b, &proposed, turn, &cfg.hyper, cfg.planner, search_ctx, seed);
                    (r.action.clone(), Some(r))
                }
                Selection::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (proposed.actions.choose(&mut rng).cloned().expect("non-empty"), None)
                }
                Selection::GreedyEig => {
                    let mut best = (proposed.actions[0].clone(), f64::NEG_INFINITY);
                    for a in &proposed.actions {
                        let g = expected_information_gain(a, b);
                        if g > best.1 {
                            best = (a.clone(), g);
                        }
                    }
                    (best.0, None)
                }
            };
            let action = if chosen.is_commit() && cfg.selection == Selection::Mcts {
                let (a, fb) = refined_commit(&state.history, b, cfg.refined_commit, ctx.model);
                fallbacks.extend(fb);
                a
            } else {
                chosen
            };
            TurnDecision {
                decision,
                proposed: Some(proposed),
                plan: plan_result,
                action,
                fallbacks,
            }
        }
    }
}

/// Plays one turn against `user`.
pub fn run_turn(
    mut state: EpisodeState,
    user: &dyn User,
    ctx: &EpisodeContext<'_>,
) -> Result<TurnResult, EpisodeError> {
    let cfg = ctx.cfg;
    if state.finished || state.turn >= cfg.hyper.trigger.max_turns {
        return Err(EpisodeError::Finished);
    }
    let TurnDecision {
        decision,
        action,
        mut fallbacks,
        ..
    } = decide(&state, ctx);

    let (utt, fb) = realize_utterance(&action, &state.history, &state.belief, cfg.utterance, ctx.model);
    fallbacks.extend(fb.map(|f| format!("utterance: {f}")));
    let obs = user.respond(&action, &utt.text).map_err(|_| EpisodeError::UserLeft)?;
    let reply = obs.reply_text();

    let candidates_before = state.belief.len();
    let entropy_before = entropy(&state.belief);
    let target_rank_before = state.target_rank();

    state.history.push(Speaker::Agent, utt.text.clone());
    state.history.push(Speaker::User, reply.clone());
    state.turn += 1;

    let accepted = obs.outcome == Outcome::Accept;
    let (new_set, rollback) = if accepted {
        (state.belief.set().clone(), false)
    } else {
        match prune(state.belief.set(), &obs) {
            Ok(s) => (s, false),
            Err(DomainError::EmptyPrune) => (state.belief.set().clone(), true),
            Err(e) => return Err(e.into()),
        }
    };
    if !accepted {
        state.belief = update_belief(&state.belief, &new_set, &state.history, ctx.provider, &cfg.hyper.update)?;
    }

    state.trace.push(TurnSnapshot {
        schema_version: TRACE_SCHEMA_VERSION,
        episode: state.episode,
        turn: state.turn,
        decision,
        action: action.clone(),
        utterance: utt.text,
        outcome: obs.outcome,
        reply,
        candidates_before,
        entropy_before,
        target_rank_before,
        candidates_after: state.belief.len(),
        entropy_after: entropy(&state.belief),
        target_rank_after: state.target_rank(),
        rollback,
        fallbacks,
    });

    let committed = match &action {
        Action::Commit { candidate_id } => Some(candidate_id.clone()),
        _ => None,
    };
    if accepted {
        return Ok(TurnResult::Finished(state.finish(true, committed)));
    }
    if state.turn >= cfg.hyper.trigger.max_turns {
        return Ok(TurnResult::Finished(state.finish(false, committed)));
    }
    Ok(TurnResult::Continue(state))
}

/// Runs turns until the episode ends.
pub fn run_episode(
    mut state: EpisodeState,
    user: &dyn User,
    ctx: &EpisodeContext<'_>,
) -> Result<EpisodeResult, EpisodeError> {
    let mut last_commit: Option<String> = None;
    loop {
        match run_turn(state, user, ctx)? {
            TurnResult::Finished(mut r) => {
                if r.committed.is_none() {
                    r.committed = last_commit;
                }
                return Ok(r);
            }
            TurnResult::Continue(s) => {
                if let Some(Action::Commit { candidate_id }) = s.trace.last().map(|t| &t.action) {
                    last_commit = Some(candidate_id.clone());
                }
                state = s;
            }
        }
    }
}
