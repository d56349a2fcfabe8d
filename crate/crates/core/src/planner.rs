//! Uncertainty-guided Monte Carlo Tree Search.
//!
//! Every simulation samples a hypothetical target from the root belief and
//! resolves all observations by looking up that target's attributes. A pass
//! descends by the prior-weighted score while the current node has no untried
//! actions, expands one untried action (sampled in proportion to its EIG
//! prior), rolls out from the new child, and backs the discounted return up
//! the path. An accepted commit ends a simulated trajectory; a rejected one
//! removes the candidate and the trajectory continues.
//!
//! Counting convention: a node starts with `N(b) = 1` when created and gains
//! one visit per pass, so the root ends a search with `N(b) = K + 1`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{should_commit, update_belief, BeliefState, CommitDecision};
use crate::domain::{
    Action, Candidate, ConversationHistory, HyperParams, Observation, Outcome, PlannerConfig, RewardConfig, Speaker,
};
use crate::episode::template_utterance;
use crate::infogain::{eig_prior, expected_information_gain};
use crate::proposer::{propose_deterministic, ActionSet};
use crate::similarity::SimilarityProvider;
use crate::simulator::lookup_outcome;

pub type NodeId = usize;

/// Outcome classes that matter to the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardOutcome {
    Accept,
    Reject,
    NotCommit,
}

impl RewardOutcome {
    pub fn of(action: &Action, outcome: Outcome) -> Self {
        match (action, outcome) {
            (Action::Commit { .. }, Outcome::Accept) => RewardOutcome::Accept,
            (Action::Commit { .. }, _) => RewardOutcome::Reject,
            _ => RewardOutcome::NotCommit,
        }
    }
}

/// `1[success] − λ + α·EIG − β·1[failure]` for a precomputed EIG.
pub fn reward_with_eig(eig: f64, outcome: RewardOutcome, cfg: &RewardConfig) -> f64 {
    let success = if outcome == RewardOutcome::Accept { 1.0 } else { 0.0 };
    let failure = if outcome == RewardOutcome::Reject { 1.0 } else { 0.0 };
    success - cfg.lambda + cfg.alpha * eig - cfg.beta * failure
}

pub fn reward(action: &Action, b: &BeliefState, outcome: RewardOutcome, cfg: &RewardConfig) -> f64 {
    reward_with_eig(expected_information_gain(action, b), outcome, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    #[default]
    GreedyEig,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerOptions {
    pub rollout: RolloutPolicy,
    /// Apply the commitment trigger at simulated nodes, as the episode loop
    /// does at real turns.
    pub trigger_in_search: bool,
    /// Record one line per simulation.
    pub trace: bool,
    /// Constant added to every backed-up return (instrumentation only).
    pub return_offset: f64,
    /// Reweight simulated beliefs by similarity to the simulated history,
    /// as the real loop does after each reply.
    pub history_in_search: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            rollout: RolloutPolicy::GreedyEig,
            trigger_in_search: true,
            trace: false,
            return_offset: 0.0,
            history_in_search: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchEdge {
    pub action: Action,
    pub prior: f64,
    pub eig: f64,
    pub visits: u32,
    pub total: f64,
    pub children: BTreeMap<Outcome, NodeId>,
}

impl SearchEdge {
    /// Mean return; zero when unvisited.
    pub fn value(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / f64::from(self.visits)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub belief: BeliefState,
    /// Simulated conversation so far; present when the search reweights
    /// beliefs by similarity.
    pub history: Option<ConversationHistory>,
    pub depth: usize,
    pub visits: u32,
    pub edges: Vec<SearchEdge>,
}

/// `V + c·P·√N(b) / (1 + N(b,a))`.
pub fn score(edge: &SearchEdge, parent: &SearchNode, cfg: &PlannerConfig) -> f64 {
    edge.value() + cfg.exploration * edge.prior * f64::from(parent.visits).sqrt() / (1.0 + f64::from(edge.visits))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub discounted_return: f64,
    pub terminal: bool,
    pub turns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub simulation: usize,
    pub target: String,
    pub path: Vec<String>,
    pub rollout: Vec<String>,
    pub discounted_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeStats {
    pub action: Action,
    pub eig: f64,
    pub prior: f64,
    pub visits: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub action: Action,
    pub root_visits: u32,
    pub simulations: usize,
    pub edges: Vec<EdgeStats>,
    pub nodes: usize,
    #[serde(skip)]
    pub trace: Vec<SimulationRecord>,
}

impl PlanResult {
    /// Line-delimited JSON, one record per simulation.
    pub fn write_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        for rec in &self.trace {
            serde_json::to_writer(&mut w, rec)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// What a search needs to replay the similarity reweighting of the real
/// loop inside the tree.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub history: &'a ConversationHistory,
    pub provider: &'a dyn SimilarityProvider,
}

pub struct SearchTree<'a> {
    pub nodes: Vec<SearchNode>,
    hp: &'a HyperParams,
    ctx: Option<SearchContext<'a>>,
    opts: PlannerOptions,
    /// 1-based real turn the root stands for.
    root_turn: usize,
    max_depth: usize,
}

impl<'a> SearchTree<'a> {
    /// Root with the supplied action set. `turn` is the 1-based index of the
    /// real turn being planned; the tree never looks past `max_turns`.
    pub fn new(
        root_belief: BeliefState,
        actions: &ActionSet,
        turn: usize,
        hp: &'a HyperParams,
        opts: PlannerOptions,
        ctx: Option<SearchContext<'a>>,
    ) -> Self {
        let max_depth = (hp.trigger.max_turns + 1).saturating_sub(turn.max(1)).max(1);
        let mut tree = Self {
            nodes: Vec::new(),
            hp,
            ctx,
            opts,
            root_turn: turn.max(1),
            max_depth,
        };
        let edges = Self::edges_for(&root_belief, &actions.actions);
        tree.nodes.push(SearchNode {
            belief: root_belief,
            history: ctx.map(|c| c.history.clone()),
            depth: 0,
            visits: 1,
            edges,
        });
        tree
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn edges_for(b: &BeliefState, actions: &[Action]) -> Vec<SearchEdge> {
        if actions.is_empty() {
            return Vec::new();
        }
        eig_prior(actions, b)
            .expect("non-empty")
            .into_iter()
            .map(|s| SearchEdge {
                action: s.action,
                prior: s.prior,
                eig: s.eig,
                visits: 0,
                total: 0.0,
                children: BTreeMap::new(),
            })
            .collect()
    }

    /// Actions available at a simulated node.
    fn actions_at(&self, b: &BeliefState, depth: usize) -> Vec<Action> {
        if depth >= self.max_depth {
            return Vec::new();
        }
        if self.opts.trigger_in_search
            && should_commit(b, self.root_turn + depth, &self.hp.trigger) != CommitDecision::Continue
        {
            return vec![Action::commit(b.argmax().id.clone())];
        }
        propose_deterministic(b).actions
    }

    fn new_child(&mut self, parent: NodeId, edge: usize, outcome: Outcome) -> NodeId {
        let obs = Observation {
            action: self.nodes[parent].edges[edge].action.clone(),
            outcome,
            raw_text: None,
        };
        let depth = self.nodes[parent].depth + 1;
        let (belief, history) = self.transition(&self.nodes[parent].belief, self.nodes[parent].history.as_ref(), &obs);
        let actions = self.actions_at(&belief, depth);
        let edges = Self::edges_for(&belief, &actions);
        let id = self.nodes.len();
        self.nodes.push(SearchNode {
            belief,
            history,
            depth,
            visits: 1,
            edges,
        });
        self.nodes[parent].edges[edge].children.insert(outcome, id);
        id
    }

    /// Belief (and history) after `obs`: conditioning, then the similarity
    /// reweighting when a context is set.
    fn transition(
        &self,
        b: &BeliefState,
        history: Option<&ConversationHistory>,
        obs: &Observation,
    ) -> (BeliefState, Option<ConversationHistory>) {
        // Reweighting can leave the sampled target with zero mass; it is still
        // consistent with its own answers, so fall back to a uniform belief.
        let restricted = b.restrict(obs).unwrap_or_else(|| {
            let set = b
                .set()
                .retain_indices(|i| obs.admits(b.set().get(i)))
                .expect("the sampled target is consistent with its own answers");
            BeliefState::uniform(set)
        });
        match (self.ctx, history) {
            (Some(ctx), Some(h)) => {
                let mut h = h.clone();
                h.push(Speaker::Agent, template_utterance(&obs.action, b).text);
                h.push(Speaker::User, obs.reply_text());
                let updated =
                    update_belief(b, restricted.set(), &h, ctx.provider, &self.hp.update).unwrap_or(restricted);
                (updated, Some(h))
            }
            _ => (restricted, None),
        }
    }

    fn select(&self, node: NodeId) -> usize {
        let n = &self.nodes[node];
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in n.edges.iter().enumerate() {
            let s = score(e, n, &self.hp.planner);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }

    fn sample_untried(&self, node: NodeId, rng: &mut ChaCha8Rng) -> Option<usize> {
        let n = &self.nodes[node];
        let untried: Vec<usize> = (0..n.edges.len()).filter(|&i| n.edges[i].visits == 0).collect();
        match untried.len() {
            0 => None,
            1 => Some(untried[0]),
            _ => {
                let weights: Vec<f64> = untried.iter().map(|&i| n.edges[i].prior).collect();
                let dist = WeightedIndex::new(&weights).expect("priors are positive");
                Some(untried[dist.sample(rng)])
            }
        }
    }

    /// Rollout from `belief` at `depth` with the configured default policy.
    pub fn rollout(
        &self,
        mut belief: BeliefState,
        mut history: Option<ConversationHistory>,
        mut depth: usize,
        target: &Candidate,
        rng: &mut ChaCha8Rng,
        log: Option<&mut Vec<String>>,
    ) -> RolloutOutcome {
        let gamma = self.hp.planner.gamma;
        let mut ret = 0.0;
        let mut discount = 1.0;
        let mut turns = 0;
        let mut log = log;
        while depth < self.max_depth {
            let actions = self.actions_at(&belief, depth);
            let (action, eig) = match self.opts.rollout {
                RolloutPolicy::GreedyEig => {
                    let mut best: Option<(Action, f64)> = None;
                    for a in actions {
                        let g = expected_information_gain(&a, &belief);
                        if best.as_ref().is_none_or(|(_, bg)| g > *bg) {
                            best = Some((a, g));
                        }
                    }
                    best.expect("action sets are never empty below the depth limit")
                }
                RolloutPolicy::Random => {
                    let a = actions.choose(rng).expect("non-empty").clone();
                    let g = expected_information_gain(&a, &belief);
                    (a, g)
                }
            };
            let outcome = lookup_outcome(target, &action);
            let kind = RewardOutcome::of(&action, outcome);
            ret += discount * reward_with_eig(eig, kind, &self.hp.reward);
            discount *= gamma;
            turns += 1;
            if let Some(l) = log.as_deref_mut() {
                l.push(action.to_string());
            }
            if outcome == Outcome::Accept {
                return RolloutOutcome {
                    discounted_return: ret,
                    terminal: true,
                    turns,
                };
            }
            let obs = Observation {
                action,
                outcome,
                raw_text: None,
            };
            (belief, history) = self.transition(&belief, history.as_ref(), &obs);
            depth += 1;
        }
        RolloutOutcome {
            discounted_return: ret,
            terminal: false,
            turns,
        }
    }

    /// One selection → expansion → rollout → backpropagation pass.
    pub fn simulate_once(
        &mut self,
        target: &Candidate,
        rng: &mut ChaCha8Rng,
        record: Option<&mut SimulationRecord>,
    ) -> RolloutOutcome {
        let mut path: Vec<(NodeId, usize, f64)> = Vec::new();
        let mut node = 0;
        let mut tail = RolloutOutcome {
            discounted_return: 0.0,
            terminal: false,
            turns: 0,
        };
        let mut record = record;
        loop {
            if self.nodes[node].edges.is_empty() {
                break;
            }
            let (edge, expanding) = match self.sample_untried(node, rng) {
                Some(e) => (e, true),
                None => (self.select(node), false),
            };
            let action = self.nodes[node].edges[edge].action.clone();
            let outcome = lookup_outcome(target, &action);
            let r = reward_with_eig(
                self.nodes[node].edges[edge].eig,
                RewardOutcome::of(&action, outcome),
                &self.hp.reward,
            );
            path.push((node, edge, r));
            if let Some(rec) = record.as_deref_mut() {
                rec.path.push(action.to_string());
            }
            if outcome == Outcome::Accept {
                tail.terminal = true;
                break;
            }
            let child = match self.nodes[node].edges[edge].children.get(&outcome) {
                Some(&c) => c,
                None => self.new_child(node, edge, outcome),
            };
            if expanding {
                let b = self.nodes[child].belief.clone();
                let h = self.nodes[child].history.clone();
                let depth = self.nodes[child].depth;
                let log = record.as_deref_mut().map(|r| &mut r.rollout);
                tail = self.rollout(b, h, depth, target, rng, log);
                break;
            }
            node = child;
        }

        let gamma = self.hp.planner.gamma;
        let mut g = tail.discounted_return;
        for &(n, e, r) in path.iter().rev() {
            g = r + gamma * g;
            let edge = &mut self.nodes[n].edges[e];
            edge.visits += 1;
            edge.total += g + self.opts.return_offset;
            self.nodes[n].visits += 1;
        }
        RolloutOutcome {
            discounted_return: g,
            terminal: tail.terminal,
            turns: path.len() + tail.turns,
        }
    }

    /// Root edge with the highest value; ties by visits, prior, then order.
    pub fn best_root_edge(&self) -> usize {
        let edges = &self.root().edges;
        let mut best = 0;
        for i in 1..edges.len() {
            let (a, b) = (&edges[i], &edges[best]);
            let better = a.value() > b.value()
                || (a.value() == b.value() && (a.visits > b.visits || (a.visits == b.visits && a.prior > b.prior)));
            if better {
                best = i;
            }
        }
        best
    }

    pub fn edge_stats(&self) -> Vec<EdgeStats> {
        self.root()
            .edges
            .iter()
            .map(|e| EdgeStats {
                action: e.action.clone(),
                eig: e.eig,
                prior: e.prior,
                visits: e.visits,
                value: e.value(),
            })
            .collect()
    }
}

/// Runs `K` simulations from `b` and returns the best root action with its
/// statistics. Deterministic in `(inputs, seed)`.
pub fn plan(
    b: &BeliefState,
    actions: &ActionSet,
    turn: usize,
    hp: &HyperParams,
    opts: PlannerOptions,
    ctx: Option<SearchContext<'_>>,
    seed: u64,
) -> PlanResult {
    let mut tree = SearchTree::new(b.clone(), actions, turn, hp, opts, ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = WeightedIndex::new(b.probs()).ok();
    let mut trace = Vec::new();
    if tree.root().edges.len() > 1 {
        for sim in 0..hp.planner.budget {
            let idx = match &targets {
                Some(d) => d.sample(&mut rng),
                None => b.argmax_index(),
            };
            let target = b.set().members()[idx].clone();
            if opts.trace {
                let mut rec = SimulationRecord {
                    simulation: sim,
                    target: target.id.clone(),
                    path: Vec::new(),
                    rollout: Vec::new(),
                    discounted_return: 0.0,
                };
                let out = tree.simulate_once(&target, &mut rng, Some(&mut rec));
                rec.discounted_return = out.discounted_return;
                trace.push(rec);
            } else {
                tree.simulate_once(&target, &mut rng, None);
            }
        }
    }
    let best = tree.best_root_edge();
    PlanResult {
        action: tree.root().edges[best].action.clone(),
        root_visits: tree.root().visits,
        simulations: if tree.root().edges.len() > 1 {
            hp.planner.budget
        } else {
            0
        },
        edges: tree.edge_stats(),
        nodes: tree.nodes.len(),
        trace,
    }
}
