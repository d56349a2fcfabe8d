#![allow(dead_code)]

pub mod props;

use cup::belief::BeliefState;
use cup::domain::Observation;
use cup::domain::{Action, Candidate, CandidateSet, HyperParams, Outcome};
use cup::infogain::expected_information_gain;
use cup::planner::{plan, PlannerOptions};
use cup::planner::{reward_with_eig, RewardOutcome};
use cup::proposer::propose_deterministic;
use cup::simulator::lookup_outcome;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// `2^bits` candidates, one binary attribute per bit.
pub fn cube(bits: u32) -> CandidateSet {
    let names = ["a", "b", "c", "d", "e"];
    let cands = (0..(1u32 << bits))
        .map(|i| {
            let mut c = Candidate::new(format!("c{i:02}"), format!("item {i}"));
            for (k, name) in names.iter().enumerate().take(bits as usize) {
                c = c.with_attr(*name, if i >> k & 1 == 0 { "x" } else { "y" });
            }
            c
        })
        .collect();
    CandidateSet::with_inferred_schema(cands).unwrap()
}

/// Candidates from value codes: `rows[i][k]` is the value index of attribute
/// `k`, or `None` for a blank.
pub fn candidates_from(rows: &[Vec<Option<u8>>], words: &[String]) -> CandidateSet {
    let cands = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let text = words.get(i).cloned().unwrap_or_else(|| format!("item {i}"));
            let mut c = Candidate::new(format!("c{i:02}"), text);
            for (k, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    c = c.with_attr(format!("attr{k}"), format!("v{v}"));
                }
            }
            c
        })
        .collect();
    CandidateSet::with_inferred_schema(cands).unwrap()
}

/// Optimal value of a node in the determinized search model: actions come
/// from the deterministic proposer, the target is drawn from `b`, answers are
/// attribute lookups and the horizon is `max_depth` actions. Exact only for
/// candidates without blank values.
pub fn expectimax_value(b: &BeliefState, depth: usize, max_depth: usize, hp: &HyperParams) -> f64 {
    if depth >= max_depth {
        return 0.0;
    }
    propose_deterministic(b)
        .actions
        .iter()
        .map(|a| expectimax_q(b, a, depth, max_depth, hp))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn expectimax_q(b: &BeliefState, a: &Action, depth: usize, max_depth: usize, hp: &HyperParams) -> f64 {
    let eig = expected_information_gain(a, b);
    let mut dist: BTreeMap<Outcome, f64> = BTreeMap::new();
    for (c, p) in b.set().iter().zip(b.probs()) {
        *dist.entry(lookup_outcome(c, a)).or_default() += p;
    }
    dist.into_iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(o, p)| {
            let r = reward_with_eig(eig, RewardOutcome::of(a, o), &hp.reward);
            let future = if o == Outcome::Accept {
                0.0
            } else {
                let obs = Observation {
                    action: a.clone(),
                    outcome: o,
                    raw_text: None,
                };
                let child = b.restrict(&obs).expect("outcome has mass");
                hp.planner.gamma * expectimax_value(&child, depth + 1, max_depth, hp)
            };
            p * (r + future)
        })
        .sum()
}

pub struct OracleInstance {
    pub belief: BeliefState,
    pub hp: HyperParams,
    pub turn: usize,
}

/// Up to 6 candidates, 1 or 2 attributes (so at most 3 root actions),
/// random belief, two-step horizon.
pub fn oracle_instance(seed: u64) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=6);
        let attrs = rng.gen_range(1..=2);
        let rows: Vec<Vec<Option<u8>>> = (0..n)
            .map(|_| (0..attrs).map(|_| Some(rng.gen_range(0..3u8))).collect())
            .collect();
        let set = candidates_from(&rows, &[]);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let belief = BeliefState::from_weights(set, weights).unwrap();
        let actions = propose_deterministic(&belief);
        if actions.len() < 2 || actions.len() > 3 {
            continue;
        }
        let mut hp = HyperParams::default();
        hp.planner.budget = 2000;
        // depth limit max_turns + 1 - turn = 2
        let turn = hp.trigger.max_turns - 1;
        return OracleInstance { belief, hp, turn };
    }
}

pub fn oracle_search_options() -> PlannerOptions {
    PlannerOptions {
        trigger_in_search: false,
        history_in_search: false,
        ..PlannerOptions::default()
    }
}

/// Gap between the optimal root value and the value of the action chosen
/// by the tree search.
pub fn oracle_regret(inst: &OracleInstance, seed: u64) -> f64 {
    let actions = propose_deterministic(&inst.belief);
    let r = plan(
        &inst.belief,
        &actions,
        inst.turn,
        &inst.hp,
        oracle_search_options(),
        None,
        seed,
    );
    let best = expectimax_value(&inst.belief, 0, 2, &inst.hp);
    best - expectimax_q(&inst.belief, &r.action, 0, 2, &inst.hp)
}
