use super::candidates_from;
use cup::belief::{entropy, init_belief, posterior_given_observation, update_belief, BeliefState};
use cup::bench::{build_candidate_pool, Dataset, DatasetRecord};
use cup::domain::{prune, Action, Candidate, ConversationHistory, HyperParams, Observation, Outcome, Speaker, Turn};
use cup::infogain::expected_information_gain;
use cup::planner::{plan, PlannerOptions, SearchContext};
use cup::proposer::propose_deterministic;
use cup::similarity::HashingEmbedder;
use cup::simulator::lookup_outcome;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

const WORDS: [&str; 12] = [
    "red", "blue", "cotton", "wool", "shirt", "dress", "warm", "light", "small", "large", "summer", "formal",
];

pub const CASES: u32 = 1000;

/// Rows of value codes (`None` = blank) and a text per candidate.
pub fn arb_rows(blanks: bool) -> impl Strategy<Value = (Vec<Vec<Option<u8>>>, Vec<String>)> {
    (2usize..=8, 1usize..=3).prop_flat_map(move |(n, attrs)| {
        let value = if blanks {
            prop::option::weighted(0.8, 0u8..4).boxed()
        } else {
            (0u8..4).prop_map(Some).boxed()
        };
        let row = prop::collection::vec(value, attrs);
        let text = prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..5).prop_map(|w| w.join(" "));
        (prop::collection::vec(row, n), prop::collection::vec(text, n))
    })
}

pub fn arb_belief(blanks: bool) -> impl Strategy<Value = BeliefState> {
    arb_rows(blanks).prop_flat_map(|(rows, texts)| {
        let n = rows.len();
        prop::collection::vec(0.01f64..1.0, n)
            .prop_map(move |w| BeliefState::from_weights(candidates_from(&rows, &texts), w).unwrap())
    })
}

pub fn arb_query() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..4).prop_map(|w| w.join(" "))
}

pub fn assert_normalized(b: &BeliefState) {
    let sum: f64 = b.probs().iter().sum();
    assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
    assert!(b.probs().iter().all(|p| *p >= 0.0 && p.is_finite()));
    assert_eq!(b.probs().len(), b.set().len());
}

/// Every outcome an action can produce for some member of the set.
pub fn reachable(b: &BeliefState, a: &Action) -> Vec<Outcome> {
    let mut out: Vec<Outcome> = b.set().iter().map(|c| lookup_outcome(c, a)).collect();
    out.sort();
    out.dedup();
    out
}

pub fn belief_stays_normalized((b, query, pick): (BeliefState, String, usize)) -> Result<(), TestCaseError> {
    let provider = HashingEmbedder::new();
    let mut history = ConversationHistory::from_query(query);
    let init = init_belief(b.set().clone(), &history, &provider).unwrap();
    assert_normalized(&init);
    assert_normalized(&b);
    let actions = propose_deterministic(&b).actions;
    let action = &actions[pick % actions.len()];
    for o in reachable(&b, action) {
        let obs = Observation {
            action: action.clone(),
            outcome: o,
            raw_text: None,
        };
        if let Some(r) = b.restrict(&obs) {
            assert_normalized(&r);
        }
        if let Some(p) = posterior_given_observation(&b, &obs) {
            assert_normalized(&p);
        }
        if let Ok(set) = prune(b.set(), &obs) {
            history.push(Speaker::Agent, action.to_string());
            history.push(Speaker::User, obs.reply_text());
            let u = update_belief(&b, &set, &history, &provider, &HyperParams::default().update).unwrap();
            assert_normalized(&u);
        }
    }
    Ok(())
}

pub fn normalization_input() -> impl Strategy<Value = (BeliefState, String, usize)> {
    (arb_belief(true), arb_query(), 0usize..64)
}

pub fn entropy_is_bounded(b: BeliefState) -> Result<(), TestCaseError> {
    let h = entropy(&b);
    prop_assert!(h >= 0.0);
    prop_assert!(h <= (b.support_size() as f64).ln() + 1e-12);
    Ok(())
}

pub fn partition_ask_eig_is_bounded(b: BeliefState) -> Result<(), TestCaseError> {
    let h = entropy(&b);
    for a in propose_deterministic(&b).asks() {
        let g = expected_information_gain(a, &b);
        prop_assert!(g >= -1e-12, "{a}: {g}");
        prop_assert!(g <= h + 1e-9, "{a}: {g} > {h}");
    }
    Ok(())
}

pub fn answer_sequence() -> impl Strategy<Value = (BeliefState, Vec<usize>, usize)> {
    (arb_belief(true), prop::collection::vec(0usize..64, 1..5), 0usize..8)
}

pub fn pruning_only_removes((b, picks, target): (BeliefState, Vec<usize>, usize)) -> Result<(), TestCaseError> {
    let mut set = b.set().clone();
    let t = set.get(target % set.len()).clone();
    for pick in picks {
        let bb = BeliefState::uniform(set.clone());
        let actions = propose_deterministic(&bb).actions;
        let action = &actions[pick % actions.len()];
        let obs = Observation::new(action.clone(), lookup_outcome(&t, action)).unwrap();
        let Ok(next) = prune(&set, &obs) else { break };
        prop_assert!(next.len() <= set.len());
        prop_assert!(next.iter().all(|c| set.contains(&c.id)));
        set = next;
    }
    Ok(())
}

pub fn exact_answers_keep_target((b, picks, target): (BeliefState, Vec<usize>, usize)) -> Result<(), TestCaseError> {
    let mut set = b.set().clone();
    let t = set.get(target % set.len()).clone();
    for pick in picks {
        let bb = BeliefState::uniform(set.clone());
        let actions = propose_deterministic(&bb).actions;
        let action = &actions[pick % actions.len()];
        let obs = Observation::new(action.clone(), lookup_outcome(&t, action)).unwrap();
        if obs.outcome == Outcome::Accept {
            break;
        }
        set = prune(&set, &obs).expect("the target is consistent with its own answers");
        prop_assert!(set.contains(&t.id));
    }
    Ok(())
}

pub fn search_input() -> impl Strategy<Value = (BeliefState, usize, u64, usize, String)> {
    (arb_belief(true), 1usize..60, any::<u64>(), 1usize..5, arb_query())
}

pub fn search_spends_its_budget(
    (b, budget, seed, turn, query): (BeliefState, usize, u64, usize, String),
) -> Result<(), TestCaseError> {
    let mut hp = HyperParams::default();
    hp.planner.budget = budget;
    let actions = propose_deterministic(&b);
    let provider = HashingEmbedder::new();
    let history = ConversationHistory::from_query(query);
    let ctx = SearchContext {
        history: &history,
        provider: &provider,
    };
    let r = plan(&b, &actions, turn, &hp, PlannerOptions::default(), Some(ctx), seed);
    prop_assert!(actions.actions.contains(&r.action));
    if r.edges.len() > 1 {
        prop_assert_eq!(r.edges.iter().map(|e| e.visits as usize).sum::<usize>(), budget);
        prop_assert_eq!(r.root_visits as usize, budget + 1);
    }
    Ok(())
}

/// Candidate rows, target index, pool size and query.
pub type PoolInput = ((Vec<Vec<Option<u8>>>, Vec<String>), usize, usize, String);

pub fn pool_input() -> impl Strategy<Value = PoolInput> {
    (arb_rows(true), 0usize..8, 1usize..10, arb_query())
}

pub fn pool_keeps_target(((rows, texts), target, size, query): PoolInput) -> Result<(), TestCaseError> {
    let set = candidates_from(&rows, &texts);
    let cands: Vec<Candidate> = set.iter().cloned().collect();
    let t = cands[target % cands.len()].id.clone();
    let record = DatasetRecord {
        id: "q".into(),
        target_id: t.clone(),
        history: vec![Turn {
            speaker: Speaker::User,
            text: query,
        }],
        domain: None,
    };
    let ds = Dataset::new(cands, vec![record.clone()], None).unwrap();
    let pool = build_candidate_pool(&record, &ds, &HashingEmbedder::new(), size).unwrap();
    prop_assert!(pool.contains(&t));
    prop_assert_eq!(pool.len(), size.clamp(1, ds.candidates.len()));
    Ok(())
}
