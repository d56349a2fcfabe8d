//! Runs the tree search for a single turn and prints per-action statistics.
//!
//!     cargo run --release --example plan_one_turn -- [budget] [seed]

use cup::belief::init_belief;
use cup::bench::{generate_synthetic, SyntheticSpec};
use cup::domain::{CandidateSet, HyperParams};
use cup::planner::{plan, PlannerOptions, SearchContext};
use cup::proposer::propose_deterministic;
use cup::similarity::HashingEmbedder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let budget: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let ds = generate_synthetic(&SyntheticSpec::binary_cube(), 3)?;
    let record = &ds.records[0];
    let set = CandidateSet::new(
        (*ds.schema).clone(),
        ds.candidates.iter().map(|c| (**c).clone()).collect(),
    )?;
    let provider = HashingEmbedder::new();
    let history = record.history();
    let b = init_belief(set, &history, &provider)?;

    let mut hp = HyperParams::default();
    hp.planner.budget = budget;
    let ctx = SearchContext {
        history: &history,
        provider: &provider,
    };
    let actions = propose_deterministic(&b);
    let result = plan(&b, &actions, 1, &hp, PlannerOptions::default(), Some(ctx), seed);

    println!("query: {:?}, target {}", history.turns[0].text, record.target_id);
    println!(
        "{:<44} {:>7} {:>7} {:>8} {:>6}",
        "action", "eig", "prior", "value", "visits"
    );
    for e in &result.edges {
        println!(
            "{:<44} {:>7.4} {:>7.4} {:>8.4} {:>6}",
            e.action.to_string(),
            e.eig,
            e.prior,
            e.value,
            e.visits
        );
    }
    println!(
        "chosen {} after {} simulations ({} nodes)",
        result.action, result.simulations, result.nodes
    );
    Ok(())
}
