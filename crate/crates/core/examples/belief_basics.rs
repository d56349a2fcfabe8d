//! Belief initialization, entropy, expected information gain and the
//! exploration prior on a small wardrobe.
//!
//!     cargo run --example belief_basics

use cup::belief::{entropy, init_belief, should_commit, update_belief};
use cup::domain::{
    prune, Action, Candidate, CandidateSet, ConversationHistory, HyperParams, Observation, Outcome, Speaker,
};
use cup::infogain::eig_prior;
use cup::proposer::propose_deterministic;
use cup::similarity::HashingEmbedder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let set = CandidateSet::with_inferred_schema(vec![
        Candidate::new("c1", "red cotton shirt")
            .with_attr("color", "red")
            .with_attr("material", "cotton"),
        Candidate::new("c2", "red wool sweater")
            .with_attr("color", "red")
            .with_attr("material", "wool"),
        Candidate::new("c3", "blue cotton shirt")
            .with_attr("color", "blue")
            .with_attr("material", "cotton"),
        Candidate::new("c4", "green linen dress")
            .with_attr("color", "green")
            .with_attr("material", "linen"),
    ])?;
    let provider = HashingEmbedder::new();
    let hp = HyperParams::default();
    let mut history = ConversationHistory::from_query("I want a warm red sweater");

    let b = init_belief(set, &history, &provider)?;
    println!("initial belief (entropy {:.4} nats)", entropy(&b));
    for (c, p) in b.set().iter().zip(b.probs()) {
        println!("  {:<4} {:<20} {:.4}", c.id, c.text, p);
    }

    let actions = propose_deterministic(&b);
    println!("\nactions with EIG and prior:");
    for s in eig_prior(&actions.actions, &b)? {
        println!("  {:<40} eig {:.4}  prior {:.4}", s.action.to_string(), s.eig, s.prior);
    }
    println!("trigger: {:?}", should_commit(&b, 1, &hp.trigger));

    // The user answers "red" to the color question.
    let ask = Action::ask("color", &["red", "blue", "green"]);
    let obs = Observation::new(ask.clone(), Outcome::Option(0))?;
    history.push(
        Speaker::Agent,
        "Which color? Options: red, blue, green, or none of these.",
    );
    history.push(Speaker::User, obs.reply_text());
    let pruned = prune(b.set(), &obs)?;
    let b = update_belief(&b, &pruned, &history, &provider, &hp.update)?;
    println!("\nafter \"red\" (entropy {:.4} nats)", entropy(&b));
    for (c, p) in b.set().iter().zip(b.probs()) {
        println!("  {:<4} {:<20} {:.4}", c.id, c.text, p);
    }
    println!("trigger: {:?}", should_commit(&b, 2, &hp.trigger));
    Ok(())
}
