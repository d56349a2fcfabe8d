//! Drives one episode with every LLM-backed component enabled, using a
//! scripted model in place of a real endpoint. The first reply proposes
//! questions, later replies realize utterances or pick a candidate; anything
//! unusable falls back to the template path and is recorded in the trace.
//!
//!     cargo run --example llm_modes

use std::sync::Arc;

use cup::domain::{Candidate, CandidateSet, ConversationHistory};
use cup::episode::{run_episode, EngineConfig, EpisodeContext, EpisodeState, Mode};
use cup::llmclient::ScriptedModel;
use cup::similarity::HashingEmbedder;
use cup::simulator::SimulatedUser;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shirts = [
        ("s1", "red cotton shirt", "red", "cotton"),
        ("s2", "red linen shirt", "red", "linen"),
        ("s3", "blue cotton shirt", "blue", "cotton"),
        ("s4", "blue linen shirt", "blue", "linen"),
    ];
    let set = CandidateSet::with_inferred_schema(
        shirts
            .iter()
            .map(|(id, text, color, material)| {
                Candidate::new(*id, *text)
                    .with_attr("color", *color)
                    .with_attr("material", *material)
            })
            .collect(),
    )?;
    let target = Arc::new(set.iter().find(|c| c.id == "s4").unwrap().clone());

    let model = ScriptedModel::new(vec![
        Ok("```json\n{\"actions\": [{\"attribute\": \"color\", \"options\": [\"red\", \"blue\"]}]}\n```".into()),
        Ok("```json\n{\"utterance\": \"Do you have a color in mind, red or blue?\"}\n```".into()),
        Ok("Sure! ```json\n{\"candidate_id\": \"s4\"}\n```".into()),
        Ok("not a structured reply".into()),
    ]);
    let cfg = EngineConfig {
        proposer: Mode::Llm,
        utterance: Mode::Llm,
        refined_commit: Mode::Llm,
        ..EngineConfig::default()
    };

    let provider = HashingEmbedder::new();
    let ctx = EpisodeContext {
        provider: &provider,
        model: Some(&model),
        cfg: &cfg,
    };
    let history = ConversationHistory::from_query("a shirt for summer");
    let state = EpisodeState::start(0, set, history, &provider, 5, Some("s4".into()))?;
    let result = run_episode(state, &SimulatedUser::exact(target), &ctx)?;

    for t in &result.trace {
        println!("turn {}: {}", t.turn, t.utterance);
        println!("  user: {}", t.reply);
        for f in &t.fallbacks {
            println!("  fallback: {f}");
        }
    }
    println!(
        "success {} in {} turns, {} model calls",
        result.success,
        result.turns,
        model.call_count()
    );
    Ok(())
}
