//! Builds the per-turn action set: a deterministic attribute-driven proposer
//! for offline runs and a model-backed proposer that is validated and falls
//! back to the deterministic one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::belief::BeliefState;
use crate::domain::{Action, ConversationHistory, Speaker};
use crate::llmclient::{parse_structured, prompts, ChatExchange, ChatModel};

pub const MAX_OPTIONS: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProposerError {
    #[error("every proposed action was invalid")]
    AllFiltered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Deterministic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSet {
    pub actions: Vec<Action>,
    pub provenance: Provenance,
}

impl ActionSet {
    pub fn asks(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| !a.is_commit())
    }

    pub fn commits(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| a.is_commit())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Present values of `attribute` among the set, most frequent first, ties
/// broken lexicographically.
pub fn value_frequencies(b: &BeliefState, attribute: &str) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in b.set().iter() {
        if let Some(v) = c.value(attribute) {
            *counts.entry(v).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(v, n)| (v.to_string(), n)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// One ask per schema attribute with at least two distinct present values
/// (options capped at the four most frequent), then `Commit(argmax b)`.
pub fn propose_deterministic(b: &BeliefState) -> ActionSet {
    let mut actions: Vec<Action> = b
        .set()
        .schema()
        .names()
        .filter_map(|name| {
            let freq = value_frequencies(b, name);
            (freq.len() >= 2).then(|| Action::Ask {
                attribute: name.to_string(),
                options: freq.into_iter().take(MAX_OPTIONS).map(|(v, _)| v).collect(),
            })
        })
        .collect();
    actions.push(Action::commit(b.argmax().id.clone()));
    ActionSet {
        actions,
        provenance: Provenance::Deterministic,
    }
}

/// Drops invalid options and actions, deduplicates, redirects commits on
/// absent candidates to the argmax, and guarantees one commit. Idempotent.
pub fn validate_action_set(proposed: &ActionSet, b: &BeliefState) -> Result<ActionSet, ProposerError> {
    let set = b.set();
    let mut seen_asks: BTreeSet<(String, BTreeSet<String>)> = BTreeSet::new();
    let mut seen_commits: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for action in &proposed.actions {
        match action {
            Action::Ask { attribute, options } => {
                if !set.schema().contains(attribute) {
                    continue;
                }
                let mut kept: Vec<String> = Vec::new();
                for o in options {
                    let o = o.trim();
                    if o.is_empty() || kept.iter().any(|k| k == o) {
                        continue;
                    }
                    if set.iter().any(|c| c.value(attribute) == Some(o)) {
                        kept.push(o.to_string());
                    }
                }
                kept.truncate(MAX_OPTIONS);
                if kept.len() < 2 {
                    continue;
                }
                let key = (attribute.clone(), kept.iter().cloned().collect());
                if seen_asks.insert(key) {
                    out.push(Action::Ask {
                        attribute: attribute.clone(),
                        options: kept,
                    });
                }
            }
            Action::Commit { candidate_id } => {
                let id = if set.contains(candidate_id) {
                    candidate_id.clone()
                } else {
                    b.argmax().id.clone()
                };
                if seen_commits.insert(id.clone()) {
                    out.push(Action::Commit { candidate_id: id });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(ProposerError::AllFiltered);
    }
    if seen_commits.is_empty() {
        out.push(Action::commit(b.argmax().id.clone()));
    }
    Ok(ActionSet {
        actions: out,
        provenance: proposed.provenance,
    })
}

/// Result of a model-backed proposal; `fallback` names why the deterministic
/// proposer was used instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub actions: ActionSet,
    pub fallback: Option<String>,
}

pub fn render_history(history: &ConversationHistory) -> String {
    history
        .turns
        .iter()
        .map(|t| {
            let who = match t.speaker {
                Speaker::Agent => "Assistant",
                Speaker::User => "User",
            };
            format!("{who}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_candidates(b: &BeliefState) -> String {
    b.set()
        .iter()
        .map(|c| {
            let attrs = c
                .attributes
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{}: {} [{}]", c.id, c.text, attrs)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_belief_topk(b: &BeliefState, k: usize) -> String {
    b.ranking()
        .into_iter()
        .take(k)
        .map(|i| format!("{} ({:.3})", b.set().get(i).id, b.probs()[i]))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_actions(fields: &serde_json::Map<String, Value>) -> Vec<Action> {
    let Some(list) = fields.get("actions").and_then(Value::as_array) else {
        return Vec::new();
    };
    list.iter()
        .filter_map(|a| {
            let attribute = a.get("attribute")?.as_str()?.trim().to_string();
            let options = a
                .get("options")?
                .as_array()?
                .iter()
                .filter_map(|o| o.as_str().map(str::to_string))
                .collect();
            Some(Action::Ask { attribute, options })
        })
        .collect()
}

/// Asks the model for candidate questions. Any transport, parse or
/// validation failure falls back to [`propose_deterministic`].
pub fn propose_llm(history: &ConversationHistory, b: &BeliefState, model: &dyn ChatModel) -> Proposal {
    let fallback = |why: String| Proposal {
        actions: propose_deterministic(b),
        fallback: Some(why),
    };
    let template = prompts::propose_actions();
    let prompt = match template.render(&[
        ("history", &render_history(history)),
        ("candidates", &render_candidates(b)),
        ("belief_topk", &render_belief_topk(b, 5)),
    ]) {
        Ok(p) => p,
        Err(e) => return fallback(e.to_string()),
    };
    let reply = match model.complete(&ChatExchange::user(model.model_name(), prompt)) {
        Ok(r) => r,
        Err(e) => return fallback(e.to_string()),
    };
    let fields = match parse_structured(&reply, &template) {
        Ok(f) => f,
        Err(e) => return fallback(e.to_string()),
    };
    let mut actions = parse_actions(&fields);
    actions.push(Action::commit(b.argmax().id.clone()));
    let proposed = ActionSet {
        actions,
        provenance: Provenance::Llm,
    };
    match validate_action_set(&proposed, b) {
        Ok(v) if v.asks().next().is_some() => Proposal {
            actions: v,
            fallback: None,
        },
        _ => fallback("no valid ask survived validation".into()),
    }
}
