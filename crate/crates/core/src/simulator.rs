//! User simulators. The exact simulator answers by attribute lookup on the
//! hidden target; the noisy one swaps an ask answer for a different option
//! with probability `p_flip`.
//! [`LlmUser`] puts a chat model in the user's seat.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Action, Candidate, Observation, Outcome};
use crate::llmclient::{parse_structured, prompts, ChatExchange, ChatModel};

pub const DEFAULT_P_FLIP: f64 = 0.1;

/// Outcome the target itself would produce; the lookup used by rollouts.
pub fn lookup_outcome(target: &Candidate, action: &Action) -> Outcome {
    match action {
        Action::Ask { attribute, options } => match target.value(attribute) {
            Some(v) => options
                .iter()
                .position(|o| o == v)
                .map(Outcome::Option)
                .unwrap_or(Outcome::NoneOfThese),
            None => Outcome::NoneOfThese,
        },
        Action::Commit { candidate_id } => {
            if *candidate_id == target.id {
                Outcome::Accept
            } else {
                Outcome::Reject
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum AnswerPolicy {
    Exact,
    Noisy { p_flip: f64 },
}

/// The user walked away from the conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserExit;

/// Someone who answers the agent's utterances.
pub trait User: Send + Sync {
    fn respond(&self, action: &Action, utterance: &str) -> Result<Observation, UserExit>;
}

#[derive(Debug, Clone)]
pub struct SimulatedUser {
    pub target: Arc<Candidate>,
    pub policy: AnswerPolicy,
    pub seed: u64,
}

impl SimulatedUser {
    pub fn exact(target: Arc<Candidate>) -> Self {
        Self {
            target,
            policy: AnswerPolicy::Exact,
            seed: 0,
        }
    }

    pub fn noisy(target: Arc<Candidate>, p_flip: f64, seed: u64) -> Self {
        Self {
            target,
            policy: AnswerPolicy::Noisy { p_flip },
            seed,
        }
    }

    fn rng_for(&self, action: &Action) -> ChaCha8Rng {
        // FNV over the action's display form keeps the stream stable across
        // builds, unlike std's SipHash keys.
        let mut h = Fnv(0xcbf2_9ce4_8422_2325);
        action.to_string().hash(&mut h);
        ChaCha8Rng::seed_from_u64(self.seed ^ h.0)
    }
}

struct Fnv(u64);

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

impl User for SimulatedUser {
    fn respond(&self, action: &Action, _utterance: &str) -> Result<Observation, UserExit> {
        let truth = lookup_outcome(&self.target, action);
        let outcome = match (self.policy, action) {
            (AnswerPolicy::Noisy { p_flip }, Action::Ask { .. }) if p_flip > 0.0 => {
                let mut rng = self.rng_for(action);
                if rng.gen_bool(p_flip.min(1.0)) {
                    let others: Vec<Outcome> = action
                        .outcomes()
                        .into_iter()
                        .filter(|o| matches!(o, Outcome::Option(_)) && *o != truth)
                        .collect();
                    if others.is_empty() {
                        truth
                    } else {
                        others[rng.gen_range(0..others.len())]
                    }
                } else {
                    truth
                }
            }
            _ => truth,
        };
        Ok(Observation {
            action: action.clone(),
            outcome,
            raw_text: None,
        })
    }
}

/// A chat model role-playing the user. Unparseable answers fall back to the
/// exact lookup so the episode can proceed.
pub struct LlmUser<M: ChatModel> {
    pub target: Arc<Candidate>,
    pub model: M,
}

impl<M: ChatModel> LlmUser<M> {
    fn parse_answer(action: &Action, answer: &str) -> Option<Outcome> {
        let a = answer.trim().to_lowercase();
        match action {
            Action::Ask { options, .. } => {
                if let Some(k) = options.iter().position(|o| o.to_lowercase() == a) {
                    Some(Outcome::Option(k))
                } else if a.starts_with("none") {
                    Some(Outcome::NoneOfThese)
                } else {
                    None
                }
            }
            Action::Commit { .. } => match a.as_str() {
                "accept" | "yes" => Some(Outcome::Accept),
                "reject" | "no" => Some(Outcome::Reject),
                _ => None,
            },
        }
    }
}

impl<M: ChatModel> User for LlmUser<M> {
    fn respond(&self, action: &Action, utterance: &str) -> Result<Observation, UserExit> {
        let template = prompts::simulate_user();
        let options = match action {
            Action::Ask { options, .. } => options.join(", "),
            Action::Commit { .. } => "accept, reject".to_string(),
        };
        let target = format!("{} ({})", self.target.text, self.target.id);
        let answered = template
            .render(&[("target", &target), ("utterance", utterance), ("options", &options)])
            .ok()
            .and_then(|p| {
                self.model
                    .complete(&ChatExchange::user(self.model.model_name(), p))
                    .ok()
            })
            .and_then(|reply| parse_structured(&reply, &template).ok())
            .and_then(|f| f.get("answer").and_then(|v| v.as_str()).map(str::to_string))
            .and_then(|ans| Self::parse_answer(action, &ans).map(|o| (o, ans)));
        Ok(match answered {
            Some((outcome, text)) => Observation {
                action: action.clone(),
                outcome,
                raw_text: Some(text),
            },
            None => Observation {
                action: action.clone(),
                outcome: lookup_outcome(&self.target, action),
                raw_text: None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::ScriptedModel;

    fn red() -> Arc<Candidate> {
        Arc::new(Candidate::new("t", "red thing").with_attr("color", "red"))
    }

    #[test]
    fn exact_lookup() {
        let u = SimulatedUser::exact(red());
        let ask = Action::ask("color", &["red", "blue"]);
        assert_eq!(u.respond(&ask, "").unwrap().outcome, Outcome::Option(0));
        let other = Action::ask("color", &["green", "blue"]);
        assert_eq!(u.respond(&other, "").unwrap().outcome, Outcome::NoneOfThese);
        let size = Action::ask("size", &["s", "m"]);
        assert_eq!(u.respond(&size, "").unwrap().outcome, Outcome::NoneOfThese);
        assert_eq!(u.respond(&Action::commit("t"), "").unwrap().outcome, Outcome::Accept);
        assert_eq!(u.respond(&Action::commit("x"), "").unwrap().outcome, Outcome::Reject);
    }

    #[test]
    fn noisy_is_deterministic_and_flips_at_roughly_p() {
        let ask = Action::ask("color", &["red", "blue", "green"]);
        let mut flips = 0;
        for seed in 0..4000u64 {
            let u = SimulatedUser::noisy(red(), 0.1, seed);
            let a = u.respond(&ask, "").unwrap().outcome;
            assert_eq!(a, u.respond(&ask, "").unwrap().outcome);
            if a != Outcome::Option(0) {
                flips += 1;
            }
        }
        let rate = flips as f64 / 4000.0;
        assert!((rate - 0.1).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn noisy_never_flips_commits() {
        for seed in 0..200 {
            let u = SimulatedUser::noisy(red(), 0.9, seed);
            assert_eq!(u.respond(&Action::commit("t"), "").unwrap().outcome, Outcome::Accept);
        }
    }

    #[test]
    fn llm_user_parses_answers_and_falls_back() {
        let ask = Action::ask("color", &["red", "blue"]);
        let u = LlmUser {
            target: red(),
            model: ScriptedModel::always("```json\n{\"answer\": \"Blue\"}\n```"),
        };
        let obs = u.respond(&ask, "Which color?").unwrap();
        assert_eq!(obs.outcome, Outcome::Option(1));
        assert_eq!(obs.raw_text.as_deref(), Some("Blue"));

        let u = LlmUser {
            target: red(),
            model: ScriptedModel::always("no idea"),
        };
        assert_eq!(u.respond(&ask, "Which color?").unwrap().outcome, Outcome::Option(0));
    }
}
