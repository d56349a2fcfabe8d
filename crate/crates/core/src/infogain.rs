//! Expected information gain of an action and the softmax prior built on it.

use serde::Serialize;
use thiserror::Error;

use crate::belief::{entropy, entropy_of, posterior_given_observation, softmax, BeliefState};
use crate::domain::{Action, Observation, Outcome};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InfoGainError {
    #[error("action list is empty")]
    NoActions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredAction {
    pub action: Action,
    pub eig: f64,
    pub prior: f64,
}

/// `p(o | a)` for every outcome with positive mass.
///
/// For asks, each outcome gets the belief mass of candidates consistent with
/// it; candidates with a missing value count toward every outcome, so the
/// masses are renormalized. For commits, accept has the committed
/// candidate's probability.
pub fn observation_distribution(action: &Action, b: &BeliefState) -> Vec<(Outcome, f64)> {
    match action {
        Action::Commit { candidate_id } => {
            let p = b.prob_of(candidate_id).unwrap_or(0.0);
            [(Outcome::Accept, p), (Outcome::Reject, 1.0 - p)]
                .into_iter()
                .filter(|(_, m)| *m > 0.0)
                .collect()
        }
        Action::Ask { .. } => {
            let masses: Vec<(Outcome, f64)> = action
                .outcomes()
                .into_iter()
                .map(|o| {
                    let m = b
                        .set()
                        .iter()
                        .zip(b.probs())
                        .filter(|(c, _)| action.admits(c, o))
                        .map(|(_, p)| p)
                        .sum();
                    (o, m)
                })
                .collect();
            let total: f64 = masses.iter().map(|(_, m)| m).sum();
            masses
                .into_iter()
                .filter(|(_, m)| *m > 0.0)
                .map(|(o, m)| (o, m / total))
                .collect()
        }
    }
}

/// `H(b) − Σ_o p(o|a) H(b | o)`, floored at zero.
///
/// The floor only binds for asks where missing values let a low-mass outcome
/// leave a flatter posterior than the prior.
pub fn expected_information_gain(action: &Action, b: &BeliefState) -> f64 {
    let prior_h = entropy(b);
    let expected_post: f64 = observation_distribution(action, b)
        .into_iter()
        .map(|(o, p)| {
            let obs = Observation {
                action: action.clone(),
                outcome: o,
                raw_text: None,
            };
            match posterior_given_observation(b, &obs) {
                Some(post) => p * entropy(&post),
                None => 0.0,
            }
        })
        .sum();
    (prior_h - expected_post).max(0.0)
}

/// Softmax of EIG values over the action list.
pub fn eig_prior(actions: &[Action], b: &BeliefState) -> Result<Vec<ScoredAction>, InfoGainError> {
    if actions.is_empty() {
        return Err(InfoGainError::NoActions);
    }
    let eigs: Vec<f64> = actions.iter().map(|a| expected_information_gain(a, b)).collect();
    let priors = softmax(&eigs);
    Ok(actions
        .iter()
        .cloned()
        .zip(eigs)
        .zip(priors)
        .map(|((action, eig), prior)| ScoredAction { action, eig, prior })
        .collect())
}

/// Entropy of the outcome distribution itself; equals the EIG for asks whose
/// options partition the support.
pub fn outcome_entropy(action: &Action, b: &BeliefState) -> f64 {
    let ps: Vec<f64> = observation_distribution(action, b)
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    entropy_of(&ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Candidate, CandidateSet};
    use approx::assert_abs_diff_eq;

    fn split4() -> BeliefState {
        let set = CandidateSet::with_inferred_schema(
            ["a", "a", "b", "b"]
                .iter()
                .enumerate()
                .map(|(i, v)| Candidate::new(format!("c{}", i + 1), "x").with_attr("k", *v))
                .collect(),
        )
        .unwrap();
        BeliefState::uniform(set)
    }

    #[test]
    fn symmetric_split_distribution() {
        let d = observation_distribution(&Action::ask("k", &["a", "b"]), &split4());
        assert_eq!(d, vec![(Outcome::Option(0), 0.5), (Outcome::Option(1), 0.5)]);
    }

    #[test]
    fn weighted_split_distribution() {
        let set = CandidateSet::with_inferred_schema(vec![
            Candidate::new("c1", "x").with_attr("k", "A"),
            Candidate::new("c2", "x").with_attr("k", "B"),
            Candidate::new("c3", "x").with_attr("k", "B"),
        ])
        .unwrap();
        let b = BeliefState::new(set, vec![0.4, 0.3, 0.3]).unwrap();
        let d = observation_distribution(&Action::ask("k", &["A", "B"]), &b);
        assert_eq!(d.len(), 2);
        assert_abs_diff_eq!(d[0].1, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1].1, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn commit_distribution_reads_belief() {
        let set =
            CandidateSet::with_inferred_schema(vec![Candidate::new("c1", "x"), Candidate::new("c2", "x")]).unwrap();
        let b = BeliefState::new(set, vec![0.7, 0.3]).unwrap();
        let d = observation_distribution(&Action::commit("c1"), &b);
        assert_eq!(d[0], (Outcome::Accept, 0.7));
        assert_abs_diff_eq!(d[1].1, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn eig_fixtures() {
        let b = split4();
        assert_abs_diff_eq!(
            expected_information_gain(&Action::ask("k", &["a", "b"]), &b),
            2f64.ln(),
            epsilon = 1e-12
        );
        // oracle: ln4 − (1/4)·0 − (3/4)·ln3
        let oracle = 4f64.ln() - 0.75 * 3f64.ln();
        let got = expected_information_gain(&Action::commit("c1"), &b);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.56234, epsilon = 1e-5);
    }

    #[test]
    fn non_discriminating_ask_has_zero_gain() {
        let set = CandidateSet::with_inferred_schema(vec![
            Candidate::new("c1", "x").with_attr("k", "a"),
            Candidate::new("c2", "x"),
            Candidate::new("c3", "x"),
        ])
        .unwrap();
        let b = BeliefState::new(set.clone(), vec![0.0, 0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            expected_information_gain(&Action::ask("k", &["a", "b"]), &b),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn missing_values_never_yield_negative_gain() {
        let set = CandidateSet::with_inferred_schema(vec![
            Candidate::new("c1", "x").with_attr("k", "red"),
            Candidate::new("c2", "x"),
            Candidate::new("c3", "x"),
        ])
        .unwrap();
        let b = BeliefState::new(set, vec![0.9, 0.05, 0.05]).unwrap();
        let g = expected_information_gain(&Action::ask("k", &["red", "blue"]), &b);
        assert!(g >= 0.0 && g <= entropy(&b) + 1e-9);
    }

    #[test]
    fn prior_fixtures() {
        let b = split4();
        let ask = Action::ask("k", &["a", "b"]);
        let flat = Action::ask("k", &["a", "b"]);
        let out = eig_prior(&[ask.clone(), flat], &b).unwrap();
        assert_abs_diff_eq!(out[0].prior, 0.5, epsilon = 1e-12);

        // EIGs [ln2, 0] → [2/3, 1/3]
        let set = CandidateSet::with_inferred_schema(vec![
            Candidate::new("c1", "x").with_attr("k", "a"),
            Candidate::new("c2", "x").with_attr("k", "b"),
        ])
        .unwrap();
        let b = BeliefState::uniform(set);
        let zero = Action::commit("zz");
        let out = eig_prior(&[ask, zero], &b).unwrap();
        assert_abs_diff_eq!(out[0].eig, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].eig, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0].prior, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].prior, 1.0 / 3.0, epsilon = 1e-12);

        let single = eig_prior(&[Action::commit("c1")], &b).unwrap();
        assert_eq!(single[0].prior, 1.0);
        assert_eq!(eig_prior(&[], &b), Err(InfoGainError::NoActions));
    }
}
