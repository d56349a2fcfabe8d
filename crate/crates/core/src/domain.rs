//! Shared domain types: candidates, attribute schema, actions, observations,
//! conversation history and hyperparameters, plus observation consistency and
//! candidate pruning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("duplicate candidate id `{0}`")]
    DuplicateId(String),
    #[error("duplicate attribute `{0}` in schema")]
    DuplicateAttribute(String),
    #[error("candidate set is empty")]
    EmptySet,
    #[error("observation is inconsistent with every candidate")]
    EmptyPrune,
    #[error("outcome {outcome:?} is not valid for action {action}")]
    InvalidOutcome { action: String, outcome: Outcome },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParam(&'static str),
}

/// One hypothesis the user may have in mind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub text: String,
    /// Missing values are simply absent. `null` and empty strings in input
    /// files are read as absent.
    #[serde(default, deserialize_with = "present_values")]
    pub attributes: BTreeMap<String, String>,
}

fn present_values<'de, D>(de: D) -> Result<BTreeMap<String, String>, D::Error>
where
    D: Deserializer<'de>,
{
    let raw: BTreeMap<String, Option<String>> = BTreeMap::deserialize(de)?;
    Ok(raw
        .into_iter()
        .filter_map(|(k, v)| v.filter(|s| !s.trim().is_empty()).map(|s| (k, s)))
        .collect())
}

impl Candidate {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(name.into(), value.into());
        self
    }

    pub fn value(&self, attribute: &str) -> Option<&str> {
        self.attributes.get(attribute).map(String::as_str)
    }
}

/// Declared vocabulary of one attribute. `None` means open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    #[serde(default)]
    pub values: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<AttributeDef>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self, DomainError> {
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(DomainError::DuplicateAttribute(a.name.clone()));
            }
        }
        Ok(Self { attributes })
    }

    /// Open-vocabulary schema listing every attribute name in first-seen order.
    pub fn infer<'a>(candidates: impl IntoIterator<Item = &'a Candidate>) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        for c in candidates {
            for name in c.attributes.keys() {
                if seen.insert(name.clone()) {
                    names.push(name.clone());
                }
            }
        }
        Self {
            attributes: names
                .into_iter()
                .map(|name| AttributeDef { name, values: None })
                .collect(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.attributes.iter().any(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }
}

/// The live hypothesis space `C_t`. Cloning is cheap: members are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    schema: Arc<AttributeSchema>,
    members: Vec<Arc<Candidate>>,
}

impl CandidateSet {
    pub fn new(schema: AttributeSchema, candidates: Vec<Candidate>) -> Result<Self, DomainError> {
        Self::from_shared(Arc::new(schema), candidates.into_iter().map(Arc::new).collect())
    }

    pub fn from_shared(schema: Arc<AttributeSchema>, members: Vec<Arc<Candidate>>) -> Result<Self, DomainError> {
        if members.is_empty() {
            return Err(DomainError::EmptySet);
        }
        let mut ids = BTreeSet::new();
        for c in &members {
            if !ids.insert(c.id.as_str()) {
                return Err(DomainError::DuplicateId(c.id.clone()));
            }
            if let Some(name) = c.attributes.keys().find(|n| !schema.contains(n)) {
                return Err(DomainError::UnknownAttribute(name.clone()));
            }
        }
        Ok(Self { schema, members })
    }

    /// Builds a set with a schema inferred from the candidates themselves.
    pub fn with_inferred_schema(candidates: Vec<Candidate>) -> Result<Self, DomainError> {
        let schema = AttributeSchema::infer(&candidates);
        Self::new(schema, candidates)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn shared_schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> &Candidate {
        &self.members[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.members.iter().map(|c| c.as_ref())
    }

    pub fn members(&self) -> &[Arc<Candidate>] {
        &self.members
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.members.iter().position(|c| c.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position(id).is_some()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.members.iter().map(|c| c.id.as_str()).collect()
    }

    /// Keeps members whose index satisfies `keep`, preserving order. Never
    /// returns an empty set.
    pub(crate) fn retain_indices(&self, keep: impl Fn(usize) -> bool) -> Option<Self> {
        let members: Vec<_> = self
            .members
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, c)| Arc::clone(c))
            .collect();
        if members.is_empty() {
            None
        } else {
            Some(Self {
                schema: Arc::clone(&self.schema),
                members,
            })
        }
    }

    pub fn is_subset_of(&self, other: &CandidateSet) -> bool {
        self.members.iter().all(|c| other.contains(&c.id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

/// `h_t`: everything said so far, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConversationHistory {
    pub turns: Vec<Turn>,
}

impl ConversationHistory {
    pub fn from_query(query: impl Into<String>) -> Self {
        Self {
            turns: vec![Turn {
                speaker: Speaker::User,
                text: query.into(),
            }],
        }
    }

    pub fn push(&mut self, speaker: Speaker, text: impl Into<String>) {
        self.turns.push(Turn {
            speaker,
            text: text.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    /// All turn texts joined by newlines, most recent last.
    pub fn joined_text(&self) -> String {
        self.turns
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Action {
    Ask { attribute: String, options: Vec<String> },
    Commit { candidate_id: String },
}

impl Action {
    pub fn ask(attribute: impl Into<String>, options: &[&str]) -> Self {
        Action::Ask {
            attribute: attribute.into(),
            options: options.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn commit(candidate_id: impl Into<String>) -> Self {
        Action::Commit {
            candidate_id: candidate_id.into(),
        }
    }

    pub fn is_commit(&self) -> bool {
        matches!(self, Action::Commit { .. })
    }

    /// `O_a`: one outcome per option plus none-of-these for asks; accept and
    /// reject for commits.
    pub fn outcomes(&self) -> Vec<Outcome> {
        match self {
            Action::Ask { options, .. } => (0..options.len())
                .map(Outcome::Option)
                .chain(std::iter::once(Outcome::NoneOfThese))
                .collect(),
            Action::Commit { .. } => vec![Outcome::Accept, Outcome::Reject],
        }
    }

    pub fn admits_outcome(&self, outcome: Outcome) -> bool {
        match (self, outcome) {
            (Action::Ask { options, .. }, Outcome::Option(k)) => k < options.len(),
            (Action::Ask { .. }, Outcome::NoneOfThese) => true,
            (Action::Commit { .. }, Outcome::Accept | Outcome::Reject) => true,
            _ => false,
        }
    }

    /// Whether `candidate` could have produced `outcome` for this action.
    /// Missing attribute values are consistent with every ask outcome.
    pub fn admits(&self, candidate: &Candidate, outcome: Outcome) -> bool {
        match (self, outcome) {
            (Action::Ask { attribute, options }, outcome) => match candidate.value(attribute) {
                None => true,
                Some(v) => match outcome {
                    Outcome::Option(k) => options.get(k).is_some_and(|o| o == v),
                    Outcome::NoneOfThese => !options.iter().any(|o| o == v),
                    _ => false,
                },
            },
            (Action::Commit { candidate_id }, Outcome::Accept) => &candidate.id == candidate_id,
            (Action::Commit { candidate_id }, Outcome::Reject) => &candidate.id != candidate_id,
            (Action::Commit { .. }, _) => false,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Ask { attribute, options } => {
                write!(f, "ask({attribute}: {})", options.join("|"))
            }
            Action::Commit { candidate_id } => write!(f, "commit({candidate_id})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Option(usize),
    NoneOfThese,
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub action: Action,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

impl Observation {
    pub fn new(action: Action, outcome: Outcome) -> Result<Self, DomainError> {
        if !action.admits_outcome(outcome) {
            return Err(DomainError::InvalidOutcome {
                action: action.to_string(),
                outcome,
            });
        }
        Ok(Self {
            action,
            outcome,
            raw_text: None,
        })
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.raw_text = Some(text.into());
        self
    }

    pub fn admits(&self, candidate: &Candidate) -> bool {
        self.action.admits(candidate, self.outcome)
    }

    /// Text form of the user's reply used when it is appended to the history.
    pub fn reply_text(&self) -> String {
        if let Some(t) = &self.raw_text {
            return t.clone();
        }
        match (&self.action, self.outcome) {
            (Action::Ask { options, .. }, Outcome::Option(k)) => options[k].clone(),
            (Action::Ask { .. }, _) => "None of these.".to_string(),
            (_, Outcome::Accept) => "Yes, that's it.".to_string(),
            _ => "No, that's not it.".to_string(),
        }
    }
}

/// Schema-checked consistency of one candidate with one observation.
pub fn consistent(schema: &AttributeSchema, candidate: &Candidate, obs: &Observation) -> Result<bool, DomainError> {
    if let Action::Ask { attribute, .. } = &obs.action {
        if !schema.contains(attribute) {
            return Err(DomainError::UnknownAttribute(attribute.clone()));
        }
    }
    Ok(obs.admits(candidate))
}

/// Removes candidates that contradict `obs`, preserving order.
pub fn prune(set: &CandidateSet, obs: &Observation) -> Result<CandidateSet, DomainError> {
    if let Action::Ask { attribute, .. } = &obs.action {
        if !set.schema().contains(attribute) {
            return Err(DomainError::UnknownAttribute(attribute.clone()));
        }
    }
    set.retain_indices(|i| obs.admits(set.get(i)))
        .ok_or(DomainError::EmptyPrune)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Simulations per real turn (K).
    pub budget: usize,
    pub exploration: f64,
    pub gamma: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            budget: 50,
            exploration: 1.4,
            gamma: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            alpha: 0.2,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    pub epsilon: f64,
    pub theta: f64,
    pub max_turns: usize,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            theta: 0.8,
            max_turns: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateConfig {
    pub delta: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self { delta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub planner: PlannerConfig,
    pub reward: RewardConfig,
    pub trigger: TriggerConfig,
    pub update: UpdateConfig,
}

impl HyperParams {
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), DomainError> {
        use DomainError::InvalidHyperParam as E;
        let p = &self.planner;
        if p.budget == 0 {
            return Err(E("planner.budget must be positive"));
        }
        if !(p.exploration > 0.0) {
            return Err(E("planner.exploration must be positive"));
        }
        if !(p.gamma > 0.0 && p.gamma <= 1.0) {
            return Err(E("planner.gamma must lie in (0, 1]"));
        }
        let r = &self.reward;
        if !(r.lambda > 0.0 && r.alpha > 0.0 && r.beta > 0.0) {
            return Err(E("reward weights must be positive"));
        }
        let t = &self.trigger;
        if !(t.epsilon > 0.0 && t.epsilon < 1.0) {
            return Err(E("trigger.epsilon must lie in (0, 1)"));
        }
        if !(t.theta > 0.0 && t.theta < 1.0) {
            return Err(E("trigger.theta must lie in (0, 1)"));
        }
        if t.max_turns == 0 {
            return Err(E("trigger.max_turns must be positive"));
        }
        if !(self.update.delta >= 0.0) {
            return Err(E("update.delta must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn colored(id: &str, color: Option<&str>) -> Candidate {
        let c = Candidate::new(id, format!("item {id}"));
        match color {
            Some(v) => c.with_attr("color", v),
            None => c,
        }
    }

    fn set4() -> CandidateSet {
        CandidateSet::with_inferred_schema(vec![
            colored("c1", Some("red")),
            colored("c2", Some("red")),
            colored("c3", Some("blue")),
            colored("c4", Some("green")),
        ])
        .unwrap()
    }

    fn ask_color() -> Action {
        Action::ask("color", &["red", "blue"])
    }

    #[test]
    fn consistency_exact_match_and_mismatch() {
        let schema = set4().schema().clone();
        let red = colored("x", Some("red"));
        let obs_red = Observation::new(ask_color(), Outcome::Option(0)).unwrap();
        let obs_blue = Observation::new(ask_color(), Outcome::Option(1)).unwrap();
        assert!(consistent(&schema, &red, &obs_red).unwrap());
        assert!(!consistent(&schema, &red, &obs_blue).unwrap());
    }

    #[test]
    fn missing_value_survives_every_outcome() {
        let schema = set4().schema().clone();
        let blank = colored("x", None);
        for o in ask_color().outcomes() {
            let obs = Observation::new(ask_color(), o).unwrap();
            assert!(consistent(&schema, &blank, &obs).unwrap());
        }
    }

    #[test]
    fn none_of_these_matches_values_outside_options() {
        let schema = set4().schema().clone();
        let obs = Observation::new(ask_color(), Outcome::NoneOfThese).unwrap();
        assert!(consistent(&schema, &colored("g", Some("green")), &obs).unwrap());
        assert!(!consistent(&schema, &colored("r", Some("red")), &obs).unwrap());
    }

    #[test]
    fn unknown_attribute_is_a_schema_error() {
        let set = set4();
        let obs = Observation::new(Action::ask("size", &["s", "m"]), Outcome::Option(0)).unwrap();
        assert_eq!(
            consistent(set.schema(), set.get(0), &obs),
            Err(DomainError::UnknownAttribute("size".into()))
        );
        assert_eq!(prune(&set, &obs), Err(DomainError::UnknownAttribute("size".into())));
    }

    #[test]
    fn prune_keeps_matching_in_order() {
        let set = set4();
        let obs = Observation::new(ask_color(), Outcome::Option(0)).unwrap();
        assert_eq!(prune(&set, &obs).unwrap().ids(), vec!["c1", "c2"]);
    }

    #[test]
    fn prune_on_rejected_commit_drops_only_that_candidate() {
        let set = set4();
        let obs = Observation::new(Action::commit("c3"), Outcome::Reject).unwrap();
        assert_eq!(prune(&set, &obs).unwrap().ids(), vec!["c1", "c2", "c4"]);
        let acc = Observation::new(Action::commit("c3"), Outcome::Accept).unwrap();
        assert_eq!(prune(&set, &acc).unwrap().ids(), vec!["c3"]);
    }

    #[test]
    fn empty_prune_is_reported() {
        let set = CandidateSet::with_inferred_schema(vec![colored("c1", Some("red"))]).unwrap();
        let obs = Observation::new(ask_color(), Outcome::Option(1)).unwrap();
        assert_eq!(prune(&set, &obs), Err(DomainError::EmptyPrune));
    }

    #[test]
    fn invalid_outcome_rejected() {
        assert!(Observation::new(ask_color(), Outcome::Accept).is_err());
        assert!(Observation::new(ask_color(), Outcome::Option(2)).is_err());
        assert!(Observation::new(Action::commit("c1"), Outcome::NoneOfThese).is_err());
    }

    #[test]
    fn set_construction_checks() {
        assert_eq!(CandidateSet::with_inferred_schema(vec![]), Err(DomainError::EmptySet));
        assert_eq!(
            CandidateSet::with_inferred_schema(vec![colored("a", None), colored("a", None)]),
            Err(DomainError::DuplicateId("a".into()))
        );
        let schema = AttributeSchema::new(vec![AttributeDef {
            name: "size".into(),
            values: None,
        }])
        .unwrap();
        assert_eq!(
            CandidateSet::new(schema, vec![colored("a", Some("red"))]),
            Err(DomainError::UnknownAttribute("color".into()))
        );
    }

    #[test]
    fn candidate_json_reads_null_as_absent() {
        let c: Candidate =
            serde_json::from_str(r#"{"id":"a","text":"t","attributes":{"color":null,"size":"","shape":"round"}}"#)
                .unwrap();
        assert_eq!(c.attributes.len(), 1);
        assert_eq!(c.value("shape"), Some("round"));
    }

    #[test]
    fn hyperparam_defaults_round_trip() {
        let hp = HyperParams::default();
        assert_eq!(hp.planner.budget, 50);
        assert_eq!(hp.planner.exploration, 1.4);
        assert_eq!(hp.planner.gamma, 0.99);
        assert_eq!(hp.reward.lambda, 0.1);
        assert_eq!(hp.reward.alpha, 0.2);
        assert_eq!(hp.reward.beta, 0.5);
        assert_eq!(hp.trigger.epsilon, 0.5);
        assert_eq!(hp.trigger.theta, 0.8);
        assert_eq!(hp.trigger.max_turns, 5);
        assert_eq!(hp.update.delta, 1.0);
        hp.validate().unwrap();
        let text = toml::to_string(&hp).unwrap();
        let back: HyperParams = toml::from_str(&text).unwrap();
        assert_eq!(back, hp);
        let json = serde_json::to_string(&hp).unwrap();
        assert_eq!(serde_json::from_str::<HyperParams>(&json).unwrap(), hp);
    }

    #[test]
    fn hyperparam_validation() {
        let mut hp = HyperParams::default();
        hp.planner.gamma = 1.5;
        assert!(hp.validate().is_err());
        let mut hp = HyperParams::default();
        hp.trigger.theta = 1.0;
        assert!(hp.validate().is_err());
        assert!(toml::from_str::<HyperParams>("[planner]\nbogus = 1\n").is_err());
    }
}
