//! Benchmark harness: datasets, candidate pools, synthetic data, metrics and
//! the ablation grid.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    Action, AttributeSchema, Candidate, CandidateSet, ConversationHistory, DomainError, Outcome, Turn,
};
use crate::episode::{
    run_episode, EngineConfig, EpisodeContext, EpisodeError, EpisodeResult, EpisodeState, Mode, Selection, TurnSnapshot,
};
use crate::llmclient::ChatModel;
use crate::similarity::SimilarityProvider;
use crate::simulator::{LlmUser, SimulatedUser, User, DEFAULT_P_FLIP};

pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const CONVERSATIONS_FILE: &str = "conversations.jsonl";
pub const DEFAULT_POOL_SIZE: usize = 300;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("conversation `{record}` names unknown target `{target}`")]
    UnknownTarget { record: String, target: String },
    #[error("conversation `{0}` has an empty history")]
    EmptyHistory(String),
    #[error("dataset has no conversations")]
    NoRecords,
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("episode {index}: {source}")]
    Episode { index: usize, source: EpisodeError },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("the llm simulator needs a chat model")]
    NoModel,
    #[error("metrics recomputed from traces disagree with stored results: {0}")]
    ReplayMismatch(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub target_id: String,
    pub history: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl DatasetRecord {
    pub fn history(&self) -> ConversationHistory {
        ConversationHistory {
            turns: self.history.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Arc<AttributeSchema>,
    pub candidates: Vec<Arc<Candidate>>,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    /// Checks ids, targets and histories. The schema is inferred when absent.
    pub fn new(
        candidates: Vec<Candidate>,
        records: Vec<DatasetRecord>,
        schema: Option<AttributeSchema>,
    ) -> Result<Self, BenchError> {
        let schema = schema.unwrap_or_else(|| AttributeSchema::infer(&candidates));
        // CandidateSet::new validates ids and attribute names.
        let set = CandidateSet::new(schema, candidates)?;
        for r in &records {
            if !set.contains(&r.target_id) {
                return Err(BenchError::UnknownTarget {
                    record: r.id.clone(),
                    target: r.target_id.clone(),
                });
            }
            if r.history.is_empty() {
                return Err(BenchError::EmptyHistory(r.id.clone()));
            }
        }
        Ok(Self {
            schema: Arc::clone(set.shared_schema()),
            candidates: set.members().to_vec(),
            records,
        })
    }

    pub fn candidate(&self, id: &str) -> Option<&Arc<Candidate>> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let candidates = read_jsonl(&dir.join(CANDIDATES_FILE))?;
        let records = read_jsonl(&dir.join(CONVERSATIONS_FILE))?;
        Self::new(candidates, records, None)
    }

    pub fn save(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let cands: Vec<&Candidate> = self.candidates.iter().map(|c| c.as_ref()).collect();
        write_jsonl(&dir.join(CANDIDATES_FILE), &cands)?;
        write_jsonl(&dir.join(CONVERSATIONS_FILE), &self.records)
    }

    pub fn candidates_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.candidates {
            out.push_str(&serde_json::to_string(c.as_ref()).expect("candidate serializes"));
            out.push('\n');
        }
        out
    }

    pub fn conversations_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, BenchError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| BenchError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), BenchError> {
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|e| BenchError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        writeln!(w).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// The target plus the `n - 1` other candidates most similar to the record's
/// history (ties by id), kept in pool order. A pool smaller than `n` is used
/// whole.
pub fn build_candidate_pool(
    record: &DatasetRecord,
    dataset: &Dataset,
    provider: &dyn SimilarityProvider,
    n: usize,
) -> Result<CandidateSet, BenchError> {
    let pool = &dataset.candidates;
    if !pool.iter().any(|c| c.id == record.target_id) {
        return Err(BenchError::UnknownTarget {
            record: record.id.clone(),
            target: record.target_id.clone(),
        });
    }
    let keep: HashSet<&str> = if pool.len() <= n {
        pool.iter().map(|c| c.id.as_str()).collect()
    } else {
        let history = record.history();
        let mut scored = Vec::with_capacity(pool.len());
        for c in pool.iter().filter(|c| c.id != record.target_id) {
            let s = provider
                .sim(c, &history)
                .map_err(|e| BenchError::Pool(format!("similarity: {e}")))?;
            scored.push((s, c.id.as_str()));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let mut keep: HashSet<&str> = scored.iter().take(n.saturating_sub(1)).map(|s| s.1).collect();
        keep.insert(record.target_id.as_str());
        keep
    };
    let members = pool.iter().filter(|c| keep.contains(c.id.as_str())).cloned().collect();
    Ok(CandidateSet::from_shared(Arc::clone(&dataset.schema), members)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Discriminativeness {
    /// Every candidate has a distinct, fully specified attribute tuple.
    Perfect,
    /// Each attribute value is blanked independently with probability `p`.
    Partial { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_candidates: usize,
    /// (name, cardinality) pairs.
    pub attributes: Vec<(String, usize)>,
    pub discriminativeness: Discriminativeness,
}

impl SyntheticSpec {
    pub fn new(num_candidates: usize, attributes: &[(&str, usize)], d: Discriminativeness) -> Self {
        Self {
            num_candidates,
            attributes: attributes.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            discriminativeness: d,
        }
    }

    /// 16 candidates over 4 binary attributes, fully identifiable.
    pub fn binary_cube() -> Self {
        Self::new(
            16,
            &[("color", 2), ("size", 2), ("material", 2), ("style", 2)],
            Discriminativeness::Perfect,
        )
    }

    /// 64 candidates over 4 four-valued attributes, 30% of values missing.
    pub fn partial_grid() -> Self {
        Self::new(
            64,
            &[("color", 4), ("size", 4), ("material", 4), ("style", 4)],
            Discriminativeness::Partial { p: 0.3 },
        )
    }

    fn tuple_count(&self) -> Option<usize> {
        self.attributes
            .iter()
            .try_fold(1usize, |acc, (_, k)| acc.checked_mul(*k))
    }
}

pub fn synthetic_value(attribute: &str, k: usize) -> String {
    format!("{attribute}{k}")
}

/// Text for a candidate: its full attribute tuple, blanked values included.
pub fn render_candidate_text(values: &[(String, String)]) -> String {
    let parts: Vec<&str> = values.iter().map(|(_, v)| v.as_str()).collect();
    parts.join(", ")
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset, BenchError> {
    let n = spec.num_candidates;
    if n == 0 {
        return Err(BenchError::Infeasible("num_candidates must be positive".into()));
    }
    if spec.attributes.is_empty() || spec.attributes.iter().any(|(_, k)| *k == 0) {
        return Err(BenchError::Infeasible(
            "every attribute needs at least one value".into(),
        ));
    }
    if let Discriminativeness::Partial { p } = spec.discriminativeness {
        if !(0.0..=1.0).contains(&p) {
            return Err(BenchError::Infeasible(format!("blank probability {p} outside [0, 1]")));
        }
    }
    let total = spec.tuple_count();
    let distinct = total.is_none_or(|t| t >= n);
    if spec.discriminativeness == Discriminativeness::Perfect && !distinct {
        return Err(BenchError::Infeasible(format!(
            "{} distinct tuples cannot cover {n} candidates",
            total.unwrap_or(usize::MAX)
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards: Vec<usize> = spec.attributes.iter().map(|(_, k)| *k).collect();
    let decode = |mut idx: usize| -> Vec<usize> {
        cards
            .iter()
            .map(|k| {
                let v = idx % k;
                idx /= k;
                v
            })
            .collect()
    };
    let tuples: Vec<Vec<usize>> = match total {
        Some(t) if distinct && t <= 1 << 20 => {
            let mut idx: Vec<usize> = (0..t).collect();
            idx.shuffle(&mut rng);
            idx.into_iter().take(n).map(decode).collect()
        }
        _ => {
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let tup: Vec<usize> = cards.iter().map(|k| rng.gen_range(0..*k)).collect();
                if !distinct || seen.insert(tup.clone()) {
                    out.push(tup);
                }
            }
            out
        }
    };

    let width = (n - 1).to_string().len().max(3);
    let mut candidates = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for (i, tup) in tuples.iter().enumerate() {
        let values: Vec<(String, String)> = spec
            .attributes
            .iter()
            .zip(tup)
            .map(|((name, _), k)| (name.clone(), synthetic_value(name, *k)))
            .collect();
        let id = format!("c{i:0width$}");
        let mut c = Candidate::new(id.clone(), render_candidate_text(&values));
        for (name, v) in &values {
            let blank = match spec.discriminativeness {
                Discriminativeness::Perfect => false,
                Discriminativeness::Partial { p } => rng.gen_bool(p),
            };
            if !blank {
                c = c.with_attr(name.clone(), v.clone());
            }
        }
        let (_, v) = &values[rng.gen_range(0..values.len())];
        records.push(DatasetRecord {
            id: format!("q{i:0width$}"),
            target_id: id,
            history: ConversationHistory::from_query(v.to_string()).turns,
            domain: Some("synthetic".into()),
        });
        candidates.push(c);
    }
    // Inferred rather than declared so that a saved and reloaded dataset is
    // identical to the generated one.
    Dataset::new(candidates, records, None)
}

pub fn success_rate(results: &[EpisodeResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    100.0 * results.iter().filter(|r| r.success).count() as f64 / results.len() as f64
}

pub fn avg_turns(results: &[EpisodeResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().map(|r| r.turns as f64).sum::<f64>() / results.len() as f64
}

/// `1 - (rank - 1) / size` with a 1-based rank.
pub fn dominance_ratio(rank: usize, size: usize) -> f64 {
    assert!(rank >= 1 && rank <= size, "rank {rank} outside 1..={size}");
    // Single division: correctly rounded, so rank 73 of 300 gives 0.76 exactly.
    (size + 1 - rank) as f64 / size as f64
}

/// Entropy over that of a uniform belief on `size` candidates; `None` when
/// `size < 2`.
pub fn decrease_ratio(entropy: f64, size: usize) -> Option<f64> {
    (size >= 2).then(|| (entropy / (size as f64).ln()).clamp(0.0, 1.0))
}

/// Per-turn metric values, read off the belief at the start of each turn.
pub fn snapshot_dominance(s: &TurnSnapshot) -> Option<f64> {
    s.target_rank_before.map(|r| dominance_ratio(r, s.candidates_before))
}

pub fn snapshot_decrease(s: &TurnSnapshot) -> Option<f64> {
    decrease_ratio(s.entropy_before, s.candidates_before)
}

/// Success and turn count implied by a trace alone.
pub fn replay(result: &EpisodeResult) -> (bool, usize) {
    let success = match (result.trace.last(), &result.target_id) {
        (Some(last), Some(target)) => {
            last.outcome == Outcome::Accept
                && matches!(&last.action, Action::Commit { candidate_id } if candidate_id == target)
        }
        _ => false,
    };
    (success, result.trace.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SimulatorKind {
    #[default]
    Exact,
    Noisy {
        p_flip: f64,
    },
    Llm,
}

impl SimulatorKind {
    pub fn noisy() -> Self {
        Self::Noisy { p_flip: DEFAULT_P_FLIP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub engine: EngineConfig,
    pub simulator: SimulatorKind,
    /// Episodes to run; records are reused round-robin. 0 means one per record.
    pub episodes: usize,
    pub pool_size: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the default. Not part of the fingerprint.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            simulator: SimulatorKind::Exact,
            episodes: 0,
            pool_size: DEFAULT_POOL_SIZE,
            seed: 0,
            jobs: 0,
        }
    }
}

impl BenchConfig {
    pub fn fingerprint(&self) -> String {
        fingerprint_of(self)
    }
}

/// SHA-256 over the value's JSON form.
pub fn fingerprint_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnMetrics {
    /// 1-based.
    pub turn: usize,
    /// Episodes that reached this turn.
    pub episodes: usize,
    pub dominance_mean: f64,
    pub decrease_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub avg_turns: f64,
    pub per_turn: Vec<TurnMetrics>,
    pub seed: u64,
    pub config_fingerprint: String,
    pub config: serde_json::Value,
}

impl MetricsReport {
    pub fn from_results(variant: &str, results: &[EpisodeResult], cfg: &BenchConfig) -> Self {
        let max_t = results.iter().map(|r| r.trace.len()).max().unwrap_or(0);
        let mut per_turn = Vec::new();
        for t in 0..max_t {
            let snaps: Vec<&TurnSnapshot> = results.iter().filter_map(|r| r.trace.get(t)).collect();
            let dom: Vec<f64> = snaps.iter().filter_map(|s| snapshot_dominance(s)).collect();
            let dec: Vec<f64> = snaps.iter().filter_map(|s| snapshot_decrease(s)).collect();
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            per_turn.push(TurnMetrics {
                turn: t + 1,
                episodes: snaps.len(),
                dominance_mean: mean(&dom).unwrap_or(0.0),
                decrease_mean: mean(&dec),
            });
        }
        Self {
            variant: variant.to_string(),
            episodes: results.len(),
            success_rate: success_rate(results),
            avg_turns: avg_turns(results),
            per_turn,
            seed: cfg.seed,
            config_fingerprint: cfg.fingerprint(),
            config: serde_json::to_value(cfg).expect("config serializes"),
        }
    }

    pub fn dominance_at(&self, turn: usize) -> Option<f64> {
        self.per_turn.iter().find(|m| m.turn == turn).map(|m| m.dominance_mean)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-turn series; `one_minus_decrease` is included for plotting.
    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "variant",
            "turn",
            "episodes",
            "dominance_mean",
            "decrease_mean",
            "one_minus_decrease",
        ])?;
        for m in &self.per_turn {
            let (dec, inv) = match m.decrease_mean {
                Some(d) => (format!("{d:.6}"), format!("{:.6}", 1.0 - d)),
                None => (String::new(), String::new()),
            };
            w.write_record([
                self.variant.clone(),
                m.turn.to_string(),
                m.episodes.to_string(),
                format!("{:.6}", m.dominance_mean),
                dec,
                inv,
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Pool(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Writes `{stem}.json` and `{stem}.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(), BenchError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, self.to_json()).map_err(io_err(&json))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, self.to_csv()?).map_err(io_err(&csv_path))
    }
}

/// Collaborators for a benchmark run.
#[derive(Clone, Copy)]
pub struct BenchDeps<'a> {
    pub provider: &'a dyn SimilarityProvider,
    /// Used by llm-mode engine components and the llm simulator.
    pub model: Option<&'a dyn ChatModel>,
    /// Overrides `model` for the llm simulator.
    pub user_model: Option<&'a dyn ChatModel>,
}

fn run_one(
    index: usize,
    dataset: &Dataset,
    cfg: &BenchConfig,
    deps: &BenchDeps<'_>,
) -> Result<EpisodeResult, BenchError> {
    let record = &dataset.records[index % dataset.records.len()];
    let target = dataset
        .candidate(&record.target_id)
        .cloned()
        .ok_or_else(|| BenchError::UnknownTarget {
            record: record.id.clone(),
            target: record.target_id.clone(),
        })?;
    let set = build_candidate_pool(record, dataset, deps.provider, cfg.pool_size)?;
    let seed = cfg.seed.wrapping_add(index as u64);
    let wrap = |source| BenchError::Episode { index, source };
    let state = EpisodeState::start(
        index,
        set,
        record.history(),
        deps.provider,
        seed,
        Some(record.target_id.clone()),
    )
    .map_err(wrap)?;
    let ctx = EpisodeContext {
        provider: deps.provider,
        model: deps.model,
        cfg: &cfg.engine,
    };
    let user: Box<dyn User + '_> = match cfg.simulator {
        SimulatorKind::Exact => Box::new(SimulatedUser::exact(target)),
        SimulatorKind::Noisy { p_flip } => Box::new(SimulatedUser::noisy(target, p_flip, seed)),
        SimulatorKind::Llm => {
            let model = deps.user_model.or(deps.model).ok_or(BenchError::NoModel)?;
            Box::new(LlmUser { target, model })
        }
    };
    run_episode(state, user.as_ref(), &ctx).map_err(wrap)
}

/// Runs every episode of a benchmark; results come back in episode order
/// regardless of the number of workers.
pub fn run_episodes(
    dataset: &Dataset,
    cfg: &BenchConfig,
    deps: &BenchDeps<'_>,
) -> Result<Vec<EpisodeResult>, BenchError> {
    if dataset.records.is_empty() {
        return Err(BenchError::NoRecords);
    }
    cfg.engine.hyper.validate()?;
    let n = if cfg.episodes == 0 {
        dataset.records.len()
    } else {
        cfg.episodes
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(|i| run_one(i, dataset, cfg, deps)).collect())
}

/// Checks that success and turn counts follow from the traces alone.
pub fn verify_replay(results: &[EpisodeResult]) -> Result<(), BenchError> {
    for r in results {
        let (success, turns) = replay(r);
        if success != r.success || turns != r.turns {
            return Err(BenchError::ReplayMismatch(format!(
                "episode {}: stored ({}, {}) vs trace ({success}, {turns})",
                r.episode, r.success, r.turns
            )));
        }
    }
    Ok(())
}

pub fn run_benchmark(
    variant: &str,
    dataset: &Dataset,
    cfg: &BenchConfig,
    deps: &BenchDeps<'_>,
) -> Result<(MetricsReport, Vec<EpisodeResult>), BenchError> {
    let results = run_episodes(dataset, cfg, deps)?;
    verify_replay(&results)?;
    Ok((MetricsReport::from_results(variant, &results, cfg), results))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "CUP")]
    Cup,
    #[serde(rename = "CUP-Heuristic")]
    CupHeuristic,
    #[serde(rename = "CUP-Random")]
    CupRandom,
    #[serde(rename = "CUP-Random-Heuristic")]
    CupRandomHeuristic,
    #[serde(rename = "LLM-only")]
    LlmOnly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Cup,
        Variant::CupHeuristic,
        Variant::CupRandom,
        Variant::CupRandomHeuristic,
        Variant::LlmOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cup => "CUP",
            Variant::CupHeuristic => "CUP-Heuristic",
            Variant::CupRandom => "CUP-Random",
            Variant::CupRandomHeuristic => "CUP-Random-Heuristic",
            Variant::LlmOnly => "LLM-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }

    /// Engine flags for this variant on top of `base`.
    pub fn engine(self, base: &EngineConfig) -> EngineConfig {
        let mut e = *base;
        match self {
            Variant::Cup => {}
            Variant::CupHeuristic => e.refined_commit = Mode::Template,
            Variant::CupRandom => e.selection = Selection::Random,
            Variant::CupRandomHeuristic => {
                e.selection = Selection::Random;
                e.refined_commit = Mode::Template;
            }
            Variant::LlmOnly => e.selection = Selection::GreedyEig,
        }
        e
    }
}

/// One report per variant, all on the same dataset and seed.
pub fn run_ablation(
    dataset: &Dataset,
    variants: &[Variant],
    cfg: &BenchConfig,
    deps: &BenchDeps<'_>,
) -> Result<BTreeMap<Variant, MetricsReport>, BenchError> {
    let mut out = BTreeMap::new();
    for &v in variants {
        let vcfg = BenchConfig {
            engine: v.engine(&cfg.engine),
            ..cfg.clone()
        };
        let (report, _) = run_benchmark(v.name(), dataset, &vcfg, deps)?;
        out.insert(v, report);
    }
    Ok(out)
}
