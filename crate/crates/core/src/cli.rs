//! Command-line front end: config loading, subcommands and the terminal user.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{entropy, init_belief, BeliefState, CommitDecision};
use crate::bench::{
    fingerprint_of, generate_synthetic, run_ablation, run_benchmark, BenchConfig, BenchDeps, BenchError, Dataset,
    MetricsReport, SimulatorKind, SyntheticSpec, Variant,
};
use crate::domain::{
    Action, Candidate, CandidateSet, ConversationHistory, DomainError, HyperParams, Observation, Outcome, Turn,
};
use crate::episode::{
    decide, run_turn, EngineConfig, EpisodeContext, EpisodeError, EpisodeState, Mode, Selection, TurnResult,
};
use crate::llmclient::{ChatModel, EmbeddingClient, LlmClient, LlmError};
use crate::planner::PlannerOptions;
use crate::similarity::{normalize_text, HashingEmbedder, RemoteEmbedder, SimilarityProvider};
use crate::simulator::{User, UserExit, DEFAULT_P_FLIP};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimulatorChoice {
    #[default]
    Exact,
    Noisy,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderChoice {
    #[default]
    Hashing,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Template,
    Llm,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Template => Mode::Template,
            ModeArg::Llm => Mode::Llm,
        }
    }
}

/// Flat run configuration. Every key is optional in the file; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding candidates.jsonl and conversations.jsonl.
    pub dataset: Option<PathBuf>,
    /// Report directory.
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub episodes: usize,
    pub pool_size: usize,
    /// Applies to the proposer, utterances and refined commitment together.
    pub mode: Mode,
    pub simulator: SimulatorChoice,
    pub p_flip: f64,
    pub embedder: EmbedderChoice,
    pub selection: Selection,
    pub history_in_search: bool,
    pub budget: usize,
    pub exploration: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub max_turns: usize,
    pub delta: f64,
    /// Variants run by `ablate`; empty means all.
    pub variants: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = HyperParams::default();
        let bench = BenchConfig::default();
        Self {
            dataset: None,
            out: PathBuf::from("reports"),
            seed: 0,
            jobs: 0,
            episodes: bench.episodes,
            pool_size: bench.pool_size,
            mode: Mode::Template,
            simulator: SimulatorChoice::Exact,
            p_flip: DEFAULT_P_FLIP,
            embedder: EmbedderChoice::Hashing,
            selection: Selection::Mcts,
            history_in_search: PlannerOptions::default().history_in_search,
            budget: hp.planner.budget,
            exploration: hp.planner.exploration,
            gamma: hp.planner.gamma,
            lambda: hp.reward.lambda,
            alpha: hp.reward.alpha,
            beta: hp.reward.beta,
            epsilon: hp.trigger.epsilon,
            theta: hp.trigger.theta,
            max_turns: hp.trigger.max_turns,
            delta: hp.update.delta,
            variants: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn hyper(&self) -> HyperParams {
        let mut hp = HyperParams::default();
        hp.planner.budget = self.budget;
        hp.planner.exploration = self.exploration;
        hp.planner.gamma = self.gamma;
        hp.reward.lambda = self.lambda;
        hp.reward.alpha = self.alpha;
        hp.reward.beta = self.beta;
        hp.trigger.epsilon = self.epsilon;
        hp.trigger.theta = self.theta;
        hp.trigger.max_turns = self.max_turns;
        hp.update.delta = self.delta;
        hp
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            hyper: self.hyper(),
            planner: PlannerOptions {
                history_in_search: self.history_in_search,
                ..PlannerOptions::default()
            },
            selection: self.selection,
            proposer: self.mode,
            utterance: self.mode,
            refined_commit: self.mode,
        }
    }

    pub fn bench(&self) -> BenchConfig {
        BenchConfig {
            engine: self.engine(),
            simulator: match self.simulator {
                SimulatorChoice::Exact => SimulatorKind::Exact,
                SimulatorChoice::Noisy => SimulatorKind::Noisy { p_flip: self.p_flip },
                SimulatorChoice::Llm => SimulatorKind::Llm,
            },
            episodes: self.episodes,
            pool_size: self.pool_size,
            seed: self.seed,
            jobs: self.jobs,
        }
    }

    /// Hash of the effective configuration, excluding parallelism.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.jobs = 0;
        fingerprint_of(&c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.hyper().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.p_flip) {
            return Err(CliError::Config(format!(
                "p_flip must be in [0, 1], got {}",
                self.p_flip
            )));
        }
        for v in &self.variants {
            if Variant::parse(v).is_none() {
                return Err(CliError::Config(format!("unknown variant {v:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "cup", about = "Uncertainty-aware conversational planner")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub simulator: Option<SimulatorChoice>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one variant over a dataset and write its report.
    Bench {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "CUP")]
        variant: String,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run several variants with shared seeds.
    Ablate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated variant names.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Write a synthetic dataset.
    Gen {
        #[arg(long, value_enum, default_value = "cube")]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show one planning step for a saved state.
    Step { state: PathBuf },
    /// Talk to the agent in the terminal.
    Chat {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// A candidates.jsonl file, as an alternative to a dataset.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Opening request; read from stdin when absent.
        #[arg(long)]
        query: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 16 candidates, 4 binary attributes, fully specified.
    Cube,
    /// 64 candidates, 4 attributes of 4 values, 30% blanks.
    Grid,
}

impl Cli {
    /// File config with flag overrides applied.
    pub fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(m) = self.mode {
            cfg.mode = m.into();
        }
        if let Some(s) = self.simulator {
            cfg.simulator = s;
        }
        match &self.command {
            Command::Bench {
                dataset, out, episodes, ..
            } => {
                override_run(&mut cfg, dataset, out, episodes);
            }
            Command::Ablate {
                dataset,
                out,
                variants,
                episodes,
            } => {
                override_run(&mut cfg, dataset, out, episodes);
                if let Some(v) = variants {
                    cfg.variants = v.clone();
                }
            }
            Command::Chat { dataset: Some(d), .. } => cfg.dataset = Some(d.clone()),
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn override_run(cfg: &mut RunConfig, dataset: &Option<PathBuf>, out: &Option<PathBuf>, episodes: &Option<usize>) {
    if dataset.is_some() {
        cfg.dataset = dataset.clone();
    }
    if let Some(o) = out {
        cfg.out = o.clone();
    }
    if let Some(e) = episodes {
        cfg.episodes = *e;
    }
}

struct Services {
    provider: Box<dyn SimilarityProvider>,
    model: Option<LlmClient>,
}

impl Services {
    fn for_config(cfg: &RunConfig) -> Result<Self, CliError> {
        let provider: Box<dyn SimilarityProvider> = match cfg.embedder {
            EmbedderChoice::Hashing => Box::new(HashingEmbedder::new()),
            EmbedderChoice::Remote => Box::new(RemoteEmbedder::new(EmbeddingClient::from_env()?)),
        };
        let needs_model = cfg.mode == Mode::Llm || cfg.simulator == SimulatorChoice::Llm;
        let model = if needs_model {
            Some(LlmClient::from_env()?)
        } else {
            None
        };
        Ok(Self { provider, model })
    }

    fn deps(&self) -> BenchDeps<'_> {
        BenchDeps {
            provider: self.provider.as_ref(),
            model: self.model.as_ref().map(|m| m as &dyn ChatModel),
            user_model: None,
        }
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let dir = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Usage("no dataset given (use --dataset or the `dataset` config key)".into()))?;
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "dataset directory {} does not exist",
            dir.display()
        )));
    }
    Ok(Dataset::load(dir)?)
}

fn summary_line(r: &MetricsReport) -> String {
    format!(
        "{:<22} episodes {:>4}  SR {:>6.2}%  avgT {:.3}",
        r.variant, r.episodes, r.success_rate, r.avg_turns
    )
}

/// Parses `args` and runs the chosen command against the given terminal.
pub fn run<I, T, R, W>(args: I, input: R, mut out: W) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    R: BufRead + Send,
    W: Write + Send,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let cfg = cli.effective_config()?;
    match &cli.command {
        Command::Bench { variant, .. } => {
            let variant =
                Variant::parse(variant).ok_or_else(|| CliError::Usage(format!("unknown variant {variant:?}")))?;
            cmd_bench(&cfg, variant, &mut out)
        }
        Command::Ablate { .. } => cmd_ablate(&cfg, &mut out),
        Command::Gen { preset, out: dir } => cmd_gen(*preset, dir, cfg.seed, &mut out),
        Command::Step { state } => cmd_step(state, &cfg, &mut out),
        Command::Chat { candidates, query, .. } => cmd_chat(&cfg, candidates.as_deref(), query.clone(), input, out),
    }
}

pub fn cmd_bench(cfg: &RunConfig, variant: Variant, out: &mut dyn Write) -> Result<(), CliError> {
    let dataset = load_dataset(cfg)?;
    let services = Services::for_config(cfg)?;
    let bench = cfg.bench();
    let bench = BenchConfig {
        engine: variant.engine(&bench.engine),
        ..bench
    };
    let (report, _) = run_benchmark(variant.name(), &dataset, &bench, &services.deps())?;
    report.write(&cfg.out, variant.name())?;
    writeln!(out, "config {}", cfg.fingerprint())?;
    writeln!(out, "{}", summary_line(&report))?;
    writeln!(
        out,
        "wrote {}",
        cfg.out.join(format!("{}.json", variant.name())).display()
    )?;
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let dataset = load_dataset(cfg)?;
    let services = Services::for_config(cfg)?;
    let variants: Vec<Variant> = if cfg.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        cfg.variants.iter().filter_map(|v| Variant::parse(v)).collect()
    };
    let reports = run_ablation(&dataset, &variants, &cfg.bench(), &services.deps())?;
    writeln!(out, "config {}", cfg.fingerprint())?;
    for (v, r) in &reports {
        r.write(&cfg.out, v.name())?;
        writeln!(out, "{}", summary_line(r))?;
    }
    Ok(())
}

pub fn cmd_gen(preset: Preset, dir: &Path, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = match preset {
        Preset::Cube => SyntheticSpec::binary_cube(),
        Preset::Grid => SyntheticSpec::partial_grid(),
    };
    let ds = generate_synthetic(&spec, seed)?;
    ds.save(dir)?;
    writeln!(
        out,
        "wrote {} candidates and {} conversations to {}",
        ds.candidates.len(),
        ds.records.len(),
        dir.display()
    )?;
    Ok(())
}

/// Saved planner input for `step`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepState {
    pub candidates: Vec<Candidate>,
    pub history: Vec<Turn>,
    /// Turns already used.
    #[serde(default)]
    pub turn: usize,
    /// Explicit belief aligned with `candidates`; derived from the history
    /// when absent.
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    /// Planner seed; the run seed is used when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl StepState {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed state file: {e}")))
    }

    fn into_episode(self, provider: &dyn SimilarityProvider, seed: u64) -> Result<EpisodeState, CliError> {
        let set = CandidateSet::with_inferred_schema(self.candidates)?;
        let history = ConversationHistory { turns: self.history };
        let belief = match self.probs {
            Some(p) => BeliefState::new(set, p).map_err(|e| CliError::Usage(format!("malformed state file: {e}")))?,
            None => init_belief(set, &history, provider).map_err(EpisodeError::from)?,
        };
        let mut state = EpisodeState::from_belief(0, belief, history, self.seed.unwrap_or(seed), None);
        state.turn = self.turn;
        Ok(state)
    }
}

/// Human-readable account of the next decision for `state`.
pub fn render_step(state: &EpisodeState, provider: &dyn SimilarityProvider, engine: &EngineConfig) -> String {
    let ctx = EpisodeContext {
        provider,
        model: None,
        cfg: engine,
    };
    let d = decide(state, &ctx);
    let b = &state.belief;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "turn {} of {}, {} candidates, entropy {:.4}",
        state.turn + 1,
        engine.hyper.trigger.max_turns,
        b.len(),
        entropy(b)
    );
    let reason = match d.decision {
        CommitDecision::Continue => "continue",
        CommitDecision::DirectCommit => "direct commit (belief is concentrated)",
        CommitDecision::RefinedCommit => "refined commit (few candidates or last turn)",
    };
    let _ = writeln!(s, "trigger: {reason}");
    match &d.plan {
        Some(p) => {
            let _ = writeln!(s, "actions:");
            let _ = writeln!(
                s,
                "  {:<48} {:>7} {:>7} {:>8} {:>5}",
                "action", "eig", "prior", "value", "visits"
            );
            for e in &p.edges {
                let _ = writeln!(
                    s,
                    "  {:<48} {:>7.4} {:>7.4} {:>8.4} {:>5}",
                    e.action.to_string(),
                    e.eig,
                    e.prior,
                    e.value,
                    e.visits
                );
            }
            let _ = writeln!(s, "root visits: {}", p.root_visits);
        }
        None if d.decision == CommitDecision::Continue => {
            let _ = writeln!(s, "no search ({:?} selection)", engine.selection);
        }
        None => {
            let _ = writeln!(s, "no search");
        }
    }
    let _ = writeln!(s, "chosen: {}", d.action);
    for f in &d.fallbacks {
        let _ = writeln!(s, "fallback: {f}");
    }
    s
}

pub fn cmd_step(path: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read state file {}: {e}", path.display())))?;
    let provider = HashingEmbedder::new();
    let mut engine = cfg.engine();
    engine.proposer = Mode::Template;
    engine.utterance = Mode::Template;
    engine.refined_commit = Mode::Template;
    let state = StepState::parse(&text)?.into_episode(&provider, cfg.seed)?;
    if state.turn >= engine.hyper.trigger.max_turns {
        return Err(CliError::Usage(format!(
            "state has used {} of {} turns",
            state.turn, engine.hyper.trigger.max_turns
        )));
    }
    write!(out, "{}", render_step(&state, &provider, &engine))?;
    Ok(())
}

fn normalize_answer(s: &str) -> String {
    let spaced: String = s.chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    normalize_text(&spaced)
}

/// What a line typed by the person means for the current action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reading {
    Outcome(Outcome),
    /// Free text matching no option; needs confirmation as none-of-these.
    Unmatched,
    /// Not an answer to a yes/no question.
    Unclear,
    Quit,
}

pub fn read_answer(action: &Action, line: &str) -> Reading {
    let a = normalize_answer(line);
    if a == "quit" || a == "exit" {
        return Reading::Quit;
    }
    match action {
        Action::Ask { options, .. } => {
            if let Some(k) = options.iter().position(|o| normalize_answer(o) == a) {
                Reading::Outcome(Outcome::Option(k))
            } else if a == "none" || a == "none of these" {
                Reading::Outcome(Outcome::NoneOfThese)
            } else {
                Reading::Unmatched
            }
        }
        Action::Commit { .. } => match a.as_str() {
            "y" | "yes" | "accept" | "yes that s it" => Reading::Outcome(Outcome::Accept),
            "n" | "no" | "reject" => Reading::Outcome(Outcome::Reject),
            _ => Reading::Unclear,
        },
    }
}

/// A person at the terminal answering the agent.
pub struct HumanUser<R, W> {
    io: Mutex<(R, W)>,
}

impl<R: BufRead + Send, W: Write + Send> HumanUser<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self {
            io: Mutex::new((input, output)),
        }
    }

    pub fn into_inner(self) -> (R, W) {
        self.io.into_inner().unwrap_or_else(|e| e.into_inner())
    }

    pub fn say(&self, text: &str) -> io::Result<()> {
        let mut g = self.io.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(g.1, "{text}")?;
        g.1.flush()
    }

    /// Next line from the person; `None` at end of input.
    pub fn ask_line(&self, prompt: &str) -> io::Result<Option<String>> {
        let mut g = self.io.lock().unwrap_or_else(|e| e.into_inner());
        let (input, output) = &mut *g;
        write!(output, "{prompt}")?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\r', '\n']).to_string()))
    }

    fn respond_inner(&self, action: &Action, utterance: &str) -> io::Result<Option<Observation>> {
        self.say(&format!("agent: {utterance}"))?;
        loop {
            let Some(line) = self.ask_line("> ")? else {
                return Ok(None);
            };
            let outcome = match read_answer(action, &line) {
                Reading::Quit => return Ok(None),
                Reading::Outcome(o) => o,
                Reading::Unclear => {
                    self.say("Please answer yes or no.")?;
                    continue;
                }
                Reading::Unmatched => {
                    let q = format!("\"{line}\" is not one of the options. Count it as none of these? [y/n] ");
                    match self.ask_line(&q)?.map(|l| normalize_answer(&l)) {
                        None => return Ok(None),
                        Some(c) if c == "quit" || c == "exit" => return Ok(None),
                        Some(c) if c == "y" || c == "yes" => Outcome::NoneOfThese,
                        Some(_) => continue,
                    }
                }
            };
            let obs = Observation::new(action.clone(), outcome).expect("outcome read for this action");
            let obs = match outcome {
                Outcome::Option(_) => obs,
                _ => obs.with_text(line),
            };
            return Ok(Some(obs));
        }
    }
}

impl<R: BufRead + Send, W: Write + Send> User for HumanUser<R, W> {
    fn respond(&self, action: &Action, utterance: &str) -> Result<Observation, UserExit> {
        match self.respond_inner(action, utterance) {
            Ok(Some(o)) => Ok(o),
            _ => Err(UserExit),
        }
    }
}

pub fn cmd_chat<R: BufRead + Send, W: Write + Send>(
    cfg: &RunConfig,
    candidates: Option<&Path>,
    query: Option<String>,
    input: R,
    output: W,
) -> Result<(), CliError> {
    let pool: Vec<Candidate> = match (candidates, &cfg.dataset) {
        (Some(path), _) => crate::bench::read_jsonl(path)?,
        (None, Some(_)) => load_dataset(cfg)?.candidates.iter().map(|c| (**c).clone()).collect(),
        (None, None) => return Err(CliError::Usage("chat needs --dataset or --candidates".into())),
    };
    let services = Services::for_config(cfg)?;
    let engine = cfg.engine();
    let user = HumanUser::new(input, output);
    let query = match query {
        Some(q) => q,
        None => match user.ask_line("What are you looking for? ")? {
            Some(q) if !matches!(normalize_answer(&q).as_str(), "quit" | "exit") => q,
            _ => {
                user.say("Goodbye.")?;
                return Ok(());
            }
        },
    };
    let set = CandidateSet::with_inferred_schema(pool)?;
    let names: BTreeMap<String, String> = set.iter().map(|c| (c.id.clone(), c.text.clone())).collect();
    let mut state = EpisodeState::start(
        0,
        set,
        ConversationHistory::from_query(query),
        services.provider.as_ref(),
        cfg.seed,
        None,
    )?;
    let ctx = EpisodeContext {
        provider: services.provider.as_ref(),
        model: services.model.as_ref().map(|m| m as &dyn ChatModel),
        cfg: &engine,
    };
    loop {
        match run_turn(state, &user, &ctx) {
            Ok(TurnResult::Continue(s)) => state = s,
            Ok(TurnResult::Finished(r)) => {
                if r.success {
                    let id = r.committed.unwrap_or_default();
                    let text = names.get(&id).cloned().unwrap_or_default();
                    user.say(&format!("Found it in {} turns: {text} ({id})", r.turns))?;
                } else {
                    user.say(&format!("Out of turns after {}. Sorry I couldn't find it.", r.turns))?;
                }
                return Ok(());
            }
            Err(EpisodeError::UserLeft) => {
                user.say("Goodbye.")?;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn unknown_config_key_is_rejected() {
        let err = RunConfig::from_toml("budget = 10\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("bogus")));
    }

    #[test]
    fn config_file_maps_to_hyperparams() {
        let cfg = RunConfig::from_toml("budget = 200\ntheta = 0.7\nsimulator = \"noisy\"\np_flip = 0.2\n").unwrap();
        let b = cfg.bench();
        assert_eq!(b.engine.hyper.planner.budget, 200);
        assert_eq!(b.engine.hyper.trigger.theta, 0.7);
        assert_eq!(b.simulator, SimulatorKind::Noisy { p_flip: 0.2 });
    }

    #[test]
    fn defaults_match_engine_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.engine(), EngineConfig::default());
        assert_eq!(cfg.bench(), BenchConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "seed = 3\njobs = 2\nmode = \"template\"\n").unwrap();
        let cli = Cli::try_parse_from([
            "cup",
            "--config",
            p.to_str().unwrap(),
            "--seed",
            "9",
            "--simulator",
            "noisy",
            "bench",
            "--episodes",
            "7",
        ])
        .unwrap();
        let cfg = cli.effective_config().unwrap();
        assert_eq!((cfg.seed, cfg.jobs, cfg.episodes), (9, 2, 7));
        assert_eq!(cfg.simulator, SimulatorChoice::Noisy);
    }

    #[test]
    fn fingerprint_ignores_jobs() {
        let a = RunConfig::default();
        let b = RunConfig { jobs: 8, ..a.clone() };
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn answers_match_after_normalization() {
        let ask = Action::ask("color", &["Navy Blue", "red"]);
        assert_eq!(
            read_answer(&ask, "  navy   blue! "),
            Reading::Outcome(Outcome::Option(0))
        );
        assert_eq!(read_answer(&ask, "RED"), Reading::Outcome(Outcome::Option(1)));
        assert_eq!(
            read_answer(&ask, "none of these"),
            Reading::Outcome(Outcome::NoneOfThese)
        );
        assert_eq!(read_answer(&ask, "green"), Reading::Unmatched);
        assert_eq!(read_answer(&ask, "quit"), Reading::Quit);
        let commit = Action::commit("c1");
        assert_eq!(read_answer(&commit, "Yes"), Reading::Outcome(Outcome::Accept));
        assert_eq!(read_answer(&commit, "no"), Reading::Outcome(Outcome::Reject));
        assert_eq!(read_answer(&commit, "maybe"), Reading::Unclear);
    }

    #[test]
    fn free_text_needs_confirmation_before_none_of_these() {
        let ask = Action::ask("color", &["red", "blue"]);
        let user = HumanUser::new(Cursor::new("green\nn\nblue\n"), Vec::new());
        let obs = user.respond(&ask, "Which color?").unwrap();
        assert_eq!(obs.outcome, Outcome::Option(1));

        let user = HumanUser::new(Cursor::new("green\ny\n"), Vec::new());
        let obs = user.respond(&ask, "Which color?").unwrap();
        assert_eq!(obs.outcome, Outcome::NoneOfThese);
        assert_eq!(obs.reply_text(), "green");
        let (_, out) = user.into_inner();
        assert!(String::from_utf8(out).unwrap().contains("Count it as none of these?"));
    }

    #[test]
    fn quit_and_eof_leave() {
        let ask = Action::ask("color", &["red", "blue"]);
        assert_eq!(
            HumanUser::new(Cursor::new("quit\n"), Vec::new()).respond(&ask, "?"),
            Err(UserExit)
        );
        assert_eq!(
            HumanUser::new(Cursor::new(""), Vec::new()).respond(&ask, "?"),
            Err(UserExit)
        );
    }

    #[test]
    fn malformed_state_is_diagnosed() {
        assert!(matches!(StepState::parse("{\"candidates\": 3}"), Err(CliError::Usage(m)) if m.contains("malformed")));
    }

    #[test]
    fn missing_dataset_is_a_usage_error() {
        let cfg = RunConfig {
            dataset: Some(PathBuf::from("/nonexistent/cup-dataset")),
            ..RunConfig::default()
        };
        let err = cmd_bench(&cfg, Variant::Cup, &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("does not exist"));
    }
}
