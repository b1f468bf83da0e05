//! The generation loop: a beam of explorer prompts generates batches,
//! instances are accepted by marginal volume gain against a bounded anchor
//! set, the anchor set is pruned by k-DPP sampling, and rejected batches
//! produce successor explorers through textual gradients.

mod threshold;
mod trace;

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::InstanceRecord;
use crate::dpp::{sample_k_dpp, AnchorState, DppError, GAIN_FLOOR};
use crate::gateway::{Gateway, GatewayError, LedgerSnapshot};
use crate::kernel::{
    build_kernel, median_bandwidth, tokenize, Bandwidth, DataInstance, Embedding, Kernel, KernelConfig, KernelError,
    KernelItem, StopWords, TokenSet,
};
use crate::metrics::{diversity_report, DiversityReport, MetricsError, VendiKernel};

pub use threshold::{init_threshold, ThresholdConfig, ThresholdInit, ThresholdMode};
pub use trace::{rejection_rate_trace, trend_slope, RejectReason, TraceEvent};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Dpp(#[from] DppError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("threshold probing produced {got} instances, need {need}")]
    TooFewProbes { need: usize, got: usize },
    #[error("every explorer failed in iteration {iteration}: {last}")]
    AllExplorersFailed { iteration: u32, last: String },
    #[error("trace recording was disabled for this run")]
    TraceDisabled,
    #[error("snapshot does not match this run: {0}")]
    Snapshot(String),
}

impl EngineError {
    /// True when the failure came from the model provider.
    pub fn is_provider(&self) -> bool {
        matches!(
            self,
            EngineError::Gateway(GatewayError::Provider { .. }) | EngineError::AllExplorersFailed { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessorSelection {
    #[default]
    Dpp,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task_prompt: String,
    /// l
    pub target_size: usize,
    /// b
    pub beam_width: usize,
    /// k
    pub anchor_capacity: usize,
    /// T
    pub max_iterations: u32,
    /// |B|
    pub batch_size: usize,
    /// Gradients requested per critique call.
    pub num_gradients: usize,
    /// Ablation switch: textual-gradient refinement of explorers.
    pub refinement: bool,
    pub successor_selection: SuccessorSelection,
    pub kernel: KernelConfig,
    pub threshold: ThresholdConfig,
    pub vendi_kernel: VendiKernel,
    pub seed: u64,
    pub record_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task_prompt: String::new(),
            target_size: 500,
            beam_width: 3,
            anchor_capacity: 10,
            max_iterations: 200,
            batch_size: 10,
            num_gradients: 3,
            refinement: true,
            successor_selection: SuccessorSelection::Dpp,
            kernel: KernelConfig::default(),
            threshold: ThresholdConfig::default(),
            vendi_kernel: VendiKernel::Combined,
            seed: 0,
            record_trace: true,
        }
    }
}

impl RunConfig {
    pub fn new(task_prompt: impl Into<String>) -> Self {
        Self { task_prompt: task_prompt.into(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = [
            ("target_size", self.target_size),
            ("beam_width", self.beam_width),
            ("anchor_capacity", self.anchor_capacity),
            ("max_iterations", self.max_iterations as usize),
            ("batch_size", self.batch_size),
            ("num_gradients", self.num_gradients),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(EngineError::Config(format!("{name} must be positive")));
            }
        }
        if self.task_prompt.trim().is_empty() {
            return Err(EngineError::Config("task_prompt must not be empty".into()));
        }
        self.kernel.validate()?;
        self.threshold.validate()
    }
}

/// A prompt variant with lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explorer {
    pub id: String,
    pub prompt: String,
    pub parent: Option<String>,
    pub depth: u32,
    pub embedding: Embedding,
    #[serde(skip)]
    pub token_set: TokenSet,
}

impl KernelItem for Explorer {
    fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    fn tokens(&self) -> &TokenSet {
        &self.token_set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct RunState {
    /// D, append-only.
    pub dataset: Vec<DataInstance>,
    /// Phi
    pub anchor: AnchorState,
    /// E
    pub beam: Vec<Explorer>,
    pub iteration: u32,
    pub tau0: f64,
    /// Data kernel; the bandwidth is frozen once resolved.
    pub kernel: Option<Kernel>,
    seen: HashSet<String>,
    next_explorer: u64,
    dpp_draws: u64,
}

#[derive(Debug, Clone)]
pub struct ExploreOutcome {
    pub accepted: Vec<String>,
    pub rejected: Vec<String>,
    pub processed: usize,
    pub successors: Vec<Explorer>,
    pub calls: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dataset: Vec<DataInstance>,
    pub report: Option<DiversityReport>,
    pub ledger: LedgerSnapshot,
    pub status: RunStatus,
    pub iterations: u32,
    pub tau0: f64,
    pub kernel: Option<Kernel>,
    pub trace: Option<Vec<TraceEvent>>,
    pub beam: Vec<Explorer>,
    pub warnings: Vec<String>,
}

/// Resumable run state at an iteration boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seed: u64,
    pub iteration: u32,
    pub tau0: f64,
    pub kernel: Option<Kernel>,
    pub dataset: Vec<InstanceRecord>,
    pub embeddings: Vec<Embedding>,
    pub anchor_ids: Vec<String>,
    pub anchor_kernel: Vec<f64>,
    pub anchor_chol: Vec<f64>,
    pub anchor_logdet: f64,
    pub beam: Vec<Explorer>,
    pub next_explorer: u64,
    pub dpp_draws: u64,
    pub ledger: LedgerSnapshot,
    pub provider_cursor: Option<u64>,
    pub trace: Option<Vec<TraceEvent>>,
    pub warnings: Vec<String>,
}

/// Independent sub-seed for a named random stream.
pub(crate) fn derive_seed(seed: u64, stream: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub struct Engine<'g> {
    config: RunConfig,
    gateway: &'g Gateway,
    stopwords: StopWords,
    state: RunState,
    trace: Option<Vec<TraceEvent>>,
    warnings: Vec<String>,
    started: bool,
}

impl<'g> Engine<'g> {
    pub fn new(config: RunConfig, gateway: &'g Gateway) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            trace: config.record_trace.then(Vec::new),
            config,
            gateway,
            stopwords: StopWords::english(),
            state: RunState {
                dataset: Vec::new(),
                anchor: AnchorState::empty(),
                beam: Vec::new(),
                iteration: 0,
                tau0: 0.0,
                kernel: None,
                seen: HashSet::new(),
                next_explorer: 0,
                dpp_draws: 0,
            },
            warnings: Vec::new(),
            started: false,
        })
    }

    pub fn with_stopwords(mut self, stopwords: StopWords) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn trace(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    fn record(&mut self, event: TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(event);
        }
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Sets tau0 (probing if not given) and embeds the seed explorer.
    pub fn start(&mut self) -> Result<(), EngineError> {
        if self.started {
            return Ok(());
        }
        let cfg = &self.config;
        self.state.tau0 = match cfg.threshold.tau0 {
            Some(t) => t,
            None => {
                let init = init_threshold(
                    &cfg.task_prompt,
                    self.gateway,
                    &cfg.kernel,
                    &cfg.threshold,
                    cfg.batch_size,
                    cfg.seed,
                )?;
                self.state.kernel = Some(init.kernel);
                self.record(TraceEvent::Probe {
                    count: init.probes.len(),
                    selected: init.selected.clone(),
                    det: init.det,
                    tau0: init.tau0,
                    sigma: init.kernel.sigma,
                    fallback: init.fallback,
                });
                init.tau0
            }
        };
        let task = self.config.task_prompt.clone();
        let seed = self.new_explorers(std::slice::from_ref(&task), None)?;
        self.state.beam = seed;
        self.started = true;
        Ok(())
    }

    fn new_explorers(&mut self, prompts: &[String], parent: Option<&Explorer>) -> Result<Vec<Explorer>, EngineError> {
        if prompts.is_empty() {
            return Ok(Vec::new());
        }
        let embeddings = self.gateway.embed(prompts)?;
        Ok(prompts
            .iter()
            .zip(embeddings)
            .map(|(p, embedding)| {
                let id = format!("e{}", self.state.next_explorer);
                self.state.next_explorer += 1;
                Explorer {
                    id,
                    prompt: p.clone(),
                    parent: parent.map(|e| e.id.clone()),
                    depth: parent.map_or(0, |e| e.depth + 1),
                    embedding,
                    token_set: tokenize(p, &self.stopwords),
                }
            })
            .collect())
    }

    pub fn tau(&self) -> f64 {
        self.config.threshold.at(self.state.tau0, self.state.iteration, self.config.max_iterations)
    }

    /// One explore call for `explorer` at threshold `tau`. Returns `None`
    /// when generation failed and the explorer was skipped.
    pub fn explore(&mut self, explorer: &Explorer, tau: f64) -> Result<Option<ExploreOutcome>, EngineError> {
        let before = self.gateway.ledger().snapshot();
        let iteration = self.state.iteration;
        let batch = match self.gateway.generate_batch(&explorer.prompt, self.config.batch_size) {
            Ok(b) => b,
            Err(e) => {
                self.warn(format!("explorer {} skipped: {e}", explorer.id));
                return Ok(None);
            }
        };
        self.record(TraceEvent::Generate {
            iteration,
            explorer_id: explorer.id.clone(),
            requested: self.config.batch_size,
            returned: batch.instances.len(),
            warnings: batch.warnings.clone(),
        });

        let mut fresh: Vec<String> = Vec::new();
        for t in &batch.instances {
            if !self.state.seen.contains(t) && !fresh.contains(t) {
                fresh.push(t.clone());
            }
        }
        let embeddings = if fresh.is_empty() {
            Vec::new()
        } else {
            match self.gateway.embed(&fresh) {
                Ok(e) => e,
                Err(e) => {
                    self.warn(format!("explorer {} skipped: {e}", explorer.id));
                    return Ok(None);
                }
            }
        };
        if self.state.kernel.is_none() && !embeddings.is_empty() {
            let refs: Vec<&Embedding> = embeddings.iter().collect();
            self.state.kernel = Some(self.config.kernel.resolve(&refs)?);
        }
        let by_text: HashMap<String, Embedding> = fresh.into_iter().zip(embeddings).collect();

        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        let mut processed = 0;
        for text in &batch.instances {
            if self.state.dataset.len() >= self.config.target_size {
                break;
            }
            processed += 1;
            if self.state.seen.contains(text) {
                rejected.push(text.clone());
                self.record(TraceEvent::Reject {
                    iteration,
                    explorer_id: explorer.id.clone(),
                    text: text.clone(),
                    gamma: None,
                    tau,
                    reason: RejectReason::Duplicate,
                });
                continue;
            }
            let embedding = by_text[text].clone();
            let kernel = self.state.kernel.expect("kernel resolved before first test");
            let mut item = DataInstance::new(format!("d{:05}", self.state.dataset.len()), text, embedding, &self.stopwords);
            item.explorer_id = explorer.id.clone();
            item.iteration = iteration;
            let sims = self.state.anchor.similarities(&item, &kernel)?;
            let gamma = self.state.anchor.gain(&sims, kernel.self_similarity())?.value();
            if gamma >= tau && gamma > GAIN_FLOOR {
                item.marginal_gain = gamma.min(1.0);
                self.state.anchor = self.state.anchor.extend(item.clone(), &sims, kernel.self_similarity())?;
                self.state.seen.insert(text.clone());
                self.record(TraceEvent::Accept {
                    iteration,
                    explorer_id: explorer.id.clone(),
                    instance_id: item.id.clone(),
                    gamma,
                    tau,
                });
                accepted.push(item.id.clone());
                self.state.dataset.push(item);
            } else {
                rejected.push(text.clone());
                self.record(TraceEvent::Reject {
                    iteration,
                    explorer_id: explorer.id.clone(),
                    text: text.clone(),
                    gamma: Some(gamma),
                    tau,
                    reason: RejectReason::Threshold,
                });
            }
        }

        let mut successors = Vec::new();
        if !rejected.is_empty() && self.config.refinement && self.state.dataset.len() < self.config.target_size {
            successors = self.refine(explorer, &rejected)?;
        }
        let calls = self.gateway.ledger().snapshot().since(&before).generation_calls();
        self.record(TraceEvent::Explore {
            iteration,
            explorer_id: explorer.id.clone(),
            returned: batch.instances.len(),
            processed,
            accepted: accepted.len(),
            rejected: rejected.len(),
            successors: successors.iter().map(|e| e.id.clone()).collect(),
            calls,
        });
        Ok(Some(ExploreOutcome { accepted, rejected, processed, successors, calls }))
    }

    /// Critique + edit calls; failures only cost the successors.
    fn refine(&mut self, explorer: &Explorer, rejected: &[String]) -> Result<Vec<Explorer>, EngineError> {
        let rejected: Vec<&str> = rejected.iter().map(String::as_str).collect();
        let existing: Vec<String> = self.state.anchor.items().iter().map(|d| d.text.clone()).collect();
        let existing: Vec<&str> = existing.iter().map(String::as_str).collect();
        let task = self.config.task_prompt.clone();
        let gradients =
            match self.gateway.get_gradients(&task, &explorer.prompt, &rejected, &existing, self.config.num_gradients) {
                Ok(g) => g,
                Err(e) => {
                    self.warn(format!("gradient critique failed for {}: {e}", explorer.id));
                    return Ok(Vec::new());
                }
            };
        for w in gradients.warnings {
            self.warn(format!("{}: {w}", explorer.id));
        }
        if gradients.items.is_empty() {
            return Ok(Vec::new());
        }
        let prompts = match self.gateway.apply_gradients(&task, &explorer.prompt, &gradients.items) {
            Ok(p) => p,
            Err(e) => {
                self.warn(format!("gradient edit failed for {}: {e}", explorer.id));
                return Ok(Vec::new());
            }
        };
        for w in prompts.warnings {
            self.warn(format!("{}: {w}", explorer.id));
        }
        match self.new_explorers(&prompts.items, Some(explorer)) {
            Ok(e) => Ok(e),
            Err(EngineError::Gateway(e)) => {
                self.warn(format!("embedding successors of {} failed: {e}", explorer.id));
                Ok(Vec::new())
            }
            Err(e) => Err(e),
        }
    }

    /// Shrinks the anchor set back to `k` items by k-DPP sampling.
    fn prune(&mut self) -> Result<(), EngineError> {
        let k = self.config.anchor_capacity;
        if self.state.anchor.len() <= k {
            return Ok(());
        }
        let before = self.state.anchor.len();
        let seed = derive_seed(self.config.seed, "prune", self.state.dpp_draws);
        self.state.dpp_draws += 1;
        let sample = sample_k_dpp(&self.state.anchor.kernel_matrix(), k, seed)?;
        self.state.anchor = self.state.anchor.select(&sample.indices)?;
        let kept = self.state.anchor.items().iter().map(|d| d.id.clone()).collect();
        self.record(TraceEvent::Prune { iteration: self.state.iteration, before, kept, fallback: sample.fallback });
        Ok(())
    }

    fn select_beam(&mut self, pool: Vec<Explorer>) -> Result<(), EngineError> {
        let b = self.config.beam_width;
        let iteration = self.state.iteration;
        if pool.is_empty() {
            return Ok(());
        }
        let pool_size = pool.len();
        let (beam, mode) = if pool.len() <= b {
            (pool, "all")
        } else {
            let seed = derive_seed(self.config.seed, "beam", iteration as u64);
            let indices = match self.config.successor_selection {
                SuccessorSelection::Dpp => {
                    let refs: Vec<&Embedding> = pool.iter().map(|e| &e.embedding).collect();
                    let sigma = median_bandwidth(&refs)?;
                    let explorer_kernel = KernelConfig {
                        w_rbf: 1.0,
                        w_lex: 0.0,
                        bandwidth: Bandwidth::Fixed(sigma),
                        jitter: self.config.kernel.jitter,
                    }
                    .resolve(&[])?;
                    sample_k_dpp(&build_kernel(&pool, &explorer_kernel)?, b, seed)?.indices
                }
                SuccessorSelection::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), b).into_vec();
                    idx.sort_unstable();
                    idx
                }
            };
            let mode = match self.config.successor_selection {
                SuccessorSelection::Dpp => "dpp",
                SuccessorSelection::Random => "random",
            };
            (indices.into_iter().map(|i| pool[i].clone()).collect(), mode)
        };
        self.record(TraceEvent::BeamSelect {
            iteration,
            pool: pool_size,
            selected: beam.iter().map(|e: &Explorer| e.id.clone()).collect(),
            mode: mode.into(),
        });
        self.state.beam = beam;
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.state.dataset.len() >= self.config.target_size
    }

    pub fn is_finished(&self) -> bool {
        self.is_complete() || self.state.iteration >= self.config.max_iterations
    }

    /// One outer iteration over the beam. Returns true once the dataset is
    /// full.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        self.start()?;
        let tau = self.tau();
        let beam = self.state.beam.clone();
        let mut pool = Vec::new();
        let mut any = false;
        for explorer in &beam {
            if let Some(out) = self.explore(explorer, tau)? {
                any = true;
                pool.extend(out.successors);
            }
            self.prune()?;
            if self.is_complete() {
                self.state.iteration += 1;
                return Ok(true);
            }
        }
        if !any {
            let last = self.warnings.last().cloned().unwrap_or_default();
            return Err(EngineError::AllExplorersFailed { iteration: self.state.iteration, last });
        }
        self.select_beam(pool)?;
        self.state.iteration += 1;
        Ok(false)
    }

    pub fn run_to_end(&mut self, mut checkpoint: impl FnMut(&Snapshot)) -> Result<(), EngineError> {
        self.start()?;
        while !self.is_finished() {
            let done = self.step()?;
            if !done {
                checkpoint(&self.snapshot());
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let (k, l) = self.state.anchor.packed();
        Snapshot {
            seed: self.config.seed,
            iteration: self.state.iteration,
            tau0: self.state.tau0,
            kernel: self.state.kernel,
            dataset: self.state.dataset.iter().map(|d| InstanceRecord::from_instance(d, "engine")).collect(),
            embeddings: self.state.dataset.iter().map(|d| d.embedding.clone()).collect(),
            anchor_ids: self.state.anchor.items().iter().map(|d| d.id.clone()).collect(),
            anchor_kernel: k.to_vec(),
            anchor_chol: l.to_vec(),
            anchor_logdet: self.state.anchor.logdet(),
            beam: self.state.beam.clone(),
            next_explorer: self.state.next_explorer,
            dpp_draws: self.state.dpp_draws,
            ledger: self.gateway.ledger().snapshot(),
            provider_cursor: self.gateway.chat_provider().cursor(),
            trace: self.trace.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Continues a run from `snapshot`, restoring the ledger and the
    /// provider's replay position.
    pub fn resume(config: RunConfig, gateway: &'g Gateway, snapshot: Snapshot) -> Result<Self, EngineError> {
        if snapshot.seed != config.seed {
            return Err(EngineError::Snapshot(format!("seed {} != {}", snapshot.seed, config.seed)));
        }
        if snapshot.dataset.len() != snapshot.embeddings.len() {
            return Err(EngineError::Snapshot("dataset and embeddings differ in length".into()));
        }
        let mut engine = Self::new(config, gateway)?;
        let sw = engine.stopwords.clone();
        let dataset: Vec<DataInstance> = snapshot
            .dataset
            .into_iter()
            .zip(snapshot.embeddings)
            .map(|(r, e)| r.into_instance(e, &sw))
            .collect();
        let anchor_items = snapshot
            .anchor_ids
            .iter()
            .map(|id| {
                dataset
                    .iter()
                    .find(|d| &d.id == id)
                    .cloned()
                    .ok_or_else(|| EngineError::Snapshot(format!("anchor item {id} not in dataset")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let anchor =
            AnchorState::from_packed(anchor_items, snapshot.anchor_kernel, snapshot.anchor_chol, snapshot.anchor_logdet)?;
        let mut beam = snapshot.beam;
        for e in &mut beam {
            e.token_set = tokenize(&e.prompt, &sw);
        }
        gateway.ledger().restore(&snapshot.ledger);
        if let Some(c) = snapshot.provider_cursor {
            gateway.chat_provider().restore_cursor(c);
        }
        engine.state = RunState {
            seen: dataset.iter().map(|d| d.text.clone()).collect(),
            dataset,
            anchor,
            beam,
            iteration: snapshot.iteration,
            tau0: snapshot.tau0,
            kernel: snapshot.kernel,
            next_explorer: snapshot.next_explorer,
            dpp_draws: snapshot.dpp_draws,
        };
        engine.trace = if engine.config.record_trace { Some(snapshot.trace.unwrap_or_default()) } else { None };
        engine.warnings = snapshot.warnings;
        engine.started = true;
        Ok(engine)
    }

    pub fn finish(self) -> Result<RunOutput, EngineError> {
        let ledger = self.gateway.ledger().snapshot();
        let status = if self.is_complete() { RunStatus::Completed } else { RunStatus::BudgetExhausted };
        let mut warnings = self.warnings;
        let report = match (self.state.kernel, self.state.dataset.len()) {
            (Some(kernel), n) if n >= 2 => {
                let mut r = diversity_report("engine", &self.state.dataset, &kernel, self.config.vendi_kernel, ledger)?;
                r.rejection_trace = self.trace.as_deref().map(|t| rejection_rate_trace(Some(t))).transpose()?;
                r.warnings = warnings.clone();
                Some(r)
            }
            _ => {
                warnings.push("fewer than two instances; no diversity report".into());
                None
            }
        };
        Ok(RunOutput {
            dataset: self.state.dataset,
            report,
            ledger,
            status,
            iterations: self.state.iteration,
            tau0: self.state.tau0,
            kernel: self.state.kernel,
            trace: self.trace,
            beam: self.state.beam,
            warnings,
        })
    }
}

/// Runs the full loop.
pub fn run(config: RunConfig, gateway: &Gateway) -> Result<RunOutput, EngineError> {
    let mut engine = Engine::new(config, gateway)?;
    engine.run_to_end(|_| {})?;
    engine.finish()
}
