//! Comparison generators sharing the engine's gateway, kernel and report
//! format.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpp::{sample_k_dpp, DppError};
use crate::gateway::{parse_numbered, templates, CallCategory, Gateway, GatewayError, LedgerSnapshot};
use crate::kernel::{build_kernel, DataInstance, Embedding, Kernel, KernelConfig, KernelError, StopWords};
use crate::metrics::{diversity_report, DiversityReport, MetricsError, VendiKernel};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid baseline config: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dpp(#[from] DppError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    #[default]
    Default,
    Temp,
    Diverse,
    History,
    Hierarchical,
    SubsetSelect,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Default,
        BaselineKind::Temp,
        BaselineKind::Diverse,
        BaselineKind::History,
        BaselineKind::Hierarchical,
        BaselineKind::SubsetSelect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Default => "default",
            BaselineKind::Temp => "temp",
            BaselineKind::Diverse => "diverse",
            BaselineKind::History => "history",
            BaselineKind::Hierarchical => "hierarchical",
            BaselineKind::SubsetSelect => "subset_select",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|k| k.name() == norm).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown baseline {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Used by `temp` and for the `subset_select` universe.
    pub temperature: f64,
    pub history_window: usize,
    pub subtopics: usize,
    pub universe_multiplier: usize,
    pub diverse_instruction: String,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            kind: BaselineKind::Default,
            temperature: 2.0,
            history_window: 20,
            subtopics: 10,
            universe_multiplier: 10,
            diverse_instruction: templates::DIVERSE_INSTRUCTION.to_string(),
        }
    }
}

impl BaselineSpec {
    pub fn of(kind: BaselineKind) -> Self {
        Self { kind, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.subtopics == 0 || self.universe_multiplier == 0 || self.history_window == 0 {
            return Err(BaselineError::Config(
                "subtopics, universe_multiplier and history_window must be positive".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BaselineError::Config(format!("temperature must be in [0, 2], got {}", self.temperature)));
        }
        Ok(())
    }

    /// Generation calls needed for `l` instances at batch size `batch`.
    pub fn expected_calls(&self, l: usize, batch: usize) -> u64 {
        let per_batch = l.div_ceil(batch) as u64;
        match self.kind {
            BaselineKind::Default | BaselineKind::Temp | BaselineKind::Diverse | BaselineKind::History => per_batch,
            BaselineKind::Hierarchical => (l.div_ceil(self.subtopics) * (self.subtopics + 1)) as u64,
            BaselineKind::SubsetSelect => self.universe_multiplier as u64 * per_batch,
        }
    }
}

/// The most recent `capacity` accepted texts.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    capacity: usize,
    items: VecDeque<String>,
}

impl HistoryWindow {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, text: String) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(text);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn recent(&self) -> Vec<&str> {
        self.items.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub kind: BaselineKind,
    pub dataset: Vec<DataInstance>,
    pub report: Option<DiversityReport>,
    pub ledger: LedgerSnapshot,
    pub kernel: Kernel,
    pub warnings: Vec<String>,
}

/// Common inputs for [`run_baseline`].
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun<'a> {
    pub task_prompt: &'a str,
    pub target_size: usize,
    pub batch_size: usize,
    pub kernel: KernelConfig,
    pub vendi_kernel: VendiKernel,
    pub seed: u64,
}

/// (text, call index) pairs.
type Generated = Vec<(String, u32)>;

fn repeated(
    gateway: &Gateway,
    l: usize,
    batch: usize,
    temperature: Option<f64>,
    warnings: &mut Vec<String>,
    mut prompt: impl FnMut() -> String,
    mut on_item: impl FnMut(&str),
) -> Result<Generated, BaselineError> {
    let mut out = Vec::with_capacity(l);
    let mut call = 0u32;
    // Under-delivery may need extra calls; cap them.
    let max_calls = 4 * l.div_ceil(batch) as u32 + 4;
    while out.len() < l && call < max_calls {
        let want = batch.min(l - out.len()).max(1);
        let b = gateway.generate_batch_with(&prompt(), batch.max(want), CallCategory::Generate, temperature)?;
        warnings.extend(b.warnings);
        for t in b.instances.into_iter().take(l - out.len()) {
            on_item(&t);
            out.push((t, call));
        }
        call += 1;
    }
    Ok(out)
}

fn hierarchical(
    gateway: &Gateway,
    spec: &BaselineSpec,
    task: &str,
    l: usize,
    warnings: &mut Vec<String>,
) -> Result<Generated, BaselineError> {
    let mut out = Vec::with_capacity(l);
    for round in 0..l.div_ceil(spec.subtopics) {
        let raw = gateway.chat(
            CallCategory::Generate,
            None,
            &templates::subtopic_list(task, spec.subtopics),
            None,
            None,
        )?;
        let mut topics = parse_numbered(&raw);
        if topics.is_empty() {
            warnings.push(format!("round {round}: no subtopics parsed"));
            topics.push(task.to_string());
        }
        for i in 0..spec.subtopics {
            let topic = &topics[i % topics.len()];
            let b = gateway.generate_batch(&templates::for_subtopic(task, topic), 1)?;
            warnings.extend(b.warnings);
            if out.len() < l {
                out.extend(b.instances.into_iter().take(1).map(|t| (t, round as u32)));
            }
        }
    }
    Ok(out)
}

pub fn run_baseline(spec: &BaselineSpec, run: &BaselineRun<'_>, gateway: &Gateway) -> Result<BaselineOutput, BaselineError> {
    spec.validate()?;
    run.kernel.validate()?;
    if run.target_size == 0 || run.batch_size == 0 {
        return Err(BaselineError::Config("target_size and batch_size must be positive".into()));
    }
    let (task, l, batch) = (run.task_prompt, run.target_size, run.batch_size);
    let mut warnings = Vec::new();
    let generated = match spec.kind {
        BaselineKind::Default => repeated(gateway, l, batch, None, &mut warnings, || task.to_string(), |_| {})?,
        BaselineKind::Temp => {
            repeated(gateway, l, batch, Some(spec.temperature), &mut warnings, || task.to_string(), |_| {})?
        }
        BaselineKind::Diverse => {
            let prompt = format!("{task}\n{}", spec.diverse_instruction);
            repeated(gateway, l, batch, None, &mut warnings, || prompt.clone(), |_| {})?
        }
        BaselineKind::History => {
            let window = std::cell::RefCell::new(HistoryWindow::new(spec.history_window));
            repeated(
                gateway,
                l,
                batch,
                None,
                &mut warnings,
                || templates::with_history(task, &window.borrow().recent()),
                |t| window.borrow_mut().push(t.to_string()),
            )?
        }
        BaselineKind::Hierarchical => hierarchical(gateway, spec, task, l, &mut warnings)?,
        BaselineKind::SubsetSelect => {
            let per_round = l.div_ceil(batch) * batch;
            let mut universe = Vec::new();
            for round in 0..spec.universe_multiplier {
                let part = repeated(gateway, per_round, batch, Some(spec.temperature), &mut warnings, || task.to_string(), |_| {})?;
                universe.extend(part.into_iter().map(|(t, c)| (t, c + (round * l.div_ceil(batch)) as u32)));
            }
            universe
        }
    };
    if generated.is_empty() {
        return Err(BaselineError::Config("baseline produced no instances".into()));
    }

    let texts: Vec<String> = generated.iter().map(|(t, _)| t.clone()).collect();
    let embeddings = gateway.embed(&texts)?;
    let first: Vec<&Embedding> = embeddings.iter().take(batch.max(2)).collect();
    let kernel = run.kernel.resolve(&first)?;
    let stopwords = StopWords::english();
    let mut items: Vec<DataInstance> = generated
        .into_iter()
        .zip(embeddings)
        .enumerate()
        .map(|(i, ((t, call), e))| {
            let mut d = DataInstance::new(format!("d{i:05}"), t, e, &stopwords);
            d.explorer_id = spec.kind.name().to_string();
            d.iteration = call;
            d
        })
        .collect();

    if spec.kind == BaselineKind::SubsetSelect && items.len() > l {
        let k = build_kernel(&items, &kernel)?;
        let sample = sample_k_dpp(&k, l, run.seed)?;
        if sample.fallback {
            warnings.push("universe kernel rank below l; used greedy selection".into());
        }
        items = sample.indices.iter().map(|&i| items[i].clone()).collect();
    }

    let ledger = gateway.ledger().snapshot();
    let report = if items.len() >= 2 {
        let mut r = diversity_report(spec.kind.name(), &items, &kernel, run.vendi_kernel, ledger)?;
        r.warnings = warnings.clone();
        Some(r)
    } else {
        None
    };
    Ok(BaselineOutput { kind: spec.kind, dataset: items, report, ledger, kernel, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockWorldConfig;

    const TASK: &str = "Write a one-sentence scene description.";

    fn run_kind(kind: BaselineKind, l: usize, seed: u64) -> BaselineOutput {
        let gw = Gateway::mock(MockWorldConfig::standard(seed));
        let run = BaselineRun {
            task_prompt: TASK,
            target_size: l,
            batch_size: 10,
            kernel: KernelConfig::default(),
            vendi_kernel: VendiKernel::Combined,
            seed,
        };
        run_baseline(&BaselineSpec::of(kind), &run, &gw).unwrap()
    }

    #[test]
    fn call_counts_match_formulas() {
        for kind in BaselineKind::ALL {
            let l = if kind == BaselineKind::SubsetSelect { 20 } else { 50 };
            let out = run_kind(kind, l, 1);
            let spec = BaselineSpec::of(kind);
            assert_eq!(out.ledger.generation_calls(), spec.expected_calls(l, 10), "{kind}");
            assert_eq!(out.dataset.len(), l, "{kind}");
            assert!(out.report.is_some());
        }
        assert_eq!(BaselineSpec::of(BaselineKind::Hierarchical).expected_calls(500, 10), 550);
        assert_eq!(BaselineSpec::of(BaselineKind::Default).expected_calls(500, 10), 50);
        assert_eq!(BaselineSpec::of(BaselineKind::SubsetSelect).expected_calls(500, 10), 500);
        assert_eq!(BaselineSpec::of(BaselineKind::Temp).expected_calls(45, 10), 5);
    }

    #[test]
    fn history_window_is_bounded_and_recent() {
        let mut w = HistoryWindow::new(3);
        for i in 0..5 {
            w.push(i.to_string());
            assert!(w.len() <= 3);
        }
        assert_eq!(w.recent(), vec!["2", "3", "4"]);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("subset-select".parse::<BaselineKind>().unwrap(), BaselineKind::SubsetSelect);
        assert_eq!("Hierarchical".parse::<BaselineKind>().unwrap(), BaselineKind::Hierarchical);
        assert!("nucleus".parse::<BaselineKind>().is_err());
    }

    #[test]
    fn every_record_names_its_kind() {
        let out = run_kind(BaselineKind::Diverse, 20, 2);
        assert!(out.dataset.iter().all(|d| d.explorer_id == "diverse"));
        assert_eq!(out.report.unwrap().method, "diverse");
    }
}
