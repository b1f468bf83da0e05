use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use divgen_core::baselines::{BaselineKind, BaselineSpec};
use divgen_core::engine::{RunConfig, SuccessorSelection, ThresholdConfig};
use divgen_core::gateway::{Gateway, MockWorldConfig, ProviderConfig, ProviderKind};
use divgen_core::kernel::KernelConfig;
use divgen_core::metrics::{Rubric, VendiKernel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The whole run configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Task prompt p.
    pub task: String,
    pub seed: u64,
    pub engine: EngineSection,
    pub kernel: KernelConfig,
    pub schedule: ThresholdConfig,
    pub provider: ProviderConfig,
    pub baseline: BaselineSection,
    pub mock: MockSection,
    pub judge: Option<JudgeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub target_size: usize,
    pub beam_width: usize,
    pub anchor_capacity: usize,
    pub max_iterations: u32,
    pub batch_size: usize,
    pub num_gradients: usize,
    pub refinement: bool,
    pub successor_selection: SuccessorSelection,
    pub vendi_kernel: VendiKernel,
    pub record_trace: bool,
}

impl Default for EngineSection {
    fn default() -> Self {
        let d = RunConfig::default();
        Self {
            target_size: d.target_size,
            beam_width: d.beam_width,
            anchor_capacity: d.anchor_capacity,
            max_iterations: d.max_iterations,
            batch_size: d.batch_size,
            num_gradients: d.num_gradients,
            refinement: d.refinement,
            successor_selection: d.successor_selection,
            vendi_kernel: d.vendi_kernel,
            record_trace: false,
        }
    }
}

/// Baseline parameters; the kind comes from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub temperature: f64,
    pub history_window: usize,
    pub subtopics: usize,
    pub universe_multiplier: usize,
    pub diverse_instruction: String,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let d = BaselineSpec::default();
        Self {
            temperature: d.temperature,
            history_window: d.history_window,
            subtopics: d.subtopics,
            universe_multiplier: d.universe_multiplier,
            diverse_instruction: d.diverse_instruction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSection {
    pub concentration: f64,
    pub stock_rate: f64,
    pub focus_strength: f64,
}

impl Default for MockSection {
    fn default() -> Self {
        let d = MockWorldConfig::standard(0);
        Self { concentration: d.concentration, stock_rate: d.stock_rate, focus_strength: d.focus_strength }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    pub panel: Vec<String>,
    /// Rubric template file with `{task}` and `{output}` placeholders.
    #[serde(default)]
    pub rubric_file: Option<PathBuf>,
    #[serde(default = "default_max_score")]
    pub max_score: f64,
}

fn default_max_score() -> f64 {
    25.0
}

/// Flags shared by every command that reads a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub set: Vec<String>,
    pub mock: bool,
    pub trace: bool,
}

impl Config {
    /// Reads `path` (or defaults) and applies `--set`, `--seed`, `--mock`
    /// and `--trace` in that order.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
            None => String::new(),
        };
        let name = path.map_or("<defaults>".to_string(), |p| p.display().to_string());
        // Parsing the file as written keeps line and column diagnostics.
        let mut config: Config = toml::from_str(&text).map_err(|e| anyhow!("{name}: {e}"))?;
        if !overrides.set.is_empty() {
            let mut table: toml::Table = toml::from_str(&text).map_err(|e| anyhow!("{name}: {e}"))?;
            for kv in &overrides.set {
                apply_override(&mut table, kv)?;
            }
            config = Config::deserialize(toml::Value::Table(table)).map_err(|e| anyhow!("after --set overrides: {e}"))?;
        }
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        if overrides.mock {
            config.provider.kind = ProviderKind::Mock;
        }
        if overrides.trace {
            config.engine.record_trace = true;
        }
        if let Some(judge) = &mut config.judge {
            if let (Some(rel), Some(dir)) = (&judge.rubric_file, path.and_then(Path::parent)) {
                if rel.is_relative() {
                    judge.rubric_file = Some(dir.join(rel));
                }
            }
        }
        Ok(config)
    }

    pub fn require_task(&self) -> anyhow::Result<()> {
        if self.task.trim().is_empty() {
            bail!("`task` must be set to the task prompt");
        }
        Ok(())
    }

    pub fn run_config(&self) -> RunConfig {
        let e = &self.engine;
        RunConfig {
            task_prompt: self.task.clone(),
            target_size: e.target_size,
            beam_width: e.beam_width,
            anchor_capacity: e.anchor_capacity,
            max_iterations: e.max_iterations,
            batch_size: e.batch_size,
            num_gradients: e.num_gradients,
            refinement: e.refinement,
            successor_selection: e.successor_selection,
            kernel: self.kernel,
            threshold: self.schedule,
            vendi_kernel: e.vendi_kernel,
            seed: self.seed,
            record_trace: e.record_trace,
        }
    }

    pub fn baseline_spec(&self, kind: BaselineKind) -> BaselineSpec {
        let b = &self.baseline;
        BaselineSpec {
            kind,
            temperature: b.temperature,
            history_window: b.history_window,
            subtopics: b.subtopics,
            universe_multiplier: b.universe_multiplier,
            diverse_instruction: b.diverse_instruction.clone(),
        }
    }

    pub fn rubric(&self) -> anyhow::Result<Option<(Rubric, Vec<String>)>> {
        let Some(j) = &self.judge else { return Ok(None) };
        if j.panel.is_empty() {
            bail!("judge.panel must name at least one model");
        }
        let rubric = match &j.rubric_file {
            None => Rubric::generic(),
            Some(p) => Rubric {
                name: p.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned()),
                template: std::fs::read_to_string(p).with_context(|| format!("reading rubric {}", p.display()))?,
                max_score: j.max_score,
            },
        };
        Ok(Some((rubric, j.panel.clone())))
    }

    pub fn gateway(&self) -> anyhow::Result<Gateway> {
        match self.provider.kind {
            ProviderKind::Mock => {
                let world = MockWorldConfig {
                    concentration: self.mock.concentration,
                    stock_rate: self.mock.stock_rate,
                    focus_strength: self.mock.focus_strength,
                    ..MockWorldConfig::standard(self.seed)
                };
                world.validate()?;
                self.provider.validate()?;
                Ok(Gateway::mock_with(self.provider.clone(), world))
            }
            ProviderKind::Http => Ok(Gateway::http(self.provider.clone())?),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Git-style content hash of the resolved config.
    pub fn content_hash(&self) -> String {
        let body = self.to_toml();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()));
        h.update(body.as_bytes());
        hex(&h.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Applies one `section.key=value` override. Values are read as TOML
/// literals, falling back to a bare string.
fn apply_override(table: &mut toml::Table, kv: &str) -> anyhow::Result<()> {
    let (key, raw) = kv.split_once('=').ok_or_else(|| anyhow!("--set {kv:?}: expected key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("--set {kv:?}: empty key segment");
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| anyhow!("--set {kv:?}: `{p}` is not a section"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, set: &[&str]) -> anyhow::Result<Config> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        let o = Overrides { set: set.iter().map(|s| s.to_string()).collect(), ..Default::default() };
        Config::load(Some(&p), &o)
    }

    #[test]
    fn overrides_typed_and_nested() {
        let c = load("task = \"x\"\n[engine]\ntarget_size = 5\n", &["engine.target_size=7", "kernel.bandwidth=0.5", "task=hello world"]).unwrap();
        assert_eq!(c.engine.target_size, 7);
        assert_eq!(c.kernel.bandwidth, divgen_core::kernel::Bandwidth::Fixed(0.5));
        assert_eq!(c.task, "hello world");
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let e = load("task = \"x\"\n\n[engine]\ntarget_sise = 5\n", &[]).unwrap_err().to_string();
        assert!(e.contains("target_sise") && e.contains("line 4"), "{e}");
        let e = load("task = \"x\"\n", &["engine.beam=2"]).unwrap_err().to_string();
        assert!(e.contains("beam"), "{e}");
        assert!(load("task = \"x\"\n", &["novalue"]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = load("task = \"x\"\n", &[]).unwrap();
        let b = load("task = \"y\"\n", &[]).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), load("task = 'x'\n", &[]).unwrap().content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}
