//! Seeded offline stand-in for a chat model and an embedding model.
//!
//! The world is a set of topic clusters, each with a phrase bank and a few
//! "stock" texts. Unrefined prompts collapse toward cluster 0 and repeat
//! stock texts; higher temperature, diversity instructions, avoid-lists and
//! focus directives (from gradient edits or subtopics) broaden the output.
//! Embeddings are a pure function of the text: bank words pull toward their
//! cluster center, every word adds a hashed noise direction.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::templates::DIVERSE_INSTRUCTION;
use super::{ChatProvider, ChatRequest, ChatResponse, EmbeddingProvider, GatewayError, ProviderError};
use crate::kernel::{median_bandwidth, Embedding};

const BANK_NOISE: f64 = 1.2;
const OTHER_NOISE: f64 = 0.6;
const AVOID_DAMPING: f64 = 0.35;
const DIVERSE_DAMPING: f64 = 0.4;
const DIVERSE_STOCK: f64 = 0.6;
const REFINED_STOCK: f64 = 0.5;

const THEMES: [(&str, [&str; 11]); 10] = [
    ("ocean", ["wave", "tide", "coral", "reef", "harbor", "sailor", "gull", "current", "lighthouse", "shell", "dolphin"]),
    ("mountain", ["summit", "ridge", "glacier", "cliff", "trail", "peak", "avalanche", "boulder", "valley", "pine", "climber"]),
    ("city", ["subway", "skyscraper", "traffic", "alley", "neon", "taxi", "rooftop", "market", "sidewalk", "tram", "crowd"]),
    ("forest", ["oak", "moss", "fern", "fox", "canopy", "mushroom", "owl", "creek", "bark", "deer", "thicket"]),
    ("space", ["orbit", "comet", "nebula", "asteroid", "rocket", "astronaut", "galaxy", "satellite", "crater", "starlight", "telescope"]),
    ("kitchen", ["skillet", "garlic", "oven", "dough", "spice", "broth", "knife", "apron", "simmer", "pantry", "butter"]),
    ("music", ["violin", "melody", "drum", "chorus", "rhythm", "guitar", "piano", "concert", "tempo", "lyric", "trumpet"]),
    ("desert", ["dune", "cactus", "mirage", "oasis", "sandstorm", "camel", "canyon", "scorpion", "mesa", "caravan", "sun"]),
    ("winter", ["snow", "frost", "blizzard", "icicle", "sled", "fireplace", "mitten", "igloo", "sleet", "snowman", "scarf"]),
    ("library", ["book", "archive", "shelf", "manuscript", "librarian", "reading", "catalog", "ink", "atlas", "folio", "quill"]),
];

const MODIFIERS: [&str; 16] = [
    "quiet", "bright", "old", "small", "hidden", "gentle", "distant", "busy", "early", "late", "sudden", "strange",
    "warm", "slow", "golden", "lonely",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockCluster {
    pub name: String,
    pub center: Vec<f64>,
    /// Words characteristic of the cluster; the name is expected first.
    pub phrases: Vec<String>,
    /// Texts an unrefined prompt keeps coming back to.
    pub stock: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockWorldConfig {
    pub clusters: Vec<MockCluster>,
    /// Probability mass an unrefined prompt puts on cluster 0.
    pub concentration: f64,
    /// Probability an item is a verbatim stock text.
    pub stock_rate: f64,
    /// Mass put on the focused cluster when a prompt names one.
    pub focus_strength: f64,
    pub seed: u64,
}

impl MockWorldConfig {
    /// Ten themed clusters with orthonormal centers in 48 dimensions.
    pub fn standard(seed: u64) -> Self {
        let dim = 48;
        let mut geometry = ChaCha8Rng::seed_from_u64(0x6765_6f6d);
        let clusters = THEMES
            .iter()
            .enumerate()
            .map(|(c, (name, words))| {
                let mut center = vec![0.0; dim];
                center[c] = 1.0;
                let phrases: Vec<String> =
                    std::iter::once(name.to_string()).chain(words.iter().map(|w| w.to_string())).collect();
                let stock = (0..3).map(|_| compose(&phrases, &mut geometry)).collect();
                MockCluster { name: name.to_string(), center, phrases, stock }
            })
            .collect();
        Self { clusters, concentration: 0.8, stock_rate: 0.7, focus_strength: 0.85, seed }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(format!("mock world: {m}")));
        if self.clusters.len() < 2 {
            return bad("need at least 2 clusters".into());
        }
        for (name, v) in [
            ("concentration", self.concentration),
            ("stock_rate", self.stock_rate),
            ("focus_strength", self.focus_strength),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        let dim = self.clusters[0].center.len();
        for c in &self.clusters {
            if c.center.len() != dim || dim == 0 {
                return bad(format!("cluster {} has center dimension {}", c.name, c.center.len()));
            }
            if c.phrases.len() < 4 {
                return bad(format!("cluster {} needs at least 4 phrases", c.name));
            }
        }
        Ok(())
    }
}

fn compose<R: Rng + ?Sized>(phrases: &[String], rng: &mut R) -> String {
    let words: Vec<&String> = phrases.choose_multiple(rng, 4).collect();
    let m1 = MODIFIERS.choose(rng).expect("non-empty");
    let m2 = MODIFIERS.choose(rng).expect("non-empty");
    let mut lead = m1.to_string();
    lead[..1].make_ascii_uppercase();
    format!("{lead} {} with {m2} {}, {} and {}", words[0], words[1], words[2], words[3])
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase)
}

fn hash_seed(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn re(pattern: &'static str, cell: &'static OnceLock<Regex>) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

#[derive(Debug, Default, Clone, PartialEq)]
struct Signals {
    focus: Option<usize>,
    avoid_clusters: BTreeSet<usize>,
    avoid_texts: BTreeSet<String>,
    diverse: bool,
    refined: bool,
}

#[derive(Debug)]
pub struct MockWorld {
    config: MockWorldConfig,
    word_cluster: HashMap<String, usize>,
    name_cluster: HashMap<String, usize>,
    counter: AtomicU64,
    serial: Mutex<()>,
}

impl MockWorld {
    pub fn new(config: MockWorldConfig) -> Self {
        config.validate().expect("invalid mock world config");
        let mut word_cluster = HashMap::new();
        let mut name_cluster = HashMap::new();
        for (i, c) in config.clusters.iter().enumerate() {
            name_cluster.insert(c.name.to_lowercase(), i);
            for p in &c.phrases {
                word_cluster.entry(p.to_lowercase()).or_insert(i);
            }
        }
        Self { config, word_cluster, name_cluster, counter: AtomicU64::new(0), serial: Mutex::new(()) }
    }

    pub fn config(&self) -> &MockWorldConfig {
        &self.config
    }

    pub fn num_clusters(&self) -> usize {
        self.config.clusters.len()
    }

    pub fn cluster_name(&self, c: usize) -> &str {
        &self.config.clusters[c].name
    }

    /// Cluster whose bank words dominate `text`; lowest index on ties.
    pub fn cluster_of(&self, text: &str) -> Option<usize> {
        let mut counts = vec![0usize; self.num_clusters()];
        for w in words(text) {
            if let Some(&c) = self.word_cluster.get(&w) {
                counts[c] += 1;
            }
        }
        let (best, &n) = counts.iter().enumerate().rev().max_by_key(|(_, &n)| n)?;
        (n > 0).then_some(best)
    }

    fn word_vector(&self, word: &str) -> Vec<f64> {
        let dim = self.config.clusters[0].center.len();
        let mut rng = ChaCha8Rng::from_seed(hash_seed(&[b"mock-word", word.as_bytes()]));
        let mut noise: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = noise.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        match self.word_cluster.get(word) {
            Some(&c) => {
                let center = &self.config.clusters[c].center;
                noise.iter_mut().zip(center).for_each(|(x, m)| *x = m + BANK_NOISE * *x / norm);
            }
            None => noise.iter_mut().for_each(|x| *x *= OTHER_NOISE / norm),
        }
        noise
    }

    /// Deterministic, text-only embedding (not normalized).
    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        let dim = self.config.clusters[0].center.len();
        let mut acc = vec![0.0; dim];
        let mut any = false;
        for w in words(text) {
            any = true;
            acc.iter_mut().zip(self.word_vector(&w)).for_each(|(a, v)| *a += v);
        }
        if !any {
            acc = self.word_vector("<empty>");
        }
        acc
    }

    /// Median-heuristic bandwidth over a fixed, balanced sample of the world
    /// (five fresh items per cluster). Useful as a shared evaluation scale.
    pub fn reference_bandwidth(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7265_6665);
        let embs: Vec<Embedding> = self
            .config
            .clusters
            .iter()
            .flat_map(|c| (0..5).map(|_| compose(&c.phrases, &mut rng)).collect::<Vec<_>>())
            .map(|t| Embedding::new(self.embed_text(&t)).expect("non-zero embedding"))
            .collect();
        let refs: Vec<&Embedding> = embs.iter().collect();
        median_bandwidth(&refs).expect("sample is non-empty")
    }

    fn lookup_cluster(&self, name: &str) -> Option<usize> {
        let name = name.trim().to_lowercase();
        self.name_cluster.get(&name).copied().or_else(|| self.cluster_of(&name))
    }

    fn signals(&self, prompt: &str) -> Signals {
        static FOCUS: OnceLock<Regex> = OnceLock::new();
        let focus_re = re(r"(?i)(?:focus on theme|subtopic):\s*([^\n.]+)", &FOCUS);
        let mut s = Signals {
            focus: focus_re.captures_iter(prompt).last().and_then(|c| self.lookup_cluster(&c[1])),
            diverse: prompt.contains(DIVERSE_INSTRUCTION),
            refined: prompt.to_lowercase().contains("focus on theme:"),
            ..Default::default()
        };
        if let Some(at) = prompt.find("Avoid repeating these previously generated items") {
            for line in prompt[at..].lines().filter_map(|l| l.strip_prefix("- ")) {
                if let Some(c) = self.cluster_of(line) {
                    s.avoid_clusters.insert(c);
                }
                s.avoid_texts.insert(line.trim().to_string());
            }
        }
        s
    }

    fn base_weights(&self, concentration: f64) -> Vec<f64> {
        let n = self.num_clusters() as f64;
        (0..self.num_clusters())
            .map(|c| (1.0 - concentration) / n + if c == 0 { concentration } else { 0.0 })
            .collect()
    }

    /// Cluster sampling weights for a generation prompt.
    fn cluster_weights(&self, s: &Signals, temperature: f64) -> Vec<f64> {
        let t = temperature.max(1.0);
        let mut conc = self.config.concentration / t;
        if s.diverse {
            conc *= DIVERSE_DAMPING;
        }
        let mut w = self.base_weights(conc);
        for &c in &s.avoid_clusters {
            w[c] *= AVOID_DAMPING;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        if let Some(f) = s.focus {
            let fs = self.config.focus_strength;
            w.iter_mut().for_each(|x| *x *= 1.0 - fs);
            w[f] += fs;
        }
        w
    }

    fn stock_probability(&self, s: &Signals, temperature: f64) -> f64 {
        let mut p = self.config.stock_rate / temperature.max(1.0);
        if s.diverse {
            p *= DIVERSE_STOCK;
        }
        if s.refined {
            p *= REFINED_STOCK;
        }
        p
    }

    /// Probability of each cluster for a non-stock item generated from
    /// `prompt`.
    pub fn cluster_distribution(&self, prompt: &str, temperature: f64) -> Vec<f64> {
        self.cluster_weights(&self.signals(prompt), temperature)
    }

    fn generate(&self, prompt: &str, n: usize, temperature: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
        let s = self.signals(prompt);
        let w = self.cluster_weights(&s, temperature);
        let stock_p = self.stock_probability(&s, temperature);
        (0..n)
            .map(|_| {
                let c = sample_index(&w, rng);
                let cluster = &self.config.clusters[c];
                if rng.gen_bool(stock_p) {
                    let t = cluster.stock.choose(rng).expect("stock texts");
                    if !s.avoid_texts.contains(t) {
                        return t.clone();
                    }
                }
                compose(&cluster.phrases, rng)
            })
            .collect()
    }

    fn gradients(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        static NUM: OnceLock<Regex> = OnceLock::new();
        let m = re(r#"provide "(\d+)" reasons"#, &NUM)
            .captures(prompt)
            .and_then(|c| c[1].parse::<usize>().ok())
            .unwrap_or(3);
        let section = |start: &str, end: &str| -> String {
            let from = prompt.find(start).map_or(0, |i| i + start.len());
            let to = prompt[from..].find(end).map_or(prompt.len(), |j| from + j);
            prompt[from..to].to_string()
        };
        let rejected = section("LLM generated outputs:", "Existing data samples");
        let existing = section("Existing data samples in the set:", "The output was rejected");
        let mut rejected_counts = vec![0usize; self.num_clusters()];
        let mut seen = vec![0usize; self.num_clusters()];
        for line in rejected.lines() {
            if let Some(c) = self.cluster_of(line) {
                rejected_counts[c] += 1;
                seen[c] += 1;
            }
        }
        for line in existing.lines() {
            if let Some(c) = self.cluster_of(line) {
                seen[c] += 1;
            }
        }
        let over = rejected_counts.iter().enumerate().rev().max_by_key(|(_, &n)| n).map_or(0, |(c, _)| c);
        let mut candidates: Vec<usize> = (0..self.num_clusters()).filter(|&c| c != over).collect();
        candidates.shuffle(rng);
        candidates.sort_by_key(|&c| seen[c]);
        let over_name = self.cluster_name(over);
        candidates
            .iter()
            .take(m)
            .map(|&t| {
                format!(
                    "<START>The prompt lets outputs gravitate to {over_name} themes that the set already covers; \
                     ask for {} themes instead<END>",
                    self.cluster_name(t)
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn successors(&self, prompt: &str) -> String {
        static USER: OnceLock<Regex> = OnceLock::new();
        static TARGET: OnceLock<Regex> = OnceLock::new();
        static FOCUS: OnceLock<Regex> = OnceLock::new();
        let user = re(r#"(?s)Current user prompt: "(.*?)"\s*Gradient analysis"#, &USER)
            .captures(prompt)
            .map_or(String::new(), |c| c[1].to_string());
        let base = re(r"\s*Focus on theme: [^.]*\.", &FOCUS).replace_all(&user, "").trim().to_string();
        re(r"ask for (\w+) themes instead", &TARGET)
            .captures_iter(prompt)
            .map(|c| format!("<START>{base} Focus on theme: {}.<END>", &c[1]))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn subtopics(&self, prompt: &str, temperature: f64, rng: &mut ChaCha8Rng) -> String {
        static COUNT: OnceLock<Regex> = OnceLock::new();
        let n = re(r"List (\d+) distinct subtopics", &COUNT)
            .captures(prompt)
            .and_then(|c| c[1].parse::<usize>().ok())
            .unwrap_or(10);
        let w = self.base_weights(0.5 * self.config.concentration / temperature.max(1.0));
        (0..n)
            .map(|i| format!("{}. {}", i + 1, self.cluster_name(sample_index(&w, rng))))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn respond(&self, request: &ChatRequest) -> String {
        let _guard = self.serial.lock().expect("mock lock poisoned");
        let counter = self.counter.fetch_add(1, Ordering::SeqCst);
        let system = request.system_content();
        let user = request.user_content();
        let mut rng = ChaCha8Rng::from_seed(hash_seed(&[
            &self.config.seed.to_le_bytes(),
            &counter.to_le_bytes(),
            system.as_bytes(),
            user.as_bytes(),
        ]));
        if user.contains("Gradient analysis for improvement") {
            return self.successors(user);
        }
        if user.contains("Wrap each gradient with <START> and <END> tags") {
            return self.gradients(user, &mut rng);
        }
        if user.contains("Return the Overall score enclosed") {
            if request.model.contains("garbled") {
                return "I cannot score this.".into();
            }
            let score = 14 + rng.gen_range(0..9);
            return format!("Relevance: good\nOverall: {score} <START>{score}<END>");
        }
        if user.contains("distinct subtopics") {
            return self.subtopics(user, request.temperature, &mut rng);
        }
        static COUNT: OnceLock<Regex> = OnceLock::new();
        let n = re(r"Output exactly (\d+) items", &COUNT)
            .captures(system)
            .and_then(|c| c[1].parse::<usize>().ok())
            .unwrap_or(10);
        self.generate(user, n, request.temperature, &mut rng)
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{}. {t}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

#[derive(Debug, Clone)]
pub struct MockChat {
    world: Arc<MockWorld>,
}

impl MockChat {
    pub fn new(world: Arc<MockWorld>) -> Self {
        Self { world }
    }

    pub fn world(&self) -> &MockWorld {
        &self.world
    }
}

impl ChatProvider for MockChat {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let content = self.world.respond(request);
        let tokens = request.messages.iter().map(|m| words(&m.content).count()).sum::<usize>() + words(&content).count();
        Ok(ChatResponse { content, total_tokens: Some(tokens as u64) })
    }

    fn cursor(&self) -> Option<u64> {
        Some(self.world.counter.load(Ordering::SeqCst))
    }

    fn restore_cursor(&self, cursor: u64) {
        self.world.counter.store(cursor, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    world: Arc<MockWorld>,
}

impl MockEmbedder {
    pub fn new(world: Arc<MockWorld>) -> Self {
        Self { world }
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.world.embed_text(t)).collect())
    }
}
