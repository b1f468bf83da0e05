use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use divgen_core::dataset::{embeddings_by_id, parse_jsonl, EmbeddingRecord, InstanceRecord};
use divgen_core::kernel::{Bandwidth, DataInstance, Embedding, KernelConfig, StopWords};
use divgen_core::metrics::{diversity_report, judge_quality, DiversityReport};

use crate::config::{Config, Overrides};
use crate::output::write_json;
use crate::run::gateway;
use crate::{Failure, EXIT_CONFIG};

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::config)
}

fn sibling(dataset: &Path, name: &str) -> PathBuf {
    dataset.parent().unwrap_or(Path::new(".")).join(name)
}

pub fn evaluate(
    dataset: &Path,
    embeddings: Option<&Path>,
    config_path: Option<&Path>,
    overrides: &Overrides,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let config = Config::load(config_path, overrides).map_err(Failure::config)?;
    let mut warnings = Vec::new();

    let (records, errors) = parse_jsonl::<InstanceRecord>(&read(dataset)?);
    for e in &errors {
        let msg = format!("{}:{}: skipped malformed record: {}", dataset.display(), e.line, e.message);
        eprintln!("{msg}");
        warnings.push(msg);
    }

    let emb_path = embeddings.map(Path::to_path_buf).unwrap_or_else(|| sibling(dataset, "embeddings.jsonl"));
    let mut by_id: HashMap<String, Embedding> = HashMap::new();
    if emb_path.exists() {
        let (recs, errs) = parse_jsonl::<EmbeddingRecord>(&read(&emb_path)?);
        for e in &errs {
            let msg = format!("{}:{}: skipped malformed embedding: {}", emb_path.display(), e.line, e.message);
            eprintln!("{msg}");
            warnings.push(msg);
        }
        by_id = embeddings_by_id(recs);
    } else if embeddings.is_some() {
        return Err(Failure::config(anyhow!("embeddings file {} not found", emb_path.display())));
    }

    let missing: Vec<String> =
        records.iter().filter(|r| !by_id.contains_key(&r.id)).map(|r| r.text.clone()).collect();
    if !missing.is_empty() {
        if config_path.is_none() && !overrides.mock {
            return Err(Failure::config(anyhow!(
                "{} records have no embedding; pass --config with a provider or --mock",
                missing.len()
            )));
        }
        let gw = gateway(&config)?;
        let fresh = gw.embed(&missing).map_err(|e| Failure { code: crate::EXIT_PROVIDER, error: e.into() })?;
        let ids = records.iter().filter(|r| !by_id.contains_key(&r.id)).map(|r| r.id.clone()).collect::<Vec<_>>();
        warnings.push(format!("embedded {} records through the provider", ids.len()));
        by_id.extend(ids.into_iter().zip(fresh));
    }

    // An adjacent report from the producing run pins the kernel, so the
    // recomputed numbers match the in-run ones.
    let prior: Option<DiversityReport> = std::fs::read_to_string(sibling(dataset, "report.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let method = prior
        .as_ref()
        .map(|r| r.method.clone())
        .or_else(|| records.first().map(|r| r.method.clone()))
        .unwrap_or_else(|| "unknown".into());

    let stopwords = StopWords::english();
    let items: Vec<DataInstance> = records
        .into_iter()
        .map(|r| {
            let e = by_id[&r.id].clone();
            r.into_instance(e, &stopwords)
        })
        .collect();
    if items.len() < 2 {
        return Err(Failure { code: EXIT_CONFIG, error: anyhow!("need at least 2 valid records, got {}", items.len()) });
    }

    let user_set_bandwidth = matches!(config.kernel.bandwidth, Bandwidth::Fixed(_));
    let (kernel_cfg, vendi_kernel) = match (&prior, user_set_bandwidth) {
        (Some(p), false) => (
            KernelConfig { w_rbf: p.w_rbf, w_lex: p.w_lex, bandwidth: Bandwidth::Fixed(p.rbf_bandwidth), ..config.kernel },
            p.vendi_kernel,
        ),
        _ => (config.kernel, config.engine.vendi_kernel),
    };
    let refs: Vec<&Embedding> = items.iter().map(|d| &d.embedding).collect();
    let kernel = kernel_cfg.resolve(&refs).map_err(Failure::config)?;
    let ledger = prior.as_ref().map(|p| p.llm_calls).unwrap_or_default();
    let mut report =
        diversity_report(&method, &items, &kernel, vendi_kernel, ledger).map_err(Failure::other)?;
    report.rejection_trace = prior.as_ref().and_then(|p| p.rejection_trace.clone());

    if let Some((rubric, panel)) = config.rubric().map_err(Failure::config)? {
        let gw = gateway(&config)?;
        let q = judge_quality(&items, &config.task, &rubric, &panel, &gw)
            .map_err(|e| Failure { code: crate::EXIT_PROVIDER, error: e.into() })?;
        report.quality = Some(q);
    }
    report.warnings = warnings;

    match out {
        Some(p) => write_json(p, &report).map_err(Failure::other)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(0)
}
