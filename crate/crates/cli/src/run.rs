use std::path::Path;

use anyhow::Context;
use divgen_core::baselines::{run_baseline, BaselineError, BaselineKind, BaselineRun};
use divgen_core::dataset::{dataset_jsonl, embeddings_jsonl, to_jsonl};
use divgen_core::engine::{init_threshold as probe, Engine, EngineError, RunStatus as EngineStatus, Snapshot};
use divgen_core::gateway::GatewayError;
use divgen_core::kernel::KernelError;
use serde::Serialize;

use crate::config::{Config, Overrides};
use crate::output::{now_secs, write_json, RunDir, RunStatus};
use crate::{Failure, EXIT_BUDGET, EXIT_CONFIG, EXIT_FAILED, EXIT_PROVIDER};

const RUN_FILES: [&str; 5] = ["dataset.jsonl", "embeddings.jsonl", "trace.jsonl", "report.json", "manifest.json"];
const SNAPSHOT: &str = "snapshot.json";

fn gateway_code(e: &GatewayError) -> u8 {
    match e {
        GatewayError::Config(_) | GatewayError::Kernel(KernelError::InvalidConfig(_) | KernelError::InvalidBandwidth(_)) => {
            EXIT_CONFIG
        }
        GatewayError::Provider { .. }
        | GatewayError::NoInstances { .. }
        | GatewayError::EmbeddingCount { .. }
        | GatewayError::DimensionDrift { .. } => EXIT_PROVIDER,
        _ => EXIT_FAILED,
    }
}

fn kernel_code(e: &KernelError) -> u8 {
    match e {
        KernelError::InvalidConfig(_) | KernelError::InvalidBandwidth(_) => EXIT_CONFIG,
        _ => EXIT_FAILED,
    }
}

pub fn engine_code(e: &EngineError) -> u8 {
    match e {
        EngineError::Config(_) | EngineError::Snapshot(_) => EXIT_CONFIG,
        EngineError::Gateway(g) => gateway_code(g),
        EngineError::Kernel(k) => kernel_code(k),
        EngineError::TooFewProbes { .. } | EngineError::AllExplorersFailed { .. } => EXIT_PROVIDER,
        _ => EXIT_FAILED,
    }
}

fn baseline_code(e: &BaselineError) -> u8 {
    match e {
        BaselineError::Config(_) => EXIT_CONFIG,
        BaselineError::Gateway(g) => gateway_code(g),
        BaselineError::Kernel(k) => kernel_code(k),
        _ => EXIT_FAILED,
    }
}

pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Config, Failure> {
    let config = Config::load(path, overrides).map_err(Failure::config)?;
    config.require_task().map_err(Failure::config)?;
    Ok(config)
}

pub fn gateway(config: &Config) -> Result<divgen_core::gateway::Gateway, Failure> {
    config.gateway().map_err(|e| {
        let code = e.downcast_ref::<GatewayError>().map_or(EXIT_CONFIG, gateway_code);
        Failure { code, error: e }
    })
}

/// Removes outputs of an earlier run so a failed run cannot leave stale
/// files that look current.
fn clear(dir: &Path, keep_snapshot: bool) -> anyhow::Result<()> {
    let snapshot = [SNAPSHOT];
    let extra: &[&str] = if keep_snapshot { &[] } else { &snapshot };
    for name in RUN_FILES.iter().chain(extra) {
        match std::fs::remove_file(dir.join(name)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                return Err(e).with_context(|| format!("removing stale {name}"))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Records a failed run in the manifest and returns the failure.
fn fail(dir: RunDir, command: &str, config: &Config, started: f64, f: Failure) -> Failure {
    match dir.finish(command, config, RunStatus::Failed, started, Some(format!("{:#}", f.error))) {
        Ok(_) => f,
        Err(e) => Failure::other(e.context(format!("{:#}", f.error))),
    }
}

pub fn generate(path: Option<&Path>, overrides: &Overrides, out: &Path, resume: bool) -> Result<u8, Failure> {
    let config = load(path, overrides)?;
    let run_config = config.run_config();
    run_config.validate().map_err(|e| Failure { code: engine_code(&e), error: e.into() })?;
    let gw = gateway(&config)?;
    let mut dir = RunDir::create(out).map_err(Failure::other)?;
    let snapshot_path = dir.path(SNAPSHOT);
    let snapshot: Option<Snapshot> = if resume {
        let text = std::fs::read_to_string(&snapshot_path)
            .with_context(|| format!("--resume needs {}", snapshot_path.display()))
            .map_err(Failure::config)?;
        Some(serde_json::from_str(&text).context("parsing snapshot").map_err(Failure::config)?)
    } else {
        None
    };
    clear(out, resume).map_err(Failure::other)?;
    let started = now_secs();

    let engine = match snapshot {
        Some(s) => Engine::resume(run_config, &gw, s),
        None => Engine::new(run_config, &gw),
    };
    let mut engine = match engine {
        Ok(e) => e,
        Err(e) => return Err(fail(dir, "generate", &config, started, Failure { code: engine_code(&e), error: e.into() })),
    };
    let mut checkpoint_error = None;
    let result = engine.run_to_end(|snap| {
        if checkpoint_error.is_none() {
            checkpoint_error = write_json(&snapshot_path, snap).err();
        }
    });
    if let Some(e) = checkpoint_error {
        return Err(fail(dir, "generate", &config, started, Failure::other(e.context("writing snapshot"))));
    }
    if let Err(e) = result {
        return Err(fail(dir, "generate", &config, started, Failure { code: engine_code(&e), error: e.into() }));
    }
    if snapshot_path.exists() {
        write_json(&snapshot_path, &engine.snapshot()).map_err(Failure::other)?;
        dir.adopt(SNAPSHOT).map_err(Failure::other)?;
    }
    let output = engine.finish().map_err(|e| Failure { code: engine_code(&e), error: e.into() })?;
    let write = |dir: &mut RunDir| -> anyhow::Result<()> {
        dir.write("dataset.jsonl", dataset_jsonl(&output.dataset, "engine").as_bytes())?;
        dir.write("embeddings.jsonl", embeddings_jsonl(&output.dataset).as_bytes())?;
        if let Some(t) = &output.trace {
            dir.write("trace.jsonl", to_jsonl(t).as_bytes())?;
        }
        if let Some(r) = &output.report {
            dir.write_json("report.json", r)?;
        }
        Ok(())
    };
    if let Err(e) = write(&mut dir) {
        return Err(fail(dir, "generate", &config, started, Failure::other(e)));
    }
    for w in &output.warnings {
        log::warn!("{w}");
    }
    let (status, code) = match output.status {
        EngineStatus::Completed => (RunStatus::Completed, 0),
        EngineStatus::BudgetExhausted => (RunStatus::BudgetExhausted, EXIT_BUDGET),
    };
    dir.finish("generate", &config, status, started, None).map_err(Failure::other)?;
    println!(
        "{}: {} instances in {} iterations, tau0 {:.4e}, {} generation calls{}",
        match status {
            RunStatus::Completed => "completed",
            _ => "budget exhausted",
        },
        output.dataset.len(),
        output.iterations,
        output.tau0,
        output.ledger.generation_calls(),
        output.report.as_ref().map_or(String::new(), |r| format!(", vendi {:.3}", r.vendi)),
    );
    Ok(code)
}

pub fn baseline(kind: BaselineKind, path: Option<&Path>, overrides: &Overrides, out: &Path) -> Result<u8, Failure> {
    let config = load(path, overrides)?;
    let spec = config.baseline_spec(kind);
    spec.validate().map_err(Failure::config)?;
    let gw = gateway(&config)?;
    let mut dir = RunDir::create(out).map_err(Failure::other)?;
    clear(out, false).map_err(Failure::other)?;
    let started = now_secs();
    let command = format!("baseline {kind}");
    let run = BaselineRun {
        task_prompt: &config.task,
        target_size: config.engine.target_size,
        batch_size: config.engine.batch_size,
        kernel: config.kernel,
        vendi_kernel: config.engine.vendi_kernel,
        seed: config.seed,
    };
    let output = match run_baseline(&spec, &run, &gw) {
        Ok(o) => o,
        Err(e) => return Err(fail(dir, &command, &config, started, Failure { code: baseline_code(&e), error: e.into() })),
    };
    let write = |dir: &mut RunDir| -> anyhow::Result<()> {
        dir.write("dataset.jsonl", dataset_jsonl(&output.dataset, kind.name()).as_bytes())?;
        dir.write("embeddings.jsonl", embeddings_jsonl(&output.dataset).as_bytes())?;
        if let Some(r) = &output.report {
            dir.write_json("report.json", r)?;
        }
        Ok(())
    };
    if let Err(e) = write(&mut dir) {
        return Err(fail(dir, &command, &config, started, Failure::other(e)));
    }
    let complete = output.dataset.len() >= config.engine.target_size;
    let status = if complete { RunStatus::Completed } else { RunStatus::BudgetExhausted };
    dir.finish(&command, &config, status, started, None).map_err(Failure::other)?;
    println!(
        "{kind}: {} instances, {} generation calls{}",
        output.dataset.len(),
        output.ledger.generation_calls(),
        output.report.as_ref().map_or(String::new(), |r| format!(", vendi {:.3}", r.vendi)),
    );
    Ok(if complete { 0 } else { EXIT_BUDGET })
}

#[derive(Serialize)]
struct ThresholdSummary {
    tau0: f64,
    det: f64,
    alpha: f64,
    sigma: f64,
    probes: usize,
    selected: Vec<usize>,
    fallback: bool,
    probe_calls: u64,
}

pub fn init_threshold(path: Option<&Path>, overrides: &Overrides, out: Option<&Path>) -> Result<u8, Failure> {
    let config = load(path, overrides)?;
    let gw = gateway(&config)?;
    let init = probe(&config.task, &gw, &config.kernel, &config.schedule, config.engine.batch_size, config.seed)
        .map_err(|e| Failure { code: engine_code(&e), error: e.into() })?;
    let summary = ThresholdSummary {
        tau0: init.tau0,
        det: init.det,
        alpha: config.schedule.alpha,
        sigma: init.kernel.sigma,
        probes: init.probes.len(),
        selected: init.selected,
        fallback: init.fallback,
        probe_calls: gw.ledger().snapshot().probe,
    };
    match out {
        Some(p) => write_json(p, &summary).map_err(Failure::other)?,
        None => println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes")),
    }
    Ok(0)
}
