use serde::{Deserialize, Serialize};

use super::{derive_seed, EngineError};
use crate::dpp::{log_det, sample_k_dpp};
use crate::gateway::{CallCategory, Gateway, GatewayError};
use crate::kernel::{build_kernel, DataInstance, Embedding, Kernel, KernelConfig, StopWords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Constant,
    /// `tau(i) = tau0 * exp(-i / T)`.
    #[default]
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Explicit starting threshold. Skips probing and is not clipped.
    pub tau0: Option<f64>,
    pub alpha: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub mode: ThresholdMode,
    /// Probe instances generated from the task prompt.
    pub probes: usize,
    /// Probes kept by the k-DPP whose determinant sets tau0.
    pub probe_select: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { tau0: None, alpha: 0.5, tau_min: 1e-6, tau_max: 0.9, mode: ThresholdMode::Decay, probes: 100, probe_select: 10 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("schedule.alpha must be positive, got {}", self.alpha));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max) {
            return bad(format!("need 0 < tau_min <= tau_max, got {} and {}", self.tau_min, self.tau_max));
        }
        if let Some(t) = self.tau0 {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("schedule.tau0 must be finite and >= 0, got {t}"));
            }
        }
        if self.probe_select == 0 || self.probes < self.probe_select {
            return bad(format!("need probes >= probe_select >= 1, got {} and {}", self.probes, self.probe_select));
        }
        Ok(())
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.clamp(self.tau_min, self.tau_max)
    }

    pub fn at(&self, tau0: f64, iteration: u32, max_iterations: u32) -> f64 {
        match self.mode {
            ThresholdMode::Constant => tau0,
            ThresholdMode::Decay => tau0 * (-(iteration as f64) / max_iterations.max(1) as f64).exp(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdInit {
    pub tau0: f64,
    /// Determinant of the selected probes' kernel (0 if singular).
    pub det: f64,
    pub selected: Vec<usize>,
    pub fallback: bool,
    pub probes: Vec<DataInstance>,
    /// Kernel with the bandwidth fixed from the probes.
    pub kernel: Kernel,
}

/// Probes the task prompt, keeps `probe_select` probes by k-DPP and sets
/// `tau0 = clip(alpha * det)`. Probes never enter the dataset.
pub fn init_threshold(
    task_prompt: &str,
    gateway: &Gateway,
    kernel_config: &KernelConfig,
    schedule: &ThresholdConfig,
    batch_size: usize,
    seed: u64,
) -> Result<ThresholdInit, EngineError> {
    schedule.validate()?;
    let batch_size = batch_size.max(1);
    let max_calls = 2 * schedule.probes.div_ceil(batch_size);
    let mut texts = Vec::with_capacity(schedule.probes);
    for _ in 0..max_calls {
        if texts.len() >= schedule.probes {
            break;
        }
        let want = batch_size.min(schedule.probes - texts.len());
        match gateway.generate_batch_with(task_prompt, want, CallCategory::Probe, None) {
            Ok(b) => texts.extend(b.instances),
            Err(GatewayError::NoInstances { .. }) => log::warn!("probe call returned no instances"),
            Err(e) => return Err(e.into()),
        }
    }
    texts.truncate(schedule.probes);
    if texts.len() < schedule.probe_select {
        return Err(EngineError::TooFewProbes { need: schedule.probe_select, got: texts.len() });
    }
    let embeddings = gateway.embed(&texts)?;
    let refs: Vec<&Embedding> = embeddings.iter().collect();
    let kernel = kernel_config.resolve(&refs)?;
    let stopwords = StopWords::english();
    let probes: Vec<DataInstance> = texts
        .into_iter()
        .zip(embeddings)
        .enumerate()
        .map(|(i, (t, e))| {
            let mut d = DataInstance::new(format!("p{i:03}"), t, e, &stopwords);
            d.explorer_id = "probe".into();
            d
        })
        .collect();
    let k = build_kernel(&probes, &kernel)?;
    let sample = sample_k_dpp(&k, schedule.probe_select, derive_seed(seed, "probe", 0))?;
    let det = log_det(&k.principal(&sample.indices)).map_or(0.0, f64::exp);
    Ok(ThresholdInit {
        tau0: schedule.clip(schedule.alpha * det),
        det,
        selected: sample.indices,
        fallback: sample.fallback,
        probes,
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_and_decay() {
        let c = ThresholdConfig::default();
        assert_eq!(c.clip(0.5 * 0.5), 0.25);
        assert_eq!(c.clip(0.5 * 3.0), 0.9);
        assert_eq!(c.clip(0.0), 1e-6);
        assert_eq!(c.at(0.4, 0, 200), 0.4);
        assert!((c.at(0.4, 200, 200) - 0.4 / std::f64::consts::E).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for i in 0..300 {
            let t = c.at(0.3, i, 200);
            assert!(t <= prev);
            prev = t;
        }
        let constant = ThresholdConfig { mode: ThresholdMode::Constant, ..c };
        assert_eq!(constant.at(0.3, 150, 200), 0.3);
    }

    #[test]
    fn validation() {
        assert!(ThresholdConfig::default().validate().is_ok());
        assert!(ThresholdConfig { tau_min: 0.95, ..Default::default() }.validate().is_err());
        assert!(ThresholdConfig { probes: 5, ..Default::default() }.validate().is_err());
        assert!(ThresholdConfig { tau0: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(ThresholdConfig { tau0: Some(1.5), ..Default::default() }.validate().is_ok());
    }
}
