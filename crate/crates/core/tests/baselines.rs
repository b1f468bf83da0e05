use std::collections::HashSet;

use divgen_core::baselines::{run_baseline, BaselineKind, BaselineRun, BaselineSpec};
use divgen_core::dpp::log_det;
use divgen_core::gateway::{Gateway, MockWorldConfig};
use divgen_core::kernel::{build_kernel, KernelConfig};
use divgen_core::metrics::VendiKernel;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TASK: &str = "Write a one-sentence scene description.";

fn run_kind(kind: BaselineKind, l: usize, seed: u64) -> divgen_core::baselines::BaselineOutput {
    let r = BaselineRun {
        task_prompt: TASK,
        target_size: l,
        batch_size: 10,
        kernel: KernelConfig::default(),
        vendi_kernel: VendiKernel::Combined,
        seed,
    };
    run_baseline(&BaselineSpec::of(kind), &r, &Gateway::mock(MockWorldConfig::standard(seed))).unwrap()
}

#[test]
fn full_scale_call_columns() {
    assert_eq!(run_kind(BaselineKind::Hierarchical, 500, 0).ledger.generation_calls(), 550);
    assert_eq!(run_kind(BaselineKind::Default, 500, 0).ledger.generation_calls(), 50);
    assert_eq!(run_kind(BaselineKind::Hierarchical, 50, 0).ledger.generation_calls(), 55);
    assert_eq!(run_kind(BaselineKind::Default, 50, 0).ledger.generation_calls(), 5);
}

#[test]
fn subset_select_beats_random_subsets() {
    let l = 50;
    let out = run_kind(BaselineKind::SubsetSelect, l, 2);
    assert_eq!(out.dataset.len(), l);
    // The universe is exactly what the temp baseline draws for 10 * l.
    let universe = run_kind(BaselineKind::Temp, 10 * l, 2).dataset;
    let texts: HashSet<&str> = universe.iter().map(|d| d.text.as_str()).collect();
    assert!(out.dataset.iter().all(|d| texts.contains(d.text.as_str())));

    let chosen = log_det(&build_kernel(&out.dataset, &out.kernel).unwrap()).unwrap();
    let full = build_kernel(&universe, &out.kernel).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let idx = sample(&mut rng, universe.len(), l).into_vec();
        let random = log_det(&full.principal(&idx)).unwrap_or(f64::NEG_INFINITY);
        assert!(chosen >= random, "selected logdet {chosen} < random {random}");
    }
}

#[test]
fn vendi_ordering_over_seeds() {
    let mean = |kind| (0..5).map(|s| run_kind(kind, 60, s).report.unwrap().vendi).sum::<f64>() / 5.0;
    let default = mean(BaselineKind::Default);
    assert!(default <= mean(BaselineKind::SubsetSelect));
    assert!(default <= mean(BaselineKind::Hierarchical));
}
