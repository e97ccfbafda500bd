//! Per-image parallel benchmark drivers. Results are merged in image order,
//! so reports do not depend on the number of worker threads.

use edgewalk_core::attacks::{Attack, AttackError, BpParams};
use edgewalk_core::eval::{
    ablation_variants, aggregate_multi_epsilon, evaluate_image, rename_report, BenchSettings,
    BenchmarkReport, EvalError,
};
use edgewalk_core::models::{Classifier, Dataset};
use rayon::prelude::*;

/// Parallel counterpart of [`edgewalk_core::eval::run_benchmark`].
pub fn par_benchmark<C: Classifier + Sync + ?Sized>(
    model: &C,
    data: &Dataset,
    attack: &Attack,
    settings: &BenchSettings,
    seed: u64,
) -> Result<BenchmarkReport, EvalError> {
    let results: Vec<_> = data
        .images()
        .par_iter()
        .zip(data.labels().par_iter())
        .enumerate()
        .map(|(id, (x, &t))| evaluate_image(model, id, x, t, attack, &settings.options))
        .collect::<Result<_, _>>()?;
    let records = results
        .into_iter()
        .flatten()
        .map(|(record, _)| record)
        .collect();
    BenchmarkReport::from_records(attack.name().into(), records, settings.d_upp, seed, false)
}

/// One run per target distortion, aggregated per image.
pub fn par_multi_epsilon<C: Classifier + Sync + ?Sized>(
    model: &C,
    data: &Dataset,
    attack: &Attack,
    epsilons: &[f64],
    settings: &BenchSettings,
    seed: u64,
) -> Result<BenchmarkReport, EvalError> {
    let reports = epsilons
        .iter()
        .map(|&eps| {
            let a = attack.with_epsilon(eps).ok_or(AttackError::InvalidParams(
                "epsilon grid needs a distortion-targeting attack",
            ))?;
            par_benchmark(model, data, &a, settings, seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_multi_epsilon(&reports)
}

/// The rounding-strategy ablation of BP.
pub fn par_ablation<C: Classifier + Sync + ?Sized>(
    model: &C,
    data: &Dataset,
    bp: &BpParams,
    settings: &BenchSettings,
    seed: u64,
) -> Result<Vec<BenchmarkReport>, EvalError> {
    ablation_variants(bp)
        .iter()
        .map(|(name, attack)| {
            let mut report = par_benchmark(model, data, attack, settings, seed)?;
            rename_report(&mut report, name);
            Ok(report)
        })
        .collect()
}
