//! Benchmark protocol: success rate, conditional distortion, operating
//! characteristic, multi-ε aggregation, the quantization ablation and
//! adversarial training.
//!
//! Only images the clean model classifies correctly enter a benchmark.
//! Distortions are recomputed from returned images and averaged over
//! successes only.

mod training;

use alloc::string::String;
use alloc::vec::Vec;

pub use training::{adversarial_training, AdvTrainConfig, TrainMode, ADV_TRAIN_MAX_GRADS};

use crate::attacks::{Attack, AttackError, AttackOutcome, BpParams, QuantMode, RunOptions};
use crate::models::{predict, Classifier, Dataset, Label, ModelError};
use crate::vector::{l2_distance, linf_distance};

/// Distortion budget of `P_upp` on 28×28 digits.
pub const MNIST_D_UPP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no image is classified correctly")]
    EmptyEvaluationSet,
    #[error("reports cover different image sets")]
    MismatchedImageSets,
    #[error("nothing to aggregate")]
    NoReports,
    #[error("attack used {used} gradients, budget is {budget}")]
    BudgetExceeded { used: usize, budget: usize },
}

/// One attacked image. Distortions are absent for failures.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalRecord {
    pub image_id: usize,
    pub true_label: Label,
    pub attack: String,
    pub grads_used: usize,
    pub success: bool,
    pub distortion_l2: Option<f64>,
    pub distortion_linf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchmarkReport {
    pub attack: String,
    /// Aggregated over several target distortions.
    pub multi_epsilon: bool,
    pub seed: u64,
    pub d_upp: f64,
    /// `N`, the correctly classified images.
    pub n: usize,
    pub n_suc: usize,
    pub p_suc: f64,
    /// Mean distortion over successes; absent without successes.
    pub d_bar: Option<f64>,
    pub p_upp: f64,
    pub records: Vec<EvalRecord>,
}

impl BenchmarkReport {
    pub fn from_records(
        attack: String,
        records: Vec<EvalRecord>,
        d_upp: f64,
        seed: u64,
        multi_epsilon: bool,
    ) -> Result<Self, EvalError> {
        if records.is_empty() {
            return Err(EvalError::EmptyEvaluationSet);
        }
        let n = records.len();
        let successes: Vec<f64> = records
            .iter()
            .filter(|r| r.success)
            .filter_map(|r| r.distortion_l2)
            .collect();
        let n_suc = successes.len();
        let d_bar = (n_suc > 0).then(|| successes.iter().sum::<f64>() / n_suc as f64);
        let p_upp = operating_characteristic(&records).at(d_upp);
        Ok(BenchmarkReport {
            attack,
            multi_epsilon,
            seed,
            d_upp,
            n,
            n_suc,
            p_suc: n_suc as f64 / n as f64,
            d_bar,
            p_upp,
            records,
        })
    }

    pub fn operating_characteristic(&self) -> OperatingCharacteristic {
        operating_characteristic(&self.records)
    }
}

/// Benchmark settings besides the attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSettings {
    pub d_upp: f64,
    pub options: RunOptions,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            d_upp: MNIST_D_UPP,
            options: RunOptions::default(),
        }
    }
}

/// Attacks one image. `None` when the clean model already misclassifies it.
pub fn evaluate_image<C: Classifier + ?Sized>(
    model: &C,
    image_id: usize,
    x: &[f64],
    t: Label,
    attack: &Attack,
    options: &RunOptions,
) -> Result<Option<(EvalRecord, AttackOutcome)>, EvalError> {
    if predict(model, x)? != t {
        return Ok(None);
    }
    let outcome = attack.run(model, x, t, options)?;
    let record = record_for(image_id, t, attack.name(), x, &outcome);
    Ok(Some((record, outcome)))
}

fn record_for(
    image_id: usize,
    t: Label,
    attack: &str,
    x: &[f64],
    outcome: &AttackOutcome,
) -> EvalRecord {
    let y = &outcome.adversarial;
    EvalRecord {
        image_id,
        true_label: t,
        attack: attack.into(),
        grads_used: outcome.grads_used,
        success: outcome.success,
        distortion_l2: outcome.success.then(|| l2_distance(y, x)),
        distortion_linf: outcome.success.then(|| linf_distance(y, x)),
    }
}

/// Runs `attack` over the correctly classified images of `data`, in order.
pub fn run_benchmark<C: Classifier + ?Sized>(
    model: &C,
    data: &Dataset,
    attack: &Attack,
    settings: &BenchSettings,
    seed: u64,
) -> Result<BenchmarkReport, EvalError> {
    let mut records = Vec::new();
    for (id, (x, t)) in data.iter().enumerate() {
        if let Some((record, _)) = evaluate_image(model, id, x, t, attack, &settings.options)? {
            records.push(record);
        }
    }
    BenchmarkReport::from_records(attack.name().into(), records, settings.d_upp, seed, false)
}

/// Runs a distortion-targeting attack once per `ε` and aggregates.
pub fn run_multi_epsilon<C: Classifier + ?Sized>(
    model: &C,
    data: &Dataset,
    attack: &Attack,
    epsilons: &[f64],
    settings: &BenchSettings,
    seed: u64,
) -> Result<BenchmarkReport, EvalError> {
    let mut reports = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let a = attack.with_epsilon(eps).ok_or(AttackError::InvalidParams(
            "epsilon grid needs a distortion-targeting attack",
        ))?;
        reports.push(run_benchmark(model, data, &a, settings, seed)?);
    }
    aggregate_multi_epsilon(&reports)
}

/// Per image: success if any run succeeded, distortion the minimum over
/// successful runs, gradients summed over runs.
pub fn aggregate_multi_epsilon(reports: &[BenchmarkReport]) -> Result<BenchmarkReport, EvalError> {
    let (first, rest) = reports.split_first().ok_or(EvalError::NoReports)?;
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let ids: Vec<usize> = first.records.iter().map(|r| r.image_id).collect();
    for report in rest {
        if report.records.len() != ids.len()
            || report
                .records
                .iter()
                .zip(&ids)
                .any(|(r, id)| r.image_id != *id)
        {
            return Err(EvalError::MismatchedImageSets);
        }
    }
    let records = first
        .records
        .iter()
        .enumerate()
        .map(|(k, base)| {
            let mut merged = base.clone();
            merged.grads_used = 0;
            for report in reports {
                let r = &report.records[k];
                merged.grads_used += r.grads_used;
                if !r.success {
                    continue;
                }
                let better = match merged.distortion_l2 {
                    Some(d) if merged.success => r.distortion_l2.is_some_and(|e| e < d),
                    _ => true,
                };
                if better {
                    merged.success = true;
                    merged.distortion_l2 = r.distortion_l2;
                    merged.distortion_linf = r.distortion_linf;
                }
            }
            merged
        })
        .collect();
    BenchmarkReport::from_records(first.attack.clone(), records, first.d_upp, first.seed, true)
}

/// Sampled `P(D)`: fraction of all `N` images attacked successfully within
/// distortion `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingCharacteristic {
    /// `(D, P(D))` at every distinct success distortion, increasing in `D`.
    pub points: Vec<(f64, f64)>,
    pub n: usize,
    pub p_suc: f64,
}

impl OperatingCharacteristic {
    /// Largest successful distortion.
    pub fn d_max(&self) -> Option<f64> {
        self.points.last().map(|p| p.0)
    }

    /// `P(D)`, right-continuous.
    pub fn at(&self, d: f64) -> f64 {
        let mut value = 0.0;
        for &(threshold, p) in &self.points {
            if threshold <= d {
                value = p;
            } else {
                break;
            }
        }
        value
    }
}

pub fn operating_characteristic(records: &[EvalRecord]) -> OperatingCharacteristic {
    let n = records.len();
    let mut distortions: Vec<f64> = records
        .iter()
        .filter(|r| r.success)
        .filter_map(|r| r.distortion_l2)
        .collect();
    distortions.sort_by(f64::total_cmp);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (k, d) in distortions.iter().enumerate() {
        let p = (k + 1) as f64 / n as f64;
        match points.last_mut() {
            Some(last) if last.0 == *d => last.1 = p,
            _ => points.push((*d, p)),
        }
    }
    let p_suc = if n == 0 {
        0.0
    } else {
        distortions.len() as f64 / n as f64
    };
    if let Some(last) = points.last_mut() {
        last.1 = p_suc;
    }
    OperatingCharacteristic { points, n, p_suc }
}

/// `P_upp = P(D_upp)`.
pub fn p_upp(records: &[EvalRecord], d_upp: f64) -> f64 {
    operating_characteristic(records).at(d_upp)
}

/// BP under the three rounding strategies, in the order round at end,
/// round each iteration, `q_in`/`q_out`, with their report names.
pub fn ablation_variants(bp: &BpParams) -> [(&'static str, Attack); 3] {
    let with = |quant| {
        Attack::Bp(BpParams {
            quant,
            ..bp.clone()
        })
    };
    [
        ("bp_round_at_end", with(QuantMode::AtEnd)),
        ("bp_round_each_iteration", with(QuantMode::EachIteration)),
        ("bp_q_in_q_out", with(QuantMode::Adaptive)),
    ]
}

/// Gives a report and all its records a new attack name.
pub fn rename_report(report: &mut BenchmarkReport, name: &str) {
    report.attack = name.into();
    for r in &mut report.records {
        r.attack = name.into();
    }
}

/// Benchmarks the three [`ablation_variants`].
pub fn quantization_ablation<C: Classifier + ?Sized>(
    model: &C,
    data: &Dataset,
    bp: &BpParams,
    settings: &BenchSettings,
    seed: u64,
) -> Result<[BenchmarkReport; 3], EvalError> {
    let [a, b, c] = ablation_variants(bp).map(|(name, attack)| {
        run_benchmark(model, data, &attack, settings, seed).map(|mut r| {
            rename_report(&mut r, name);
            r
        })
    });
    Ok([a?, b?, c?])
}

/// Flag changes along a path and the adversarial fraction from the first
/// adversarial iterate on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingStats {
    pub crossings: usize,
    /// Absent when no iterate is adversarial.
    pub adversarial_fraction: Option<f64>,
}

pub fn boundary_crossing_stats(flags: &[bool]) -> CrossingStats {
    let crossings = flags.windows(2).filter(|w| w[0] != w[1]).count();
    let adversarial_fraction = flags.iter().position(|&f| f).map(|first| {
        let tail = &flags[first..];
        tail.iter().filter(|&&f| f).count() as f64 / tail.len() as f64
    });
    CrossingStats {
        crossings,
        adversarial_fraction,
    }
}
