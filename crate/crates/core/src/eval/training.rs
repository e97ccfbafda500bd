//! Adversarial training: every epoch forges adversarial images against the
//! current (frozen) model and trains one epoch on clean plus forged images.

use alloc::vec::Vec;

use super::EvalError;
use crate::attacks::{Attack, RunOptions};
use crate::models::{train_sgd, Classifier, Dataset, MlpModel, TrainConfig};

/// Largest per-image gradient budget of the reference attack.
pub const ADV_TRAIN_MAX_GRADS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrainMode {
    /// Re-initialize from `train.seed` and train from scratch.
    Scratch,
    /// Continue from the given model.
    #[default]
    Finetune,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AdvTrainConfig {
    pub epochs: usize,
    pub mode: TrainMode,
    /// Per-epoch SGD settings; `train.epochs` is ignored.
    pub train: TrainConfig,
}

pub fn adversarial_training(
    model: &MlpModel,
    train_set: &Dataset,
    attack: &Attack,
    cfg: &AdvTrainConfig,
    options: &RunOptions,
) -> Result<MlpModel, EvalError> {
    let budget = attack.gradient_budget();
    if budget > ADV_TRAIN_MAX_GRADS {
        return Err(EvalError::BudgetExceeded {
            used: budget,
            budget: ADV_TRAIN_MAX_GRADS,
        });
    }
    let mut current = match cfg.mode {
        TrainMode::Finetune => model.clone(),
        TrainMode::Scratch => {
            let hidden: Vec<usize> = model.layers()[..model.layers().len() - 1]
                .iter()
                .map(|l| l.outputs)
                .collect();
            MlpModel::new(
                model.input_dim(),
                &hidden,
                model.num_classes(),
                cfg.train.seed,
            )
        }
    };
    for epoch in 0..cfg.epochs {
        let mut forged = Vec::with_capacity(train_set.len());
        for (x, t) in train_set.iter() {
            let out = attack.run(&current, x, t, options)?;
            if out.grads_used > ADV_TRAIN_MAX_GRADS {
                return Err(EvalError::BudgetExceeded {
                    used: out.grads_used,
                    budget: ADV_TRAIN_MAX_GRADS,
                });
            }
            forged.push(out.adversarial);
        }
        let adversarial = Dataset::new(forged, train_set.labels().to_vec())?;
        let combined = train_set.concat(&adversarial)?;
        let epoch_cfg = TrainConfig {
            epochs: 1,
            seed: cfg.train.seed.wrapping_add(epoch as u64),
            ..cfg.train.clone()
        };
        current = train_sgd(&current, &combined, &epoch_cfg)?;
    }
    Ok(current)
}
