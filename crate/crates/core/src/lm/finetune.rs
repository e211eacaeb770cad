use std::path::Path;

use super::{CheckpointRef, CheckpointStore, FineTuneConfig, LmError, LossPoint, LossTrace, ModelBackend};
use crate::dataset::read_dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneOutcome {
    pub checkpoint: CheckpointRef,
    pub trace: LossTrace,
    /// Examples cut to the backend's sequence limit.
    pub truncated_examples: usize,
}

/// Runs exactly `config.steps` optimizer steps, cycling through the dataset
/// in file order. The mean loss of each `log_every` window is logged, and
/// checkpoints are written every `checkpoint_every` steps and at the end.
pub fn finetune<B: ModelBackend + ?Sized>(
    backend: &mut B,
    dataset_path: &Path,
    config: &FineTuneConfig,
    store: &CheckpointStore,
    domain_id: &str,
) -> Result<FineTuneOutcome, LmError> {
    config.validate()?;
    let pairs = read_dataset(dataset_path)?;
    if pairs.is_empty() {
        return Err(LmError::EmptyDataset);
    }
    let limit = backend.max_sequence_len();
    let mut truncated_examples = 0;
    let examples: Vec<_> = pairs
        .iter()
        .map(|p| {
            let mut tokens = backend.encode(&p.to_line()?);
            if tokens.len() > limit {
                truncated_examples += 1;
                tokens.truncate(limit);
            }
            Ok(tokens)
        })
        .collect::<Result<_, LmError>>()?;
    if truncated_examples > 0 {
        log::warn!("{truncated_examples} examples truncated to {limit} tokens");
    }

    let mut trace = LossTrace {
        log_every: config.log_every,
        points: Vec::with_capacity(config.steps / config.log_every),
    };
    let mut window = 0.0;
    let mut last_checkpoint = None;
    let mut cursor = 0;
    for step in 1..=config.steps {
        let batch: Vec<_> = (0..config.batch_size)
            .map(|_| {
                let ex = examples[cursor % examples.len()].clone();
                cursor += 1;
                ex
            })
            .collect();
        let loss = backend.train_step(&batch, config.learning_rate)?;
        if !loss.is_finite() {
            return Err(LmError::NonFiniteLoss { step });
        }
        window += loss;
        if step % config.log_every == 0 {
            let mean = window / config.log_every as f64;
            log::debug!("step {step}: loss {mean:.4}");
            trace.points.push(LossPoint { step, loss: mean });
            window = 0.0;
        }
        if step % config.checkpoint_every == 0 || step == config.steps {
            last_checkpoint = Some(store.save(backend, domain_id, step)?);
        }
    }
    Ok(FineTuneOutcome {
        checkpoint: last_checkpoint.expect("steps >= 1 saves a final checkpoint"),
        trace,
        truncated_examples,
    })
}
