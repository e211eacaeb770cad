//! Deterministic stand-in backends for exercising the pipeline without a
//! trained model.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::vocab::{CharVocab, END_TOKEN};
use super::{LmError, ModelBackend, Token};

/// Emits a fixed script after the prompt, one token per step, then repeats
/// the final token. Training is a no-op.
#[derive(Debug)]
pub struct ScriptedBackend {
    vocab: CharVocab,
    script: Vec<Token>,
    /// Fail on this many-th logits call (0-based), counted across threads.
    pub fail_after: Option<usize>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(script: &str) -> Self {
        let vocab = CharVocab::from_texts([script]);
        let script = vocab.encode(script);
        ScriptedBackend {
            vocab,
            script,
            fail_after: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn failing_after(script: &str, calls: usize) -> Self {
        ScriptedBackend {
            fail_after: Some(calls),
            ..Self::new(script)
        }
    }

    /// Number of tokens generated so far: everything after the last `" => "`.
    fn position(&self, context: &[Token]) -> usize {
        let sep = self.vocab.encode(" => ");
        context
            .windows(sep.len())
            .rposition(|w| w == sep.as_slice())
            .map(|i| context.len() - (i + sep.len()))
            .unwrap_or(0)
    }
}

impl ModelBackend for ScriptedBackend {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn encode(&self, text: &str) -> Vec<Token> {
        self.vocab.encode(text)
    }

    fn decode(&self, tokens: &[Token]) -> String {
        self.vocab.decode(tokens)
    }

    fn end_token(&self) -> Token {
        END_TOKEN
    }

    fn max_sequence_len(&self) -> usize {
        usize::MAX
    }

    fn next_token_logits(&self, context: &[Token]) -> Result<Vec<f32>, LmError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.fail_after.is_some_and(|n| call >= n) {
            return Err(LmError::Backend("scripted failure".into()));
        }
        let pos = self.position(context).min(self.script.len().saturating_sub(1));
        let mut logits = vec![f32::NEG_INFINITY; self.vocab.len()];
        if let Some(&t) = self.script.get(pos) {
            logits[t as usize] = 0.0;
        }
        Ok(logits)
    }

    fn train_step(&mut self, _batch: &[Vec<Token>], _lr: f64) -> Result<f64, LmError> {
        Ok(0.0)
    }

    fn save(&self, _dir: &Path) -> Result<(), LmError> {
        Ok(())
    }
}

/// Records every training batch; loss decays as `1 / step`.
#[derive(Debug, Default)]
pub struct RecordingBackend {
    pub seen: Vec<Vec<Token>>,
    /// Report a NaN loss at this 1-based step.
    pub nan_at: Option<usize>,
}

impl ModelBackend for RecordingBackend {
    fn vocab_size(&self) -> usize {
        256
    }

    fn encode(&self, text: &str) -> Vec<Token> {
        text.bytes().map(Token::from).collect()
    }

    fn decode(&self, tokens: &[Token]) -> String {
        tokens.iter().map(|&t| t as u8 as char).collect()
    }

    fn end_token(&self) -> Token {
        0
    }

    fn max_sequence_len(&self) -> usize {
        usize::MAX
    }

    fn next_token_logits(&self, _context: &[Token]) -> Result<Vec<f32>, LmError> {
        Ok(vec![0.0; 256])
    }

    fn train_step(&mut self, batch: &[Vec<Token>], _lr: f64) -> Result<f64, LmError> {
        self.seen.extend(batch.iter().cloned());
        let step = self.seen.len();
        if self.nan_at == Some(step) {
            return Ok(f64::NAN);
        }
        Ok(1.0 / step as f64)
    }

    fn save(&self, dir: &Path) -> Result<(), LmError> {
        std::fs::write(dir.join("recording"), self.seen.len().to_string())
            .map_err(|e| LmError::Backend(e.to_string()))
    }
}
