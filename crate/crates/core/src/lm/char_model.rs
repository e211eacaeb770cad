//! Small from-scratch character-level language model.
//!
//! A fixed window of previous characters is embedded, concatenated and fed
//! through one tanh hidden layer into a softmax over the vocabulary. Trained
//! with Adam on the mean next-character cross-entropy of each example.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{CharVocab, END_TOKEN, PAD};
use super::{LmError, ModelBackend, Token};

pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Characters of left context seen per prediction.
    #[serde(default = "default_context")]
    pub context: usize,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Longest training example in tokens.
    #[serde(default = "default_max_sequence")]
    pub max_sequence: usize,
}

fn default_context() -> usize {
    12
}
fn default_embed_dim() -> usize {
    16
}
fn default_hidden() -> usize {
    128
}
fn default_max_sequence() -> usize {
    256
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            context: default_context(),
            embed_dim: default_embed_dim(),
            hidden: default_hidden(),
            max_sequence: default_max_sequence(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Params {
    embedding: Vec<f32>,
    w1: Vec<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    b2: Vec<f32>,
}

impl Params {
    fn zeros_like(&self) -> Params {
        Params {
            embedding: vec![0.0; self.embedding.len()],
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    fn slices_mut(&mut self) -> [&mut Vec<f32>; 5] {
        [&mut self.embedding, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn slices(&self) -> [&Vec<f32>; 5] {
        [&self.embedding, &self.w1, &self.b1, &self.w2, &self.b2]
    }
}

#[derive(Debug, Clone)]
struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharModel {
    config: ModelConfig,
    vocab: CharVocab,
    params: Params,
    #[serde(skip)]
    adam: Option<Adam>,
}

struct Activations {
    input: Vec<f32>,
    hidden: Vec<f32>,
    logits: Vec<f32>,
}

impl CharModel {
    /// Fresh model with weights drawn from `seed`.
    pub fn new(vocab: CharVocab, config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vocab.len();
        let (c, d, h) = (config.context, config.embed_dim, config.hidden);
        let mut init = |n: usize, scale: f32| -> Vec<f32> {
            (0..n).map(|_| rng.random_range(-scale..scale)).collect()
        };
        let params = Params {
            embedding: init(v * d, 1.0),
            w1: init(c * d * h, (1.0 / (c * d) as f32).sqrt()),
            b1: vec![0.0; h],
            w2: init(h * v, (1.0 / h as f32).sqrt()),
            b2: vec![0.0; v],
        };
        CharModel {
            config,
            vocab,
            params,
            adam: None,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &CharVocab {
        &self.vocab
    }

    pub fn parameter_count(&self) -> usize {
        self.params.slices().iter().map(|s| s.len()).sum()
    }

    pub fn load(dir: &Path) -> Result<Self, LmError> {
        let path = dir.join(MODEL_FILE);
        let err = |reason: String| LmError::Checkpoint {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
        let model: CharModel = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        model.check_shapes().map_err(err)?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<(), String> {
        let v = self.vocab.len();
        let (c, d, h) = (self.config.context, self.config.embed_dim, self.config.hidden);
        let expected = [v * d, c * d * h, h, h * v, v];
        for (got, want) in self.params.slices().iter().map(|s| s.len()).zip(expected) {
            if got != want {
                return Err(format!("parameter shape {got} != {want}"));
            }
        }
        Ok(())
    }

    fn window(&self, context: &[Token], end: usize) -> Vec<Token> {
        let c = self.config.context;
        (0..c)
            .map(|i| {
                let pos = end as isize - c as isize + i as isize;
                if pos < 0 {
                    PAD
                } else {
                    context[pos as usize]
                }
            })
            .collect()
    }

    fn forward(&self, window: &[Token]) -> Activations {
        let (d, h, v) = (self.config.embed_dim, self.config.hidden, self.vocab.len());
        let p = &self.params;
        let mut input = Vec::with_capacity(window.len() * d);
        for &t in window {
            let t = (t as usize).min(v - 1);
            input.extend_from_slice(&p.embedding[t * d..(t + 1) * d]);
        }
        let mut hidden = p.b1.clone();
        for (i, &x) in input.iter().enumerate() {
            let row = &p.w1[i * h..(i + 1) * h];
            for (acc, &w) in hidden.iter_mut().zip(row) {
                *acc += x * w;
            }
        }
        hidden.iter_mut().for_each(|a| *a = a.tanh());
        let mut logits = p.b2.clone();
        for (j, &a) in hidden.iter().enumerate() {
            let row = &p.w2[j * v..(j + 1) * v];
            for (acc, &w) in logits.iter_mut().zip(row) {
                *acc += a * w;
            }
        }
        Activations {
            input,
            hidden,
            logits,
        }
    }

    /// Accumulates gradients of the cross-entropy at one position; returns
    /// the loss. `scale` weights this position's contribution.
    #[allow(clippy::needless_range_loop)]
    fn backward(&self, window: &[Token], target: Token, scale: f32, grad: &mut Params) -> f64 {
        let (d, h, v) = (self.config.embed_dim, self.config.hidden, self.vocab.len());
        let act = self.forward(window);
        let max = act.logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut probs: Vec<f32> = act.logits.iter().map(|&l| (l - max).exp()).collect();
        let total: f32 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let target = target as usize;
        // Log-sum-exp form: no clamping, so a diverged model yields NaN/inf.
        let loss = f64::from(total).ln() - f64::from(act.logits[target] - max);

        let mut dlogits = probs;
        dlogits[target] -= 1.0;
        dlogits.iter_mut().for_each(|g| *g *= scale);

        let p = &self.params;
        for (g, &dl) in grad.b2.iter_mut().zip(&dlogits) {
            *g += dl;
        }
        let mut dhidden = vec![0.0f32; h];
        for j in 0..h {
            let a = act.hidden[j];
            let row = &p.w2[j * v..(j + 1) * v];
            let grow = &mut grad.w2[j * v..(j + 1) * v];
            let mut acc = 0.0;
            for k in 0..v {
                grow[k] += a * dlogits[k];
                acc += row[k] * dlogits[k];
            }
            dhidden[j] = acc * (1.0 - a * a);
        }
        for (g, &dh) in grad.b1.iter_mut().zip(&dhidden) {
            *g += dh;
        }
        for (i, &x) in act.input.iter().enumerate() {
            let row = &p.w1[i * h..(i + 1) * h];
            let grow = &mut grad.w1[i * h..(i + 1) * h];
            let mut dx = 0.0;
            for j in 0..h {
                grow[j] += x * dhidden[j];
                dx += row[j] * dhidden[j];
            }
            let t = (window[i / d] as usize).min(v - 1);
            grad.embedding[t * d + i % d] += dx;
        }
        loss
    }

    fn adam_update(&mut self, grad: &Params, lr: f64) {
        const B1: f32 = 0.9;
        const B2: f32 = 0.999;
        const EPS: f32 = 1e-8;
        let adam = self.adam.get_or_insert_with(|| Adam {
            m: self.params.zeros_like(),
            v: self.params.zeros_like(),
            t: 0,
        });
        adam.t += 1;
        let lr_t = lr as f32 * (1.0 - B2.powi(adam.t)).sqrt() / (1.0 - B1.powi(adam.t));
        let params = self.params.slices_mut();
        let ms = adam.m.slices_mut();
        let vs = adam.v.slices_mut();
        for (((p, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(grad.slices()) {
            for i in 0..p.len() {
                m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                p[i] -= lr_t * m[i] / (v[i].sqrt() + EPS);
            }
        }
    }
}

impl ModelBackend for CharModel {
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
        self.config.max_sequence
    }

    fn next_token_logits(&self, context: &[Token]) -> Result<Vec<f32>, LmError> {
        let window = self.window(context, context.len());
        Ok(self.forward(&window).logits)
    }

    fn train_step(&mut self, batch: &[Vec<Token>], learning_rate: f64) -> Result<f64, LmError> {
        let positions: usize = batch.iter().map(|s| s.len().saturating_sub(1)).sum();
        if positions == 0 {
            return Err(LmError::Backend("batch has no predictable positions".into()));
        }
        let scale = 1.0 / positions as f32;
        let mut grad = self.params.zeros_like();
        let mut loss = 0.0;
        for seq in batch {
            for t in 1..seq.len() {
                let window = self.window(seq, t);
                loss += self.backward(&window, seq[t], scale, &mut grad);
            }
        }
        let loss = loss / positions as f64;
        if !loss.is_finite() {
            return Ok(loss);
        }
        self.adam_update(&grad, learning_rate);
        Ok(loss)
    }

    fn save(&self, dir: &Path) -> Result<(), LmError> {
        let path = dir.join(MODEL_FILE);
        let err = |reason: String| LmError::Checkpoint {
            path: path.display().to_string(),
            reason,
        };
        fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
        let json = serde_json::to_string(self).map_err(|e| err(e.to_string()))?;
        fs::write(&path, json).map_err(|e| err(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CharModel {
        let config = ModelConfig {
            context: 3,
            embed_dim: 4,
            hidden: 8,
            max_sequence: 64,
        };
        CharModel::new(CharVocab::from_texts([]), config, 9)
    }

    fn loss_at(model: &CharModel, seq: &[Token]) -> f64 {
        let mut total = 0.0;
        for t in 1..seq.len() {
            let w = model.window(seq, t);
            let act = model.forward(&w);
            let max = act.logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
            let lse = act.logits.iter().map(|&l| (l as f64 - max).exp()).sum::<f64>().ln() + max;
            total += lse - act.logits[seq[t] as usize] as f64;
        }
        total / (seq.len() - 1) as f64
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = tiny();
        let seq = model.encode("<|s|>ab => cab<|e|>");
        let mut grad = model.params.zeros_like();
        let scale = 1.0 / (seq.len() - 1) as f32;
        for t in 1..seq.len() {
            let w = model.window(&seq, t);
            model.backward(&w, seq[t], scale, &mut grad);
        }
        let eps = 1e-2f32;
        // Spot-check a handful of coordinates in every tensor.
        for which in 0..5 {
            let len = model.params.slices()[which].len();
            for idx in [0, len / 3, len / 2, len - 1] {
                let mut plus = model.clone();
                plus.params.slices_mut()[which][idx] += eps;
                let mut minus = model.clone();
                minus.params.slices_mut()[which][idx] -= eps;
                let numeric = (loss_at(&plus, &seq) - loss_at(&minus, &seq)) / (2.0 * eps as f64);
                let analytic = grad.slices()[which][idx] as f64;
                assert!(
                    (numeric - analytic).abs() < 2e-3 + 0.05 * numeric.abs(),
                    "tensor {which} idx {idx}: numeric {numeric} analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn training_reduces_loss_on_one_example() {
        let mut model = tiny();
        let seq = model.encode("<|s|>gun => Toy gun<|e|>");
        let first = model.train_step(std::slice::from_ref(&seq), 1e-2).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = model.train_step(std::slice::from_ref(&seq), 1e-2).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn divergence_surfaces_as_non_finite_loss() {
        let mut model = tiny();
        let seq = model.encode("<|s|>ab => abc<|e|>");
        assert!(model.train_step(std::slice::from_ref(&seq), 1e300).unwrap().is_finite());
        let later: Vec<f64> = (0..3).map(|_| model.train_step(std::slice::from_ref(&seq), 1e300).unwrap()).collect();
        assert!(later.iter().any(|l| !l.is_finite()), "{later:?}");
    }

    #[test]
    fn save_load_preserves_logits() {
        let dir = tempfile::tempdir().unwrap();
        let model = tiny();
        model.save(dir.path()).unwrap();
        let back = CharModel::load(dir.path()).unwrap();
        let ctx = model.encode("<|s|>toy => ");
        assert_eq!(model.next_token_logits(&ctx).unwrap(), back.next_token_logits(&ctx).unwrap());
        assert_eq!(back.vocab_size(), model.vocab_size());
        assert!(CharModel::load(&dir.path().join("nope")).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = tiny();
        let b = tiny();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.next_token_logits(&[]).unwrap().len(), a.vocab_size());
    }
}
