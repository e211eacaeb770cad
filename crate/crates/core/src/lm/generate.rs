use super::{sample_token, uniform_draw, GenerationConfig, LmError, ModelBackend};
use crate::dataset::{SEPARATOR, START};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    /// The end delimiter was never produced within `max_new_tokens`.
    pub truncated: bool,
}

/// Samples one continuation of `<|s|>KEYWORD => ` until the end token or
/// `max_new_tokens`. Randomness is keyed by `(config.seed, sample_index,
/// step)`, so the result does not depend on other samples.
pub fn generate_text<B: ModelBackend + ?Sized>(
    backend: &B,
    keyword: &str,
    config: &GenerationConfig,
    sample_index: usize,
) -> Result<Generation, LmError> {
    config.validate()?;
    let mut context = backend.encode(&format!("{START}{keyword}{SEPARATOR}"));
    let prompt_len = context.len();
    let end = backend.end_token();
    let mut truncated = true;
    for step in 0..config.max_new_tokens {
        let logits = backend.next_token_logits(&context)?;
        if logits.len() != backend.vocab_size() {
            return Err(LmError::Backend(format!(
                "logits length {} != vocabulary size {}",
                logits.len(),
                backend.vocab_size()
            )));
        }
        let u = uniform_draw(config.seed, sample_index, step);
        let token = sample_token(&logits, config.temperature, config.top_k, u)? as u32;
        if token == end {
            truncated = false;
            break;
        }
        context.push(token);
    }
    let text = backend.decode(&context[prompt_len..]).trim().to_string();
    Ok(Generation { text, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::testing::ScriptedBackend;
    use crate::lm::{CharModel, CharVocab, ModelConfig};

    #[test]
    fn stops_at_end_delimiter() {
        let backend = ScriptedBackend::new("air gun<|e|>");
        let out = generate_text(&backend, "gun", &GenerationConfig::default(), 0).unwrap();
        assert_eq!(out, Generation { text: "air gun".into(), truncated: false });
    }

    #[test]
    fn cutoff_without_end() {
        let backend = ScriptedBackend::new("abcdefghijklmnopqrstuvwxyz");
        let config = GenerationConfig { max_new_tokens: 7, ..Default::default() };
        let out = generate_text(&backend, "gun", &config, 0).unwrap();
        assert_eq!(out, Generation { text: "abcdefg".into(), truncated: true });
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let model = CharModel::new(CharVocab::from_texts([]), ModelConfig::default(), 4);
        let config = GenerationConfig { max_new_tokens: 30, seed: 99, ..Default::default() };
        let a = generate_text(&model, "rolling toy", &config, 5).unwrap();
        let b = generate_text(&model, "rolling toy", &config, 5).unwrap();
        assert_eq!(a, b);
        let c = generate_text(&model, "rolling toy", &config, 6).unwrap();
        assert_ne!(a, c);
    }
}
