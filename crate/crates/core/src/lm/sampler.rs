//! Top-k / temperature sampling.
//!
//! Order is fixed: top-k filter first, then divide the survivors by the
//! temperature, then sample from their softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LmError;

/// Keeps the `k` largest logits and sets the rest to `-inf`. At a tie on
/// the boundary the lower index survives. `k >= len` is the identity.
pub fn top_k_filter(logits: &[f32], k: usize) -> Vec<f32> {
    if k >= logits.len() {
        return logits.to_vec();
    }
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| key(logits[b]).total_cmp(&key(logits[a])).then(a.cmp(&b)));
    let mut out = vec![f32::NEG_INFINITY; logits.len()];
    for &i in &order[..k] {
        out[i] = logits[i];
    }
    out
}

fn key(x: f32) -> f32 {
    if x.is_nan() {
        f32::NEG_INFINITY
    } else {
        x
    }
}

/// Draws a token index given a uniform `u` in `[0, 1)`.
pub fn sample_token(logits: &[f32], temperature: f64, top_k: usize, u: f64) -> Result<usize, LmError> {
    // Also rejects NaN.
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(LmError::InvalidConfig("temperature must be positive".into()));
    }
    let filtered = top_k_filter(logits, top_k.max(1));
    let scaled: Vec<f64> = filtered
        .iter()
        .map(|&x| {
            if x.is_finite() {
                f64::from(x) / temperature
            } else if x == f32::INFINITY {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(LmError::NoViableToken);
    }
    let weights: Vec<f64> = if max == f64::INFINITY {
        scaled.iter().map(|&x| if x == f64::INFINITY { 1.0 } else { 0.0 }).collect()
    } else {
        scaled.iter().map(|&x| (x - max).exp()).collect()
    };
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return Ok(i);
        }
    }
    Ok(last)
}

/// Counter-based uniform draw in `[0, 1)` keyed by `(seed, sample, step)`.
///
/// Each sample gets its own ChaCha stream, so a sample's tokens do not
/// depend on which other samples were drawn or in what order.
pub fn uniform_draw(seed: u64, sample_index: usize, step: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index as u64);
    rng.set_word_pos(step as u128 * 2);
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NEG: f32 = f32::NEG_INFINITY;

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k_filter(&[2.0, 1.0, 0.5], 2), vec![2.0, 1.0, NEG]);
        assert_eq!(top_k_filter(&[2.0, 3.0, 0.5], 1), vec![NEG, 3.0, NEG]);
        assert_eq!(top_k_filter(&[2.0, 1.0, 0.5], 3), vec![2.0, 1.0, 0.5]);
        assert_eq!(top_k_filter(&[2.0, 1.0, 0.5], 10), vec![2.0, 1.0, 0.5]);
        // boundary tie: lower index kept
        assert_eq!(top_k_filter(&[1.0, 3.0, 1.0], 2), vec![1.0, 3.0, NEG]);
    }

    #[test]
    fn all_masked_is_error() {
        assert!(matches!(sample_token(&[NEG, NEG], 1.0, 2, 0.5), Err(LmError::NoViableToken)));
    }

    #[test]
    fn top1_is_argmax() {
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(sample_token(&[0.1, 5.0, 4.9], 3.0, 1, u).unwrap(), 1);
        }
    }

    fn frequency(logits: &[f32], temperature: f64, token: usize, draws: usize) -> f64 {
        let hits = (0..draws)
            .filter(|&i| sample_token(logits, temperature, 50, uniform_draw(7, i, 0)).unwrap() == token)
            .count();
        hits as f64 / draws as f64
    }

    #[test]
    fn frequencies_match_softmax() {
        let l2 = 2f32.ln();
        let f = frequency(&[l2, 0.0, NEG], 1.0, 0, 10_000);
        assert!((f - 2.0 / 3.0).abs() < 0.02, "{f}");
        let p = 1.0 / (1.0 + (-1.0f64 / 0.9).exp());
        assert!((p - 0.752).abs() < 5e-4);
        let f = frequency(&[1.0, 0.0], 0.9, 0, 10_000);
        assert!((f - p).abs() < 0.02, "{f}");
    }

    #[test]
    fn colder_temperature_concentrates() {
        // Analytic two-token probability at three temperatures.
        let p = |t: f64| 1.0 / (1.0 + (-1.0 / t).exp());
        assert!(p(0.5) > p(0.9) && p(0.9) > p(1.5));
        // Near zero temperature the sampler is effectively argmax.
        for i in 0..200 {
            assert_eq!(sample_token(&[1.0, 0.9], 1e-4, 2, uniform_draw(1, i, 0)).unwrap(), 0);
        }
    }

    #[test]
    fn draws_are_keyed() {
        assert_eq!(uniform_draw(5, 3, 9), uniform_draw(5, 3, 9));
        assert_ne!(uniform_draw(5, 3, 9), uniform_draw(5, 4, 9));
        assert_ne!(uniform_draw(5, 3, 9), uniform_draw(5, 3, 10));
        assert_ne!(uniform_draw(5, 3, 9), uniform_draw(6, 3, 9));
        let u = uniform_draw(0, 0, 0);
        assert!((0.0..1.0).contains(&u));
    }

    proptest! {
        #[test]
        fn top_k_keeps_argmax_and_is_idempotent(
            logits in prop::collection::vec(-10.0f32..10.0, 1..40),
            k in 1usize..50,
        ) {
            let once = top_k_filter(&logits, k);
            prop_assert_eq!(&top_k_filter(&once, k), &once);
            let argmax = (0..logits.len()).fold(0, |b, i| if logits[i] > logits[b] { i } else { b });
            prop_assert_eq!(once[argmax], logits[argmax]);
            prop_assert_eq!(once.iter().filter(|x| x.is_finite()).count(), k.min(logits.len()));
        }

        #[test]
        fn samples_stay_in_top_k(
            logits in prop::collection::vec(-5.0f32..5.0, 2..30),
            k in 1usize..10,
            seed in any::<u64>(),
        ) {
            let kept = top_k_filter(&logits, k);
            for i in 0..1000 {
                let t = sample_token(&logits, 0.9, k, uniform_draw(seed, i, 0)).unwrap();
                prop_assert!(kept[t].is_finite());
            }
        }
    }
}
