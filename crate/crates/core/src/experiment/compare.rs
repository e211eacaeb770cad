//! Near-field vs far-field novelty comparison with a two-sided rank-sum
//! (Mann-Whitney U) test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ExperimentError;
use crate::novelty::NoveltyOutcome;

pub const MIN_SAMPLE: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FarLower,
    NearLower,
    Indistinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldComparison {
    pub near_scores: Vec<f64>,
    pub far_scores: Vec<f64>,
    pub median_near: f64,
    pub median_far: f64,
    /// U statistic of the far sample: the number of (far, near) pairs with
    /// far > near, ties counting one half.
    pub rank_sum_statistic: f64,
    pub z: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub direction: Direction,
}

/// Midranks (1-based) of the pooled sample.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Returns `(U_far, z, two-sided p)` using the normal approximation with
/// tie-corrected variance and no continuity correction.
pub fn rank_sum_test(near: &[f64], far: &[f64]) -> (f64, f64, f64) {
    let (n1, n2) = (near.len() as f64, far.len() as f64);
    let pooled: Vec<f64> = near.iter().chain(far).copied().collect();
    let ranks = midranks(&pooled);
    let far_rank_sum: f64 = ranks[near.len()..].iter().sum();
    let u_far = far_rank_sum - n2 * (n2 + 1.0) / 2.0;

    let n = n1 + n2;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let mean = n1 * n2 / 2.0;
    if variance <= 0.0 {
        return (u_far, 0.0, 1.0);
    }
    let z = (u_far - mean) / variance.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * normal.cdf(-z.abs())).min(1.0);
    (u_far, z, p)
}

/// Tests whether far-field ideas have lower minimum relevancy than
/// near-field ones.
pub fn compare_fields(near: &[f64], far: &[f64], alpha: f64) -> Result<FieldComparison, ExperimentError> {
    if near.len() < MIN_SAMPLE || far.len() < MIN_SAMPLE {
        return Err(ExperimentError::InsufficientSample {
            near: near.len(),
            far: far.len(),
        });
    }
    let (u, z, p_value) = rank_sum_test(near, far);
    let (median_near, median_far) = (median(near), median(far));
    let direction = if p_value < alpha && median_far < median_near {
        Direction::FarLower
    } else if p_value < alpha && median_near < median_far {
        Direction::NearLower
    } else {
        Direction::Indistinct
    };
    Ok(FieldComparison {
        near_scores: near.to_vec(),
        far_scores: far.to_vec(),
        median_near,
        median_far,
        rank_sum_statistic: u,
        z,
        p_value,
        alpha,
        direction,
    })
}

/// Minimum scores of the scorable outcomes.
pub fn min_scores(outcomes: &[NoveltyOutcome]) -> Vec<f64> {
    outcomes
        .iter()
        .filter_map(|o| o.report().map(|r| r.min_score))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_u(near: &[f64], far: &[f64]) -> f64 {
        let mut u = 0.0;
        for f in far {
            for n in near {
                if f > n {
                    u += 1.0;
                } else if f == n {
                    u += 0.5;
                }
            }
        }
        u
    }

    #[test]
    fn fully_separated_is_far_lower() {
        let c = compare_fields(&[0.5, 0.6, 0.7], &[0.1, 0.2, 0.3], 0.05).unwrap();
        assert_eq!(c.direction, Direction::FarLower);
        assert_eq!(c.rank_sum_statistic, 0.0);
        assert!(c.p_value < 0.05);
    }

    #[test]
    fn identical_is_indistinct() {
        let xs = [0.2, 0.4, 0.4, 0.9];
        let c = compare_fields(&xs, &xs, 0.05).unwrap();
        assert_eq!(c.direction, Direction::Indistinct);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        let flat = compare_fields(&[0.3; 3], &[0.3; 3], 0.05).unwrap();
        assert_eq!(flat.p_value, 1.0);
    }

    #[test]
    fn four_by_four_matches_pair_count() {
        let near = [0.4, 0.5, 0.6, 0.7];
        let far = [0.1, 0.2, 0.3, 0.65];
        let c = compare_fields(&near, &far, 0.05).unwrap();
        assert_eq!(c.rank_sum_statistic, brute_u(&near, &far));
        assert_eq!(c.rank_sum_statistic, 3.0);
    }

    #[test]
    fn small_samples_rejected() {
        assert!(matches!(
            compare_fields(&[0.1, 0.2], &[0.1, 0.2, 0.3], 0.05),
            Err(ExperimentError::InsufficientSample { near: 2, far: 3 })
        ));
    }

    #[test]
    fn p_value_matches_reference_normal_approximation() {
        // Reference values from an independent asymptotic Mann-Whitney
        // implementation without continuity correction.
        let (_, z, p) = rank_sum_test(&[6.0, 7.0, 8.0, 9.0, 10.0], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((z + 12.5 / (25.0f64 * 11.0 / 12.0).sqrt()).abs() < 1e-12);
        assert!((p - 0.009_023_438_818).abs() < 1e-9, "{p}");
        let (_, _, p) = rank_sum_test(&[0.5, 0.6, 0.7], &[0.1, 0.2, 0.3]);
        assert!((p - 0.049_534_613_436).abs() < 1e-9, "{p}");
    }

    proptest! {
        #[test]
        fn u_matches_brute_and_is_antisymmetric(
            near in prop::collection::vec(0u8..6, 3..12),
            far in prop::collection::vec(0u8..6, 3..12),
        ) {
            let near: Vec<f64> = near.into_iter().map(f64::from).collect();
            let far: Vec<f64> = far.into_iter().map(f64::from).collect();
            let a = compare_fields(&near, &far, 0.05).unwrap();
            let b = compare_fields(&far, &near, 0.05).unwrap();
            prop_assert_eq!(a.rank_sum_statistic, brute_u(&near, &far));
            prop_assert_eq!(a.rank_sum_statistic + b.rank_sum_statistic, (near.len() * far.len()) as f64);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
            let flipped = match a.direction {
                Direction::FarLower => Direction::NearLower,
                Direction::NearLower => Direction::FarLower,
                Direction::Indistinct => Direction::Indistinct,
            };
            prop_assert_eq!(b.direction, flipped);
        }
    }
}
