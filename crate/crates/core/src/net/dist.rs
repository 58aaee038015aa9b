//! Diagonal Gaussian and categorical action heads.

use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn clamp_log_std(log_std: f64) -> f64 {
    log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Log-density of `x` under a diagonal Gaussian. Log-stds are clamped to
/// `[LOG_STD_MIN, LOG_STD_MAX]`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((&m, &ls), &x)| {
            let ls = clamp_log_std(ls);
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Reparameterized sample `mean + std * noise` and its log-density.
pub fn gaussian_sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let x: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let n: f64 = rng.sample(StandardNormal);
            m + clamp_log_std(ls).exp() * n
        })
        .collect();
    let lp = gaussian_log_prob(mean, log_std, &x);
    (x, lp)
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|&ls| 0.5 + HALF_LN_2PI + clamp_log_std(ls)).sum()
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate().skip(1) {
        if z > logits[best] {
            best = i;
        }
    }
    best
}

pub fn categorical_log_prob(logits: &[f64], index: usize) -> f64 {
    log_softmax(logits)[index]
}

/// Samples an index by inverse CDF on the softmax; returns it with its
/// log-probability.
pub fn categorical_sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let probs = softmax(logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut index = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            index = i;
            break;
        }
    }
    (index, log_softmax(logits)[index])
}

pub fn categorical_entropy(logits: &[f64]) -> f64 {
    let logp = log_softmax(logits);
    -logp.iter().map(|&lp| lp.exp() * lp).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_at_zero() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp - -0.918_938_533_204_672_7).abs() < 1e-15);
        assert!((lp + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn peak_density_per_dimension() {
        let sigma: f64 = 0.3;
        let ls = sigma.ln();
        let lp = gaussian_log_prob(&[1.0, -2.0], &[ls, ls], &[1.0, -2.0]);
        let expected = 2.0 * (-sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln());
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sampling_is_seeded() {
        let a = gaussian_sample(&[0.5], &[-1.0], &mut ChaCha8Rng::seed_from_u64(9));
        let b = gaussian_sample(&[0.5], &[-1.0], &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_softmax() {
        assert_eq!(softmax(&[1.5; 5]), vec![0.2; 5]);
    }

    #[test]
    fn dominant_logit() {
        let p = softmax(&[10.0, 0.0, 0.0, 0.0, 0.0]);
        // e^10 / (e^10 + 4)
        let expected = 1.0 / (1.0 + 4.0 * (-10.0f64).exp());
        assert!((p[0] - expected).abs() < 1e-15);
        assert!(p[0] > 0.9998);
        assert_eq!(argmax(&[10.0, 0.0, 0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn shift_invariance_is_bitwise() {
        let z = [0.25, -1.0, 3.0, 0.0, 2.5];
        let shifted: Vec<f64> = z.iter().map(|v| v + 7.0).collect();
        assert_eq!(softmax(&z), softmax(&shifted));
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.0; 5]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn categorical_log_prob_matches_softmax() {
        let z = [0.3, -0.2, 1.1];
        let p = softmax(&z);
        for i in 0..3 {
            assert!((categorical_log_prob(&z, i) - p[i].ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn entropies() {
        assert!((categorical_entropy(&[0.0; 4]) - 4.0f64.ln()).abs() < 1e-14);
        assert!((gaussian_entropy(&[0.0]) - (0.5 + HALF_LN_2PI)).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn softmax_is_on_the_simplex(z in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
            let p = softmax(&z);
            proptest::prop_assert!(p.iter().all(|&v| v >= 0.0));
            proptest::prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
