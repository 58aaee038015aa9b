use rand::Rng;

use crate::error::{Error, Result};

/// Splits one step's rewards between AVs.
///
/// A single Bernoulli(`p`) draw decides the step: on success every AV gets
/// the fleet reward (the mean of the individual rewards), otherwise each
/// keeps its own. Returns the assigned rewards and whether the step was a
/// fleet step. No draw is made when `individual` is empty.
pub fn assign_rewards<R: Rng + ?Sized>(individual: &[f64], p: f64, rng: &mut R) -> (Vec<f64>, bool) {
    if individual.is_empty() {
        return (Vec::new(), false);
    }
    let fleet = rng.gen::<f64>() < p;
    if fleet {
        let mean = individual.iter().sum::<f64>() / individual.len() as f64;
        (vec![mean; individual.len()], true)
    } else {
        (individual.to_vec(), false)
    }
}

/// Generalized advantage estimation over one chain.
///
/// `values` has one more entry than `rewards`: the last is the bootstrap
/// value after the final step. `dones[t]` cuts the chain after step `t`.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n + 1 {
        return Err(Error::Dimension {
            expected: n + 1,
            got: values.len(),
        });
    }
    if dones.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shifts and scales to mean 0, standard deviation 1. A constant input is
/// only centred.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    for x in xs {
        *x = (*x - mean) * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_terminal_step() {
        let (a, r) = gae(&[1.0], &[0.0, 0.0], &[true], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn lambda_zero_is_td0() {
        let rewards = [0.5, -1.0, 2.0];
        let values = [0.1, 0.2, 0.3, 0.4];
        let (a, _) = gae(&rewards, &values, &[false; 3], 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert_eq!(a[t], rewards[t] + 0.9 * values[t + 1] - values[t]);
        }
    }

    #[test]
    fn three_step_hand_recursion() {
        // delta = (1 - 0.5 + 0.45, 1 - 0.5 + 0.45, 1 - 0.5) = (0.95, 0.95, 0.5)
        // A2 = 0.5; A1 = 0.95 + 0.72 * 0.5 = 1.31; A0 = 0.95 + 0.72 * 1.31 = 1.8932
        let (a, r) = gae(&[1.0; 3], &[0.5, 0.5, 0.5, 0.0], &[false, false, true], 0.9, 0.8).unwrap();
        let expect = [1.8932, 1.31, 0.5];
        for t in 0..3 {
            assert!((a[t] - expect[t]).abs() < 1e-12, "{a:?}");
            assert!((r[t] - (expect[t] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(gae(&[1.0; 2], &[0.0; 2], &[false; 2], 0.9, 0.9).is_err());
        assert!(gae(&[1.0; 2], &[0.0; 3], &[false; 1], 0.9, 0.9).is_err());
    }

    #[test]
    fn degenerate_fleet_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = [1.0, 2.0, 6.0];
        for _ in 0..100 {
            assert_eq!(assign_rewards(&r, 0.0, &mut rng), (r.to_vec(), false));
            assert_eq!(assign_rewards(&r, 1.0, &mut rng), (vec![3.0; 3], true));
        }
    }

    #[test]
    fn normalized_moments() {
        let mut x = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut x);
        let mean: f64 = x.iter().sum::<f64>() / 4.0;
        let var: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-12);
        let mut c = vec![2.0; 3];
        normalize(&mut c);
        assert_eq!(c, vec![0.0; 3]);
    }
}
