//! Joint action likelihood of the actor and its gradients with respect to
//! the raw head outputs.

use crate::net::{
    categorical_entropy, clamp_log_std, gaussian_entropy, gaussian_log_prob, log_softmax, softmax,
    LOG_STD_MAX, LOG_STD_MIN,
};

use super::GatingMode;

/// What was sampled for one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction<'a> {
    /// Gaussian draw: the residual under hard gating, the full pre-clip
    /// command under soft gating.
    pub gaussian: f64,
    pub gate_index: usize,
    /// Pool outputs in pool order, used by soft gating.
    pub pool: &'a [f64],
}

/// Log-probability, entropy and their gradients for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadTerms {
    pub log_prob: f64,
    pub gaussian_entropy: f64,
    pub categorical_entropy: f64,
    /// d log_prob / d head output (residual mean first, then gate logits).
    pub d_log_prob: Vec<f64>,
    pub d_log_prob_log_std: f64,
    /// d categorical entropy / d head output (zero on the residual entry).
    pub d_cat_entropy: Vec<f64>,
    /// d Gaussian entropy / d log-std.
    pub d_gauss_entropy_log_std: f64,
}

/// Mean of the Gaussian head. Under soft gating the softmax-weighted pool
/// is folded into the mean.
pub fn gaussian_mean(mode: GatingMode, head: &[f64], pool: &[f64]) -> f64 {
    match mode {
        GatingMode::Hard => head[0],
        GatingMode::Soft => {
            let g = softmax(&head[1..]);
            head[0] + g.iter().zip(pool).map(|(g, q)| g * q).sum::<f64>()
        }
    }
}

pub fn head_terms(mode: GatingMode, head: &[f64], log_std: f64, a: &SampledAction<'_>) -> HeadTerms {
    let k = head.len() - 1;
    let logits = &head[1..];
    let probs = softmax(logits);
    let ls = clamp_log_std(log_std);
    let inside = (LOG_STD_MIN..=LOG_STD_MAX).contains(&log_std);
    let sigma = ls.exp();
    let mean = gaussian_mean(mode, head, a.pool);
    let z = (a.gaussian - mean) / sigma;

    let mut d_log_prob = vec![0.0; k + 1];
    let d_mean = z / sigma;
    let mut log_prob = gaussian_log_prob(&[mean], &[log_std], &[a.gaussian]);
    d_log_prob[0] = d_mean;
    match mode {
        GatingMode::Hard => {
            log_prob += log_softmax(logits)[a.gate_index];
            for j in 0..k {
                let onehot = if j == a.gate_index { 1.0 } else { 0.0 };
                d_log_prob[1 + j] = onehot - probs[j];
            }
        }
        GatingMode::Soft => {
            let blended: f64 = probs.iter().zip(a.pool).map(|(p, q)| p * q).sum();
            for j in 0..k {
                d_log_prob[1 + j] = d_mean * probs[j] * (a.pool[j] - blended);
            }
        }
    }

    let h_cat = categorical_entropy(logits);
    let logp = log_softmax(logits);
    let mut d_cat_entropy = vec![0.0; k + 1];
    for j in 0..k {
        d_cat_entropy[1 + j] = -probs[j] * (logp[j] + h_cat);
    }
    let gate = if inside { 1.0 } else { 0.0 };
    HeadTerms {
        log_prob,
        gaussian_entropy: gaussian_entropy(&[log_std]),
        categorical_entropy: h_cat,
        d_log_prob,
        d_log_prob_log_std: gate * (z * z - 1.0),
        d_cat_entropy,
        d_gauss_entropy_log_std: gate,
    }
}
