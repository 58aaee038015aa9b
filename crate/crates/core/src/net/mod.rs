//! Dense networks with hand-written reverse mode, action heads, Adam and
//! a checkpoint container. All arithmetic is `f64`.

mod adam;
mod container;
mod dist;
mod mlp;

pub use adam::{adam_step, AdamConfig, OptimizerState, DEFAULT_LEARNING_RATE};
pub use container::{Container, CONTAINER_VERSION};
pub use dist::{
    argmax, categorical_entropy, categorical_log_prob, categorical_sample, clamp_log_std,
    gaussian_entropy, gaussian_log_prob, gaussian_sample, log_softmax, softmax, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use mlp::{Dense, Gradients, Mlp, MlpCache, DEFAULT_HIDDEN};

use crate::error::{Error, Result};

/// Anything Adam can update: an ordered list of flat parameter segments.
pub trait Parameters {
    fn segments(&self) -> Vec<&[f64]>;
    fn segments_mut(&mut self) -> Vec<&mut [f64]>;
    /// Called after an in-place update.
    fn mark_updated(&mut self) {}
}

/// Stores `net` under `prefix` in `c`.
pub fn store_mlp(c: &mut Container, prefix: &str, net: &Mlp) {
    c.blobs.insert(
        format!("{prefix}.widths"),
        net.widths().iter().map(|&w| w as f64).collect(),
    );
    for (i, seg) in net.segments().into_iter().enumerate() {
        c.blobs.insert(format!("{prefix}.p{i:03}"), seg.to_vec());
    }
}

pub fn load_mlp(c: &Container, prefix: &str) -> Result<Mlp> {
    let widths: Vec<usize> = c
        .blob(&format!("{prefix}.widths"))?
        .iter()
        .map(|&w| w as usize)
        .collect();
    let mut net = Mlp::zeros(&widths)?;
    for (i, seg) in net.segments_mut().into_iter().enumerate() {
        let src = c.blob(&format!("{prefix}.p{i:03}"))?;
        if src.len() != seg.len() {
            return Err(Error::Checkpoint(format!("{prefix} segment {i} has wrong length")));
        }
        seg.copy_from_slice(src);
    }
    Ok(net)
}

pub fn store_optimizer(c: &mut Container, prefix: &str, s: &OptimizerState) {
    let cfg = s.config;
    c.blobs.insert(
        format!("{prefix}.config"),
        vec![cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon],
    );
    c.blobs.insert(format!("{prefix}.step"), vec![s.step as f64]);
    for (i, (m, v)) in s.first.iter().zip(&s.second).enumerate() {
        c.blobs.insert(format!("{prefix}.m{i:03}"), m.clone());
        c.blobs.insert(format!("{prefix}.v{i:03}"), v.clone());
    }
}

pub fn load_optimizer<P: Parameters + ?Sized>(c: &Container, prefix: &str, params: &P) -> Result<OptimizerState> {
    let cfg = c.blob(&format!("{prefix}.config"))?;
    if cfg.len() != 4 {
        return Err(Error::Checkpoint(format!("{prefix}.config has wrong length")));
    }
    let mut s = OptimizerState::new(
        params,
        AdamConfig {
            learning_rate: cfg[0],
            beta1: cfg[1],
            beta2: cfg[2],
            epsilon: cfg[3],
        },
    );
    s.step = c.blob(&format!("{prefix}.step"))?.first().copied().unwrap_or(0.0) as u64;
    for i in 0..s.first.len() {
        let m = c.blob(&format!("{prefix}.m{i:03}"))?;
        let v = c.blob(&format!("{prefix}.v{i:03}"))?;
        if m.len() != s.first[i].len() || v.len() != s.second[i].len() {
            return Err(Error::Checkpoint(format!("{prefix} moment {i} has wrong length")));
        }
        s.first[i].copy_from_slice(m);
        s.second[i].copy_from_slice(v);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_and_optimizer_round_trip_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut net = Mlp::new(&[3, 7, 2], 0.5, &mut rng).unwrap();
        let mut opt = OptimizerState::new(&net, AdamConfig::default());
        let (_, cache) = net.forward(&[0.3, -0.1, 0.9]).unwrap();
        let g = net
            .backward(&cache, ndarray::Array2::from_elem((1, 2), 0.7).view())
            .unwrap();
        adam_step(&mut net, &g, &mut opt).unwrap();

        let mut c = Container::default();
        c.manifest = serde_json::json!({"kind": "test"});
        store_mlp(&mut c, "net", &net);
        store_optimizer(&mut c, "opt", &opt);
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        let net2 = load_mlp(&back, "net").unwrap();
        let opt2 = load_optimizer(&back, "opt", &net2).unwrap();
        for (a, b) in net.segments().iter().zip(net2.segments()) {
            let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(opt, opt2);
    }
}
