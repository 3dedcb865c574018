//! Named weight tensors, their expected shapes for a config, and seeded
//! initialisation.

use std::collections::BTreeMap;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `±1/sqrt(fan_in)`, fan-in = last dimension.
    FanIn,
    Zeros,
    Ones,
    /// Row `d`, column `s` holds `ln(s + 1)`, so `A = -exp(a_log)` starts at
    /// `-(s + 1)`.
    StateDecay,
    /// Inverse softplus of a step size drawn log-uniformly in `[1e-3, 1e-1]`.
    StepBias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

struct SpecList(Vec<TensorSpec>);

impl SpecList {
    fn push(&mut self, name: impl Into<String>, shape: &[usize], init: Init) {
        self.0.push(TensorSpec {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        });
    }

    fn linear(&mut self, prefix: &str, input: usize, output: usize) {
        self.push(format!("{prefix}.weight"), &[output, input], Init::FanIn);
        self.push(format!("{prefix}.bias"), &[output], Init::Zeros);
    }

    fn norm(&mut self, prefix: &str, width: usize) {
        self.push(format!("{prefix}.gamma"), &[width], Init::Ones);
        self.push(format!("{prefix}.beta"), &[width], Init::Zeros);
    }

    fn ssm(&mut self, prefix: &str, width: usize, state: usize) {
        self.push(format!("{prefix}.a_log"), &[width, state], Init::StateDecay);
        self.push(
            format!("{prefix}.delta.weight"),
            &[width, width],
            Init::FanIn,
        );
        self.push(format!("{prefix}.delta.bias"), &[width], Init::StepBias);
        self.push(
            format!("{prefix}.b_proj.weight"),
            &[state, width],
            Init::FanIn,
        );
        self.push(
            format!("{prefix}.c_proj.weight"),
            &[state, width],
            Init::FanIn,
        );
        self.push(format!("{prefix}.d_skip"), &[width], Init::Ones);
    }

    fn attention(&mut self, prefix: &str, width: usize, heads: usize, geometric: bool) {
        for p in ["q", "k", "v", "o"] {
            self.linear(&format!("{prefix}.{p}"), width, width);
        }
        if geometric {
            self.linear(&format!("{prefix}.geo.0"), 3, width);
            self.linear(&format!("{prefix}.geo.1"), width, heads);
        }
    }
}

/// Every tensor the forward pass reads for `cfg`, in initialisation order.
pub fn expected_tensors(cfg: &ModelConfig) -> Vec<TensorSpec> {
    let d = cfg.hidden;
    let mut s = SpecList(Vec::new());

    s.linear("pointnet.mlp1", 3, d);
    s.linear("pointnet.mlp2.0", d, d);
    s.linear("pointnet.mlp2.1", d, d);

    s.linear("encoder.pos", 3, d);
    for l in 0..cfg.encoder_blocks {
        let p = format!("encoder.{l}");
        s.norm(&format!("{p}.norm1"), d);
        s.linear(&format!("{p}.lnp.0"), d, d);
        s.linear(&format!("{p}.lnp.1"), d, d);
        s.norm(&format!("{p}.norm2"), d);
        s.ssm(&format!("{p}.ssm_fwd"), d, cfg.ssm_state);
        s.ssm(&format!("{p}.ssm_bwd"), d, cfg.ssm_state);
    }

    s.linear("seed.mlp.0", d + 3 * cfg.groups, d);
    s.linear("seed.mlp.1", d, 3 * cfg.candidates);
    s.linear("seed.residual.0", d + 3, d);
    s.linear("seed.residual.1", d, 3);
    s.linear("seed.score.0", d + 3, d);
    s.linear("seed.score.1", d, 1);
    s.linear("seed.embed", 3, d);
    s.linear("seed.feat.0", 2 * d, d);
    s.linear("seed.feat.1", d, d);

    for t in 0..cfg.decoder_layers {
        let p = format!("decoder.{t}");
        s.norm(&format!("{p}.norm_self"), d);
        s.attention(
            &format!("{p}.self_attn"),
            d,
            cfg.attention_heads,
            cfg.attention_bias,
        );
        s.norm(&format!("{p}.norm_cross"), d);
        s.norm(&format!("{p}.norm_mem"), d);
        s.attention(
            &format!("{p}.cross_attn"),
            d,
            cfg.attention_heads,
            cfg.attention_bias,
        );
        s.norm(&format!("{p}.norm_ffn"), d);
        s.linear(&format!("{p}.ffn.0"), d, 2 * d);
        s.linear(&format!("{p}.ffn.1"), 2 * d, d);
    }

    s.linear("recon.global", d, d);
    s.linear("recon.psi.0", 2 * d + 3, d);
    s.linear("recon.psi.1", d, cfg.reconstruction_heads * d);
    for u in 0..cfg.reconstruction_heads {
        s.linear(&format!("recon.head.{u}.0"), d, d);
        s.linear(&format!("recon.head.{u}.1"), d, 3 * cfg.offsets_per_seed);
    }
    s.0
}

fn to_f32(v: f64) -> f64 {
    v as f32 as f64
}

fn init_tensor(spec: &TensorSpec, rng: &mut SeededRng) -> Tensor {
    let n: usize = spec.shape.iter().product();
    let data: Vec<f64> = match spec.init {
        Init::Zeros => vec![0.0; n],
        Init::Ones => vec![1.0; n],
        Init::FanIn => {
            let bound = 1.0 / (*spec.shape.last().unwrap() as f64).sqrt();
            (0..n)
                .map(|_| to_f32(rng.uniform_in(-bound, bound)))
                .collect()
        }
        Init::StateDecay => {
            let state = spec.shape[1];
            (0..n)
                .map(|i| to_f32(((i % state) as f64 + 1.0).ln()))
                .collect()
        }
        Init::StepBias => (0..n)
            .map(|_| {
                let step = rng.uniform_in(1e-3f64.ln(), 1e-1f64.ln()).exp();
                // softplus(b) = step  <=>  b = ln(exp(step) - 1)
                to_f32(step.exp_m1().ln())
            })
            .collect(),
    };
    Tensor::new(spec.shape.clone(), data).expect("spec shape is positive")
}

/// Immutable map from tensor name to tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fresh weights for `cfg` drawn from `seed`. Every value is exactly
    /// representable in `f32`, so a store survives the on-disk format
    /// bit for bit.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SeededRng::new(seed);
        let tensors = expected_tensors(cfg)
            .iter()
            .map(|spec| (spec.name.clone(), init_tensor(spec, &mut rng)))
            .collect();
        Ok(Self { tensors })
    }

    /// All tensors with the expected shapes, filled with zeros.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let tensors = expected_tensors(cfg)
            .into_iter()
            .map(|spec| {
                let t = Tensor::zeros(&spec.shape);
                (spec.name, t)
            })
            .collect();
        Self { tensors }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::tensor(name, "missing"))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Tensors in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    /// Sets every tensor whose name starts with `prefix` to zero.
    pub fn zero_prefix(&mut self, prefix: &str) {
        for (name, t) in self.tensors.iter_mut() {
            if name.starts_with(prefix) {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Checks the store holds exactly the tensors `cfg` needs, with the
    /// right shapes and finite values.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let expected = expected_tensors(cfg);
        for spec in &expected {
            let t = self.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::tensor(
                    &spec.name,
                    format!("shape {:?}, expected {:?}", t.shape(), spec.shape),
                ));
            }
            if !t.is_finite() {
                return Err(Error::tensor(&spec.name, "non-finite value"));
            }
        }
        if self.tensors.len() != expected.len() {
            let known: std::collections::BTreeSet<&str> =
                expected.iter().map(|s| s.name.as_str()).collect();
            if let Some(extra) = self.tensors.keys().find(|k| !known.contains(k.as_str())) {
                return Err(Error::tensor(extra, "unknown tensor for this config"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_matches_schema_and_is_seeded() {
        let cfg = ModelConfig::default();
        let a = WeightStore::init(&cfg, 7).unwrap();
        a.validate(&cfg).unwrap();
        assert_eq!(a, WeightStore::init(&cfg, 7).unwrap());
        let b = WeightStore::init(&cfg, 8).unwrap();
        assert!(a.iter().zip(b.iter()).any(|((_, x), (_, y))| x != y));
        for (_, t) in a.iter() {
            assert!(t.data().iter().all(|&v| v == v as f32 as f64));
        }
    }

    #[test]
    fn init_ranges() {
        let cfg = ModelConfig::default();
        let w = WeightStore::init(&cfg, 1).unwrap();
        let a_log = w.get("encoder.0.ssm_fwd.a_log").unwrap();
        assert_eq!(a_log.row(3)[0], 0.0);
        assert_eq!(a_log.row(3)[2], 3f64.ln() as f32 as f64);
        for &b in w.get("encoder.1.ssm_bwd.delta.bias").unwrap().data() {
            let step = b.exp().ln_1p();
            assert!((0.99e-3..=1.01e-1).contains(&step), "{step}");
        }
        let bound = 1.0 / 3f64.sqrt();
        assert!(w
            .get("pointnet.mlp1.weight")
            .unwrap()
            .data()
            .iter()
            .all(|v| v.abs() <= bound));
    }

    #[test]
    fn validation_names_the_tensor() {
        let cfg = ModelConfig::default();
        let mut w = WeightStore::init(&cfg, 3).unwrap();
        w.remove("decoder.1.cross_attn.v.weight");
        let err = w.validate(&cfg).unwrap_err().to_string();
        assert!(err.contains("decoder.1.cross_attn.v.weight"), "{err}");

        let mut w = WeightStore::init(&cfg, 3).unwrap();
        w.insert("decoder.0.ffn.0.bias", Tensor::zeros(&[5]));
        let err = w.validate(&cfg).unwrap_err().to_string();
        assert!(
            err.contains("decoder.0.ffn.0.bias") && err.contains("shape"),
            "{err}"
        );

        let mut w = WeightStore::init(&cfg, 3).unwrap();
        w.insert("decoder.9.extra", Tensor::zeros(&[1]));
        let err = w.validate(&cfg).unwrap_err().to_string();
        assert!(err.contains("decoder.9.extra"), "{err}");
    }

    #[test]
    fn geometric_bias_adds_tensors() {
        let mut cfg = ModelConfig::default();
        let plain = expected_tensors(&cfg).len();
        cfg.attention_bias = true;
        let names: Vec<String> = expected_tensors(&cfg).into_iter().map(|s| s.name).collect();
        assert_eq!(names.len(), plain + 8 * cfg.decoder_layers);
        assert!(names.contains(&"decoder.0.self_attn.geo.1.weight".to_string()));
    }
}
