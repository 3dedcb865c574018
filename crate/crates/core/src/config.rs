//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::invalid(format!("unknown scale `{other}`"))),
        }
    }
}

/// Every size the forward pass needs.
///
/// `output_points` must equal `reconstruction_heads * seeds * offsets_per_seed`;
/// it is stored explicitly so a config file that asks for an impossible
/// output size is rejected when loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// N: points in the (padded) input cloud.
    pub input_points: usize,
    /// G: FPS centres / point proxies.
    pub groups: usize,
    /// K: neighbours per group.
    pub group_size: usize,
    /// D_h: hidden feature width.
    pub hidden: usize,
    /// M: encoder blocks.
    pub encoder_blocks: usize,
    /// T: decoder layers.
    pub decoder_layers: usize,
    /// I': candidate seed points.
    pub candidates: usize,
    /// I: selected seed points.
    pub seeds: usize,
    /// U: reconstruction heads.
    pub reconstruction_heads: usize,
    /// r: offsets per seed per head.
    pub offsets_per_seed: usize,
    /// N_c: points in the completed cloud.
    pub output_points: usize,
    /// Neighbours gathered by the local aggregation in each encoder block.
    pub k_lnp: usize,
    /// Keys receiving a geometric attention bias.
    pub k_attn: usize,
    pub attention_heads: usize,
    /// SSM state size per channel.
    pub ssm_state: usize,
    /// Enables the learned geometric attention bias in the decoder.
    pub attention_bias: bool,
    /// Seed for weight initialisation.
    pub seed: u64,
    /// Use the sequential SSM recurrence (bit-stable reference) instead of
    /// the chunked parallel scan.
    pub deterministic: bool,
}

impl ModelConfig {
    pub fn new(scale: Scale) -> Self {
        match scale {
            Scale::Desk => ModelConfig {
                input_points: 512,
                groups: 32,
                group_size: 16,
                hidden: 64,
                encoder_blocks: 2,
                decoder_layers: 2,
                candidates: 96,
                seeds: 64,
                reconstruction_heads: 4,
                offsets_per_seed: 2,
                output_points: 512,
                k_lnp: 8,
                k_attn: 8,
                attention_heads: 4,
                ssm_state: 8,
                attention_bias: false,
                seed: 0,
                deterministic: true,
            },
            Scale::Paper => ModelConfig {
                input_points: 2048,
                groups: 128,
                group_size: 32,
                hidden: 384,
                encoder_blocks: 4,
                decoder_layers: 4,
                candidates: 768,
                seeds: 512,
                reconstruction_heads: 4,
                offsets_per_seed: 8,
                output_points: 16384,
                k_lnp: 8,
                k_attn: 16,
                attention_heads: 6,
                ssm_state: 16,
                attention_bias: false,
                seed: 0,
                deterministic: true,
            },
        }
    }

    /// Candidates that receive the seed-generator residual refinement:
    /// one third of the candidates, rounded.
    pub fn residual_candidates(&self) -> usize {
        (self.candidates as f64 / 3.0).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let positive = [
            ("input_points", self.input_points),
            ("groups", self.groups),
            ("group_size", self.group_size),
            ("hidden", self.hidden),
            ("encoder_blocks", self.encoder_blocks),
            ("decoder_layers", self.decoder_layers),
            ("candidates", self.candidates),
            ("seeds", self.seeds),
            ("reconstruction_heads", self.reconstruction_heads),
            ("offsets_per_seed", self.offsets_per_seed),
            ("k_lnp", self.k_lnp),
            ("k_attn", self.k_attn),
            ("attention_heads", self.attention_heads),
            ("ssm_state", self.ssm_state),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be at least 1"));
        }
        let product = self.reconstruction_heads * self.seeds * self.offsets_per_seed;
        if product != self.output_points {
            return fail(format!(
                "output_points {} != heads {} * seeds {} * offsets {} = {product}",
                self.output_points, self.reconstruction_heads, self.seeds, self.offsets_per_seed
            ));
        }
        if self.seeds > self.candidates {
            return fail(format!(
                "seeds {} exceed candidates {}",
                self.seeds, self.candidates
            ));
        }
        if self.group_size > self.input_points || self.groups > self.input_points {
            return fail(format!(
                "groups {} and group_size {} must not exceed input_points {}",
                self.groups, self.group_size, self.input_points
            ));
        }
        if self.hidden % self.attention_heads != 0 {
            return fail(format!(
                "hidden {} not divisible by attention_heads {}",
                self.hidden, self.attention_heads
            ));
        }
        if self.k_lnp > self.groups {
            return fail(format!(
                "k_lnp {} exceeds groups {}",
                self.k_lnp, self.groups
            ));
        }
        if self.attention_bias && (self.k_attn > self.seeds || self.k_attn > self.groups) {
            return fail(format!(
                "k_attn {} exceeds seeds {} or groups {}",
                self.k_attn, self.seeds, self.groups
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::new(Scale::Desk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let desk = ModelConfig::new(Scale::Desk);
        desk.validate().unwrap();
        assert_eq!(desk.output_points, 4 * 64 * 2);
        let paper = ModelConfig::new(Scale::Paper);
        paper.validate().unwrap();
        assert_eq!(paper.output_points, 16384);
        assert_eq!(
            paper.reconstruction_heads * paper.seeds * paper.offsets_per_seed,
            16384
        );
        assert_eq!(paper.residual_candidates(), 256);
    }

    #[test]
    fn rejects_bad_edits() {
        let mut c = ModelConfig::default();
        c.seeds = 65;
        c.candidates = 64;
        assert!(c.validate().is_err());

        let mut c = ModelConfig::default();
        c.output_points = 500;
        assert!(matches!(c.validate(), Err(Error::Config(_))));

        let mut c = ModelConfig::default();
        c.attention_heads = 5;
        assert!(c.validate().is_err());

        let mut c = ModelConfig::default();
        c.group_size = 1000;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ModelConfig::default();
        assert_eq!(ModelConfig::from_toml(&c.to_toml()).unwrap(), c);
        let bad = c
            .to_toml()
            .replace("output_points = 512", "output_points = 511");
        assert!(ModelConfig::from_toml(&bad).is_err());
    }
}
