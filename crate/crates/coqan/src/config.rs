//! Model and training configuration.
//!
//! `ModelConfig::default()` carries the reference dimensions (GRU 128 with
//! kernel sizes 2/5/10/20 at 25 filters each, 48 features embedded at 128
//! through 3 four-head interacting layers, desk-scale text encoders, gate
//! widths 64/64/128). `desk_small` shrinks every subnetwork for fast
//! training experiments. Configs serialize to flat JSON and hash to a
//! short fingerprint that run artifacts embed.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::FEATURE_COUNT;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub gru_hidden: usize,
    pub kernel_sizes: Vec<usize>,
    pub filters_per_kernel: usize,
}

impl LayoutConfig {
    pub fn conv_dim(&self) -> usize {
        self.kernel_sizes.len() * self.filters_per_kernel
    }

    pub fn output_dim(&self) -> usize {
        self.gru_hidden + self.conv_dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WritingConfig {
    pub embed_dim: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub layers: usize,
    pub category_count: usize,
}

impl WritingConfig {
    pub fn layer_output_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn output_dim(&self) -> usize {
        FEATURE_COUNT * self.layer_output_dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextConfig {
    pub layers_sent: usize,
    pub heads_sent: usize,
    pub d_model_sent: usize,
    pub d_ff_sent: usize,
    pub layers_doc: usize,
    pub heads_doc: usize,
    pub d_model_doc: usize,
    pub d_ff_doc: usize,
    pub max_tokens: usize,
    pub max_sentences: usize,
}

impl TextConfig {
    pub fn output_dim(&self) -> usize {
        2 * self.d_model_doc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub gate_layout: usize,
    pub gate_writing: usize,
    pub gate_text: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layout: LayoutConfig,
    pub writing: WritingConfig,
    pub text: TextConfig,
    pub fusion: FusionConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layout: LayoutConfig {
                gru_hidden: 128,
                kernel_sizes: vec![2, 5, 10, 20],
                filters_per_kernel: 25,
            },
            writing: WritingConfig {
                embed_dim: 128,
                heads: 4,
                head_dim: 64,
                layers: 3,
                category_count: 32,
            },
            text: TextConfig {
                layers_sent: 2,
                heads_sent: 4,
                d_model_sent: 64,
                d_ff_sent: 256,
                layers_doc: 2,
                heads_doc: 4,
                d_model_doc: 64,
                d_ff_doc: 256,
                max_tokens: 128,
                max_sentences: 32,
            },
            fusion: FusionConfig {
                gate_layout: 64,
                gate_writing: 64,
                gate_text: 128,
            },
        }
    }
}

impl ModelConfig {
    /// Small dimensions for fast training runs on synthetic corpora.
    pub fn desk_small() -> Self {
        ModelConfig {
            layout: LayoutConfig {
                gru_hidden: 64,
                kernel_sizes: vec![2, 3],
                filters_per_kernel: 12,
            },
            writing: WritingConfig {
                embed_dim: 16,
                heads: 2,
                head_dim: 8,
                layers: 2,
                category_count: 32,
            },
            text: TextConfig {
                layers_sent: 1,
                heads_sent: 2,
                d_model_sent: 32,
                d_ff_sent: 64,
                layers_doc: 1,
                heads_doc: 2,
                d_model_doc: 32,
                d_ff_doc: 64,
                max_tokens: 16,
                max_sentences: 12,
            },
            fusion: FusionConfig {
                gate_layout: 16,
                gate_writing: 16,
                gate_text: 32,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.layout.gru_hidden == 0 || self.layout.kernel_sizes.is_empty() {
            return fail("layout dimensions must be positive".into());
        }
        if self.layout.kernel_sizes.iter().any(|&k| k == 0) || self.layout.filters_per_kernel == 0 {
            return fail("layout kernel configuration must be positive".into());
        }
        if self.writing.layers == 0 || self.writing.heads == 0 || self.writing.head_dim == 0 {
            return fail("writing layer configuration must be positive".into());
        }
        if self.writing.embed_dim == 0 || self.writing.category_count == 0 {
            return fail("writing embedding configuration must be positive".into());
        }
        if self.text.d_model_sent % self.text.heads_sent != 0 {
            return fail(format!(
                "text d_model_sent {} not divisible by heads_sent {}",
                self.text.d_model_sent, self.text.heads_sent
            ));
        }
        if self.text.d_model_doc % self.text.heads_doc != 0 {
            return fail(format!(
                "text d_model_doc {} not divisible by heads_doc {}",
                self.text.d_model_doc, self.text.heads_doc
            ));
        }
        if self.text.d_model_doc != self.text.d_model_sent {
            return fail(format!(
                "document encoder width {} must match sentence encoder width {}",
                self.text.d_model_doc, self.text.d_model_sent
            ));
        }
        if self.text.max_tokens < 2 || self.text.max_sentences < 1 {
            return fail("text sequence limits too small".into());
        }
        if self.fusion.gate_layout == 0 || self.fusion.gate_writing == 0 || self.fusion.gate_text == 0
        {
            return fail("fusion gate widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_text: f64,
    pub lr_other: f64,
    pub dropout_text: f64,
    pub dropout_other: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_text: 2e-5,
            lr_other: 1e-3,
            dropout_text: 0.1,
            dropout_other: 0.2,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patience: 3,
            max_epochs: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("lr_text", self.lr_text),
            ("lr_other", self.lr_other),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(ConfigError::Invalid(format!("{} must be positive", name)));
            }
        }
        for (name, v) in [("dropout_text", self.dropout_text), ("dropout_other", self.dropout_other)]
        {
            if !(0.0..1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{} outside [0,1)", name)));
            }
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(ConfigError::Invalid(
                "batch_size, patience, max_epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which subnetworks participate in the fused prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubnetSet {
    pub layout: bool,
    pub writing: bool,
    pub text: bool,
}

impl SubnetSet {
    pub const FULL: SubnetSet = SubnetSet {
        layout: true,
        writing: true,
        text: true,
    };

    pub fn parse(spec: &str) -> Result<SubnetSet, ConfigError> {
        let mut set = SubnetSet {
            layout: false,
            writing: false,
            text: false,
        };
        for part in spec.split(',') {
            match part.trim().to_ascii_uppercase().as_str() {
                "LO" => set.layout = true,
                "WC" => set.writing = true,
                "TS" => set.text = true,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown subnetwork {:?}, expected LO, WC, or TS",
                        other
                    )))
                }
            }
        }
        if !set.layout && !set.writing && !set.text {
            return Err(ConfigError::Invalid("empty subnetwork set".into()));
        }
        Ok(set)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.layout {
            parts.push("LO");
        }
        if self.writing {
            parts.push("WC");
        }
        if self.text {
            parts.push("TS");
        }
        parts.join(",")
    }
}

/// Short fingerprint of any serializable config, embedded in artifacts.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest[..6].iter().map(|b| format!("{:02x}", b)).collect()
}
