use serde::{Deserialize, Serialize};

use crate::encoding::DEFAULT_MAX_LEN;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub vocab_size: usize,
    pub max_len: usize,
    pub n_classes: usize,
    pub use_sequence_positions: bool,
}

impl ModelConfig {
    /// Desk-scale default: 72 wide, 4 pre-norm layers of 4 heads.
    pub fn desk(vocab_size: usize, n_classes: usize) -> Self {
        ModelConfig {
            d_model: 72,
            n_layers: 4,
            n_heads: 4,
            ff_dim: 288,
            dropout: 0.1,
            vocab_size,
            max_len: DEFAULT_MAX_LEN,
            n_classes,
            use_sequence_positions: true,
        }
    }

    /// One narrow layer without dropout, for gradient checks.
    pub fn tiny(vocab_size: usize, n_classes: usize) -> Self {
        ModelConfig {
            d_model: 24,
            n_layers: 1,
            n_heads: 2,
            ff_dim: 48,
            dropout: 0.0,
            vocab_size,
            max_len: 128,
            n_classes,
            use_sequence_positions: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.d_model == 0 || self.d_model % 12 != 0 {
            problems.push(format!("d_model {} must be a positive multiple of 12", self.d_model));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            problems.push(format!("d_model {} must be divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.n_layers == 0 {
            problems.push("n_layers must be positive".into());
        }
        if self.ff_dim == 0 {
            problems.push("ff_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.vocab_size <= crate::encoding::vocab::FIRST_WORD_ID as usize {
            problems.push(format!("vocab_size {} leaves no room for words", self.vocab_size));
        }
        if self.max_len < 4 {
            problems.push(format!("max_len {} too small", self.max_len));
        }
        if self.n_classes < 2 {
            problems.push(format!("n_classes {} must be at least 2", self.n_classes));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Closed-form parameter count, with `d` = d_model, `f` = ff_dim,
    /// `D` = vocab_size, `C` = n_classes, `L` = n_layers:
    ///
    /// ```text
    /// D·d                      token embedding
    /// + max_len·d              sequence positions (when enabled)
    /// + L·(4d² + 2d·f + 9d + f) layers: q/k/v/o with biases, two norms, feed-forward
    /// + 2d                     final norm
    /// + (d + 1) + 2(d + 1)     reference and binary target heads
    /// + C(d + 1) + D(d + 1)    text and masked-token heads
    /// ```
    pub fn parameter_count(&self) -> usize {
        let (d, f, v, c, l) = (self.d_model, self.ff_dim, self.vocab_size, self.n_classes, self.n_layers);
        let positions = if self.use_sequence_positions { self.max_len * d } else { 0 };
        v * d + positions + l * (4 * d * d + 2 * d * f + 9 * d + f) + 2 * d + 3 * (d + 1) + c * (d + 1) + v * (d + 1)
    }
}
