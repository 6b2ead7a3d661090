//! The encoder-decoder network used by all three tasks.

mod config;
mod layers;
mod model;

pub use config::ModelConfig;
pub use layers::{
    look_ahead_mask, positional_encoding, FeedForward, LayerNorm, Linear, MultiHeadAttention,
    MASK_VALUE,
};
pub use model::{Component, ForwardMode, TransformerModel};

#[cfg(test)]
mod tests;
