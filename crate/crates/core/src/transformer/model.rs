use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::numerics::{checkpoint, Graph, ParamStore, Tensor, Var};

use super::config::ModelConfig;
use super::layers::{
    look_ahead_mask, positional_encoding, FeedForward, LayerNorm, Linear, MultiHeadAttention,
};

/// Whether dropout is active for a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    Eval,
    /// Dropout masks are derived from `seed` and the site index, so a pass is
    /// reproducible.
    Train {
        seed: u64,
    },
}

/// Per-pass dropout bookkeeping.
struct Dropout {
    p: f64,
    seed: Option<u64>,
    site: u64,
}

impl Dropout {
    fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        let Some(seed) = self.seed else {
            return Ok(x);
        };
        self.site += 1;
        g.dropout(x, self.p, derive_seed(seed, self.site))
    }
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    self_attn: MultiHeadAttention,
    norm1: LayerNorm,
    ff: FeedForward,
    norm2: LayerNorm,
}

#[derive(Clone, Debug)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    norm1: LayerNorm,
    cross_attn: MultiHeadAttention,
    norm2: LayerNorm,
    ff: FeedForward,
    norm3: LayerNorm,
}

/// Building block reported by [`TransformerModel::components`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Component {
    PositionalEncoding {
        width: usize,
    },
    EncoderLayer {
        width: usize,
        heads: usize,
        d_ff: usize,
    },
    EncoderOutput {
        from: usize,
        to: usize,
    },
    DecoderLayer {
        width: usize,
        heads: usize,
        d_ff: usize,
    },
    LookAheadMask,
    OutputProjection {
        from: usize,
        to: usize,
    },
}

/// Encoder-decoder transformer with no input embeddings and no padding mask.
///
/// Raw feature rows enter each stack directly (plus positional encoding).
/// The encoder output is projected from `d_enc` to `d_dec` so the decoder's
/// cross-attention can attend over it. Sub-layers use the post-norm
/// arrangement `x ← LayerNorm(x + Dropout(Sublayer(x)))`.
#[derive(Clone, Debug)]
pub struct TransformerModel {
    config: ModelConfig,
    params: ParamStore,
    encoder: Vec<EncoderLayer>,
    encoder_output: Linear,
    decoder: Vec<DecoderLayer>,
    output: Linear,
}

impl TransformerModel {
    /// Builds a model with Glorot-uniform weights drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let (de, dd) = (config.d_enc, config.d_dec);

        let mut encoder = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let p = format!("encoder.{i}");
            encoder.push(EncoderLayer {
                self_attn: MultiHeadAttention::new(
                    &mut params,
                    &format!("{p}.self_attn"),
                    de,
                    config.heads_enc,
                    &mut rng,
                )?,
                norm1: LayerNorm::new(&mut params, &format!("{p}.norm1"), de),
                ff: FeedForward::new(
                    &mut params,
                    &format!("{p}.ff"),
                    de,
                    config.d_ff_enc(),
                    &mut rng,
                ),
                norm2: LayerNorm::new(&mut params, &format!("{p}.norm2"), de),
            });
        }
        let encoder_output = Linear::new(&mut params, "encoder_output", de, dd, &mut rng);

        let mut decoder = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let p = format!("decoder.{i}");
            decoder.push(DecoderLayer {
                self_attn: MultiHeadAttention::new(
                    &mut params,
                    &format!("{p}.self_attn"),
                    dd,
                    config.heads_dec,
                    &mut rng,
                )?,
                norm1: LayerNorm::new(&mut params, &format!("{p}.norm1"), dd),
                cross_attn: MultiHeadAttention::new(
                    &mut params,
                    &format!("{p}.cross_attn"),
                    dd,
                    config.heads_dec,
                    &mut rng,
                )?,
                norm2: LayerNorm::new(&mut params, &format!("{p}.norm2"), dd),
                ff: FeedForward::new(
                    &mut params,
                    &format!("{p}.ff"),
                    dd,
                    config.d_ff_dec(),
                    &mut rng,
                ),
                norm3: LayerNorm::new(&mut params, &format!("{p}.norm3"), dd),
            });
        }
        let output = Linear::new(&mut params, "output", dd, config.d_out, &mut rng);

        Ok(Self {
            config,
            params,
            encoder,
            encoder_output,
            decoder,
            output,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// The model's building blocks in forward order.
    pub fn components(&self) -> Vec<Component> {
        let c = &self.config;
        let mut out = vec![Component::PositionalEncoding { width: c.d_enc }];
        out.extend(self.encoder.iter().map(|_| Component::EncoderLayer {
            width: c.d_enc,
            heads: c.heads_enc,
            d_ff: c.d_ff_enc(),
        }));
        out.push(Component::EncoderOutput {
            from: c.d_enc,
            to: c.d_dec,
        });
        out.push(Component::PositionalEncoding { width: c.d_dec });
        out.push(Component::LookAheadMask);
        out.extend(self.decoder.iter().map(|_| Component::DecoderLayer {
            width: c.d_dec,
            heads: c.heads_dec,
            d_ff: c.d_ff_dec(),
        }));
        out.push(Component::OutputProjection {
            from: c.d_dec,
            to: c.d_out,
        });
        out
    }

    fn check_input(&self, what: &str, x: &Tensor, width: usize) -> Result<usize> {
        let (len, w) = x.dims2().map_err(|_| {
            Error::shape(what, format!("expected [T × {width}], got {:?}", x.shape()))
        })?;
        if w != width {
            return Err(Error::shape(
                what,
                format!("expected [T × {width}], got {:?}", x.shape()),
            ));
        }
        if len > self.config.max_len {
            return Err(Error::shape(
                what,
                format!("length {len} exceeds max_len {}", self.config.max_len),
            ));
        }
        Ok(len)
    }

    fn dropout(&self, mode: ForwardMode) -> Dropout {
        Dropout {
            p: self.config.dropout_p,
            seed: match mode {
                ForwardMode::Train { seed } if self.config.dropout_p > 0.0 => Some(seed),
                _ => None,
            },
            site: 0,
        }
    }

    fn input_with_position(g: &mut Graph, x: &Tensor, len: usize, width: usize) -> Result<Var> {
        let pe = positional_encoding(len, width)?;
        let mut summed = x.clone();
        summed
            .data_mut()
            .iter_mut()
            .zip(pe.data())
            .for_each(|(a, b)| *a += b);
        Ok(g.constant(summed))
    }

    fn run_encoder(&self, g: &mut Graph, enc_in: &Tensor, drop: &mut Dropout) -> Result<Var> {
        let len = self.check_input("encoder input", enc_in, self.config.d_enc)?;
        let x = Self::input_with_position(g, enc_in, len, self.config.d_enc)?;
        let mut x = drop.apply(g, x)?;
        for layer in &self.encoder {
            let a = layer.self_attn.forward(g, x, x, x, None)?;
            let a = drop.apply(g, a)?;
            let r = g.add(x, a)?;
            x = layer.norm1.forward(g, r)?;
            let f = layer.ff.forward(g, x)?;
            let f = drop.apply(g, f)?;
            let r = g.add(x, f)?;
            x = layer.norm2.forward(g, r)?;
        }
        self.encoder_output.forward(g, x)
    }

    fn run_decoder(
        &self,
        g: &mut Graph,
        memory: Var,
        dec_in: &Tensor,
        drop: &mut Dropout,
    ) -> Result<Var> {
        let len = self.check_input("decoder input", dec_in, self.config.d_dec)?;
        let mem_shape = g.shape(memory);
        if mem_shape.len() != 2 || mem_shape[1] != self.config.d_dec {
            return Err(Error::shape(
                "decoder cross-attention",
                format!(
                    "memory {:?} does not have width d_dec = {}",
                    mem_shape, self.config.d_dec
                ),
            ));
        }
        let x = Self::input_with_position(g, dec_in, len, self.config.d_dec)?;
        let mut x = drop.apply(g, x)?;
        let mask = g.constant(look_ahead_mask(len));
        for layer in &self.decoder {
            let a = layer.self_attn.forward(g, x, x, x, Some(mask))?;
            let a = drop.apply(g, a)?;
            let r = g.add(x, a)?;
            x = layer.norm1.forward(g, r)?;
            let c = layer.cross_attn.forward(g, x, memory, memory, None)?;
            let c = drop.apply(g, c)?;
            let r = g.add(x, c)?;
            x = layer.norm2.forward(g, r)?;
            let f = layer.ff.forward(g, x)?;
            let f = drop.apply(g, f)?;
            let r = g.add(x, f)?;
            x = layer.norm3.forward(g, r)?;
        }
        self.output.forward(g, x)
    }

    /// Encoder stack plus output projection: `[T_e × d_enc] → [T_e × d_dec]`.
    pub fn encode(&self, g: &mut Graph, enc_in: &Tensor, mode: ForwardMode) -> Result<Var> {
        let mut drop = self.dropout(mode);
        self.run_encoder(g, enc_in, &mut drop)
    }

    /// Decoder stack over encoder `memory`: `[T_d × d_dec] → [T_d × d_out]`.
    ///
    /// Uses a different dropout stream than [`Self::encode`]; call
    /// [`Self::forward`] for training so both halves share one stream.
    pub fn decode(
        &self,
        g: &mut Graph,
        memory: Var,
        dec_in: &Tensor,
        mode: ForwardMode,
    ) -> Result<Var> {
        let mut drop = self.dropout(mode);
        drop.site = 1 << 32;
        self.run_decoder(g, memory, dec_in, &mut drop)
    }

    /// Full pass: `[T_e × d_enc], [T_d × d_dec] → [T_d × d_out]`.
    pub fn forward(
        &self,
        g: &mut Graph,
        enc_in: &Tensor,
        dec_in: &Tensor,
        mode: ForwardMode,
    ) -> Result<Var> {
        let mut drop = self.dropout(mode);
        let memory = self.run_encoder(g, enc_in, &mut drop)?;
        self.run_decoder(g, memory, dec_in, &mut drop)
    }

    /// Evaluation-mode forward pass returning the output values.
    pub fn predict(&self, enc_in: &Tensor, dec_in: &Tensor) -> Result<Tensor> {
        let mut g = Graph::with_params(&self.params);
        let out = self.forward(&mut g, enc_in, dec_in, ForwardMode::Eval)?;
        Ok(g.value(out).clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.params, path)
    }

    /// Rebuilds the architecture from `config` and loads weights from `path`.
    pub fn load(config: ModelConfig, path: &Path) -> Result<Self> {
        let mut model = Self::new(config)?;
        checkpoint::load_into(&mut model.params, path)?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        checkpoint::encode(&self.params)
    }
}
