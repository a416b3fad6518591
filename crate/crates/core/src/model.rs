//! Network definition shared by the planning and seaming decoders.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::vocab::Vocab;
use crate::error::{PtsError, Result};
use crate::nnet::checkpoint::{load_checkpoint, save_checkpoint};
use crate::nnet::{DecoderLayer, EncoderLayer, Init, Linear, ParamBuilder, ParamId, ParamSink, ParamStore, Scalar, ShapeCounter, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub d_hidden: usize,
    pub n_head: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub token_embed_dim: usize,
    pub key_embed_dim: usize,
    pub position_embed_dim: usize,
    /// Value positions above this are clamped.
    pub max_position: usize,
    pub max_records: usize,
    /// Longest decoder sequence, BOS and EOS included.
    pub max_length: usize,
    /// Largest number of placeholders predicted for one gap.
    pub max_placeholders: usize,
    pub vocab_size: usize,
    pub key_vocab_size: usize,
    pub rethinking: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 512,
            d_hidden: 2048,
            n_head: 8,
            encoder_layers: 6,
            decoder_layers: 6,
            token_embed_dim: 420,
            key_embed_dim: 80,
            position_embed_dim: 50,
            max_position: 64,
            max_records: 256,
            max_length: 256,
            max_placeholders: 64,
            vocab_size: 30_000,
            key_vocab_size: 2_000,
            rethinking: true,
        }
    }
}

impl ModelConfig {
    /// A desk-sized configuration for quick experiments.
    pub fn small(vocab_size: usize, key_vocab_size: usize) -> Self {
        Self {
            d_model: 64,
            d_hidden: 128,
            n_head: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            token_embed_dim: 40,
            key_embed_dim: 16,
            position_embed_dim: 4,
            max_position: 16,
            max_records: 64,
            max_length: 96,
            max_placeholders: 64,
            vocab_size,
            key_vocab_size,
            rethinking: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PtsError::Config(msg));
        if self.d_model == 0 || self.n_head == 0 || !self.d_model.is_multiple_of(self.n_head) {
            return bad(format!("d_model {} must be a positive multiple of n_head {}", self.d_model, self.n_head));
        }
        if self.d_hidden == 0 || self.token_embed_dim == 0 || self.key_embed_dim == 0 || self.position_embed_dim == 0 {
            return bad("hidden and embedding sizes must be positive".into());
        }
        if self.max_position == 0 || self.max_records == 0 || self.max_placeholders == 0 {
            return bad("max_position, max_records and max_placeholders must be positive".into());
        }
        if self.max_length < 3 {
            return bad(format!("max_length {} leaves no room between BOS and EOS", self.max_length));
        }
        if self.vocab_size < crate::corpus::vocab::RESERVED.len() || self.key_vocab_size < crate::corpus::vocab::RESERVED.len() {
            return bad("vocabularies must hold the reserved symbols".into());
        }
        Ok(())
    }

    /// Width of the concatenated record embedding fed to the projection.
    pub fn record_input_dim(&self) -> usize {
        self.token_embed_dim + self.key_embed_dim + 2 * self.position_embed_dim
    }
}

/// Which parts of the network to instantiate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelLayout {
    /// Planning and seaming share one encoder, decoder and heads.
    Joint,
    /// A stand-alone planning model.
    PlanOnly,
    /// A stand-alone seaming model.
    SeamOnly,
}

/// Additive pointer: `score · tanh(query(h_i) + key(m_j))`.
#[derive(Clone, Debug)]
pub struct PointerHead {
    pub query: Linear,
    pub key: Linear,
    pub score: ParamId,
}

impl PointerHead {
    fn new(sink: &mut impl ParamSink, name: &str, d: usize) -> Self {
        Self {
            query: Linear::without_bias(sink, &format!("{name}.query"), d, d),
            key: Linear::new(sink, &format!("{name}.key"), d, d),
            score: sink.add(format!("{name}.score"), 1, d, Init::FanIn),
        }
    }

    /// Scores of every state row against every memory row.
    pub fn scores<T: Scalar>(&self, tape: &mut Tape<T>, states: Var, memory: Var) -> Var {
        let q = self.query.forward(tape, states);
        let k = self.key.forward(tape, memory);
        let s = tape.param(self.score);
        tape.pointer_scores(q, k, s)
    }
}

/// Second-opinion pointer: fuses each first-pass choice with its record
/// embedding and re-reads the whole plan through one extra decoder block.
#[derive(Clone, Debug)]
pub struct RethinkBlock {
    pub fusion: Linear,
    pub block: DecoderLayer,
    pub pointer: PointerHead,
}

/// Parameter ids of the whole network.
#[derive(Clone, Debug)]
pub struct Network {
    pub config: ModelConfig,
    pub token_embed: ParamId,
    pub key_embed: ParamId,
    pub pos_fwd_embed: ParamId,
    pub pos_bwd_embed: ParamId,
    pub record_proj: Linear,
    pub encoder: Vec<EncoderLayer>,
    pub decoder_embed: ParamId,
    pub decoder_positions: ParamId,
    pub decoder: Vec<DecoderLayer>,
    pub placeholder_head: Linear,
    pub deletion_head: Linear,
    pub pointer: Option<PointerHead>,
    pub rethink: Option<RethinkBlock>,
    /// Bias of the token head, whose weight is tied to `decoder_embed`.
    pub token_bias: Option<ParamId>,
}

impl Network {
    pub fn build(sink: &mut impl ParamSink, config: &ModelConfig, layout: ModelLayout) -> Self {
        let c = config;
        let d = c.d_model;
        let emb = Init::Uniform(0.1);
        let planning = layout != ModelLayout::SeamOnly;
        let seaming = layout != ModelLayout::PlanOnly;
        Self {
            config: c.clone(),
            token_embed: sink.add("record.token_embed".into(), c.vocab_size, c.token_embed_dim, emb),
            key_embed: sink.add("record.key_embed".into(), c.key_vocab_size, c.key_embed_dim, emb),
            pos_fwd_embed: sink.add("record.pos_fwd_embed".into(), c.max_position, c.position_embed_dim, emb),
            pos_bwd_embed: sink.add("record.pos_bwd_embed".into(), c.max_position, c.position_embed_dim, emb),
            record_proj: Linear::new(sink, "record.proj", c.record_input_dim(), d),
            encoder: (0..c.encoder_layers)
                .map(|i| EncoderLayer::new(sink, &format!("encoder.{i}"), d, c.d_hidden, c.n_head))
                .collect(),
            decoder_embed: sink.add("decoder.token_embed".into(), c.vocab_size, d, emb),
            decoder_positions: sink.add("decoder.position_embed".into(), c.max_length, d, emb),
            decoder: (0..c.decoder_layers)
                .map(|i| DecoderLayer::new(sink, &format!("decoder.{i}"), d, c.d_hidden, c.n_head))
                .collect(),
            placeholder_head: Linear::new(sink, "head.placeholder", 2 * d, c.max_placeholders + 1),
            deletion_head: Linear::new(sink, "head.deletion", d, 2),
            pointer: planning.then(|| PointerHead::new(sink, "head.pointer", d)),
            rethink: (planning && c.rethinking).then(|| RethinkBlock {
                fusion: Linear::new(sink, "rethink.fusion", 2 * d, d),
                block: DecoderLayer::new(sink, "rethink.block", d, c.d_hidden, c.n_head),
                pointer: PointerHead::new(sink, "rethink.pointer", d),
            }),
            token_bias: seaming.then(|| sink.add("head.token.bias".into(), 1, c.vocab_size, Init::Zeros)),
        }
    }

    /// `ReLU(W_e [token; key; pos_fwd; pos_bwd] + b_e)` for each record.
    pub fn embed_records<T: Scalar>(&self, tape: &mut Tape<T>, records: &[EncodedRecord]) -> Var {
        let tok = tape.param(self.token_embed);
        let key = tape.param(self.key_embed);
        let pf = tape.param(self.pos_fwd_embed);
        let pb = tape.param(self.pos_bwd_embed);
        let max = self.config.max_position;
        let tok = tape.gather(tok, &records.iter().map(|r| r.value as usize).collect::<Vec<_>>());
        let key = tape.gather(key, &records.iter().map(|r| r.key as usize).collect::<Vec<_>>());
        let pf = tape.gather(pf, &records.iter().map(|r| r.pos_fwd.clamp(1, max) - 1).collect::<Vec<_>>());
        let pb = tape.gather(pb, &records.iter().map(|r| r.pos_bwd.clamp(1, max) - 1).collect::<Vec<_>>());
        let cat = tape.concat(&[tok, key, pf, pb]);
        let proj = self.record_proj.forward(tape, cat);
        tape.relu(proj)
    }

    /// Runs the encoder stack over record embeddings.
    pub fn encode<T: Scalar>(&self, tape: &mut Tape<T>, embeddings: Var, mask: Option<&[bool]>) -> Result<Var> {
        let mut h = embeddings;
        for layer in &self.encoder {
            h = layer.forward(tape, h, mask)?;
        }
        Ok(h)
    }

    /// Token plus absolute position embeddings of a decoder input.
    pub fn embed_decoder_input<T: Scalar>(&self, tape: &mut Tape<T>, ids: &[u32]) -> Var {
        let table = tape.param(self.decoder_embed);
        let positions = tape.param(self.decoder_positions);
        let last = self.config.max_length - 1;
        let tok = tape.gather(table, &ids.iter().map(|&i| i as usize).collect::<Vec<_>>());
        let pos = tape.gather(positions, &(0..ids.len()).map(|i| i.min(last)).collect::<Vec<_>>());
        tape.add(tok, pos)
    }

    /// One full decoder pass.
    pub fn decode<T: Scalar>(&self, tape: &mut Tape<T>, ids: &[u32], memory: Var) -> Result<Var> {
        let mut h = self.embed_decoder_input(tape, ids);
        for layer in &self.decoder {
            h = layer.forward(tape, h, memory, None)?;
        }
        Ok(h)
    }

    /// Insertion-count logits for every adjacent pair of states.
    pub fn placeholder_logits<T: Scalar>(&self, tape: &mut Tape<T>, states: Var) -> Var {
        let n = tape.shape(states).0;
        let left = tape.gather(states, &(0..n - 1).collect::<Vec<_>>());
        let right = tape.gather(states, &(1..n).collect::<Vec<_>>());
        let pairs = tape.concat(&[left, right]);
        self.placeholder_head.forward(tape, pairs)
    }

    /// Keep/delete logits (column 1 = delete) per state row.
    pub fn deletion_logits<T: Scalar>(&self, tape: &mut Tape<T>, states: Var) -> Var {
        self.deletion_head.forward(tape, states)
    }

    /// Vocabulary logits, using the decoder embedding table as output weights.
    pub fn token_logits<T: Scalar>(&self, tape: &mut Tape<T>, states: Var) -> Var {
        let table = tape.param(self.decoder_embed);
        let logits = tape.matmul_t(states, table);
        let bias = tape.param(self.token_bias.expect("network built without a token head"));
        tape.add_row(logits, bias)
    }

    pub fn pointer_head(&self) -> &PointerHead {
        self.pointer.as_ref().expect("network built without a pointer head")
    }

    /// Fuses decoder states with the embeddings of the chosen records
    /// (`None` rows get a zero embedding) and re-reads them.
    pub fn rethink_states<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        states: Var,
        record_embeddings: Var,
        chosen: Vec<Option<usize>>,
        memory: Var,
    ) -> Result<Var> {
        let block = self.rethink.as_ref().expect("network built without rethinking");
        let e = tape.gather_opt(record_embeddings, chosen);
        let cat = tape.concat(&[states, e]);
        let fused = block.fusion.forward(tape, cat);
        block.block.forward(tape, fused, memory, None)
    }
}

/// Vocabulary ids of one record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodedRecord {
    pub value: u32,
    pub key: u32,
    pub pos_fwd: usize,
    pub pos_bwd: usize,
}

/// Trainable parameter count of a configuration, without allocating.
pub fn parameter_count(config: &ModelConfig, layout: ModelLayout) -> usize {
    let mut counter = ShapeCounter::default();
    Network::build(&mut counter, config, layout);
    counter.count()
}

/// Network, weights and vocabularies.
#[derive(Clone, Debug)]
pub struct Model {
    pub net: Network,
    pub params: ParamStore<f32>,
    pub vocab: Vocab,
    pub keys: Vocab,
}

#[derive(Serialize, Deserialize)]
struct Echo {
    config: ModelConfig,
    vocab: Vec<String>,
    keys: Vec<String>,
}

impl Model {
    /// Randomly initialized model; vocabulary sizes in `config` are
    /// overwritten by the actual vocabularies.
    pub fn new(mut config: ModelConfig, vocab: Vocab, keys: Vocab, seed: u64) -> Result<Self> {
        config.vocab_size = vocab.len();
        config.key_vocab_size = keys.len();
        config.validate()?;
        let mut builder = ParamBuilder::new(seed);
        let net = Network::build(&mut builder, &config, ModelLayout::Joint);
        Ok(Self {
            net,
            params: builder.finish(),
            vocab,
            keys,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    pub fn encode_record(&self, r: &crate::corpus::Record) -> EncodedRecord {
        EncodedRecord {
            value: self.vocab.id(&r.value_token),
            key: self.keys.id(&r.key_token),
            pos_fwd: r.pos_fwd,
            pos_bwd: r.pos_bwd,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let echo = Echo {
            config: self.net.config.clone(),
            vocab: self.vocab.tokens().to_vec(),
            keys: self.keys.tokens().to_vec(),
        };
        save_checkpoint(&self.params, &serde_json::to_string(&echo)?, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (echo, params) = load_checkpoint(path)?;
        let echo: Echo = serde_json::from_str(&echo).map_err(|e| PtsError::CorruptCheckpoint(format!("config echo: {e}")))?;
        let vocab = Vocab::from_list(echo.vocab)?;
        let keys = Vocab::from_list(echo.keys)?;
        echo.config.validate()?;
        let mut counter = ShapeCounter::default();
        let net = Network::build(&mut counter, &echo.config, ModelLayout::Joint);
        if counter.shapes.len() != params.len() {
            return Err(PtsError::CheckpointMismatch(format!(
                "expected {} tensors, found {}",
                counter.shapes.len(),
                params.len()
            )));
        }
        for (i, (name, rows, cols)) in counter.shapes.iter().enumerate() {
            let id = ParamId(i);
            if params.name(id) != name || params.get(id).dim() != (*rows, *cols) {
                return Err(PtsError::CheckpointMismatch(format!(
                    "tensor {i}: expected `{name}` {rows}x{cols}, found `{}` {:?}",
                    params.name(id),
                    params.get(id).dim()
                )));
            }
        }
        if echo.config.vocab_size != vocab.len() || echo.config.key_vocab_size != keys.len() {
            return Err(PtsError::CheckpointMismatch("vocabulary size differs from config".into()));
        }
        Ok(Self { net, params, vocab, keys })
    }
}
