//! A small reverse-mode autodiff engine and the transformer layers built on it.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod scalar;
pub mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{check_gradients, GradCheck};
pub use layers::{DecoderLayer, EncoderLayer, FeedForward, LayerNorm, Linear, MultiHeadAttention};
pub use params::{Gradients, Init, ParamBuilder, ParamId, ParamSink, ParamStore, ShapeCounter};
pub use scalar::Scalar;
pub use tape::{softmax, Tape, Var};
