//! Learned building blocks shared by every model kind. All blocks are pure
//! functions of their parameters, inputs and explicit recurrent state, except
//! that batch normalization in training mode also updates its running
//! statistics.

mod blocks;
mod gaussian;
pub mod gradcheck;
mod layers;
mod params;

pub use blocks::{Actp, GaussianLstm, Mmfm, Predictor, SceneDecoder, SceneEncoder, SkipActivations, TactileEncoder};
pub use gaussian::{kl_divergence, sample_latent, GaussianParams};
pub use layers::{leaky_relu, BatchNorm1d, Conv2d, ConvTranspose2d, Linear, Lstm, RecurrentState};
pub use params::{Builder, Init, ParamStore};
