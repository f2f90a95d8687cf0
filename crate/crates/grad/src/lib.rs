//! Reverse-mode differentiation engine for small recurrent models.
//!
//! Everything is 64-bit: the models this crate backs are desk-scale, so
//! precision wins over throughput. A [`Tape`] records the forward pass and
//! replays it backward; parameters live in a [`ParamStore`] and are updated
//! by [`Adam`] with global-norm clipping. Categorical latents get grouped
//! KL, entropy, and straight-through sampling helpers.

pub mod categorical;
pub mod check;
pub mod error;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use categorical::{
    argmax, kl_categorical, kl_categorical_grouped, mean_entropy, mode_sample, sample_index,
    straight_through_sample, CategoricalDistribution,
};
pub use check::{check_gradients, eval_random_graph, random_graph, GradCheckReport, RandomGraph};
pub use error::GradError;
pub use optim::{Adam, AdamConfig, AdamSnapshot, StepOutcome};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
