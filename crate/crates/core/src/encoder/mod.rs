//! Small transformer encoder with hand-written backpropagation, standing in
//! for a pre-trained multilingual model.

mod config;
mod mlm;
mod model;

pub use config::EncoderConfig;
pub use mlm::{masked_token_accuracy, mlm_eval_loss, mlm_pretrain, MlmConfig, MlmRun};
pub use model::{Block, EncoderModel, GradientTape};
