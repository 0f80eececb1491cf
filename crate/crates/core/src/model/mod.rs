//! Learned mapping from feature matrices to log-mel spectrograms: a frame
//! autoencoder, a prosody embedding MLP, a transformer encoder and a ridge
//! regression baseline. Gradients are derived by hand in double precision.

mod attention;
mod autoencoder;
mod gradcheck;
mod layers;
mod linreg;
mod params;
mod prosody_embed;
mod train;
mod transformer;

pub use attention::{multi_head_attention, multi_head_attention_cached, positional_encoding, AttentionCache, AttentionParams};
pub use autoencoder::{ae_encode, AutoencoderParams, AE_HIDDEN, AE_LATENT};
pub use gradcheck::{finite_difference_check, grad_check, grad_check_autoencoder, relative_error, tiny_instance, GradCheckReport, FD_STEP};
pub use layers::{Dense, LayerNorm, LAYER_NORM_EPS};
pub use linreg::{linreg_fit, linreg_predict, LinRegBaseline, RIDGE_LAMBDA};
pub use params::{Adam, AdamConfig, Parameters};
pub use prosody_embed::{prosody_embed, ProsodyEmbedParams, PROSODY_EMBED_DIM, PROSODY_HIDDEN};
pub use train::{
    ae_train, ae_train_sized, loss_curve_ends, predict_mel, sequence_loss_and_grads, train_predictor, AutoencoderTraining,
    PredictorParams, PredictorTraining, SequenceGradients, TrainingConfig, TrainingPair,
};
pub use transformer::{transformer_forward, EncoderLayer, TransformerCache, TransformerConfig, TransformerParams};
