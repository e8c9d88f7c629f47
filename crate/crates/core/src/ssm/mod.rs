//! Long-range sequence classifier over per-clip features.
//!
//! A stack of diagonal state-space blocks runs over the clip sequence in
//! linear time, the residual stream is mean-pooled, and a linear decoder
//! produces class logits. Gradients are written out by hand.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod params;
pub mod scan;
pub mod train;

pub use checkpoint::{CheckpointMeta, PipelineTag, SsmCheckpoint};
pub use loss::{cross_entropy, focal_loss, log_softmax, softmax};
pub use model::{
    argmax, backward, embed_clip, forward, forward_embedded, mean_loss, pool_clip, pooled_dim,
    predict, predict_windows, sample_loss_and_grad, Dropout, Sample, Sequence,
};
pub use params::{GroupSpec, Layout, ModelConfig, Params, TemporalPooling};
pub use scan::{scan_backward, scan_with_state, ssm_scan, SsmLayerParams};
pub use train::{mix_seed, train, AdamW, EpochLog, PlateauSchedule, TrainConfig, TrainOutcome};
