//! The Tri-Former network: attention modules, blocks, and the full model.

pub mod attention;
pub mod block;
pub mod config;
pub mod model;

pub use attention::{
    attend, attend_core, spatial_attention, spectral_attention, Attention, AttentionVars,
};
pub use block::{block_forward, channel_mixer, Block, BlockVars, LN_EPS};
pub use config::TriFormerConfig;
pub use model::{
    apply_head, forward, forward_features, param_count, FeatureTaps, InjectHook, Model, ModelVars,
    Stage, StageVars,
};
