//! Network assembly, weight transfer and inference.
//!
//! A network is a [`NetworkSpec`] (an ordered layer graph) evaluated against
//! a [`NetworkParams`] store of named parameter groups. The patch classifier,
//! the dilated network and the fusion network reference the same group names,
//! so weights are shared rather than copied between them.

mod builders;
mod exec;
mod inference;
mod params;
mod spec;

pub use builders::{
    build_crpm, build_cs_cnn, crpm_spec, cs_cnn_spec, dilated_spec, transfer_to_dilated, window_reach, CRPM_GROUPS,
    CS_GROUPS, ENCODER_MARGIN, ENC_TAP, FEAT_TAP, PATCH, PATCH_ANCHOR, TILE, WIDTHS,
};
pub use exec::{Executor, FrozenCache, Trace, Value};
pub use inference::{
    crpm_forward, dense_forward, pad_for_windows, patch_forward, predict_crpm, predict_dilated, predict_patchwise,
    sliding_inference, window_at, DenseOutput, DILATED_HALO, DILATED_WINDOW, TILE_STRIDE,
};
pub use params::{init_conv, init_layer, init_transconv, NetworkParams, ParamGrads};
pub use spec::{LayerSpec, NetKind, NetworkSpec, Op, ValueShape, INPUT};
