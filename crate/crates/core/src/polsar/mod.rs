//! PolSAR covariance scenes: storage, feature vectors, normalisation,
//! synthetic Wishart scenes and tiling.

mod features;
mod scene;
mod synth;
mod tile;

pub use features::{
    features_complex, features_real, zscore_normalize, zscore_normalize_real, ChannelStats, NormStats, RealFeatures,
    COMPLEX_FEATURE_NAMES, DIAGONAL_IMAG, EPS_Z, REAL_FEATURE_NAMES,
};
pub use scene::{read_c3, save_c3, load_c3, write_c3, CovarianceScene, C3_MAGIC, C3_VERSION, DIAG_IMAG_TOLERANCE};
pub use synth::{auto_separated_sigmas, synth_wishart_scene, Layout, WishartSpec};
pub use tile::{extract_tile, tile_offsets, tile_scene, Tile};

/// Plane order of the six unique covariance entries, as stored in C3 files.
pub const C11: usize = 0;
pub const C12: usize = 1;
pub const C13: usize = 2;
pub const C22: usize = 3;
pub const C23: usize = 4;
pub const C33: usize = 5;
