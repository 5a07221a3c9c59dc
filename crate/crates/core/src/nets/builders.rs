//! The three architectures: the patch classifier, its dilated dense
//! counterpart, and the parallel fusion network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{init_conv, init_transconv, NetworkParams};
use super::spec::{LayerSpec, NetKind, NetworkSpec, Op, INPUT};
use crate::cops::{ConvGeometry, HeadParams, Padding, PoolGeometry};
use crate::error::{Error, Result};

/// Side of the square training window.
pub const PATCH: usize = 10;
/// Row/column of the labelled pixel inside its window.
pub const PATCH_ANCHOR: usize = 4;
/// Side of the tiles processed by the fusion network.
pub const TILE: usize = 128;
/// Mirror margin around tiles for the unpadded encoder branch.
pub const ENCODER_MARGIN: usize = 3;
/// Channel counts of the four convolution layers (the last is the class count).
pub const WIDTHS: [usize; 3] = [12, 24, 48];
pub const FEAT_TAP: &str = "feat24";
pub const ENC_TAP: &str = "enc24";

/// Groups whose weights come from the patch classifier.
pub const CS_GROUPS: [&str; 5] = ["conv1", "conv2", "conv3", "conv4", "head"];
/// Groups trained in the second step.
pub const CRPM_GROUPS: [&str; 4] = ["up1", "up2", "fuse", "fuse_head"];

fn conv(name: &str, param: &str, geometry: ConvGeometry) -> LayerSpec {
    LayerSpec::new(
        name,
        Op::Conv {
            param: param.into(),
            geometry,
        },
    )
}

fn relu(name: &str) -> LayerSpec {
    LayerSpec::new(name, Op::Relu)
}

fn pool(name: &str, geometry: PoolGeometry) -> LayerSpec {
    LayerSpec::new(name, Op::MaxPool { geometry })
}

fn head(name: &str, param: &str) -> LayerSpec {
    LayerSpec::new(name, Op::Head { param: param.into() })
}

fn classifier_tail(layers: &mut Vec<LayerSpec>) {
    layers.push(conv("conv3", "conv3", ConvGeometry::VALID));
    layers.push(relu("relu3"));
    layers.push(conv("conv4", "conv4", ConvGeometry::VALID));
    layers.push(head("head", "head"));
    layers.push(LayerSpec::new("softmax", Op::Softmax));
}

pub fn cs_cnn_spec(c_in: usize, n_cls: usize) -> NetworkSpec {
    let mut layers = vec![
        conv("conv1", "conv1", ConvGeometry::VALID),
        relu("relu1"),
        pool("pool1", PoolGeometry::downsample(2)),
        conv("conv2", "conv2", ConvGeometry::VALID),
        relu("relu2"),
        pool("pool2", PoolGeometry::downsample(2)).tap(FEAT_TAP),
    ];
    classifier_tail(&mut layers);
    NetworkSpec {
        kind: NetKind::CsCnn,
        in_channels: c_in,
        classes: n_cls,
        layers,
    }
}

/// Dense layers of the dilated network up to the 24-channel feature map.
///
/// The first pool pads top/left and the second bottom/right; with this split
/// the output at pixel `p` covers input rows and columns `p - 4 ..= p + 5`,
/// exactly the patch classifier's window anchored at [`PATCH_ANCHOR`].
fn dilated_trunk(prefix: &str) -> Vec<LayerSpec> {
    let n = |s: &str| format!("{}{}", prefix, s);
    vec![
        conv(&n("conv1"), "conv1", ConvGeometry::dilated(1, 1)),
        relu(&n("relu1")),
        pool(&n("pool1"), PoolGeometry::dense_leading(2, 1)),
        conv(&n("conv2"), "conv2", ConvGeometry::dilated(2, 2)),
        relu(&n("relu2")),
        pool(&n("pool2"), PoolGeometry::dense(2, 2)).tap(FEAT_TAP),
    ]
}

pub fn dilated_spec(c_in: usize, n_cls: usize) -> NetworkSpec {
    let mut layers = dilated_trunk("");
    classifier_tail(&mut layers);
    NetworkSpec {
        kind: NetKind::Dilated,
        in_channels: c_in,
        classes: n_cls,
        layers,
    }
}

pub fn crpm_spec(c_in: usize, n_cls: usize) -> NetworkSpec {
    let mut layers = dilated_trunk("a_");
    layers.extend([
        LayerSpec::new("b_pad", Op::MirrorPad { margin: ENCODER_MARGIN }).from(INPUT),
        conv("b_conv1", "conv1", ConvGeometry::VALID),
        relu("b_relu1"),
        pool("b_pool1", PoolGeometry::downsample(2)),
        conv("b_conv2", "conv2", ConvGeometry::VALID),
        relu("b_relu2").tap(ENC_TAP),
        pool("b_pool2", PoolGeometry::downsample(2)),
        conv("b_conv3", "conv3", ConvGeometry::VALID),
        relu("b_relu3"),
        LayerSpec::new("up1", Op::TransConv { param: "up1".into() }),
        relu("up1_relu"),
        LayerSpec::new("skip", Op::CropConcat { tap: ENC_TAP.into() }),
        LayerSpec::new("up2", Op::TransConv { param: "up2".into() }),
        relu("up2_relu"),
        LayerSpec::new("fuse_concat", Op::CropConcat { tap: FEAT_TAP.into() }),
        conv("fuse", "fuse", ConvGeometry::VALID),
        head("fuse_head", "fuse_head"),
        LayerSpec::new("softmax", Op::Softmax),
    ]);
    NetworkSpec {
        kind: NetKind::Crpm,
        in_channels: c_in,
        classes: n_cls,
        layers,
    }
}

/// Patch classifier with freshly initialised weights.
pub fn build_cs_cnn(c_in: usize, n_cls: usize, seed: u64) -> Result<(NetworkSpec, NetworkParams)> {
    if c_in == 0 || n_cls < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least one input channel and two classes, got {} and {}",
            c_in, n_cls
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetworkParams::default();
    let [w1, w2, w3] = WIDTHS;
    p.convs.insert("conv1".into(), init_conv(&mut rng, w1, c_in, 3));
    p.convs.insert("conv2".into(), init_conv(&mut rng, w2, w1, 3));
    p.convs.insert("conv3".into(), init_conv(&mut rng, w3, w2, 1));
    p.convs.insert("conv4".into(), init_conv(&mut rng, n_cls, w3, 1));
    p.heads.insert("head".into(), HeadParams::default());
    Ok((cs_cnn_spec(c_in, n_cls), p))
}

fn check_cs(cs: &NetworkSpec, params: &NetworkParams) -> Result<()> {
    if cs.kind != NetKind::CsCnn || *cs != cs_cnn_spec(cs.in_channels, cs.classes) {
        return Err(Error::InvalidNetwork("expected a patch classifier network".into()));
    }
    cs.output_shapes(params, (cs.in_channels, PATCH, PATCH))?;
    Ok(())
}

/// Re-expresses the patch classifier as a dense network over the same parameter groups.
pub fn transfer_to_dilated(cs: &NetworkSpec, params: &NetworkParams) -> Result<NetworkSpec> {
    check_cs(cs, params)?;
    Ok(dilated_spec(cs.in_channels, cs.classes))
}

/// Adds fresh decoder and fusion groups to trained patch-classifier weights
/// and freezes everything inherited.
pub fn build_crpm(cs: &NetworkSpec, params: &NetworkParams, seed: u64) -> Result<(NetworkSpec, NetworkParams)> {
    check_cs(cs, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    let [_, w2, w3] = WIDTHS;
    p.convs.insert("up1".into(), init_transconv(&mut rng, w3, w2));
    p.convs.insert("up2".into(), init_transconv(&mut rng, 2 * w2, w2));
    p.convs.insert("fuse".into(), init_conv(&mut rng, cs.classes, 2 * w2, 1));
    p.heads.insert("fuse_head".into(), HeadParams::default());
    p.frozen = CS_GROUPS.iter().map(|s| s.to_string()).collect();
    Ok((crpm_spec(cs.in_channels, cs.classes), p))
}

/// Extent of the window around its anchor pixel, per side.
pub fn window_reach() -> Padding {
    Padding {
        top: PATCH_ANCHOR,
        left: PATCH_ANCHOR,
        bottom: PATCH - PATCH_ANCHOR - 1,
        right: PATCH - PATCH_ANCHOR - 1,
    }
}
