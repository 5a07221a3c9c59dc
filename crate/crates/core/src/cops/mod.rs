//! Differentiable complex-domain operations, each with a hand-written backward pass.

pub mod activation;
pub mod conv;
pub mod head;
pub mod pool;
pub mod transconv;

pub use activation::{crelu, crelu_backward};
pub use conv::{
    cconv2d, cconv2d_backward, cconv2d_gather, real_conv2d_gather, CConvLayer, ConvGeometry,
    GradBundle, Padding,
};
pub use head::{riap_head, riap_head_backward, softmax, softmax_backward, softmax_probs, HeadParams};
pub use pool::{cmaxpool2d, cmaxpool2d_backward, PoolGeometry, PoolRecord};
pub use transconv::{ctransconv2d, ctransconv2d_backward, tconv_layer, UPSAMPLE};
