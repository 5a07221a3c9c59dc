use rand::Rng;

use crate::cops::CConvLayer;
use crate::ctensor::CTensor;

pub fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> CTensor {
    let n: usize = shape.iter().product();
    let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    CTensor::from_planes(shape, re, im).unwrap()
}

pub fn random_layer<R: Rng>(rng: &mut R, out: usize, inp: usize, k: usize) -> CConvLayer {
    CConvLayer::new(random_tensor(rng, &[out, inp, k, k]), random_tensor(rng, &[out])).unwrap()
}
