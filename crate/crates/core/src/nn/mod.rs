//! A small numeric layer sized for the sentence-pair model: dense tensors,
//! LSTM/GRU cells with hand-written backpropagation through time, Adam,
//! global-norm clipping and inverted dropout.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference gradient checks.

mod cell;
mod kernels;
mod optim;
mod params;
mod tensor;

pub use cell::{
    gru_step, lstm_step, rnn_backward, rnn_forward, CellGrads, CellKind, CellWeights,
    RecurrentState, RnnTrace,
};
pub use kernels::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc, sigmoid};
pub use optim::{clip_global_norm, AdamConfig};
pub use params::{Parameter, ParameterStore};
pub use tensor::Tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng as _;

use crate::rng::Rng;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// `1 / (1 - p)`.
pub fn dropout_mask<S: Scalar>(len: usize, p: f64, rng: &mut Rng) -> Vec<S> {
    let keep = S::lit(1.0 / (1.0 - p));
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { S::zero() } else { keep })
        .collect()
}

/// Inverted dropout. Identity when `training` is false or `p == 0`.
pub fn dropout<S: Scalar>(x: &Tensor<S>, p: f64, rng: &mut Rng, training: bool) -> Tensor<S> {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if !training || p == 0.0 {
        return x.clone();
    }
    let mask = dropout_mask::<S>(x.len(), p, rng);
    let data = x.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
    Tensor::from_vec(x.shape().to_vec(), data).expect("same shape")
}
