//! Comparison memories: modern Hopfield networks and iterated autoencoders.

pub mod ae;
pub mod mhn;

pub use ae::{ae_loss_and_grad, ae_retrieve, ae_retrieve_batch, ae_train, AeGrad, AeModel, AeTrace};
pub use mhn::{mhn_build, mhn_retrieve, mhn_retrieve_batch, mhn_step, MhnModel, DEFAULT_BETAS, DEFAULT_COPIES};
