//! Seeded Rayleigh channel draws and rank-one backscatter matrices.
//!
//! Every random quantity of draw `i` comes from a ChaCha8 stream addressed by
//! `(seed, purpose, i)`, so a draw never depends on which thread produced it
//! or on how many draws came before it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::{SystemConfig, TagLinkStats};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("tag index {k} out of range (K = {count})")]
    TagOutOfRange { k: usize, count: usize },
}

/// Independent random streams drawn for one Monte Carlo draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channels = 1,
    PilotNoise = 2,
    Auxiliary = 3,
}

/// Random generator for `(seed, stream, draw_index)`.
pub fn draw_rng(seed: u64, stream: Stream, draw_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(draw_index);
    rng
}

/// One `CN(0, var)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Forward and backward vectors of every tag for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `h_k^f`, length M.
    pub forward: Vec<DVector<Complex64>>,
    /// `h_k^b`, length R.
    pub backward: Vec<DVector<Complex64>>,
}

/// Draws `CN(0, β_k)` forward and backward channels for all tags.
pub fn draw_channels(
    config: &SystemConfig,
    stats: &TagLinkStats,
    seed: u64,
    draw_index: u64,
) -> ChannelRealization {
    let mut rng = draw_rng(seed, Stream::Channels, draw_index);
    let mut forward = Vec::with_capacity(config.k);
    let mut backward = Vec::with_capacity(config.k);
    for &beta in &stats.beta {
        forward.push(DVector::from_fn(config.m, |_, _| complex_gaussian(&mut rng, beta)));
        backward.push(DVector::from_fn(config.r, |_, _| complex_gaussian(&mut rng, beta)));
    }
    ChannelRealization { forward, backward }
}

/// `H_k = h_k^b (h_k^f)^T`, an R×M matrix.
pub fn backscatter_matrix(
    real: &ChannelRealization,
    k: usize,
) -> Result<DMatrix<Complex64>, ChannelError> {
    let count = real.forward.len();
    if k >= count {
        return Err(ChannelError::TagOutOfRange { k, count });
    }
    Ok(&real.backward[k] * real.forward[k].transpose())
}
