//! Bundled desk-scale corpora: seeded procedural textures and a small caption set.

use ndarray::Array2;
use rand::Rng as _;

use super::caption::{Vocabulary, DEFAULT_CAPTION_LEN};
use super::exemplar::{ExemplarSet, ModalityLayout};
use super::tensor::{ImageTensor, Shape};
use crate::error::Result;
use crate::rng::{self, Purpose};

/// One caption per line, at most 25 words each.
pub const BUNDLED_CAPTIONS: &str = include_str!("../../assets/captions.txt");

/// Image `index` of the procedural corpus for `seed`.
///
/// Each channel is a flat base level plus a few oriented sinusoidal gratings
/// and Gaussian blobs, clipped to `[0, 1]`. Items are drawn from independent
/// streams, so item `k` does not depend on how many items are requested.
pub fn procedural_image(shape: Shape, seed: u64, index: u64) -> ImageTensor {
    let mut rng = rng::stream(seed, Purpose::Corpus, index);
    let Shape {
        channels,
        height,
        width,
    } = shape;
    let coord = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut pixels = vec![0.0; shape.len()];
    for c in 0..channels {
        let base = rng.random_range(0.2..0.8);
        let gratings: Vec<[f64; 4]> = (0..4)
            .map(|_| {
                [
                    rng.random_range(0.5..6.0),
                    rng.random_range(0.5..6.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.05..0.2),
                ]
            })
            .collect();
        let blobs: Vec<[f64; 4]> = (0..3)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.05..0.3),
                    rng.random_range(-0.3..0.3),
                ]
            })
            .collect();
        for y in 0..height {
            let yy = coord(y, height);
            for x in 0..width {
                let xx = coord(x, width);
                let mut v = base;
                for &[fx, fy, phase, amp] in &gratings {
                    v += amp * (std::f64::consts::TAU * (fx * xx + fy * yy) + phase).sin();
                }
                for &[cx, cy, r, amp] in &blobs {
                    let d2 = (xx - cx).powi(2) + (yy - cy).powi(2);
                    v += amp * (-d2 / (2.0 * r * r)).exp();
                }
                pixels[(c * height + y) * width + x] = v.clamp(0.0, 1.0);
            }
        }
    }
    ImageTensor::new(shape, pixels).expect("clipped pixels")
}

/// The first `n` procedural images as an exemplar set.
pub fn procedural_set(shape: Shape, n: usize, seed: u64) -> Result<ExemplarSet> {
    let mut m = Array2::zeros((shape.len(), n));
    for (k, mut col) in m.columns_mut().into_iter().enumerate() {
        let img = procedural_image(shape, seed, k as u64);
        col.assign(&ndarray::ArrayView1::from(img.as_slice()));
    }
    ExemplarSet::from_columns(m)
}

pub fn bundled_captions() -> Vec<String> {
    BUNDLED_CAPTIONS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

/// Procedural images paired with the bundled captions.
#[derive(Debug, Clone)]
pub struct CaptionedCorpus {
    pub shape: Shape,
    pub vocabulary: Vocabulary,
    pub captions: Vec<String>,
    pub caption_len: usize,
    pub set: ExemplarSet,
}

impl CaptionedCorpus {
    /// The first `n` captions and images; each item is the flattened image
    /// followed by its padded caption codes. The vocabulary covers every
    /// bundled caption.
    pub fn bundled(shape: Shape, n: usize, seed: u64) -> Result<Self> {
        Self::from_captions(shape, bundled_captions(), n, seed, DEFAULT_CAPTION_LEN)
    }

    pub fn from_captions(
        shape: Shape,
        all_captions: Vec<String>,
        n: usize,
        seed: u64,
        caption_len: usize,
    ) -> Result<Self> {
        let vocabulary = Vocabulary::from_captions(all_captions.iter().map(String::as_str))?;
        if n == 0 || n > all_captions.len() {
            return Err(crate::Error::InvalidInput(format!(
                "requested {n} captioned items, corpus has {}",
                all_captions.len()
            )));
        }
        let captions: Vec<String> = all_captions.into_iter().take(n).collect();
        let d = shape.len() + caption_len;
        let mut m = Array2::zeros((d, n));
        for (k, caption) in captions.iter().enumerate() {
            let img = procedural_image(shape, seed, k as u64);
            let code = vocabulary.encode(caption, caption_len)?;
            let mut col = m.column_mut(k);
            for (dst, &src) in col.iter_mut().zip(img.as_slice().iter().chain(&code)) {
                *dst = src;
            }
        }
        let set = ExemplarSet::from_columns(m)?
            .with_layout(ModalityLayout::image_then_caption(shape.len(), caption_len))?;
        Ok(Self {
            shape,
            vocabulary,
            captions,
            caption_len,
            set,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_items_are_stable_and_distinct() {
        let shape = Shape::new(3, 8, 8);
        let a = procedural_image(shape, 1, 0);
        assert_eq!(a, procedural_image(shape, 1, 0));
        assert_ne!(a, procedural_image(shape, 1, 1));
        let set = procedural_set(shape, 3, 1).unwrap();
        assert_eq!(set.item(0).to_vec(), a.as_slice());
    }

    #[test]
    fn bundled_captions_fit_the_codec() {
        let caps = bundled_captions();
        assert!(caps.len() >= 100);
        let vocab = Vocabulary::from_captions(caps.iter().map(String::as_str)).unwrap();
        assert!(vocab.len() <= 1000);
        for c in &caps {
            let code = vocab.encode(c, DEFAULT_CAPTION_LEN).unwrap();
            assert_eq!(&vocab.decode(&code), c);
        }
    }

    #[test]
    fn captioned_items_hold_image_then_caption() {
        let shape = Shape::new(3, 4, 4);
        let corpus = CaptionedCorpus::bundled(shape, 5, 2).unwrap();
        assert_eq!(corpus.set.dim(), 48 + 25);
        let layout = corpus.set.layout().unwrap().clone();
        let item = corpus.set.item(3);
        let caption: Vec<f64> = item.slice(ndarray::s![layout.caption]).to_vec();
        assert_eq!(corpus.vocabulary.decode(&caption), corpus.captions[3]);
    }
}
