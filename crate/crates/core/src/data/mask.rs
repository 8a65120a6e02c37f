use rand::seq::index;

use super::tensor::Shape;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Mask geometry. In every mask `true` marks a KNOWN entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Exactly `round(fraction · d)` entries chosen uniformly at random.
    RandomPixels,
    /// A centred rectangle (square for square images) covering `1 − fraction`
    /// of each channel is unknown.
    CenterPatch,
    /// The top `round(fraction · H)` rows are known.
    HalfRows,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random_pixels" | "random" => Ok(MaskKind::RandomPixels),
            "center_patch" | "patch" => Ok(MaskKind::CenterPatch),
            "half_rows" | "rows" => Ok(MaskKind::HalfRows),
            other => Err(Error::InvalidInput(format!("unknown mask kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for MaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaskKind::RandomPixels => "random_pixels",
            MaskKind::CenterPatch => "center_patch",
            MaskKind::HalfRows => "half_rows",
        })
    }
}

/// Known-entry mask over a flattened `geometry`. `index` selects an independent
/// random stream (one per item) for random masks.
pub fn make_mask(
    kind: MaskKind,
    fraction: f64,
    geometry: Shape,
    seed: u64,
    index_: u64,
) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("mask fraction must lie in (0, 1], got {fraction}")));
    }
    let d = geometry.len();
    if d == 0 {
        return Err(Error::InvalidInput("mask geometry is empty".into()));
    }
    let Shape {
        channels,
        height,
        width,
    } = geometry;
    let mut mask = vec![false; d];
    match kind {
        MaskKind::RandomPixels => {
            let known = ((fraction * d as f64).round() as usize).min(d);
            let mut rng = rng::stream(seed, Purpose::Mask, index_);
            for i in index::sample(&mut rng, d, known) {
                mask[i] = true;
            }
        }
        MaskKind::CenterPatch => {
            let side = (1.0 - fraction).sqrt();
            let ph = (height as f64 * side).round() as usize;
            let pw = (width as f64 * side).round() as usize;
            let (y0, x0) = ((height - ph) / 2, (width - pw) / 2);
            for c in 0..channels {
                for y in 0..height {
                    for x in 0..width {
                        let inside = (y0..y0 + ph).contains(&y) && (x0..x0 + pw).contains(&x);
                        mask[(c * height + y) * width + x] = !inside;
                    }
                }
            }
        }
        MaskKind::HalfRows => {
            let rows = (fraction * height as f64).round() as usize;
            for c in 0..channels {
                for y in 0..rows.min(height) {
                    for x in 0..width {
                        mask[(c * height + y) * width + x] = true;
                    }
                }
            }
        }
    }
    Ok(mask)
}
