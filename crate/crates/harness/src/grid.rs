//! Image grids: rows of equally shaped tiles separated by white gutters.

use std::path::Path;

use pcam::data::{ImageTensor, Shape, TensorFormat};

use crate::error::{HarnessError, Result};

/// Gutter width in pixels.
pub const SEPARATOR: usize = 2;

/// `|a − b|` per pixel, scaled so the largest difference in the whole row is 1.
pub fn difference_row(a: &[ImageTensor], b: &[ImageTensor]) -> Result<Vec<ImageTensor>> {
    if a.len() != b.len() {
        return Err(HarnessError::Core(pcam::Error::InvalidInput(format!(
            "difference of rows with {} and {} images",
            a.len(),
            b.len()
        ))));
    }
    let diffs: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            if x.shape() != y.shape() {
                return Err(shape_error(x.shape(), y.shape()));
            }
            Ok(x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (p - q).abs()).collect())
        })
        .collect::<Result<_>>()?;
    let max = diffs.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    diffs
        .into_iter()
        .zip(a)
        .map(|(d, x)| {
            let scaled = if max > 0.0 { d.iter().map(|v| v / max).collect() } else { d };
            Ok(ImageTensor::from_clipped(x.shape(), &scaled)?)
        })
        .collect()
}

fn shape_error(expected: Shape, got: Shape) -> HarnessError {
    HarnessError::Core(pcam::Error::Dimension {
        what: "grid tile size",
        expected: expected.len(),
        got: got.len(),
    })
}

/// Tile `rows` top to bottom into one image. Every tile must share a shape and
/// every row must have the same length.
pub fn tile(rows: &[Vec<ImageTensor>]) -> Result<ImageTensor> {
    let first = rows
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| HarnessError::Core(pcam::Error::InvalidInput("empty grid".into())))?;
    let shape = first.shape();
    let cols = rows[0].len();
    for row in rows {
        if row.len() != cols {
            return Err(HarnessError::Core(pcam::Error::Dimension {
                what: "grid row length",
                expected: cols,
                got: row.len(),
            }));
        }
        if let Some(t) = row.iter().find(|t| t.shape() != shape) {
            return Err(shape_error(shape, t.shape()));
        }
    }
    let (h, w) = (shape.height, shape.width);
    let out_h = rows.len() * h + (rows.len() - 1) * SEPARATOR;
    let out_w = cols * w + (cols - 1) * SEPARATOR;
    let out_shape = Shape::new(shape.channels, out_h, out_w);
    let mut out = ImageTensor::from_clipped(out_shape, &vec![1.0; out_shape.len()])?;
    for (r, row) in rows.iter().enumerate() {
        for (c, t) in row.iter().enumerate() {
            let (y0, x0) = (r * (h + SEPARATOR), c * (w + SEPARATOR));
            for ch in 0..shape.channels {
                for y in 0..h {
                    for x in 0..w {
                        out.set(ch, y0 + y, x0 + x, t.get(ch, y, x));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Tile `rows` and write the grid as PPM (three channels) or PGM (one).
pub fn emit_grid(rows: &[Vec<ImageTensor>], path: &Path) -> Result<()> {
    let grid = tile(rows)?;
    let format = if grid.channels() == 1 {
        TensorFormat::Pgm
    } else {
        TensorFormat::Ppm
    };
    grid.write(path, format)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(shape: Shape, v: f64) -> ImageTensor {
        ImageTensor::from_clipped(shape, &vec![v; shape.len()]).unwrap()
    }

    #[test]
    fn single_tile_is_unchanged() {
        let t = pcam::data::procedural_image(Shape::new(3, 5, 4), 1, 0);
        assert_eq!(tile(&[vec![t.clone()]]).unwrap(), t);
    }

    #[test]
    fn tiling_arithmetic() {
        let s = Shape::new(3, 32, 32);
        let rows: Vec<Vec<ImageTensor>> = (0..4).map(|_| (0..10).map(|_| img(s, 0.3)).collect()).collect();
        let g = tile(&rows).unwrap();
        assert_eq!((g.height(), g.width()), (134, 338));
        assert_eq!(g.get(0, 32, 5), 1.0);
        assert_eq!(g.get(1, 5, 33), 1.0);
        assert_eq!(g.get(2, 34, 34), 0.3);
    }

    #[test]
    fn identical_images_give_a_black_difference() {
        let s = Shape::new(1, 3, 3);
        let a = vec![img(s, 0.4), img(s, 0.9)];
        let d = difference_row(&a, &a).unwrap();
        assert!(d.iter().all(|t| t.as_slice().iter().all(|&v| v == 0.0)));
        let b = vec![img(s, 0.5), img(s, 0.7)];
        let d = difference_row(&a, &b).unwrap();
        assert!((d[1].as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((d[0].as_slice()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mismatched_tiles_are_rejected() {
        let a = img(Shape::new(1, 3, 3), 0.1);
        let b = img(Shape::new(1, 4, 3), 0.1);
        assert!(matches!(
            tile(&[vec![a.clone(), b.clone()]]),
            Err(HarnessError::Core(pcam::Error::Dimension { .. }))
        ));
        assert!(tile(&[vec![a.clone()], vec![a.clone(), a]]).is_err());
    }
}
