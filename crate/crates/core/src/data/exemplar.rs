use std::ops::Range;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Where each modality lives inside a stored vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalityLayout {
    pub image: Range<usize>,
    pub caption: Range<usize>,
}

impl ModalityLayout {
    /// Image first, caption after it.
    pub fn image_then_caption(image_len: usize, caption_len: usize) -> Self {
        Self {
            image: 0..image_len,
            caption: image_len..image_len + caption_len,
        }
    }

    pub fn dim(&self) -> usize {
        self.image.end.max(self.caption.end)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let (a, b) = if self.image.start <= self.caption.start {
            (&self.image, &self.caption)
        } else {
            (&self.caption, &self.image)
        };
        if a.start != 0 || a.end != b.start || b.end != d || a.is_empty() || b.is_empty() {
            return Err(Error::InvalidInput(format!(
                "modality spans {:?} and {:?} must be non-empty, disjoint and cover 0..{d}",
                self.image, self.caption
            )));
        }
        Ok(())
    }
}

/// Stored data points, one column per item, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarSet {
    items: Array2<f64>,
    layout: Option<ModalityLayout>,
}

impl ExemplarSet {
    pub fn from_columns(items: Array2<f64>) -> Result<Self> {
        if items.ncols() == 0 || items.nrows() == 0 {
            return Err(Error::InvalidInput("an exemplar set needs at least one non-empty item".into()));
        }
        if let Some(v) = items.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("exemplar entry {v} outside [0, 1]")));
        }
        Ok(Self {
            items,
            layout: None,
        })
    }

    pub fn from_items(items: &[Vec<f64>]) -> Result<Self> {
        let d = items.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = items.iter().find(|v| v.len() != d) {
            return Err(Error::dim("exemplar length", d, bad.len()));
        }
        let flat: Vec<f64> = items.iter().flatten().copied().collect();
        let rows = Array2::from_shape_vec((items.len(), d), flat).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_columns(rows.reversed_axes().as_standard_layout().into_owned())
    }

    pub fn with_layout(mut self, layout: ModalityLayout) -> Result<Self> {
        layout.validate(self.dim())?;
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.items.nrows()
    }

    pub fn len(&self) -> usize {
        self.items.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.items.ncols() == 0
    }

    pub fn layout(&self) -> Option<&ModalityLayout> {
        self.layout.as_ref()
    }

    pub fn item(&self, k: usize) -> ArrayView1<'_, f64> {
        self.items.column(k)
    }

    /// `d × N` matrix of items.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.items
    }

    /// First `n` items (with the same layout).
    pub fn take(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidInput(format!("cannot take {n} of {} items", self.len())));
        }
        Ok(Self {
            items: self.items.slice_axis(Axis(1), (0..n).into()).to_owned(),
            layout: self.layout.clone(),
        })
    }
}
