//! Image tensors and their on-disk formats: binary PPM (P6), binary PGM (P5)
//! and the raw `PCTN` float container.

use std::path::Path;

use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"PCTN";
pub const RAW_VERSION: u32 = 1;

/// A `C × H × W` image with pixels in `[0, 1]`, flattened channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorFormat {
    Ppm,
    Pgm,
    Raw,
}

impl TensorFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ppm" => Some(TensorFormat::Ppm),
            "pgm" => Some(TensorFormat::Pgm),
            "pctn" | "raw" => Some(TensorFormat::Raw),
            _ => None,
        }
    }
}

impl ImageTensor {
    pub fn new(shape: Shape, pixels: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidInput(format!("tensor dimensions must be positive, got {shape:?}")));
        }
        if pixels.len() != shape.len() {
            return Err(Error::dim("tensor pixels", shape.len(), pixels.len()));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            channels: shape.channels,
            height: shape.height,
            width: shape.width,
            pixels,
        })
    }

    /// Build from arbitrary values, clipping into `[0, 1]`.
    pub fn from_clipped(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::new(shape, vec![0.0; shape.len()]).expect("non-empty shape")
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.pixels[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let w = self.width;
        let h = self.height;
        self.pixels[(c * h + y) * w + x] = v.clamp(0.0, 1.0);
    }

    /// The flat vector of length `C·H·W`.
    pub fn as_slice(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pixels
    }

    pub fn read(path: &Path, format: TensorFormat) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        match format {
            TensorFormat::Ppm => decode_pnm(&bytes, b"P6", 3),
            TensorFormat::Pgm => decode_pnm(&bytes, b"P5", 1),
            TensorFormat::Raw => decode_raw(&bytes),
        }
    }

    pub fn write(&self, path: &Path, format: TensorFormat) -> Result<()> {
        let bytes = self.encode(format)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn encode(&self, format: TensorFormat) -> Result<Vec<u8>> {
        match format {
            TensorFormat::Ppm => self.encode_pnm(b"P6", 3),
            TensorFormat::Pgm => self.encode_pnm(b"P5", 1),
            TensorFormat::Raw => Ok(self.encode_raw()),
        }
    }

    pub fn decode(bytes: &[u8], format: TensorFormat) -> Result<Self> {
        match format {
            TensorFormat::Ppm => decode_pnm(bytes, b"P6", 3),
            TensorFormat::Pgm => decode_pnm(bytes, b"P5", 1),
            TensorFormat::Raw => decode_raw(bytes),
        }
    }

    fn encode_pnm(&self, magic: &[u8; 2], channels: usize) -> Result<Vec<u8>> {
        if self.channels != channels {
            return Err(Error::UnsupportedFormat(format!(
                "{} needs {channels} channel(s), tensor has {}",
                std::str::from_utf8(magic).unwrap(),
                self.channels
            )));
        }
        let mut out = Vec::with_capacity(self.pixels.len() + 32);
        out.extend_from_slice(magic);
        out.extend_from_slice(format!("\n{} {}\n255\n", self.width, self.height).as_bytes());
        let plane = self.height * self.width;
        for p in 0..plane {
            for c in 0..channels {
                out.push(quantize(self.pixels[c * plane + p]));
            }
        }
        Ok(out)
    }

    fn encode_raw(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.pixels.len());
        out.extend_from_slice(RAW_MAGIC);
        for word in [RAW_VERSION, 3, self.channels as u32, self.height as u32, self.width as u32] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for &p in &self.pixels {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format {
                offset: start,
                message: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Format {
                offset: start,
                message: format!("{what} out of range"),
            })
    }

    fn u32_le(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let v = u32::from_le_bytes(self.bytes[self.pos..end].try_into().unwrap());
        self.pos = end;
        Ok(v)
    }
}

fn decode_pnm(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<ImageTensor> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(cur.err(format!("missing {} magic", std::str::from_utf8(magic).unwrap())));
    }
    cur.pos = 2;
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.header_number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval} at byte {maxval_at}; only 8-bit (255) images are supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("expected a single whitespace byte before the raster"));
    }
    cur.pos += 1;
    let plane = width * height;
    let need = plane * channels;
    if bytes.len() - cur.pos < need {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated raster: need {need} bytes, have {}", bytes.len() - cur.pos),
        });
    }
    let raster = &bytes[cur.pos..cur.pos + need];
    let mut pixels = vec![0.0; need];
    for p in 0..plane {
        for c in 0..channels {
            pixels[c * plane + p] = f64::from(raster[p * channels + c]) / 255.0;
        }
    }
    ImageTensor::new(Shape::new(channels, height, width), pixels)
}

fn decode_raw(bytes: &[u8]) -> Result<ImageTensor> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 4 || &bytes[..4] != RAW_MAGIC {
        return Err(cur.err("missing PCTN magic"));
    }
    cur.pos = 4;
    let version = cur.u32_le("version")?;
    if version != RAW_VERSION {
        return Err(Error::UnsupportedFormat(format!("PCTN version {version}")));
    }
    let rank_at = cur.pos;
    let rank = cur.u32_le("rank")? as usize;
    if !(1..=3).contains(&rank) {
        return Err(Error::Format {
            offset: rank_at,
            message: format!("tensor rank {rank} not in 1..=3"),
        });
    }
    let mut dims = [1usize; 3];
    for i in 0..rank {
        dims[3 - rank + i] = cur.u32_le("dimension")? as usize;
    }
    let shape = Shape::new(dims[0], dims[1], dims[2]);
    let need = shape.len() * 4;
    if bytes.len() - cur.pos < need {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated payload: need {need} bytes, have {}", bytes.len() - cur.pos),
        });
    }
    let pixels = bytes[cur.pos..cur.pos + need]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ImageTensor::new(shape, pixels)
}
