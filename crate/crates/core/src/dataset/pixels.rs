use std::path::Path;

use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Value domain of a [`PixelTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelDomain {
    /// 8-bit intensities in `[0, 255]`.
    Raw,
    /// Scaled intensities in `[-1, 1]`.
    Normalized,
}

impl PixelDomain {
    fn bounds(self) -> (f32, f32) {
        match self {
            PixelDomain::Raw => (0.0, 255.0),
            PixelDomain::Normalized => (-1.0, 1.0),
        }
    }
}

/// Height × width × 3 image stored row-major, channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
    domain: PixelDomain,
}

impl PixelTensor {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f32>, domain: PixelDomain) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}×{width}")));
        }
        if data.len() != height * width * Self::CHANNELS {
            return Err(Error::Shape(format!(
                "{height}×{width}×3 image needs {} values, got {}",
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        let (lo, hi) = domain.bounds();
        if let Some(v) = data.iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(Error::Domain(format!(
                "value {v} outside [{lo}, {hi}] for a {domain:?} image"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            domain,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32, domain: PixelDomain) -> Result<Self> {
        Self::new(
            height,
            width,
            vec![value; height * width * Self::CHANNELS],
            domain,
        )
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        Self {
            height: img.height() as usize,
            width: img.width() as usize,
            data: img.as_raw().iter().map(|&v| v as f32).collect(),
            domain: PixelDomain::Raw,
        }
    }

    /// Converts a raw image to 8-bit, rounding half up.
    pub fn to_rgb(&self) -> Result<RgbImage> {
        if self.domain != PixelDomain::Raw {
            return Err(Error::Domain(
                "only raw [0, 255] images can be encoded; denormalize first".into(),
            ));
        }
        let bytes = self.data.iter().map(|&v| round_to_u8(v)).collect();
        Ok(
            RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
                .expect("buffer sized from dimensions"),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn domain(&self) -> PixelDomain {
        self.domain
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * Self::CHANNELS + c]
    }

    /// Columns `start..end` as a new image.
    pub fn columns(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.width {
            return Err(Error::Shape(format!(
                "column range {start}..{end} outside width {}",
                self.width
            )));
        }
        let row = end - start;
        let mut data = Vec::with_capacity(self.height * row * Self::CHANNELS);
        for y in 0..self.height {
            let base = y * self.width * Self::CHANNELS;
            data.extend_from_slice(
                &self.data[base + start * Self::CHANNELS..base + end * Self::CHANNELS],
            );
        }
        Ok(Self {
            height: self.height,
            width: row,
            data,
            domain: self.domain,
        })
    }

    /// Single-item NCHW tensor.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.height * self.width;
        let mut data = vec![0.0; plane * Self::CHANNELS];
        for (i, px) in self.data.chunks_exact(Self::CHANNELS).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * plane + i] = v;
            }
        }
        Tensor::from_vec([1, Self::CHANNELS, self.height, self.width], data)
            .expect("sized from dimensions")
    }

    /// Extracts batch item `index` of a 3-channel NCHW tensor; values are
    /// clamped into the domain's bounds.
    pub fn from_tensor(t: &Tensor, index: usize, domain: PixelDomain) -> Result<Self> {
        if t.channels() != Self::CHANNELS || index >= t.batch() {
            return Err(Error::Shape(format!(
                "cannot take image {index} from tensor {:?}",
                t.shape()
            )));
        }
        let (h, w) = (t.height(), t.width());
        let plane = h * w;
        let item = t.item(index);
        let (lo, hi) = domain.bounds();
        let mut data = vec![0.0; plane * Self::CHANNELS];
        for i in 0..plane {
            for c in 0..Self::CHANNELS {
                data[i * Self::CHANNELS + c] = item[c * plane + i].clamp(lo, hi);
            }
        }
        Self::new(h, w, data, domain)
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        data: Vec<f32>,
        domain: PixelDomain,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * Self::CHANNELS);
        Self {
            height,
            width,
            data,
            domain,
        }
    }
}

pub(crate) fn round_to_u8(v: f32) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Decodes an RGB raster; images with any other channel layout are rejected.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let decoded = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    match decoded {
        DynamicImage::ImageRgb8(img) => Ok(img),
        other => Err(Error::Decode {
            path: path.to_path_buf(),
            message: format!("expected 3 channels (RGB8), found {:?}", other.color()),
        }),
    }
}

/// Output encoding for images written by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Jpeg { quality: u8 },
}

impl ImageFormat {
    pub const DATASET_JPEG: ImageFormat = ImageFormat::Jpeg { quality: 95 };

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg { .. } => "jpg",
        }
    }

    pub fn encode(self, img: &RgbImage) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        let res = match self {
            ImageFormat::Png => img.write_to(&mut buf, image::ImageFormat::Png),
            ImageFormat::Jpeg { quality } => {
                let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
                img.write_with_encoder(enc)
            }
        };
        res.map_err(|e| Error::Runtime(format!("encoding image: {e}")))?;
        Ok(buf.into_inner())
    }
}

/// Encodes and writes atomically.
pub fn save_rgb(img: &RgbImage, path: &Path, format: ImageFormat) -> Result<()> {
    crate::fsutil::write_atomic(path, &format.encode(img)?)
}
