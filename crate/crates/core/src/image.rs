use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major `height × width × channels` raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T> {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<T>,
}

/// `(width, height, channels)`.
pub type Shape = (usize, usize, usize);

/// Luminance weights used for every RGB to gray conversion.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

impl<T: Real> ImageBuffer<T> {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invariant("image width and height must be >= 1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invariant(format!(
                "image channels must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::invariant(format!(
                "image buffer holds {} values, expected {}",
                pixels.len(),
                width * height * channels
            )));
        }
        if let Some(i) = pixels.iter().position(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(Error::invariant(format!(
                "pixel values must lie in [0,1] (index {i} is {})",
                pixels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> Shape {
        (self.width, self.height, self.channels)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a `width × height` plane.
    pub fn plane(&self, c: usize) -> Vec<T> {
        self.pixels.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Gray plane: the single channel, or weighted RGB luminance.
    pub fn luminance(&self) -> Vec<T> {
        if self.channels == 1 {
            return self.pixels.clone();
        }
        let w = LUMA.map(T::lit);
        self.pixels
            .chunks_exact(3)
            .map(|p| w[0] * p[0] + w[1] * p[1] + w[2] * p[2])
            .collect()
    }

    pub fn mean(&self) -> T {
        crate::scalar::mean(&self.pixels)
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    /// Converts between scalar types.
    pub fn cast<U: Real>(&self) -> ImageBuffer<U> {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            pixels: self.pixels.iter().map(|&p| U::lit(p.as_f64())).collect(),
        }
    }
}

/// Interleaves per-channel planes back into pixel order.
pub(crate) fn interleave<T: Copy>(planes: &[Vec<T>]) -> Vec<T> {
    let c = planes.len();
    let n = planes[0].len();
    let mut out = Vec::with_capacity(n * c);
    for i in 0..n {
        for p in planes {
            out.push(p[i]);
        }
    }
    out
}
