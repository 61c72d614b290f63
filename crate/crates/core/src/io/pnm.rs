use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;

/// `[0, 1]` to `0..=255` with halves rounding up.
pub fn quantize<T: Real>(v: T) -> u8 {
    (v.as_f64() * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// File extension matching the PNM flavor for a channel count.
pub fn pnm_extension(channels: usize) -> &'static str {
    if channels == 1 {
        "pgm"
    } else {
        "ppm"
    }
}

/// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
pub fn encode_pnm<T: Real>(img: &ImageBuffer<T>) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        let before = &self.bytes[..self.pos.min(self.bytes.len())];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        Error::Parse {
            what: "PNM image".into(),
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, name: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(format!("expected {name}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.error(format!("{name} out of range")))
    }
}

pub fn decode_pnm<T: Real>(bytes: &[u8]) -> Result<ImageBuffer<T>> {
    let mut c = Cursor { bytes, pos: 0 };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(c.error("expected P5 or P6 magic")),
    };
    c.pos = 2;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.error("width and height must be >= 1"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(c.error(format!("maxval {maxval} unsupported (expected 1..=255)")));
    }
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return Err(c.error("expected whitespace after maxval")),
    }
    let n = width * height * channels;
    let data = &bytes[c.pos..];
    if data.len() < n {
        c.pos = bytes.len();
        return Err(c.error(format!("expected {n} pixel bytes, found {}", data.len())));
    }
    let scale = maxval as f64;
    let px = data[..n].iter().map(|&b| T::lit((b as f64 / scale).min(1.0))).collect();
    ImageBuffer::new(width, height, channels, px)
}

pub fn decode_png<T: Real>(bytes: &[u8]) -> Result<ImageBuffer<T>> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| Error::Parse {
        what: "PNG image".into(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, raw) = if img.color().has_color() {
        (3, img.to_rgb8().into_raw())
    } else {
        (1, img.to_luma8().into_raw())
    };
    ImageBuffer::new(
        w,
        h,
        channels,
        raw.into_iter().map(|b| T::lit(b as f64 / 255.0)).collect(),
    )
}

/// Reads PGM/PPM (binary) or PNG, detected from the file contents.
pub fn read_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageBuffer<T>> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        decode_pnm(&bytes)
    }
}

pub fn write_image<T: Real>(path: impl AsRef<Path>, img: &ImageBuffer<T>) -> Result<()> {
    std::fs::write(path, encode_pnm(img))?;
    Ok(())
}
