//! Channel-last floating point images.

use std::io::Cursor;
use std::path::Path;

use image::{imageops::FilterType, ImageFormat, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("image encode failed: {0}")]
    Encode(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// An `height x width x channels` image stored row-major, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Panics if `data.len() != height * width * channels`.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            height * width * channels,
            "raster buffer does not match its shape"
        );
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    /// Pixel at cyclic coordinates.
    #[inline]
    pub fn get_wrapped(&self, y: isize, x: isize, c: usize) -> f64 {
        let y = y.rem_euclid(self.height as isize) as usize;
        let x = x.rem_euclid(self.width as isize) as usize;
        self.get(y, x, c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Rec. 601 luma of an RGB raster, as a single-channel raster.
    pub fn luma(&self) -> Raster {
        assert_eq!(self.channels, 3);
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Raster::from_vec(self.height, self.width, 1, data)
    }

    /// Quantizes storage-space values to 8 bits per channel.
    pub fn to_rgb8(&self) -> RgbImage {
        assert_eq!(self.channels, 3);
        let bytes = self.quantized_bytes();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer sized from raster shape")
    }

    /// 8-bit representation of a storage-space raster, clamped to `[0, 1]`.
    pub fn quantized_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::from_vec(img.height() as usize, img.width() as usize, 3, data)
    }

    /// Snaps every value to the nearest 8-bit level so PNG round trips are exact.
    pub fn quantize(&self) -> Self {
        self.map(|v| f64::from(quantize(v)) / 255.0)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut buf = Cursor::new(Vec::new());
        self.to_rgb8()
            .write_to(&mut buf, ImageFormat::Png)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(buf.into_inner())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RasterError> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Resizes an 8-bit RGB image to `height x width` with a triangle filter.
    pub fn resized_from(img: &RgbImage, height: usize, width: usize) -> Self {
        if img.width() as usize == width && img.height() as usize == height {
            return Self::from_rgb8(img);
        }
        let resized = image::imageops::resize(img, width as u32, height as u32, FilterType::Triangle);
        Self::from_rgb8(&resized)
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Storage `[0, 1]` to model space `[-1, 1]`.
pub fn to_model_space(image: &Raster) -> Raster {
    image.map(|v| 2.0 * v - 1.0)
}

/// Model space `[-1, 1]` to storage `[0, 1]`, clamping out-of-range values.
pub fn to_storage_space(image: &Raster) -> Raster {
    image.map(|v| ((v + 1.0) * 0.5).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_for_quantized_rasters() {
        let data: Vec<f64> = (0..4 * 5 * 3).map(|i| (i * 7 % 256) as f64 / 255.0).collect();
        let r = Raster::from_vec(4, 5, 3, data);
        let back = Raster::decode(&r.encode_png().unwrap()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn model_space_round_trip() {
        let r = Raster::filled(2, 2, 3, 0.25);
        let m = to_model_space(&r);
        assert!(m.data().iter().all(|&v| (v + 0.5).abs() < 1e-15));
        assert_eq!(to_storage_space(&m), r);
        let clamped = to_storage_space(&Raster::filled(1, 1, 3, 4.0));
        assert_eq!(clamped.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn wrapped_access() {
        let mut r = Raster::zeros(3, 3, 1);
        r.set(0, 2, 0, 5.0);
        assert_eq!(r.get_wrapped(0, -1, 0), 5.0);
        assert_eq!(r.get_wrapped(3, 2, 0), 5.0);
    }
}
