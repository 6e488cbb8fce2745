//! Raster types shared by the renderer and the vision pipeline.

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Smallest frame edge the pipeline accepts.
pub const MIN_DIMENSION: usize = 16;

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(Error::InvalidParameter(format!(
            "image {width}x{height} is smaller than {MIN_DIMENSION}x{MIN_DIMENSION}"
        )));
    }
    if width * height != len {
        return Err(Error::InvalidParameter(format!(
            "pixel buffer has {len} entries, expected {}",
            width * height
        )));
    }
    Ok(())
}

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

/// Foreground/background mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Paints foreground as `fg` and background as `bg`.
    pub fn to_gray(&self, fg: u8, bg: u8) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| if p { fg } else { bg }).collect(),
        }
    }
}

/// Pinhole-free orthographic camera looking along -Y at the XZ plane.
///
/// Pixel rows grow downward, so module +Z maps to decreasing row index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub width_px: usize,
    pub height_px: usize,
    pub mm_per_px: f64,
    /// Pixel position of the module base (column, row).
    pub origin_px: Vec2,
    pub frame_rate_hz: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            width_px: 640,
            height_px: 480,
            mm_per_px: 0.5,
            origin_px: Vec2::new(100.0, 380.0),
            frame_rate_hz: 10.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.width_px < MIN_DIMENSION || self.height_px < MIN_DIMENSION {
            return Err(Error::InvalidParameter(format!(
                "camera.width_px x camera.height_px = {}x{} is smaller than {MIN_DIMENSION}x{MIN_DIMENSION}",
                self.width_px, self.height_px
            )));
        }
        if !(self.mm_per_px > 0.0 && self.mm_per_px.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "camera.mm_per_px must be positive, got {}",
                self.mm_per_px
            )));
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "camera.frame_rate_hz must be positive, got {}",
                self.frame_rate_hz
            )));
        }
        Ok(())
    }

    /// Module-plane millimeters to (fractional) pixel coordinates.
    pub fn mm_to_px(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            self.origin_px.x + p.x / self.mm_per_px,
            self.origin_px.y - p.y / self.mm_per_px,
        )
    }

    pub fn px_to_mm(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            (p.x - self.origin_px.x) * self.mm_per_px,
            (self.origin_px.y - p.y) * self.mm_per_px,
        )
    }
}
