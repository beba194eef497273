//! Dense RGB raster with intensities normalized to `[0, 1]`.

use crate::{Error, Result};

/// An RGB image with `f32` samples, interleaved row-major.
///
/// Loaders normalize 8-bit inputs by the file's maximum sample value so that
/// the edge-weight scale `β` and the buffer penalty `ζ` are independent of
/// bit depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    /// Wraps interleaved RGB samples. Rejects empty dimensions, length
    /// mismatches, and non-finite samples.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "image data length {} does not match {width}x{height}x3",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("image contains non-finite samples".into()));
        }
        Ok(Image { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Image::new(width, height, data).expect("generator produced invalid image")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Border-replicated access: coordinates are clamped into the domain.
    #[inline]
    pub fn pixel_clamped(&self, x: i64, y: i64) -> [f32; 3] {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixel(xc, yc)
    }

    pub fn samples(&self) -> &[f32] {
        &self.data
    }

    /// Block-mean downsampling by an integer factor. Output dimensions are
    /// `ceil(w/scale) x ceil(h/scale)`; partial border blocks average over the
    /// pixels actually present.
    pub fn downsample(&self, scale: u32) -> Result<Image> {
        if scale == 0 {
            return Err(Error::Config("downsampling scale must be >= 1".into()));
        }
        let s = scale as usize;
        if s == 1 {
            return Ok(self.clone());
        }
        let ow = self.width.div_ceil(s);
        let oh = self.height.div_ceil(s);
        let mut data = Vec::with_capacity(ow * oh * 3);
        for oy in 0..oh {
            for ox in 0..ow {
                let x1 = (ox * s + s).min(self.width);
                let y1 = (oy * s + s).min(self.height);
                let mut acc = [0.0f64; 3];
                for y in oy * s..y1 {
                    for x in ox * s..x1 {
                        let px = self.pixel(x, y);
                        for c in 0..3 {
                            acc[c] += px[c] as f64;
                        }
                    }
                }
                let count = ((x1 - ox * s) * (y1 - oy * s)) as f64;
                data.extend(acc.iter().map(|&a| (a / count) as f32));
            }
        }
        Image::new(ow, oh, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_block_mean() {
        let img = Image::from_fn(6, 6, |_, _| [0.25, 0.5, 0.75]);
        let down = img.downsample(3).unwrap();
        assert_eq!((down.width(), down.height()), (2, 2));
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(down.pixel(x, y), [0.25, 0.5, 0.75]);
            }
        }
    }

    #[test]
    fn full_block_mean_value() {
        // 3x3 with values {0..8}/8 in every channel collapses to the mean 0.5
        let img = Image::from_fn(3, 3, |x, y| {
            let v = (y * 3 + x) as f32 / 8.0;
            [v, v, v]
        });
        let down = img.downsample(3).unwrap();
        assert_eq!((down.width(), down.height()), (1, 1));
        let px = down.pixel(0, 0);
        for c in 0..3 {
            assert!((px[c] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn scale_one_is_identity() {
        let img = Image::from_fn(4, 3, |x, y| [x as f32 / 4.0, y as f32 / 3.0, 0.0]);
        assert_eq!(img.downsample(1).unwrap(), img);
    }

    #[test]
    fn partial_blocks_average_present_pixels() {
        let img = Image::from_fn(5, 5, |x, y| [(x + y) as f32 / 10.0, 0.0, 0.0]);
        let down = img.downsample(3).unwrap();
        assert_eq!((down.width(), down.height()), (2, 2));
        // bottom-right block covers x in {3,4}, y in {3,4}
        let expected: f32 = [6.0, 7.0, 7.0, 8.0].iter().sum::<f32>() / 4.0 / 10.0;
        assert!((down.pixel(1, 1)[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn zero_scale_rejected() {
        let img = Image::from_fn(2, 2, |_, _| [0.0; 3]);
        assert!(img.downsample(0).is_err());
    }

    #[test]
    fn invalid_construction_rejected() {
        assert!(Image::new(0, 4, vec![]).is_err());
        assert!(Image::new(1, 1, vec![0.0; 2]).is_err());
        assert!(Image::new(1, 1, vec![f32::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn clamped_access_replicates_border() {
        let img = Image::from_fn(2, 2, |x, y| [(y * 2 + x) as f32, 0.0, 0.0]);
        assert_eq!(img.pixel_clamped(-5, -5), img.pixel(0, 0));
        assert_eq!(img.pixel_clamped(7, 1), img.pixel(1, 1));
    }
}
