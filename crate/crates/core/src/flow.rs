//! Per-pixel 2D displacement fields with a validity mask.

use crate::{Error, Result};

/// A dense flow field.
///
/// Solver output is integer-valued (stored in `f32`) with every pixel valid;
/// consistency checking clears `valid` on rejected matches but leaves the
/// displacement values in place, and interpolation produces real-valued,
/// fully valid fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "flow dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        if u.len() != n || v.len() != n || valid.len() != n {
            return Err(Error::InvalidInput(
                "flow component lengths do not match dimensions".into(),
            ));
        }
        Ok(FlowField { width, height, u, v, valid })
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        let n = width * height;
        FlowField {
            width,
            height,
            u: vec![u; n],
            v: vec![v; n],
            valid: vec![true; n],
        }
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
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // dimensions are always >= 1
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn uv(&self, x: usize, y: usize) -> (f32, f32) {
        let i = self.index(x, y);
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[self.index(x, y)]
    }

    pub fn set_uv(&mut self, x: usize, y: usize, u: f32, v: f32) {
        let i = self.index(x, y);
        self.u[i] = u;
        self.v[i] = v;
    }

    pub fn set_valid(&mut self, x: usize, y: usize, valid: bool) {
        let i = self.index(x, y);
        self.valid[i] = valid;
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }
}
