//! The 2D displacement label space `[-r, r]² ∩ ℤ²`.

/// Square set of integer displacements, indexed row-major so that all labels
/// sharing a vertical component are contiguous.
///
/// The flattened index of `s = (s1, s2)` is `(s2 + r)·side + (s1 + r)` with
/// `side = 2r + 1`. Rows of the layout therefore vary `s1` (horizontal
/// displacement) contiguously, which is what lets the separable 2D
/// min-convolution run its first pass over contiguous memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSpace {
    radius: i32,
}

impl LabelSpace {
    pub fn new(radius: u32) -> Self {
        assert!(radius <= 1 << 14, "label radius {radius} is unreasonably large");
        LabelSpace {
            radius: radius as i32,
        }
    }

    #[inline]
    pub fn radius(&self) -> i32 {
        self.radius
    }

    /// Side length `2r + 1` of the displacement square.
    #[inline]
    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    /// Number of labels `M = (2r + 1)²`.
    #[inline]
    pub fn size(&self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub fn contains(&self, s: (i32, i32)) -> bool {
        s.0.abs() <= self.radius && s.1.abs() <= self.radius
    }

    /// Flattened index of a displacement. Panics if `s` is outside the space.
    #[inline]
    pub fn index(&self, s: (i32, i32)) -> usize {
        debug_assert!(self.contains(s));
        let side = self.side();
        (s.1 + self.radius) as usize * side + (s.0 + self.radius) as usize
    }

    /// Inverse of [`LabelSpace::index`].
    #[inline]
    pub fn label(&self, index: usize) -> (i32, i32) {
        debug_assert!(index < self.size());
        let side = self.side();
        let s1 = (index % side) as i32 - self.radius;
        let s2 = (index / side) as i32 - self.radius;
        (s1, s2)
    }

    /// All labels in index order.
    pub fn labels(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (0..self.size()).map(move |i| self.label(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_radii() {
        for r in 0..=16u32 {
            let ls = LabelSpace::new(r);
            assert_eq!(ls.size(), ls.side() * ls.side());
            for idx in 0..ls.size() {
                let s = ls.label(idx);
                assert!(ls.contains(s));
                assert_eq!(ls.index(s), idx);
            }
        }
    }

    #[test]
    fn row_major_layout() {
        let ls = LabelSpace::new(2);
        assert_eq!(ls.side(), 5);
        assert_eq!(ls.index((-2, -2)), 0);
        assert_eq!(ls.index((2, -2)), 4);
        assert_eq!(ls.index((0, 0)), 12);
        assert_eq!(ls.index((2, 2)), 24);
        // fixed s2 is one contiguous row
        for s1 in -2..=2 {
            assert_eq!(ls.index((s1, 1)), ls.index((-2, 1)) + (s1 + 2) as usize);
        }
    }
}
