//! Axis-aligned bounding boxes in normalized image coordinates.
//!
//! Boxes are stored as `(left, top, width, height)` with the origin in the
//! top-left corner of the frame. Coordinates are expressed as fractions of
//! the image size, so a centred half-width box is `(0.25, 0.25, 0.5, 0.5)`.
//! Boxes may extend beyond the unit square; only [`Box::clip_to_frame`]
//! forces them back inside.

/// Axis-aligned bounding box, normalized `(left, top, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Box {
    /// Creates a box, clamping negative width/height to zero.
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self { left, top, width: width.max(0.0), height: height.max(0.0) }
    }

    /// Box from a `[left, top, width, height]` coordinate vector.
    pub fn from_ltwh(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    /// Coordinates as `[left, top, width, height]`.
    pub fn ltwh(&self) -> [f64; 4] {
        [self.left, self.top, self.width, self.height]
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + 0.5 * self.width, self.top + 0.5 * self.height)
    }

    /// Intersects the box with the unit square `[0,1] x [0,1]`.
    pub fn clip_to_frame(&self) -> Box {
        let left = self.left.clamp(0.0, 1.0);
        let top = self.top.clamp(0.0, 1.0);
        let right = self.right().clamp(0.0, 1.0);
        let bottom = self.bottom().clamp(0.0, 1.0);
        Box::new(left, top, (right - left).max(0.0), (bottom - top).max(0.0))
    }
}

/// Intersection-over-union of two boxes.
///
/// Returns a value in `[0, 1]`; degenerate pairs with zero union area give 0.
pub fn iou(a: &Box, b: &Box) -> f64 {
    let ix = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        // rounding in right()/bottom() can push the ratio an ulp past 1
        (inter / union).min(1.0)
    }
}

/// Sum of absolute coordinate differences over `(left, top, width, height)`.
pub fn l1_distance(a: &Box, b: &Box) -> f64 {
    (a.left - b.left).abs()
        + (a.top - b.top).abs()
        + (a.width - b.width).abs()
        + (a.height - b.height).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn iou_known_overlap() {
        let a = Box::new(0.0, 0.0, 0.2, 0.2);
        let b = Box::new(0.1, 0.1, 0.2, 0.2);
        assert_relative_eq!(iou(&a, &b), 1.0 / 7.0, max_relative = 1e-12);
    }

    #[test]
    fn iou_identical_is_one() {
        let a = Box::new(0.3, 0.4, 0.25, 0.1);
        assert_relative_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        let a = Box::new(0.0, 0.0, 0.1, 0.1);
        let b = Box::new(0.5, 0.5, 0.1, 0.1);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_zero_union_is_zero() {
        let a = Box::new(0.2, 0.2, 0.0, 0.0);
        let b = Box::new(0.2, 0.2, 0.0, 0.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn l1_known_distance() {
        let a = Box::new(0.0, 0.0, 0.5, 0.5);
        let b = Box::new(0.1, 0.2, 0.5, 0.4);
        assert_relative_eq!(l1_distance(&a, &b), 0.4, max_relative = 1e-12);
    }

    #[test]
    fn clip_clamps_to_unit_square() {
        let out = Box::new(1.2, 1.2, 0.5, 0.5).clip_to_frame();
        assert_eq!(out.ltwh(), [1.0, 1.0, 0.0, 0.0]);
        let partial = Box::new(-0.1, 0.0, 0.3, 0.5).clip_to_frame();
        assert_relative_eq!(partial.left, 0.0);
        assert_relative_eq!(partial.width, 0.2, max_relative = 1e-12);
        assert_relative_eq!(partial.height, 0.5);
    }

    #[test]
    fn constructor_clamps_negative_dims() {
        let b = Box::new(0.1, 0.1, -0.2, -0.3);
        assert_eq!(b.width, 0.0);
        assert_eq!(b.height, 0.0);
    }

    fn arb_box() -> impl Strategy<Value = Box> {
        (-0.5..1.5f64, -0.5..1.5f64, 0.0..0.8f64, 0.0..0.8f64)
            .prop_map(|(l, t, w, h)| Box::new(l, t, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), b in arb_box(),
                                     dx in -0.5..0.5f64, dy in -0.5..0.5f64) {
            let shift = |c: &Box| Box::new(c.left + dx, c.top + dy, c.width, c.height);
            prop_assert!((iou(&a, &b) - iou(&shift(&a), &shift(&b))).abs() < 1e-12);
        }

        #[test]
        fn iou_positive_iff_overlap(a in arb_box(), b in arb_box()) {
            let overlaps = a.left < b.right() && b.left < a.right()
                && a.top < b.bottom() && b.top < a.bottom()
                && a.area() > 0.0 && b.area() > 0.0;
            if overlaps {
                prop_assert!(iou(&a, &b) > 0.0);
            } else {
                prop_assert_eq!(iou(&a, &b), 0.0);
            }
        }

        #[test]
        fn l1_is_a_metric(a in arb_box(), b in arb_box(), c in arb_box()) {
            prop_assert!((l1_distance(&a, &b) - l1_distance(&b, &a)).abs() < 1e-15);
            prop_assert_eq!(l1_distance(&a, &a), 0.0);
            prop_assert!(l1_distance(&a, &c)
                <= l1_distance(&a, &b) + l1_distance(&b, &c) + 1e-12);
        }

        #[test]
        fn clip_stays_inside(a in arb_box()) {
            let c = a.clip_to_frame();
            prop_assert!(c.left >= 0.0 && c.top >= 0.0);
            prop_assert!(c.right() <= 1.0 + 1e-15 && c.bottom() <= 1.0 + 1e-15);
        }
    }
}
