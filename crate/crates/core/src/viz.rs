//! Flow-field color coding and endpoint-error maps.

use crate::flow::FlowField;
use crate::image::Image;

/// Display truncation for endpoint-error maps, in pixels.
pub const ERROR_MAP_TRUNCATION: f64 = 10.0;

/// Standard color-wheel rendering: hue encodes direction (`atan2(v, u)`),
/// saturation encodes magnitude relative to `max_magnitude` (auto-scaled to
/// the largest valid displacement when `None`). Zero flow is white; invalid
/// pixels are black.
pub fn flow_to_color(flow: &FlowField, max_magnitude: Option<f64>) -> Image {
    let max_mag = max_magnitude.unwrap_or_else(|| {
        let mut m = 0.0f64;
        for p in 0..flow.len() {
            if flow.valid()[p] {
                let (u, v) = (flow.u()[p] as f64, flow.v()[p] as f64);
                m = m.max((u * u + v * v).sqrt());
            }
        }
        m
    });
    let max_mag = if max_mag > 0.0 { max_mag } else { 1.0 };
    Image::from_fn(flow.width(), flow.height(), |x, y| {
        if !flow.is_valid(x, y) {
            return [0.0, 0.0, 0.0];
        }
        let (u, v) = flow.uv(x, y);
        let (u, v) = (u as f64, v as f64);
        let mag = (u * u + v * v).sqrt();
        let hue = v.atan2(u).to_degrees().rem_euclid(360.0);
        let sat = (mag / max_mag).min(1.0);
        hsv_to_rgb(hue, sat, 1.0)
    })
}

/// Grayscale endpoint-error map, truncated at `truncate` pixels for display.
/// Entries that are NaN (pixels without ground truth) render black.
pub fn error_map(per_pixel_epe: &[f64], width: usize, height: usize, truncate: f64) -> Image {
    assert_eq!(per_pixel_epe.len(), width * height);
    Image::from_fn(width, height, |x, y| {
        let e = per_pixel_epe[y * width + x];
        if e.is_nan() {
            [0.0, 0.0, 0.0]
        } else {
            let t = (e.min(truncate) / truncate) as f32;
            [t, t, t]
        }
    })
}

fn hsv_to_rgb(hue_deg: f64, saturation: f64, value: f64) -> [f32; 3] {
    let c = value * saturation;
    let h = hue_deg / 60.0;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = value - c;
    [(r + m) as f32, (g + m) as f32, (b + m) as f32]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_white() {
        let flow = FlowField::constant(3, 3, 0.0, 0.0);
        let img = flow_to_color(&flow, None);
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(img.pixel(x, y), [1.0, 1.0, 1.0]);
            }
        }
    }

    #[test]
    fn max_magnitude_along_positive_u_is_red() {
        let flow = FlowField::constant(1, 1, 4.0, 0.0);
        let img = flow_to_color(&flow, Some(4.0));
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn antipodal_flows_have_complementary_hues() {
        let mut flow = FlowField::constant(2, 1, 3.0, 0.0);
        flow.set_uv(1, 0, -3.0, 0.0);
        let img = flow_to_color(&flow, Some(3.0));
        // 0° hue (red) against 180° hue (cyan), equal saturation
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
        let cyan = img.pixel(1, 0);
        assert!((cyan[0] - 0.0).abs() < 1e-6);
        assert!((cyan[1] - 1.0).abs() < 1e-6);
        assert!((cyan[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn negated_field_rotates_hue_half_turn() {
        fn rgb_to_hue_sat(px: [f32; 3]) -> (f64, f64) {
            let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let c = max - min;
            let hue = if c == 0.0 {
                0.0
            } else if max == r {
                60.0 * ((g - b) / c).rem_euclid(6.0)
            } else if max == g {
                60.0 * ((b - r) / c + 2.0)
            } else {
                60.0 * ((r - g) / c + 4.0)
            };
            (hue, if max == 0.0 { 0.0 } else { c / max })
        }
        let mut fwd = FlowField::constant(4, 3, 0.0, 0.0);
        let mut neg = FlowField::constant(4, 3, 0.0, 0.0);
        for y in 0..3usize {
            for x in 0..4usize {
                let (u, v) = (x as f32 - 1.5, y as f32 - 1.0);
                fwd.set_uv(x, y, u, v);
                neg.set_uv(x, y, -u, -v);
            }
        }
        let a = flow_to_color(&fwd, Some(3.0));
        let b = flow_to_color(&neg, Some(3.0));
        for y in 0..3 {
            for x in 0..4 {
                let (ha, sa) = rgb_to_hue_sat(a.pixel(x, y));
                let (hb, sb) = rgb_to_hue_sat(b.pixel(x, y));
                assert!((sa - sb).abs() < 1e-5, "saturation differs at ({x},{y})");
                if sa > 1e-6 {
                    let diff = (ha - hb).rem_euclid(360.0);
                    assert!(
                        (diff - 180.0).abs() < 0.75,
                        "hue offset {diff} at ({x},{y})"
                    );
                }
            }
        }
    }

    #[test]
    fn invalid_pixels_render_black() {
        let mut flow = FlowField::constant(2, 1, 1.0, 1.0);
        flow.set_valid(0, 0, false);
        let img = flow_to_color(&flow, None);
        assert_eq!(img.pixel(0, 0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn error_map_truncates() {
        let img = error_map(&[0.0, 5.0, 25.0, f64::NAN], 4, 1, 10.0);
        assert_eq!(img.pixel(0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(img.pixel(1, 0), [0.5, 0.5, 0.5]);
        assert_eq!(img.pixel(2, 0), [1.0, 1.0, 1.0]);
        assert_eq!(img.pixel(3, 0), [0.0, 0.0, 0.0]);
    }
}
