//! Pixel-level helpers shared by perception, planning and debug output.

/// Nearest pixel index of a continuous image coordinate (pixel centers sit
/// on integers).
pub fn pixel_of(coord: f64) -> i64 {
    (coord + 0.5).floor() as i64
}

/// `floor(num / den)` for `den > 0`.
fn floor_div(num: i64, den: i64) -> i64 {
    num.div_euclid(den)
}

/// Pixels of the discrete line between two pixel endpoints, inclusive.
///
/// One pixel per step along the major axis; the minor coordinate is the
/// exact line rounded half up.
pub fn line_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let n = dx.abs().max(dy.abs());
    if n == 0 {
        return vec![a];
    }
    (0..=n)
        .map(|k| {
            let x = a.0 + floor_div(2 * k * dx + n, 2 * n);
            let y = a.1 + floor_div(2 * k * dy + n, 2 * n);
            (x, y)
        })
        .collect()
}

/// 8-bit RGB raster with PPM (P6) export.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.data[y as usize * self.width + x as usize] = color;
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.data.len() * 3);
        for px in &self.data {
            out.extend_from_slice(px);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_convention() {
        assert_eq!(pixel_of(0.49), 0);
        assert_eq!(pixel_of(0.5), 1);
        assert_eq!(pixel_of(-0.5), 0);
        assert_eq!(pixel_of(-0.51), -1);
    }

    #[test]
    fn lines_are_gap_free_and_symmetric_in_count() {
        let cases = [
            ((0, 0), (10, 3)),
            ((5, 5), (-4, 9)),
            ((2, 7), (2, -3)),
            ((0, 0), (6, 6)),
        ];
        for (a, b) in cases {
            let px = line_pixels(a, b);
            assert_eq!(px[0], a);
            assert_eq!(*px.last().unwrap(), b);
            for w in px.windows(2) {
                assert!((w[1].0 - w[0].0).abs() <= 1 && (w[1].1 - w[0].1).abs() <= 1);
            }
            assert_eq!(px.len(), line_pixels(b, a).len());
        }
        assert_eq!(line_pixels((3, 4), (3, 4)), vec![(3, 4)]);
    }

    #[test]
    fn ppm_header() {
        let img = RgbImage::new(2, 1, [1, 2, 3]);
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&bytes[bytes.len() - 6..], &[1, 2, 3, 1, 2, 3]);
    }
}
