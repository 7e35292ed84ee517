//! Procedural test scenes: block letters and simple shapes on a dark background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::SceneImage;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// 5x7 bitmaps, one `u8` per row with the leftmost column in bit 4.
const FONT: [(char, [u8; GLYPH_H]); 36] = [
    ('A', [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11]),
    ('B', [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E]),
    ('C', [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E]),
    ('D', [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C]),
    ('E', [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F]),
    ('F', [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10]),
    ('G', [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F]),
    ('H', [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11]),
    ('I', [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E]),
    ('J', [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C]),
    ('K', [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11]),
    ('L', [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F]),
    ('M', [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11]),
    ('N', [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11]),
    ('O', [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E]),
    ('P', [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10]),
    ('Q', [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D]),
    ('R', [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11]),
    ('S', [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E]),
    ('T', [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04]),
    ('U', [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E]),
    ('V', [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04]),
    ('W', [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A]),
    ('X', [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11]),
    ('Y', [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04]),
    ('Z', [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F]),
    ('0', [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E]),
    ('1', [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E]),
    ('2', [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F]),
    ('3', [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E]),
    ('4', [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02]),
    ('5', [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E]),
    ('6', [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E]),
    ('7', [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08]),
    ('8', [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E]),
    ('9', [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C]),
];

fn glyph(c: char) -> Option<&'static [u8; GLYPH_H]> {
    let c = c.to_ascii_uppercase();
    FONT.iter().find(|(k, _)| *k == c).map(|(_, rows)| rows)
}

/// Mutable canvas used while composing a scene.
struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Canvas {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    fn fill_rect(&mut self, x0: i64, y0: i64, w: i64, h: i64, value: f64) {
        for y in y0.max(0)..(y0 + h).min(self.height as i64) {
            for x in x0.max(0)..(x0 + w).min(self.width as i64) {
                self.pixels[y as usize * self.width + x as usize] = value;
            }
        }
    }

    fn fill_disc(&mut self, cx: f64, cy: f64, r: f64, value: f64) {
        for y in 0..self.height {
            for x in 0..self.width {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.pixels[y * self.width + x] = value;
                }
            }
        }
    }

    /// Draws `text` with its top-left corner at `(x0, y0)`, each font pixel
    /// becoming a `scale x scale` square and glyphs separated by one font pixel.
    fn text(&mut self, text: &str, x0: i64, y0: i64, scale: usize, value: f64) {
        let s = scale as i64;
        for (i, c) in text.chars().enumerate() {
            let Some(rows) = glyph(c) else { continue };
            let gx = x0 + i as i64 * (GLYPH_W as i64 + 1) * s;
            for (ry, bits) in rows.iter().enumerate() {
                for rx in 0..GLYPH_W {
                    if bits & (1 << (GLYPH_W - 1 - rx)) != 0 {
                        self.fill_rect(gx + rx as i64 * s, y0 + ry as i64 * s, s, s, value);
                    }
                }
            }
        }
    }

    fn finish(self) -> Result<SceneImage> {
        SceneImage::new(self.width, self.height, self.pixels)
    }
}

/// Pixel extent of `text` rendered at `scale`.
pub fn text_extent(text: &str, scale: usize) -> (usize, usize) {
    let n = text.chars().count();
    if n == 0 {
        return (0, 0);
    }
    ((n * (GLYPH_W + 1) - 1) * scale, GLYPH_H * scale)
}

/// Bright `text` centred on a dark `width x height` background, at the largest
/// integer scale that fits with a small margin.
pub fn render_text(text: &str, width: usize, height: usize) -> Result<SceneImage> {
    if text.chars().any(|c| glyph(c).is_none() && c != ' ') {
        return Err(Error::invalid(format!("no glyph for some character of {text:?}")));
    }
    let (w1, h1) = text_extent(text, 1);
    let mut canvas = Canvas::new(width, height);
    if w1 > 0 {
        let scale = ((width * 9 / 10) / w1).min((height * 9 / 10) / h1).max(1);
        let (tw, th) = text_extent(text, scale);
        let x0 = (width as i64 - tw as i64) / 2;
        let y0 = (height as i64 - th as i64) / 2;
        canvas.text(text, x0, y0, scale, 1.0);
    }
    canvas.finish()
}

/// A seeded random scene: a few letters at random sizes and positions, and
/// sometimes a bar or disc of random brightness.
pub fn random_scene(width: usize, height: usize, seed: u64) -> Result<SceneImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut canvas = Canvas::new(width, height);
    let max_scale = (height / (2 * GLYPH_H)).max(1);
    let min_scale = (max_scale / 3).max(1);
    let strings = rng.random_range(1..=3);
    for _ in 0..strings {
        let len = rng.random_range(1..=4);
        let text: String = (0..len)
            .map(|_| FONT[rng.random_range(0..26)].0)
            .collect();
        let scale = rng.random_range(min_scale..=max_scale);
        let (tw, th) = text_extent(&text, scale);
        let x0 = rng.random_range(-(tw as i64) / 4..=(width as i64 - tw as i64 * 3 / 4).max(0));
        let y0 = rng.random_range(-(th as i64) / 4..=(height as i64 - th as i64 * 3 / 4).max(0));
        canvas.text(&text, x0, y0, scale, 1.0);
    }
    if rng.random_bool(0.5) {
        let value = rng.random_range(0.4..=1.0);
        if rng.random_bool(0.5) {
            let w = rng.random_range(2..=(width / 4).max(2)) as i64;
            let h = rng.random_range(2..=(height / 2).max(2)) as i64;
            let x0 = rng.random_range(0..width as i64);
            let y0 = rng.random_range(0..height as i64);
            canvas.fill_rect(x0, y0, w, h, value);
        } else {
            let r = rng.random_range(2.0..=(width.min(height) as f64 / 8.0).max(2.5));
            let cx = rng.random_range(0.0..width as f64);
            let cy = rng.random_range(0.0..height as f64);
            canvas.fill_disc(cx, cy, r, value);
        }
    }
    canvas.finish()
}
