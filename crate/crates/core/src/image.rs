//! Grayscale scenes and 8-bit binary graymap (P5) I/O.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

/// A 2-D grayscale reflectance map with pixels in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl SceneImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if pixels.len() != width * height {
            return Err(Error::mismatch(
                format!("{} pixels ({width}x{height})", width * height),
                pixels.len(),
            ));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            if !p.is_finite() {
                return Err(Error::NonFinite("scene pixels"));
            }
            return Err(Error::invalid(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(SceneImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by clamping every value into `[0, 1]`. NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let pixels = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        SceneImage::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        SceneImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        SceneImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn same_shape(&self, other: &SceneImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::mismatch(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Reads a binary portable graymap (`P5`). Sample values are scaled by `1/maxval`.
    pub fn read_pgm<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            let token = next_header_token(&mut reader)?;
            fields.push(token);
        }
        if fields[0] != "P5" {
            return Err(Error::format("graymap", format!("bad magic {:?}", fields[0])));
        }
        let parse = |s: &str, name: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format("graymap", format!("bad {name} {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::format(
                "graymap",
                format!("only 8-bit graymaps are supported (maxval {maxval})"),
            ));
        }
        let mut raster = vec![0u8; width * height];
        reader
            .read_exact(&mut raster)
            .map_err(|_| Error::format("graymap", "truncated raster"))?;
        let scale = maxval as f64;
        let pixels = raster
            .iter()
            .map(|&b| (b as f64 / scale).min(1.0))
            .collect();
        SceneImage::new(width, height, pixels)
    }

    /// Writes the image as an 8-bit binary graymap with maxval 255.
    pub fn write_pgm<W: Write>(&self, mut writer: W) -> Result<()> {
        write!(writer, "P5\n{} {}\n255\n", self.width, self.height)?;
        let raster: Vec<u8> = self
            .pixels
            .iter()
            .map(|&p| (p * 255.0).round() as u8)
            .collect();
        writer.write_all(&raster)?;
        Ok(())
    }

    /// Quantizes to the 8-bit levels a graymap round trip would produce.
    pub fn quantized(&self) -> SceneImage {
        SceneImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|&p| (p * 255.0).round() / 255.0)
                .collect(),
        }
    }
}

fn next_header_token<R: BufRead>(reader: &mut R) -> Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Err(Error::format("graymap", "truncated header"));
        }
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            let mut comment = Vec::new();
            reader.read_until(b'\n', &mut comment)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            // exactly one whitespace byte separates maxval from the raster
            return Ok(token);
        }
        token.push(c as char);
    }
}
