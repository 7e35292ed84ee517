//! Little-endian binary containers for pattern sets, bucket series and
//! measurement matrices.
//!
//! `CGI1` layout: magic, `u32 n`, `u32 width`, `u32 height`, `u8 kind`,
//! `u64 seed`, then `f64` payload.
//!
//! | kind | contents | payload |
//! |------|----------|---------|
//! | 0 | binary pattern set | `n * width * height` values, frame-major |
//! | 1 | Gaussian-intensity pattern set | as kind 0 |
//! | 2 | bucket series (`width = height = 1`, seed of its pattern set) | noise sigma, then `n` readings |
//!
//! `PHI1` layout: magic, `u32 M`, `u32 N`, `u64 seed`, `f64 scale`, then
//! `M * N` entries row-major.

use std::io::{self, Read, Write};

use crate::cs::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::optics::{BucketSeries, PatternKind, PatternSet};

pub const SERIES_MAGIC: &[u8; 4] = b"CGI1";
pub const MATRIX_MAGIC: &[u8; 4] = b"PHI1";
const BUCKET_KIND: u8 = 2;

pub(crate) struct LeWriter<W> {
    inner: W,
}

impl<W: Write> LeWriter<W> {
    pub(crate) fn new(inner: W) -> Self {
        LeWriter { inner }
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.inner.write_all(b)?)
    }

    pub(crate) fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    pub(crate) fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit in u32")))?;
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn f64s(&mut self, values: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        Ok(self.inner.flush()?)
    }
}

pub(crate) struct LeReader<R> {
    inner: R,
    what: &'static str,
}

impl<R: Read> LeReader<R> {
    pub(crate) fn new(inner: R, what: &'static str) -> Self {
        LeReader { inner, what }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::format(self.what, "truncated"),
            _ => Error::Io(e),
        })
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut m = [0u8; 4];
        self.fill(&mut m)?;
        if &m != expected {
            return Err(Error::format(self.what, format!("bad magic {m:?}")));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    pub(crate) fn u32(&mut self) -> Result<usize> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b) as usize)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    /// Reads `count` values in chunks so a corrupt length cannot force a huge allocation.
    pub(crate) fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        const CHUNK: usize = 1 << 16;
        let mut out = Vec::with_capacity(count.min(CHUNK));
        let mut buf = vec![0u8; 8 * count.min(CHUNK)];
        let mut left = count;
        while left > 0 {
            let take = left.min(CHUNK);
            self.fill(&mut buf[..8 * take])?;
            out.extend(
                buf[..8 * take]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))),
            );
            left -= take;
        }
        Ok(out)
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::format(self.what, "trailing bytes")),
        }
    }
}

pub fn write_patterns<W: Write>(patterns: &PatternSet, out: W) -> Result<()> {
    let mut w = LeWriter::new(out);
    w.bytes(SERIES_MAGIC)?;
    w.u32(patterns.count())?;
    w.u32(patterns.width())?;
    w.u32(patterns.height())?;
    w.u8(patterns.kind().code())?;
    w.u64(patterns.seed())?;
    w.f64s(patterns.as_slice())?;
    w.finish()
}

pub fn read_patterns<R: Read>(input: R) -> Result<PatternSet> {
    let mut r = LeReader::new(input, "pattern container");
    r.magic(SERIES_MAGIC)?;
    let n = r.u32()?;
    let width = r.u32()?;
    let height = r.u32()?;
    let code = r.u8()?;
    let kind = PatternKind::from_code(code).ok_or_else(|| {
        Error::format("pattern container", format!("kind {code} is not a pattern set"))
    })?;
    let seed = r.u64()?;
    let total = n
        .checked_mul(width)
        .and_then(|v| v.checked_mul(height))
        .ok_or_else(|| Error::format("pattern container", "dimensions overflow"))?;
    let data = r.f64s(total)?;
    r.expect_end()?;
    PatternSet::from_raw(kind, seed, width, height, data)
}

pub fn write_buckets<W: Write>(buckets: &BucketSeries, out: W) -> Result<()> {
    let mut w = LeWriter::new(out);
    w.bytes(SERIES_MAGIC)?;
    w.u32(buckets.len())?;
    w.u32(1)?;
    w.u32(1)?;
    w.u8(BUCKET_KIND)?;
    w.u64(buckets.pattern_seed)?;
    w.f64s(&[buckets.noise_sigma])?;
    w.f64s(&buckets.values)?;
    w.finish()
}

pub fn read_buckets<R: Read>(input: R) -> Result<BucketSeries> {
    let mut r = LeReader::new(input, "bucket container");
    r.magic(SERIES_MAGIC)?;
    let n = r.u32()?;
    let (width, height) = (r.u32()?, r.u32()?);
    let kind = r.u8()?;
    if kind != BUCKET_KIND || width != 1 || height != 1 {
        return Err(Error::format(
            "bucket container",
            format!("kind {kind} with {width}x{height} is not a bucket series"),
        ));
    }
    let pattern_seed = r.u64()?;
    let noise_sigma = r.f64()?;
    let values = r.f64s(n)?;
    r.expect_end()?;
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::format("bucket container", "bad noise sigma"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bucket container"));
    }
    Ok(BucketSeries {
        values,
        noise_sigma,
        pattern_seed,
    })
}

pub fn write_matrix<W: Write>(phi: &MeasurementMatrix, out: W) -> Result<()> {
    let mut w = LeWriter::new(out);
    w.bytes(MATRIX_MAGIC)?;
    w.u32(phi.rows())?;
    w.u32(phi.cols())?;
    w.u64(phi.seed())?;
    w.f64s(&[phi.scale()])?;
    w.f64s(phi.entries())?;
    w.finish()
}

pub fn read_matrix<R: Read>(input: R) -> Result<MeasurementMatrix> {
    let mut r = LeReader::new(input, "measurement matrix container");
    r.magic(MATRIX_MAGIC)?;
    let rows = r.u32()?;
    let cols = r.u32()?;
    let seed = r.u64()?;
    let scale = r.f64()?;
    let total = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format("measurement matrix container", "dimensions overflow"))?;
    let entries = r.f64s(total)?;
    r.expect_end()?;
    MeasurementMatrix::from_entries(rows, cols, seed, scale, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::sample_measurement_matrix;
    use crate::optics::generate_patterns;

    #[test]
    fn patterns_round_trip() {
        for kind in [PatternKind::Binary, PatternKind::GaussianIntensity] {
            let p = generate_patterns(7, 5, 3, kind, 42).unwrap();
            let mut buf = Vec::new();
            write_patterns(&p, &mut buf).unwrap();
            assert_eq!(buf.len(), 4 + 12 + 1 + 8 + 8 * 7 * 15);
            assert_eq!(read_patterns(&buf[..]).unwrap(), p);
        }
    }

    #[test]
    fn header_layout() {
        let p = generate_patterns(2, 3, 4, PatternKind::GaussianIntensity, 0x0102).unwrap();
        let mut buf = Vec::new();
        write_patterns(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CGI1");
        assert_eq!(&buf[4..16], &[2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(buf[16], 1);
        assert_eq!(&buf[17..25], &[2, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&buf[25..33], &p.as_slice()[0].to_le_bytes());
    }

    #[test]
    fn buckets_round_trip() {
        let b = BucketSeries {
            values: vec![1.5, -0.25, 3.0],
            noise_sigma: 0.1,
            pattern_seed: 9,
        };
        let mut buf = Vec::new();
        write_buckets(&b, &mut buf).unwrap();
        let back = read_buckets(&buf[..]).unwrap();
        assert_eq!(back.values, b.values);
        assert_eq!(back.noise_sigma, b.noise_sigma);
        assert_eq!(back.pattern_seed, 9);
        assert!(read_patterns(&buf[..]).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let phi = sample_measurement_matrix(5, 12, 3).unwrap();
        let mut buf = Vec::new();
        write_matrix(&phi, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"PHI1");
        assert_eq!(buf.len(), 4 + 8 + 8 + 8 + 8 * 60);
        assert_eq!(read_matrix(&buf[..]).unwrap(), phi);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let p = generate_patterns(3, 2, 2, PatternKind::Binary, 1).unwrap();
        let mut buf = Vec::new();
        write_patterns(&p, &mut buf).unwrap();
        assert!(matches!(
            read_patterns(&buf[..buf.len() - 1]),
            Err(Error::Format { .. })
        ));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_patterns(&extra[..]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_patterns(&bad[..]).is_err());
        let mut huge = buf.clone();
        huge[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(read_patterns(&huge[..]).is_err());
        let mut nonbinary = buf;
        let at = nonbinary.len() - 8;
        nonbinary[at..].copy_from_slice(&0.5f64.to_le_bytes());
        assert!(read_patterns(&nonbinary[..]).is_err());
    }
}
