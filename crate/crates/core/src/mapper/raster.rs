//! In-memory rasters and the MCR1 binary format.
//!
//! Layout: `b"MCR1"`, u32 height, u32 width, u32 channels, u8 dtype
//! (0 = u8, 1 = f64), six f64 geotransform values, then row-major
//! interleaved samples. All integers and floats are little-endian.

use std::path::Path;

use crate::error::{bail, Result};

pub const MAGIC: &[u8; 4] = b"MCR1";
/// Smallest raster holding one full tile.
pub const MIN_EXTENT: usize = 200;
pub const DEFAULT_PIXEL_SIZE: f64 = 1.2;

#[derive(Clone, Debug, PartialEq)]
pub enum PixelData {
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl PixelData {
    pub fn len(&self) -> usize {
        match self {
            PixelData::U8(v) => v.len(),
            PixelData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> u8 {
        match self {
            PixelData::U8(_) => 0,
            PixelData::F64(_) => 1,
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            PixelData::U8(v) => v[i] as f64,
            PixelData::F64(v) => v[i],
        }
    }
}

/// North-up affine transform: pixel `(row, col)` has its corner at
/// `(origin_x + col·pixel_size, origin_y + row·pixel_size)`, so rows run
/// along increasing y like grid rows do.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
}

impl Default for GeoTransform {
    fn default() -> Self {
        GeoTransform { origin_x: 0.0, origin_y: 0.0, pixel_size: DEFAULT_PIXEL_SIZE }
    }
}

impl GeoTransform {
    /// The six stored coefficients `[x0, dx, rx, y0, ry, dy]`.
    pub fn to_coefficients(&self) -> [f64; 6] {
        [self.origin_x, self.pixel_size, 0.0, self.origin_y, 0.0, self.pixel_size]
    }

    pub fn from_coefficients(c: [f64; 6]) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            bail!(Format, "geotransform has non-finite coefficients");
        }
        if c[2] != 0.0 || c[4] != 0.0 {
            bail!(Format, "rotated geotransforms are not supported");
        }
        if c[1] != c[5] || c[1] <= 0.0 {
            bail!(Format, "geotransform needs equal positive pixel sizes, got {} and {}", c[1], c[5]);
        }
        Ok(GeoTransform { origin_x: c[0], origin_y: c[3], pixel_size: c[1] })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    data: PixelData,
    pub geo: GeoTransform,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, data: PixelData, geo: GeoTransform) -> Result<Self> {
        if height < MIN_EXTENT || width < MIN_EXTENT {
            bail!(InvalidArgument, "raster {height}x{width} is smaller than one {MIN_EXTENT}-pixel tile");
        }
        if channels == 0 {
            bail!(InvalidArgument, "raster needs at least one channel");
        }
        if data.len() != height * width * channels {
            bail!(ShapeMismatch, "{height}x{width}x{channels} raster needs {} samples, got {}", height * width * channels, data.len());
        }
        GeoTransform::from_coefficients(geo.to_coefficients())?;
        Ok(RasterImage { height, width, channels, data, geo })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &PixelData {
        &self.data
    }

    #[inline]
    pub fn sample(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data.get((row * self.width + col) * self.channels + channel)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 13 + 48 + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        for v in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(self.data.dtype());
        for c in self.geo.to_coefficients() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        match &self.data {
            PixelData::U8(v) => out.extend_from_slice(v),
            PixelData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 12 + 1 + 48;
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            bail!(Format, "not an MCR1 raster");
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (height, width, channels) = (u32_at(4), u32_at(8), u32_at(12));
        let dtype = bytes[16];
        let mut coeffs = [0.0; 6];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = f64_at(17 + 8 * k);
        }
        let geo = GeoTransform::from_coefficients(coeffs)?;
        let n = height.checked_mul(width).and_then(|v| v.checked_mul(channels));
        let Some(n) = n else { bail!(Format, "raster dimensions overflow") };
        let body = &bytes[HEADER..];
        let data = match dtype {
            0 if body.len() == n => PixelData::U8(body.to_vec()),
            1 if body.len() == n * 8 => {
                PixelData::F64(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            }
            0 | 1 => bail!(Format, "raster body has {} bytes, expected {} samples of dtype {dtype}", body.len(), n),
            d => bail!(Format, "unknown dtype code {d}"),
        };
        RasterImage::new(height, width, channels, data, geo)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(data: PixelData) -> RasterImage {
        RasterImage::new(200, 201, 1, data, GeoTransform { origin_x: 5.0, origin_y: -3.0, pixel_size: 0.5 }).unwrap()
    }

    #[test]
    fn round_trip_both_dtypes() {
        let u = small(PixelData::U8((0..200 * 201).map(|i| (i % 251) as u8).collect()));
        assert_eq!(RasterImage::decode(&u.encode()).unwrap(), u);
        let f = small(PixelData::F64((0..200 * 201).map(|i| i as f64 * 0.1 - 3.0).collect()));
        let back = RasterImage::decode(&f.encode()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.sample(1, 2, 0), f.sample(1, 2, 0));
    }

    #[test]
    fn header_layout() {
        let u = small(PixelData::U8(vec![0; 200 * 201]));
        let bytes = u.encode();
        assert_eq!(&bytes[..4], b"MCR1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 201);
        assert_eq!(bytes[16], 0);
        assert_eq!(bytes.len(), 65 + 200 * 201);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RasterImage::new(199, 300, 1, PixelData::U8(vec![0; 199 * 300]), GeoTransform::default()).is_err());
        assert!(RasterImage::new(200, 200, 1, PixelData::U8(vec![0; 10]), GeoTransform::default()).is_err());
        let mut bytes = small(PixelData::U8(vec![0; 200 * 201])).encode();
        assert!(RasterImage::decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[16] = 7;
        assert!(RasterImage::decode(&bytes).is_err());
        assert!(RasterImage::decode(b"MCR2").is_err());
        assert!(GeoTransform::from_coefficients([0.0, -1.2, 0.0, 0.0, 0.0, -1.2]).is_err());
    }
}
