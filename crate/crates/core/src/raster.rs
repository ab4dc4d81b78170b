//! Typed 2-D image grids shared by rendering, label generation, and file I/O.

use thiserror::Error;

/// Sentinel stored in depth images where a ray hit nothing.
pub const DEPTH_MISS: f32 = f32::MAX;

/// Flow/disparity mask bit flags. 0 means valid.
pub const MASK_OCCLUDED: u8 = 0x01;
pub const MASK_OUT_OF_FOV: u8 = 0x02;
pub const MASK_INVALID: u8 = 0x04;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("raster dtype mismatch: expected {expected}, got {actual}")]
    DtypeMismatch {
        expected: &'static str,
        actual: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Dtype> {
        match code {
            1 => Some(Dtype::U8),
            2 => Some(Dtype::U16),
            3 => Some(Dtype::F32),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PixelData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl PixelData {
    pub fn len(&self) -> usize {
        match self {
            PixelData::U8(v) => v.len(),
            PixelData::U16(v) => v.len(),
            PixelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            PixelData::U8(_) => Dtype::U8,
            PixelData::U16(_) => Dtype::U16,
            PixelData::F32(_) => Dtype::F32,
        }
    }
}

/// Row-major, channel-interleaved 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: PixelData,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, data: PixelData) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(RasterError::SizeMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32, channels: u8, dtype: Dtype) -> Self {
        let n = width as usize * height as usize * channels as usize;
        let data = match dtype {
            Dtype::U8 => PixelData::U8(vec![0; n]),
            Dtype::U16 => PixelData::U16(vec![0; n]),
            Dtype::F32 => PixelData::F32(vec![0.0; n]),
        };
        RasterImage {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    fn idx(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    pub fn as_f32(&self) -> Result<&[f32], RasterError> {
        match &self.data {
            PixelData::F32(v) => Ok(v),
            other => Err(RasterError::DtypeMismatch {
                expected: "f32",
                actual: other.dtype().name(),
            }),
        }
    }

    pub fn as_f32_mut(&mut self) -> Result<&mut [f32], RasterError> {
        match &mut self.data {
            PixelData::F32(v) => Ok(v),
            other => Err(RasterError::DtypeMismatch {
                expected: "f32",
                actual: other.dtype().name(),
            }),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8], RasterError> {
        match &self.data {
            PixelData::U8(v) => Ok(v),
            other => Err(RasterError::DtypeMismatch {
                expected: "u8",
                actual: other.dtype().name(),
            }),
        }
    }

    pub fn as_u8_mut(&mut self) -> Result<&mut [u8], RasterError> {
        match &mut self.data {
            PixelData::U8(v) => Ok(v),
            other => Err(RasterError::DtypeMismatch {
                expected: "u8",
                actual: other.dtype().name(),
            }),
        }
    }

    pub fn as_u16(&self) -> Result<&[u16], RasterError> {
        match &self.data {
            PixelData::U16(v) => Ok(v),
            other => Err(RasterError::DtypeMismatch {
                expected: "u16",
                actual: other.dtype().name(),
            }),
        }
    }

    pub fn as_u16_mut(&mut self) -> Result<&mut [u16], RasterError> {
        match &mut self.data {
            PixelData::U16(v) => Ok(v),
            other => Err(RasterError::DtypeMismatch {
                expected: "u16",
                actual: other.dtype().name(),
            }),
        }
    }

    pub fn get_f32(&self, x: u32, y: u32, c: u8) -> f32 {
        let i = self.idx(x, y, c);
        match &self.data {
            PixelData::F32(v) => v[i],
            _ => panic!("get_f32 on non-f32 raster"),
        }
    }

    pub fn set_f32(&mut self, x: u32, y: u32, c: u8, value: f32) {
        let i = self.idx(x, y, c);
        match &mut self.data {
            PixelData::F32(v) => v[i] = value,
            _ => panic!("set_f32 on non-f32 raster"),
        }
    }

    pub fn get_u8(&self, x: u32, y: u32, c: u8) -> u8 {
        let i = self.idx(x, y, c);
        match &self.data {
            PixelData::U8(v) => v[i],
            _ => panic!("get_u8 on non-u8 raster"),
        }
    }

    pub fn set_u8(&mut self, x: u32, y: u32, c: u8, value: u8) {
        let i = self.idx(x, y, c);
        match &mut self.data {
            PixelData::U8(v) => v[i] = value,
            _ => panic!("set_u8 on non-u8 raster"),
        }
    }

    pub fn get_u16(&self, x: u32, y: u32, c: u8) -> u16 {
        let i = self.idx(x, y, c);
        match &self.data {
            PixelData::U16(v) => v[i],
            _ => panic!("get_u16 on non-u16 raster"),
        }
    }

    pub fn set_u16(&mut self, x: u32, y: u32, c: u8, value: u16) {
        let i = self.idx(x, y, c);
        match &mut self.data {
            PixelData::U16(v) => v[i] = value,
            _ => panic!("set_u16 on non-u16 raster"),
        }
    }

    /// Bilinear sample of channel `c` of an f32 raster, clamped at borders.
    pub fn sample_bilinear_f32(&self, u: f64, v: f64, c: u8) -> f32 {
        let w = self.width as i64;
        let h = self.height as i64;
        let x0f = u.floor();
        let y0f = v.floor();
        let fx = (u - x0f) as f32;
        let fy = (v - y0f) as f32;
        let clamp = |x: i64, hi: i64| x.clamp(0, hi - 1) as u32;
        let x0 = clamp(x0f as i64, w);
        let x1 = clamp(x0f as i64 + 1, w);
        let y0 = clamp(y0f as i64, h);
        let y1 = clamp(y0f as i64 + 1, h);
        let p00 = self.get_f32(x0, y0, c);
        let p10 = self.get_f32(x1, y0, c);
        let p01 = self.get_f32(x0, y1, c);
        let p11 = self.get_f32(x1, y1, c);
        p00 * (1.0 - fx) * (1.0 - fy)
            + p10 * fx * (1.0 - fy)
            + p01 * (1.0 - fx) * fy
            + p11 * fx * fy
    }

    /// Bilinear sample of channel `c` of a u8 raster, clamped at borders.
    pub fn sample_bilinear_u8(&self, u: f64, v: f64, c: u8) -> f64 {
        let w = self.width as i64;
        let h = self.height as i64;
        let x0f = u.floor();
        let y0f = v.floor();
        let fx = u - x0f;
        let fy = v - y0f;
        let clamp = |x: i64, hi: i64| x.clamp(0, hi - 1) as u32;
        let x0 = clamp(x0f as i64, w);
        let x1 = clamp(x0f as i64 + 1, w);
        let y0 = clamp(y0f as i64, h);
        let y1 = clamp(y0f as i64 + 1, h);
        let p00 = self.get_u8(x0, y0, c) as f64;
        let p10 = self.get_u8(x1, y0, c) as f64;
        let p01 = self.get_u8(x0, y1, c) as f64;
        let p11 = self.get_u8(x1, y1, c) as f64;
        p00 * (1.0 - fx) * (1.0 - fy) + p10 * fx * (1.0 - fy) + p01 * (1.0 - fx) * fy + p11 * fx * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_length_enforced() {
        assert!(RasterImage::new(4, 4, 1, PixelData::F32(vec![0.0; 16])).is_ok());
        assert!(RasterImage::new(4, 4, 1, PixelData::F32(vec![0.0; 15])).is_err());
        assert!(RasterImage::new(4, 4, 3, PixelData::U8(vec![0; 48])).is_ok());
    }

    #[test]
    fn bilinear_interpolates_and_clamps() {
        let mut img = RasterImage::zeros(2, 2, 1, Dtype::F32);
        img.set_f32(0, 0, 0, 0.0);
        img.set_f32(1, 0, 0, 2.0);
        img.set_f32(0, 1, 0, 4.0);
        img.set_f32(1, 1, 0, 6.0);
        assert_eq!(img.sample_bilinear_f32(0.5, 0.5, 0), 3.0);
        assert_eq!(img.sample_bilinear_f32(-5.0, -5.0, 0), 0.0);
        assert_eq!(img.sample_bilinear_f32(10.0, 10.0, 0), 6.0);
    }
}
