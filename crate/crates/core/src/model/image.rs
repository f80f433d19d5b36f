use std::path::Path;

use image::{ColorType, DynamicImage, ExtendedColorType, ImageReader};

use crate::error::{ForgeError, Result};

/// Row-major 8-bit raster with one (grayscale) or three (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .field("bytes", &self.data.len())
            .finish()
    }
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ForgeError::InvalidBuffer(format!(
                "zero extent {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ForgeError::InvalidBuffer(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ForgeError::InvalidBuffer(format!(
                "{} bytes for {width}x{height}x{channels} (expected {expected})",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Flat offset of channel `c` at `(x, y)`.
    #[inline]
    pub fn offset(&self, x: u32, y: u32, c: u8) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    /// Inverse of [`ImageBuffer::offset`].
    pub fn coords(&self, offset: usize) -> (u32, u32, u8) {
        let ch = self.channels as usize;
        let c = offset % ch;
        let p = offset / ch;
        let x = p % self.width as usize;
        let y = p / self.width as usize;
        (x as u32, y as u32, c as u8)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.data[self.offset(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, value: u8) {
        let o = self.offset(x, y, c);
        self.data[o] = value;
    }

    /// Channel values of the pixel at flat pixel index `p`.
    #[inline]
    pub fn pixel(&self, p: usize) -> &[u8] {
        let ch = self.channels as usize;
        &self.data[p * ch..(p + 1) * ch]
    }

    pub(crate) fn check_compatible(&self, other: &ImageBuffer) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(ForgeError::dims(self.dims(), other.dims()));
        }
        if self.channels != other.channels {
            return Err(ForgeError::ChannelMismatch {
                left: self.channels,
                right: other.channels,
            });
        }
        Ok(())
    }
}

/// Decodes an 8-bit grayscale or RGB raster, dropping any alpha channel.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let decoded = decode(path)?;
    let (width, height) = (decoded.width(), decoded.height());
    let (channels, data) = match decoded.color() {
        ColorType::L8 => (1, decoded.into_bytes()),
        ColorType::La8 => (1, decoded.to_luma8().into_raw()),
        ColorType::Rgb8 => (3, decoded.into_bytes()),
        ColorType::Rgba8 => (3, decoded.to_rgb8().into_raw()),
        other => {
            return Err(ForgeError::UnsupportedBitDepth {
                path: path.to_owned(),
                color: format!("{other:?}"),
            })
        }
    };
    ImageBuffer::new(width, height, channels, data)
}

pub(crate) fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| ForgeError::io(path, e))?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| ForgeError::io(path, e))?;
    reader.decode().map_err(|e| ForgeError::Decode {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Writes the buffer as PNG (format chosen from the extension).
pub fn save_image(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match image.channels {
        1 => ExtendedColorType::L8,
        _ => ExtendedColorType::Rgb8,
    };
    image::save_buffer(path, &image.data, image.width, image.height, color).map_err(|e| {
        ForgeError::Encode {
            path: path.to_owned(),
            message: e.to_string(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(ImageBuffer::new(0, 4, 3, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(ImageBuffer::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(ImageBuffer::new(2, 2, 3, vec![0; 12]).is_ok());
    }

    #[test]
    fn offset_coords_bijective() {
        let img = ImageBuffer::filled(5, 3, 3, 0).unwrap();
        let mut seen = vec![false; img.data().len()];
        for y in 0..3 {
            for x in 0..5 {
                for c in 0..3 {
                    let o = img.offset(x, y, c);
                    assert!(!seen[o]);
                    seen[o] = true;
                    assert_eq!(img.coords(o), (x, y, c));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn png_round_trip_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let data: Vec<u8> = (0..48).map(|i| (i * 5) as u8).collect();
        let img = ImageBuffer::new(4, 4, 3, data).unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.data().len(), 48);
    }

    #[test]
    fn alpha_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        let raw: Vec<u8> = (0..16).flat_map(|i| [i as u8, 2, 3, 128]).collect();
        image::save_buffer(&path, &raw, 4, 4, ExtendedColorType::Rgba8).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.pixel(5), &[5, 2, 3]);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let raw = vec![0u8; 4 * 4 * 2];
        image::save_buffer(&path, &raw, 4, 4, ExtendedColorType::L16).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported bit depth"), "{err}");
        assert!(err.to_string().contains("deep.png"));
    }

    #[test]
    fn truncated_file_is_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = ImageBuffer::filled(16, 16, 3, 9).unwrap();
        save_image(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&path), Err(ForgeError::Decode { .. })));
    }
}
