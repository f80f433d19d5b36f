use std::path::Path;

use image::{ColorType, ExtendedColorType};
use serde::{Deserialize, Serialize};

use super::image::decode;
use crate::error::{ForgeError, Result};

/// Values above this are foreground when binarizing a stored mask.
pub const MASK_BINARIZE_LEVEL: u8 = 127;

/// Binary mask with values in {0, 1}, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mask({}x{})", self.width, self.height)
    }
}

impl Mask {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn ones(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![1; width as usize * height as usize],
        }
    }

    /// Builds a mask from any byte values; nonzero is foreground.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Wraps 0/1 values; any nonzero byte is normalized to 1.
    pub fn from_bits(width: u32, height: u32, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(ForgeError::InvalidBuffer(format!(
                "{} mask values for {width}x{height}",
                bits.len()
            )));
        }
        let data = bits.into_iter().map(|b| (b != 0) as u8).collect();
        Ok(Self {
            width,
            height,
            data,
        })
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

    pub fn bits(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.data[y as usize * self.width as usize + x as usize] = on as u8;
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub(crate) fn check_dims(&self, dims: (u32, u32)) -> Result<()> {
        if self.dims() != dims {
            return Err(ForgeError::dims(self.dims(), dims));
        }
        Ok(())
    }
}

/// Named parsing regions used by the filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Face,
    Eyes,
    Teeth,
    Contour,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Face, Region::Eyes, Region::Teeth, Region::Contour];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Face => "face",
            Region::Eyes => "eyes",
            Region::Teeth => "teeth",
            Region::Contour => "contour",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Face-parsing masks for one image. Background is the complement of `face`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMaskSet {
    pub face: Mask,
    pub eyes: Mask,
    pub teeth: Mask,
    pub contour: Mask,
}

impl RegionMaskSet {
    pub fn new(face: Mask, eyes: Mask, teeth: Mask, contour: Mask) -> Result<Self> {
        let dims = face.dims();
        for m in [&eyes, &teeth, &contour] {
            m.check_dims(dims)?;
        }
        Ok(Self {
            face,
            eyes,
            teeth,
            contour,
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        self.face.dims()
    }

    pub fn region(&self, region: Region) -> &Mask {
        match region {
            Region::Face => &self.face,
            Region::Eyes => &self.eyes,
            Region::Teeth => &self.teeth,
            Region::Contour => &self.contour,
        }
    }

    pub fn region_mut(&mut self, region: Region) -> &mut Mask {
        match region {
            Region::Face => &mut self.face,
            Region::Eyes => &mut self.eyes,
            Region::Teeth => &mut self.teeth,
            Region::Contour => &mut self.contour,
        }
    }
}

/// Loads an 8-bit single-channel mask, binarizing at [`MASK_BINARIZE_LEVEL`].
pub fn load_mask(path: impl AsRef<Path>, expected_dims: (u32, u32)) -> Result<Mask> {
    let path = path.as_ref();
    let decoded = decode(path)?;
    let dims = (decoded.width(), decoded.height());
    let bytes = match decoded.color() {
        ColorType::L8 => decoded.into_bytes(),
        ColorType::L16 | ColorType::La16 => {
            return Err(ForgeError::UnsupportedBitDepth {
                path: path.to_owned(),
                color: format!("{:?}", decoded.color()),
            })
        }
        other => {
            return Err(ForgeError::NotSingleChannel {
                path: path.to_owned(),
                channels: other.channel_count(),
            })
        }
    };
    if dims != expected_dims {
        return Err(ForgeError::dims(dims, expected_dims));
    }
    let data = bytes
        .into_iter()
        .map(|v| (v > MASK_BINARIZE_LEVEL) as u8)
        .collect();
    Ok(Mask {
        width: dims.0,
        height: dims.1,
        data,
    })
}

/// Writes the mask as a single-channel PNG with 0/255 encoding.
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = mask.data.iter().map(|&b| b * 255).collect();
    image::save_buffer(path, &bytes, mask.width, mask.height, ExtendedColorType::L8).map_err(|e| {
        ForgeError::Encode {
            path: path.to_owned(),
            message: e.to_string(),
        }
    })
}
