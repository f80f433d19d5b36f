//! `EMB1` embedding files: 4-byte magic, little-endian `u32` dimension, then
//! `dim` little-endian `f32` values. Nothing else.

use std::path::{Path, PathBuf};

use crate::error::{ForgeError, Result};
use crate::scalar::Scalar;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";
pub const EMBEDDING_SUFFIX: &str = "emb";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(ForgeError::Embedding("dimension must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ForgeError::NonFinite("embedding"));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector {
            values: self
                .values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
}

pub fn encode_embedding(embedding: &EmbeddingVector<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * embedding.dim());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(embedding.dim() as u32).to_le_bytes());
    for v in embedding.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embedding(bytes: &[u8]) -> Result<EmbeddingVector<f32>> {
    if bytes.len() < 8 {
        return Err(ForgeError::Embedding(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != EMBEDDING_MAGIC {
        return Err(ForgeError::Embedding("bad magic (expected EMB1)".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let payload = &bytes[8..];
    if payload.len() != dim * 4 {
        return Err(ForgeError::Embedding(format!(
            "header says {dim} values but payload holds {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    EmbeddingVector::new(values)
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<EmbeddingVector<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ForgeError::io(path, e))?;
    decode_embedding(&bytes).map_err(|e| ForgeError::Embedding(format!("{}: {e}", path.display())))
}

pub fn write_embedding(path: impl AsRef<Path>, embedding: &EmbeddingVector<f32>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_embedding(embedding)).map_err(|e| ForgeError::io(path, e))
}

/// `img/a.png` -> `img/a.png.emb`.
pub fn embedding_path_for(image_path: &Path) -> PathBuf {
    let mut s = image_path.as_os_str().to_owned();
    s.push(".");
    s.push(EMBEDDING_SUFFIX);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let e = EmbeddingVector::new(vec![1.0f32, -2.5]).unwrap();
        let bytes = encode_embedding(&e);
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(&bytes[4..8], &[2, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_embedding(&bytes).unwrap(), e);
    }

    #[test]
    fn malformed_files() {
        assert!(decode_embedding(b"EMB1").is_err());
        assert!(decode_embedding(b"EMB2\x01\0\0\0\0\0\x80\x3f").is_err());
        assert!(decode_embedding(b"EMB1\x02\0\0\0\0\0\x80\x3f").is_err());
        assert!(decode_embedding(b"EMB1\0\0\0\0").is_err());
    }

    #[test]
    fn suffix_is_appended() {
        assert_eq!(
            embedding_path_for(Path::new("x/a.png")),
            PathBuf::from("x/a.png.emb")
        );
    }

    proptest::proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
            let e = EmbeddingVector::new(values).unwrap();
            proptest::prop_assert_eq!(decode_embedding(&encode_embedding(&e)).unwrap(), e);
        }
    }
}
