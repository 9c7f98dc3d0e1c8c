//! Content-addressed photo files: immutable originals plus JPEG previews.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{DynamicImage, GenericImageView, ImageFormat};
use sha2::{Digest, Sha256};

use crate::model::{NewPhoto, PreviewInfo};

/// Long edge of generated previews, in pixels.
pub const PREVIEW_LONG_EDGE: u32 = 1280;

#[derive(Debug, thiserror::Error)]
pub enum PhotoError {
    #[error("not a supported image: {0}")]
    Decode(String),
    #[error("photo storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("no stored photo with hash {0}")]
    Missing(String),
}

#[derive(Debug, Clone)]
pub struct PhotoStore {
    root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPhoto {
    pub content_hash: String,
    pub width: u32,
    pub height: u32,
    pub preview: PreviewInfo,
}

impl StoredPhoto {
    pub fn into_new_photo(self, file_name: impl Into<String>) -> NewPhoto {
        NewPhoto {
            content_hash: self.content_hash,
            file_name: file_name.into(),
            width: self.width,
            height: self.height,
            preview: Some(self.preview),
        }
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl PhotoStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<PhotoStore, PhotoError> {
        let root = root.into();
        fs::create_dir_all(root.join("originals"))?;
        fs::create_dir_all(root.join("previews"))?;
        Ok(PhotoStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn original_path(&self, hash: &str) -> PathBuf {
        self.root.join("originals").join(hash)
    }

    pub fn preview_path(&self, hash: &str) -> PathBuf {
        self.root.join("previews").join(format!("{hash}.jpg"))
    }

    /// Decodes, stores the original bytes untouched and writes a preview.
    /// Storing the same bytes twice is harmless.
    pub fn store(&self, bytes: &[u8]) -> Result<StoredPhoto, PhotoError> {
        let img = image::load_from_memory(bytes).map_err(|e| PhotoError::Decode(e.to_string()))?;
        let (width, height) = img.dimensions();
        let hash = content_hash(bytes);

        let original = self.original_path(&hash);
        if !original.exists() {
            write_atomic(&original, bytes)?;
        }
        let preview_img = preview_of(&img);
        let preview = PreviewInfo {
            width: preview_img.width(),
            height: preview_img.height(),
        };
        let path = self.preview_path(&hash);
        if !path.exists() {
            let mut buf = Cursor::new(Vec::new());
            DynamicImage::ImageRgb8(preview_img.to_rgb8())
                .write_to(&mut buf, ImageFormat::Jpeg)
                .map_err(|e| PhotoError::Decode(e.to_string()))?;
            write_atomic(&path, buf.get_ref())?;
        }
        Ok(StoredPhoto {
            content_hash: hash,
            width,
            height,
            preview,
        })
    }

    pub fn read_original(&self, hash: &str) -> Result<Vec<u8>, PhotoError> {
        read_existing(&self.original_path(hash), hash)
    }

    pub fn read_preview(&self, hash: &str) -> Result<Vec<u8>, PhotoError> {
        read_existing(&self.preview_path(hash), hash)
    }
}

fn preview_of(img: &DynamicImage) -> DynamicImage {
    let (w, h) = img.dimensions();
    if w.max(h) <= PREVIEW_LONG_EDGE {
        return img.clone();
    }
    let scale = PREVIEW_LONG_EDGE as f64 / w.max(h) as f64;
    let nw = ((w as f64 * scale).round() as u32).max(1);
    let nh = ((h as f64 * scale).round() as u32).max(1);
    img.resize_exact(nw, nh, FilterType::Triangle)
}

fn read_existing(path: &Path, hash: &str) -> Result<Vec<u8>, PhotoError> {
    if !is_hash(hash) {
        return Err(PhotoError::Missing(hash.to_string()));
    }
    match fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(PhotoError::Missing(hash.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn is_hash(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    let tmp = path.with_extension("part");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Rgb};

    fn png(w: u32, h: u32) -> Vec<u8> {
        let img = ImageBuffer::from_fn(w, h, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 7]));
        let mut buf = Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(img).write_to(&mut buf, ImageFormat::Png).unwrap();
        buf.into_inner()
    }

    #[test]
    fn large_photo_gets_bounded_preview() {
        let dir = tempfile::tempdir().unwrap();
        let store = PhotoStore::open(dir.path()).unwrap();
        let bytes = png(2000, 1000);
        let stored = store.store(&bytes).unwrap();
        assert_eq!((stored.width, stored.height), (2000, 1000));
        assert_eq!(stored.preview, PreviewInfo { width: 1280, height: 640 });
        assert_eq!(store.read_original(&stored.content_hash).unwrap(), bytes);
        let preview = image::load_from_memory(&store.read_preview(&stored.content_hash).unwrap()).unwrap();
        assert_eq!(preview.dimensions(), (1280, 640));
    }

    #[test]
    fn small_photo_keeps_size_and_hash_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let store = PhotoStore::open(dir.path()).unwrap();
        let bytes = png(40, 30);
        let a = store.store(&bytes).unwrap();
        let b = store.store(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.preview, PreviewInfo { width: 40, height: 30 });
        assert_eq!(a.content_hash, content_hash(&bytes));
    }

    #[test]
    fn rejects_garbage_and_bad_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let store = PhotoStore::open(dir.path()).unwrap();
        assert!(matches!(store.store(b"not an image"), Err(PhotoError::Decode(_))));
        assert!(matches!(store.read_original("../etc"), Err(PhotoError::Missing(_))));
    }
}
