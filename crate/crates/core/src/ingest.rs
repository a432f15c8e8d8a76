//! Image loading, grayscale conversion and dataset enumeration.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageError, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// File extensions accepted when scanning a dataset directory.
pub const SUPPORTED_EXTENSIONS: &[&str] = &[
    "png", "pgm", "pnm", "ppm", "pbm", "bmp", "tif", "tiff", "jpg", "jpeg",
];

/// Row-major grid of integer intensities in `[0, max_level]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    max_level: u16,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, max_level: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if max_level == 0 {
            return Err(Error::Parameter("max intensity level must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Parameter(format!(
                "expected {} intensities for a {width}x{height} image, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(&v) = pixels.iter().find(|&&v| v > max_level) {
            return Err(Error::Parameter(format!(
                "intensity {v} exceeds max level {max_level}"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            max_level,
            pixels,
        })
    }

    /// 8-bit image (`L = 255`) built from a closure over `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(u16::from(f(x, y)));
            }
        }
        GrayImage::new(width, height, 255, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_level(&self) -> u16 {
        self.max_level
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    /// Intensity inversion `I -> L - I`.
    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            pixels: self.pixels.iter().map(|&v| self.max_level - v).collect(),
            ..self.clone()
        }
    }

    /// Writes the image as 8-bit grayscale; the format follows the file extension.
    /// Images with `L != 255` are rescaled to `[0, 255]`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = if self.max_level == 255 {
            self.pixels.iter().map(|&v| v as u8).collect()
        } else {
            let scale = 255.0 / f64::from(self.max_level);
            self.pixels
                .iter()
                .map(|&v| (f64::from(v) * scale).round() as u8)
                .collect()
        };
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions");
        buf.save(path).map_err(|e| map_image_error(path, e))
    }
}

/// BT.601 luma, rounded half away from zero.
#[inline]
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Loads a raster image as 8-bit grayscale.
///
/// Color images are converted with [`luminance`]; images that are already
/// gray keep their intensities (16-bit gray is scaled down to 8 bits).
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "unrecognized image format".into(),
        });
    }
    let decoded = reader.decode().map_err(|e| map_image_error(path, e))?;
    Ok(to_gray(&decoded))
}

fn to_gray(img: &DynamicImage) -> GrayImage {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<u16> = if img.color().has_color() {
        img.to_rgb8()
            .pixels()
            .map(|p| u16::from(luminance(p[0], p[1], p[2])))
            .collect()
    } else {
        img.to_luma8().into_raw().into_iter().map(u16::from).collect()
    };
    GrayImage {
        width,
        height,
        max_level: 255,
        pixels,
    }
}

fn map_image_error(path: &Path, err: ImageError) -> Error {
    match err {
        ImageError::IoError(e) => Error::io(path, e),
        other => Error::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// One image of a dataset together with its class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub path: PathBuf,
    pub class_id: usize,
}

/// Images grouped by class, enumerated from `<root>/<class_name>/<image>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub root: PathBuf,
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class_id).collect()
    }

    /// Sample path relative to the dataset root, with `/` separators.
    pub fn relative_path(&self, sample: &Sample) -> String {
        let rel = sample.path.strip_prefix(&self.root).unwrap_or(&sample.path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}

fn is_supported_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let e = e.to_ascii_lowercase();
            SUPPORTED_EXTENSIONS.contains(&e.as_str())
        })
        .unwrap_or(false)
}

fn is_hidden(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !is_hidden(&path) {
            entries.push(path);
        }
    }
    entries.sort();
    Ok(entries)
}

/// Enumerates a dataset laid out as one subdirectory per class.
///
/// Class ids follow the lexicographic order of the subdirectory names and
/// samples are ordered by path.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<LabeledDataset> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", root.display())));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "{} has no class subdirectories",
            root.display()
        )));
    }

    let mut samples = Vec::new();
    let mut class_names = Vec::with_capacity(class_dirs.len());
    for (class_id, dir) in class_dirs.iter().enumerate() {
        let images: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file() && is_supported_image(p))
            .collect();
        if images.is_empty() {
            return Err(Error::Dataset(format!(
                "class directory {} contains no images",
                dir.display()
            )));
        }
        class_names.push(dir.file_name().unwrap().to_string_lossy().into_owned());
        samples.extend(images.into_iter().map(|path| Sample { path, class_id }));
    }

    Ok(LabeledDataset {
        root: root.to_path_buf(),
        samples,
        class_names,
    })
}
