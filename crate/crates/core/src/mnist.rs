//! MNIST IDX parsing and dataset assembly.
//!
//! IDX files start with a big-endian magic number (`0x00000803` for
//! images, `0x00000801` for labels), then one big-endian `u32` per
//! dimension, then the unsigned-byte payload in row-major order. Files
//! ending in `.gz` are decompressed on load.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const N_CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Raw image tensor as stored in the file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, index: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[index * n..(index + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let chunk = bytes.get(at..at + 4).ok_or(Error::Length { expected: at + 4, actual: bytes.len() })?;
    Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(format!("image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::format("image dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::Length { expected, actual: bytes.len() });
    }
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..].to_vec() })
}

/// Labels, each checked to be a valid MNIST class.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(format!("label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let expected = count + 8;
    if bytes.len() != expected {
        return Err(Error::Length { expected, actual: bytes.len() });
    }
    let labels = bytes[8..].to_vec();
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= N_CLASSES) {
        return Err(Error::format(format!("label {l} at index {i} is not a digit")));
    }
    Ok(labels)
}

pub fn serialize_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn serialize_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Read a file, gunzipping it when the name ends in `.gz`.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        file.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

/// Locate `name` or `name.gz` inside `dir`.
pub fn find_idx(dir: &Path, name: &str) -> Result<PathBuf> {
    let raw = dir.join(name);
    if raw.is_file() {
        return Ok(raw);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("neither {} nor {} exists", raw.display(), gz.display()),
    )
    .into())
}

/// A normalized image with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Intensities `byte / 255`, row-major.
    pub pixels: Vec<f64>,
    pub label: u8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub class_filter: Option<Vec<u8>>,
    pub cap: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Normalize, filter by class, and optionally subsample to `cap` entries.
///
/// The subsample is drawn uniformly with a seeded generator and kept in
/// file order.
pub fn build_dataset(
    images: &IdxImages,
    labels: &[u8],
    class_filter: Option<&[u8]>,
    cap: Option<usize>,
    seed: u64,
) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::format(format!("{} images but {} labels", images.count, labels.len())));
    }
    let filter: Option<BTreeSet<u8>> = class_filter.map(|f| f.iter().copied().collect());
    let mut keep: Vec<usize> =
        (0..images.count).filter(|&i| filter.as_ref().is_none_or(|f| f.contains(&labels[i]))).collect();
    if let Some(cap) = cap {
        if cap < keep.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen = rand::seq::index::sample(&mut rng, keep.len(), cap).into_vec();
            chosen.sort_unstable();
            keep = chosen.into_iter().map(|k| keep[k]).collect();
        }
    }
    let samples = keep
        .into_iter()
        .map(|i| Sample { pixels: images.image(i).iter().map(|&b| f64::from(b) / 255.0).collect(), label: labels[i] })
        .collect();
    Ok(Dataset {
        samples,
        provenance: Provenance {
            images: None,
            labels: None,
            class_filter: filter.map(|f| f.into_iter().collect()),
            cap,
            seed,
        },
    })
}

/// Which half of the MNIST distribution to load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn files(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => (TRAIN_IMAGES, TRAIN_LABELS),
            Split::Test => (TEST_IMAGES, TEST_LABELS),
        }
    }
}

/// Load one split from a directory holding the standard file names.
pub fn load_split(
    dir: &Path,
    split: Split,
    class_filter: Option<&[u8]>,
    cap: Option<usize>,
    seed: u64,
) -> Result<Dataset> {
    let (img_name, lbl_name) = split.files();
    let img_path = find_idx(dir, img_name)?;
    let lbl_path = find_idx(dir, lbl_name)?;
    let images = parse_idx_images(&read_maybe_gz(&img_path)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(&lbl_path)?)?;
    let mut ds = build_dataset(&images, &labels, class_filter, cap, seed)?;
    if ds.is_empty() {
        return Err(Error::format(format!("no samples left in {}", img_path.display())));
    }
    ds.provenance.images = Some(img_path);
    ds.provenance.labels = Some(lbl_path);
    Ok(ds)
}
