//! MNIST-style IDX ingestion, pixel normalization, and seeded
//! stratified sequence construction for the incremental task.

use crate::image::{Digit, LabeledImage};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Read;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("wrong magic 0x{found:08x} at offset 0, expected 0x{expected:08x}")]
    WrongMagic { expected: u32, found: u32 },
    #[error("truncated payload at offset {offset}: need {need} bytes, have {have}")]
    Truncated {
        offset: usize,
        need: usize,
        have: usize,
    },
    #[error("{extra} trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("label byte 0x{value:02x} out of range at index {index}")]
    LabelOutOfRange { index: usize, value: u8 },
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Idx { path: String, source: IdxError },
    #[error("dataset has {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("empty dataset")]
    Empty,
    #[error("cannot normalize a constant dataset (zero pixel variance)")]
    ZeroVariance,
    #[error("class {class} has only {have} images, {need} needed per run")]
    InsufficientClass { class: u8, have: usize, need: usize },
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    let Some(slice) = bytes.get(offset..offset + 4) else {
        return Err(IdxError::Truncated {
            offset,
            need: 4,
            have: bytes.len().saturating_sub(offset),
        });
    };
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

/// Parsed image container: `count` grids of `rows`×`cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
}

/// Parse an IDX image file: big-endian magic 0x00000803, image count,
/// rows, cols, then row-major unsigned bytes. The byte length must
/// match exactly.
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::WrongMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let need = count * rows * cols;
    let have = bytes.len() - 16;
    if have < need {
        return Err(IdxError::Truncated {
            offset: 16,
            need,
            have,
        });
    }
    if have > need {
        return Err(IdxError::TrailingBytes {
            offset: 16 + need,
            extra: have - need,
        });
    }
    let images = bytes[16..]
        .chunks_exact(rows * cols)
        .map(|chunk| chunk.to_vec())
        .collect();
    Ok(IdxImages { rows, cols, images })
}

/// Parse an IDX label file: big-endian magic 0x00000801, count, then
/// one byte per label, each validated to be a digit 0–9.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<Digit>, IdxError> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::WrongMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let have = bytes.len() - 8;
    if have < count {
        return Err(IdxError::Truncated {
            offset: 8,
            need: count,
            have,
        });
    }
    if have > count {
        return Err(IdxError::TrailingBytes {
            offset: 8 + count,
            extra: have - count,
        });
    }
    bytes[8..]
        .iter()
        .enumerate()
        .map(|(index, &value)| Digit::new(value).ok_or(IdxError::LabelOutOfRange { index, value }))
        .collect()
}

/// Serialize grids back to IDX image bytes (inverse of
/// [`parse_idx_images`]).
pub fn write_idx_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        debug_assert_eq!(img.len(), rows * cols);
        out.extend_from_slice(img);
    }
    out
}

/// Serialize labels back to IDX label bytes (inverse of
/// [`parse_idx_labels`]).
pub fn write_idx_labels(labels: &[Digit]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(labels.iter().map(|d| d.value()));
    out
}

/// Raw images plus labels, as parsed from disk.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<Digit>,
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, DataError> {
    let wrap = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = std::fs::read(path).map_err(wrap)?;
    // Gzip-compressed variants are detected by their magic bytes.
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(wrap)?;
        return Ok(out);
    }
    Ok(bytes)
}

impl RawDataset {
    /// Load an image/label IDX pair; either file may be gzipped.
    pub fn load(images_path: &Path, labels_path: &Path) -> Result<RawDataset, DataError> {
        let image_bytes = read_maybe_gz(images_path)?;
        let parsed = parse_idx_images(&image_bytes).map_err(|source| DataError::Idx {
            path: images_path.display().to_string(),
            source,
        })?;
        let label_bytes = read_maybe_gz(labels_path)?;
        let labels = parse_idx_labels(&label_bytes).map_err(|source| DataError::Idx {
            path: labels_path.display().to_string(),
            source,
        })?;
        if parsed.images.len() != labels.len() {
            return Err(DataError::CountMismatch {
                images: parsed.images.len(),
                labels: labels.len(),
            });
        }
        Ok(RawDataset {
            rows: parsed.rows,
            cols: parsed.cols,
            images: parsed.images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Images mapped to z-scored real pixels, with the normalization
/// constants recorded for provenance.
#[derive(Debug, Clone)]
pub struct NormalizedDataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<LabeledImage>,
    pub norm_mean: f64,
    pub norm_std: f64,
}

/// Global dataset-level z-score: pixels are scaled to [0,1], the mean μ
/// and population standard deviation σ are computed over every pixel of
/// the full dataset, and each pixel maps to (p/255 − μ)/σ.
pub fn normalize(raw: &RawDataset) -> Result<NormalizedDataset, DataError> {
    if raw.is_empty() {
        return Err(DataError::Empty);
    }
    let total_pixels = (raw.len() * raw.rows * raw.cols) as f64;
    let mut sum = 0.0f64;
    for img in &raw.images {
        for &p in img {
            sum += p as f64 / 255.0;
        }
    }
    let mean = sum / total_pixels;
    let mut sq = 0.0f64;
    for img in &raw.images {
        for &p in img {
            let d = p as f64 / 255.0 - mean;
            sq += d * d;
        }
    }
    let std = (sq / total_pixels).sqrt();
    if std == 0.0 {
        return Err(DataError::ZeroVariance);
    }
    let images = raw
        .images
        .iter()
        .zip(raw.labels.iter())
        .map(|(img, &label)| {
            let pixels = img
                .iter()
                .map(|&p| (p as f64 / 255.0 - mean) / std)
                .collect();
            LabeledImage::new(raw.rows, raw.cols, pixels, Some(label))
        })
        .collect();
    Ok(NormalizedDataset {
        rows: raw.rows,
        cols: raw.cols,
        images,
        norm_mean: mean,
        norm_std: std,
    })
}

/// Parameters of the stratified sequence construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSpec {
    pub seed: u64,
    pub per_class: usize,
    pub num_runs: usize,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec {
            seed: 0,
            per_class: 30,
            num_runs: 50,
        }
    }
}

/// ChaCha8 stream for one run, keyed by (seed, run index). ChaCha8 is
/// platform-independent, so runs reproduce bit-exactly everywhere.
fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(run as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Partial Fisher–Yates: the first `k` entries of a shuffled copy.
fn sample_without_replacement(pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool = pool.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn shuffle(values: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..values.len()).rev() {
        let j = rng.random_range(0..=i);
        values.swap(i, j);
    }
}

/// Build `num_runs` index sequences: per run, `per_class` indices of
/// each digit sampled without replacement, concatenated and shuffled.
/// Fully reproducible from the seed and shared verbatim across every
/// model under comparison.
pub fn build_runs(
    data: &NormalizedDataset,
    spec: &SequenceSpec,
) -> Result<Vec<Vec<usize>>, DataError> {
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for (i, img) in data.images.iter().enumerate() {
        let label = img.label().expect("normalized images carry labels");
        pools[label.value() as usize].push(i);
    }
    for (class, pool) in pools.iter().enumerate() {
        if pool.len() < spec.per_class {
            return Err(DataError::InsufficientClass {
                class: class as u8,
                have: pool.len(),
                need: spec.per_class,
            });
        }
    }
    let mut runs = Vec::with_capacity(spec.num_runs);
    for run in 0..spec.num_runs {
        let mut rng = run_rng(spec.seed, run);
        let mut indices = Vec::with_capacity(spec.per_class * 10);
        for pool in &pools {
            indices.extend(sample_without_replacement(pool, spec.per_class, &mut rng));
        }
        shuffle(&mut indices, &mut rng);
        runs.push(indices);
    }
    Ok(runs)
}
