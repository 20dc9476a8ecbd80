//! IDX image/label loading and per-round data sampling.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A labeled image set: one flattened image per matrix row, pixels scaled to
/// `[0, 1]`, with `labels[i]` the class of row `i`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Matrix,
    pub labels: Vec<u8>,
    pub image_rows: usize,
    pub image_cols: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of classes, taken as `max(label) + 1`.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// Copies the selected samples into a dense batch.
    pub fn gather(&self, indices: &[u32]) -> Result<(Matrix, Vec<u8>)> {
        let images = self.images.gather_rows(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i as usize]).collect();
        Ok((images, labels))
    }

    /// A dataset holding only the selected samples.
    pub fn subset(&self, indices: &[u32]) -> Result<Dataset> {
        let (images, labels) = self.gather(indices)?;
        Ok(Dataset {
            images,
            labels,
            image_rows: self.image_rows,
            image_cols: self.image_cols,
        })
    }
}

/// Loads an IDX image file and its companion IDX label file.
///
/// Image files carry magic `0x00000803` and dimensions `(count, rows, cols)`;
/// label files carry magic `0x00000801` and `(count,)`. All integers are
/// big-endian. Pixels are bytes and are scaled by `1/255`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (images, image_rows, image_cols) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.rows() != labels.len() {
        return Err(Error::parse(
            labels_path,
            format!(
                "{} labels for {} images in {}",
                labels.len(),
                images.rows(),
                images_path.display()
            ),
        ));
    }
    Ok(Dataset {
        images,
        labels,
        image_rows,
        image_cols,
    })
}

fn open_buffered(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        Error::MissingInput(format!("{}: {}", path.display(), e))
    })?))
}

fn read_idx_images(path: &Path) -> Result<(Matrix, usize, usize)> {
    let mut r = open_buffered(path)?;
    let magic = r
        .read_u32::<BigEndian>()
        .map_err(|_| Error::parse(path, "file too short for magic"))?;
    if magic != IMAGE_MAGIC {
        return Err(Error::parse(
            path,
            format!("magic {:#010x}, expected {:#010x} for images", magic, IMAGE_MAGIC),
        ));
    }
    let count = r
        .read_u32::<BigEndian>()
        .map_err(|_| Error::parse(path, "missing image count"))? as usize;
    let rows = r
        .read_u32::<BigEndian>()
        .map_err(|_| Error::parse(path, "missing row count"))? as usize;
    let cols = r
        .read_u32::<BigEndian>()
        .map_err(|_| Error::parse(path, "missing column count"))? as usize;
    if rows == 0 || cols == 0 || rows * cols > 1 << 20 {
        return Err(Error::parse(path, format!("implausible image shape {}x{}", rows, cols)));
    }
    let pixel_count = count * rows * cols;
    let mut bytes = vec![0u8; pixel_count];
    r.read_exact(&mut bytes).map_err(|_| {
        Error::parse(path, format!("truncated: expected {} pixel bytes", pixel_count))
    })?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::parse(path, "trailing bytes after pixel data"));
    }
    let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
    Ok((Matrix::from_vec(count, rows * cols, data)?, rows, cols))
}

fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = open_buffered(path)?;
    let magic = r
        .read_u32::<BigEndian>()
        .map_err(|_| Error::parse(path, "file too short for magic"))?;
    if magic != LABEL_MAGIC {
        return Err(Error::parse(
            path,
            format!("magic {:#010x}, expected {:#010x} for labels", magic, LABEL_MAGIC),
        ));
    }
    let count = r
        .read_u32::<BigEndian>()
        .map_err(|_| Error::parse(path, "missing label count"))? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)
        .map_err(|_| Error::parse(path, format!("truncated: expected {} labels", count)))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::parse(path, "trailing bytes after label data"));
    }
    Ok(labels)
}

/// How each training round obtains its data slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundScheme {
    /// The sample pool is shuffled once and split into `rounds` disjoint
    /// slices; round `r` owns slice `r`.
    Disjoint,
    /// Each round draws `pool / rounds` samples with replacement.
    Resample,
}

/// Deterministic per-round train/validation index sets.
///
/// Every round's slice is split into a training part and a held-out
/// validation part (`val_fraction` of the slice). Under
/// [`RoundScheme::Disjoint`] the union of all slices is exactly the pool and
/// slices never overlap, so later rounds always see fresh data.
#[derive(Debug, Clone)]
pub struct RoundSampler {
    seed: u64,
    train: Vec<Vec<u32>>,
    val: Vec<Vec<u32>>,
}

impl RoundSampler {
    pub fn new(
        pool: usize,
        rounds: usize,
        scheme: RoundScheme,
        val_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if pool < rounds {
            return Err(Error::Config(format!(
                "pool of {} samples cannot feed {} rounds",
                pool, rounds
            )));
        }
        if !(0.0..1.0).contains(&val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction {} outside [0, 1)",
                val_fraction
            )));
        }
        let slices: Vec<Vec<u32>> = match scheme {
            RoundScheme::Disjoint => {
                let mut order: Vec<u32> = (0..pool as u32).collect();
                order.shuffle(&mut rng::stream(seed, "round-partition", 0, 0));
                // First `pool % rounds` slices take one extra sample.
                let base = pool / rounds;
                let extra = pool % rounds;
                let mut slices = Vec::with_capacity(rounds);
                let mut start = 0;
                for r in 0..rounds {
                    let size = base + usize::from(r < extra);
                    slices.push(order[start..start + size].to_vec());
                    start += size;
                }
                slices
            }
            RoundScheme::Resample => {
                let size = pool / rounds;
                (0..rounds)
                    .map(|r| {
                        let mut stream = rng::stream(seed, "round-resample", r as u64, 0);
                        (0..size)
                            .map(|_| rand::Rng::random_range(&mut stream, 0..pool as u32))
                            .collect()
                    })
                    .collect()
            }
        };
        let mut train = Vec::with_capacity(rounds);
        let mut val = Vec::with_capacity(rounds);
        for slice in slices {
            let n_val = ((slice.len() as f64) * val_fraction).round() as usize;
            let n_val = n_val.min(slice.len().saturating_sub(1));
            let split = slice.len() - n_val;
            train.push(slice[..split].to_vec());
            val.push(slice[split..].to_vec());
        }
        Ok(RoundSampler { seed, train, val })
    }

    pub fn rounds(&self) -> usize {
        self.train.len()
    }

    pub fn train_indices(&self, round: usize) -> Result<&[u32]> {
        self.train
            .get(round)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("round {} out of {}", round, self.rounds())))
    }

    pub fn val_indices(&self, round: usize) -> Result<&[u32]> {
        self.val
            .get(round)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("round {} out of {}", round, self.rounds())))
    }

    /// Deterministic mini-batches for one epoch of one round: the round's
    /// training indices, reshuffled per `(round, epoch)`, cut into batches of
    /// `batch_size` (final short batch kept).
    pub fn batches(&self, round: usize, epoch: usize, batch_size: usize) -> Result<Vec<Vec<u32>>> {
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let mut order = self.train_indices(round)?.to_vec();
        order.shuffle(&mut rng::stream(
            self.seed,
            "round-batches",
            round as u64,
            epoch as u64,
        ));
        Ok(order.chunks(batch_size).map(<[u32]>::to_vec).collect())
    }
}
