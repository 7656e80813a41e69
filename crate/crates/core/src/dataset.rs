//! IDX (MNIST-format) files and small synthetic tasks.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nn::Tensor2D;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Environment variable consulted when no data directory is given.
pub const DATA_DIR_ENV: &str = "SAU_DATA_DIR";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: bad magic at offset {offset}: expected {expected:#010x}, found {found:#010x}", path.display())]
    BadMagic {
        path: PathBuf,
        offset: usize,
        expected: u32,
        found: u32,
    },
    #[error("{}: dimension mismatch at offset {offset}: {detail}", path.display())]
    DimMismatch { path: PathBuf, offset: usize, detail: String },
    #[error("{}: truncated at offset {offset}, {needed} more bytes expected", path.display())]
    TruncatedFile { path: PathBuf, offset: usize, needed: usize },
    #[error("missing data files, expected: {}", .expected.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles { expected: Vec<PathBuf> },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes {
        labels: Vec<usize>,
        class_count: usize,
    },
    /// Row-major, one or more outputs per sample.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    /// Samples by features.
    pub inputs: Tensor2D,
    pub targets: Targets,
}

impl DatasetSplit {
    pub fn new(name: impl Into<String>, inputs: Tensor2D, targets: Targets) -> Result<Self, DatasetError> {
        let name = name.into();
        let rows = inputs.rows();
        match &targets {
            Targets::Classes { labels, class_count } => {
                if labels.len() != rows {
                    return Err(DatasetError::Invalid(format!(
                        "{name}: {rows} samples but {} labels",
                        labels.len()
                    )));
                }
                if let Some(l) = labels.iter().find(|&&l| l >= *class_count) {
                    return Err(DatasetError::Invalid(format!("{name}: label {l} outside 0..{class_count}")));
                }
            }
            Targets::Values(v) => {
                if rows == 0 || v.len() % rows != 0 || v.is_empty() {
                    return Err(DatasetError::Invalid(format!(
                        "{name}: {} targets for {rows} samples",
                        v.len()
                    )));
                }
            }
        }
        Ok(DatasetSplit { name, inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_count(&self) -> Option<usize> {
        match self.targets {
            Targets::Classes { class_count, .. } => Some(class_count),
            Targets::Values(_) => None,
        }
    }

    /// Width of each target row: the class count or the regression output size.
    pub fn output_size(&self) -> usize {
        match &self.targets {
            Targets::Classes { class_count, .. } => *class_count,
            Targets::Values(v) => v.len() / self.len().max(1),
        }
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> DatasetSplit {
        let targets = match &self.targets {
            Targets::Classes { labels, class_count } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                class_count: *class_count,
            },
            Targets::Values(v) => {
                let per = v.len() / self.len().max(1);
                let mut out = Vec::with_capacity(indices.len() * per);
                for &i in indices {
                    out.extend_from_slice(&v[i * per..(i + 1) * per]);
                }
                Targets::Values(out)
            }
        };
        DatasetSplit {
            name: self.name.clone(),
            inputs: self.inputs.select_rows(indices),
            targets,
        }
    }

    /// The first `count` samples (or all of them).
    pub fn take(&self, count: usize) -> DatasetSplit {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Override the class count, e.g. when a subset does not contain every class.
    pub fn with_class_count(mut self, count: usize) -> Result<Self, DatasetError> {
        match &mut self.targets {
            Targets::Classes { labels, class_count } => {
                if let Some(l) = labels.iter().find(|&&l| l >= count) {
                    return Err(DatasetError::Invalid(format!("label {l} outside 0..{count}")));
                }
                *class_count = count;
                Ok(self)
            }
            Targets::Values(_) => Err(DatasetError::Invalid("regression data has no classes".into())),
        }
    }
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut raw = vec![];
    File::open(path).and_then(|mut f| f.read_to_end(&mut raw)).map_err(io_err)?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = vec![];
        MultiGzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32, DatasetError> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes(b.try_into().unwrap())),
        None => Err(DatasetError::TruncatedFile {
            path: path.to_path_buf(),
            offset: bytes.len(),
            needed: offset + 4 - bytes.len(),
        }),
    }
}

fn payload<'a>(path: &Path, bytes: &'a [u8], start: usize, len: usize) -> Result<&'a [u8], DatasetError> {
    let end = start + len;
    if bytes.len() < end {
        return Err(DatasetError::TruncatedFile {
            path: path.to_path_buf(),
            offset: bytes.len(),
            needed: end - bytes.len(),
        });
    }
    if bytes.len() > end {
        return Err(DatasetError::DimMismatch {
            path: path.to_path_buf(),
            offset: end,
            detail: format!("{} trailing bytes after the declared payload", bytes.len() - end),
        });
    }
    Ok(&bytes[start..end])
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<(), DatasetError> {
    let found = be_u32(path, bytes, 0)?;
    if found != expected {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            offset: 0,
            expected,
            found,
        });
    }
    Ok(())
}

/// Reads an IDX image file and its label file. Either may be gzip-compressed.
/// Pixels are divided by 255; labels give the class count as `max + 1`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DatasetSplit, DatasetError> {
    let img = read_maybe_gzip(images_path)?;
    check_magic(images_path, &img, IMAGE_MAGIC)?;
    let count = be_u32(images_path, &img, 4)? as usize;
    let rows = be_u32(images_path, &img, 8)? as usize;
    let cols = be_u32(images_path, &img, 12)? as usize;
    let features = rows * cols;
    let pixels = payload(images_path, &img, 16, count * features)?;

    let lab = read_maybe_gzip(labels_path)?;
    check_magic(labels_path, &lab, LABEL_MAGIC)?;
    let label_count = be_u32(labels_path, &lab, 4)? as usize;
    if label_count != count {
        return Err(DatasetError::DimMismatch {
            path: labels_path.to_path_buf(),
            offset: 4,
            detail: format!("{label_count} labels for {count} images in {}", images_path.display()),
        });
    }
    let labels: Vec<usize> = payload(labels_path, &lab, 8, count)?.iter().map(|&b| b as usize).collect();

    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let inputs = Tensor2D::new(count, features, data).expect("payload length checked");
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    DatasetSplit::new(name, inputs, Targets::Classes { labels, class_count })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes).map_err(io_err)?;
        enc.finish().map_err(io_err)?;
    } else {
        let mut file = file;
        file.write_all(bytes).map_err(io_err)?;
    }
    Ok(())
}

/// Writes a classification split as IDX image/label files of `rows x cols`
/// images. Pixels are rounded back to bytes; paths ending in `.gz` are compressed.
pub fn write_idx(
    split: &DatasetSplit,
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
) -> Result<(), DatasetError> {
    let Targets::Classes { labels, .. } = &split.targets else {
        return Err(DatasetError::Invalid("only class labels can be written as IDX".into()));
    };
    if rows * cols != split.inputs.cols() {
        return Err(DatasetError::Invalid(format!(
            "{rows}x{cols} images do not match {} features",
            split.inputs.cols()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 255) {
        return Err(DatasetError::Invalid(format!("label {l} does not fit in a byte")));
    }
    let count = split.len() as u32;
    let mut img = Vec::with_capacity(16 + split.inputs.data().len());
    for v in [IMAGE_MAGIC, count, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(
        split
            .inputs
            .data()
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    let mut lab = Vec::with_capacity(8 + labels.len());
    for v in [LABEL_MAGIC, count] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend(labels.iter().map(|&l| l as u8));
    write_file(images_path, &img)?;
    write_file(labels_path, &lab)
}

/// The flag value if given, else `$SAU_DATA_DIR`, else `data/mnist`.
pub fn resolve_data_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("data/mnist"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistPart {
    Train,
    Test,
}

impl MnistPart {
    fn stems(self) -> (&'static str, &'static str) {
        match self {
            MnistPart::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            MnistPart::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }
}

fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Loads the standard MNIST file pair from `dir`, compressed or not.
pub fn load_mnist(dir: &Path, part: MnistPart) -> Result<DatasetSplit, DatasetError> {
    let (img, lab) = part.stems();
    match (find(dir, img), find(dir, lab)) {
        (Some(i), Some(l)) => {
            let mut split = load_idx(&i, &l)?.with_class_count(10)?;
            split.name = match part {
                MnistPart::Train => "mnist-train".into(),
                MnistPart::Test => "mnist-test".into(),
            };
            Ok(split)
        }
        _ => Err(DatasetError::MissingFiles {
            expected: vec![dir.join(img), dir.join(lab)],
        }),
    }
}

/// `count` points with x uniform on [-3, 3] and target sin(x).
pub fn make_sine_regression(count: usize, seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..count).map(|_| rng.random_range(-3.0..=3.0)).collect();
    let ys = xs.iter().map(|x: &f64| x.sin()).collect();
    let inputs = Tensor2D::new(count, 1, xs).expect("one column");
    DatasetSplit {
        name: "sine".into(),
        inputs,
        targets: Targets::Values(ys),
    }
}

/// The four XOR points, labelled 0 or 1.
pub fn make_xor() -> DatasetSplit {
    let inputs = Tensor2D::new(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
    DatasetSplit {
        name: "xor".into(),
        inputs,
        targets: Targets::Classes {
            labels: vec![0, 1, 1, 0],
            class_count: 2,
        },
    }
}
