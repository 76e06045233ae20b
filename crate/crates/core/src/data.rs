//! SPD-valued classification datasets: container, binary and CSV formats,
//! a synthetic generator and a stratified split.
//!
//! Binary layout, all integers `u32` and all floats `f64`, little-endian:
//! magic `SPDD`, version, dim, sample count, class count, then per sample a
//! label followed by the `dim²` matrix entries in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::spd::random::{gaussian_matrix, random_rotation};
use crate::spd::{Matrix, SpdMatrix, SymMatrix};

pub const DATASET_MAGIC: [u8; 4] = *b"SPDD";
pub const DATASET_VERSION: u32 = 1;
/// Largest accepted `|a_ij − a_ji| / max(1, max|a|)` on load.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Standard deviation of the log-normal eigenvalue noise of synthetic data.
pub const EIGENVALUE_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub matrix: SpdMatrix,
    pub label: usize,
    /// Set when the matrix was made positive definite by adding jitter.
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdDataset {
    pub name: String,
    pub dim: usize,
    pub class_count: usize,
    pub samples: Vec<Sample>,
}

/// What to do with a matrix that fails SPD validation on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadPolicy {
    #[default]
    Reject,
    Jitter,
}

impl SpdDataset {
    pub fn new(name: impl Into<String>, dim: usize, class_count: usize) -> Self {
        Self {
            name: name.into(),
            dim,
            class_count,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, matrix: SpdMatrix, label: usize) -> Result<()> {
        if matrix.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: matrix.dim(),
            });
        }
        if label >= self.class_count {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {} classes",
                self.class_count
            )));
        }
        self.samples.push(Sample {
            matrix,
            label,
            repaired: false,
        });
        Ok(())
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.matrix.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: s.matrix.dim(),
                });
            }
            if s.label >= self.class_count {
                return Err(Error::InvalidInput(format!(
                    "sample {i}: label {} out of range for {} classes",
                    s.label, self.class_count
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(20 + self.len() * (4 + 8 * self.dim * self.dim));
        out.extend_from_slice(&DATASET_MAGIC);
        for v in [DATASET_VERSION, to_u32(self.dim)?, to_u32(self.len())?, to_u32(self.class_count)?] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in &self.samples {
            out.extend_from_slice(&to_u32(s.label)?.to_le_bytes());
            let m = s.matrix.as_matrix();
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out.extend_from_slice(&m[(i, j)].to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R, name: &str, policy: LoadPolicy) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != DATASET_MAGIC {
            return Err(Error::BadMagic {
                expected: DATASET_MAGIC,
                found: magic,
            });
        }
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let class_count = read_u32(&mut r)? as usize;
        let mut ds = SpdDataset::new(name, dim, class_count);
        let mut buf = vec![0u8; 8 * dim * dim];
        for index in 0..count {
            let label = read_u32(&mut r)? as usize;
            if label >= class_count {
                return Err(Error::InvalidInput(format!(
                    "sample {index}: label {label} out of range for {class_count} classes"
                )));
            }
            r.read_exact(&mut buf)?;
            let data: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
                .collect();
            ds.samples.push(validate_sample(dim, &data, label, index, policy)?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Parse("trailing bytes after last sample".into()));
        }
        Ok(ds)
    }

    pub fn load(path: impl AsRef<Path>, policy: LoadPolicy) -> Result<Self> {
        let path = path.as_ref();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
        Self::from_reader(File::open(path)?, &name, policy)
    }

    /// Reads a CSV file whose rows are a label followed by `dim²` row-major
    /// entries. The class count is one more than the largest label unless
    /// given.
    pub fn load_csv(path: impl AsRef<Path>, class_count: Option<usize>, policy: LoadPolicy) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut rows = Vec::new();
        for (index, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let mut fields = record.iter();
            let label: usize = fields
                .next()
                .ok_or_else(|| Error::Parse(format!("row {index} is empty")))?
                .parse()
                .map_err(|_| Error::Parse(format!("row {index}: bad label")))?;
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("row {index}: bad number {f:?}"))))
                .collect::<Result<_>>()?;
            rows.push((label, values));
        }
        let entries = rows.first().map_or(0, |r| r.1.len());
        let dim = (entries as f64).sqrt().round() as usize;
        if dim * dim != entries {
            return Err(Error::Parse(format!("{entries} entries per row is not a square")));
        }
        let classes = class_count.unwrap_or_else(|| rows.iter().map(|r| r.0 + 1).max().unwrap_or(0));
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        let mut ds = SpdDataset::new(name, dim, classes);
        for (index, (label, values)) in rows.into_iter().enumerate() {
            if values.len() != entries {
                return Err(Error::DimensionMismatch {
                    expected: entries,
                    got: values.len(),
                });
            }
            if label >= classes {
                return Err(Error::InvalidInput(format!("row {index}: label {label} out of range")));
            }
            ds.samples.push(validate_sample(dim, &values, label, index, policy)?);
        }
        Ok(ds)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            dim: self.dim,
            class_count: self.class_count,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} does not fit in u32")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn validate_sample(dim: usize, data: &[f64], label: usize, index: usize, policy: LoadPolicy) -> Result<Sample> {
    let m = Matrix::from_row_slice(dim, dim, data);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SampleNotPositiveDefinite { index });
    }
    let scale = m.amax().max(1.0);
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidInput(format!("sample {index}: symmetry residual {asym:.3e}")));
    }
    let sym = SymMatrix::from_matrix(&m)?;
    let (matrix, repaired) = match policy {
        LoadPolicy::Reject => (
            SpdMatrix::new(sym).map_err(|_| Error::SampleNotPositiveDefinite { index })?,
            false,
        ),
        LoadPolicy::Jitter => SpdMatrix::repair(sym).map_err(|_| Error::SampleNotPositiveDefinite { index })?,
    };
    Ok(Sample {
        matrix,
        label,
        repaired,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub class_count: usize,
    pub samples_per_class: usize,
    /// Width of the log-eigenvalue profile.
    pub eigenvalue_spread: f64,
    /// Standard deviation, in radians, of the per-sample rotation noise.
    pub rotation_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            class_count: 3,
            samples_per_class: 30,
            eigenvalue_spread: 2.0,
            rotation_noise: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.class_count == 0 || self.samples_per_class == 0 {
            return Err(Error::Config("dim, class count and samples per class must be positive".into()));
        }
        if !(self.eigenvalue_spread > 0.0 && self.eigenvalue_spread.is_finite()) {
            return Err(Error::Config(format!(
                "eigenvalue spread {} must be positive",
                self.eigenvalue_spread
            )));
        }
        if !(self.rotation_noise >= 0.0 && self.rotation_noise.is_finite()) {
            return Err(Error::Config(format!(
                "rotation noise {} must be non-negative",
                self.rotation_noise
            )));
        }
        Ok(())
    }
}

/// Log-spaced profile `exp(spread·(i/(n−1) − 1/2))`.
fn eigenvalue_profile(dim: usize, spread: f64) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let t = if dim > 1 { i as f64 / (dim - 1) as f64 } else { 0.5 };
            (spread * (t - 0.5)).exp()
        })
        .collect()
}

/// Samples `Q̃·diag(λ·exp(𝒩(0, 0.1²)))·Q̃ᵀ` per class, where `Q̃` is the class
/// rotation composed with `exp` of a random skew matrix.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SpdDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.dim;
    let profile = eigenvalue_profile(n, spec.eigenvalue_spread);
    let rotations: Vec<Matrix> = (0..spec.class_count).map(|_| random_rotation(&mut rng, n)).collect();
    let noise = Normal::new(0.0, EIGENVALUE_NOISE).expect("valid normal");
    let mut ds = SpdDataset::new("synthetic", n, spec.class_count);
    for (label, q) in rotations.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let q = if spec.rotation_noise > 0.0 {
                let g = gaussian_matrix(&mut rng, n, n) * (spec.rotation_noise / std::f64::consts::SQRT_2);
                q * (&g - g.transpose()).exp()
            } else {
                q.clone()
            };
            let lambda: Vec<f64> = profile.iter().map(|l| l * noise.sample(&mut rng).exp()).collect();
            let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(lambda));
            let s = SymMatrix::from_matrix(&(&q * d * q.transpose()))?;
            ds.push(SpdMatrix::new(s)?, label)?;
        }
    }
    Ok(ds)
}

/// Stratified split: within each class, a seeded shuffle sends
/// `round(fraction·size)` samples (at least one, and leaving at least one) to
/// the first part.
pub fn train_test_split(ds: &SpdDataset, fraction: f64, seed: u64) -> Result<(SpdDataset, SpdDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Stratification(format!("class {class} has fewer than 2 samples")));
        }
        idx.shuffle(&mut rng);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}
