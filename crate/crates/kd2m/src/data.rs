//! Synthetic datasets, CSV ingestion, stratified splits and deterministic
//! minibatching.
//!
//! All randomness flows through ChaCha8 (rand_chacha 0.3), a counter-based
//! stream cipher RNG: a given (seed, epoch) pair reproduces the same draws
//! on every platform. Epochs select independent streams of the same seed.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::Path;

/// Feature matrix plus integer labels: one empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub n_classes: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, n_classes: usize, name: impl Into<String>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Config("dataset needs at least one row".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::shape("rows vs labels", x.nrows(), y.len()));
        }
        for ((i, j), &v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j, value: v });
            }
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::Config(format!("label {bad} >= n_classes {n_classes}")));
        }
        Ok(Dataset { x, y, n_classes, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows at the given indices, in the given order.
    pub fn gather(&self, indices: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let mut x = Array2::zeros((indices.len(), self.dim()));
        let mut y = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            x.row_mut(r).assign(&self.x.row(i));
            y.push(self.y[i]);
        }
        (x, y)
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let (x, y) = self.gather(indices);
        Dataset { x, y, n_classes: self.n_classes, name: name.into() }
    }
}

/// Gaussian blobs with class centers on a circle (first two coordinates)
/// or, in one dimension, evenly spaced on a line. Classes balanced to
/// within one sample. `spread` is the isotropic noise std.
pub fn gen_blobs(n: usize, n_classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if n_classes == 0 || dim == 0 {
        return Err(Error::Config("gen_blobs needs n_classes >= 1 and dim >= 1".into()));
    }
    if n < n_classes {
        return Err(Error::Config(format!("gen_blobs needs n >= n_classes, got {n} < {n_classes}")));
    }
    let mut centers = Array2::zeros((n_classes, dim));
    for k in 0..n_classes {
        if dim == 1 {
            centers[[k, 0]] = 3.0 * k as f64;
        } else {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n_classes as f64;
            centers[[k, 0]] = 2.0 * angle.cos();
            centers[[k, 1]] = 2.0 * angle.sin();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, dim));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % n_classes;
        for j in 0..dim {
            let noise: f64 = rng.sample(StandardNormal);
            x[[i, j]] = centers[[class, j]] + spread * noise;
        }
        y.push(class);
    }
    Dataset::new(x, y, n_classes, "blobs")
}

/// Two interleaved half-circles in 2-D: class 0 on the unit circle around
/// the origin, class 1 on a unit circle around (1, 0.5), both spanning a
/// half turn, plus isotropic Gaussian noise.
pub fn gen_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Config("gen_moons needs n >= 2".into()));
    }
    let n_outer = n - n / 2;
    let n_inner = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = std::f64::consts::PI * i as f64 / (n_outer.max(2) - 1) as f64;
        let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        x[[i, 0]] = t.cos() + noise * nx;
        x[[i, 1]] = t.sin() + noise * ny;
        y.push(0);
    }
    for i in 0..n_inner {
        let t = std::f64::consts::PI * i as f64 / (n_inner.max(2) - 1) as f64;
        let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        x[[n_outer + i, 0]] = 1.0 - t.cos() + noise * nx;
        x[[n_outer + i, 1]] = 0.5 - t.sin() + noise * ny;
        y.push(1);
    }
    Dataset::new(x, y, 2, "moons")
}

/// Two interleaved Archimedean spiral arms in 2-D.
pub fn gen_spirals(n: usize, turns: f64, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Config("gen_spirals needs n >= 2".into()));
    }
    let n0 = n - n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (class, k, count) = if i < n0 { (0, i, n0) } else { (1, i - n0, n / 2) };
        let u = k as f64 / (count.max(2) - 1) as f64;
        let theta = turns * 2.0 * std::f64::consts::PI * u + class as f64 * std::f64::consts::PI;
        let r = 2.0 * u;
        let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        x[[i, 0]] = r * theta.cos() + noise * nx;
        x[[i, 1]] = r * theta.sin() + noise * ny;
        y.push(class);
    }
    Dataset::new(x, y, 2, "spirals")
}

/// Write `f0,...,f{d-1},label` rows with 17-significant-digit floats so a
/// save/load round trip is value-exact.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    writeln!(w, "{},label", header.join(",")).map_err(|e| Error::io(path.display().to_string(), e))?;
    for i in 0..dataset.len() {
        let mut row = String::new();
        for j in 0..dataset.dim() {
            row.push_str(&format!("{:.16e},", dataset.x[[i, j]]));
        }
        row.push_str(&dataset.y[i].to_string());
        writeln!(w, "{row}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse a CSV written by [`save_csv`] (or by hand with plain decimal
/// floats). The class count is inferred as max label + 1.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols.last() != Some(&"label") {
        return Err(Error::Parse { line: 1, message: format!("bad header: {header}") });
    }
    for (j, col) in cols[..cols.len() - 1].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(Error::Parse { line: 1, message: format!("expected column f{j}, got {col}") });
        }
    }
    let dim = cols.len() - 1;

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, got {}", dim + 1, fields.len()),
            });
        }
        for field in &fields[..dim] {
            let v: f64 = field.trim().parse().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad float {field:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: line_no, message: format!("non-finite value {field:?}") });
            }
            rows.push(v);
        }
        let label: usize = fields[dim].trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad label {:?}: {e}", fields[dim]),
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    let n = labels.len();
    let n_classes = labels.iter().max().unwrap() + 1;
    let x = Array2::from_shape_vec((n, dim), rows).expect("row-major rebuild");
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(x, labels, n_classes, name)
}

/// Stratified split: each class is shuffled separately and divided so both
/// sides keep the class proportions. Indices stay sorted inside each side.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..dataset.n_classes {
        let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.y[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::DegenerateBatch(format!(
                "class {class} has {} samples, cannot stratify",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize)
            .clamp(1, members.len() - 1);
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = dataset.subset(&train_idx, format!("{}-train", dataset.name));
    let test = dataset.subset(&test_idx, format!("{}-test", dataset.name));
    Ok((train, test))
}

/// One epoch of minibatch index sets. The permutation is a deterministic
/// function of (seed, epoch): epoch selects the ChaCha stream.
#[derive(Debug)]
pub struct BatchIterator {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

pub fn minibatches(dataset: &Dataset, batch_size: usize, seed: u64, epoch: usize) -> Result<BatchIterator> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    Ok(BatchIterator { order, batch_size, pos: 0 })
}

impl Iterator for BatchIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}
