//! Datasets, CSV ingestion, min-max normalization to [-1, 1], synthetic
//! generators and cross-validation fold plans.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Sample matrix with optional class labels.
///
/// Every row has the same number of finite attributes. When labels are
/// present there is one per row and each is below `n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    samples: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    n_classes: usize,
    attribute_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidDataset("no samples".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidDataset("samples have no attributes".into()));
        }
        for (i, row) in samples.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} attributes, expected {dim}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("row {i}, attribute {j} is not finite")));
            }
        }
        Ok(Dataset {
            name: name.into(),
            samples,
            labels: None,
            n_classes: 0,
            attribute_names: None,
        })
    }

    /// Attach labels; the class count becomes `max(label) + 1`.
    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        self.with_labels_and_classes(labels, n_classes)
    }

    /// Attach labels against a fixed class count (subsets may miss some classes).
    pub fn with_labels_and_classes(mut self, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != self.samples.len() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} samples",
                labels.len(),
                self.samples.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidDataset(format!("label {bad} >= class count {n_classes}")));
        }
        self.labels = Some(labels);
        self.n_classes = n_classes;
        Ok(self)
    }

    pub fn with_attribute_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::InvalidDataset(format!(
                "{} attribute names for {} attributes",
                names.len(),
                self.dim()
            )));
        }
        self.attribute_names = Some(names);
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn attribute_names(&self) -> Option<&[String]> {
        self.attribute_names.as_deref()
    }

    /// Number of classes, 0 when unlabeled.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    /// Rows at `indices`, keeping the parent's class count and attribute names.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut out = Dataset::new(self.name.clone(), samples)?;
        if let Some(labels) = &self.labels {
            let sub = indices.iter().map(|&i| labels[i]).collect();
            out = out.with_labels_and_classes(sub, self.n_classes)?;
        }
        out.attribute_names = self.attribute_names.clone();
        Ok(out)
    }

    fn with_samples(&self, samples: Vec<Vec<f64>>) -> Dataset {
        Dataset {
            name: self.name.clone(),
            samples,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
            attribute_names: self.attribute_names.clone(),
        }
    }

    /// Write the generator dialect: header `a0,...,a{A-1}[,label]`, shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("a{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for (i, row) in self.samples.iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &self.labels {
                rec.push(labels[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Load a comma-separated file. Non-label cells must be finite reals; the
/// optional label column may hold arbitrary strings, re-encoded densely in
/// first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, &name, has_header, label_column).map_err(|e| match e {
        Error::EmptyFile { .. } => Error::EmptyFile { path: path.into() },
        other => other,
    })
}

pub fn read_csv<R: std::io::Read>(
    input: R,
    name: &str,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let header: Option<Vec<String>> = if has_header {
        Some(reader.headers()?.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut samples = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row,
                expected,
                found: record.len(),
            });
        }
        if let Some(lc) = label_column {
            if lc >= expected {
                return Err(Error::LabelColumn {
                    column: lc,
                    width: expected,
                });
            }
        }
        let mut values = Vec::with_capacity(expected);
        for (column, cell) in record.iter().enumerate() {
            if Some(column) == label_column {
                raw_labels.push(cell.to_owned());
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row,
                        column,
                        value: cell.to_owned(),
                    })
                }
            }
        }
        samples.push(values);
    }
    if samples.is_empty() {
        return Err(Error::EmptyFile { path: name.into() });
    }

    let mut ds = Dataset::new(name, samples)?;
    if let Some(h) = header {
        let names = h
            .into_iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_column)
            .map(|(_, s)| s)
            .collect();
        ds = ds.with_attribute_names(names)?;
    }
    if label_column.is_some() {
        let mut seen: Vec<String> = Vec::new();
        let labels = raw_labels
            .into_iter()
            .map(|l| match seen.iter().position(|s| *s == l) {
                Some(id) => id,
                None => {
                    seen.push(l);
                    seen.len() - 1
                }
            })
            .collect();
        ds = ds.with_labels(labels)?;
    }
    Ok(ds)
}

/// Per-attribute extrema used by the [-1, 1] rescaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub per_attribute_min: Vec<f64>,
    pub per_attribute_max: Vec<f64>,
}

impl NormalizationParams {
    pub fn fit(ds: &Dataset) -> Self {
        let dim = ds.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in ds.samples() {
            for j in 0..dim {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        NormalizationParams {
            per_attribute_min: lo,
            per_attribute_max: hi,
        }
    }

    /// Map `x` to `(2x - max - min) / (max - min)`; a constant attribute maps to 0.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = (self.per_attribute_min[j], self.per_attribute_max[j]);
        if hi <= lo {
            return 0.0;
        }
        // Same value as (2x - hi - lo) / (hi - lo), arranged so that the
        // extremes land on -1 and 1 exactly.
        ((x - lo) + (x - hi)) / (hi - lo)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &x)| self.transform_value(j, x)).collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.per_attribute_min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.per_attribute_min.len(),
                got: ds.dim(),
            });
        }
        Ok(ds.with_samples(ds.samples().iter().map(|r| self.transform_row(r)).collect()))
    }
}

pub fn normalize(ds: &Dataset) -> (Dataset, NormalizationParams) {
    let params = NormalizationParams::fit(ds);
    let out = ds.with_samples(ds.samples().iter().map(|r| params.transform_row(r)).collect());
    (out, params)
}

/// Sizes of `n` items dealt into `k` groups, the first `n % k` getting one extra.
fn split_sizes(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |i| n / k + usize::from(i < n % k))
}

/// Length of each synthetic line segment.
const SEGMENT_LENGTH: f64 = 2.0;
/// Center-to-center spacing of the segment grid, both axes.
const SEGMENT_PITCH: f64 = 4.0;
/// Half-width of the uniform vertical jitter around each segment.
const SEGMENT_JITTER: f64 = 0.05;

/// `n_total` 2-D points spread uniformly along `n_segments` horizontal segments
/// laid out on a grid, one class per segment.
pub fn gen_lines(n_total: usize, n_segments: usize, seed: RngSeed) -> Result<Dataset> {
    if n_segments == 0 || n_total < n_segments {
        return Err(Error::param("n_segments", "need n_total >= n_segments >= 1"));
    }
    let cols = (n_segments as f64).sqrt().ceil() as usize;
    let mut rng = seed.rng();
    let mut samples = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);
    for (seg, count) in split_sizes(n_total, n_segments).enumerate() {
        let x0 = (seg % cols) as f64 * SEGMENT_PITCH;
        let y0 = (seg / cols) as f64 * SEGMENT_PITCH;
        for _ in 0..count {
            let x = x0 + rng.random::<f64>() * SEGMENT_LENGTH;
            let y = y0 + (rng.random::<f64>() * 2.0 - 1.0) * SEGMENT_JITTER;
            samples.push(vec![x, y]);
            labels.push(seg);
        }
    }
    Dataset::new("lines", samples)?.with_labels_and_classes(labels, n_segments)
}

/// Radius of each banana arc.
pub const BANANA_RADIUS: f64 = 5.0;

/// Two interlocking half-circle arcs of radius 5 with isotropic Gaussian noise of std `s`.
///
/// Class 0 lies on the upper half of the circle centered at the origin, class 1
/// on the lower half of the circle centered at `(r, r/2)`.
pub fn gen_banana(n_per_class: usize, s: f64, seed: RngSeed) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::param("n_per_class", "must be at least 1"));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::param("s", "must be positive"));
    }
    let noise = Normal::new(0.0, s).expect("s > 0");
    let mut rng = seed.rng();
    let r = BANANA_RADIUS;
    let mut samples = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2 {
        let (cx, cy, sign) = banana_arc(class);
        for _ in 0..n_per_class {
            let t = rng.random::<f64>() * PI;
            let x = cx + r * t.cos() + noise.sample(&mut rng);
            let y = cy + sign * r * t.sin() + noise.sample(&mut rng);
            samples.push(vec![x, y]);
            labels.push(class);
        }
    }
    Dataset::new("banana", samples)?.with_labels_and_classes(labels, 2)
}

/// Arc center and orientation (+1 upper half, -1 lower half) for a banana class.
pub fn banana_arc(class: usize) -> (f64, f64, f64) {
    if class == 0 {
        (0.0, 0.0, 1.0)
    } else {
        (BANANA_RADIUS, BANANA_RADIUS / 2.0, -1.0)
    }
}

fn gaussian_classes(
    name: &str,
    n_per_class: usize,
    classes: &[([f64; 2], [f64; 2])],
    seed: RngSeed,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::param("n_per_class", "must be at least 1"));
    }
    let mut rng = seed.rng();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(classes.len() * n_per_class);
    let mut labels = Vec::with_capacity(classes.len() * n_per_class);
    for (class, (mean, var)) in classes.iter().enumerate() {
        let sd = [var[0].sqrt(), var[1].sqrt()];
        for _ in 0..n_per_class {
            let x = mean[0] + sd[0] * std.sample(&mut rng);
            let y = mean[1] + sd[1] * std.sample(&mut rng);
            samples.push(vec![x, y]);
            labels.push(class);
        }
    }
    Dataset::new(name, samples)?.with_labels_and_classes(labels, classes.len())
}

/// Highleyman-style pair: class 0 ~ N((1, 0), diag(1, 0.25)), class 1 ~ N((0.01, 0), diag(1, 4)).
pub fn gen_highleyman(n_per_class: usize, seed: RngSeed) -> Result<Dataset> {
    gaussian_classes(
        "highleyman",
        n_per_class,
        &[([1.0, 0.0], [1.0, 0.25]), ([0.01, 0.0], [1.0, 4.0])],
        seed,
    )
}

/// Class 0 ~ N((u, 0), I), class 1 ~ N(0, diag(4, 1)).
pub fn gen_spherical(n_per_class: usize, u: f64, seed: RngSeed) -> Result<Dataset> {
    gaussian_classes(
        "spherical",
        n_per_class,
        &[([u, 0.0], [1.0, 1.0]), ([0.0, 0.0], [4.0, 1.0])],
        seed,
    )
}

/// Two identity-covariance Gaussians with means (0, 0) and (d, 0).
pub fn gen_simple(n_per_class: usize, d: f64, seed: RngSeed) -> Result<Dataset> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::param("d", "must be a finite value >= 0"));
    }
    gaussian_classes(
        "simple",
        n_per_class,
        &[([0.0, 0.0], [1.0, 1.0]), ([d, 0.0], [1.0, 1.0])],
        seed,
    )
}

/// Assignment of sample indices to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k_folds: usize,
    pub fold_assignment: Vec<usize>,
}

/// Random permutation of `0..n` dealt round-robin into `k_folds` folds.
pub fn make_folds(n: usize, k_folds: usize, seed: RngSeed) -> Result<FoldPlan> {
    if k_folds == 0 || k_folds > n {
        return Err(Error::param("k_folds", format!("need 1 <= k_folds <= n (n = {n}, k_folds = {k_folds})")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.rng());
    let mut fold_assignment = vec![0; n];
    for (pos, &idx) in perm.iter().enumerate() {
        fold_assignment[idx] = pos % k_folds;
    }
    Ok(FoldPlan {
        k_folds,
        fold_assignment,
    })
}

impl FoldPlan {
    /// (train indices, test indices) for one fold, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_assignment.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_folds];
        for &f in &self.fold_assignment {
            sizes[f] += 1;
        }
        sizes
    }
}
