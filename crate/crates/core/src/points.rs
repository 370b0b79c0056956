//! Candidate sensor locations.
//!
//! A [`PointSet`] is an `n × D` array of coordinates stored row-major. The
//! row position of a point is its candidate index everywhere in the crate,
//! including in files written by the CLI (indices are 0-based).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// `n` distinct candidate locations in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
}

impl PointSet {
    /// Builds a point set from row-major coordinates.
    ///
    /// Rejects empty input, non-finite coordinates and exactly repeated rows.
    pub fn new(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form whole rows of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinate in row {}",
                pos / dim
            )));
        }
        let set = PointSet { coords, dim };
        set.check_distinct()?;
        Ok(set)
    }

    /// Builds a point set from one `Vec` per row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: rows[bad].len(),
            });
        }
        PointSet::new(rows.concat(), dim)
    }

    fn check_distinct(&self) -> Result<()> {
        // -0.0 and 0.0 compare equal, so normalize before hashing bit patterns.
        let key = |row: &[f64]| -> Vec<u64> {
            row.iter()
                .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
                .collect()
        };
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(self.len());
        for i in 0..self.len() {
            if let Some(&first) = seen.get(&key(self.point(i))) {
                return Err(Error::DuplicatePoint { first, second: i });
            }
            seen.insert(key(self.point(i)), i);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates of candidate `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The subset of candidates at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PointSet> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
            coords.extend_from_slice(self.point(i));
        }
        PointSet::new(coords, self.dim)
    }
}

/// `n` equally spaced points on `[a, b]`, endpoints included.
pub fn grid1d(a: f64, b: f64, n: usize) -> Result<PointSet> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument("grid bounds must be finite".into()));
    }
    if a >= b {
        return Err(Error::InvalidArgument(format!("grid requires a < b, got [{a}, {b}]")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("grid requires at least 2 points".into()));
    }
    let h = (b - a) / (n - 1) as f64;
    let coords = (0..n)
        .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
        .collect();
    PointSet::new(coords, 1)
}

/// Latin hypercube sample of `n` points in `[0,1]^dim`.
///
/// Each axis is cut into `n` equal bins and every bin holds exactly one
/// point; the position inside a bin is uniform.
pub fn latin_hypercube(n: usize, dim: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument("latin hypercube needs n >= 1 and dim >= 1".into()));
    }
    let mut rng = crate::rng::seeded(seed);
    let mut coords = vec![0.0; n * dim];
    let mut bins: Vec<usize> = (0..n).collect();
    for axis in 0..dim {
        bins.shuffle(&mut rng);
        for (i, &bin) in bins.iter().enumerate() {
            let u: f64 = rng.random();
            coords[i * dim + axis] = (bin as f64 + u) / n as f64;
        }
    }
    PointSet::new(coords, dim)
}

/// Zhou (1998) test function: two Gaussian bumps centred at `zeta1·e` and
/// `zeta2·e`, where `e` is the all-ones vector.
pub fn zhou_function(points: &PointSet, zeta1: f64, zeta2: f64) -> Vec<f64> {
    let d = points.dim() as f64;
    let scale = 10f64.powf(d) / 2.0;
    let phi = |x: &[f64], zeta: f64| -> f64 {
        let sq: f64 = x.iter().map(|&xi| (10.0 * (xi - zeta)).powi(2)).sum();
        (2.0 * PI).powf(d / 2.0) * (-0.5 * sq).exp()
    };
    points
        .iter()
        .map(|x| scale * (phi(x, zeta1) + phi(x, zeta2)))
        .collect()
}

/// Sum of 1D Gaussian bumps `Σ h_j exp(-(x - c_j)² / (2 w_j²))`.
///
/// Used as a smooth droplet-like profile on 1D grids.
pub fn sum_of_gaussians_1d(
    points: &PointSet,
    centers: &[f64],
    widths: &[f64],
    heights: &[f64],
) -> Result<Vec<f64>> {
    if points.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: points.dim() });
    }
    if widths.len() != centers.len() || heights.len() != centers.len() {
        return Err(Error::InvalidArgument(format!(
            "parameter lists differ in length: {} centers, {} widths, {} heights",
            centers.len(),
            widths.len(),
            heights.len()
        )));
    }
    if widths.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("widths must be positive".into()));
    }
    Ok(points
        .iter()
        .map(|x| {
            centers
                .iter()
                .zip(widths)
                .zip(heights)
                .map(|((c, w), h)| h * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
                .sum()
        })
        .collect())
}

fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let row_no = line + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: row_no,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            // A non-numeric first row is a header.
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(record.len());
                continue;
            }
            Err(_) => {
                let cell = record.iter().find(|c| c.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: row_no,
                    message: format!("non-numeric cell {cell:?}"),
                });
            }
        };
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: row_no,
                    message: format!("expected {w} columns, found {}", values.len()),
                });
            }
            None => width = Some(values.len()),
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            message: "no numeric rows".into(),
        });
    }
    Ok(rows)
}

/// Reads candidate coordinates, one point per row. A non-numeric first row
/// is treated as a header and skipped.
pub fn load_points_csv(path: impl AsRef<Path>) -> Result<PointSet> {
    let rows = read_table(path.as_ref())?;
    PointSet::from_rows(&rows)
}

/// Reads a single-column vector of values.
pub fn load_values_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let rows = read_table(path)?;
    if rows[0].len() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: format!("expected a single column, found {}", rows[0].len()),
        });
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

/// Formats with 17 significant digits so every `f64` round-trips.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<'a>(
    path: &Path,
    header: Option<&str>,
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    if let Some(h) = header {
        writeln!(out, "{h}").map_err(io_err)?;
    }
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_points_csv(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    write_rows(path.as_ref(), None, points.iter())
}

pub fn write_values_csv(path: impl AsRef<Path>, header: Option<&str>, values: &[f64]) -> Result<()> {
    write_rows(path.as_ref(), header, values.chunks(1))
}
