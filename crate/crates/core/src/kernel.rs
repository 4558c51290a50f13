//! Dense kernel graph construction for one view and two-view fusion.
//!
//! The pipeline for a single view is
//! `FeatureMatrix -> DistanceMatrix -> AffinityKernel -> MarkovMatrix`:
//! squared Euclidean distances, a Gaussian kernel `exp(-d² / ε)`, and row
//! normalization into a random walk. Two views are combined by one of the
//! fusions in [`Fusion`]; the alternating product `Mv · Mw` is the one that
//! attenuates view-specific interference.
//!
//! All constructors are deterministic: rows may be computed in parallel, but
//! every sum within a row is accumulated left to right.

use std::path::Path;

use faer::linalg::matmul::matmul;
use faer::Accum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Tolerance on `|row sum - 1|` for a matrix to count as row-stochastic.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A kernel or transition entry above this value counts as an edge.
pub const EDGE_THRESHOLD: f64 = 1e-12;

/// Rows are frames, columns are feature dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.rows() < 2 {
            return Err(Error::InsufficientData(format!(
                "feature matrix needs at least 2 frames, got {}",
                data.rows()
            )));
        }
        if data.cols() < 1 {
            return Err(Error::InsufficientData(
                "feature matrix needs at least 1 column".into(),
            ));
        }
        if let Some((row, col)) = data.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self(data))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(Matrix::read_csv(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.0.write_csv(path)
    }

    pub fn n_frames(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        self.0.row(n)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let mut m = self.0.clone();
        m.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        Self::new(m)
    }
}

/// Squared Euclidean distances between all pairs of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    /// Wraps precomputed squared distances after checking that they are
    /// square, symmetric, non-negative, and zero on the diagonal.
    pub fn new(d2: Matrix) -> Result<Self> {
        check_square(&d2, "distance matrix")?;
        let n = d2.rows();
        for i in 0..n {
            if d2[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "distance matrix diagonal entry {i} is {}",
                    d2[(i, i)]
                )));
            }
            for j in 0..n {
                let v = d2[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v < 0.0 || v != d2[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "distance matrix entry ({i},{j}) is negative or asymmetric"
                    )));
                }
            }
        }
        Ok(Self(d2))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Gaussian affinities `exp(-d² / ε)` with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityKernel {
    k: Matrix,
    epsilon: f64,
}

impl AffinityKernel {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.k.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.k
    }

    /// Builds a kernel from explicit entries, e.g. a 0/1 connectivity
    /// pattern. Entries must lie in `[0, 1]`, be symmetric, and the diagonal
    /// must be exactly one.
    pub fn from_matrix(k: Matrix, epsilon: f64) -> Result<Self> {
        check_square(&k, "affinity kernel")?;
        let n = k.rows();
        for i in 0..n {
            if k[(i, i)] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "kernel diagonal entry {i} must be 1"
                )));
            }
            for j in 0..n {
                let v = k[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != k[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "kernel entry ({i},{j}) = {v} outside [0,1] or asymmetric"
                    )));
                }
            }
        }
        Ok(Self { k, epsilon })
    }
}

/// Row-stochastic transition matrix of a random walk on the frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMatrix(Matrix);

impl MarkovMatrix {
    /// Validates non-negativity and unit row sums.
    pub fn new(m: Matrix) -> Result<Self> {
        check_square(&m, "Markov matrix")?;
        if let Some((row, col)) = m.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        for (i, row) in m.row_iter().enumerate() {
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Markov matrix row {i} has a negative entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "Markov matrix row {i} sums to {s}"
                )));
            }
        }
        Ok(Self(m))
    }

    /// Normalizes the rows of an arbitrary non-negative matrix.
    pub fn from_nonnegative(m: Matrix) -> Result<Self> {
        check_square(&m, "Markov matrix")?;
        normalize_rows(m).map(Self)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.0
            .row_sums()
            .into_iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// How the two per-view Markov matrices are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    /// `Mv · Mw`
    Alternating,
    /// `Mv ∘ Mw`, rows renormalized
    Hadamard,
    /// `(Mv + Mw) / 2`
    Sum,
}

impl Fusion {
    pub fn apply(self, mv: &MarkovMatrix, mw: &MarkovMatrix) -> Result<MarkovMatrix> {
        match self {
            Fusion::Alternating => fuse_alternating(mv, mw),
            Fusion::Hadamard => fuse_hadamard(mv, mw),
            Fusion::Sum => fuse_sum(mv, mw),
        }
    }
}

pub fn pairwise_sq_dists(x: &FeatureMatrix) -> DistanceMatrix {
    let m = x.as_matrix();
    let n = m.rows();
    let mut d2 = Matrix::zeros(n, n);
    d2.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, out)| {
            let xi = m.row(i);
            for (j, o) in out.iter_mut().enumerate() {
                if j != i {
                    *o = xi
                        .iter()
                        .zip(m.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                }
            }
        });
    DistanceMatrix(d2)
}

/// Gaussian kernel with bandwidth `epsilon`. Entries that would underflow
/// are clamped to the smallest positive normal `f64` so every pair keeps a
/// (negligible) positive weight.
pub fn build_affinity(d: &DistanceMatrix, epsilon: f64) -> Result<AffinityKernel> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kernel bandwidth must be positive and finite, got {epsilon}"
        )));
    }
    let n = d.n();
    let mut k = Matrix::zeros(n, n);
    k.as_mut_slice()
        .par_chunks_mut(n)
        .zip(d.as_matrix().as_slice().par_chunks(n))
        .for_each(|(out, drow)| {
            for (o, &dist) in out.iter_mut().zip(drow) {
                *o = (-dist / epsilon).exp().max(f64::MIN_POSITIVE);
            }
        });
    Ok(AffinityKernel { k, epsilon })
}

pub fn row_normalize(k: &AffinityKernel) -> MarkovMatrix {
    // the unit diagonal keeps every row sum >= 1
    MarkovMatrix(normalize_rows(k.k.clone()).expect("kernel rows have positive sums"))
}

pub fn fuse_alternating(mv: &MarkovMatrix, mw: &MarkovMatrix) -> Result<MarkovMatrix> {
    check_same_size(mv, mw)?;
    let n = mv.n();
    let a = mv.0.to_faer();
    let b = mw.0.to_faer();
    let mut out = faer::Mat::<f64>::zeros(n, n);
    matmul(
        out.as_mut(),
        Accum::Replace,
        a.as_ref(),
        b.as_ref(),
        1.0,
        faer::get_global_parallelism(),
    );
    Ok(MarkovMatrix(Matrix::from_faer(out.as_ref())))
}

pub fn fuse_hadamard(mv: &MarkovMatrix, mw: &MarkovMatrix) -> Result<MarkovMatrix> {
    check_same_size(mv, mw)?;
    let n = mv.n();
    let prod: Vec<f64> = mv
        .0
        .as_slice()
        .iter()
        .zip(mw.0.as_slice())
        .map(|(a, b)| a * b)
        .collect();
    normalize_rows(Matrix::from_vec(n, n, prod)?).map(MarkovMatrix)
}

pub fn fuse_sum(mv: &MarkovMatrix, mw: &MarkovMatrix) -> Result<MarkovMatrix> {
    check_same_size(mv, mw)?;
    let n = mv.n();
    let mean: Vec<f64> = mv
        .0
        .as_slice()
        .iter()
        .zip(mw.0.as_slice())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(MarkovMatrix(Matrix::from_vec(n, n, mean)?))
}

/// Boolean support `{(i, j) : entry > EDGE_THRESHOLD}` of a square matrix.
pub fn support(m: &Matrix) -> Vec<bool> {
    m.as_slice().iter().map(|&v| v > EDGE_THRESHOLD).collect()
}

/// Whether node `i` has an edge to some other node in the support of `m`.
pub fn has_off_diagonal_edge(m: &Matrix, i: usize) -> bool {
    m.row(i)
        .iter()
        .enumerate()
        .any(|(j, &v)| j != i && v > EDGE_THRESHOLD)
}

fn normalize_rows(mut m: Matrix) -> Result<Matrix> {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let s: f64 = row.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Degenerate(format!(
                "row {i} has non-positive sum {s} and cannot be normalized"
            )));
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(m)
}

fn check_square(m: &Matrix, what: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what,
            expected: m.rows(),
            found: m.cols(),
        });
    }
    Ok(())
}

fn check_same_size(a: &MarkovMatrix, b: &MarkovMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            what: "fused views",
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}
