//! Leading non-trivial eigenvector of a Markov matrix.
//!
//! A row-stochastic matrix always has the eigenpair `(1, 𝟙)`, which carries
//! no information. The first informative coordinate is the right eigenvector
//! of the eigenvalue with the second-largest magnitude. The product of two
//! Markov matrices is not similar to a symmetric matrix, so its spectrum may
//! be complex; in that case, or on request, the second eigenvector of the
//! symmetric matrix `M·Mᵀ` is used instead.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::matmul::matmul;
use faer::matrix_free::eigen::{partial_eigen, partial_eigen_scratch, PartialEigenParams};
use faer::{c64, Accum, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::MarkovMatrix;
use crate::matrix::Matrix;

/// Largest matrix handled by the dense solver.
pub const MAX_DENSE_N: usize = 4096;

/// Eigenvalues this close to 1 are treated as copies of the trivial one.
const UNIT_EIGENVALUE_TOL: f64 = 1e-9;

/// Relative imaginary part above which an eigenvalue counts as complex.
const COMPLEX_TOL: f64 = 1e-10;

/// From this size on the direct method first tries a Krylov–Schur solver
/// for the few largest eigenvalues, falling back to the dense
/// decomposition when it does not converge.
pub const KRYLOV_MIN_N: usize = 128;

/// Eigenpairs requested from the Krylov solver.
const KRYLOV_PAIRS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Right eigenvector of `M` itself.
    Direct,
    /// Second eigenvector of the symmetric matrix `M·Mᵀ`.
    Symmetrized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalue: f64,
    /// Unit-norm eigenvector, sign chosen so its largest-magnitude entry is
    /// positive.
    pub vector: Vec<f64>,
    /// `||A ν − λ ν||₂` for the matrix `A` that was decomposed.
    pub residual: f64,
    pub requested: EigenMethod,
    pub method: EigenMethod,
}

impl SpectralResult {
    /// True when the direct method hit a complex eigenvalue and the
    /// symmetrized method was used instead.
    pub fn fell_back(&self) -> bool {
        self.requested != self.method
    }
}

pub fn leading_nontrivial_eigenvector(
    m: &MarkovMatrix,
    method: EigenMethod,
) -> Result<SpectralResult> {
    let n = m.n();
    if n < 2 {
        return Err(Error::InsufficientData(
            "eigen-decomposition needs at least 2 frames".into(),
        ));
    }
    if n > MAX_DENSE_N {
        return Err(Error::InvalidParameter(format!(
            "dense eigen-solver supports N <= {MAX_DENSE_N}, got {n}"
        )));
    }
    match method {
        EigenMethod::Direct => match direct(m.as_matrix())? {
            Some((eigenvalue, vector)) => Ok(finish(m.as_matrix(), eigenvalue, vector, method, method)),
            None => symmetrized(m.as_matrix(), EigenMethod::Direct),
        },
        EigenMethod::Symmetrized => symmetrized(m.as_matrix(), method),
    }
}

/// Largest-magnitude eigenpairs, sorted by decreasing `|λ|`.
struct Eigenpairs {
    values: Vec<c64>,
    vectors: Vec<Vec<c64>>,
}

fn dense_pairs(m: &Matrix) -> Result<Eigenpairs> {
    let n = m.rows();
    let evd = m
        .to_faer()
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigen-decomposition did not converge: {e:?}")))?;
    let values: Vec<c64> = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();
    let vectors = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok(Eigenpairs { values, vectors })
}

/// `None` when the solver did not converge on enough pairs.
fn krylov_pairs(m: &Matrix) -> Option<Eigenpairs> {
    let n = m.rows();
    let a = m.to_faer();
    let a = a.as_ref();
    // deterministic start vector with no special structure
    let golden = 0.618_033_988_749_894_9;
    let mut v0 = faer::Col::<f64>::from_fn(n, |i| ((i as f64 + 1.0) * golden).fract() - 0.5);
    let norm = v0.norm_l2();
    v0 /= norm;
    let par = faer::get_global_parallelism();
    let params = PartialEigenParams::default();
    let mut mem = MemBuffer::new(partial_eigen_scratch(&a, KRYLOV_PAIRS, par, params));
    let mut u = faer::Mat::<c64>::zeros(n, KRYLOV_PAIRS);
    let mut values = vec![c64::new(0.0, 0.0); KRYLOV_PAIRS];
    let info = partial_eigen(
        u.as_mut(),
        &mut values,
        &a,
        v0.as_ref(),
        f64::EPSILON * 128.0,
        par,
        MemStack::new(&mut mem),
        params,
    );
    let k = info.n_converged_eigen;
    if k < 3 {
        return None;
    }
    values.truncate(k);
    let vectors = (0..k).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Some(Eigenpairs { values, vectors })
}

/// Returns `None` when the sought eigenvalue is complex.
fn direct(m: &Matrix) -> Result<Option<(f64, Vec<f64>)>> {
    if m.rows() >= KRYLOV_MIN_N {
        if let Some(pairs) = krylov_pairs(m) {
            match select(&pairs) {
                Some((lambda, v)) if residual(m, lambda, &normalized(v.clone())) < KRYLOV_RESIDUAL_TOL => {
                    return Ok(Some((lambda, v)));
                }
                // a complex leading pair is trusted only from the dense solver
                _ => {}
            }
        }
    }
    Ok(select(&dense_pairs(m)?))
}

/// Residual accepted from the Krylov solver before falling back.
const KRYLOV_RESIDUAL_TOL: f64 = 1e-10;

fn select(pairs: &Eigenpairs) -> Option<(f64, Vec<f64>)> {
    let values = &pairs.values;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .norm()
            .total_cmp(&values[a].norm())
            .then(values[b].re.total_cmp(&values[a].re))
            .then(a.cmp(&b))
    });

    let unit: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&j| (values[j] - c64::new(1.0, 0.0)).norm() < UNIT_EIGENVALUE_TOL)
        .collect();
    if unit.len() >= 2 {
        // λ = 1 is repeated: the graph has several components. Any vector of
        // the eigenspace with its constant part removed is a valid answer.
        let candidates: Vec<Vec<f64>> = unit.iter().map(|&j| realify(&pairs.vectors[j])).collect();
        return Some((1.0, orthogonal_to_ones(&candidates)));
    }

    let second = order[1];
    let lambda = values[second];
    if lambda.im.abs() > COMPLEX_TOL * lambda.norm().max(1.0) {
        return None;
    }
    Some((lambda.re, realify(&pairs.vectors[second])))
}

fn residual(a: &Matrix, lambda: f64, v: &[f64]) -> f64 {
    a.matvec(v)
        .iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn symmetrized(m: &Matrix, requested: EigenMethod) -> Result<SpectralResult> {
    let n = m.rows();
    let a = m.to_faer();
    let mut s = faer::Mat::<f64>::zeros(n, n);
    matmul(
        s.as_mut(),
        Accum::Replace,
        a.as_ref(),
        a.transpose(),
        1.0,
        faer::get_global_parallelism(),
    );
    // enforce exact symmetry before the self-adjoint solver
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigen-decomposition failed: {e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let vectors = evd.U();
    let column = |j: usize| -> Vec<f64> { (0..n).map(|i| vectors[(i, j)]).collect() };

    // ascending order: the top pair sits at n-1, the answer at n-2
    let top = values[n - 1];
    let tied: Vec<usize> = (0..n)
        .rev()
        .take_while(|&j| top - values[j] <= UNIT_EIGENVALUE_TOL * top.abs().max(1.0))
        .collect();
    let (eigenvalue, vector) = if tied.len() >= 2 {
        let candidates: Vec<Vec<f64>> = tied.iter().map(|&j| column(j)).collect();
        (top, orthogonal_to_ones(&candidates))
    } else {
        (values[n - 2], column(n - 2))
    };
    let sym = Matrix::from_faer(s.as_ref());
    Ok(finish(&sym, eigenvalue, vector, requested, EigenMethod::Symmetrized))
}

fn finish(
    a: &Matrix,
    eigenvalue: f64,
    vector: Vec<f64>,
    requested: EigenMethod,
    method: EigenMethod,
) -> SpectralResult {
    let vector = canonical_sign(normalized(vector));
    let residual = residual(a, eigenvalue, &vector);
    SpectralResult {
        eigenvalue,
        vector,
        residual,
        requested,
        method,
    }
}

/// Rotates a complex eigenvector of a real eigenvalue onto the real axis.
fn realify(u: &[c64]) -> Vec<f64> {
    let pivot = u
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(c64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm().max(f64::MIN_POSITIVE);
    u.iter().map(|&z| (z * phase).re).collect()
}

/// Picks, among eigenspace vectors that all share the eigenvalue, the one
/// whose component orthogonal to `𝟙` is largest, and returns that component.
fn orthogonal_to_ones(candidates: &[Vec<f64>]) -> Vec<f64> {
    candidates
        .iter()
        .map(|u| {
            let u = normalized(u.clone());
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            u.into_iter().map(|x| x - mean).collect::<Vec<f64>>()
        })
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .expect("at least one candidate")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s = norm(&v);
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}
