use crate::error::{Error, Result};
use crate::kernel::FeatureMatrix;
use crate::matrix::Matrix;

/// Row `n` of the output is `[f(n−1), f(n), f(n+1)]`; the first and last
/// frames reuse themselves for the missing neighbour.
pub fn context_concat(x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let n = x.n_frames();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "context concatenation needs at least 3 frames, got {n}"
        )));
    }
    let l = x.dim();
    let mut out = Matrix::zeros(n, 3 * l);
    for i in 0..n {
        let row = out.row_mut(i);
        row[..l].copy_from_slice(x.row(i.saturating_sub(1)));
        row[l..2 * l].copy_from_slice(x.row(i));
        row[2 * l..].copy_from_slice(x.row((i + 1).min(n - 1)));
    }
    FeatureMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_row_is_the_triple() {
        let x = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let y = context_concat(&x).unwrap();
        assert_eq!(y.row(1), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(y.row(0), &[1.0, 2.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(y.row(2), &[3.0, 4.0, 5.0, 6.0, 5.0, 6.0]);
    }

    #[test]
    fn constant_rows_stay_constant() {
        let x = FeatureMatrix::from_rows(&[[7.0]; 5]).unwrap();
        let y = context_concat(&x).unwrap();
        assert!(y.as_matrix().as_slice().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn needs_three_frames() {
        let x = FeatureMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(context_concat(&x).is_err());
    }
}
