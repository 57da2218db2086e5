//! Small dense linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Threshold below which a singular value counts as zero.
fn cutoff(singular: &Vector, rel_tol: f64) -> f64 {
    let smax = singular.iter().cloned().fold(0.0_f64, f64::max);
    rel_tol * smax.max(1.0)
}

/// Numerical rank of `a`.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let c = cutoff(&sv, rel_tol);
    sv.iter().filter(|&&s| s > c).count()
}

/// Orthonormal basis (as columns) of the column space of `a`.
pub fn range_basis(a: &Matrix, rel_tol: f64) -> Matrix {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return Matrix::zeros(m, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let c = cutoff(&svd.singular_values, rel_tol);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > c)
        .collect();
    let mut out = Matrix::zeros(m, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Orthonormal completion of an orthonormal column set to a basis of R^n;
/// returns only the added columns.
pub fn orthogonal_complement(basis: &Matrix, n: usize) -> Matrix {
    let mut cols: Vec<Vector> = basis.column_iter().map(|c| c.into_owned()).collect();
    let start = cols.len();
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        // two passes of Gram-Schmidt keep the result orthogonal to working precision
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&e);
                e.axpy(-d, c, 1.0);
            }
        }
        let nrm = e.norm();
        if nrm > 1e-8 {
            cols.push(e / nrm);
        }
    }
    let added = &cols[start..];
    let mut out = Matrix::zeros(n, added.len());
    for (k, c) in added.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

/// Orthonormal basis of the null space of `a` (columns in R^{ncols}).
pub fn null_space(a: &Matrix, rel_tol: f64) -> Matrix {
    let n = a.ncols();
    let row_space = range_basis(&a.transpose(), rel_tol);
    orthogonal_complement(&row_space, n)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &Matrix, b: &Vector, rel_tol: f64) -> Vector {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let c = cutoff(&svd.singular_values, rel_tol);
    svd.solve(b, c).unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

/// Smallest singular value (0 for an empty matrix).
pub fn sigma_min(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let sv = a.singular_values();
    let k = a.nrows().min(a.ncols());
    if k < a.ncols() {
        // wide matrices have a nontrivial kernel
        return 0.0;
    }
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of a symmetric matrix; `+inf` for the empty matrix.
pub fn sym_min_eigenvalue(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Stack vectors of length `n` as the columns of an `n x k` matrix.
pub fn columns(vecs: &[Vector], n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, vecs.len());
    for (k, v) in vecs.iter().enumerate() {
        out.set_column(k, v);
    }
    out
}

/// Stack vectors of length `n` as the rows of a `k x n` matrix.
pub fn rows(vecs: &[Vector], n: usize) -> Matrix {
    columns(vecs, n).transpose()
}

/// Orthogonal projector `B B^T` for a matrix with orthonormal columns.
pub fn projector(basis: &Matrix) -> Matrix {
    basis * basis.transpose()
}

/// Maximum absolute entry of a matrix (0 when empty).
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let k = null_space(&a, 1e-12);
        assert_eq!(k.ncols(), 1);
        assert_abs_diff_eq!((&a * &k).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn complement_fills_the_space() {
        let b = Matrix::from_column_slice(3, 1, &[0.0, 0.6, 0.8]);
        let c = orthogonal_complement(&b, 3);
        assert_eq!(c.ncols(), 2);
        assert_abs_diff_eq!((b.transpose() * &c).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((c.transpose() * &c - Matrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_and_sigma_min() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(rank(&a, 1e-12), 1);
        let b = Matrix::from_row_slice(2, 1, &[2.0, 0.0]);
        assert_abs_diff_eq!(sigma_min(&b), 2.0, epsilon = 1e-14);
        assert_eq!(sigma_min(&Matrix::zeros(1, 2)), 0.0);
    }

    #[test]
    fn lstsq_min_norm() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&a, &Vector::from_vec(vec![2.0]), 1e-12);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
    }
}
