use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Relative residual target of the iterative solver.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
///
/// Stops when `|b - a x| <= tol |b|`; the iteration cap is `20 * dim`.
pub fn sparse_solve(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    pcg(a, b, None, tol).map(|(x, _)| x)
}

/// As [`sparse_solve`], starting from `guess` when given.
pub fn pcg(a: &CsrMatrix, b: &[f64], guess: Option<&[f64]>, tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Dimension(format!("rhs has length {}, matrix has dimension {n}", b.len())));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().into_iter().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    a.mul_vec_into(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let target = tol * b_norm;
    let mut res = norm(&r);
    if res <= target {
        return Ok((x, SolveStats { iterations: 0, relative_residual: res / b_norm }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 20 * n.max(1);
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem(format!("p^T A p = {pap:e} in conjugate gradients")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r);
        if res <= target {
            return Ok((x, SolveStats { iterations: it, relative_residual: res / b_norm }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: res / b_norm })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(5);
        assert_eq!(sparse_solve(&a, &[0.0; 5], 1e-10).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(4);
        let b = [1.0, -2.0, 3.5, 0.25];
        let x = sparse_solve(&a, &b, 1e-10).unwrap();
        for (xi, bi) in x.iter().zip(b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn random_spd_matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let n = 50;
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let spd = &g * g.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = CsrMatrix::from_dense(&spd);
        let (x, stats) = pcg(&a, &b, None, 1e-10).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| spd[(i, j)]).collect()).collect();
        let oracle = dense_solve(rows, b);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-8, "{xi} vs {oi}");
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let a = CsrMatrix::from_dense(&d);
        assert!(pcg(&a, &[0.0, 1.0], None, 1e-10).is_err());
    }
}
