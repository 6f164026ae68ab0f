//! Matrix exponentials: a Lanczos approximation of `e^{-tS} v` for large
//! sparse `S`, and scaling-and-squaring for small dense matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use super::sparse::{dot, norm, SparseSym};
use crate::error::{Error, Result};

const KRYLOV_DIM: usize = 40;

/// One Lanczos step `e^{-hS} v`, returning the approximation and an
/// a-posteriori error estimate.
fn lanczos_step(s: &SparseSym, v: &[f64], h: f64) -> (Vec<f64>, f64) {
    let n = s.len();
    let beta0 = norm(v);
    let m_max = KRYLOV_DIM.min(n);
    let mut basis: Vec<Vec<f64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; n];
    let mut breakdown = false;
    for j in 0..m_max {
        s.matvec(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // Full reorthogonalization.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(w, q)| *w -= c * q);
            }
        }
        let b = norm(&w);
        if b <= 1e-14 * beta0.max(a.abs()) || j + 1 == m_max {
            beta.push(b);
            breakdown = b <= 1e-14 * beta0.max(a.abs());
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    // c = e^{-hT} e_1
    let mut c = vec![0.0; m];
    for k in 0..m {
        let weight = (-h * eig.eigenvalues[k]).exp() * eig.eigenvectors[(0, k)];
        for i in 0..m {
            c[i] += eig.eigenvectors[(i, k)] * weight;
        }
    }
    let mut out = vec![0.0; n];
    for (q, ci) in basis.iter().zip(&c) {
        out.iter_mut().zip(q).for_each(|(o, q)| *o += beta0 * ci * q);
    }
    let error = if breakdown {
        0.0
    } else {
        beta0 * beta[m - 1] * c[m - 1].abs()
    };
    (out, error)
}

/// `e^{-tS} v` for symmetric positive semidefinite `S`, by adaptive
/// substepping of Lanczos approximations.
pub fn krylov_heat(s: &SparseSym, v: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    let mut current = v.to_vec();
    let mut remaining = t;
    let mut step = t;
    let mut steps = 0;
    while remaining > 0.0 {
        if norm(&current) == 0.0 {
            break;
        }
        let h = step.min(remaining);
        let (next, error) = lanczos_step(s, &current, h);
        if error <= tol * norm(&current).max(1e-300) {
            current = next;
            remaining -= h;
            step = h * 1.5;
            steps += 1;
        } else {
            step = h / 2.0;
            if step < t * 1e-12 {
                return Err(Error::NoConvergence {
                    method: "Krylov exponential",
                    iterations: steps,
                    residual: error,
                });
            }
        }
    }
    Ok(current)
}

/// `e^{B}` for a small dense matrix by scaling and squaring a degree-18
/// Taylor polynomial.
pub fn dense_expm(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let norm1 = (0..n)
        .map(|j| b.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = b / 2f64.powi(squarings);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
