//! Lanczos iteration with full reorthogonalisation for the top eigenvalues of
//! a sparse sample. Only matrix-vector products touch the matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tridiag::Tridiagonal;
use crate::ensemble::MatrixSample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Residual norm `|β_m s_{m,i}|` accepted for each wanted Ritz pair.
    pub tol: f64,
    /// Upper bound on the Krylov dimension.
    pub max_dim: usize,
    /// Convergence is tested every `check_every` steps.
    pub check_every: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_dim: 1000,
            check_every: 10,
            seed: 0x1a2c_2052,
        }
    }
}

/// Top `k` eigenvalues of `sample` in descending order.
pub fn top_eigenvalues(sample: &MatrixSample, k: usize, options: &LanczosOptions) -> Result<Vec<f64>> {
    let n = sample.n();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("asked for {k} eigenvalues of a {n}×{n} matrix")));
    }
    let max_dim = options.max_dim.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ sample.seed());
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alpha = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);

    let mut q = random_unit(n, &mut rng, &basis);
    let mut w = vec![0.0; n];
    loop {
        sample.matvec(&q, &mut w);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q);
        // full reorthogonalisation, twice
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);
        let dim = basis.len();
        let done = dim == max_dim;
        if done || dim.is_multiple_of(options.check_every) || b <= 1e-14 {
            let t = Tridiagonal::new(alpha.clone(), beta.clone())?;
            let (values, rows) = t.ql(&[dim - 1])?;
            let wanted = k.min(dim);
            // At a breakdown every Ritz value of the block is exact, but further
            // copies of a repeated eigenvalue may lie outside it.
            let converged = b > 1e-14 && dim >= k && (0..wanted).all(|i| (b * rows[0][i]).abs() <= options.tol);
            if converged || dim == n {
                return Ok(values[..k].to_vec());
            }
            if done {
                return Err(Error::Eigen(format!(
                    "Lanczos did not converge to {k} eigenvalues within dimension {max_dim}"
                )));
            }
        }
        if b <= 1e-14 {
            // invariant subspace: continue in its complement
            beta.push(0.0);
            q = random_unit(n, &mut rng, &basis);
        } else {
            beta.push(b);
            q = w.iter().map(|x| x / b).collect();
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    for _ in 0..2 {
        for u in basis {
            let c = dot(&v, u);
            axpy(-c, u, &mut v);
        }
    }
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
