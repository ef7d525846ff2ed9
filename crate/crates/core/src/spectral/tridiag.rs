//! Householder reduction to tridiagonal form, implicit-shift QL and Sturm
//! sequence counting. Used as an independent check of the dense solver and as
//! the small projected problem inside Lanczos.

use crate::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e.len() == d.len() - 1`, or both empty).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

const QL_MAX_SWEEPS: usize = 60;

impl Tridiagonal {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if !(d.is_empty() && e.is_empty()) && e.len() + 1 != d.len() {
            return Err(Error::InvalidArgument(format!(
                "off-diagonal has length {} for diagonal of length {}",
                e.len(),
                d.len()
            )));
        }
        Ok(Self { d, e })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Reduces a dense symmetric row-major matrix by Householder reflections.
    pub fn from_dense(dense: &[f64], n: usize) -> Self {
        assert_eq!(dense.len(), n * n);
        let mut a = dense.to_vec();
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        for k in 0..n.saturating_sub(2) {
            let lo = k + 1;
            let alpha_sq: f64 = (lo..n).map(|i| a[i * n + k] * a[i * n + k]).sum();
            let norm = alpha_sq.sqrt();
            if norm == 0.0 {
                continue;
            }
            let x0 = a[lo * n + k];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            for i in lo..n {
                v[i] = a[i * n + k];
            }
            v[lo] -= alpha;
            let vnorm_sq: f64 = (lo..n).map(|i| v[i] * v[i]).sum();
            if vnorm_sq == 0.0 {
                continue;
            }
            let beta = 2.0 / vnorm_sq;
            for i in lo..n {
                let row = &a[i * n..(i + 1) * n];
                p[i] = beta * (lo..n).map(|j| row[j] * v[j]).sum::<f64>();
            }
            let pv: f64 = (lo..n).map(|i| p[i] * v[i]).sum();
            let half = 0.5 * beta * pv;
            for i in lo..n {
                p[i] -= half * v[i];
            }
            for i in lo..n {
                for j in lo..n {
                    a[i * n + j] -= v[i] * p[j] + p[i] * v[j];
                }
            }
            a[lo * n + k] = alpha;
            a[k * n + lo] = alpha;
            for i in lo + 1..n {
                a[i * n + k] = 0.0;
                a[k * n + i] = 0.0;
            }
        }
        let d = (0..n).map(|i| a[i * n + i]).collect();
        let e = (0..n.saturating_sub(1)).map(|i| a[(i + 1) * n + i]).collect();
        Self { d, e }
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.d.len() {
            let coupling = if i == 0 { 0.0 } else { self.e[i - 1] * self.e[i - 1] / q };
            q = self.d[i] - x - coupling;
            if q == 0.0 {
                q = -f64::EPSILON * (self.d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Number of eigenvalues in `[a, b)`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.count_below(b).saturating_sub(self.count_below(a))
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th largest eigenvalue (`k = 0` is the largest) by bisection.
    pub fn kth_largest(&self, k: usize) -> f64 {
        let n = self.d.len();
        assert!(k < n);
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs()) + 1.0);
        lo -= pad;
        hi += pad;
        // smallest x with count_below(x) ≥ n - k
        let target = n - k;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Largest `k` eigenvalues in descending order by bisection.
    pub fn top_by_bisection(&self, k: usize) -> Vec<f64> {
        (0..k.min(self.len())).map(|i| self.kth_largest(i)).collect()
    }

    /// All eigenvalues, descending, by implicit QL.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.ql(&[])?.0)
    }

    /// Implicit-shift QL. Returns eigenvalues in descending order together with
    /// the requested rows of the eigenvector matrix (`rows[r][k]` is component
    /// `tracked[r]` of the eigenvector for eigenvalue `k`).
    pub fn ql(&self, tracked: &[usize]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.d.len();
        let mut d = self.d.clone();
        let mut e = self.e.clone();
        e.push(0.0);
        let mut z: Vec<Vec<f64>> = tracked
            .iter()
            .map(|&t| {
                let mut row = vec![0.0; n];
                row[t] = 1.0;
                row
            })
            .collect();
        let eps = f64::EPSILON;
        let mut f = 0.0;
        let mut tst1: f64 = 0.0;
        for l in 0..n {
            tst1 = tst1.max(d[l].abs() + e[l].abs());
            let mut m = l;
            while m < n {
                if e[m].abs() <= eps * tst1 {
                    break;
                }
                m += 1;
            }
            if m > l {
                let mut sweeps = 0;
                loop {
                    sweeps += 1;
                    if sweeps > QL_MAX_SWEEPS {
                        return Err(Error::Eigen(format!(
                            "implicit QL did not converge for eigenvalue {l} within {QL_MAX_SWEEPS} sweeps"
                        )));
                    }
                    let g = d[l];
                    let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                    let mut r = p.hypot(1.0);
                    if p < 0.0 {
                        r = -r;
                    }
                    d[l] = e[l] / (p + r);
                    d[l + 1] = e[l] * (p + r);
                    let dl1 = d[l + 1];
                    let mut h = g - d[l];
                    for di in d.iter_mut().take(n).skip(l + 2) {
                        *di -= h;
                    }
                    f += h;

                    p = d[m];
                    let mut c = 1.0;
                    let mut c2 = c;
                    let mut c3 = c;
                    let el1 = e[l + 1];
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    for i in (l..m).rev() {
                        c3 = c2;
                        c2 = c;
                        s2 = s;
                        let g = c * e[i];
                        h = c * p;
                        r = p.hypot(e[i]);
                        e[i + 1] = s * r;
                        s = e[i] / r;
                        c = p / r;
                        p = c * d[i] - s * g;
                        d[i + 1] = h + s * (c * g + s * d[i]);
                        for row in z.iter_mut() {
                            let h = row[i + 1];
                            row[i + 1] = s * row[i] + c * h;
                            row[i] = c * row[i] - s * h;
                        }
                    }
                    p = -s * s2 * c3 * el1 * e[l] / dl1;
                    e[l] = s * p;
                    d[l] = c * p;
                    if e[l].abs() <= eps * tst1 {
                        break;
                    }
                }
            }
            d[l] += f;
            e[l] = 0.0;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        let values = order.iter().map(|&k| d[k]).collect();
        let rows = z.iter().map(|row| order.iter().map(|&k| row[k]).collect()).collect();
        Ok((values, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toeplitz(n: usize) -> Tridiagonal {
        Tridiagonal::new(vec![0.0; n], vec![1.0; n - 1]).unwrap()
    }

    /// Eigenvalues 2 cos(kπ/(n+1)) of the path-graph adjacency.
    fn path_eigs(n: usize) -> Vec<f64> {
        (1..=n)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect()
    }

    #[test]
    fn ql_matches_path_graph() {
        let t = toeplitz(30);
        let got = t.eigenvalues().unwrap();
        for (a, b) in got.iter().zip(path_eigs(30)) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn bisection_matches_ql() {
        let t = Tridiagonal::new(vec![0.3, -1.0, 2.0, 0.5, 0.1], vec![0.2, 1.1, -0.4, 0.9]).unwrap();
        let ql = t.eigenvalues().unwrap();
        let bis = t.top_by_bisection(5);
        for (a, b) in ql.iter().zip(&bis) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sturm_counts() {
        let t = toeplitz(10);
        assert_eq!(t.count_below(-3.0), 0);
        assert_eq!(t.count_below(3.0), 10);
        assert_eq!(t.count_in(0.0, 3.0), 5);
    }

    #[test]
    fn householder_preserves_spectrum() {
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0;
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let t = Tridiagonal::from_dense(&a, n);
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let frob: f64 = a.iter().map(|v| v * v).sum();
        let eig = t.eigenvalues().unwrap();
        assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-12);
        assert!((eig.iter().map(|v| v * v).sum::<f64>() - frob).abs() < 1e-11);
    }

    #[test]
    fn tracked_rows_give_eigenvectors() {
        let t = toeplitz(8);
        let all: Vec<usize> = (0..8).collect();
        let (vals, rows) = t.ql(&all).unwrap();
        for k in 0..8 {
            // T v = λ v
            for i in 0..8 {
                let mut tv = 0.0;
                if i > 0 {
                    tv += rows[i - 1][k];
                }
                if i + 1 < 8 {
                    tv += rows[i + 1][k];
                }
                assert!((tv - vals[k] * rows[i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_sizes() {
        let t = Tridiagonal::new(vec![], vec![]).unwrap();
        assert!(t.eigenvalues().unwrap().is_empty());
        let t = Tridiagonal::new(vec![4.0], vec![]).unwrap();
        assert_eq!(t.eigenvalues().unwrap(), vec![4.0]);
        assert!(Tridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
    }
}
