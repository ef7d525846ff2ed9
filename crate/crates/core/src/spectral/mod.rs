//! Eigenvalues, the empirical Stieltjes transform and exact resolvent checks.

pub mod lanczos;
pub mod tridiag;

use std::io::Write;
use std::sync::Once;

use faer::{Mat, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::MatrixSample;
use crate::numeric::{ComplexSum, KahanSum};
use crate::{Error, Result};

pub use lanczos::LanczosOptions;
pub use tridiag::Tridiagonal;

/// Largest dimension accepted by the dense path.
pub const MAX_DENSE_N: usize = 8192;

/// Eigenvalues in non-increasing order, optionally with eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    eigenvalues: Vec<f64>,
    /// Row-major: `vectors[i * n + k]` is component `i` of eigenvector `k`.
    vectors: Option<Vec<f64>>,
}

impl SpectrumResult {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self {
            eigenvalues,
            vectors: None,
        }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> Option<&[f64]> {
        self.vectors.as_deref()
    }

    pub fn top(&self, k: usize) -> &[f64] {
        &self.eigenvalues[..k.min(self.n())]
    }

    /// Number of eigenvalues in `[a, b)`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l >= a && l < b).count()
    }

    /// `max |H - V Λ Vᵀ|` over entries; needs eigenvectors.
    pub fn reconstruction_error(&self, sample: &MatrixSample) -> Option<f64> {
        let v = self.vectors.as_ref()?;
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = KahanSum::new();
                for k in 0..n {
                    acc.add(v[i * n + k] * self.eigenvalues[k] * v[j * n + k]);
                }
                worst = worst.max((acc.value() - sample.get(i, j)).abs());
            }
        }
        Some(worst)
    }

    /// Writes `schema_version`, then `index,eigenvalue` rows (1-based index).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "schema_version,1")?;
        writeln!(w, "index,eigenvalue")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{:e}", i + 1, l)?;
        }
        Ok(())
    }
}

static SEQUENTIAL_FAER: Once = Once::new();

/// Full spectrum by dense diagonalisation. Parallelism lives across matrices,
/// so the solver itself runs on one thread.
pub fn eigen(sample: &MatrixSample, want_vectors: bool) -> Result<SpectrumResult> {
    let n = sample.n();
    if n > MAX_DENSE_N {
        return Err(Error::InvalidArgument(format!(
            "dense eigensolver limited to N ≤ {MAX_DENSE_N}, got {n}"
        )));
    }
    SEQUENTIAL_FAER.call_once(|| faer::set_global_parallelism(Par::Seq));
    let dense = sample.to_dense();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| dense[i * n + j]);
    let fail = |reason: String| -> Error {
        let path = std::env::temp_dir().join(format!("sparse-edge-eigen-{:016x}.bin", sample.seed()));
        let dumped = std::fs::File::create(&path)
            .map_err(Error::from)
            .and_then(|f| sample.write_binary(std::io::BufWriter::new(f)));
        match dumped {
            Ok(()) => Error::Eigen(format!("{reason}; matrix written to {}", path.display())),
            Err(e) => Error::Eigen(format!("{reason}; matrix dump failed: {e}")),
        }
    };
    if !want_vectors {
        let values = mat
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| fail(format!("dense eigensolver failed: {e:?}")))?;
        return Ok(SpectrumResult::from_eigenvalues(values));
    }
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| fail(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer sorts ascending; reverse to descending
    let eigenvalues: Vec<f64> = (0..n).rev().map(|k| s[k]).collect();
    let mut vectors = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            vectors[i * n + k] = u[(i, n - 1 - k)];
        }
    }
    Ok(SpectrumResult {
        eigenvalues,
        vectors: Some(vectors),
    })
}

/// Full spectrum through the crate's own Householder + QL route.
pub fn eigenvalues_by_tridiagonal(sample: &MatrixSample) -> Result<SpectrumResult> {
    let t = Tridiagonal::from_dense(&sample.to_dense(), sample.n());
    Ok(SpectrumResult::from_eigenvalues(t.eigenvalues()?))
}

/// How the top eigenvalues of a sample are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Lanczos,
    Bisection,
}

impl std::str::FromStr for EigenMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(Self::Dense),
            "lanczos" => Ok(Self::Lanczos),
            "bisection" => Ok(Self::Bisection),
            other => Err(Error::InvalidArgument(format!(
                "unknown eigen method '{other}' (expected dense, lanczos or bisection)"
            ))),
        }
    }
}

/// Largest `k` eigenvalues, descending.
pub fn top_eigenvalues(sample: &MatrixSample, k: usize, method: EigenMethod) -> Result<Vec<f64>> {
    let k = k.min(sample.n());
    match method {
        EigenMethod::Dense => Ok(eigen(sample, false)?.top(k).to_vec()),
        EigenMethod::Lanczos => lanczos::top_eigenvalues(sample, k, &LanczosOptions::default()),
        EigenMethod::Bisection => {
            Ok(Tridiagonal::from_dense(&sample.to_dense(), sample.n()).top_by_bisection(k))
        }
    }
}

/// `m(z) = (1/N) Σ 1/(λ_i - z)`.
pub fn empirical_stieltjes(spectrum: &SpectrumResult, z: Complex64) -> Complex64 {
    let mut acc = ComplexSum::new();
    for &l in spectrum.eigenvalues() {
        acc.add((Complex64::new(l, 0.0) - z).inv());
    }
    acc.value() / spectrum.n() as f64
}

/// Green function `G(z) = (H - z)^{-1}` assembled from an eigendecomposition.
pub struct Resolvent<'a> {
    spectrum: &'a SpectrumResult,
    vectors: &'a [f64],
    z: Complex64,
    weights: Vec<Complex64>,
}

impl<'a> Resolvent<'a> {
    pub fn new(spectrum: &'a SpectrumResult, z: Complex64) -> Result<Self> {
        let vectors = spectrum
            .vectors()
            .ok_or_else(|| Error::InvalidArgument("resolvent needs eigenvectors".into()))?;
        if z.im.is_nan() || z.im <= 0.0 {
            return Err(Error::InvalidArgument(format!("resolvent needs Im z > 0, got {z}")));
        }
        let weights = spectrum
            .eigenvalues()
            .iter()
            .map(|&l| (Complex64::new(l, 0.0) - z).inv())
            .collect();
        Ok(Self {
            spectrum,
            vectors,
            z,
            weights,
        })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    /// Row `i` of `G`.
    pub fn row(&self, i: usize) -> Vec<Complex64> {
        let n = self.spectrum.n();
        let vi = &self.vectors[i * n..(i + 1) * n];
        let scaled: Vec<Complex64> = vi.iter().zip(&self.weights).map(|(v, w)| w * v).collect();
        (0..n)
            .map(|l| {
                let vl = &self.vectors[l * n..(l + 1) * n];
                let mut acc = ComplexSum::new();
                for (s, v) in scaled.iter().zip(vl) {
                    acc.add(s * v);
                }
                acc.value()
            })
            .collect()
    }
}

/// `|Σ_l |G_il|² - Im G_ii / η|`.
pub fn ward_residual(spectrum: &SpectrumResult, z: Complex64, row: usize) -> Result<f64> {
    let g = Resolvent::new(spectrum, z)?.row(row);
    let lhs: f64 = g.iter().map(|x| x.norm_sqr()).collect::<KahanSum>().value();
    Ok((lhs - g[row].im / z.im).abs())
}

/// Upper bound accepted for [`ward_residual`].
pub fn ward_contract(eta: f64) -> f64 {
    1e-8 / (eta * eta)
}

/// Ward identity check from a fresh eigendecomposition.
pub fn check_ward(sample: &MatrixSample, z: Complex64, row: usize) -> Result<f64> {
    let spectrum = eigen(sample, true)?;
    ward_residual(&spectrum, z, row)
}

/// `|G_ii - m - (G_ii/N) Σ_{x,y} h_xy G_yx + m Σ_x h_ix G_xi|`, every sum
/// evaluated from explicit resolvent entries.
pub fn resolvent_identity_residual(
    sample: &MatrixSample,
    spectrum: &SpectrumResult,
    z: Complex64,
    i: usize,
) -> Result<f64> {
    let n = sample.n();
    if i >= n {
        return Err(Error::InvalidArgument(format!("row {i} out of range for N = {n}")));
    }
    let resolvent = Resolvent::new(spectrum, z)?;
    let rows: Vec<Vec<Complex64>> = (0..n).map(|x| resolvent.row(x)).collect();
    let nf = n as f64;

    let mut trace = ComplexSum::new();
    for (x, row) in rows.iter().enumerate() {
        trace.add(row[x]);
    }
    let m = trace.value() / nf;

    // Σ_{x,y} h_xy G_yx with h = background + sparse deltas
    let bg = sample.background();
    let mut h_g = ComplexSum::new();
    if bg != 0.0 {
        for row in &rows {
            for g in row {
                h_g.add(bg * g);
            }
        }
    }
    for &(x, y, v) in sample.upper_entries() {
        let (x, y) = (x as usize, y as usize);
        let delta = v - bg;
        h_g.add(delta * rows[y][x]);
        if x != y {
            h_g.add(delta * rows[x][y]);
        }
    }

    // Σ_x h_ix G_xi
    let mut h_row = ComplexSum::new();
    for (x, row) in rows.iter().enumerate() {
        h_row.add(sample.get(i, x) * row[i]);
    }

    let gii = rows[i][i];
    let rhs = m + gii / nf * h_g.value() - m * h_row.value();
    Ok((gii - rhs).norm())
}

/// Upper bound accepted for [`resolvent_identity_residual`].
pub fn resolvent_contract(eta: f64) -> f64 {
    1e-9 * (1.0 + 1.0 / (eta * eta))
}

/// Resolvent identity check from a fresh eigendecomposition.
pub fn check_resolvent_identity(sample: &MatrixSample, z: Complex64, i: usize) -> Result<f64> {
    let spectrum = eigen(sample, true)?;
    resolvent_identity_residual(sample, &spectrum, z, i)
}
