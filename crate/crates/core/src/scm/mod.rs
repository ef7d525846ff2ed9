//! Self-consistent model built from a set of correction terms.
//!
//! With `Q(w) = Σ_n Z_n w^{2n}` the self-consistent polynomial is
//! `P(z, w) = 1 + z w + Q(w)`. Solving `P(z, w) = 0` for `z` gives
//!
//! ```text
//! R(w) = -1/w - w - (Z_1 - 1) w - Σ_{n≥2} Z_n w^{2n-1},
//! ```
//!
//! whose critical point `τ` near 1 fixes the right edge `L̃ = R(-τ)` of the
//! deterministic-equivalent measure. `L̂` is the same edge evaluated at the
//! truncated expansion `τ ≈ 1 - ε_0 - ε_1 - …`, which is polynomial in the `Z_n`
//! to the order kept.
//!
//! The Stieltjes transform `m̃(z)` is the root of `P(z, ·)` reached by
//! continuation from `w ≈ -1/z` at large `Im z`.

pub mod poly;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::corrections::CorrectionSet;
use crate::{Error, Result};

/// Largest `|Z_1 - 1|` and `|Z_n|` (`n ≥ 2`) accepted by [`build`].
pub const PERTURBATIVE_WINDOW: f64 = 0.5;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
/// Bisection is accepted when `|R'(τ)|` drops below this.
const CRITICAL_POINT_TOL: f64 = 1e-10;

/// Imaginary part where branch continuation starts.
pub const CONTINUATION_START: f64 = 1e6;
/// Default number of η steps per decade along the continuation path.
const STEPS_PER_DECADE: f64 = 8.0;
const MAX_REFINEMENT: usize = 40;

pub const DEFAULT_ETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Number of expansion terms `ε_0, ε_1, …` used for `L̂` (default 2).
    pub series_depth: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { series_depth: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConsistentModel {
    z: Vec<f64>,
    tau: f64,
    edge_root: f64,
    edge_series: f64,
    eps: Vec<f64>,
}

/// Builds the model with default options.
pub fn build(corrections: &CorrectionSet) -> Result<SelfConsistentModel> {
    SelfConsistentModel::build(&corrections.z, BuildOptions::default())
}

impl SelfConsistentModel {
    pub fn build(z: &[f64], options: BuildOptions) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::DegenerateModel("no correction terms".into()));
        }
        if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateModel(format!("non-finite correction {bad}")));
        }
        if (z[0] - 1.0).abs() > PERTURBATIVE_WINDOW {
            return Err(Error::DegenerateModel(format!(
                "Z_1 = {} is outside 1 ± {PERTURBATIVE_WINDOW}",
                z[0]
            )));
        }
        if let Some((k, v)) = z.iter().enumerate().skip(1).find(|(_, v)| v.abs() > PERTURBATIVE_WINDOW) {
            return Err(Error::DegenerateModel(format!(
                "|Z_{}| = {} exceeds {PERTURBATIVE_WINDOW}",
                k + 1,
                v.abs()
            )));
        }
        let mut model = Self {
            z: z.to_vec(),
            tau: f64::NAN,
            edge_root: f64::NAN,
            edge_series: f64::NAN,
            eps: Vec::new(),
        };
        model.tau = model.solve_tau()?;
        model.edge_root = model.r(-model.tau);
        model.eps = model.series_terms(options.series_depth.max(1));
        let tau_hat = 1.0 - model.eps.iter().sum::<f64>();
        model.edge_series = model.r(-tau_hat);
        Ok(model)
    }

    /// The semicircle model `Q(w) = w²`.
    pub fn semicircle() -> Self {
        Self::build(&[1.0], BuildOptions::default()).expect("semicircle model")
    }

    pub fn corrections(&self) -> &[f64] {
        &self.z
    }

    pub fn ell(&self) -> usize {
        self.z.len()
    }

    /// Positive critical point of `R`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Root-found edge `L̃ = R(-τ)`.
    pub fn edge_root(&self) -> f64 {
        self.edge_root
    }

    /// Series edge `L̂ = R(-(1 - Σ ε_m))`.
    pub fn edge_series(&self) -> f64 {
        self.edge_series
    }

    /// Expansion terms `ε_0, ε_1, …` behind [`Self::edge_series`].
    pub fn series_terms_used(&self) -> &[f64] {
        &self.eps
    }

    /// `|L̃ - L̂|`.
    pub fn edge_discrepancy(&self) -> f64 {
        (self.edge_root - self.edge_series).abs()
    }

    /// Size of the corrections, `|Z_1 - 1| + Σ_{n≥2} |Z_n|`.
    pub fn correction_size(&self) -> f64 {
        (self.z[0] - 1.0).abs() + self.z[1..].iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `R(w)` on the real line.
    pub fn r(&self, w: f64) -> f64 {
        let mut acc = -1.0 / w - w - (self.z[0] - 1.0) * w;
        for (k, zn) in self.z.iter().enumerate().skip(1) {
            let n = k as i32 + 1;
            acc -= zn * w.powi(2 * n - 1);
        }
        acc
    }

    /// `R'(w)`.
    pub fn r_prime(&self, w: f64) -> f64 {
        let mut acc = 1.0 / (w * w) - self.z[0];
        for (k, zn) in self.z.iter().enumerate().skip(1) {
            let n = k as i32 + 1;
            acc -= f64::from(2 * n - 1) * zn * w.powi(2 * n - 2);
        }
        acc
    }

    /// `R''(w)`.
    pub fn r_second(&self, w: f64) -> f64 {
        let mut acc = -2.0 / (w * w * w);
        for (k, zn) in self.z.iter().enumerate().skip(1) {
            let n = k as i32 + 1;
            acc -= f64::from((2 * n - 1) * (2 * n - 2)) * zn * w.powi(2 * n - 3);
        }
        acc
    }

    fn solve_tau(&self) -> Result<f64> {
        let mut w = 1.0;
        for _ in 0..NEWTON_MAX_ITER {
            let d = self.r_prime(w);
            if d.abs() <= NEWTON_TOL {
                if w > 0.5 && w < 1.5 {
                    return Ok(w);
                }
                break;
            }
            let step = d / self.r_second(w);
            if !step.is_finite() {
                break;
            }
            w -= step;
        }
        self.bisect_tau()
    }

    fn bisect_tau(&self) -> Result<f64> {
        let (mut lo, mut hi) = (0.5, 1.5);
        let (f_lo, f_hi) = (self.r_prime(lo), self.r_prime(hi));
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::DegenerateModel(format!(
                "R' has no sign change on [0.5, 1.5] (R'(0.5) = {f_lo}, R'(1.5) = {f_hi})"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.r_prime(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        let tau = 0.5 * (lo + hi);
        if self.r_prime(tau).abs() > CRITICAL_POINT_TOL {
            return Err(Error::DegenerateModel(format!(
                "critical point not resolved: |R'(τ)| = {}",
                self.r_prime(tau).abs()
            )));
        }
        Ok(tau)
    }

    /// `ε_0`, `ε_1` as obtained by cancelling successive orders of `R'(1 - ε)`,
    /// then (for `depth > 2`) further terms `ε_m = -R'(1 - Σ_{<m} ε)/2`.
    fn series_terms(&self, depth: usize) -> Vec<f64> {
        let z1 = self.z[0];
        let weighted: f64 = self
            .z
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, zn)| (2 * k + 1) as f64 * zn)
            .sum();
        let eps0 = 0.5 * ((z1 - 1.0) + weighted);
        let mut eps = vec![eps0];
        if depth >= 2 {
            let shift: f64 = self
                .z
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, zn)| {
                    let n = k as i32 + 1;
                    f64::from(2 * n - 1) * zn * ((1.0 - eps0).powi(2 * n - 2) - 1.0)
                })
                .sum();
            // ε_0² + ε_0³ + … summed in closed form
            let geometric = eps0 * eps0 / (1.0 - eps0);
            eps.push(0.5 * shift - geometric);
        }
        while eps.len() < depth {
            let w = 1.0 - eps.iter().sum::<f64>();
            eps.push(-0.5 * self.r_prime(w));
        }
        eps
    }

    /// Distance from `x` to the edge set `{-L̃, L̃}`.
    pub fn kappa(&self, x: f64) -> f64 {
        (x.abs() - self.edge_root).abs()
    }

    /// Ascending coefficients of `w ↦ P(z, w)`.
    pub fn p_coefficients(&self, z: Complex64) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * self.z.len() + 1];
        c[0] = Complex64::new(1.0, 0.0);
        c[1] = z;
        for (k, zn) in self.z.iter().enumerate() {
            c[2 * (k + 1)] += Complex64::new(*zn, 0.0);
        }
        c
    }

    /// `P(z, w)`.
    pub fn p(&self, z: Complex64, w: Complex64) -> Complex64 {
        poly::eval(&self.p_coefficients(z), w)
    }

    /// `∂_w P(z, w) = z + Σ 2n Z_n w^{2n-1}`.
    pub fn dp_dw(&self, z: Complex64, w: Complex64) -> Complex64 {
        let mut acc = z;
        for (k, zn) in self.z.iter().enumerate() {
            let n = k as i32 + 1;
            acc += f64::from(2 * n) * zn * w.powi(2 * n - 1);
        }
        acc
    }

    /// `∂²_w P(z, w) = Σ 2n(2n-1) Z_n w^{2n-2}`.
    pub fn d2p_dw2(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, zn) in self.z.iter().enumerate() {
            let n = k as i32 + 1;
            acc += f64::from(2 * n * (2 * n - 1)) * zn * w.powi(2 * n - 2);
        }
        acc
    }

    /// `m̃(z)` on the Stieltjes branch.
    pub fn stieltjes(&self, z: Complex64) -> Result<StieltjesPoint> {
        if z.im.is_nan() || z.im <= 0.0 || !z.re.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Stieltjes transform needs Im z > 0, got {z}"
            )));
        }
        let branch_err = |reason: String| Error::Branch {
            re: z.re,
            im: z.im,
            reason,
        };
        let start_eta = CONTINUATION_START.max(z.im);
        let z0 = Complex64::new(z.re, start_eta);
        let mut roots = poly::roots(&self.p_coefficients(z0), None);
        if roots.is_empty() {
            return Err(branch_err("P(z, ·) has no roots".into()));
        }
        let target = -z0.inv();
        let mut current = nearest(&roots, target).0;
        let mut w = roots[current];

        let ratio = 10f64.powf(-1.0 / STEPS_PER_DECADE);
        let mut eta = start_eta;
        while eta > z.im {
            let next = (eta * ratio).max(z.im);
            let (r, idx) = self.advance(z.re, eta, next, &roots, w, 0).map_err(branch_err)?;
            roots = r;
            current = idx;
            w = roots[current];
            eta = next;
        }

        let coeffs = self.p_coefficients(z);
        let w = poly::polish(&coeffs, w, 8);
        if w.im.is_nan() || w.im <= 0.0 {
            return Err(branch_err(format!("tracked root {w} left the upper half-plane")));
        }
        Ok(StieltjesPoint {
            z,
            w,
            residual: poly::eval(&coeffs, w).norm(),
        })
    }

    /// One continuation step `eta_from -> eta_to`, halving the step while the
    /// tracked root is ambiguous.
    fn advance(
        &self,
        x: f64,
        eta_from: f64,
        eta_to: f64,
        roots: &[Complex64],
        w: Complex64,
        depth: usize,
    ) -> std::result::Result<(Vec<Complex64>, usize), String> {
        let z = Complex64::new(x, eta_to);
        let next = poly::roots(&self.p_coefficients(z), Some(roots));
        let (idx, d1, d2) = nearest(&next, w);
        let ambiguous = d2.is_finite() && d1 > 0.0 && d2 < 3.0 * d1;
        if !ambiguous {
            return Ok((next, idx));
        }
        if depth >= MAX_REFINEMENT {
            return Err(format!(
                "two roots within path resolution at Im z = {eta_to:e} (distances {d1:e}, {d2:e})"
            ));
        }
        let mid = (eta_from * eta_to).sqrt();
        let (mid_roots, mid_idx) = self.advance(x, eta_from, mid, roots, w, depth + 1)?;
        self.advance(x, mid, eta_to, &mid_roots, mid_roots[mid_idx], depth + 1)
    }

    /// `m̃(z)` only.
    pub fn m_tilde(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.stieltjes(z)?.w)
    }

    /// η-regularised density `Im m̃(x + i η) / π`.
    pub fn density(&self, x: f64, eta_floor: f64) -> Result<f64> {
        if !(1e-9..=1e-3).contains(&eta_floor) {
            return Err(Error::InvalidArgument(format!(
                "eta_floor = {eta_floor} must lie in [1e-9, 1e-3]"
            )));
        }
        Ok(self.m_tilde(Complex64::new(x, eta_floor))?.im / std::f64::consts::PI)
    }

    /// Control parameter `φ(z)`: `sqrt(κ+η)` inside `[-L̃, L̃]`, `η/sqrt(κ+η)` outside.
    pub fn control_phi(&self, z: Complex64) -> f64 {
        let kappa = self.kappa(z.re);
        let eta = z.im;
        let root = (kappa + eta).sqrt();
        if z.re.abs() <= self.edge_root {
            root
        } else {
            eta / root
        }
    }

    /// Right-hand side of the local-law bound at `z` for dimension `n`.
    pub fn local_law_rhs(&self, z: Complex64, n: usize) -> f64 {
        local_law_rhs(self.control_phi(z), self.kappa(z.re), z.im, n as f64)
    }
}

/// Nine-term local-law bound as a function of `φ`, `κ`, `η`, `N`.
pub fn local_law_rhs(phi: f64, kappa: f64, eta: f64, n: f64) -> f64 {
    let n_eta = n * eta;
    let root = (kappa + eta).sqrt();
    let a = phi / n_eta;
    (a).powf(0.5)
        + root.powf(0.25) * a.powf(3.0 / 8.0)
        + n.powf(-0.25) * a.powf(1.0 / 8.0)
        + root.powf(0.25) * (phi / (n * n * eta * eta)).powf(0.25)
        + 1.0 / (n.sqrt() * eta.powf(0.25))
        + 1.0 / n_eta
        + root.powf(0.4) / n_eta.powf(0.6)
        + 1.0 / (n.powf(2.0 / 7.0) * n_eta.powf(1.0 / 7.0))
        + root.powf(1.0 / 3.0) / n_eta.powf(2.0 / 3.0)
}

/// Index of the root closest to `target`, with the closest and second
/// closest distances.
fn nearest(roots: &[Complex64], target: Complex64) -> (usize, f64, f64) {
    let mut best = (0usize, f64::INFINITY, f64::INFINITY);
    for (k, r) in roots.iter().enumerate() {
        let d = (r - target).norm();
        if d < best.1 {
            best = (k, d, best.1);
        } else if d < best.2 {
            best.2 = d;
        }
    }
    best
}

/// A point of `m̃` with the residual of the self-consistent equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesPoint {
    pub z: Complex64,
    pub w: Complex64,
    pub residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed-form τ and L̃ for Z = (1, z2): τ² solves 1 - u - 3 z2 u² = 0.
    fn quadratic_oracle(z2: f64) -> (f64, f64) {
        let u = (-1.0 + (1.0 + 12.0 * z2).sqrt()) / (6.0 * z2);
        let tau = u.sqrt();
        (tau, 1.0 / tau + tau + z2 * tau.powi(3))
    }

    #[test]
    fn semicircle_reduction() {
        let m = SelfConsistentModel::semicircle();
        assert_eq!(m.tau(), 1.0);
        assert!((m.edge_root() - 2.0).abs() < 1e-14);
        assert!((m.edge_series() - 2.0).abs() < 1e-14);
        let w = m.m_tilde(c(0.0, 1.0)).unwrap();
        assert!((w - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-12);
        let w = m.m_tilde(c(2.5, 1e-12)).unwrap();
        assert!((w - c(-0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn quartic_correction_matches_closed_form() {
        let m = SelfConsistentModel::build(&[1.0, 0.1], BuildOptions::default()).unwrap();
        let (tau, edge) = quadratic_oracle(0.1);
        // τ = sqrt((-1 + sqrt(2.2))/0.6)
        assert!((tau - ((-1.0 + 2.2f64.sqrt()) / 0.6).sqrt()).abs() < 1e-15);
        assert!((m.tau() - tau).abs() < 1e-12);
        assert!((m.edge_root() - edge).abs() < 1e-12);
        assert!((m.edge_root() - 2.084_000_308_225_272_5).abs() < 1e-12);
        assert!(m.r_prime(m.tau()).abs() <= 1e-10);
    }

    #[test]
    fn series_edge_tracks_root_edge_for_small_shift() {
        let m = SelfConsistentModel::build(&[1.02, 0.0], BuildOptions::default()).unwrap();
        assert!((m.series_terms_used()[0] - 0.01).abs() < 1e-15);
        assert!(m.edge_discrepancy() <= 1e-3);
    }

    #[test]
    fn deeper_series_does_not_degrade() {
        let z = [1.01, 0.06];
        let shallow = SelfConsistentModel::build(&z, BuildOptions { series_depth: 2 }).unwrap();
        let deep = SelfConsistentModel::build(&z, BuildOptions { series_depth: 6 }).unwrap();
        assert!(deep.edge_discrepancy() <= shallow.edge_discrepancy() + 1e-15);
    }

    #[test]
    fn rejects_corrections_outside_the_window() {
        assert!(SelfConsistentModel::build(&[1.7], BuildOptions::default()).is_err());
        assert!(SelfConsistentModel::build(&[1.0, 0.6], BuildOptions::default()).is_err());
        assert!(SelfConsistentModel::build(&[], BuildOptions::default()).is_err());
        assert!(SelfConsistentModel::build(&[f64::NAN], BuildOptions::default()).is_err());
    }

    #[test]
    fn stieltjes_requires_upper_half_plane() {
        let m = SelfConsistentModel::semicircle();
        assert!(m.stieltjes(c(0.3, 0.0)).is_err());
        assert!(m.stieltjes(c(0.3, -1.0)).is_err());
    }

    #[test]
    fn density_at_centre_and_outside() {
        let m = SelfConsistentModel::semicircle();
        let rho0 = m.density(0.0, 1e-6).unwrap();
        assert!((rho0 - 1.0 / std::f64::consts::PI).abs() < 1e-6);
        assert!(m.density(3.0, 1e-6).unwrap() <= 1e-5);
        assert!(m.density(0.0, 1e-2).is_err());
    }

    #[test]
    fn control_phi_examples() {
        let m = SelfConsistentModel::semicircle();
        let l = m.edge_root();
        assert!((m.control_phi(c(l, 1e-2)) - 0.1).abs() < 1e-12);
        let outside = m.control_phi(c(l + 0.04, 1e-4));
        assert!((outside - 1e-4 / 0.0401f64.sqrt()).abs() < 1e-15);
        assert!((outside - 4.994e-4).abs() < 1e-6);
        assert!((m.control_phi(c(0.0, 1e-12)) - l.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn local_law_rhs_examples() {
        let m = SelfConsistentModel::semicircle();
        let n = 1_000_000usize;
        let scale = (n as f64).powf(-2.0 / 3.0);
        for e in [scale, -scale] {
            let z = c(m.edge_root() + e, scale);
            let v = m.local_law_rhs(z, n);
            assert!(v <= 10.0 * (n as f64).powf(-1.0 / 3.0), "{v}");
        }
        let v = m.local_law_rhs(c(m.edge_root(), 1.0), 1000);
        assert!(v.is_finite() && v > 0.0);
        let n0 = 1000usize;
        let s0 = (n0 as f64).powf(-2.0 / 3.0);
        let z = c(m.edge_root() + s0, s0);
        assert!(m.local_law_rhs(z, 2 * n0) < m.local_law_rhs(z, n0));
    }
}
