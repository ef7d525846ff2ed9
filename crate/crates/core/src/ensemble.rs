//! Sparse symmetric random matrices with exactly known entry cumulants.
//!
//! Every entry `h_ij` (diagonal included) is drawn from the same law with
//! mean 0 and variance `1/N`. Sparsity is controlled by `q = N^b`, and the
//! `p`-th cumulant scales like `(p-1)! c_p / (N q^(p-2))`.
//!
//! Two laws are provided:
//!
//! * [`Family::SignedSparse`]: `h = B ξ` with `B ~ Bernoulli(q²/(s²N))` and
//!   `ξ` uniform on `{-s/q, +s/q}`,
//! * [`Family::CenteredBernoulli`]: `h = (χ - p₀)/sqrt(N p₀ (1-p₀))` with
//!   `χ ~ Bernoulli(p₀)`, `p₀ = q²/N` (a centred Erdős–Rényi adjacency matrix).
//!
//! A sample is stored as a background value plus the sparse list of
//! activated upper-triangle entries, so generation costs `O(N + nnz)`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numeric::KahanSum;
use crate::{Error, Result};

/// Highest cumulant order carried by [`CumulantProfile`].
pub const MAX_CUMULANT_ORDER: usize = 8;

/// Default scale of the signed sparse family, chosen so that `c_4 ≈ 1`.
pub const DEFAULT_SCALE: f64 = 2.449_489_742_783_178; // sqrt(6)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    SignedSparse { scale: f64 },
    CenteredBernoulli,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SignedSparse { .. } => "signed_sparse",
            Family::CenteredBernoulli => "centered_bernoulli",
        }
    }

    /// Lower bound imposed on `c_4` when validating a spec.
    ///
    /// The centred Bernoulli law has `c_4 -> 1/6`, so it gets a lower floor
    /// than the signed family.
    pub fn default_c4_floor(&self) -> f64 {
        match self {
            Family::SignedSparse { .. } => 0.5,
            Family::CenteredBernoulli => 0.1,
        }
    }
}

impl Default for Family {
    fn default() -> Self {
        Family::SignedSparse { scale: DEFAULT_SCALE }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Law of a single entry: value `active` with probability `p`, otherwise
/// `background`. For the signed family the active value carries a random sign.
#[derive(Debug, Clone, Copy, PartialEq)]
struct EntryLaw {
    p: f64,
    active: f64,
    signed: bool,
    background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    n: usize,
    b: f64,
    family: Family,
    master_seed: u64,
    c4_floor: f64,
}

impl EnsembleSpec {
    pub fn new(n: usize, b: f64, family: Family, master_seed: u64) -> Result<Self> {
        let c4_floor = family.default_c4_floor();
        Self::with_c4_floor(n, b, family, master_seed, c4_floor)
    }

    pub fn with_c4_floor(
        n: usize,
        b: f64,
        family: Family,
        master_seed: u64,
        c4_floor: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidEnsemble("N must be at least 1".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidEnsemble(format!("N = {n} is too large")));
        }
        if !(b > 0.0 && b < 0.5) {
            return Err(Error::InvalidEnsemble(format!(
                "sparsity exponent b = {b} must lie in (0, 0.5)"
            )));
        }
        if let Family::SignedSparse { scale } = family {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidEnsemble(format!(
                    "scale s = {scale} must be positive"
                )));
            }
        }
        let spec = Self {
            n,
            b,
            family,
            master_seed,
            c4_floor,
        };
        let p = spec.law().p;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidEnsemble(format!(
                "activation probability {p} lies outside (0, 1]"
            )));
        }
        if matches!(family, Family::CenteredBernoulli) && p >= 1.0 {
            return Err(Error::InvalidEnsemble(
                "centered Bernoulli law is degenerate for p0 = 1 (N = 1)".into(),
            ));
        }
        spec.cumulants()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn c4_floor(&self) -> f64 {
        self.c4_floor
    }

    /// Sparsity parameter `q = N^b`.
    pub fn q(&self) -> f64 {
        (self.n as f64).powf(self.b)
    }

    /// Same law with a different dimension.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::with_c4_floor(n, self.b, self.family, self.master_seed, self.c4_floor)
    }

    pub fn with_seed(&self, master_seed: u64) -> Self {
        Self {
            master_seed,
            ..self.clone()
        }
    }

    /// Probability that an entry differs from the background value.
    pub fn activation_probability(&self) -> f64 {
        self.law().p
    }

    fn law(&self) -> EntryLaw {
        let n = self.n as f64;
        let q = self.q();
        match self.family {
            Family::SignedSparse { scale } => EntryLaw {
                p: q * q / (scale * scale * n),
                active: scale / q,
                signed: true,
                background: 0.0,
            },
            Family::CenteredBernoulli => {
                let p0 = q * q / n;
                let sigma = (n * p0 * (1.0 - p0)).sqrt();
                EntryLaw {
                    p: p0,
                    active: (1.0 - p0) / sigma,
                    signed: false,
                    background: -p0 / sigma,
                }
            }
        }
    }

    /// Exact raw moment `E h^k` of one entry.
    pub fn moment(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => 0.0,
            2 => 1.0 / self.n as f64,
            _ => {
                let law = self.law();
                if law.signed {
                    if k % 2 == 1 {
                        0.0
                    } else {
                        law.p * law.active.powi(k as i32)
                    }
                } else {
                    law.p * law.active.powi(k as i32)
                        + (1.0 - law.p) * law.background.powi(k as i32)
                }
            }
        }
    }

    /// Variance of `h^k`, i.e. `E h^{2k} - (E h^k)^2`.
    pub fn power_variance(&self, k: usize) -> f64 {
        let m = self.moment(k);
        self.moment(2 * k) - m * m
    }

    /// Exact cumulants `C_2..C_8` and normalised cumulants `c_2..c_8`.
    pub fn cumulants(&self) -> Result<CumulantProfile> {
        let moments: Vec<f64> = (0..=MAX_CUMULANT_ORDER).map(|k| self.moment(k)).collect();
        let kappa = cumulants_from_moments(&moments);
        let n = self.n as f64;
        let q = self.q();
        let mut big = [0.0; MAX_CUMULANT_ORDER - 1];
        let mut small = [0.0; MAX_CUMULANT_ORDER - 1];
        for p in 2..=MAX_CUMULANT_ORDER {
            let c_p = if p == 2 { 1.0 / n } else { kappa[p] };
            big[p - 2] = c_p;
            small[p - 2] = c_p * n * q.powi(p as i32 - 2) / factorial(p - 1);
        }
        let profile = CumulantProfile {
            n: self.n,
            q,
            big,
            small,
        };
        for (p, c) in (2..=MAX_CUMULANT_ORDER).zip(profile.small) {
            if !c.is_finite() {
                return Err(Error::InvalidEnsemble(format!("c_{p} is not finite")));
            }
        }
        if profile.c(4) < self.c4_floor {
            return Err(Error::InvalidEnsemble(format!(
                "c_4 = {:.6} is below the floor {}",
                profile.c(4),
                self.c4_floor
            )));
        }
        Ok(profile)
    }

    /// Seed of the sample stream with the given index.
    pub fn sample_seed(&self, index: u64) -> u64 {
        sample_seed(self.master_seed, index)
    }

    /// Draws sample number `index`. A pure function of `(master_seed, index)`.
    pub fn sample(&self, index: u64) -> MatrixSample {
        let seed = self.sample_seed(index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = self.law();
        let n = self.n;
        let mut upper = Vec::with_capacity(
            ((n * (n + 1)) as f64 / 2.0 * law.p * 1.1) as usize + 16,
        );
        if law.p >= 1.0 {
            for i in 0..n {
                for j in i..n {
                    upper.push((i as u32, j as u32, draw_active(&law, &mut rng)));
                }
            }
        } else {
            let geometric = Geometric::new(law.p).expect("activation probability in (0, 1)");
            let mut row = 0usize;
            let mut offset = 0u64; // position inside the current row, counted from the diagonal
            'outer: loop {
                let mut gap = geometric.sample(&mut rng);
                loop {
                    let remaining = (n - row) as u64 - offset;
                    if gap < remaining {
                        offset += gap;
                        break;
                    }
                    gap -= remaining;
                    row += 1;
                    offset = 0;
                    if row == n {
                        break 'outer;
                    }
                }
                let col = row + offset as usize;
                upper.push((row as u32, col as u32, draw_active(&law, &mut rng)));
                offset += 1;
                if offset == (n - row) as u64 {
                    row += 1;
                    offset = 0;
                    if row == n {
                        break;
                    }
                }
            }
        }
        MatrixSample::from_parts(n, seed, self.fingerprint(), law.background, upper)
    }

    /// Short stable digest of the spec, used to tie samples and reports to it.
    pub fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(self.to_config_text().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Plain-text `key = value` form (keys `N`, `b`, `family`, `scale`, `master_seed`).
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("N = {}\n", self.n));
        out.push_str(&format!("b = {}\n", self.b));
        out.push_str(&format!("family = {}\n", self.family.name()));
        if let Family::SignedSparse { scale } = self.family {
            out.push_str(&format!("scale = {scale}\n"));
        }
        out.push_str(&format!("master_seed = {}\n", self.master_seed));
        out
    }

    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut b = None;
        let mut family = None;
        let mut scale = None;
        let mut seed = 0u64;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| {
                Error::InvalidEnsemble(format!("line {}: {what}", lineno + 1))
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "N" => n = Some(value.parse::<usize>().map_err(|_| bad("N must be an integer"))?),
                "b" => b = Some(value.parse::<f64>().map_err(|_| bad("b must be a number"))?),
                "family" => family = Some(value.to_string()),
                "scale" => {
                    scale = Some(value.parse::<f64>().map_err(|_| bad("scale must be a number"))?)
                }
                "master_seed" => {
                    seed = value
                        .parse::<u64>()
                        .map_err(|_| bad("master_seed must be an unsigned integer"))?
                }
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let n = n.ok_or_else(|| Error::InvalidEnsemble("missing key `N`".into()))?;
        let b = b.ok_or_else(|| Error::InvalidEnsemble("missing key `b`".into()))?;
        let family = parse_family(family.as_deref().unwrap_or("signed_sparse"), scale)?;
        Self::new(n, b, family, seed)
    }
}

/// Builds a [`Family`] from its config name and optional scale.
pub fn parse_family(name: &str, scale: Option<f64>) -> Result<Family> {
    match name {
        "signed_sparse" | "SignedSparse" => Ok(Family::SignedSparse {
            scale: scale.unwrap_or(DEFAULT_SCALE),
        }),
        "centered_bernoulli" | "CenteredBernoulli" => {
            if scale.is_some() {
                return Err(Error::InvalidEnsemble(
                    "`scale` only applies to the signed_sparse family".into(),
                ));
            }
            Ok(Family::CenteredBernoulli)
        }
        other => Err(Error::InvalidEnsemble(format!("unknown family `{other}`"))),
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_family(s, None)
    }
}

fn draw_active(law: &EntryLaw, rng: &mut ChaCha8Rng) -> f64 {
    if law.signed && rng.gen::<bool>() {
        -law.active
    } else {
        law.active
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Counter-based seed derivation: `splitmix64(master ^ splitmix64(index))`.
///
/// Each sample gets its own ChaCha8 stream seeded from this value, so samples
/// can be generated in any order or in parallel.
pub fn sample_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Cumulants from raw moments `m[0..=K]` (`m[0] = 1`) by the standard recursion
/// `κ_n = m_n - Σ_{j=1}^{n-1} binom(n-1, j-1) κ_j m_{n-j}`.
pub fn cumulants_from_moments(m: &[f64]) -> Vec<f64> {
    let mut kappa = vec![0.0; m.len()];
    for n in 1..m.len() {
        let mut acc = m[n];
        for j in 1..n {
            acc -= binomial(n - 1, j - 1) * kappa[j] * m[n - j];
        }
        kappa[n] = acc;
    }
    kappa
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantProfile {
    pub n: usize,
    pub q: f64,
    big: [f64; MAX_CUMULANT_ORDER - 1],
    small: [f64; MAX_CUMULANT_ORDER - 1],
}

impl CumulantProfile {
    /// Cumulant `C_p`, `2 <= p <= 8`.
    pub fn big_c(&self, p: usize) -> f64 {
        assert!((2..=MAX_CUMULANT_ORDER).contains(&p), "cumulant order {p}");
        self.big[p - 2]
    }

    /// Normalised cumulant `c_p = C_p N q^(p-2) / (p-1)!`.
    pub fn c(&self, p: usize) -> f64 {
        assert!((2..=MAX_CUMULANT_ORDER).contains(&p), "cumulant order {p}");
        self.small[p - 2]
    }
}

/// Compressed row storage of `h_ij - background` for the activated entries.
#[derive(Debug, Clone, PartialEq)]
struct Rows {
    ptr: Vec<usize>,
    cols: Vec<u32>,
    deltas: Vec<f64>,
}

/// One symmetric `N × N` realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    n: usize,
    seed: u64,
    spec_id: u64,
    background: f64,
    upper: Vec<(u32, u32, f64)>,
    rows: Rows,
}

impl MatrixSample {
    fn from_parts(
        n: usize,
        seed: u64,
        spec_id: u64,
        background: f64,
        upper: Vec<(u32, u32, f64)>,
    ) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in &upper {
            counts[i as usize + 1] += 1;
            if i != j {
                counts[j as usize + 1] += 1;
            }
        }
        for r in 0..n {
            counts[r + 1] += counts[r];
        }
        let ptr = counts.clone();
        let total = ptr[n];
        let mut fill = counts;
        let mut cols = vec![0u32; total];
        let mut deltas = vec![0.0; total];
        for &(i, j, v) in &upper {
            let d = v - background;
            let slot = &mut fill[i as usize];
            cols[*slot] = j;
            deltas[*slot] = d;
            *slot += 1;
            if i != j {
                let slot = &mut fill[j as usize];
                cols[*slot] = i;
                deltas[*slot] = d;
                *slot += 1;
            }
        }
        // Column order inside a row is not sorted for the mirrored entries;
        // sort so accumulation order is canonical.
        for r in 0..n {
            let (a, b) = (ptr[r], ptr[r + 1]);
            let mut pairs: Vec<(u32, f64)> =
                cols[a..b].iter().copied().zip(deltas[a..b].iter().copied()).collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (c, d)) in pairs.into_iter().enumerate() {
                cols[a + k] = c;
                deltas[a + k] = d;
            }
        }
        Self {
            n,
            seed,
            spec_id,
            background,
            upper,
            rows: Rows { ptr, cols, deltas },
        }
    }

    /// Wraps a dense row-major symmetric matrix.
    pub fn from_dense(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = data[i * n + j];
                if v.to_bits() != data[j * n + i].to_bits() {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if v != 0.0 {
                    upper.push((i as u32, j as u32, v));
                }
            }
        }
        Ok(Self::from_parts(n, 0, 0, 0.0, upper))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec_id(&self) -> u64 {
        self.spec_id
    }

    /// Value of every entry that is not listed in [`Self::upper_entries`].
    pub fn background(&self) -> f64 {
        self.background
    }

    /// Activated entries `(i, j, h_ij)` with `i <= j`.
    pub fn upper_entries(&self) -> &[(u32, u32, f64)] {
        &self.upper
    }

    pub fn nnz_upper(&self) -> usize {
        self.upper.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.rows.ptr[i], self.rows.ptr[i + 1]);
        match self.rows.cols[a..b].binary_search(&(j as u32)) {
            Ok(k) => self.background + self.rows.deltas[a + k],
            Err(_) => self.background,
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![self.background; n * n];
        for &(i, j, v) in &self.upper {
            let (i, j) = (i as usize, j as usize);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
        out
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        let shift = if self.background != 0.0 {
            self.background * x.iter().sum::<f64>()
        } else {
            0.0
        };
        for (r, out) in y.iter_mut().enumerate() {
            let (a, b) = (self.rows.ptr[r], self.rows.ptr[r + 1]);
            let mut acc = shift;
            for k in a..b {
                acc += self.rows.deltas[k] * x[self.rows.cols[k] as usize];
            }
            *out = acc;
        }
    }

    /// Row power sums `Σ_j h_ij^p` for every row `i`, compensated.
    pub fn row_power_sums(&self, p: i32) -> Vec<f64> {
        let bg_power = self.background.powi(p);
        (0..self.n)
            .map(|r| {
                let (a, b) = (self.rows.ptr[r], self.rows.ptr[r + 1]);
                let mut acc = KahanSum::new();
                for k in a..b {
                    acc.add((self.background + self.rows.deltas[k]).powi(p));
                }
                if bg_power != 0.0 {
                    acc.add((self.n - (b - a)) as f64 * bg_power);
                }
                acc.value()
            })
            .collect()
    }

    /// Largest `|h_ij - h_ji|`; zero by construction.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &(i, j, _) in &self.upper {
            worst = worst.max((self.get(i as usize, j as usize) - self.get(j as usize, i as usize)).abs());
        }
        worst
    }

    /// Binary dump: little-endian `u64` N, then `N²` row-major `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in self.to_dense() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let n = u64::from_le_bytes(header) as usize;
        let mut data = vec![0.0; n * n];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Self::from_dense(n, &data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed(n: usize, b: f64) -> EnsembleSpec {
        EnsembleSpec::new(n, b, Family::default(), 7).unwrap()
    }

    #[test]
    fn second_cumulant_is_exactly_one_over_n() {
        for spec in [
            signed(1000, 0.2),
            EnsembleSpec::new(500, 0.25, Family::CenteredBernoulli, 1).unwrap(),
        ] {
            let c = spec.cumulants().unwrap();
            assert_eq!(c.big_c(2), 1.0 / spec.n() as f64);
        }
    }

    #[test]
    fn signed_sparse_fourth_cumulant_matches_closed_form() {
        // c_4 = s²/6 - q²/(2N)
        let spec = signed(4000, 0.2);
        let q2 = spec.q().powi(2);
        let c4 = spec.cumulants().unwrap().c(4);
        assert!((c4 - (1.0 - q2 / 8000.0)).abs() < 1e-12);
    }

    #[test]
    fn dense_limit_keeps_normalised_fourth_cumulant_bounded() {
        for n in [100usize, 10_000, 1_000_000] {
            let c = signed(n, 0.499).cumulants().unwrap();
            assert!(c.c(4).abs() < 2.0);
        }
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(EnsembleSpec::new(100, 0.6, Family::default(), 0).is_err());
        assert!(EnsembleSpec::new(100, 0.0, Family::default(), 0).is_err());
        assert!(EnsembleSpec::new(0, 0.2, Family::default(), 0).is_err());
        // p = q²/(s²N) > 1
        assert!(EnsembleSpec::new(100, 0.4, Family::SignedSparse { scale: 0.1 }, 0).is_err());
        // c_4 = s²/6 ≈ 1/6 < 0.5
        assert!(EnsembleSpec::new(100, 0.2, Family::SignedSparse { scale: 1.0 }, 0).is_err());
        assert!(EnsembleSpec::new(1, 0.2, Family::CenteredBernoulli, 0).is_err());
    }

    #[test]
    fn samples_are_reproducible_and_symmetric() {
        let spec = signed(300, 0.3);
        let a = spec.sample(5);
        let b = spec.sample(5);
        assert_eq!(a.to_dense(), b.to_dense());
        assert_ne!(a.to_dense(), spec.sample(6).to_dense());
        assert_eq!(a.symmetry_defect(), 0.0);
        let dense = a.to_dense();
        for i in 0..300 {
            for j in 0..300 {
                assert_eq!(dense[i * 300 + j].to_bits(), dense[j * 300 + i].to_bits());
            }
        }
    }

    #[test]
    fn entries_lie_in_the_support() {
        let spec = signed(200, 0.25);
        let a = spec.sample(0);
        let s = DEFAULT_SCALE / spec.q();
        for v in a.to_dense() {
            assert!(v == 0.0 || (v.abs() - s).abs() < 1e-15);
        }
        let cb = EnsembleSpec::new(200, 0.25, Family::CenteredBernoulli, 3).unwrap();
        let law = cb.law();
        for v in cb.sample(0).to_dense() {
            assert!(v == law.active || v == law.background);
        }
    }

    #[test]
    fn matvec_matches_dense_product() {
        let spec = EnsembleSpec::new(60, 0.15, Family::CenteredBernoulli, 9).unwrap();
        let s = spec.sample(2);
        let dense = s.to_dense();
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 60];
        s.matvec(&x, &mut y);
        for i in 0..60 {
            let want: f64 = (0..60).map(|j| dense[i * 60 + j] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn row_power_sums_include_background() {
        let spec = EnsembleSpec::new(50, 0.15, Family::CenteredBernoulli, 4).unwrap();
        let s = spec.sample(1);
        let dense = s.to_dense();
        let r2 = s.row_power_sums(2);
        for i in 0..50 {
            let want: f64 = (0..50).map(|j| dense[i * 50 + j].powi(2)).sum();
            assert!((r2[i] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn binary_dump_round_trips() {
        let s = signed(40, 0.3).sample(3);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 40 * 40 * 8);
        let back = MatrixSample::read_binary(&buf[..]).unwrap();
        assert_eq!(back.to_dense(), s.to_dense());
    }

    #[test]
    fn config_text_round_trips() {
        let spec = EnsembleSpec::new(1234, 0.2, Family::CenteredBernoulli, 99).unwrap();
        let back = EnsembleSpec::from_config_text(&spec.to_config_text()).unwrap();
        assert_eq!(back, spec);
        assert!(EnsembleSpec::from_config_text("N = 10\nb = 0.2\nbogus = 1\n").is_err());
    }

    #[test]
    fn seeds_differ_across_indices_and_masters() {
        assert_ne!(sample_seed(1, 0), sample_seed(1, 1));
        assert_ne!(sample_seed(1, 0), sample_seed(2, 0));
    }
}
