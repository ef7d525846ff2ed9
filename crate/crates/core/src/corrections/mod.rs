//! Random correction terms `Z_n` of a matrix sample.
//!
//! `Z_1 = N⁻¹ Σ h_ij² = 1 + X` and `Z_2` have closed forms evaluated from row
//! power sums in `O(N + nnz)`. Higher orders are linear combinations of
//! building-block terms supplied through a [`CoefficientTable`].

mod pattern;
mod scaling;
mod term;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::ensemble::MatrixSample;
use crate::numeric::KahanSum;
use crate::{Error, Result};

pub use pattern::{Classes, IndexPattern, Link, Side};
pub use scaling::{
    scaling_from_batches, scaling_study, scaling_with_sampler, ScalingPoint, ScalingStudy,
};
pub use term::{building_block, evaluate_term};

/// Values `Z_1..Z_ℓ` of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSet {
    pub n: usize,
    pub z: Vec<f64>,
    /// `Z_1 - 1`.
    pub x: f64,
}

impl CorrectionSet {
    /// Correction set given directly by its values (`z[0] = Z_1`).
    pub fn from_values(n: usize, z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidArgument("at least Z_1 is required".into()));
        }
        let x = z[0] - 1.0;
        Ok(Self { n, z, x })
    }

    /// The semicircle point `Z = (1, 0, …)`.
    pub fn semicircle(n: usize, ell: usize) -> Self {
        let mut z = vec![0.0; ell.max(1)];
        z[0] = 1.0;
        Self { n, z, x: 0.0 }
    }

    pub fn ell(&self) -> usize {
        self.z.len()
    }

    /// `Z_n`, 1-based.
    pub fn get(&self, order: usize) -> f64 {
        self.z[order - 1]
    }
}

/// Finite linear combination `Z_n = Σ (num/den) · term(pattern)` per order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientTable {
    entries: Vec<(IndexPattern, i64, i64)>,
}

impl CoefficientTable {
    pub fn new(entries: Vec<(IndexPattern, i64, i64)>) -> Result<Self> {
        if let Some((p, _, _)) = entries.iter().find(|e| e.2 == 0) {
            return Err(Error::CoefficientTable(format!("zero denominator for `{p}`")));
        }
        Ok(Self { entries })
    }

    /// `Z_1` and `Z_2` written as building blocks.
    pub fn closed_form() -> Self {
        let p = |t: &str| t.parse::<IndexPattern>().expect("static pattern");
        Self {
            entries: vec![
                (p("k=1; s=1"), 1, 1),
                (p("k=1; s=3"), 1, 1),
                (p("k=2; s=1,1"), -2, 1),
                (p("k=2; i2=i1; j2!=j1; s=1,1"), 1, 1),
                (p("k=2; j2=j1; i2!=i1; s=1,1"), 1, 1),
            ],
        }
    }

    pub fn entries(&self) -> &[(IndexPattern, i64, i64)] {
        &self.entries
    }

    pub fn orders(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (p, _, _) in &self.entries {
            *out.entry(p.order()).or_insert(0) += 1;
        }
        out
    }

    /// Reads CSV rows `pattern,numerator,denominator` (header optional).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut entries = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if row == 0 && record.get(0) == Some("pattern") {
                continue;
            }
            if record.len() != 3 {
                return Err(Error::CoefficientTable(format!(
                    "row {}: expected 3 fields, got {}",
                    row + 1,
                    record.len()
                )));
            }
            let pattern: IndexPattern = record[0].parse()?;
            let parse = |s: &str| {
                s.parse::<i64>().map_err(|_| {
                    Error::CoefficientTable(format!("row {}: `{s}` is not an integer", row + 1))
                })
            };
            entries.push((pattern, parse(&record[1])?, parse(&record[2])?));
        }
        Self::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pattern", "numerator", "denominator"]).unwrap();
        for (p, num, den) in &self.entries {
            w.write_record([p.to_string(), num.to_string(), den.to_string()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// `Σ_{patterns of the given order} coefficient · term`.
    pub fn evaluate_order(&self, sample: &MatrixSample, order: usize) -> Result<f64> {
        let matching: Vec<_> = self.entries.iter().filter(|e| e.0.order() == order).collect();
        if matching.is_empty() {
            return Err(Error::UnsupportedOrder(order));
        }
        let n = sample.n();
        if let Some(max) = matching.iter().map(|e| e.0.distinct_indices()).max() {
            if n < max {
                return Err(Error::TooFewIndices { needed: max, n });
            }
        }
        let dense = sample.to_dense();
        let mut acc = KahanSum::new();
        for (p, num, den) in matching {
            acc.add(*num as f64 / *den as f64 * term::evaluate_dense(&dense, n, p));
        }
        Ok(acc.value())
    }
}

/// Closed-form `Z_1`, `X` and the four sums of `Z_2`, each evaluated from
/// row and column power sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Z2Parts {
    pub z1: f64,
    /// `N⁻¹ Σ h⁴`
    pub quartic: f64,
    /// `-2 N⁻² Σ h² Σ (h² - E h²)` (coincident pairs included)
    pub product: f64,
    /// `N⁻¹ Σ_{i,j} Σ_{j'≠j} h_ij² (h_ij'² - E h²)`
    pub row: f64,
    /// `N⁻¹ Σ_{i,j} Σ_{i'≠i} h_ij² (h_i'j² - E h²)`
    pub column: f64,
}

impl Z2Parts {
    pub fn z2(&self) -> f64 {
        ((self.quartic + self.product) + self.row) + self.column
    }
}

pub fn z2_parts(sample: &MatrixSample) -> Z2Parts {
    let n = sample.n();
    let nf = n as f64;
    let inv_n = 1.0 / nf;
    let r2 = sample.row_power_sums(2);
    let r4 = sample.row_power_sums(4);
    let s2: f64 = r2.iter().copied().collect::<KahanSum>().value();
    let s4: f64 = r4.iter().copied().collect::<KahanSum>().value();
    let z1 = s2 / nf;
    // Σ_{ij} (h_ij² - 1/N) over all N² ordered pairs
    let centred_total = s2 - nf;
    let product = -2.0 / (nf * nf) * s2 * centred_total;
    // Σ_i [ r2_i (r2_i - 1) - (r4_i - r2_i/N) ]
    let line = |sums2: &[f64], sums4: &[f64]| -> f64 {
        let mut acc = KahanSum::new();
        for (a, b) in sums2.iter().zip(sums4) {
            acc.add(a * (a - 1.0));
            acc.add(-(b - a * inv_n));
        }
        acc.value() / nf
    };
    let row = line(&r2, &r4);
    // h is symmetric: column power sums coincide with the row power sums.
    let column = row;
    Z2Parts {
        z1,
        quartic: s4 / nf,
        product,
        row,
        column,
    }
}

/// Computes `Z_1..Z_ℓ`. Orders 1 and 2 use closed forms; higher orders need a
/// coefficient table.
pub fn compute_z(
    sample: &MatrixSample,
    ell: usize,
    table: Option<&CoefficientTable>,
) -> Result<CorrectionSet> {
    if ell == 0 {
        return Err(Error::InvalidArgument("ell must be at least 1".into()));
    }
    let parts = z2_parts(sample);
    let mut z = vec![parts.z1];
    if ell >= 2 {
        z.push(parts.z2());
    }
    for order in 3..=ell {
        let table = table.ok_or(Error::UnsupportedOrder(order))?;
        z.push(table.evaluate_order(sample, order)?);
    }
    Ok(CorrectionSet {
        n: sample.n(),
        x: parts.z1 - 1.0,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix() {
        let s = MatrixSample::from_dense(3, &[0.0; 9]).unwrap();
        let c = compute_z(&s, 2, None).unwrap();
        assert_eq!(c.z, vec![0.0, 0.0]);
        assert_eq!(c.x, -1.0);
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let s = MatrixSample::from_dense(2, &[0.0, 0.5, 0.5, 0.0]).unwrap();
        let c = compute_z(&s, 1, None).unwrap();
        assert_eq!(c.z[0], 0.25);
        assert_eq!(c.x, c.z[0] - 1.0);
    }

    #[test]
    fn higher_orders_need_a_table() {
        let s = MatrixSample::from_dense(2, &[0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(compute_z(&s, 3, None), Err(Error::UnsupportedOrder(3))));
        let table = CoefficientTable::closed_form();
        assert!(matches!(
            compute_z(&s, 3, Some(&table)),
            Err(Error::UnsupportedOrder(3))
        ));
        assert!(compute_z(&s, 0, None).is_err());
    }

    #[test]
    fn user_table_supplies_order_three() {
        let data: Vec<f64> = (0..16)
            .map(|k| {
                let (i, j) = (k / 4, k % 4);
                0.1 * ((i + j) as f64 + 1.0) * if (i + j) % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        let s = MatrixSample::from_dense(4, &data).unwrap();
        let table = CoefficientTable::from_csv(
            "pattern,numerator,denominator\n\"k=1; s=5\",3,2\n\"k=3; i2=i1; j3=j1; s=1,1,1\",-1,1\n"
                .as_bytes(),
        )
        .unwrap();
        let c = compute_z(&s, 3, Some(&table)).unwrap();
        let a = evaluate_term(&s, &"k=1; s=5".parse().unwrap()).unwrap();
        let b = evaluate_term(&s, &"k=3; i2=i1; j3=j1; s=1,1,1".parse().unwrap()).unwrap();
        assert!((c.z[2] - (1.5 * a - b)).abs() < 1e-15);
    }

    #[test]
    fn table_csv_round_trips() {
        let t = CoefficientTable::closed_form();
        assert_eq!(CoefficientTable::from_csv(t.to_csv().as_bytes()).unwrap(), t);
        assert!(CoefficientTable::from_csv("\"k=1; s=1\",1,0\n".as_bytes()).is_err());
    }
}
