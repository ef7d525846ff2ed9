//! Evaluation of a single building-block term
//! `N^{-θ} Σ_{I_k} Π_l A_l(s_l)` by variable elimination.
//!
//! Each index class is a summation variable over `0..N`. Every pair `l`
//! contributes an `N × N` factor `A_l(h[x, y])` on its (i-class, j-class) and
//! every exclusion a factor `1 - δ_xy`. Variables are summed out one at a time,
//! always picking the one whose elimination creates the smallest intermediate
//! table, so forest-shaped patterns cost `O(k N²)`.

use crate::ensemble::MatrixSample;
use crate::numeric::KahanSum;
use crate::{Error, Result};

use super::pattern::{IndexPattern, Side};

#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    data: Vec<f64>,
}

impl Factor {
    fn scalar(v: f64) -> Self {
        Self {
            vars: Vec::new(),
            data: vec![v],
        }
    }
}

/// `A_l(s_l)` for pair number `l` (1-based) applied to entry value `h`.
pub fn building_block(l: usize, s: u32, h: f64, n: usize) -> f64 {
    if l > 1 && s == 1 {
        h * h - 1.0 / n as f64
    } else {
        h.powi(s as i32 + 1)
    }
}

/// Evaluates one term of the form `N^{-θ} Σ_{I_k} Π_l A_l(s_l)` on a sample.
pub fn evaluate_term(sample: &MatrixSample, pattern: &IndexPattern) -> Result<f64> {
    let n = sample.n();
    let needed = pattern.distinct_indices();
    if n < needed {
        return Err(Error::TooFewIndices { needed, n });
    }
    let dense = sample.to_dense();
    Ok(evaluate_dense(&dense, n, pattern))
}

pub(crate) fn evaluate_dense(dense: &[f64], n: usize, pattern: &IndexPattern) -> f64 {
    let classes = pattern.classes();
    let mut factors: Vec<Factor> = Vec::new();
    for (l0, &s) in pattern.s().iter().enumerate() {
        let (x, y) = (classes.i_class[l0], classes.j_class[l0]);
        let data: Vec<f64> = dense
            .iter()
            .map(|&h| building_block(l0 + 1, s, h, n))
            .collect();
        // i-classes precede j-classes, so (x, y) is already sorted.
        factors.push(Factor {
            vars: vec![x, y],
            data,
        });
    }
    for e in pattern.exclusions() {
        let class = match e.side {
            Side::I => &classes.i_class,
            Side::J => &classes.j_class,
        };
        let (a, b) = (class[e.earlier - 1], class[e.later - 1]);
        let (a, b) = (a.min(b), a.max(b));
        let mut data = vec![1.0; n * n];
        for d in 0..n {
            data[d * n + d] = 0.0;
        }
        factors.push(Factor {
            vars: vec![a, b],
            data,
        });
    }

    let mut remaining: Vec<usize> = (0..classes.count).collect();
    while !remaining.is_empty() {
        // Pick the variable whose elimination touches the fewest other variables.
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &v)| {
                let mut scope: Vec<usize> = factors
                    .iter()
                    .filter(|f| f.vars.contains(&v))
                    .flat_map(|f| f.vars.iter().copied())
                    .collect();
                scope.sort_unstable();
                scope.dedup();
                (pos, scope.len())
            })
            .min_by_key(|&(pos, width)| (width, pos))
            .unwrap();
        let var = remaining.remove(pos);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        factors.push(sum_out(&touching, var, n));
    }

    let total: f64 = factors.iter().map(|f| f.data[0]).product();
    total / (n as f64).powi(pattern.theta() as i32)
}

/// Multiplies `factors` together and sums out `var`.
fn sum_out(factors: &[Factor], var: usize, n: usize) -> Factor {
    if factors.is_empty() {
        // A class that no factor touches contributes a free factor N.
        return Factor::scalar(n as f64);
    }
    let mut scope: Vec<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
    scope.sort_unstable();
    scope.dedup();
    let out_vars: Vec<usize> = scope.iter().copied().filter(|&v| v != var).collect();
    let var_pos = scope.iter().position(|&v| v == var).unwrap();

    // For each factor, the position in `scope` of each of its variables.
    let layouts: Vec<Vec<usize>> = factors
        .iter()
        .map(|f| {
            f.vars
                .iter()
                .map(|v| scope.iter().position(|s| s == v).unwrap())
                .collect()
        })
        .collect();

    let out_len = n.pow(out_vars.len() as u32);
    let mut out = vec![0.0; out_len];
    let mut assignment = vec![0usize; scope.len()];
    for (cell, slot) in out.iter_mut().enumerate() {
        // Decode the output cell into the non-eliminated variables (row-major).
        let mut rem = cell;
        for (pos, _) in scope.iter().enumerate().rev() {
            if pos == var_pos {
                continue;
            }
            assignment[pos] = rem % n;
            rem /= n;
        }
        let mut acc = KahanSum::new();
        for value in 0..n {
            assignment[var_pos] = value;
            let mut prod = 1.0;
            for (f, layout) in factors.iter().zip(&layouts) {
                let mut idx = 0;
                for &p in layout {
                    idx = idx * n + assignment[p];
                }
                prod *= f.data[idx];
                if prod == 0.0 {
                    break;
                }
            }
            acc.add(prod);
        }
        *slot = acc.value();
    }
    Factor {
        vars: out_vars,
        data: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> MatrixSample {
        // deterministic pseudo-random symmetric matrix
        let mut data = vec![0.0; n * n];
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        for i in 0..n {
            for j in i..n {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) / (n as f64).sqrt();
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        MatrixSample::from_dense(n, &data).unwrap()
    }

    #[test]
    fn single_pair_is_normalised_power_sum() {
        let s = sample(5, 1);
        let dense = s.to_dense();
        let want: f64 = dense.iter().map(|h| h * h).sum::<f64>() / 5.0;
        let got = evaluate_term(&s, &"k=1; s=1".parse().unwrap()).unwrap();
        assert!((got - want).abs() < 1e-14);
        let want4: f64 = dense.iter().map(|h| h.powi(4)).sum::<f64>() / 5.0;
        let got4 = evaluate_term(&s, &"k=1; s=3".parse().unwrap()).unwrap();
        assert!((got4 - want4).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let s = MatrixSample::from_dense(4, &[0.0; 16]).unwrap();
        for text in ["k=1; s=1", "k=1; s=5", "k=2; i2=i1; s=1,3", "k=2; s=3,1"] {
            assert_eq!(evaluate_term(&s, &text.parse().unwrap()).unwrap(), 0.0, "{text}");
        }
    }

    #[test]
    fn too_few_indices_is_rejected() {
        let s = sample(2, 3);
        let p: IndexPattern = "k=2; s=1,1".parse().unwrap();
        assert!(matches!(
            evaluate_term(&s, &p),
            Err(Error::TooFewIndices { needed: 4, n: 2 })
        ));
    }
}
