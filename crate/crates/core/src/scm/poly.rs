//! Roots of small complex polynomials (Aberth–Ehrlich iteration).

use num_complex::Complex64;

const MAX_ITER: usize = 500;

/// Coefficients in ascending order with trailing (leading-order) zeros removed.
pub fn trim(coeffs: &[Complex64]) -> &[Complex64] {
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1] == Complex64::new(0.0, 0.0) {
        end -= 1;
    }
    &coeffs[..end]
}

/// `p(x)` and `p'(x)` by Horner's rule.
pub fn eval_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

pub fn eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

/// All roots of `Σ coeffs[k] x^k`. `guess`, when its length equals the degree,
/// seeds the iteration (warm start along a continuation path).
pub fn roots(coeffs: &[Complex64], guess: Option<&[Complex64]>) -> Vec<Complex64> {
    let coeffs = trim(coeffs);
    let degree = coeffs.len() - 1;
    match degree {
        0 => Vec::new(),
        1 => vec![-coeffs[0] / coeffs[1]],
        _ => aberth(coeffs, degree, guess),
    }
}

fn aberth(coeffs: &[Complex64], degree: usize, guess: Option<&[Complex64]>) -> Vec<Complex64> {
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let mut z: Vec<Complex64> = match guess {
        Some(g) if g.len() == degree && g.iter().all(|v| v.is_finite()) => perturb_duplicates(g),
        _ => {
            // Fujiwara-type bound on the root moduli.
            let radius = (0..degree)
                .map(|k| monic[k].norm().powf(1.0 / (degree - k) as f64))
                .fold(0.0, f64::max)
                .max(1e-3)
                * 2.0;
            (0..degree)
                .map(|k| {
                    let angle = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + 0.4;
                    Complex64::from_polar(radius, angle)
                })
                .collect()
        }
    };
    for _ in 0..MAX_ITER {
        let mut converged = true;
        for k in 0..degree {
            let (p, dp) = eval_with_derivative(&monic, z[k]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d == Complex64::new(0.0, 0.0) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                if step.norm() > 4.0 * f64::EPSILON * (1.0 + z[k].norm()) {
                    converged = false;
                }
            } else {
                converged = false;
                let bump = Complex64::new(1e-8, 1e-8) * (1.0 + z[k].norm());
                z[k] += bump;
            }
        }
        if converged {
            break;
        }
    }
    z
}

fn perturb_duplicates(g: &[Complex64]) -> Vec<Complex64> {
    let mut z = g.to_vec();
    for k in 1..z.len() {
        for j in 0..k {
            if (z[k] - z[j]).norm() <= 1e-14 * (1.0 + z[k].norm()) {
                let bump = Complex64::new(1e-9, 1e-9) * (1.0 + z[k].norm());
                z[k] += bump;
            }
        }
    }
    z
}

/// Newton refinement of a single root.
pub fn polish(coeffs: &[Complex64], mut x: Complex64, steps: usize) -> Complex64 {
    for _ in 0..steps {
        let (p, dp) = eval_with_derivative(coeffs, x);
        let next = x - p / dp;
        if !next.is_finite() {
            break;
        }
        let (p_next, _) = eval_with_derivative(coeffs, next);
        if p_next.norm() >= p.norm() {
            break;
        }
        x = next;
    }
    x
}
