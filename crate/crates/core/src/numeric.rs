//! Small floating point helpers shared by the modules.

use num_complex::Complex64;

/// Neumaier compensated accumulator.
///
/// Summation order is the caller's iteration order, so results are
/// reproducible as long as that order is fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of reals.
pub fn sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Compensated complex accumulator (independent real and imaginary parts).
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_mass() {
        let mut xs = vec![1.0e16, 1.0, -1.0e16];
        xs.extend(std::iter::repeat_n(1.0, 9));
        assert_eq!(sum(xs), 10.0);
    }

    #[test]
    fn complex_sum_is_componentwise() {
        let mut acc = ComplexSum::new();
        acc.add(Complex64::new(1.0, -2.0));
        acc.add(Complex64::new(0.5, 4.0));
        assert_eq!(acc.value(), Complex64::new(1.5, 2.0));
    }
}
