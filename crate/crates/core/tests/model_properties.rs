use proptest::prelude::*;
use sparse_edge::scm::{BuildOptions, SelfConsistentModel};
use sparse_edge::Complex64;

fn model(z1: f64, z2: f64) -> SelfConsistentModel {
    SelfConsistentModel::build(&[z1, z2], BuildOptions::default()).unwrap()
}

fn small_corrections() -> impl Strategy<Value = (f64, f64)> {
    (0.9f64..1.1, -0.05f64..0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edge_is_a_double_root((z1, z2) in small_corrections()) {
        let m = model(z1, z2);
        let z = Complex64::new(m.edge_root(), 0.0);
        let w = Complex64::new(-m.tau(), 0.0);
        prop_assert!(m.p(z, w).norm() < 1e-10);
        prop_assert!(m.dp_dw(z, w).norm() < 1e-9);
        prop_assert!(m.r_prime(-m.tau()).abs() < 1e-9);
    }

    #[test]
    fn series_edge_tracks_the_root_quadratically((z1, z2) in small_corrections()) {
        let m = model(z1, z2);
        let s = m.correction_size();
        prop_assert!(m.edge_discrepancy() <= 10.0 * s * s + 1e-12,
            "|L̃ - L̂| = {} for size {s}", m.edge_discrepancy());
    }

    #[test]
    fn stieltjes_branch_is_herglotz_and_solves_the_equation(
        (z1, z2) in small_corrections(),
        x in -3.0f64..3.0,
        log_eta in -3.0f64..1.0,
    ) {
        let m = model(z1, z2);
        let z = Complex64::new(x, 10f64.powf(log_eta));
        let p = m.stieltjes(z).unwrap();
        prop_assert!(p.w.im > 0.0);
        prop_assert!(p.residual < 1e-10, "residual {}", p.residual);
        // |m̃| ≤ 1/Im z for any Stieltjes transform of a probability measure
        prop_assert!(p.w.norm() <= 1.0 / z.im + 1e-9);
    }

    #[test]
    fn spectrum_is_symmetric((z1, z2) in small_corrections(), x in 0.0f64..3.0, log_eta in -3.0f64..0.0) {
        let m = model(z1, z2);
        let eta = 10f64.powf(log_eta);
        let right = m.m_tilde(Complex64::new(x, eta)).unwrap();
        let left = m.m_tilde(Complex64::new(-x, eta)).unwrap();
        prop_assert!((left + right.conj()).norm() < 1e-9 * (1.0 + right.norm()));
    }

    #[test]
    fn large_z_asymptotics((z1, z2) in small_corrections(), x in -5.0f64..5.0) {
        let m = model(z1, z2);
        let z = Complex64::new(x, 1e3);
        let w = m.m_tilde(z).unwrap();
        // m̃(z) = -1/z - Z_1/z³ + O(z⁻⁵)
        let rest = (z * w + 1.0).norm();
        prop_assert!(rest <= 2.0 * z1 / z.norm_sqr(), "{rest}");
    }

    #[test]
    fn density_vanishes_outside_and_is_positive_inside((z1, z2) in small_corrections(), d in 0.01f64..0.5) {
        let m = model(z1, z2);
        let l = m.edge_root();
        prop_assert!(m.density(l + d, 1e-9).unwrap() < 1e-6);
        prop_assert!(m.density(l - d.min(l), 1e-9).unwrap() > 0.0);
    }
}

#[test]
fn density_has_unit_mass() {
    for (z1, z2) in [(1.0, 0.0), (1.0, 0.1), (1.05, -0.03), (0.95, 0.08)] {
        let m = model(z1, z2);
        let l = m.edge_root();
        // x = L̃ sin θ removes the square-root edges; midpoint rule in θ
        let k = 400;
        let h = std::f64::consts::PI / k as f64;
        let mass: f64 = (0..k)
            .map(|j| {
                let t = -std::f64::consts::FRAC_PI_2 + (j as f64 + 0.5) * h;
                m.density(l * t.sin(), 1e-9).unwrap() * l * t.cos() * h
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-4, "Z = ({z1}, {z2}): mass {mass}");
    }
}

#[test]
fn dp_dw_scales_like_square_root_distance_to_the_edge() {
    let m = model(1.0, 0.1);
    let l = m.edge_root();
    let mut ratios = Vec::new();
    for kappa in [1e-4, 1e-3, 1e-2, 1e-1] {
        let eta = 1e-8;
        let z = Complex64::new(l - kappa, eta);
        let w = m.m_tilde(z).unwrap();
        ratios.push(m.dp_dw(z, w).norm() / (kappa + eta).sqrt());
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn imaginary_part_decays_like_one_over_eta() {
    let m = model(1.0, 0.1);
    for eta in [1e2, 1e3, 1e4] {
        let w = m.m_tilde(Complex64::new(0.0, eta)).unwrap();
        assert!((w.im * eta - 1.0).abs() < 2.0 / (eta * eta), "η = {eta}: {}", w.im * eta);
    }
}
