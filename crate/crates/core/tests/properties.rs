use std::f64::consts::PI;

use miura_core::cauchy_riesz::{involution, ReflectionData};
use miura_core::fourier::{forward_raw, inverse_raw, KernelSign};
use miura_core::glm::GlmSystem;
use miura_core::grid::{Grid, SplitFunction};
use miura_core::io::{read_reflection_csv, write_reflection_csv};
use miura_core::pipeline::direct_map;
use miura_core::riccati::Preset;
use miura_core::zs_akns::ClassTag;
use num_complex::Complex64;
use proptest::prelude::*;
use rustfft::FftPlanner;

fn small_grid() -> Grid {
    Grid::centered(8.0, 1.0 / 16.0).unwrap()
}

/// Delta-like reflection coefficient, shifted by `c`.
fn shifted_delta(kg: &Grid, alpha: f64, c: f64) -> Vec<Complex64> {
    kg.points()
        .iter()
        .map(|&k| alpha / Complex64::new(-alpha, 2.0 * k) * Complex64::from_polar(1.0, 2.0 * k * c))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fourier_pair_inverts(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
        let f: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let dx = 0.125;
        let dk = PI / (f.len() as f64 * dx);
        let back = inverse_raw(&forward_raw(&f, dx), dk, KernelSign::Minus);
        for (a, b) in f.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn hankel_fft_matches_direct_and_is_self_adjoint(
        kernel in prop::collection::vec(-1.0f64..1.0, 129),
        jump in -1.0f64..1.0,
        index in 0usize..128,
        seed in prop::collection::vec(-1.0f64..1.0, 256),
    ) {
        let grid = Grid::centered(4.0, 1.0 / 16.0).unwrap();
        let k = SplitFunction::new(grid, kernel[..grid.count].to_vec(), jump).unwrap();
        let sys = GlmSystem::new(&k, index, &mut FftPlanner::new()).unwrap();
        let m = sys.len();
        let a = &seed[..m];
        let b = &seed[seed.len() - m..];
        let fast = sys.apply(a);
        let slow = sys.apply_direct(a);
        let scale = 1.0 + slow.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (p, q) in fast.iter().zip(&slow) {
            prop_assert!((p - q).abs() < 1e-12 * scale);
        }
        let lhs = sys.inner(&sys.apply_direct(a), b);
        let rhs = sys.inner(a, &sys.apply_direct(b));
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn involution_is_its_own_inverse(alpha in 0.3f64..3.0, c in -1.0f64..1.0) {
        let kg = small_grid().wavenumber_grid().unwrap();
        let d = ReflectionData::new(kg, shifted_delta(&kg, alpha, c), ClassTag::Generic).unwrap();
        let twice = involution(&involution(&d).unwrap()).unwrap();
        for (a, b) in twice.r.iter().zip(&d.r) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn reflection_csv_is_lossless(alpha in 0.1f64..5.0, c in -2.0f64..2.0) {
        let kg = Grid::centered(2.0, 1.0 / 8.0).unwrap().wavenumber_grid().unwrap();
        let d = ReflectionData::new(kg, shifted_delta(&kg, alpha, c), ClassTag::Generic).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_reflection_csv(&p, &d).unwrap();
        let back = read_reflection_csv(&p).unwrap();
        prop_assert_eq!(back.r, d.r);
        prop_assert_eq!(back.r_tilde, d.r_tilde);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn direct_map_is_unitary_and_conjugate_symmetric(
        amp_plus in -0.6f64..0.6,
        amp_minus in -0.6f64..0.6,
        center in 0.5f64..2.0,
        width in 0.5f64..1.5,
        v0 in 0.2f64..2.0,
    ) {
        let grid = small_grid();
        let p = Preset::Bump { amp_plus, amp_minus, center, width, v0 };
        let run = direct_map(&p.triple(&grid).unwrap(), &grid).unwrap();
        let s = &run.scattering;
        for i in 0..s.kgrid.count {
            let j = s.kgrid.mirror(i);
            prop_assert!((s.a[i].norm_sqr() - s.b[i].norm_sqr() - 1.0).abs() < 1e-8);
            prop_assert!((s.a[j] - s.a[i].conj()).norm() < 1e-9);
            prop_assert!((s.b[j] - s.b[i].conj()).norm() < 1e-9);
            prop_assert!(s.r_plus[i].norm() <= 1.0 + 1e-12);
        }
    }
}
