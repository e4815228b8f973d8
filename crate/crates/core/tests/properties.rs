use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use nonlocal_core::grid::{decode_field, forward_transform, inverse_transform, write_field_to, GridSpec, VectorField};
use nonlocal_core::kernel::{builtin_kernels, KernelSpec};
use nonlocal_core::linalg::{hermitian_eigenvalues, op_norm, CMat};
use nonlocal_core::norms::{ensemble_member, EnsembleConfig};
use nonlocal_core::operator::{apply_fraclap, apply_spectral, convolve, rel_l2};
use nonlocal_core::solver_elliptic::solve_direct;
use nonlocal_core::solver_parabolic::{heat_kernel_matrix, solve_duhamel, Forcing, TimeGrid, TimeScheme};
use nonlocal_core::symbol::{symbol_general, tabulate_symbol, SymbolQuadrature};

fn kernels(s: f64) -> Vec<(String, KernelSpec)> {
    builtin_kernels(2, s).unwrap()
}

fn field(grid: &GridSpec, values: &[f64]) -> VectorField {
    let len = grid.len();
    VectorField::new(grid.clone(), 2, (0..2 * len).map(|i| values[i % values.len()] * (1.0 + (i / values.len()) as f64)).collect())
        .unwrap()
}

fn l2(f: &VectorField) -> f64 {
    f.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn even_size() -> impl Strategy<Value = usize> {
    (2usize..6).prop_map(|h| 2 * h)
}

fn s_value() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.25, 0.4, 0.5, 0.6, 0.75])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip(n0 in even_size(), n1 in even_size(), values in prop::collection::vec(-5.0f64..5.0, 7)) {
        let grid = GridSpec::new(&[n0, n1], &[1.0, 1.7]).unwrap();
        let f = field(&grid, &values);
        let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
        prop_assert!(rel_l2(&back, &f) <= 1e-13);
    }

    #[test]
    fn field_file_round_trip(n0 in even_size(), n1 in even_size(), values in prop::collection::vec(-1e300f64..1e300, 5)) {
        let grid = GridSpec::new(&[n0, n1], &[2.0, 0.5]).unwrap();
        let f = field(&grid, &values);
        let mut bytes = Vec::new();
        write_field_to(&f, &mut bytes).unwrap();
        prop_assert_eq!(decode_field(&bytes).unwrap(), f);
    }

    #[test]
    fn symbol_is_accretive_and_conjugate_symmetric(s in s_value(), r in 0.05f64..40.0, th in 0.0f64..(2.0 * PI)) {
        let xi = [r * th.cos(), r * th.sin()];
        let neg = [-xi[0], -xi[1]];
        let q = SymbolQuadrature::default();
        for (name, k) in kernels(s) {
            let m = symbol_general(&xi, &k, &q).unwrap().entries;
            let mn = symbol_general(&neg, &k, &q).unwrap().entries;
            let scale = m.norm();
            prop_assert!((&mn - m.conjugate()).norm() <= 1e-12 * scale, "{}", name);
            let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            prop_assert!(hermitian_eigenvalues(&herm)[0] > 0.0, "{}", name);
            // S − iT with S, T real symmetric
            prop_assert!((m[(0, 1)] - m[(1, 0)]).norm() <= 1e-12 * scale, "{}", name);
            if k.is_even() {
                prop_assert!(m.iter().all(|z| z.im.abs() <= 1e-10 * scale), "{}", name);
            }
        }
    }

    #[test]
    fn pure_power_symbols_are_homogeneous(s in s_value(), r in 0.1f64..10.0, th in 0.0f64..(2.0 * PI), t in 0.2f64..5.0) {
        let xi = [r * th.cos(), r * th.sin()];
        let q = SymbolQuadrature::default();
        for (name, k) in kernels(s) {
            if !k.is_pure_power() {
                continue;
            }
            let m = symbol_general(&xi, &k, &q).unwrap().entries;
            let mt = symbol_general(&[t * xi[0], t * xi[1]], &k, &q).unwrap().entries;
            let want = &m * Complex64::new(t.powf(2.0 * s), 0.0);
            prop_assert!((&mt - &want).norm() <= 1e-9 * want.norm(), "{}", name);
        }
    }

    #[test]
    fn heat_kernel_is_a_contraction_semigroup(
        a in 0.0f64..50.0,
        c in 0.0f64..50.0,
        t in prop::array::uniform3(-20.0f64..20.0),
        t1 in 0.0f64..2.0,
        t2 in 0.0f64..2.0,
        lambda in 0.0f64..3.0,
    ) {
        // S − iT: positive definite S, real symmetric T
        let x = 0.5 * (a * c).sqrt();
        let m = CMat::from_row_slice(2, 2, &[
            Complex64::new(a + 1.0, -t[0]), Complex64::new(x, -t[1]),
            Complex64::new(x, -t[1]), Complex64::new(c + 1.0, -t[2]),
        ]);
        let w1 = heat_kernel_matrix(t1, &m, lambda).unwrap();
        let w2 = heat_kernel_matrix(t2, &m, lambda).unwrap();
        let w12 = heat_kernel_matrix(t1 + t2, &m, lambda).unwrap();
        prop_assert!((&w1 * &w2 - &w12).norm() <= 1e-10);
        prop_assert!(op_norm(&w12) <= (-(t1 + t2) * lambda).exp() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn elliptic_solve_inverts_and_contracts(seed in any::<u64>(), lambda in 0.05f64..20.0, which in 0usize..5) {
        let grid = GridSpec::cube(2, 12, 1.0).unwrap();
        let (_, k) = kernels(0.5).swap_remove(which);
        let table = tabulate_symbol(&grid, &k, &SymbolQuadrature::default()).unwrap();
        let ens = EnsembleConfig { size: 1, seed, ..EnsembleConfig::default() };
        let f = ensemble_member(&grid, 2, &ens, 0).unwrap();
        let u = solve_direct(&f, &table, lambda).unwrap();
        prop_assert!(rel_l2(&apply_spectral(&u, &table, lambda).unwrap(), &f) <= 1e-12);
        prop_assert!(lambda * l2(&u) <= l2(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn operator_commutes_with_multipliers(seed in any::<u64>(), s in s_value()) {
        let grid = GridSpec::cube(2, 12, 1.0).unwrap();
        let ens = EnsembleConfig { size: 2, seed, ..EnsembleConfig::default() };
        let u = ensemble_member(&grid, 2, &ens, 0).unwrap();
        let v = ensemble_member(&grid, 1, &ens, 1).unwrap();
        for (_, k) in kernels(s) {
            let table = tabulate_symbol(&grid, &k, &SymbolQuadrature::default()).unwrap();
            let a = apply_spectral(&apply_fraclap(&u, s).unwrap(), &table, 0.0).unwrap();
            let b = apply_fraclap(&apply_spectral(&u, &table, 0.0).unwrap(), s).unwrap();
            prop_assert!(rel_l2(&a, &b) <= 1e-12);
            let a = apply_spectral(&convolve(&u, &v).unwrap(), &table, 0.0).unwrap();
            let b = convolve(&apply_spectral(&u, &table, 0.0).unwrap(), &v).unwrap();
            prop_assert!(rel_l2(&a, &b) <= 1e-12);
        }
    }

    #[test]
    fn duhamel_is_linear_in_the_forcing(seed in any::<u64>(), alpha in -3.0f64..3.0, lambda in 0.0f64..2.0) {
        let grid = GridSpec::cube(2, 8, 1.0).unwrap();
        let (_, k) = kernels(0.5).swap_remove(2);
        let table = tabulate_symbol(&grid, &k, &SymbolQuadrature::default()).unwrap();
        let ens = EnsembleConfig { size: 2, seed, ..EnsembleConfig::default() };
        let f = ensemble_member(&grid, 2, &ens, 0).unwrap();
        let g = ensemble_member(&grid, 2, &ens, 1).unwrap();
        let tg = TimeGrid::new(0.7, 5, TimeScheme::ExponentialEuler).unwrap();
        let solve = |h: &VectorField| solve_duhamel(Forcing::Constant(h), &table, lambda, &tg).unwrap();
        let combo = solve(&f.combine(alpha, &g, 1.0).unwrap());
        let (uf, ug) = (solve(&f), solve(&g));
        for i in 0..combo.len() {
            let want = uf[i].combine(alpha, &ug[i], 1.0).unwrap();
            prop_assert!(l2(&combo[i].combine(1.0, &want, -1.0).unwrap()) <= 1e-12 * (1.0 + l2(&want)));
        }
        prop_assert!(l2(&solve(&VectorField::zeros(&grid, 2))[5]) == 0.0);
    }
}
