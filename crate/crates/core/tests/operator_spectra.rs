use gauss_schrodinger::operator::{
    assemble, count_below, eigenvalues_below, free_spectrum, spectrum_csv, SolverOptions, SolverPath,
};
use gauss_schrodinger::{make_gaussian_kernel, sample_field, BoundaryCondition, Ensemble, FieldSample, Grid};
use proptest::prelude::*;

fn dense() -> SolverOptions {
    SolverOptions { path: SolverPath::Dense, dense_limit: usize::MAX, ..Default::default() }
}

fn sparse() -> SolverOptions {
    SolverOptions { path: SolverPath::Sparse, ..Default::default() }
}

fn field(d: usize, side: f64, h: f64, sigma: f64, seed: u64) -> FieldSample {
    let k = make_gaussian_kernel(sigma, 1.0, d).unwrap();
    sample_field(&k, &Grid::new(d, side, h).unwrap(), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dirichlet_never_counts_more_than_neumann(seed in any::<u64>(), d in 1usize..=2, sigma in 0.2f64..3.0, e in -3.0f64..2.0) {
        let side = if d == 1 { 8.0 } else { 3.0 };
        let f = field(d, side, 0.25, sigma, seed);
        let nd = count_below(&assemble(&f, BoundaryCondition::Dirichlet).unwrap().matrix, e).unwrap();
        let nn = count_below(&assemble(&f, BoundaryCondition::Neumann).unwrap().matrix, e).unwrap();
        prop_assert!(nd <= nn, "N_D = {nd} > N_N = {nn} at E = {e}");
    }

    #[test]
    fn constant_shift_moves_every_eigenvalue(seed in any::<u64>(), c in 0.0f64..5.0) {
        let f = field(1, 4.0, 0.125, 1.0, seed);
        let mut shifted = f.clone();
        shifted.values.iter_mut().for_each(|v| *v += c);
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let a = assemble(&f, bc).unwrap().eigenvalues_below(2.0, &dense()).unwrap();
            let b = assemble(&shifted, bc).unwrap().eigenvalues_below(2.0 + c, &dense()).unwrap();
            prop_assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((y - x - c).abs() < 1e-10 * 256.0, "{} vs {}", x + c, y);
            }
        }
    }
}

#[test]
fn sparse_and_dense_paths_agree_in_two_dimensions() {
    let f = field(2, 5.0, 0.125, 1.0, 9);
    assert_eq!(f.grid.len(), 1600);
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let h = assemble(&f, bc).unwrap();
        let norm = h.matrix.gershgorin().1.abs().max(h.matrix.gershgorin().0.abs());
        let a = h.eigenvalues_below(3.0, &dense()).unwrap();
        let b = h.eigenvalues_below(3.0, &sparse()).unwrap();
        assert!(b.complete_below_cutoff);
        assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-8 * norm, "{x} vs {y}");
        }
    }
}

#[test]
fn free_spectrum_matches_zero_potential_operator() {
    let g = Grid::new(2, 2.0, 0.125).unwrap();
    let zero = FieldSample {
        grid: g.clone(),
        values: vec![0.0; g.len()],
        seed: 0.into(),
        kernel_id: "zero".into(),
    };
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let e_max = 40.123;
        let numeric = assemble(&zero, bc).unwrap().eigenvalues_below(e_max, &dense()).unwrap();
        let exact = free_spectrum(&g, bc, e_max);
        assert_eq!(numeric.eigenvalues.len(), exact.eigenvalues.len());
        for (x, y) in numeric.eigenvalues.iter().zip(&exact.eigenvalues) {
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn cutoff_below_spectrum_is_empty() {
    let f = field(1, 4.0, 0.25, 1.0, 1);
    let h = assemble(&f, BoundaryCondition::Dirichlet).unwrap();
    let lowest = h.eigenvalues_below(10.0, &dense()).unwrap().eigenvalues[0];
    for opts in [dense(), sparse()] {
        let s = eigenvalues_below(&h.matrix, lowest - 1e-6, &opts).unwrap();
        assert!(s.eigenvalues.is_empty());
    }
}

#[test]
fn spectra_over_an_ensemble_export_with_provenance() {
    let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
    let g = Grid::new(1, 8.0, 0.125).unwrap();
    let ens = Ensemble::new(3, 77);
    let csvs = ens.map(|seed| {
        let f = sample_field(&k, &g, seed).unwrap();
        let s = assemble(&f, BoundaryCondition::Neumann).unwrap().eigenvalues_below(1.0, &Default::default()).unwrap();
        spectrum_csv(&s, &g, BoundaryCondition::Neumann, Some(seed))
    });
    for (i, csv) in csvs.iter().enumerate() {
        assert!(csv.contains(&format!("# seed_stream = {i}")));
        let rows: Vec<f64> = csv
            .lines()
            .skip_while(|l| *l != "index,eigenvalue")
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(rows.windows(2).all(|w| w[0] <= w[1]));
        assert!(rows.iter().all(|&e| e < 1.0));
    }
}
