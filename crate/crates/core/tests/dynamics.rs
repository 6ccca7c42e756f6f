use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::dynamics::{energy, evolve, false_vacuum_lifetime, linear_grid, local_simulatability_error_for, to_complex, Observable};
use peierls_lab::lattice::TorusLattice;
use peierls_lab::linalg::{dense_propagator, LanczosOptions};
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::quantum::{build_quantum_hamiltonian, QuantumModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// `e^{−iHt}v` from 64 steps of a 24-term Taylor series, independent of the library's propagators.
fn stepped_exponential(h: &DMatrix<f64>, t: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
    let steps = 64;
    let hc: DMatrix<Complex64> = h.map(|x| Complex64::new(x, 0.0));
    let dt = Complex64::new(0.0, -t / steps as f64);
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..24 {
            term = &hc * &term * (dt / k as f64);
            acc += &term;
        }
        out = acc;
    }
    out
}

fn random_state(seed: u64, dim: usize) -> DVector<Complex64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(dim, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

#[test]
fn krylov_matches_dense_exponential_on_3x3() {
    let lat = TorusLattice::rect(3, 3).unwrap();
    let h = build_quantum_hamiltonian(&QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.5)).unwrap();
    let dense = h.dense().unwrap();
    for seed in 0..3 {
        let psi = random_state(seed, 512);
        let want = stepped_exponential(&dense, 1.0, &psi);
        assert!((want.norm() - 1.0).abs() < 1e-12);
        let got = evolve(psi.as_slice(), &h, 1.0).unwrap();
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}

#[test]
fn dense_propagator_matches_oracle() {
    let lat = TorusLattice::rect(2, 3).unwrap();
    let h = build_quantum_hamiltonian(&QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.7)).unwrap();
    let dense = h.dense().unwrap();
    for t in [0.1, 1.0, 7.5] {
        let u = dense_propagator(&dense, t);
        for seed in 0..3 {
            let psi = random_state(seed, 64);
            assert!((&u * &psi - stepped_exponential(&dense, t, &psi)).camax() < 1e-10, "t={t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_conserves_norm_and_energy(seed in any::<u64>(), t in 0.0f64..20.0, eps in 0.05f64..1.0) {
        let lat = TorusLattice::rect(3, 3).unwrap();
        let h = build_quantum_hamiltonian(&QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), eps)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..512).map(|_| rng.gen::<f64>() - 0.5).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let psi = to_complex(&v.iter().map(|x| x / nrm).collect::<Vec<_>>());
        let out = evolve(&psi, &h, t).unwrap();
        let n2: f64 = out.iter().map(|x| x.norm_sqr()).sum();
        prop_assert!((n2 - 1.0).abs() < 1e-10);
        prop_assert!((energy(&out, &h) - energy(&psi, &h)).abs() < 1e-9);
    }
}

#[test]
fn lr_error_decreases_with_region_on_short_chain() {
    let model = QuantumModel::tfim(ClassicalHamiltonian::chain(8, 1.0), 1.0);
    let obs = Observable::Site { site: 4 };
    let errs: Vec<f64> = [vec![3, 4, 5], vec![2, 3, 4, 5, 6], vec![1, 2, 3, 4, 5, 6, 7]]
        .iter()
        .map(|r| local_simulatability_error_for(&model, &obs, r, 1.0).unwrap())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert_eq!(local_simulatability_error_for(&model, &Observable::Identity, &[4], 1.0).unwrap(), 0.0);
}

#[test]
fn strong_tilt_decays_immediately() {
    let lat = TorusLattice::rect(4, 3).unwrap();
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
    let base = QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.2);
    let obs = Observable::Block { sites: (0..12).collect() };
    let reps = false_vacuum_lifetime(&base, &[2.0], &bs, &obs, &linear_grid(40.0, 80), &LanczosOptions::default()).unwrap();
    let t = reps[0].lifetime.expect("decays");
    assert!(t <= 10.0, "{t}");
}
