use peierls_lab::classical::{
    check_values, classical_energy, coupling_file_json, read_coupling_file, sample_couplings, ClassicalHamiltonian, CouplingField,
    DistributionKind, DistributionSpec,
};
use peierls_lab::lattice::{build_torus, TorusLattice};
use peierls_lab::SpinConfig;
use proptest::prelude::*;

/// Naive per-edge sum over explicit lattice coordinates.
fn naive_energy(lat: &TorusLattice, js: &[f64], h_long: f64, z: &SpinConfig) -> f64 {
    let (lx, ly) = (lat.lx(), lat.ly());
    let spin = |x: usize, y: usize| z.spin((x % lx) + lx * (y % ly)) as f64;
    let mut e = 0.0;
    for y in 0..ly {
        for x in 0..lx {
            let s = x + lx * y;
            e += js[2 * s] * (1.0 - spin(x, y) * spin(x + 1, y)) / 2.0;
            e += js[2 * s + 1] * (1.0 - spin(x, y) * spin(x, y + 1)) / 2.0;
            e -= h_long * spin(x, y);
        }
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn energy_matches_naive_sum(
        js in prop::collection::vec(-1.0f64..2.0, 72),
        idx in 0u64..(1 << 36),
        h in -0.5f64..0.5,
    ) {
        let lat = build_torus(6).unwrap();
        let field = CouplingField::from_values(js.clone(), 1.0, 2.0, None);
        let ham = ClassicalHamiltonian::on_torus(&lat, field).with_fields(h, 0.0);
        let z = SpinConfig::from_index(36, idx);
        let want = naive_energy(&lat, &js, h, &z);
        prop_assert!((ham.energy(&z) - want).abs() < 1e-10);
        prop_assert!((ham.energy_index(idx) - want).abs() < 1e-10);
    }

    #[test]
    fn syndrome_weight_is_energy(idx in 0u64..(1 << 36), j in 0.1f64..3.0) {
        let lat = build_torus(6).unwrap();
        let ham = ClassicalHamiltonian::uniform(&lat, j);
        let z = SpinConfig::from_index(36, idx);
        let weight = check_values(&ham, &z).iter().filter(|&&c| c).count();
        prop_assert!((weight as f64 * j - classical_energy(&ham, &z)).abs() < 1e-10);
    }

    #[test]
    fn coupling_file_round_trip(seed in any::<u64>(), p in 0.0f64..1.0) {
        let lat = build_torus(4).unwrap();
        let spec = DistributionSpec::two_point(1.0, -0.05, p, seed).with_threshold(0.8);
        let field = sample_couplings(&spec, &lat).unwrap();
        let (lat2, field2, spec2) = read_coupling_file(&coupling_file_json(&lat, &field, &spec)).unwrap();
        prop_assert_eq!(lat2, lat);
        prop_assert_eq!(field2.j, field.j);
        prop_assert_eq!(spec2, spec);
    }
}

#[test]
fn two_point_fraction_within_three_sigma() {
    let lat = build_torus(48).unwrap();
    let n = lat.n_edges() as f64;
    for seed in 0..5 {
        let spec = DistributionSpec::two_point(1.0, -0.05, 0.05, seed);
        let field = sample_couplings(&spec, &lat).unwrap();
        let p_hat = field.j.iter().filter(|&&j| j < 0.0).count() as f64 / n;
        let sigma = (0.05 * 0.95 / n).sqrt();
        assert!((p_hat - 0.05).abs() <= 3.0 * sigma, "seed {seed}: p_hat {p_hat}");
        assert!(field.j.iter().all(|&j| j == 1.0 || j == -0.05));
    }
}

#[test]
fn same_seed_same_couplings_different_seed_different() {
    let lat = build_torus(8).unwrap();
    let a = sample_couplings(&DistributionSpec::two_point(1.0, -0.05, 0.3, 11), &lat).unwrap();
    let b = sample_couplings(&DistributionSpec::two_point(1.0, -0.05, 0.3, 11), &lat).unwrap();
    let c = sample_couplings(&DistributionSpec::two_point(1.0, -0.05, 0.3, 12), &lat).unwrap();
    assert_eq!(a.j, b.j);
    assert_ne!(a.j, c.j);
}

#[test]
fn support_is_declared() {
    let spec = DistributionSpec::two_point(1.2, -0.1, 0.5, 0);
    assert_eq!((spec.j1, spec.j2), (0.1, 1.2));
    assert!(matches!(spec.kind, DistributionKind::TwoPoint { .. }));
    assert!(spec.validate().is_ok());
}
