use peierls_lab::classical::{ClassicalHamiltonian, DistributionSpec};
use peierls_lab::lattice::build_torus;
use peierls_lab::peierls::{
    barrier_from_couplings, build_bottleneck_structure, build_bottleneck_structure_with, chernoff_parameters, empirical_violation_rate,
    flip_interior, row_indicator_scan, verify_barrier, Overrides, StructureOptions,
};
use peierls_lab::SpinConfig;
use proptest::prelude::*;

/// Minimum over every excitation pattern with at least `m` excited checks of the energy returned by the flip.
fn brute_force_gain(js: &[f64], m: usize) -> f64 {
    let n = js.len();
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize >= m)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { js[i] } else { -js[i] }).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn worst_case_matches_exhaustive_patterns(
        js in prop::collection::vec(prop_oneof![Just(-0.1), -0.1f64..1.5, Just(1.0)], 4..=12),
        occ in prop_oneof![Just(0.8), Just(1.0), 0.55f64..1.0],
    ) {
        let cert = barrier_from_couplings(&js, 0, occ, 0.0);
        let m = (occ * js.len() as f64 - 1e-12).ceil() as usize;
        let want = brute_force_gain(&js, m);
        prop_assert!((cert.exact_worst_case - want).abs() < 1e-12);
        prop_assert!(cert.barrier_value <= cert.exact_worst_case + 1e-12);
    }

    #[test]
    fn full_occupancy_barrier_grows_with_any_coupling(
        js in prop::collection::vec(-0.1f64..1.5, 4..=12),
        pick in any::<prop::sample::Index>(),
        bump in 0.0f64..1.0,
    ) {
        let before = barrier_from_couplings(&js, 0, 1.0, 0.0).barrier_value;
        let mut raised = js.clone();
        raised[pick.index(js.len())] += bump;
        prop_assert!(barrier_from_couplings(&raised, 0, 1.0, 0.0).barrier_value >= before - 1e-12);
    }

    #[test]
    fn flip_across_a_full_wall_pays_its_length(
        js in prop::collection::vec(0.2f64..2.0, 72),
        pick in any::<prop::sample::Index>(),
    ) {
        let lat = build_torus(6).unwrap();
        let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
        let ham = ClassicalHamiltonian::on_torus(&lat, peierls_lab::classical::CouplingField::from_values(js, 0.0, 2.0, None));
        let i = pick.index(bs.indicators.len());
        let b = &bs.indicators[i];
        let z = flip_interior(&lat, &SpinConfig::all_plus(36), b);
        let wall: f64 = b.links().iter().map(|&e| ham.couplings.j[e]).sum();
        prop_assert!((ham.energy(&z) - ham.energy(&SpinConfig::all_plus(36)) - wall).abs() < 1e-10);
        let cert = verify_barrier(&ham, &bs, i, 1.0);
        prop_assert!((cert.barrier_value - wall).abs() < 1e-10);
    }
}

// At partial occupancy the strongest coupling can sit on an unexcited check,
// so raising it lowers the worst case.
#[test]
fn partial_occupancy_barrier_is_not_monotone() {
    let js = [1.0, 1.0, 1.0, 1.0, 1.0];
    let before = barrier_from_couplings(&js, 0, 0.8, 0.0).barrier_value;
    let mut raised = js;
    raised[4] = 2.0;
    let after = barrier_from_couplings(&raised, 0, 0.8, 0.0).barrier_value;
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn uniform_certificates_are_tight() {
    let lat = build_torus(12).unwrap();
    let bs = build_bottleneck_structure_with(
        &lat,
        1,
        Some(Overrides { l: 4, cap: 12 }),
        &StructureOptions { budget: 12, n_samples: 0, ..StructureOptions::default() },
    )
    .unwrap();
    let ham = ClassicalHamiltonian::uniform(&lat, 1.0);
    for i in 0..bs.indicators.len() {
        let lb = bs.indicators[i].len() as f64;
        let full = verify_barrier(&ham, &bs, i, 1.0);
        assert!(full.pass && full.barrier_value == lb);
        let partial = peierls_lab::peierls::verify_barrier_with(&ham, &bs.indicators[i], i, 0.8, 0.6);
        assert!(partial.pass && (partial.barrier_value - 0.6 * lb).abs() < 1e-12);
    }
}

#[test]
fn chernoff_example_matches_direct_evaluation() {
    let (p, delta, dp, j1, j2) = (0.05, 0.3, 0.8, 0.1, 1.2);
    let c = chernoff_parameters(p, delta, dp, j1, j2, 1.0, 4).unwrap();
    let a: f64 = 0.5 / 4.5;
    let chi = a * (a / p).ln() - a + p;
    assert!((c.a - a).abs() < 1e-15);
    assert!((c.chi - chi).abs() < 1e-10);
    assert!((c.chi - 0.0276).abs() < 5e-5);
}

/// The exact binomial tail never exceeds the Chernoff estimate `e^{−χ L_B}`.
#[test]
fn chernoff_dominates_binomial_tail() {
    let (p, a) = (0.05f64, 0.5f64 / 4.5);
    let chi = chernoff_parameters(p, 0.3, 0.8, 0.1, 1.2, 0.0, 4).unwrap().chi;
    for lb in [8usize, 20, 40, 80, 160] {
        let m = (a * lb as f64).ceil() as usize;
        let mut tail = 0.0;
        let mut log_binom = 0.0f64;
        for k in 0..=lb {
            if k > 0 {
                log_binom += ((lb - k + 1) as f64).ln() - (k as f64).ln();
            }
            if k >= m {
                tail += (log_binom + k as f64 * p.ln() + (lb - k) as f64 * (1.0 - p).ln()).exp();
            }
        }
        assert!(tail <= (-chi * lb as f64).exp(), "L_B={lb}: tail {tail}");
    }
}

#[test]
fn heavy_negative_mass_breaks_barriers() {
    let lat = build_torus(8).unwrap();
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
    let spec = DistributionSpec::two_point(1.2, -0.1, 0.5, 3).with_threshold(0.8);
    let rate = empirical_violation_rate(&spec, &lat, &bs, 0.3, 50).unwrap();
    assert!(rate.rate > 0.95, "{rate:?}");
}

#[test]
fn packed_bubbles_give_a_row_indicator() {
    let lat = build_torus(12).unwrap();
    let mut z = SpinConfig::all_plus(lat.n_sites());
    for bx in [0, 3, 6, 9] {
        for by in [0, 3, 6, 9] {
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                z.flip(lat.site(bx + dx, by + dy));
            }
        }
    }
    assert!((z.magnetization() as f64 / 144.0).abs() < 1.0 / 3.0);
    let row = row_indicator_scan(&lat, &z).unwrap().expect("a balanced row");
    assert!(row.total_length >= 4);
    assert!(row.loops.iter().all(|l| l.len() == 8));
}
