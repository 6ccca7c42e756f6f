use peierls_lab::classical::{sample_couplings, ClassicalHamiltonian, DistributionSpec};
use peierls_lab::gibbs::{almost_steady_norm, exact_gibbs, mc_escape_time, EscapeOptions, MarkovKernel};
use peierls_lab::lattice::{build_torus, TorusLattice};
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use proptest::prelude::*;

/// Direct sum over all 2^9 states of a 3×3 torus with coordinates written out by hand.
#[test]
fn three_by_three_matches_brute_force() {
    let lat = TorusLattice::rect(3, 3).unwrap();
    let ham = ClassicalHamiltonian::uniform(&lat, 1.0);
    let beta = 1.0;
    let table = exact_gibbs(&ham, beta).unwrap();
    let spin = |i: usize, x: usize, y: usize| if i >> ((x % 3) + 3 * (y % 3)) & 1 == 1 { -1.0 } else { 1.0 };
    let energies: Vec<f64> = (0..512)
        .map(|i| {
            let mut e = 0.0;
            for y in 0..3 {
                for x in 0..3 {
                    e += (1.0 - spin(i, x, y) * spin(i, x + 1, y)) / 2.0;
                    e += (1.0 - spin(i, x, y) * spin(i, x, y + 1)) / 2.0;
                }
            }
            e
        })
        .collect();
    let z: f64 = energies.iter().map(|e| (-beta * e).exp()).sum();
    assert!((table.log_z - z.ln()).abs() < 1e-12);
    for (i, e) in energies.iter().enumerate() {
        assert!((table.energies[i] - e).abs() < 1e-12);
        assert!((table.probabilities[i] - (-beta * e).exp() / z).abs() < 1e-14);
    }
}

fn small_model(seed: u64, h: f64) -> ClassicalHamiltonian {
    let lat = TorusLattice::rect(3, 3).unwrap();
    let field = sample_couplings(&DistributionSpec::two_point(1.0, -0.3, 0.3, seed), &lat).unwrap();
    ClassicalHamiltonian::on_torus(&lat, field).with_fields(h, 0.2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metropolis_is_reversible_and_stationary(seed in any::<u64>(), beta in 0.0f64..3.0, h in -0.5f64..0.5, lazy in any::<bool>()) {
        let ham = small_model(seed, h);
        let mut kernel = MarkovKernel::metropolis(&ham, beta);
        if lazy {
            kernel = kernel.lazy();
        }
        let table = exact_gibbs(&ham, beta).unwrap();
        let (e, p) = (&table.energies, &table.probabilities);
        for z in 0..512 {
            for s in 0..9 {
                let y = z ^ (1 << s);
                let fwd = kernel.transition(e, y, z) * p[z];
                let back = kernel.transition(e, z, y) * p[y];
                prop_assert!((fwd - back).abs() <= 1e-15);
            }
            let col: f64 = (0..9).map(|s| kernel.transition(e, z ^ (1 << s), z)).sum::<f64>() + kernel.transition(e, z, z);
            prop_assert!((col - 1.0).abs() < 1e-14);
        }
        let drift: f64 = kernel.apply_minus_identity(e, p).iter().map(|d| d.abs()).sum();
        prop_assert!(drift < 1e-14);
    }
}

/// `‖T P^W − P^W‖₁ = 2 Σ_{z∈W, y∉W} T_{y←z} P^W(z)`, summed here without the library's flow bookkeeping.
#[test]
fn steady_norm_equals_flow_sum() {
    let lat = build_torus(4).unwrap();
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
    let ham = ClassicalHamiltonian::uniform(&lat, 1.0);
    let classes = bs.classes().unwrap();
    for beta in [0.3, 1.0, 2.0, 4.0] {
        let table = exact_gibbs(&ham, beta).unwrap();
        for k in [1u8, 2] {
            let rep = almost_steady_norm(&MarkovKernel::metropolis(&ham, beta), &table, &bs, k).unwrap();
            let in_well = |i: usize| classes[i].is_well(k);
            let zw: f64 = (0..1 << 16).filter(|&i| in_well(i)).map(|i| table.probabilities[i]).sum();
            let mut flow = 0.0;
            for z in (0..1usize << 16).filter(|&i| in_well(i)) {
                for s in 0..16 {
                    let y = z ^ (1 << s);
                    if !in_well(y) {
                        let de = table.energies[y] - table.energies[z];
                        flow += (-beta * de).exp().min(1.0) / 16.0 * table.probabilities[z] / zw;
                    }
                }
            }
            assert!((rep.norm - 2.0 * flow).abs() < 1e-12, "beta {beta} k {k}: {} vs {}", rep.norm, 2.0 * flow);
            assert!((rep.flow_to_bottleneck + rep.flow_elsewhere - flow).abs() < 1e-12);
        }
    }
}

#[test]
fn infinite_temperature_escapes_quickly() {
    let lat = build_torus(4).unwrap();
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
    let kernel = MarkovKernel::metropolis(&ClassicalHamiltonian::uniform(&lat, 1.0), 0.0);
    let hist = mc_escape_time(&kernel, &bs, 1, &EscapeOptions { n_chains: 200, t_max: 100, seed: 5, burn_in: 10 }).unwrap();
    assert_eq!(hist.censored, 0);
    assert!(hist.median.unwrap() <= 3.0, "{:?}", hist.median);
}

#[test]
fn cold_chains_are_censored_on_8x8() {
    let lat = build_torus(8).unwrap();
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
    let kernel = MarkovKernel::metropolis(&ClassicalHamiltonian::uniform(&lat, 1.0), 4.0);
    let hist = mc_escape_time(&kernel, &bs, 1, &EscapeOptions { n_chains: 16, t_max: 200, seed: 1, burn_in: 20 }).unwrap();
    assert!(hist.median.is_none());
    assert_eq!(hist.censored, 16);
}

#[test]
fn doubling_beta_never_shortens_escape() {
    let lat = build_torus(4).unwrap();
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
    let ham = ClassicalHamiltonian::uniform(&lat, 1.0);
    let opts = EscapeOptions { n_chains: 400, t_max: 20_000, seed: 9, burn_in: 50 };
    let medians: Vec<f64> = [0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&b| mc_escape_time(&MarkovKernel::metropolis(&ham, b), &bs, 1, &opts).unwrap().median_or_inf())
        .collect();
    assert!(medians.windows(2).all(|w| w[1] >= w[0]), "{medians:?}");
}
