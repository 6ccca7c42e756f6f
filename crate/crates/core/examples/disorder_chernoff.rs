//! Chernoff criterion for random couplings and the empirical rate of QPC violations.

use peierls_lab::classical::DistributionSpec;
use peierls_lab::lattice::build_torus;
use peierls_lab::peierls::{build_bottleneck_structure_with, chernoff_parameters, empirical_violation_rate, Overrides, StructureOptions};

fn main() -> peierls_lab::Result<()> {
    let (delta, delta_prime, j1, j2) = (0.3, 0.8, 0.1, 1.2);
    let lat = build_torus(16)?;
    let opts = StructureOptions { n_samples: 0, ..StructureOptions::default() };
    let bs = build_bottleneck_structure_with(&lat, 1, Some(Overrides { l: 4, cap: 12 }), &opts)?;
    for p_low in [0.05, 0.01, 0.001] {
        let mut spec = DistributionSpec::two_point(1.0, -0.05, p_low, 3).with_threshold(delta_prime);
        spec.j1 = j1;
        spec.j2 = j2;
        let c = chernoff_parameters(spec.prob_at_most(delta_prime), delta, delta_prime, j1, j2, bs.theta, bs.l)?;
        let rate = empirical_violation_rate(&spec, &lat, &bs, delta, 200)?;
        println!(
            "p = {p_low}: a = {:.4}, chi = {:.4}, theta = {:.4}, bound {:.3}, empirical {:.3} {:?}",
            c.a, c.chi, c.theta, c.bound, rate.rate, rate.wilson
        );
    }
    Ok(())
}
