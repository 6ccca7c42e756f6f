//! Exact Gibbs mass of the bottlenecks against the Peierls bound.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::gibbs::{bottleneck_mass, exact_gibbs};
use peierls_lab::lattice::build_torus;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(4)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let h = ClassicalHamiltonian::uniform(&lat, 1.0);
    let beta_c = bs.theta / bs.delta;
    println!("theta = {:.4}, threshold beta = {beta_c:.4}", bs.theta);
    println!("{:>8} {:>12} {:>12} {:>12} {:>6}", "beta", "P(Phi_1)", "P(W_1)", "bound", "ok");
    for f in [0.5, 1.05, 1.5, 2.0, 4.0] {
        let beta = f * beta_c;
        let m = bottleneck_mass(&exact_gibbs(&h, beta)?, &bs, 1)?;
        let bound = m.bound.map_or("-".to_string(), |b| format!("{b:.4e}"));
        println!("{beta:>8.4} {:>12.4e} {:>12.4e} {bound:>12} {:>6}", m.p_phi, m.p_w, m.holds);
    }
    Ok(())
}
