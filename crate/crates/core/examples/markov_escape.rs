//! Almost-steadiness of the restricted Gibbs state and Monte Carlo escape times.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::gibbs::{almost_steady_norm, exact_gibbs, mc_escape_time, EscapeOptions, MarkovKernel};
use peierls_lab::lattice::build_torus;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(4)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let h = ClassicalHamiltonian::uniform(&lat, 1.0);
    for beta in [1.5, 2.0, 3.0] {
        let kernel = MarkovKernel::metropolis(&h, beta);
        let steady = almost_steady_norm(&kernel, &exact_gibbs(&h, beta)?, &bs, 1)?;
        let opts = EscapeOptions { n_chains: 200, t_max: 2000, seed: 1, burn_in: 100 };
        let hist = mc_escape_time(&kernel, &bs, 1, &opts)?;
        println!(
            "beta {beta}: |T P - P|_1 = {:.3e} (bound {:?}), median escape {:?} sweeps, {} censored",
            steady.norm, steady.bound, hist.median, hist.censored
        );
    }
    Ok(())
}
