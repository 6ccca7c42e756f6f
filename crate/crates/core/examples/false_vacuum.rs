//! Quench from the disfavored well: lifetimes across a longitudinal-field sweep.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::dynamics::{false_vacuum_lifetime, lifetimes_monotone, linear_grid, Observable};
use peierls_lab::lattice::TorusLattice;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::quantum::QuantumModel;

fn main() -> peierls_lab::Result<()> {
    let lat = TorusLattice::rect(4, 3)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let base = QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.2);
    let obs = Observable::Block { sites: (0..lat.n_sites()).collect() };
    let hs = [0.0, 0.1, 0.2, 1.0, 2.0];
    let reports = false_vacuum_lifetime(&base, &hs, &bs, &obs, &linear_grid(200.0, 400), &LanczosOptions::default())?;
    for r in &reports {
        println!(
            "h {:>4}: <O_B(0)> {:.4}, lifetime {:?}, max drift {:.3e}, censored {}",
            r.h, r.initial_value, r.lifetime, r.max_drift, r.censored
        );
    }
    let (pairs, ok) = lifetimes_monotone(&reports);
    println!("T(h/2) >= T(h) on {pairs:?}: {ok}");
    Ok(())
}
