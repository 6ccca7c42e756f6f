//! Truncating the Hamiltonian to a ball around the observable, and the restricted-vs-full metastability bound.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::dynamics::{linear_grid, local_simulatability_error, restricted_vs_full, EvolutionJob, Observable};
use peierls_lab::lattice::TorusLattice;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::quantum::QuantumModel;

fn main() -> peierls_lab::Result<()> {
    let chain = QuantumModel::tfim(ClassicalHamiltonian::chain(8, 1.0), 1.0);
    for r in 1..=3 {
        let d = local_simulatability_error(&chain, &Observable::Site { site: 4 }, r, 1.0)?;
        println!("8-site chain, R_B = {r}: delta_LR = {d:.4e}");
    }

    let lat = TorusLattice::rect(4, 3)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let job = EvolutionJob {
        model: QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.1),
        region: None,
        observable: Observable::Block { sites: (0..lat.n_sites()).collect() },
        t_grid: linear_grid(50.0, 10),
        m: 1,
        initial: None,
    };
    let rep = restricted_vs_full(&job, &bs, 1, &LanczosOptions::default())?;
    println!("4x3 twin run: delta {:.3e}, delta' {:.3e}, M {}", rep.delta, rep.delta_prime, rep.m);
    for p in &rep.points {
        println!("t {:>5.1}  deviation {:.3e}  bound {:.3e}", p.t, p.deviation, p.bound);
    }
    Ok(())
}
