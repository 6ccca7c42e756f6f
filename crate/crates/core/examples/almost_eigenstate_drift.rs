//! A single-well projection of the ground state is an almost eigenstate; its local observables drift slowly.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::dynamics::{linear_grid, observable_drift, Observable};
use peierls_lab::lattice::build_torus;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::quantum::{apply_mask, build_quantum_hamiltonian, lowest_eigenpairs, sector_mask, QuantumModel, Sector};

fn main() -> peierls_lab::Result<()> {
    let t_max: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100.0);
    let lat = build_torus(4)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let h = build_quantum_hamiltonian(&QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.1))?;
    let g = lowest_eigenpairs(&h, 1, Sector::Even, &LanczosOptions::default())?;
    let mut psi = g.vectors[0].clone();
    apply_mask(&mut psi, &sector_mask(&bs, 1)?);
    let curve = observable_drift(&psi, &h, &Observable::Site { site: 0 }, &linear_grid(t_max, 10))?;
    println!("delta = {:.4e}", curve.delta);
    for p in &curve.points {
        println!("t {:>8.1}  <Z_0> {:.10}  drift {:.3e}  bound {:.3e}", p.t, p.value, p.drift, p.bound);
    }
    println!("within bound: {}", curve.holds_strict);
    Ok(())
}
