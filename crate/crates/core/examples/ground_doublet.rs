//! Lowest TFIM doublet by sector-resolved Lanczos, and state export.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::lattice::build_torus;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::quantum::{build_quantum_hamiltonian, lowest_eigenpairs, read_state, write_state, QuantumModel, Sector};

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(4)?;
    for eps in [0.5, 0.25] {
        let model = QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), eps);
        let h = build_quantum_hamiltonian(&model)?;
        let r = lowest_eigenpairs(&h, 2, Sector::Global, &LanczosOptions::default())?;
        println!("eps {eps}: E = {:?}, parities {:?}, dE0 = {:?}, residuals {:?}", r.values, r.parities, r.delta_e0, r.residuals);
        if eps == 0.25 {
            let mut buf = Vec::new();
            write_state(&mut buf, &r.vectors[0], lat.n_sites(), Sector::Even)?;
            let (back, n, sector) = read_state(buf.as_slice())?;
            println!("exported {} bytes, read back N={n} {sector:?}, identical = {}", buf.len(), back == r.vectors[0]);
        }
    }
    Ok(())
}
