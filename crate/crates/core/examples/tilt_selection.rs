//! A tiny tilt selects one well; without it the ground state is an equal superposition.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::lattice::build_torus;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::quantum::{tilted_ground_overlap, QuantumModel};

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(4)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let model = QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), 0.1);
    for hhat in [0.0, 1e-9, 1e-6, 1e-3] {
        let t = tilted_ground_overlap(&model, hhat, &bs, &LanczosOptions::default())?;
        println!("hhat {hhat:e}: overlaps {:?}, favored well {} -> {:.9}", t.overlaps, t.favored, t.overlap_favored);
    }
    Ok(())
}
