//! E_B-window amplitudes of the well ground state, the stability window and the QPC check.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::lattice::build_torus;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::quantum::{
    build_quantum_hamiltonian, eb_decomposition, eps_window, qpc_check, restricted_ground, sector_mask, QuantumModel,
};

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(4)?;
    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    let b = bs.indicators.iter().find(|b| b.len() == 8).expect("length-8 indicator");
    let delta = 0.6;
    let opts = LanczosOptions::default();
    for eps in [0.05, 0.1] {
        let model = QuantumModel::tfim(ClassicalHamiltonian::uniform(&lat, 1.0), eps);
        let h = build_quantum_hamiltonian(&model)?;
        let g = restricted_ground(&h, &sector_mask(&bs, 1)?, &opts)?;
        let d = eb_decomposition(&g.vector, b, &lat, &model, Some(bs.l))?;
        let w = eps_window(&model, delta, bs.theta);
        let q = qpc_check(&h, &bs, 1, b, delta, &opts)?;
        println!("eps {eps}: A = {:?}, ceiling 3g eps/Delta = {}", d.amplitudes, d.ceiling(delta));
        println!(
            "  step decay {}, head bound {}, inside window {} (limit {:.2e})",
            d.step_decay_holds(delta),
            d.head_bound_holds(delta),
            w.inside,
            w.limit
        );
        println!("  QPC: min {:.4} >= {:.4} + {:.4}: {}", q.constrained_min, q.required_gap, q.h_k_min, q.holds);
    }
    Ok(())
}
