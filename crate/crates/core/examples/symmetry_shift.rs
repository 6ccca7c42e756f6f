//! Truncated-symmetry shift of a perturbation that breaks the flip symmetry locally.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::linalg::LanczosOptions;
use peierls_lab::quantum::{truncated_symmetry_shift, LocalTerm, QuantumModel};

fn main() -> peierls_lab::Result<()> {
    let eps = 0.2;
    let mut terms: Vec<LocalTerm> = (0..8).map(|s| LocalTerm::x(s, eps)).collect();
    terms.extend((0..8).map(|s| LocalTerm::zz(s, (s + 1) % 8, eps)));
    terms.push(LocalTerm::z(3, eps));
    let model = QuantumModel::new(ClassicalHamiltonian::chain(8, 1.0), terms)?;
    for region in [vec![2, 3, 4], vec![0, 1, 2, 3, 4, 5]] {
        let s = truncated_symmetry_shift(&model, &region, &LanczosOptions::default())?;
        println!("A = {region:?}: |dV| exact {:.4}, triangle {:.4}, 2|dA|eps {:.4}, holds {}", s.exact, s.triangle, s.bound, s.holds);
    }
    Ok(())
}
