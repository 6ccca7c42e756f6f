//! Random-bond coupling fields and the coupling file format.

use peierls_lab::classical::{coupling_file_json, read_coupling_file, sample_couplings, ClassicalHamiltonian, DistributionSpec};
use peierls_lab::lattice::build_torus;
use peierls_lab::SpinConfig;

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(8)?;
    let spec = DistributionSpec::two_point(1.0, -0.05, 0.05, 7).with_threshold(0.8);
    let field = sample_couplings(&spec, &lat)?;
    let weak = field.j.iter().filter(|&&j| j < 0.0).count();
    println!("{} edges, {weak} antiferromagnetic (expected {:.1})", field.j.len(), 0.05 * field.j.len() as f64);
    println!("P[J <= 0.8] = {}", spec.prob_at_most(0.8));

    let h = ClassicalHamiltonian::on_torus(&lat, field.clone());
    let plus = SpinConfig::all_plus(lat.n_sites());
    println!("E(all plus) = {:.3}, excited checks = {}", h.energy(&plus), h.check_values(&plus).iter().filter(|&&c| c).count());

    let text = coupling_file_json(&lat, &field, &spec);
    let (lat2, field2, spec2) = read_coupling_file(&text)?;
    assert!(lat2 == lat && field2.j == field.j && spec2 == spec);
    println!("coupling file round trip ok ({} bytes)", text.len());
    Ok(())
}
