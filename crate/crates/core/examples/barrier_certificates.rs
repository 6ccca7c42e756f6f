//! Barrier certificates for every indicator of the bottleneck structure.

use peierls_lab::classical::ClassicalHamiltonian;
use peierls_lab::lattice::build_torus;
use peierls_lab::peierls::{build_bottleneck_structure, verify_barrier_with};

fn main() -> peierls_lab::Result<()> {
    let l0 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(24);
    let lat = build_torus(l0)?;
    let bs = build_bottleneck_structure(&lat, 1, None)?;
    let h = ClassicalHamiltonian::uniform(&lat, 1.0);
    let audit = bs.audit();
    println!("L0={l0}: L={}, cap={}, {} indicators {:?}", bs.l, bs.cap, audit.total, audit.counts);
    println!("theta nominal {:.4}, audited per length {:.4}", audit.nominal_theta, audit.theta_per_length);
    for (occ, delta) in [(1.0, 1.0), (0.8, 0.6)] {
        let certs: Vec<_> = bs.indicators.iter().enumerate().map(|(i, b)| verify_barrier_with(&h, b, i, occ, delta)).collect();
        let worst = certs.iter().map(|c| c.barrier_value / c.length as f64).fold(f64::INFINITY, f64::min);
        println!("occupancy {occ}: all pass = {}, min barrier/L_B = {worst}", certs.iter().all(|c| c.pass));
    }
    Ok(())
}
