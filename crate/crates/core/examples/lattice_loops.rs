//! Torus geometry, domain-wall loops and configuration classes.

use peierls_lab::lattice::{build_torus, classify_config, dw_decompose, enumerate_loops, loops_to_json};
use peierls_lab::peierls::{build_bottleneck_structure, Overrides};
use peierls_lab::SpinConfig;

fn main() -> peierls_lab::Result<()> {
    let lat = build_torus(6)?;
    let loops = enumerate_loops(&lat, 8, None)?;
    let mut by_len = std::collections::BTreeMap::new();
    for lp in &loops {
        *by_len.entry(lp.len()).or_insert(0) += 1;
    }
    println!("6x6 torus: {} sites, {} edges", lat.n_sites(), lat.n_edges());
    println!("contractible loops up to length 8: {by_len:?}");

    // A 2x2 island of minus spins in a plus sea.
    let mut z = SpinConfig::all_plus(lat.n_sites());
    for (x, y) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
        z.flip(lat.site(x, y));
    }
    let dec = dw_decompose(&lat, &z);
    println!(
        "island: {} loop(s), lengths {:?}, sea {:?}",
        dec.loops.len(),
        dec.loops.iter().map(|l| l.len()).collect::<Vec<_>>(),
        dec.sea_value
    );

    let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 }))?;
    println!("class with L=4, cap=8: {:?}", classify_config(&z, &bs));
    println!("island loops as JSON: {}", loops_to_json(&dec.loops));
    Ok(())
}
