//! Drives a registered experiment from code, as the binary does.

use peierls_lab::runner::{resolve, run, EXPERIMENTS};

fn main() -> peierls_lab::Result<()> {
    for (name, what) in EXPERIMENTS {
        println!("{name:<18}{what}");
    }
    let dir = std::env::temp_dir().join("peierls-lab-example");
    let overrides = vec![("L0".to_string(), "24".to_string()), ("out".to_string(), dir.display().to_string())];
    let cfg = resolve("pc-certify", None, &overrides)?;
    let m = run(&cfg)?;
    println!("wrote {:?} to {} (hash {}), pass = {:?}", m.artifacts, m.out_dir.display(), &m.config_hash[..12], m.pass);
    Ok(())
}
