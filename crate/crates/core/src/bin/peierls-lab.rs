use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use peierls_lab::runner::{self, EXPERIMENTS};

/// Desk-scale Peierls bottleneck experiments.
#[derive(Parser, Debug)]
#[command(name = "peierls-lab", version, after_help = experiment_list())]
struct Cli {
    /// Experiment name, or `validate` to check a config file.
    experiment: String,
    /// JSON config layered over the experiment preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Further `--key value` overrides of config fields.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn experiment_list() -> String {
    let mut s = String::from("Experiments:\n");
    for (name, what) in EXPERIMENTS {
        s.push_str(&format!("  {name:<18}{what}\n"));
    }
    s
}

fn pairs(raw: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(k) = it.next() {
        let Some(key) = k.strip_prefix("--") else {
            return Err(format!("expected `--key value`, found `{k}`"));
        };
        if let Some((a, b)) = key.split_once('=') {
            out.push((a.to_string(), b.to_string()));
            continue;
        }
        let v = it.next().ok_or_else(|| format!("missing value for `--{key}`"))?;
        out.push((key.to_string(), v.clone()));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    let mut overrides = match pairs(&cli.overrides) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    // Global flags given after the first override land in the trailing list.
    let mut bad = None;
    overrides.retain(|(k, v)| match k.as_str() {
        "jobs" => {
            cli.jobs = v.parse().map_err(|_| bad = Some(format!("--jobs: not a count: {v}"))).ok();
            false
        }
        "seed" => {
            cli.seed = v.parse().map_err(|_| bad = Some(format!("--seed: not an integer: {v}"))).ok();
            false
        }
        "config" => {
            cli.config = Some(PathBuf::from(v));
            false
        }
        _ => true,
    });
    if let Some(e) = bad {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    let file = match cli.config.as_deref().map(runner::read_config_file).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: --config: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.experiment == "validate" {
        let Some(v) = file else {
            eprintln!("error: validate needs --config <file>");
            return ExitCode::from(2);
        };
        let errors = runner::validate_value(&v);
        if errors.is_empty() {
            println!("ok");
            return ExitCode::SUCCESS;
        }
        for e in errors {
            println!("error: {e}");
        }
        return ExitCode::from(1);
    }
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    let cfg = match runner::resolve(&cli.experiment, file.as_ref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match runner::run(&cfg) {
        Ok(m) => {
            println!("{} -> {}", m.experiment, m.out_dir.display());
            println!("config_hash {}", m.config_hash);
            for s in &m.stages {
                println!("  {:<22}{:>9.3} s", s.name, s.seconds);
            }
            match m.pass {
                Some(true) => println!("pass"),
                Some(false) => println!("FAIL"),
                None => {}
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
