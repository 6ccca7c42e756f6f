//! Experiment registry, config handling and result emission behind the `peierls-lab` binary.

pub mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::{preset, resolve, validate, validate_value, ExperimentConfig, EXPERIMENTS};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTime {
    pub name: String,
    pub seconds: f64,
}

/// Wall time per named stage; repeated names accumulate.
#[derive(Default)]
pub struct Stages {
    times: Vec<StageTime>,
}

impl Stages {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let dt = start.elapsed().as_secs_f64();
        match self.times.iter_mut().find(|s| s.name == name) {
            Some(s) => s.seconds += dt,
            None => self.times.push(StageTime { name: name.to_string(), seconds: dt }),
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub stages: Vec<StageTime>,
    pub artifacts: Vec<String>,
    pub out_dir: PathBuf,
    pub pass: Option<bool>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}-{}", cfg.experiment, &cfg.hash()[..12]))
}

/// Prefixes the config hash in a form the file type tolerates.
fn stamp(name: &str, body: &str, hash: &str) -> String {
    if name.ends_with(".jsonl") {
        format!("{}\n{body}", json!({ "config_hash": hash }))
    } else {
        format!("# config_hash={hash}\n{body}")
    }
}

/// Runs one experiment and writes `results.csv`, `report.json`, any extra files and `manifest.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let errors = validate(cfg);
    if !errors.is_empty() {
        return Err(crate::Error::Config(errors.join("; ")));
    }
    let started_unix = unix_now();
    let hash = cfg.hash();
    let out_dir = cfg.out.as_ref().map(PathBuf::from).unwrap_or_else(|| default_out_dir(cfg));
    let mut stages = Stages::default();
    let output = experiments::dispatch(cfg, &mut stages)?;
    fs::create_dir_all(&out_dir)?;
    let mut artifacts = Vec::new();
    let mut write = |name: &str, body: &str| -> Result<()> {
        fs::write(out_dir.join(name), body)?;
        artifacts.push(name.to_string());
        Ok(())
    };
    write("results.csv", &stamp("results.csv", &output.csv, &hash))?;
    let mut embedded = serde_json::to_value(cfg)?;
    embedded.as_object_mut().expect("object").remove("out");
    let report = json!({
        "experiment": cfg.experiment,
        "config_hash": hash,
        "config": embedded,
        "pass": output.pass,
        "result": output.report,
    });
    write("report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    for (name, body) in &output.extras {
        write(name, &stamp(name, body, &hash))?;
    }
    artifacts.push("manifest.json".into());
    let manifest = RunManifest {
        experiment: cfg.experiment.clone(),
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: unix_now(),
        stages: stages.times,
        artifacts,
        out_dir: out_dir.clone(),
        pass: output.pass,
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Reads a JSON config file.
pub fn read_config_file(path: &Path) -> Result<serde_json::Value> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
