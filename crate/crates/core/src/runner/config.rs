use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::classical::{DistributionKind, DistributionSpec};
use crate::error::{Error, Result};

/// Everything a run depends on. Field names double as `--key` overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(rename = "L0", alias = "l0")]
    pub l0: usize,
    /// Second side for rectangular lattices; square when absent.
    pub ly: Option<usize>,
    #[serde(rename = "R", alias = "r")]
    pub r: usize,
    #[serde(rename = "J", alias = "j")]
    pub j: f64,
    /// Coupling law; uniform `J` when absent.
    pub couplings: Option<DistributionKind>,
    /// Declared support `[−j1, j2]` of the coupling law.
    pub j1: Option<f64>,
    pub j2: Option<f64>,
    pub eps: f64,
    pub h: f64,
    pub h_stag: f64,
    #[serde(rename = "L", alias = "l")]
    pub l: Option<usize>,
    pub cap: Option<usize>,
    pub loop_budget: usize,
    pub n_samples: usize,
    /// Barrier density at occupancy 4/5; derived from the couplings when absent.
    pub delta: Option<f64>,
    /// Barrier density at occupancy 1; derived from the couplings when absent.
    pub delta_classical: Option<f64>,
    pub delta_prime: f64,
    pub betas: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub indicator_len: usize,
    pub hhat: Vec<f64>,
    pub h_sweep: Vec<f64>,
    pub r_b: Vec<usize>,
    pub chain_len: usize,
    pub chain_eps: f64,
    pub lr_time: f64,
    pub t_max: f64,
    pub n_times: usize,
    pub drift_t_max: f64,
    pub n_realizations: usize,
    pub n_chains: usize,
    pub sweeps: usize,
    pub out_threshold: f64,
    pub lanczos_tol: f64,
    pub seed: u64,
    /// Output directory; `runs/<experiment>-<hash prefix>` when absent.
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            l0: 4,
            ly: None,
            r: 1,
            j: 1.0,
            couplings: None,
            j1: None,
            j2: None,
            eps: 0.1,
            h: 0.0,
            h_stag: 0.0,
            l: None,
            cap: None,
            loop_budget: 12,
            n_samples: 10_000,
            delta: None,
            delta_classical: None,
            delta_prime: 0.8,
            betas: vec![],
            eps_list: vec![],
            indicator_len: 8,
            hhat: vec![],
            h_sweep: vec![],
            r_b: vec![1, 2, 3],
            chain_len: 10,
            chain_eps: 1.0,
            lr_time: 1.0,
            t_max: 50.0,
            n_times: 100,
            drift_t_max: 0.0,
            n_realizations: 1,
            n_chains: 0,
            sweeps: 1000,
            out_threshold: 1e-3,
            lanczos_tol: 1e-10,
            seed: 0,
            out: None,
        }
    }
}

pub const EXPERIMENTS: [(&str, &str); 9] = [
    ("pc-certify", "barrier certificates for every indicator at occupancy 1 and 4/5"),
    ("gibbs-bottleneck", "exact Gibbs mass of the bottlenecks against the Peierls bound"),
    ("markov-steady", "almost-steadiness of the restricted Gibbs state, with optional escape times"),
    ("ed-ssb", "ground doublet, SSB/LRO diagnostics, optional drift of a well projection"),
    ("an-decay", "E_B-window amplitudes, stability window and QPC check"),
    ("disorder-sweep", "Chernoff parameters and the empirical QPC violation rate"),
    ("tilt-select", "ground-state overlaps with the wells under a small tilt"),
    ("false-vacuum", "quench lifetimes from the disfavored well across a field sweep"),
    ("lr-sim", "local simulatability error and restricted-vs-full twin evolutions"),
];

pub fn known_experiment(name: &str) -> bool {
    EXPERIMENTS.iter().any(|(n, _)| *n == name)
}

/// Defaults tuned per experiment; files and overrides are layered on top.
pub fn preset(experiment: &str) -> Result<ExperimentConfig> {
    if !known_experiment(experiment) {
        let names: Vec<&str> = EXPERIMENTS.iter().map(|(n, _)| *n).collect();
        return Err(Error::Config(format!("unknown experiment `{experiment}`; expected one of {}", names.join(", "))));
    }
    let mut c = ExperimentConfig { experiment: experiment.to_string(), ..Default::default() };
    match experiment {
        "pc-certify" => c.l0 = 12,
        "gibbs-bottleneck" | "markov-steady" => {
            c.l = Some(4);
            c.cap = Some(8);
            if experiment == "markov-steady" {
                c.n_chains = 64;
            }
        }
        "ed-ssb" | "tilt-select" | "an-decay" => {
            c.l = Some(4);
            c.cap = Some(8);
            if experiment == "an-decay" {
                c.eps_list = vec![0.05, 0.1];
            }
            if experiment == "tilt-select" {
                c.hhat = vec![0.0, 1e-6];
            }
        }
        "disorder-sweep" => {
            c.l0 = 16;
            c.l = Some(4);
            c.cap = Some(12);
            c.n_samples = 0;
            c.couplings = Some(DistributionKind::TwoPoint { high: 1.0, low: -0.05, p_low: 0.05 });
            c.j1 = Some(0.1);
            c.j2 = Some(1.2);
            c.delta = Some(0.3);
            c.n_realizations = 1000;
        }
        "false-vacuum" => {
            c.ly = Some(3);
            c.l = Some(4);
            c.cap = Some(8);
            c.eps = 0.2;
            c.h_sweep = vec![0.0, 0.1, 0.2];
            c.t_max = 1000.0;
            c.n_times = 1000;
        }
        "lr-sim" => {
            c.ly = Some(3);
            c.l = Some(4);
            c.cap = Some(8);
        }
        _ => {}
    }
    Ok(c)
}

/// Parses a `--key value` right-hand side: JSON when it parses, comma lists as arrays, else a string.
pub fn parse_override_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(|p| parse_override_value(p.trim())).collect());
    }
    Value::String(raw.to_string())
}

fn canonical_key(key: &str) -> String {
    let k = key.trim_start_matches("--").replace('-', "_");
    match k.as_str() {
        "l0" | "L0" => "L0".into(),
        "r" | "R" => "R".into(),
        "j" | "J" => "J".into(),
        "l" | "L" => "L".into(),
        _ => k,
    }
}

/// Layers `file` and then `overrides` over the experiment preset, and validates the result.
pub fn resolve(experiment: &str, file: Option<&Value>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut base = serde_json::to_value(preset(experiment)?)?;
    let obj = base.as_object_mut().expect("config serializes to an object");
    let mut layer = |m: &Map<String, Value>| {
        for (k, v) in m {
            obj.insert(canonical_key(k), v.clone());
        }
    };
    if let Some(f) = file {
        let m = f.as_object().ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
        if let Some(e) = m.get("experiment").and_then(Value::as_str) {
            if e != experiment {
                return Err(Error::Config(format!("config file is for `{e}`, but `{experiment}` was requested")));
            }
        }
        layer(m);
    }
    let mut m = Map::new();
    for (k, v) in overrides {
        m.insert(k.clone(), parse_override_value(v));
    }
    layer(&m);
    let cfg: ExperimentConfig = serde_json::from_value(base).map_err(|e| Error::Config(format!("schema violation: {e}")))?;
    let errors = validate(&cfg);
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }
    Ok(cfg)
}

/// Schema check of a config file; returns every problem found.
pub fn validate_value(v: &Value) -> Vec<String> {
    let Some(name) = v.get("experiment").and_then(Value::as_str) else {
        return vec!["experiment: missing or not a string".into()];
    };
    match resolve_unchecked(name, v) {
        Ok(cfg) => validate(&cfg),
        Err(e) => vec![e.to_string()],
    }
}

fn resolve_unchecked(experiment: &str, file: &Value) -> Result<ExperimentConfig> {
    let mut base = serde_json::to_value(preset(experiment)?)?;
    let obj = base.as_object_mut().expect("config serializes to an object");
    let m = file.as_object().ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    for (k, v) in m {
        obj.insert(canonical_key(k), v.clone());
    }
    serde_json::from_value(base).map_err(|e| Error::Config(format!("schema violation: {e}")))
}

/// Semantic checks, each message naming its field.
pub fn validate(c: &ExperimentConfig) -> Vec<String> {
    let mut e = Vec::new();
    if !known_experiment(&c.experiment) {
        e.push(format!("experiment: unknown name `{}`", c.experiment));
    }
    match c.ly {
        None if c.l0 < 4 || !c.l0.is_multiple_of(2) => e.push(format!("L0: must be an even integer >= 4, got {}", c.l0)),
        Some(ly) if c.l0 < 2 || ly < 2 => e.push(format!("L0/ly: rectangular sides must be >= 2, got {}x{ly}", c.l0)),
        _ => {}
    }
    if c.r < 1 {
        e.push("R: must be >= 1".into());
    }
    let nonneg = |name: &str, x: f64, e: &mut Vec<String>| {
        if !(x >= 0.0 && x.is_finite()) {
            e.push(format!("{name}: must be finite and >= 0, got {x}"));
        }
    };
    nonneg("eps", c.eps, &mut e);
    nonneg("chain_eps", c.chain_eps, &mut e);
    nonneg("t_max", c.t_max, &mut e);
    nonneg("drift_t_max", c.drift_t_max, &mut e);
    nonneg("lr_time", c.lr_time, &mut e);
    for (i, x) in c.eps_list.iter().enumerate() {
        nonneg(&format!("eps_list[{i}]"), *x, &mut e);
    }
    for (i, x) in c.betas.iter().enumerate() {
        nonneg(&format!("betas[{i}]"), *x, &mut e);
    }
    for (i, x) in c.h_sweep.iter().enumerate() {
        nonneg(&format!("h_sweep[{i}]"), *x, &mut e);
    }
    if !c.j.is_finite() {
        e.push("J: must be finite".into());
    }
    match (c.l, c.cap) {
        (Some(l), Some(cap)) if l < 4 || cap < l => e.push(format!("L/cap: need 4 <= L <= cap, got L={l}, cap={cap}")),
        (Some(_), None) | (None, Some(_)) => e.push("L/cap: give both or neither".into()),
        _ => {}
    }
    if let Some(d) = c.delta {
        if d <= 0.0 {
            e.push(format!("delta: must be > 0, got {d}"));
        }
    }
    if c.n_times < 1 {
        e.push("n_times: must be >= 1".into());
    }
    if c.n_realizations < 1 {
        e.push("n_realizations: must be >= 1".into());
    }
    if c.lanczos_tol <= 0.0 {
        e.push("lanczos_tol: must be > 0".into());
    }
    if c.r_b.is_empty() && c.experiment == "lr-sim" {
        e.push("r_b: need at least one radius".into());
    }
    if let Err(err) = c.distribution().validate() {
        e.push(format!("couplings: {err}"));
    }
    e
}

impl ExperimentConfig {
    /// Coupling law with the configured support and seed.
    pub fn distribution(&self) -> DistributionSpec {
        let mut spec = match &self.couplings {
            None => DistributionSpec::constant(self.j, self.seed),
            Some(kind) => {
                let mut s = DistributionSpec::constant(self.j, self.seed);
                s.kind = kind.clone();
                if let DistributionKind::TwoPoint { high, low, .. } = kind {
                    s.j1 = (-low.min(*high)).max(0.0);
                    s.j2 = high.max(*low).max(0.0);
                }
                s
            }
        };
        if let Some(j1) = self.j1 {
            spec.j1 = j1;
        }
        if let Some(j2) = self.j2 {
            spec.j2 = j2;
        }
        spec
    }

    pub fn is_disordered(&self) -> bool {
        self.couplings.is_some()
    }

    /// SHA-256 of the canonical JSON, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out");
        let bytes = serde_json::to_vec(&v).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_layer_over_preset() {
        let c = resolve("ed-ssb", None, &[("--L0".into(), "6".into()), ("eps".into(), "0.2".into())]).unwrap();
        assert_eq!(c.l0, 6);
        assert_eq!(c.eps, 0.2);
        assert_eq!(c.cap, Some(8));
    }

    #[test]
    fn comma_lists() {
        assert_eq!(parse_override_value("0.1,0.2"), serde_json::json!([0.1, 0.2]));
        assert_eq!(parse_override_value("[1,2]"), serde_json::json!([1, 2]));
    }

    #[test]
    fn odd_l0_names_field() {
        let errs = validate_value(&serde_json::json!({"experiment": "ed-ssb", "L0": 5}));
        assert!(errs.iter().any(|e| e.starts_with("L0")), "{errs:?}");
    }

    #[test]
    fn unknown_key_is_schema_error() {
        let errs = validate_value(&serde_json::json!({"experiment": "ed-ssb", "bogus": 1}));
        assert!(errs[0].contains("bogus"));
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = preset("lr-sim").unwrap();
        let b = ExperimentConfig { out: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }
}
