//! Classical Ising energies `H₀` and random-bond coupling sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::TorusLattice;
use crate::spin::SpinConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    /// `J` uniform on `[lo, hi]`.
    UniformInterval { lo: f64, hi: f64 },
    /// `J = low` with probability `p_low`, else `J = high`.
    TwoPoint { high: f64, low: f64, p_low: f64 },
    /// Finite table of values and probabilities.
    Table { values: Vec<f64>, probs: Vec<f64> },
}

/// i.i.d. coupling law with declared support `[−j1, j2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub j1: f64,
    pub j2: f64,
    pub seed: u64,
    /// Threshold Δ′ for the bias `p = P[J ≤ Δ′]`, if tracked.
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl DistributionSpec {
    pub fn constant(j: f64, seed: u64) -> Self {
        Self {
            kind: DistributionKind::Table { values: vec![j], probs: vec![1.0] },
            j1: (-j).max(0.0),
            j2: j.max(0.0),
            seed,
            threshold: None,
        }
    }

    /// `J = high` w.p. `1 − p_low`, `J = low` w.p. `p_low`; support and threshold set from the values.
    pub fn two_point(high: f64, low: f64, p_low: f64, seed: u64) -> Self {
        Self {
            kind: DistributionKind::TwoPoint { high, low, p_low },
            j1: (-low.min(high)).max(0.0),
            j2: high.max(low).max(0.0),
            seed,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, delta_prime: f64) -> Self {
        self.threshold = Some(delta_prime);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Distribution(m));
        if !(self.j1 >= 0.0 && self.j1.is_finite() && self.j2.is_finite()) {
            return bad(format!("support bounds must be finite with j1 >= 0, got j1={}, j2={}", self.j1, self.j2));
        }
        let inside = |v: f64| v >= -self.j1 && v <= self.j2;
        match &self.kind {
            DistributionKind::UniformInterval { lo, hi } => {
                if !(lo <= hi) {
                    return bad(format!("uniform interval needs lo <= hi, got [{lo}, {hi}]"));
                }
                if !inside(*lo) || !inside(*hi) {
                    return bad(format!("interval [{lo}, {hi}] leaves support [-{}, {}]", self.j1, self.j2));
                }
            }
            DistributionKind::TwoPoint { high, low, p_low } => {
                if !(0.0..=1.0).contains(p_low) {
                    return bad(format!("p_low must lie in [0, 1], got {p_low}"));
                }
                for v in [high, low] {
                    if !inside(*v) {
                        return bad(format!("value {v} leaves support [-{}, {}]", self.j1, self.j2));
                    }
                }
            }
            DistributionKind::Table { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("table needs matching nonempty values and probs".into());
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("table probabilities must be nonnegative and sum to 1".into());
                }
                if let Some(v) = values.iter().find(|v| !inside(**v)) {
                    return bad(format!("value {v} leaves support [-{}, {}]", self.j1, self.j2));
                }
            }
        }
        Ok(())
    }

    /// Exact `P[J ≤ t]`.
    pub fn prob_at_most(&self, t: f64) -> f64 {
        match &self.kind {
            DistributionKind::UniformInterval { lo, hi } => {
                if hi == lo {
                    (t >= *lo) as u8 as f64
                } else {
                    ((t - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            }
            DistributionKind::TwoPoint { high, low, p_low } => {
                (if *low <= t { *p_low } else { 0.0 }) + (if *high <= t { 1.0 - p_low } else { 0.0 })
            }
            DistributionKind::Table { values, probs } => values.iter().zip(probs).filter(|(v, _)| **v <= t).map(|(_, p)| p).sum(),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            DistributionKind::UniformInterval { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            DistributionKind::TwoPoint { high, low, p_low } => {
                if rng.gen::<f64>() < *p_low {
                    *low
                } else {
                    *high
                }
            }
            DistributionKind::Table { values, probs } => {
                let u = rng.gen::<f64>();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }
}

/// Generator for disorder realization `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One coupling per edge plus the sampling record.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingField {
    pub j: Vec<f64>,
    pub j1: f64,
    pub j2: f64,
    pub threshold: Option<f64>,
    /// Empirical fraction of couplings ≤ threshold.
    pub p_hat: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl CouplingField {
    pub fn uniform(n_edges: usize, j: f64) -> Self {
        Self::from_values(vec![j; n_edges], (-j).max(0.0), j.max(0.0), None)
    }

    pub fn from_values(j: Vec<f64>, j1: f64, j2: f64, threshold: Option<f64>) -> Self {
        let min = j.iter().copied().fold(f64::INFINITY, f64::min);
        let max = j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p_hat = threshold.map(|t| j.iter().filter(|&&v| v <= t).count() as f64 / j.len().max(1) as f64);
        Self { j, j1, j2, threshold, p_hat, min, max }
    }
}

pub fn sample_couplings(spec: &DistributionSpec, lat: &TorusLattice) -> Result<CouplingField> {
    sample_couplings_stream(spec, lat.n_edges(), 0)
}

/// Realization `stream` of `n_edges` i.i.d. couplings; independent of how streams are scheduled.
pub fn sample_couplings_stream(spec: &DistributionSpec, n_edges: usize, stream: u64) -> Result<CouplingField> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, stream);
    let j = (0..n_edges).map(|_| spec.draw(&mut rng)).collect();
    Ok(CouplingField::from_values(j, spec.j1, spec.j2, spec.threshold))
}

/// `H₀(z) = Σ J_ij (1 − z_i z_j)/2 − h_long Σ z_i + h_stag (Σ_even z_i − Σ_odd z_i)` on a graph.
#[derive(Clone, Debug)]
pub struct ClassicalHamiltonian {
    n_sites: usize,
    edges: Vec<(usize, usize)>,
    pub couplings: CouplingField,
    pub h_long: f64,
    pub h_stag: f64,
    stag_sign: Vec<i8>,
    incident: Vec<Vec<(usize, usize)>>,
    lattice: Option<TorusLattice>,
}

impl ClassicalHamiltonian {
    pub fn uniform(lat: &TorusLattice, j: f64) -> Self {
        Self::on_torus(lat, CouplingField::uniform(lat.n_edges(), j))
    }

    pub fn on_torus(lat: &TorusLattice, couplings: CouplingField) -> Self {
        assert_eq!(couplings.j.len(), lat.n_edges(), "one coupling per edge");
        let stag = (0..lat.n_sites()).map(|s| lat.sublattice_sign(s)).collect();
        let mut h = Self::on_graph(lat.n_sites(), lat.edge_list(), couplings);
        h.stag_sign = stag;
        h.lattice = Some(lat.clone());
        h
    }

    /// Arbitrary graph; the staggered sign alternates with site index.
    pub fn on_graph(n_sites: usize, edges: Vec<(usize, usize)>, couplings: CouplingField) -> Self {
        assert_eq!(couplings.j.len(), edges.len(), "one coupling per edge");
        let mut incident = vec![Vec::new(); n_sites];
        for (e, &(a, b)) in edges.iter().enumerate() {
            incident[a].push((e, b));
            incident[b].push((e, a));
        }
        let stag_sign = (0..n_sites).map(|s| if s % 2 == 0 { 1 } else { -1 }).collect();
        Self { n_sites, edges, couplings, h_long: 0.0, h_stag: 0.0, stag_sign, incident, lattice: None }
    }

    /// Open chain `0 − 1 − … − (n−1)` with uniform coupling.
    pub fn chain(n: usize, j: f64) -> Self {
        let edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        let m = edges.len();
        Self::on_graph(n, edges, CouplingField::uniform(m, j))
    }

    pub fn with_fields(mut self, h_long: f64, h_stag: f64) -> Self {
        self.h_long = h_long;
        self.h_stag = h_stag;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn lattice(&self) -> Option<&TorusLattice> {
        self.lattice.as_ref()
    }

    pub fn stag_sign(&self, s: usize) -> i8 {
        self.stag_sign[s]
    }

    /// Number of edges at the busiest site.
    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn incident(&self, s: usize) -> &[(usize, usize)] {
        &self.incident[s]
    }

    fn field_coeff(&self, s: usize) -> f64 {
        -self.h_long + self.h_stag * self.stag_sign[s] as f64
    }

    pub fn energy(&self, z: &SpinConfig) -> f64 {
        let mut e = 0.0;
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            if z.spin(a) != z.spin(b) {
                e += self.couplings.j[k];
            }
        }
        if self.h_long != 0.0 || self.h_stag != 0.0 {
            for s in 0..self.n_sites {
                e += self.field_coeff(s) * z.spin(s) as f64;
            }
        }
        e
    }

    /// Energy of the basis state with bit pattern `idx` (bit set = spin −1).
    #[inline]
    pub fn energy_index(&self, idx: u64) -> f64 {
        let mut e = 0.0;
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            if ((idx >> a) ^ (idx >> b)) & 1 == 1 {
                e += self.couplings.j[k];
            }
        }
        if self.h_long != 0.0 || self.h_stag != 0.0 {
            for s in 0..self.n_sites {
                let z = 1.0 - 2.0 * ((idx >> s) & 1) as f64;
                e += self.field_coeff(s) * z;
            }
        }
        e
    }

    /// Energy change from flipping site `s`.
    pub fn flip_delta(&self, z: &SpinConfig, s: usize) -> f64 {
        let zs = z.spin(s);
        let mut d = 0.0;
        for &(e, t) in &self.incident[s] {
            let j = self.couplings.j[e];
            if t == s {
                continue;
            }
            d += if z.spin(t) != zs { -j } else { j };
        }
        d - 2.0 * self.field_coeff(s) * zs as f64
    }

    /// Syndrome: one entry per edge, `true` iff `z_i z_j = −1`.
    pub fn check_values(&self, z: &SpinConfig) -> Vec<bool> {
        self.edges.iter().map(|&(a, b)| z.spin(a) != z.spin(b)).collect()
    }
}

pub fn classical_energy(h: &ClassicalHamiltonian, z: &SpinConfig) -> f64 {
    h.energy(z)
}

pub fn check_values(h: &ClassicalHamiltonian, z: &SpinConfig) -> Vec<bool> {
    h.check_values(z)
}

#[derive(Serialize, Deserialize)]
struct CouplingFileEdge {
    from: usize,
    to: usize,
    #[serde(rename = "J")]
    j: String,
}

#[derive(Serialize, Deserialize)]
struct CouplingFileLattice {
    #[serde(rename = "L0")]
    l0: usize,
    #[serde(rename = "Ly", default, skip_serializing_if = "Option::is_none")]
    ly: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CouplingFile {
    lattice: CouplingFileLattice,
    edges: Vec<CouplingFileEdge>,
    spec: DistributionSpec,
    seed: u64,
}

/// Coupling file JSON; couplings are shortest round-trip decimal strings.
pub fn coupling_file_json(lat: &TorusLattice, field: &CouplingField, spec: &DistributionSpec) -> String {
    let edges = lat.edge_list().into_iter().zip(&field.j).map(|((from, to), j)| CouplingFileEdge { from, to, j: format!("{j}") }).collect();
    let file = CouplingFile {
        lattice: CouplingFileLattice { l0: lat.lx(), ly: (!lat.is_square()).then_some(lat.ly()) },
        edges,
        spec: spec.clone(),
        seed: spec.seed,
    };
    serde_json::to_string_pretty(&file).expect("coupling file serializes")
}

pub fn read_coupling_file(s: &str) -> Result<(TorusLattice, CouplingField, DistributionSpec)> {
    let file: CouplingFile = serde_json::from_str(s)?;
    let lat = match file.lattice.ly {
        Some(ly) => TorusLattice::rect(file.lattice.l0, ly)?,
        None => crate::lattice::build_torus(file.lattice.l0)?,
    };
    if file.edges.len() != lat.n_edges() {
        return Err(Error::Config(format!("coupling file has {} edges, lattice needs {}", file.edges.len(), lat.n_edges())));
    }
    let mut j = Vec::with_capacity(file.edges.len());
    for (e, edge) in file.edges.iter().enumerate() {
        if lat.edge_sites(e) != (edge.from, edge.to) {
            return Err(Error::Config(format!("edge {e} endpoints do not match the lattice ordering")));
        }
        j.push(edge.j.parse::<f64>().map_err(|_| Error::Config(format!("bad coupling '{}'", edge.j)))?);
    }
    let field = CouplingField::from_values(j, file.spec.j1, file.spec.j2, file.spec.threshold);
    Ok((lat, field, file.spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_torus;

    #[test]
    fn uniform_energies() {
        let lat = build_torus(4).unwrap();
        let h = ClassicalHamiltonian::uniform(&lat, 1.5);
        let mut z = SpinConfig::all_plus(16);
        assert_eq!(h.energy(&z), 0.0);
        z.flip(5);
        assert_eq!(h.energy(&z), 6.0);
        assert_eq!(h.check_values(&z).iter().filter(|&&c| c).count(), 4);
        assert_eq!(h.energy_index(z.index()), 6.0);
    }

    #[test]
    fn flip_delta_matches_difference() {
        let lat = build_torus(4).unwrap();
        let spec =
            DistributionSpec { kind: DistributionKind::UniformInterval { lo: -0.5, hi: 1.5 }, j1: 0.5, j2: 1.5, seed: 3, threshold: None };
        let h = ClassicalHamiltonian::on_torus(&lat, sample_couplings(&spec, &lat).unwrap()).with_fields(0.3, -0.2);
        let z = SpinConfig::from_index(16, 0xb3a5);
        for s in 0..16 {
            let mut w = z.clone();
            w.flip(s);
            assert!((h.energy(&w) - h.energy(&z) - h.flip_delta(&z, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_spec_is_uniform() {
        let lat = build_torus(4).unwrap();
        let f = sample_couplings(&DistributionSpec::constant(1.0, 9), &lat).unwrap();
        assert!(f.j.iter().all(|&j| j == 1.0));
    }

    #[test]
    fn support_violation_rejected() {
        let mut spec = DistributionSpec::two_point(1.0, -0.05, 0.05, 1);
        spec.j1 = 0.01;
        assert!(spec.validate().is_err());
        let bad = DistributionSpec {
            kind: DistributionKind::Table { values: vec![1.0], probs: vec![0.5] },
            ..DistributionSpec::constant(1.0, 0)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn same_seed_same_field() {
        let lat = build_torus(6).unwrap();
        let spec = DistributionSpec::two_point(1.0, -0.05, 0.05, 42);
        assert_eq!(sample_couplings(&spec, &lat).unwrap(), sample_couplings(&spec, &lat).unwrap());
        let other = sample_couplings_stream(&spec, lat.n_edges(), 1).unwrap();
        assert_ne!(other.j, sample_couplings(&spec, &lat).unwrap().j);
    }

    #[test]
    fn prob_at_most_two_point() {
        let spec = DistributionSpec::two_point(1.0, -0.05, 0.05, 0);
        assert!((spec.prob_at_most(0.8) - 0.05).abs() < 1e-15);
        assert_eq!(spec.prob_at_most(1.0), 1.0);
        assert_eq!(spec.prob_at_most(-0.1), 0.0);
    }
}
