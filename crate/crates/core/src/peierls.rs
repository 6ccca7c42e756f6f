//! Bottleneck structures, energy-barrier certificates and the disorder Chernoff criterion.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{sample_couplings_stream, ClassicalHamiltonian, DistributionSpec};
use crate::error::{Error, Result};
use crate::lattice::{
    classify_decomposition, dw_decompose, enumerate_loops_between, sample_loops, ConfigClass, DWLoop, TorusLattice, DEFAULT_LOOP_BUDGET,
};
use crate::spin::SpinConfig;

/// Desk-scale replacement for the asymptotic `L = L0/(6R)` and `cap = 4RL`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub l: usize,
    pub cap: usize,
}

#[derive(Clone, Debug)]
pub struct StructureOptions {
    /// Longest loop length enumerated exhaustively.
    pub budget: usize,
    /// Loops sampled with lengths in `(budget, cap]` when the cap exceeds the budget.
    pub n_samples: usize,
    pub sample_seed: u64,
    /// Barrier density Δ the structure is certified against.
    pub delta: f64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_LOOP_BUDGET, n_samples: 10_000, sample_seed: 0, delta: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct BottleneckStructure {
    lattice: TorusLattice,
    pub r: usize,
    /// Well loop cap.
    pub l: usize,
    /// Bottleneck loop cap.
    pub cap: usize,
    pub delta: f64,
    /// Entropy rate used by the bounds: `5R·log 3` at asymptotic parameters, audited otherwise.
    pub theta: f64,
    /// Indicator family, one loop each, lengths in `[L, cap]`.
    pub indicators: Vec<DWLoop>,
    /// Lengths up to this value were enumerated exhaustively.
    pub exhaustive_max: usize,
    /// Whether part of the family comes from sampling (counts above `exhaustive_max` are then incomplete).
    pub sampled: bool,
    pub desk_scale: bool,
    index: HashMap<Vec<usize>, usize>,
    classes: OnceLock<Vec<ConfigClass>>,
}

/// Largest lattice whose configurations are classified exhaustively.
pub const CLASS_TABLE_BUDGET: usize = 24;

#[derive(Clone, Debug, Serialize)]
pub struct IndicatorAudit {
    pub counts: BTreeMap<usize, usize>,
    pub total: usize,
    /// `log|ℬ| / L`.
    pub theta_total: f64,
    /// `max_ℓ log(count_ℓ)/ℓ`.
    pub theta_per_length: f64,
    pub nominal_theta: f64,
    pub within_nominal: bool,
    pub within_path_bound: bool,
    pub exhaustive_max: usize,
    pub heuristic: bool,
}

pub fn build_bottleneck_structure(lat: &TorusLattice, r: usize, overrides: Option<Overrides>) -> Result<BottleneckStructure> {
    build_bottleneck_structure_with(lat, r, overrides, &StructureOptions::default())
}

pub fn build_bottleneck_structure_with(
    lat: &TorusLattice,
    r: usize,
    overrides: Option<Overrides>,
    opts: &StructureOptions,
) -> Result<BottleneckStructure> {
    if r < 1 {
        return Err(Error::Precondition("R must be >= 1".into()));
    }
    let (l, cap, desk) = match overrides {
        Some(o) => {
            if o.l < 4 || o.cap < o.l {
                return Err(Error::Precondition(format!("overrides need 4 <= L <= cap, got L={}, cap={}", o.l, o.cap)));
            }
            (o.l, o.cap, true)
        }
        None => {
            let l = lat.l0() / (6 * r);
            if l < 4 {
                return Err(Error::ScaleTooSmall { l, l0: lat.l0(), r });
            }
            (l, 4 * r * l, false)
        }
    };
    let exhaustive_max = cap.min(opts.budget);
    let mut indicators = enumerate_loops_between(lat, l, exhaustive_max, None, opts.budget)?;
    let mut sampled = false;
    if cap > exhaustive_max && opts.n_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.sample_seed);
        let extra = sample_loops(lat, opts.n_samples, exhaustive_max + 1, cap, &mut rng, 200 * opts.n_samples)?;
        indicators.extend(extra);
        sampled = true;
    }
    let index = indicators.iter().enumerate().map(|(i, b)| (b.canonical_key().to_vec(), i)).collect();
    let mut bs = BottleneckStructure {
        lattice: lat.clone(),
        r,
        l,
        cap,
        delta: opts.delta,
        theta: nominal_theta(r),
        indicators,
        exhaustive_max,
        sampled,
        desk_scale: desk,
        index,
        classes: OnceLock::new(),
    };
    if desk {
        bs.theta = bs.audit().theta_total;
    }
    Ok(bs)
}

/// `θ = 5R·log 3`.
pub fn nominal_theta(r: usize) -> f64 {
    5.0 * r as f64 * 3f64.ln()
}

impl BottleneckStructure {
    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Loops with `L_B ≥ L` backing the global structure; at desk scale the same family.
    pub fn out_indicators(&self) -> impl Iterator<Item = &DWLoop> {
        self.indicators.iter().filter(move |b| b.len() >= self.l)
    }

    pub fn indicator_index(&self, lp: &DWLoop) -> Option<usize> {
        self.index.get(lp.canonical_key()).copied()
    }

    /// An indicator whose links are all domain walls in `z`, taken from its own decomposition.
    pub fn triggered_indicator(&self, z: &SpinConfig) -> Option<usize> {
        dw_decompose(&self.lattice, z)
            .loops
            .iter()
            .filter(|lp| lp.len() > self.l && lp.len() <= self.cap)
            .find_map(|lp| self.indicator_index(lp))
    }

    /// Class of every basis configuration, indexed by bit pattern; computed once.
    pub fn classes(&self) -> Result<&[ConfigClass]> {
        let n = self.lattice.n_sites();
        if n > CLASS_TABLE_BUDGET {
            return Err(Error::SiteBudget { sites: n, budget: CLASS_TABLE_BUDGET });
        }
        Ok(self.classes.get_or_init(|| {
            (0..1u64 << n)
                .into_par_iter()
                .map(|i| classify_decomposition(&dw_decompose(&self.lattice, &SpinConfig::from_index(n, i)), self.l, self.cap))
                .collect()
        }))
    }

    /// Number of single-flip moves from `W_k` that leave `W_k ∪ Φ_k`.
    pub fn closure_defects(&self, k: u8) -> Result<usize> {
        let classes = self.classes()?;
        let n = self.lattice.n_sites();
        Ok(classes
            .par_iter()
            .enumerate()
            .filter(|(_, c)| c.is_well(k))
            .map(|(i, _)| (0..n).filter(|&s| !classes[i ^ (1 << s)].in_sector(k)).count())
            .sum())
    }

    pub fn audit(&self) -> IndicatorAudit {
        let mut counts = BTreeMap::new();
        for b in &self.indicators {
            *counts.entry(b.len()).or_insert(0usize) += 1;
        }
        let total = self.indicators.len();
        let nominal = nominal_theta(self.r);
        let theta_per_length = counts.iter().map(|(&len, &c)| (c as f64).ln() / len as f64).fold(0.0, f64::max);
        let n = self.lattice.n_sites() as f64;
        IndicatorAudit {
            theta_total: (total.max(1) as f64).ln() / self.l as f64,
            theta_per_length,
            nominal_theta: nominal,
            within_nominal: counts.iter().all(|(&len, &c)| (c as f64).ln() <= nominal * len as f64),
            within_path_bound: counts.iter().all(|(&len, &c)| (c as f64).ln() <= (2.0 * n).ln() + (len as f64 - 1.0) * 3f64.ln()),
            counts,
            total,
            exhaustive_max: self.exhaustive_max,
            heuristic: self.sampled,
        }
    }
}

/// Configuration with the interior of `lp` flipped: the injection `M_B`.
pub fn flip_interior(lat: &TorusLattice, z: &SpinConfig, lp: &DWLoop) -> SpinConfig {
    let mut w = z.clone();
    for s in lp.interior(lat) {
        w.flip(s);
    }
    w
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub indicator: usize,
    pub length: usize,
    pub occupancy: f64,
    /// Sorted-coupling worst case with a fractional boundary check.
    pub barrier_value: f64,
    /// Worst case over integer excitation patterns with at least `⌈occupancy·L_B⌉` excited checks.
    pub exact_worst_case: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Couplings along the loop, ascending.
    pub witness: Vec<f64>,
}

const REL_TOL: f64 = 1e-12;

/// Sorted-coupling worst-case energy gain; returns `(fractional, integer)` values.
///
/// A check excited in `z` returns `+J` when the interior is flipped, an unexcited one costs `J`.
/// Negative couplings are always counted as excited in the worst case.
pub fn worst_case_gain(couplings: &[f64], occupancy: f64) -> (f64, f64) {
    let mut js = couplings.to_vec();
    js.sort_by(|a, b| a.total_cmp(b));
    let n = occupancy * js.len() as f64;
    let k = (n + REL_TOL).floor() as usize;
    let frac = (n - k as f64).max(0.0);
    let m = (n - REL_TOL).ceil() as usize;
    let tail = |j: f64| if j < 0.0 { j } else { -j };
    let mut fractional = 0.0;
    for (i, &j) in js.iter().enumerate() {
        fractional += if i < k {
            j
        } else if i == k && frac > 0.0 && j >= 0.0 {
            (2.0 * frac - 1.0) * j
        } else {
            tail(j)
        };
    }
    let integer = js.iter().enumerate().map(|(i, &j)| if i < m { j } else { tail(j) }).sum();
    (fractional, integer)
}

pub fn verify_barrier(h: &ClassicalHamiltonian, bs: &BottleneckStructure, indicator: usize, occupancy: f64) -> BarrierCertificate {
    verify_barrier_with(h, &bs.indicators[indicator], indicator, occupancy, bs.delta)
}

/// Certificate for one loop against threshold `Δ·L_B`.
pub fn verify_barrier_with(h: &ClassicalHamiltonian, lp: &DWLoop, id: usize, occupancy: f64, delta: f64) -> BarrierCertificate {
    assert!(occupancy > 0.5 && occupancy <= 1.0, "occupancy must lie in (1/2, 1]");
    let js: Vec<f64> = lp.links().iter().map(|&e| h.couplings.j[e]).collect();
    barrier_from_couplings(&js, id, occupancy, delta)
}

pub fn barrier_from_couplings(js: &[f64], id: usize, occupancy: f64, delta: f64) -> BarrierCertificate {
    let (barrier_value, exact_worst_case) = worst_case_gain(js, occupancy);
    let threshold = delta * js.len() as f64;
    let pass = barrier_value >= threshold - REL_TOL * threshold.abs().max(1.0);
    let mut witness = js.to_vec();
    witness.sort_by(|a, b| a.total_cmp(b));
    BarrierCertificate { indicator: id, length: js.len(), occupancy, barrier_value, exact_worst_case, threshold, pass, witness }
}

/// One JSON object per line.
pub fn certificates_jsonl(certs: &[BarrierCertificate]) -> String {
    let mut s = String::new();
    for c in certs {
        s.push_str(&serde_json::to_string(c).expect("certificate serializes"));
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub p: f64,
    pub a: f64,
    pub chi: f64,
    pub theta: f64,
    #[serde(rename = "L")]
    pub l: usize,
    /// `e^{−(χ−θ)L}/(1−e^{−(χ−θ)})` when valid, 1 (vacuous) otherwise.
    pub bound: f64,
    pub valid: bool,
}

/// `χ = a log(a/p) − a + p`.
pub fn chernoff_rate(a: f64, p: f64) -> f64 {
    if a == 0.0 {
        return p;
    }
    a * (a / p).ln() - a + p
}

/// `a = (4Δ′ − 5Δ − J2) / (5(Δ′ + J1))`.
pub fn fraction_threshold(delta: f64, delta_prime: f64, j1: f64, j2: f64) -> f64 {
    (4.0 * delta_prime - 5.0 * delta - j2) / (5.0 * (delta_prime + j1))
}

pub fn chernoff_parameters(p: f64, delta: f64, delta_prime: f64, j1: f64, j2: f64, theta: f64, l: usize) -> Result<ChernoffReport> {
    if !(0.0 <= j1 && j1 < delta && delta < delta_prime && delta_prime < j2) {
        return Err(Error::Precondition(format!("need 0 <= J1 < Δ < Δ' < J2, got J1={j1}, Δ={delta}, Δ'={delta_prime}, J2={j2}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("p must lie in [0, 1], got {p}")));
    }
    let a = fraction_threshold(delta, delta_prime, j1, j2);
    let chi = if a > p { chernoff_rate(a, p) } else { 0.0 };
    let valid = a > p && chi > theta;
    let bound = if valid {
        let g = chi - theta;
        (-g * l as f64).exp() / (1.0 - (-g).exp())
    } else {
        1.0
    };
    Ok(ChernoffReport { p, a, chi, theta, l, bound, valid })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViolationRate {
    pub violations: usize,
    pub samples: usize,
    pub rate: f64,
    /// 95% Wilson score interval.
    pub wilson: (f64, f64),
}

pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let z = 1.959963984540054;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let centre = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Whether realization `stream` breaks any indicator barrier at occupancy 4/5.
pub fn realization_violates(spec: &DistributionSpec, bs: &BottleneckStructure, delta: f64, stream: u64) -> Result<bool> {
    let field = sample_couplings_stream(spec, bs.lattice().n_edges(), stream)?;
    let mut js = Vec::new();
    Ok(bs.indicators.iter().any(|b| {
        js.clear();
        js.extend(b.links().iter().map(|&e| field.j[e]));
        !barrier_from_couplings(&js, 0, 0.8, delta).pass
    }))
}

pub fn empirical_violation_rate(
    spec: &DistributionSpec,
    lat: &TorusLattice,
    bs: &BottleneckStructure,
    delta: f64,
    n_samples: usize,
) -> Result<ViolationRate> {
    if n_samples < 1 {
        return Err(Error::Precondition("n_samples must be >= 1".into()));
    }
    if bs.lattice() != lat {
        return Err(Error::Precondition("structure built for a different lattice".into()));
    }
    spec.validate()?;
    let flags: Vec<bool> =
        (0..n_samples as u64).into_par_iter().map(|r| realization_violates(spec, bs, delta, r)).collect::<Result<_>>()?;
    let violations = flags.iter().filter(|&&f| f).count();
    Ok(ViolationRate {
        violations,
        samples: n_samples,
        rate: violations as f64 / n_samples as f64,
        wilson: wilson_interval(violations, n_samples),
    })
}

#[derive(Clone, Debug)]
pub struct RowIndicator {
    pub row: usize,
    pub loops: Vec<DWLoop>,
    pub total_length: usize,
}

/// First row holding at least `L0/3` spins of each sign, with the loops crossing it.
pub fn row_indicator_scan(lat: &TorusLattice, z: &SpinConfig) -> Result<Option<RowIndicator>> {
    let dec = dw_decompose(lat, z);
    if dec.loops.iter().any(|l| !l.is_contractible()) {
        return Err(Error::Precondition("configuration has winding domain walls".into()));
    }
    let lx = lat.lx();
    for y in 0..lat.ly() {
        let plus = (0..lx).filter(|&x| z.spin(lat.site(x as i64, y as i64)) > 0).count();
        let minus = lx - plus;
        if 3 * plus < lx || 3 * minus < lx {
            continue;
        }
        let row_edges: Vec<usize> = (0..lx).map(|x| 2 * lat.site(x as i64, y as i64)).collect();
        let loops: Vec<DWLoop> = dec.loops.iter().filter(|l| l.links().iter().any(|e| row_edges.contains(e))).cloned().collect();
        let total_length = loops.iter().map(DWLoop::len).sum();
        return Ok(Some(RowIndicator { row: y, loops, total_length }));
    }
    Ok(None)
}
