//! Exact Gibbs tables, single-flip Metropolis dynamics and the classical bottleneck bounds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{stream_rng, ClassicalHamiltonian};
use crate::error::{Error, Result};
use crate::lattice::{classify_config, ConfigClass};
use crate::peierls::BottleneckStructure;
use crate::spin::SpinConfig;

/// Largest system enumerated exactly.
pub const GIBBS_SITE_BUDGET: usize = 24;

const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GibbsTable {
    /// Inverse temperature; `f64::INFINITY` selects the ground-state measure.
    pub beta: f64,
    pub n_sites: usize,
    pub energies: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub log_z: f64,
}

impl GibbsTable {
    /// `F = −log Z / β`; undefined at β = 0.
    pub fn free_energy(&self) -> Option<f64> {
        (self.beta > 0.0 && self.beta.is_finite()).then(|| -self.log_z / self.beta)
    }

    pub fn partition_function(&self) -> f64 {
        self.log_z.exp()
    }

    /// Gibbs measure conditioned on `mask`, computed from energies so it stays defined at β = ∞.
    pub fn restricted(&self, mask: impl Fn(usize) -> bool + Sync) -> Vec<f64> {
        let members: Vec<bool> = (0..self.energies.len()).into_par_iter().map(&mask).collect();
        let e_min = self.energies.iter().zip(&members).filter(|(_, &m)| m).map(|(e, _)| *e).fold(f64::INFINITY, f64::min);
        let w: Vec<f64> =
            self.energies.iter().zip(&members).map(|(&e, &m)| if m { boltzmann(self.beta, e - e_min) } else { 0.0 }).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// `e^{−β ΔE}` for `ΔE ≥ 0`, with the β = ∞ limit taken on exact degeneracy.
fn boltzmann(beta: f64, de: f64) -> f64 {
    if beta.is_infinite() {
        if de <= DEGENERACY_TOL * (1.0 + de.abs()) {
            1.0
        } else {
            0.0
        }
    } else if beta == 0.0 {
        1.0
    } else {
        (-beta * de).exp()
    }
}

pub fn exact_gibbs(h: &ClassicalHamiltonian, beta: f64) -> Result<GibbsTable> {
    let n = h.n_sites();
    if n > GIBBS_SITE_BUDGET {
        return Err(Error::SiteBudget { sites: n, budget: GIBBS_SITE_BUDGET });
    }
    if !(beta >= 0.0) {
        return Err(Error::Precondition(format!("beta must be >= 0, got {beta}")));
    }
    let energies: Vec<f64> = (0..1u64 << n).into_par_iter().map(|i| h.energy_index(i)).collect();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.par_iter().map(|&e| boltzmann(beta, e - e_min)).collect();
    let total: f64 = w.iter().sum();
    let probabilities = w.into_iter().map(|x| x / total).collect();
    let log_z = if beta.is_infinite() { f64::NEG_INFINITY } else { -beta * e_min + total.ln() };
    Ok(GibbsTable { beta, n_sites: n, energies, probabilities, log_z })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BottleneckMass {
    pub k: u8,
    pub p_phi: f64,
    pub p_w: f64,
    /// `βΔ − θ`.
    pub exponent: f64,
    /// `e^{−(βΔ−θ)L}/(1−e^{−(βΔ−θ)L})`, absent when the exponent is not positive.
    pub factor: Option<f64>,
    pub bound: Option<f64>,
    pub holds: bool,
}

/// `e^{−xL}/(1−e^{−xL})` for `x > 0`.
pub fn bound_factor(exponent: f64, l: usize) -> Option<f64> {
    (exponent > 0.0).then(|| {
        let q = (-exponent * l as f64).exp();
        q / (1.0 - q)
    })
}

pub fn bottleneck_mass(table: &GibbsTable, bs: &BottleneckStructure, k: u8) -> Result<BottleneckMass> {
    let classes = bs.classes()?;
    if classes.len() != table.probabilities.len() {
        return Err(Error::Precondition("table and structure describe different lattices".into()));
    }
    let (mut p_phi, mut p_w) = (0.0, 0.0);
    for (c, p) in classes.iter().zip(&table.probabilities) {
        if c.is_bottleneck(k) {
            p_phi += p;
        } else if c.is_well(k) {
            p_w += p;
        }
    }
    let exponent = table.beta * bs.delta - bs.theta;
    let factor = bound_factor(exponent, bs.l);
    let bound = factor.map(|f| f * p_w);
    Ok(BottleneckMass { k, p_phi, p_w, exponent, factor, bound, holds: bound.is_none_or(|b| p_phi <= b) })
}

/// Single-spin-flip Metropolis kernel, optionally lazy.
#[derive(Clone, Debug)]
pub struct MarkovKernel {
    pub beta: f64,
    pub lazy: bool,
    h: ClassicalHamiltonian,
}

impl MarkovKernel {
    pub fn metropolis(h: &ClassicalHamiltonian, beta: f64) -> Self {
        Self { beta, lazy: false, h: h.clone() }
    }

    pub fn lazy(mut self) -> Self {
        self.lazy = true;
        self
    }

    pub fn hamiltonian(&self) -> &ClassicalHamiltonian {
        &self.h
    }

    pub fn acceptance(&self, de: f64) -> f64 {
        if de <= 0.0 {
            1.0
        } else {
            boltzmann(self.beta, de)
        }
    }

    fn hold(&self) -> f64 {
        if self.lazy {
            0.5
        } else {
            1.0
        }
    }

    /// `T_{z′←z}` for basis indices; zero unless they differ in at most one site.
    pub fn transition(&self, energies: &[f64], to: usize, from: usize) -> f64 {
        let n = self.h.n_sites();
        let diff = to ^ from;
        if diff == 0 {
            let out: f64 = (0..n).map(|s| self.transition(energies, from ^ (1 << s), from)).sum();
            return 1.0 - out;
        }
        if diff.count_ones() != 1 {
            return 0.0;
        }
        self.hold() * self.acceptance(energies[to] - energies[from]) / n as f64
    }

    /// Total probability of leaving `from` in one step.
    fn escape(&self, energies: &[f64], from: usize) -> f64 {
        let n = self.h.n_sites();
        (0..n).map(|s| self.transition(energies, from ^ (1 << s), from)).sum()
    }

    /// `(T p)(z′) − p(z′)` for every `z′`, arranged to avoid cancellation in `T_{z←z} − 1`.
    pub fn apply_minus_identity(&self, energies: &[f64], p: &[f64]) -> Vec<f64> {
        let n = self.h.n_sites();
        (0..p.len())
            .into_par_iter()
            .map(|z| {
                let inflow: f64 = (0..n)
                    .map(|s| {
                        let y = z ^ (1 << s);
                        if p[y] == 0.0 {
                            0.0
                        } else {
                            self.transition(energies, z, y) * p[y]
                        }
                    })
                    .sum();
                let outflow = if p[z] == 0.0 { 0.0 } else { self.escape(energies, z) * p[z] };
                inflow - outflow
            })
            .collect()
    }

    pub fn apply(&self, energies: &[f64], p: &[f64]) -> Vec<f64> {
        self.apply_minus_identity(energies, p).into_iter().zip(p).map(|(d, q)| d + q).collect()
    }

    /// One Metropolis step in place; returns whether the configuration changed.
    pub fn step<R: Rng>(&self, z: &mut SpinConfig, rng: &mut R) -> bool {
        if self.lazy && rng.gen::<bool>() {
            return false;
        }
        let s = rng.gen_range(0..self.h.n_sites());
        let de = self.h.flip_delta(z, s);
        if de <= 0.0 || rng.gen::<f64>() < self.acceptance(de) {
            z.flip(s);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteadyReport {
    pub k: u8,
    /// `‖T P^W − P^W‖₁`.
    pub norm: f64,
    /// Probability flow from `W_k` into `Φ_k` in one step, under `P^W`.
    pub flow_to_bottleneck: f64,
    /// Flow from `W_k` to configurations outside `W_k ∪ Φ_k`.
    pub flow_elsewhere: f64,
    /// `2e^{−(βΔ−θ)L}/(1−e^{−(βΔ−θ)L})`, absent when vacuous.
    pub bound: Option<f64>,
    pub holds: bool,
}

pub fn almost_steady_norm(kernel: &MarkovKernel, table: &GibbsTable, bs: &BottleneckStructure, k: u8) -> Result<SteadyReport> {
    let classes = bs.classes()?;
    if classes.len() != table.energies.len() {
        return Err(Error::Precondition("table and structure describe different lattices".into()));
    }
    let pw = table.restricted(|i| classes[i].is_well(k));
    let norm: f64 = kernel.apply_minus_identity(&table.energies, &pw).iter().map(|d| d.abs()).sum();
    let n = kernel.h.n_sites();
    let (mut to_phi, mut elsewhere) = (0.0, 0.0);
    for (z, &p) in pw.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for s in 0..n {
            let y = z ^ (1 << s);
            let c = classes[y];
            if c.is_well(k) {
                continue;
            }
            let f = kernel.transition(&table.energies, y, z) * p;
            if c.is_bottleneck(k) {
                to_phi += f;
            } else {
                elsewhere += f;
            }
        }
    }
    let exponent = table.beta * bs.delta - bs.theta;
    let bound = bound_factor(exponent, bs.l).map(|f| 2.0 * f);
    Ok(SteadyReport { k, norm, flow_to_bottleneck: to_phi, flow_elsewhere: elsewhere, bound, holds: bound.is_none_or(|b| norm <= b) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeHistogram {
    pub k: u8,
    pub t_max: usize,
    /// First exit time in sweeps per chain, `None` when censored at `t_max`.
    pub times: Vec<Option<usize>>,
    pub censored: usize,
    /// Median exit time; `None` when more than half the chains are censored.
    pub median: Option<f64>,
}

impl EscapeHistogram {
    /// Median with censored chains treated as `+∞`.
    pub fn median_or_inf(&self) -> f64 {
        self.median.unwrap_or(f64::INFINITY)
    }

    /// CSV rows `t,count,censored_flag`; censored chains appear once at `t_max`.
    pub fn to_csv(&self) -> String {
        let mut counts = std::collections::BTreeMap::new();
        for t in self.times.iter().flatten() {
            *counts.entry(*t).or_insert(0usize) += 1;
        }
        let mut s = String::from("t,count,censored_flag\n");
        for (t, c) in counts {
            s.push_str(&format!("{t},{c},0\n"));
        }
        if self.censored > 0 {
            s.push_str(&format!("{},{},1\n", self.t_max, self.censored));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct EscapeOptions {
    pub n_chains: usize,
    /// Censoring time in sweeps.
    pub t_max: usize,
    pub seed: u64,
    /// Sweeps of `W_k`-constrained dynamics used to draw start states when exact tables are out of reach.
    pub burn_in: usize,
}

/// First exit times from `W_k ∪ Φ_k` for independent chains started in `W_k`.
pub fn mc_escape_time(kernel: &MarkovKernel, bs: &BottleneckStructure, k: u8, opts: &EscapeOptions) -> Result<EscapeHistogram> {
    let n = kernel.h.n_sites();
    if n != bs.lattice().n_sites() {
        return Err(Error::Precondition("kernel and structure describe different lattices".into()));
    }
    let exact_start = if n <= 20 {
        let table = exact_gibbs(&kernel.h, kernel.beta)?;
        let classes = bs.classes()?;
        let pw = table.restricted(|i| classes[i].is_well(k));
        let mut cdf = Vec::with_capacity(pw.len());
        let mut acc = 0.0;
        for p in pw {
            acc += p;
            cdf.push(acc);
        }
        Some(cdf)
    } else {
        None
    };
    let times: Vec<Option<usize>> = (0..opts.n_chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(opts.seed, c);
            let mut z = match &exact_start {
                Some(cdf) => {
                    let u = rng.gen::<f64>() * cdf[cdf.len() - 1];
                    let i = cdf.partition_point(|&x| x < u).min(cdf.len() - 1);
                    SpinConfig::from_index(n, i as u64)
                }
                None => constrained_start(kernel, bs, k, opts.burn_in, &mut rng),
            };
            for t in 0..opts.t_max * n {
                if kernel.step(&mut z, &mut rng) && !classify_config(&z, bs).in_sector(k) {
                    return Some(t / n + 1);
                }
            }
            None
        })
        .collect();
    let censored = times.iter().filter(|t| t.is_none()).count();
    let mut sorted: Vec<f64> = times.iter().map(|t| t.map_or(f64::INFINITY, |x| x as f64)).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len();
    let median = if m == 0 {
        None
    } else if m % 2 == 1 {
        Some(sorted[m / 2])
    } else {
        Some(0.5 * (sorted[m / 2 - 1] + sorted[m / 2]))
    }
    .filter(|x| x.is_finite());
    Ok(EscapeHistogram { k, t_max: opts.t_max, times, censored, median })
}

fn constrained_start<R: Rng>(kernel: &MarkovKernel, bs: &BottleneckStructure, k: u8, sweeps: usize, rng: &mut R) -> SpinConfig {
    let n = kernel.h.n_sites();
    let mut z = if k == 1 { SpinConfig::all_plus(n) } else { SpinConfig::all_minus(n) };
    for _ in 0..sweeps * n {
        let prev = z.clone();
        if kernel.step(&mut z, rng) && !classify_config(&z, bs).is_well(k) {
            z = prev;
        }
    }
    z
}

pub fn is_out(c: ConfigClass) -> bool {
    c == ConfigClass::Out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_torus;
    use crate::peierls::{build_bottleneck_structure, Overrides};

    #[test]
    fn beta_zero_is_uniform() {
        let lat = build_torus(4).unwrap();
        let t = exact_gibbs(&ClassicalHamiltonian::uniform(&lat, 1.0), 0.0).unwrap();
        assert!(t.probabilities.iter().all(|&p| (p - 1.0 / 65536.0).abs() < 1e-18));
    }

    #[test]
    fn cold_mass_on_ground_pair() {
        let lat = build_torus(4).unwrap();
        let h = ClassicalHamiltonian::uniform(&lat, 1.0);
        let t = exact_gibbs(&h, 20.0).unwrap();
        assert!((t.probabilities[0] - 0.5).abs() < 1e-10);
        assert!((t.probabilities[0xffff] - 0.5).abs() < 1e-10);
        let t = exact_gibbs(&h, f64::INFINITY).unwrap();
        assert_eq!(t.probabilities[0], 0.5);
    }

    #[test]
    fn budget() {
        let lat = build_torus(6).unwrap();
        assert!(matches!(exact_gibbs(&ClassicalHamiltonian::uniform(&lat, 1.0), 1.0), Err(Error::SiteBudget { .. })));
    }

    #[test]
    fn plug_in_factor() {
        let f = bound_factor(4f64.ln(), 4).unwrap();
        assert!((f - (1.0 / 256.0) / (1.0 - 1.0 / 256.0)).abs() < 1e-15);
        assert!(bound_factor(0.0, 4).is_none());
    }

    #[test]
    fn zero_temperature_well_is_steady() {
        let lat = build_torus(4).unwrap();
        let h = ClassicalHamiltonian::uniform(&lat, 1.0);
        let bs = build_bottleneck_structure(&lat, 1, Some(Overrides { l: 4, cap: 8 })).unwrap();
        let t = exact_gibbs(&h, f64::INFINITY).unwrap();
        let r = almost_steady_norm(&MarkovKernel::metropolis(&h, f64::INFINITY), &t, &bs, 1).unwrap();
        assert_eq!(r.norm, 0.0);
    }
}
