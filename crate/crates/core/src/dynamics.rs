//! Real-time evolution, drift bounds, restricted-vs-full twin runs, false-vacuum lifetimes and
//! local simulatability.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{evolve_krylov, lanczos_lowest, norm, par_sum, Amplitude, KrylovStats, LanczosOptions};
use crate::peierls::BottleneckStructure;
use crate::quantum::{
    almost_eigen_residual, apply_mask, build_quantum_hamiltonian, masked_weight, restricted_eigenpairs, sector_mask, Hamiltonian,
    QuantumModel, DENSE_SITE_BUDGET,
};

pub const KRYLOV_DIM: usize = 30;
pub const KRYLOV_TOL: f64 = 1e-10;
/// Drift of `⟨O_B⟩` that ends a false-vacuum lifetime.
pub const LIFETIME_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub krylov_dim: usize,
    pub tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { krylov_dim: KRYLOV_DIM, tol: KRYLOV_TOL }
    }
}

pub fn to_complex(psi: &[f64]) -> Vec<Complex64> {
    psi.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// `e^{−iHt}ψ`.
pub fn evolve(psi: &[Complex64], h: &Hamiltonian, t: f64) -> Result<Vec<Complex64>> {
    Ok(evolve_with(psi, h, t, &EvolveOptions::default())?.0)
}

pub fn evolve_with(psi: &[Complex64], h: &Hamiltonian, t: f64, opts: &EvolveOptions) -> Result<(Vec<Complex64>, KrylovStats)> {
    let nrm = norm(psi);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("evolve needs a normalized state, norm = {nrm}")));
    }
    let op = |x: &[Complex64], y: &mut [Complex64]| h.apply(x, y);
    evolve_krylov(&op, psi, t, opts.krylov_dim, opts.tol)
}

/// `e^{−iPHPt}ψ` for the diagonal mask `P`.
pub fn evolve_restricted(
    psi: &[Complex64],
    h: &Hamiltonian,
    mask: &[bool],
    t: f64,
    opts: &EvolveOptions,
) -> Result<(Vec<Complex64>, KrylovStats)> {
    let op = |x: &[Complex64], y: &mut [Complex64]| {
        let mut px = x.to_vec();
        apply_mask(&mut px, mask);
        h.apply(&px, y);
        apply_mask(y, mask);
    };
    evolve_krylov(&op, psi, t, opts.krylov_dim, opts.tol)
}

/// `⟨ψ|H|ψ⟩` for a complex state.
pub fn energy(psi: &[Complex64], h: &Hamiltonian) -> f64 {
    let hp = h.apply_vec(psi);
    par_sum(psi.len(), |i| (psi[i].conj() * hp[i]).re)
}

/// Observables diagonal in the z basis, all with unit operator norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    Identity,
    /// `Z_s`.
    Site {
        site: usize,
    },
    /// `(1/|B|) Σ_{i∈B} Z_i`.
    Block {
        sites: Vec<usize>,
    },
}

impl Observable {
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        let z = |s: usize| 1.0 - 2.0 * ((i >> s) & 1) as f64;
        match self {
            Observable::Identity => 1.0,
            Observable::Site { site } => z(*site),
            Observable::Block { sites } => sites.iter().map(|&s| z(s)).sum::<f64>() / sites.len() as f64,
        }
    }

    pub fn norm(&self) -> f64 {
        1.0
    }

    pub fn support(&self) -> Vec<usize> {
        match self {
            Observable::Identity => vec![],
            Observable::Site { site } => vec![*site],
            Observable::Block { sites } => sites.clone(),
        }
    }

    pub fn expectation<T: Amplitude>(&self, psi: &[T]) -> f64 {
        let total = par_sum(psi.len(), |i| psi[i].norm_sqr());
        par_sum(psi.len(), |i| psi[i].norm_sqr() * self.value(i)) / total
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftPoint {
    pub t: f64,
    pub value: f64,
    pub drift: f64,
    /// `2‖A‖δt`.
    pub bound: f64,
    /// Accumulated integrator error estimate up to `t`, times `2‖A‖`.
    pub integrator_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftCurve {
    pub delta: f64,
    pub energy: f64,
    pub points: Vec<DriftPoint>,
    /// `drift ≤ bound + integrator_error` at every grid point.
    pub holds: bool,
    /// Same without the integrator allowance.
    pub holds_strict: bool,
    pub max_norm_error: f64,
    pub max_energy_error: f64,
}

impl DriftCurve {
    /// CSV rows `t,observable,drift,bound`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,observable,drift,bound\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.t, p.value, p.drift, p.bound));
        }
        s
    }
}

pub fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("time grid must be nonnegative and strictly increasing".into()));
    }
    Ok(())
}

/// `|⟨A(t)⟩ − ⟨A(0)⟩|` along `t_grid` against `2‖A‖δt`, with `δ` measured at `E = ⟨ψ|H|ψ⟩`.
pub fn observable_drift(psi: &[f64], h: &Hamiltonian, obs: &Observable, t_grid: &[f64]) -> Result<DriftCurve> {
    check_grid(t_grid)?;
    let nrm = norm(psi);
    let psi: Vec<f64> = psi.iter().map(|x| x / nrm).collect();
    let e = h.expectation(&psi);
    let delta = almost_eigen_residual(h, &psi, e);
    let a0 = obs.expectation(&psi);
    let mut state = to_complex(&psi);
    let mut t_now = 0.0;
    let mut err = 0.0;
    let mut points = Vec::with_capacity(t_grid.len());
    let (mut max_norm_error, mut max_energy_error) = (0.0f64, 0.0f64);
    let opts = EvolveOptions::default();
    for &t in t_grid {
        let (next, stats) =
            evolve_krylov(&|x: &[Complex64], y: &mut [Complex64]| h.apply(x, y), &state, t - t_now, opts.krylov_dim, opts.tol)?;
        state = next;
        t_now = t;
        err += stats.error_estimate;
        max_norm_error = max_norm_error.max((norm(&state) - 1.0).abs());
        max_energy_error = max_energy_error.max((energy(&state, h) - e).abs());
        let value = obs.expectation(&state);
        points.push(DriftPoint {
            t,
            value,
            drift: (value - a0).abs(),
            bound: 2.0 * obs.norm() * delta * t,
            integrator_error: 2.0 * obs.norm() * err,
        });
    }
    let holds_strict = points.iter().all(|p| p.drift <= p.bound);
    let holds = points.iter().all(|p| p.drift <= p.bound + p.integrator_error);
    Ok(DriftCurve { delta, energy: e, points, holds, holds_strict, max_norm_error, max_energy_error })
}

/// Sites within graph distance `r` of `b` along the coupling graph.
pub fn ball(model: &QuantumModel, b: &[usize], r: usize) -> Vec<usize> {
    let n = model.n_sites();
    let mut dist = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in b {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        if dist[s] == r {
            continue;
        }
        let mut next: Vec<usize> = model.classical.incident(s).iter().map(|&(_, t)| t).collect();
        for t in &model.terms {
            if t.sites.contains(&s) {
                next.extend(t.sites.iter().copied());
            }
        }
        for t in next {
            if dist[t] == usize::MAX {
                dist[t] = dist[s] + 1;
                queue.push_back(t);
            }
        }
    }
    (0..n).filter(|&s| dist[s] != usize::MAX).collect()
}

/// `‖e^{iHt}O_Be^{−iHt} − e^{iH_At}O_Be^{−iH_At}‖` with `A` the radius-`r_b` ball around `B`, by dense algebra.
pub fn local_simulatability_error(model: &QuantumModel, obs: &Observable, r_b: usize, t: f64) -> Result<f64> {
    let region = ball(model, &obs.support(), r_b);
    local_simulatability_error_for(model, obs, &region, t)
}

pub fn local_simulatability_error_for(model: &QuantumModel, obs: &Observable, region: &[usize], t: f64) -> Result<f64> {
    let n = model.n_sites();
    if n > DENSE_SITE_BUDGET {
        return Err(Error::SiteBudget { sites: n, budget: DENSE_SITE_BUDGET });
    }
    if t == 0.0 || region.len() == n || matches!(obs, Observable::Identity) {
        return Ok(0.0);
    }
    let h = build_quantum_hamiltonian(model)?;
    let ha = build_quantum_hamiltonian(&model.local_part(region))?;
    let dim = h.dim();
    let heis = |hh: &Hamiltonian| -> Result<DMatrix<Complex64>> {
        let u = propagator_columns(hh, t)?;
        let mut ou = u.clone();
        for (i, mut row) in ou.row_iter_mut().enumerate() {
            row *= Complex64::new(obs.value(i), 0.0);
        }
        Ok(u.adjoint() * ou)
    };
    let d = heis(&h)? - heis(&ha)?;
    // D is Hermitian; its norm is the largest |eigenvalue|, found by Lanczos on the real embedding
    // [[Re D, −Im D], [Im D, Re D]].
    let (re, im) = (d.map(|z| z.re), d.map(|z| z.im));
    let opts = LanczosOptions { tol: 1e-11, max_basis: 64, ..LanczosOptions::default() };
    let noop = |_: &mut [f64]| {};
    let mut extreme = 0.0f64;
    for sign in [1.0, -1.0] {
        let op = |x: &[f64], y: &mut [f64]| {
            let a = DVector::from_column_slice(&x[..dim]);
            let b = DVector::from_column_slice(&x[dim..]);
            let top = (&re * &a - &im * &b) * sign;
            let bot = (&im * &a + &re * &b) * sign;
            y[..dim].copy_from_slice(top.as_slice());
            y[dim..].copy_from_slice(bot.as_slice());
        };
        let eig = lanczos_lowest(2 * dim, 1, &op, &noop, None, &opts)?;
        extreme = extreme.max(-eig.values[0]);
    }
    Ok(extreme)
}

/// Columns `e^{−iHt}e_j`, computed independently in parallel.
pub fn propagator_columns(h: &Hamiltonian, t: f64) -> Result<DMatrix<Complex64>> {
    let dim = h.dim();
    let op = |a: &[Complex64], b: &mut [Complex64]| h.apply(a, b);
    let cols: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[j] = Complex64::new(1.0, 0.0);
            Ok(evolve_krylov(&op, &e, t, KRYLOV_DIM, KRYLOV_TOL)?.0)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| cols[j][i]))
}

#[derive(Clone, Debug)]
pub struct EvolutionJob {
    pub model: QuantumModel,
    /// Region `A`; the whole system when `None`.
    pub region: Option<Vec<usize>>,
    pub observable: Observable,
    pub t_grid: Vec<f64>,
    /// Number `M` of restricted eigenstates spanning `𝒫^A_k`.
    pub m: usize,
    /// Initial state; the lowest eigenstate of `P_k H_A P_k` when `None`.
    pub initial: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwinPoint {
    pub t: f64,
    pub full: f64,
    pub restricted: f64,
    pub deviation: f64,
    pub delta_lr: f64,
    /// `8t√M δ + 4√δ′ + δ_LR`.
    pub bound: f64,
    pub integrator_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetastabilityReport {
    pub k: u8,
    pub m: usize,
    /// Largest `‖(H_A − E_m)ψ_m‖` over the `M` restricted eigenstates.
    pub delta: f64,
    /// `1 − Tr(𝒫^A_k ρ)`.
    pub delta_prime: f64,
    pub points: Vec<TwinPoint>,
    pub max_deviation: f64,
    pub holds: bool,
    pub holds_strict: bool,
}

/// Twin evolutions under `H` and `P_k H_A P_k` with every term of the bound measured.
pub fn restricted_vs_full(job: &EvolutionJob, bs: &BottleneckStructure, k: u8, opts: &LanczosOptions) -> Result<MetastabilityReport> {
    check_grid(&job.t_grid)?;
    let n = job.model.n_sites();
    let region: Vec<usize> = job.region.clone().unwrap_or_else(|| (0..n).collect());
    let full_region = region.len() == n;
    let h = build_quantum_hamiltonian(&job.model)?;
    let ha = if full_region { h.clone() } else { build_quantum_hamiltonian(&job.model.local_part(&region))? };
    let pk = sector_mask(bs, k)?;
    let eig = restricted_eigenpairs(&ha, &pk, job.m.max(1), opts)?;
    let m = eig.values.len();
    let delta = eig.vectors.iter().zip(&eig.values).map(|(v, &e)| almost_eigen_residual(&ha, v, e)).fold(0.0, f64::max);
    let psi0 = match &job.initial {
        Some(v) => {
            let nv = norm(v);
            v.iter().map(|x| x / nv).collect()
        }
        None => eig.vectors[0].clone(),
    };
    let captured: f64 = eig.vectors.iter().map(|v| crate::linalg::dot(v, &psi0).powi(2)).sum();
    let delta_prime = (1.0 - captured).max(0.0);
    let eopts = EvolveOptions::default();
    let mut full = to_complex(&psi0);
    let mut restricted = full.clone();
    let mut t_now = 0.0;
    let mut err = 0.0;
    let mut points = Vec::new();
    for &t in &job.t_grid {
        let (f, s1) = evolve_with(&full, &h, t - t_now, &eopts)?;
        let (r, s2) = evolve_restricted(&restricted, &ha, &pk, t - t_now, &eopts)?;
        full = f;
        restricted = r;
        t_now = t;
        err += s1.error_estimate + s2.error_estimate;
        let a = job.observable.expectation(&full);
        let b = job.observable.expectation(&restricted);
        let delta_lr = if full_region { 0.0 } else { local_simulatability_error_for(&job.model, &job.observable, &region, t)? };
        let bound = 8.0 * t * (m as f64).sqrt() * delta + 4.0 * delta_prime.sqrt() + delta_lr;
        points.push(TwinPoint { t, full: a, restricted: b, deviation: (a - b).abs(), delta_lr, bound, integrator_error: 2.0 * err });
    }
    let max_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    Ok(MetastabilityReport {
        k,
        m,
        delta,
        delta_prime,
        holds: points.iter().all(|p| p.deviation <= p.bound + p.integrator_error),
        holds_strict: points.iter().all(|p| p.deviation <= p.bound),
        points,
        max_deviation,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub h: f64,
    /// `(t, ⟨O_B(t)⟩)`.
    pub trajectory: Vec<(f64, f64)>,
    /// First grid time with drift above the threshold.
    pub lifetime: Option<f64>,
    pub censored: bool,
    pub t_max: f64,
    pub initial_value: f64,
    /// Residual of the false vacuum under the full `H`.
    pub delta: f64,
    pub max_drift: f64,
    /// `drift ≤ 2δt` on the whole grid (up to integrator error).
    pub within_drift_bound: bool,
    pub out_of_sector_weight: f64,
}

impl LifetimeReport {
    /// Lifetime with censored runs read as `+∞`.
    pub fn lifetime_or_inf(&self) -> f64 {
        self.lifetime.unwrap_or(f64::INFINITY)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,observable,bound\n");
        for &(t, v) in &self.trajectory {
            s.push_str(&format!("{},{},{}\n", t, v, 2.0 * self.delta * t));
        }
        s
    }
}

/// The well disfavored by `H₀ ∋ +h Σ z_i` (`h_long = −h`) for `h > 0`.
pub const FALSE_VACUUM_WELL: u8 = 1;

/// Quench from the false vacuum (lowest state of `P_1 H P_1`) for each tilt in `hs`.
pub fn false_vacuum_lifetime(
    base: &QuantumModel,
    hs: &[f64],
    bs: &BottleneckStructure,
    obs: &Observable,
    t_grid: &[f64],
    opts: &LanczosOptions,
) -> Result<Vec<LifetimeReport>> {
    check_grid(t_grid)?;
    let pk = sector_mask(bs, FALSE_VACUUM_WELL)?;
    hs.par_iter()
        .map(|&hv| {
            let model = base.with_added_longitudinal(-hv);
            let h = build_quantum_hamiltonian(&model)?;
            let eig = restricted_eigenpairs(&h, &pk, 1, opts)?;
            let psi = &eig.vectors[0];
            let delta = almost_eigen_residual(&h, psi, eig.values[0]);
            let a0 = obs.expectation(psi);
            let mut state = to_complex(psi);
            let mut t_now = 0.0;
            let mut err = 0.0;
            let mut trajectory = Vec::with_capacity(t_grid.len());
            let mut lifetime = None;
            let mut within = true;
            let mut max_drift = 0.0f64;
            for &t in t_grid {
                let (s, st) = evolve_with(&state, &h, t - t_now, &EvolveOptions::default())?;
                state = s;
                t_now = t;
                err += st.error_estimate;
                let v = obs.expectation(&state);
                let drift = (v - a0).abs();
                max_drift = max_drift.max(drift);
                if drift > 2.0 * obs.norm() * delta * t + 2.0 * err {
                    within = false;
                }
                if lifetime.is_none() && drift > LIFETIME_THRESHOLD {
                    lifetime = Some(t);
                }
                trajectory.push((t, v));
            }
            let out_of_sector_weight = 1.0 - masked_weight(&state, &pk);
            Ok(LifetimeReport {
                h: hv,
                trajectory,
                censored: lifetime.is_none(),
                lifetime,
                t_max: *t_grid.last().unwrap(),
                initial_value: a0,
                delta,
                max_drift,
                within_drift_bound: within,
                out_of_sector_weight,
            })
        })
        .collect()
}

/// `T(h/2) ≥ T(h)` for every pair of sweep points related by halving, with censored lifetimes
/// read as `+∞`. Returns the pairs checked and whether all hold.
pub fn lifetimes_monotone(reports: &[LifetimeReport]) -> (Vec<(f64, f64)>, bool) {
    let mut pairs = Vec::new();
    let mut ok = true;
    for a in reports.iter().filter(|r| r.h > 0.0) {
        for b in reports.iter().filter(|r| (r.h - a.h / 2.0).abs() <= 1e-12 * a.h) {
            pairs.push((a.h, b.h));
            ok &= b.lifetime_or_inf() >= a.lifetime_or_inf();
        }
    }
    (pairs, ok)
}

/// Evenly spaced grid `t_max/n, 2t_max/n, …, t_max`, preceded by 0.
pub fn linear_grid(t_max: f64, n: usize) -> Vec<f64> {
    std::iter::once(0.0).chain((1..=n).map(|i| t_max * i as f64 / n as f64)).collect()
}
