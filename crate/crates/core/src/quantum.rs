//! Exact diagonalization of `H = H₀ + V` in the z basis and the quantum bottleneck diagnostics.
//!
//! Basis index `i` has bit `s` set iff site `s` carries spin −1, so index 0 is all-plus.
//! Every projector used here (wells, bottlenecks, `Q_{B,n}`, `P_γ`) is a diagonal mask.

use std::collections::VecDeque;
use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalHamiltonian, CouplingField};
use crate::error::{Error, Result};
use crate::lattice::{ConfigClass, DWLoop, TorusLattice};
use crate::linalg::{dot, lanczos_lowest, norm, par_sum, Amplitude, LanczosOptions};
use crate::peierls::BottleneckStructure;

pub const QUANTUM_SITE_BUDGET: usize = 22;
pub const DENSE_SITE_BUDGET: usize = 12;

/// Real symmetric operator on the sites `sites`; local bit `b` of a row index is site `sites[b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    /// Row-major `2^q × 2^q`.
    pub matrix: Vec<f64>,
}

impl LocalTerm {
    pub fn new(sites: Vec<usize>, matrix: Vec<f64>) -> Result<Self> {
        let d = 1usize << sites.len();
        if matrix.len() != d * d {
            return Err(Error::Precondition(format!("term on {} sites needs {} entries, got {}", sites.len(), d * d, matrix.len())));
        }
        let mut seen = sites.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != sites.len() {
            return Err(Error::Precondition(format!("repeated site in term support {sites:?}")));
        }
        for a in 0..d {
            for b in 0..a {
                if (matrix[a * d + b] - matrix[b * d + a]).abs() > 1e-12 {
                    return Err(Error::Precondition(format!("term on {sites:?} is not Hermitian")));
                }
            }
        }
        Ok(Self { sites, matrix })
    }

    /// `c·X_s`.
    pub fn x(site: usize, c: f64) -> Self {
        Self { sites: vec![site], matrix: vec![0.0, c, c, 0.0] }
    }

    /// `c·Z_s`.
    pub fn z(site: usize, c: f64) -> Self {
        Self { sites: vec![site], matrix: vec![c, 0.0, 0.0, -c] }
    }

    /// `c·Z_a Z_b`.
    pub fn zz(a: usize, b: usize, c: f64) -> Self {
        Self { sites: vec![a, b], matrix: vec![c, 0.0, 0.0, 0.0, 0.0, -c, 0.0, 0.0, 0.0, 0.0, -c, 0.0, 0.0, 0.0, 0.0, c] }
    }

    pub fn dim(&self) -> usize {
        1 << self.sites.len()
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.dim() + b]
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.matrix)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        spectral_norm(self.as_matrix())
    }

    /// `X_S M X_S` for the local bit mask `flip`.
    pub fn conjugated(&self, flip: usize) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| self.entry(a ^ flip, b ^ flip))
    }

    fn local_flip_mask(&self, global: u64) -> usize {
        self.sites.iter().enumerate().filter(|(_, &s)| global >> s & 1 == 1).map(|(b, _)| 1 << b).sum()
    }
}

fn spectral_norm(m: DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

/// `H = H₀ + Σ_F V_F`.
#[derive(Clone, Debug)]
pub struct QuantumModel {
    pub classical: ClassicalHamiltonian,
    pub terms: Vec<LocalTerm>,
}

impl QuantumModel {
    pub fn new(classical: ClassicalHamiltonian, terms: Vec<LocalTerm>) -> Result<Self> {
        let n = classical.n_sites();
        if let Some(t) = terms.iter().find(|t| t.sites.iter().any(|&s| s >= n)) {
            return Err(Error::Precondition(format!("term support {:?} leaves the {n}-site system", t.sites)));
        }
        Ok(Self { classical, terms })
    }

    /// Transverse-field Ising model: `H₀ + ε Σ_i X_i`.
    pub fn tfim(classical: ClassicalHamiltonian, eps: f64) -> Self {
        let terms = if eps == 0.0 { Vec::new() } else { (0..classical.n_sites()).map(|s| LocalTerm::x(s, eps)).collect() };
        Self { classical, terms }
    }

    pub fn n_sites(&self) -> usize {
        self.classical.n_sites()
    }

    /// Local strength `max_i Σ_{F∋i} ‖V_F‖`, recomputed from the terms.
    pub fn eps(&self) -> f64 {
        let mut per_site = vec![0.0; self.n_sites()];
        for t in &self.terms {
            let nv = t.norm();
            for &s in &t.sites {
                per_site[s] += nv;
            }
        }
        per_site.into_iter().fold(0.0, f64::max)
    }

    pub fn q(&self) -> usize {
        self.terms.iter().map(|t| t.sites.len()).max().unwrap_or(0)
    }

    /// Larger of checks per site and sites per check.
    pub fn g(&self) -> usize {
        self.classical.max_degree().max(2)
    }

    /// Whether `[H, X_tot] = 0`, checked term by term.
    pub fn is_symmetric(&self) -> bool {
        let h0 = self.classical.h_long == 0.0 && self.classical.h_stag == 0.0;
        h0 && self.terms.iter().all(|t| {
            let full = t.dim() - 1;
            (t.conjugated(full) - t.as_matrix()).amax() <= 1e-14
        })
    }

    /// Same model with an extra uniform longitudinal field: `H₀` gains `−Δh Σ z_i`.
    pub fn with_added_longitudinal(&self, dh: f64) -> Self {
        let mut m = self.clone();
        m.classical.h_long += dh;
        m
    }

    /// `H_A`: the couplings, fields and terms supported inside `region`.
    pub fn local_part(&self, region: &[usize]) -> Self {
        let n = self.n_sites();
        let mut inside = vec![false; n];
        for &s in region {
            inside[s] = true;
        }
        let c = &self.classical;
        let (edges, js): (Vec<(usize, usize)>, Vec<f64>) =
            c.edges().iter().zip(&c.couplings.j).filter(|(&(a, b), _)| inside[a] && inside[b]).map(|(&e, &j)| (e, j)).unzip();
        let field = CouplingField::from_values(js, c.couplings.j1, c.couplings.j2, c.couplings.threshold);
        let classical = ClassicalHamiltonian::on_graph(n, edges, field);
        let mut terms: Vec<LocalTerm> = self.terms.iter().filter(|t| t.sites.iter().all(|&s| inside[s])).cloned().collect();
        for s in (0..n).filter(|&s| inside[s]) {
            let coeff = -c.h_long + c.h_stag * c.stag_sign(s) as f64;
            if coeff != 0.0 {
                terms.push(LocalTerm::z(s, coeff));
            }
        }
        Self { classical, terms }
    }
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    sites: Vec<usize>,
    /// Off-diagonal row entries `(global xor mask, value)` per local row.
    rows: Vec<Vec<(usize, f64)>>,
    /// Set when every row holds the same single entry, as for a transverse field.
    flip: Option<(usize, f64)>,
}

/// Implicit `H` acting on `2^N` amplitudes.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    n: usize,
    diag: Vec<f64>,
    terms: Vec<CompiledTerm>,
    symmetric: bool,
}

pub fn build_quantum_hamiltonian(model: &QuantumModel) -> Result<Hamiltonian> {
    let n = model.n_sites();
    if n > QUANTUM_SITE_BUDGET {
        return Err(Error::SiteBudget { sites: n, budget: QUANTUM_SITE_BUDGET });
    }
    let dim = 1usize << n;
    let mut diag: Vec<f64> = (0..dim as u64).into_par_iter().map(|i| model.classical.energy_index(i)).collect();
    let mut terms = Vec::new();
    for t in &model.terms {
        let d = t.dim();
        let spread = |a: usize| -> usize { t.sites.iter().enumerate().filter(|(b, _)| a >> b & 1 == 1).map(|(_, &s)| 1 << s).sum() };
        let rows: Vec<Vec<(usize, f64)>> =
            (0..d).map(|a| (0..d).filter(|&b| b != a && t.entry(a, b) != 0.0).map(|b| (spread(a ^ b), t.entry(a, b))).collect()).collect();
        if (0..d).any(|a| t.entry(a, a) != 0.0) {
            diag.par_iter_mut().enumerate().for_each(|(i, e)| *e += t.entry(local_index(i, &t.sites), local_index(i, &t.sites)));
        }
        if rows.iter().any(|r| !r.is_empty()) {
            let flip = match rows[0].as_slice() {
                [e] if rows.iter().all(|r| r.as_slice() == [*e]) => Some(*e),
                _ => None,
            };
            terms.push(CompiledTerm { sites: t.sites.clone(), rows, flip });
        }
    }
    Ok(Hamiltonian { n, diag, terms, symmetric: model.is_symmetric() })
}

#[inline]
fn local_index(i: usize, sites: &[usize]) -> usize {
    let mut a = 0;
    for (b, &s) in sites.iter().enumerate() {
        a |= (i >> s & 1) << b;
    }
    a
}

impl Hamiltonian {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `y = H x`, gathered row by row.
    pub fn apply<T: Amplitude>(&self, x: &[T], y: &mut [T]) {
        const CHUNK: usize = 1 << 12;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, yc)| {
            let base = c * CHUNK;
            for (k, yi) in yc.iter_mut().enumerate() {
                *yi = x[base + k] * self.diag[base + k];
            }
            for t in &self.terms {
                match t.flip {
                    Some((m, v)) => {
                        for (k, yi) in yc.iter_mut().enumerate() {
                            *yi += x[(base + k) ^ m] * v;
                        }
                    }
                    None => {
                        for (k, yi) in yc.iter_mut().enumerate() {
                            let i = base + k;
                            for &(m, v) in &t.rows[local_index(i, &t.sites)] {
                                *yi += x[i ^ m] * v;
                            }
                        }
                    }
                }
            }
        });
    }

    pub fn apply_vec<T: Amplitude>(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        self.apply(x, &mut y);
        y
    }

    pub fn expectation(&self, psi: &[f64]) -> f64 {
        dot(psi, &self.apply_vec(psi)) / dot(psi, psi)
    }

    /// Dense matrix, assembled from the matvec; for at most 12 sites.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_SITE_BUDGET {
            return Err(Error::SiteBudget { sites: self.n, budget: DENSE_SITE_BUDGET });
        }
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.set_column(j, &nalgebra::DVector::from_column_slice(&col));
            e[j] = 0.0;
        }
        Ok(m)
    }
}

/// `X_tot` parity sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Global,
    Even,
    Odd,
}

impl Sector {
    pub fn sign(self) -> Option<f64> {
        match self {
            Sector::Global => None,
            Sector::Even => Some(1.0),
            Sector::Odd => Some(-1.0),
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Sector::Global => 0,
            Sector::Even => 1,
            Sector::Odd => -1,
        }
    }

    pub fn from_code(c: i64) -> Result<Self> {
        match c {
            0 => Ok(Sector::Global),
            1 => Ok(Sector::Even),
            -1 => Ok(Sector::Odd),
            _ => Err(Error::Precondition(format!("unknown sector code {c}"))),
        }
    }
}

/// Project onto `X_tot = s` in place; `X_tot` maps index `i` to its complement.
pub fn symmetrize(v: &mut [f64], s: f64) {
    let half = v.len() / 2;
    let (lo, hi) = v.split_at_mut(half);
    lo.par_iter_mut().zip(hi.par_iter_mut().rev()).for_each(|(a, b)| {
        let m = 0.5 * (*a + s * *b);
        *a = m;
        *b = s * m;
    });
}

/// `⟨v|X_tot|v⟩`.
pub fn parity_expectation(v: &[f64]) -> f64 {
    let full = v.len() - 1;
    par_sum(v.len(), |i| v[i] * v[full ^ i]) / dot(v, v)
}

#[derive(Clone, Debug)]
pub struct EigenSolveResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// `X_tot` eigenvalue of each vector when it is one.
    pub parities: Vec<Option<i8>>,
    /// `E₀(odd) − E₀(even)` for symmetric models.
    pub delta_e0: Option<f64>,
}

fn solve_sector(h: &Hamiltonian, m: usize, sector: Sector, start: Option<Vec<f64>>, opts: &LanczosOptions) -> Result<EigenSolveResult> {
    let op = |x: &[f64], y: &mut [f64]| h.apply(x, y);
    let res = match sector.sign() {
        Some(s) => lanczos_lowest(h.dim(), m, &op, &|v: &mut [f64]| symmetrize(v, s), start, opts)?,
        None => lanczos_lowest(h.dim(), m, &op, &|_: &mut [f64]| {}, start, opts)?,
    };
    let parities = match sector {
        Sector::Even => vec![Some(1); res.values.len()],
        Sector::Odd => vec![Some(-1); res.values.len()],
        Sector::Global => res
            .vectors
            .iter()
            .map(|v| {
                let p = parity_expectation(v);
                if (p - 1.0).abs() < 1e-8 {
                    Some(1)
                } else if (p + 1.0).abs() < 1e-8 {
                    Some(-1)
                } else {
                    None
                }
            })
            .collect(),
    };
    Ok(EigenSolveResult { values: res.values, vectors: res.vectors, residuals: res.residuals, parities, delta_e0: None })
}

/// The `m` lowest eigenpairs in `sector`. Global solves of symmetric models merge the two parity
/// sectors, which labels near-degenerate doublets exactly.
pub fn lowest_eigenpairs(h: &Hamiltonian, m: usize, sector: Sector, opts: &LanczosOptions) -> Result<EigenSolveResult> {
    lowest_eigenpairs_from(h, m, sector, None, opts)
}

pub fn lowest_eigenpairs_from(
    h: &Hamiltonian,
    m: usize,
    sector: Sector,
    start: Option<Vec<f64>>,
    opts: &LanczosOptions,
) -> Result<EigenSolveResult> {
    if m == 0 {
        return Err(Error::Precondition("need m >= 1 eigenpairs".into()));
    }
    if sector != Sector::Global && !h.symmetric {
        return Err(Error::Precondition("parity sectors need a model commuting with X_tot".into()));
    }
    if sector == Sector::Global && h.symmetric && h.n > 0 {
        let even = solve_sector(h, m, Sector::Even, start.clone(), opts)?;
        let odd = solve_sector(h, m, Sector::Odd, start, opts)?;
        let delta_e0 = Some(odd.values[0] - even.values[0]);
        let mut all: Vec<(f64, Vec<f64>, f64, Option<i8>)> = Vec::new();
        for r in [even, odd] {
            for (((v, x), res), p) in r.values.into_iter().zip(r.vectors).zip(r.residuals).zip(r.parities) {
                all.push((v, x, res, p));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        all.truncate(m);
        let mut out = EigenSolveResult { values: vec![], vectors: vec![], residuals: vec![], parities: vec![], delta_e0 };
        for (v, x, r, p) in all {
            out.values.push(v);
            out.vectors.push(x);
            out.residuals.push(r);
            out.parities.push(p);
        }
        return Ok(out);
    }
    let mut r = solve_sector(h, m, sector, start, opts)?;
    if h.symmetric && sector != Sector::Global {
        r.delta_e0 = None;
    }
    Ok(r)
}

/// `‖(H − E)ψ‖ / ‖ψ‖`.
pub fn almost_eigen_residual(h: &Hamiltonian, psi: &[f64], e: f64) -> f64 {
    let mut r = h.apply_vec(psi);
    r.par_iter_mut().zip(psi).for_each(|(r, p)| *r -= e * p);
    norm(&r) / norm(psi)
}

/// Lowest eigenpair of `P H P` for the diagonal mask `P`.
#[derive(Clone, Debug)]
pub struct RestrictedGround {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

pub fn restricted_ground(h: &Hamiltonian, mask: &[bool], opts: &LanczosOptions) -> Result<RestrictedGround> {
    let r = restricted_eigenpairs(h, mask, 1, opts)?;
    Ok(RestrictedGround { energy: r.values[0], vector: r.vectors[0].clone(), residual: r.residuals[0] })
}

/// The `m` lowest eigenpairs of `P H P` inside the mask.
pub fn restricted_eigenpairs(h: &Hamiltonian, mask: &[bool], m: usize, opts: &LanczosOptions) -> Result<crate::linalg::Eigenpairs> {
    if mask.len() != h.dim() {
        return Err(Error::Precondition("mask length differs from Hilbert space dimension".into()));
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptySubspace);
    }
    let op = |x: &[f64], y: &mut [f64]| h.apply(x, y);
    let project = |v: &mut [f64]| apply_mask(v, mask);
    let start: Vec<f64> = mask.iter().enumerate().map(|(i, &b)| if b { 1.0 + 0.1 * ((i * 7919) % 13) as f64 } else { 0.0 }).collect();
    let mut res = lanczos_lowest(h.dim(), m, &op, &project, Some(start), opts)?;
    for (v, (&e, r)) in res.vectors.iter().zip(res.values.iter().zip(res.residuals.iter_mut())) {
        let mut hv = h.apply_vec(v);
        apply_mask(&mut hv, mask);
        hv.par_iter_mut().zip(v).for_each(|(a, b)| *a -= e * b);
        *r = norm(&hv);
    }
    Ok(res)
}

pub fn restricted_min_energy(h: &Hamiltonian, mask: &[bool], opts: &LanczosOptions) -> Result<f64> {
    Ok(restricted_ground(h, mask, opts)?.energy)
}

pub fn apply_mask<T: Amplitude>(v: &mut [T], mask: &[bool]) {
    v.par_iter_mut().zip(mask).for_each(|(x, &m)| {
        if !m {
            *x = T::zero();
        }
    });
}

/// `‖P ψ‖²`.
pub fn masked_weight<T: Amplitude>(psi: &[T], mask: &[bool]) -> f64 {
    par_sum(psi.len(), |i| if mask[i] { psi[i].norm_sqr() } else { 0.0 })
}

pub fn class_mask(bs: &BottleneckStructure, pred: impl Fn(ConfigClass) -> bool + Sync) -> Result<Vec<bool>> {
    Ok(bs.classes()?.par_iter().map(|&c| pred(c)).collect())
}

/// `P_k = W_k + Φ_k`.
pub fn sector_mask(bs: &BottleneckStructure, k: u8) -> Result<Vec<bool>> {
    class_mask(bs, |c| c.in_sector(k))
}

/// Number of the links of `gamma` that are domain walls in basis state `i`.
#[inline]
pub fn excited_on(lat: &TorusLattice, links: &[usize], i: usize) -> usize {
    links
        .iter()
        .filter(|&&e| {
            let (a, b) = lat.edge_sites(e);
            (i >> a ^ i >> b) & 1 == 1
        })
        .count()
}

/// `E_B ≥ n` mask.
pub fn q_at_least_mask(lat: &TorusLattice, b: &DWLoop, n: usize) -> Vec<bool> {
    (0..1usize << lat.n_sites()).into_par_iter().map(|i| excited_on(lat, b.links(), i) >= n).collect()
}

/// `‖P_γ ψ‖` with `P_γ` the projector onto "every link of γ is a domain wall".
pub fn dw_projector_weight<T: Amplitude>(psi: &[T], lat: &TorusLattice, gamma: &DWLoop) -> f64 {
    let l = gamma.len();
    par_sum(psi.len(), |i| if excited_on(lat, gamma.links(), i) == l { psi[i].norm_sqr() } else { 0.0 }).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BnDecomposition {
    pub indicator_len: usize,
    /// `qg`.
    pub window: usize,
    pub n_star: usize,
    /// `A_1 … A_{n*+1}`.
    pub amplitudes: Vec<f64>,
    /// Inclusive `E_B` range of each window.
    pub windows: Vec<(usize, usize)>,
    /// `A_n / A_{n+1}` for `n ≤ n*`.
    pub ratios: Vec<Option<f64>>,
    pub eps: f64,
    pub g: usize,
}

impl BnDecomposition {
    /// `3gε/Δ`.
    pub fn ceiling(&self, delta: f64) -> f64 {
        3.0 * self.g as f64 * self.eps / delta
    }

    /// `A_n ≤ (3gε/Δ) A_{n+1}` for every `n ≤ n*`.
    pub fn step_decay_holds(&self, delta: f64) -> bool {
        let c = self.ceiling(delta);
        (0..self.n_star).all(|n| self.amplitudes[n] <= c * self.amplitudes[n + 1])
    }

    /// `A_1 ≤ (3gε/Δ)^{n*}`.
    pub fn head_bound_holds(&self, delta: f64) -> bool {
        self.amplitudes[0] <= self.ceiling(delta).powi(self.n_star as i32)
    }
}

/// `n* = ⌊L/(5qg)⌋ + 1`.
pub fn n_star(l: usize, qg: usize) -> usize {
    l / (5 * qg) + 1
}

/// Amplitudes of `ψ` in the `E_B` windows of width `qg`; `L` defaults to `L_B`.
pub fn eb_decomposition<T: Amplitude>(
    psi: &[T],
    b: &DWLoop,
    lat: &TorusLattice,
    model: &QuantumModel,
    l_override: Option<usize>,
) -> Result<BnDecomposition> {
    let lb = b.len();
    let qg = (model.q().max(1)) * model.g();
    let ns = n_star(l_override.unwrap_or(lb), qg);
    let total = norm(psi);
    if total == 0.0 {
        return Err(Error::Precondition("state is zero".into()));
    }
    let window_of = |eb: usize| -> usize {
        if eb == lb {
            0
        } else {
            (((lb - eb - 1) / qg) + 1).min(ns)
        }
    };
    let mut w2 = vec![0.0; ns + 1];
    let parts: Vec<(usize, f64)> =
        psi.par_iter().enumerate().map(|(i, x)| (window_of(excited_on(lat, b.links(), i)), x.norm_sqr())).collect();
    for (w, p) in parts {
        w2[w] += p;
    }
    let amplitudes: Vec<f64> = w2.iter().map(|x| x.sqrt() / total).collect();
    let mut windows = vec![(lb, lb)];
    for n in 2..=ns + 1 {
        let hi = lb.saturating_sub((n - 2) * qg + 1);
        let lo = if n == ns + 1 { 0 } else { lb.saturating_sub((n - 1) * qg) };
        windows.push((lo, hi));
    }
    let ratios = (0..ns).map(|n| (amplitudes[n + 1] > 0.0).then(|| amplitudes[n] / amplitudes[n + 1])).collect();
    Ok(BnDecomposition { indicator_len: lb, window: qg, n_star: ns, amplitudes, windows, ratios, eps: model.eps(), g: model.g() })
}

/// Where `ε` sits relative to the stability window `ε < Δ/(3g)·min(1/√2, e^{−5qgθ/2})`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsWindow {
    pub eps: f64,
    pub limit: f64,
    /// `ζ = ε·3g/Δ·e^{5qgθ/2}`.
    pub zeta: f64,
    pub inside: bool,
}

pub fn eps_window(model: &QuantumModel, delta: f64, theta: f64) -> EpsWindow {
    let eps = model.eps();
    let qg = (model.q().max(1) * model.g()) as f64;
    let g = model.g() as f64;
    let limit = delta / (3.0 * g) * (1.0 / 2f64.sqrt()).min((-2.5 * qg * theta).exp());
    let zeta = eps * 3.0 * g / delta * (2.5 * qg * theta).exp();
    EpsWindow { eps, limit, zeta, inside: eps < limit }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QpcCheck {
    pub indicator_len: usize,
    /// `⌈4L_B/5⌉`.
    pub min_excited: usize,
    /// Lowest energy in `P_k ∩ Q_{B,≥4L_B/5}`.
    pub constrained_min: f64,
    pub h_k_min: f64,
    pub required_gap: f64,
    pub holds: bool,
}

/// Checks `min_{P_k ∩ Q_{B,≥4L_B/5}} H ≥ ΔL_B + H_{k,min}` by restricted diagonalization.
pub fn qpc_check(h: &Hamiltonian, bs: &BottleneckStructure, k: u8, b: &DWLoop, delta: f64, opts: &LanczosOptions) -> Result<QpcCheck> {
    let lat = bs.lattice();
    let pk = sector_mask(bs, k)?;
    let h_k_min = restricted_min_energy(h, &pk, opts)?;
    let lb = b.len();
    let min_excited = (4 * lb).div_ceil(5);
    let q = q_at_least_mask(lat, b, min_excited);
    let both: Vec<bool> = pk.iter().zip(&q).map(|(a, b)| *a && *b).collect();
    let constrained_min = restricted_min_energy(h, &both, opts)?;
    let required_gap = delta * lb as f64;
    Ok(QpcCheck {
        indicator_len: lb,
        min_excited,
        constrained_min,
        h_k_min,
        required_gap,
        holds: constrained_min >= required_gap + h_k_min,
    })
}

/// `Σ_B ‖B P_k ψ‖²` over the indicator family, against `‖Φ_k ψ‖²`.
pub fn union_bound(psi: &[f64], bs: &BottleneckStructure, k: u8) -> Result<(f64, f64)> {
    let classes = bs.classes()?;
    let lat = bs.lattice();
    let phi = par_sum(psi.len(), |i| if classes[i].is_bottleneck(k) { psi[i] * psi[i] } else { 0.0 });
    let per_indicator: Vec<f64> = bs
        .indicators
        .par_iter()
        .map(|b| {
            psi.iter()
                .enumerate()
                .filter(|(i, _)| classes[*i].in_sector(k) && excited_on(lat, b.links(), *i) == b.len())
                .map(|(_, x)| x * x)
                .sum::<f64>()
        })
        .collect();
    Ok((per_indicator.iter().sum(), phi))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryShift {
    /// `Σ_F ‖ℓ_A V_F ℓ_A − V_F‖`.
    pub triangle: f64,
    /// `‖ℓ_A V ℓ_A − V‖`.
    pub exact: f64,
    pub boundary_size: usize,
    /// `2|∂A|ε`.
    pub bound: f64,
    pub holds: bool,
}

/// Effect of the truncated flip `ℓ_A = Π_{i∈A} X_i` on the perturbation.
pub fn truncated_symmetry_shift(model: &QuantumModel, region: &[usize], opts: &LanczosOptions) -> Result<SymmetryShift> {
    let n = model.n_sites();
    if n > QUANTUM_SITE_BUDGET {
        return Err(Error::SiteBudget { sites: n, budget: QUANTUM_SITE_BUDGET });
    }
    let mut flip = 0usize;
    for &s in region {
        if s >= n {
            return Err(Error::Precondition(format!("site {s} outside the {n}-site system")));
        }
        flip |= 1 << s;
    }
    let diffs: Vec<LocalTerm> = model
        .terms
        .iter()
        .map(|t| {
            let m = t.conjugated(t.local_flip_mask(flip as u64)) - t.as_matrix();
            LocalTerm { sites: t.sites.clone(), matrix: m.transpose().as_slice().to_vec() }
        })
        .filter(|t| t.matrix.iter().any(|x| x.abs() > 0.0))
        .collect();
    let triangle = diffs.iter().map(LocalTerm::norm).sum();
    let boundary_size = region.iter().filter(|&&s| model.classical.incident(s).iter().any(|&(_, t)| flip >> t & 1 == 0)).count();
    let bound = 2.0 * boundary_size as f64 * model.eps();
    let exact = if diffs.is_empty() {
        0.0
    } else {
        let dm = QuantumModel { classical: ClassicalHamiltonian::on_graph(n, vec![], CouplingField::uniform(0, 0.0)), terms: diffs };
        let h = build_quantum_hamiltonian(&dm)?;
        let lo = lowest_eigenpairs(&h, 1, Sector::Global, opts)?.values[0];
        let neg = NegatedOp(&h);
        let op = |x: &[f64], y: &mut [f64]| neg.apply(x, y);
        let hi = -lanczos_lowest(h.dim(), 1, &op, &|_: &mut [f64]| {}, None, opts)?.values[0];
        lo.abs().max(hi.abs())
    };
    Ok(SymmetryShift { triangle, exact, boundary_size, bound, holds: triangle <= bound + 1e-12 && exact <= triangle + 1e-9 })
}

struct NegatedOp<'a>(&'a Hamiltonian);

impl NegatedOp<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        y.par_iter_mut().for_each(|v| *v = -*v);
    }
}

/// Magnetization density `(1/N) Σ_i z_i` of basis state `i`.
#[inline]
pub fn magnetization_density(i: usize, n: usize) -> f64 {
    1.0 - 2.0 * (i.count_ones() as f64) / n as f64
}

/// `⟨Z_s⟩` for each site.
pub fn site_magnetizations<T: Amplitude>(psi: &[T], n: usize) -> Vec<f64> {
    let total = par_sum(psi.len(), |i| psi[i].norm_sqr());
    (0..n).map(|s| par_sum(psi.len(), |i| if i >> s & 1 == 1 { -psi[i].norm_sqr() } else { psi[i].norm_sqr() }) / total).collect()
}

/// Minimal Hamming distance between `P_1` and `P_2`, by breadth-first search over single flips.
pub fn sector_distance(bs: &BottleneckStructure) -> Result<usize> {
    let classes = bs.classes()?;
    let n = bs.lattice().n_sites();
    let mut dist = vec![usize::MAX; classes.len()];
    let mut queue = VecDeque::new();
    for (i, c) in classes.iter().enumerate() {
        if c.in_sector(1) {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if classes[i].in_sector(2) {
            return Ok(dist[i]);
        }
        for s in 0..n {
            let j = i ^ (1 << s);
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    Ok(usize::MAX)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SSBReport {
    pub well_weights: [f64; 2],
    pub bottleneck_weights: [f64; 2],
    pub out_weight: f64,
    /// `⟨A⟩` in the normalized projection `P_k ψ / ‖P_k ψ‖`.
    pub sector_magnetization: [f64; 2],
    /// `⟨ψ_k|A|ψ_k⟩` with the unnormalized `ψ_k = P_k ψ`.
    pub sector_magnetization_raw: [f64; 2],
    pub magnetization: f64,
    /// `(1/N²) Σ_ij (⟨Z_iZ_j⟩ − ⟨Z_i⟩⟨Z_j⟩)`.
    pub lro: f64,
    /// `‖P_out ψ‖ / ‖ψ‖`.
    pub delta: f64,
    /// `min_k |⟨A⟩_k| − 2√(δ + 2δ²)`.
    pub c: f64,
    /// Largest `|⟨ψ_k|A|ψ_k⟩|`: the constant certified by the raw sector data.
    pub c_raw: f64,
    pub lro_holds: bool,
    pub c_admissible: bool,
    pub parity: f64,
    pub symmetric: bool,
    pub separated: bool,
    pub energy: f64,
    pub residual: f64,
    pub l_star: usize,
    pub out_threshold: f64,
    pub verdict: bool,
}

/// Weights, order parameters and long-range order of `ψ` with respect to the structure's sectors.
pub fn ssb_report(psi: &[f64], bs: &BottleneckStructure, h: &Hamiltonian, out_threshold: f64) -> Result<SSBReport> {
    let classes = bs.classes()?;
    let n = h.n_sites();
    let total: f64 = dot(psi, psi);
    if total == 0.0 {
        return Err(Error::Precondition("state is zero".into()));
    }
    let mut w = [0.0; 2];
    let mut phi = [0.0; 2];
    let mut raw = [0.0; 2];
    let mut out = 0.0;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, (&x, c)) in psi.iter().zip(classes).enumerate() {
        let p = x * x / total;
        let m = magnetization_density(i, n);
        m1 += p * m;
        m2 += p * m * m;
        match c {
            ConfigClass::Out => out += p,
            ConfigClass::Well(k) => {
                w[*k as usize - 1] += p;
                raw[*k as usize - 1] += p * m;
            }
            ConfigClass::Bottleneck(k) => {
                phi[*k as usize - 1] += p;
                raw[*k as usize - 1] += p * m;
            }
        }
    }
    let sector_magnetization = [0, 1].map(|k| {
        let wk = w[k] + phi[k];
        if wk > 0.0 {
            raw[k] / wk
        } else {
            0.0
        }
    });
    let lro = m2 - m1 * m1;
    let delta = out.sqrt();
    let slack = 2.0 * (delta + 2.0 * delta * delta).sqrt();
    let c = sector_magnetization.iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min) - slack;
    let c_raw = raw.iter().map(|m| m.abs()).fold(0.0, f64::max);
    let energy = h.expectation(psi);
    let residual = almost_eigen_residual(h, psi, energy);
    let parity = parity_expectation(psi);
    let symmetric = (parity.abs() - 1.0).abs() < 1e-8;
    let separated = sector_magnetization[0] > 0.25 && sector_magnetization[1] < -0.25;
    let lro_holds = lro > 0.5 * c * c;
    let verdict = out <= out_threshold && separated && symmetric && lro_holds && c > 0.0;
    Ok(SSBReport {
        well_weights: w,
        bottleneck_weights: phi,
        out_weight: out,
        sector_magnetization,
        sector_magnetization_raw: raw,
        magnetization: m1,
        lro,
        delta,
        c,
        c_raw,
        lro_holds,
        c_admissible: c_raw > slack,
        parity,
        symmetric,
        separated,
        energy,
        residual,
        l_star: sector_distance(bs)?,
        out_threshold,
        verdict,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiltReport {
    pub hhat: f64,
    pub energy: f64,
    /// `|⟨ψ̂|ψ_k⟩|` with `ψ_k` the normalized `P_k` projection of the untilted ground state.
    pub overlaps: [f64; 2],
    /// Well favored by `+ε̂A`: the negative-magnetization one.
    pub favored: u8,
    pub overlap_favored: f64,
    pub delta_e0: Option<f64>,
    pub residual: f64,
}

/// Ground state of `Ĥ = H + ε̂ (1/N)Σ Z_i` against the well projections of the untilted ground state.
pub fn tilted_ground_overlap(model: &QuantumModel, hhat: f64, bs: &BottleneckStructure, opts: &LanczosOptions) -> Result<TiltReport> {
    if !(hhat >= 0.0) {
        return Err(Error::Precondition(format!("tilt must be >= 0, got {hhat}")));
    }
    let h = build_quantum_hamiltonian(model)?;
    let base = lowest_eigenpairs(&h, 1, Sector::Global, opts)?;
    let psi0 = &base.vectors[0];
    let wells: Vec<Vec<f64>> = (1..=2u8)
        .map(|k| {
            let mask = sector_mask(bs, k)?;
            let mut v = psi0.clone();
            apply_mask(&mut v, &mask);
            let nv = norm(&v);
            if nv > 0.0 {
                v.iter_mut().for_each(|x| *x /= nv);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let favored = 2u8;
    let (psi, energy, residual) = if hhat == 0.0 {
        (psi0.clone(), base.values[0], base.residuals[0])
    } else {
        let n = model.n_sites() as f64;
        let ht = build_quantum_hamiltonian(&model.with_added_longitudinal(-hhat / n))?;
        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        for start in [wells[favored as usize - 1].clone(), wells[2 - favored as usize].clone()] {
            let r = lowest_eigenpairs_from(&ht, 1, Sector::Global, Some(start), opts)?;
            if best.as_ref().is_none_or(|b| r.values[0] < b.1) {
                best = Some((r.vectors[0].clone(), r.values[0], r.residuals[0]));
            }
        }
        best.unwrap()
    };
    let overlaps = [dot(&psi, &wells[0]).abs(), dot(&psi, &wells[1]).abs()];
    Ok(TiltReport { hhat, energy, overlaps, favored, overlap_favored: overlaps[favored as usize - 1], delta_e0: base.delta_e0, residual })
}

/// Flat binary state: `u64 N`, `i64 sector`, then `2^N` little-endian `f64`.
pub fn write_state<W: Write>(mut w: W, psi: &[f64], n: usize, sector: Sector) -> Result<()> {
    if psi.len() != 1usize << n {
        return Err(Error::Precondition(format!("state has {} amplitudes, expected 2^{n}", psi.len())));
    }
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&sector.code().to_le_bytes())?;
    for x in psi {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state<R: Read>(mut r: R) -> Result<(Vec<f64>, usize, Sector)> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    if n > QUANTUM_SITE_BUDGET {
        return Err(Error::SiteBudget { sites: n, budget: QUANTUM_SITE_BUDGET });
    }
    r.read_exact(&mut b8)?;
    let sector = Sector::from_code(i64::from_le_bytes(b8))?;
    let mut psi = Vec::with_capacity(1 << n);
    for _ in 0..1usize << n {
        r.read_exact(&mut b8)?;
        psi.push(f64::from_le_bytes(b8));
    }
    Ok((psi, n, sector))
}
