//! Restarted Lanczos for the low end of a real symmetric operator, and Krylov propagation `e^{−iHt}ψ`.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scalar type a state vector can hold.
pub trait Amplitude: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign + 'static {
    fn zero() -> Self;
    fn norm_sqr(self) -> f64;
}

impl Amplitude for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Amplitude for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}

const SUM_CHUNK: usize = 1 << 12;

/// `Σ_{i<n} f(i)` in parallel over fixed chunks, so the rounding does not depend on the thread count.
pub fn par_sum<T, F>(n: usize, f: F) -> T
where
    T: std::iter::Sum<T> + Send,
    F: Fn(usize) -> T + Sync,
{
    let partial: Vec<T> =
        (0..n.div_ceil(SUM_CHUNK)).into_par_iter().map(|c| (c * SUM_CHUNK..((c + 1) * SUM_CHUNK).min(n)).map(&f).sum()).collect();
    partial.into_iter().sum()
}

pub fn norm<T: Amplitude>(v: &[T]) -> f64 {
    par_sum(v.len(), |i| v[i].norm_sqr()).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    par_sum(a.len(), |i| a[i] * b[i])
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    par_sum(a.len(), |i| a[i].conj() * b[i])
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.par_iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn scale(v: &mut [f64], a: f64) {
    v.par_iter_mut().for_each(|x| *x *= a);
}

pub type RealOp<'a> = dyn Fn(&[f64], &mut [f64]) + Sync + 'a;
pub type ComplexOp<'a> = dyn Fn(&[Complex64], &mut [Complex64]) + Sync + 'a;

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Residual target `‖Av − θv‖ ≤ tol·max(1, |θ|)`.
    pub tol: f64,
    /// Basis size before a thick restart; clipped to the memory budget.
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_basis: 48, max_restarts: 400, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖Av − θv‖` recomputed with a fresh product.
    pub residuals: Vec<f64>,
}

const BASIS_BYTES: usize = 1 << 31;

/// Thick-restart Lanczos with full reorthogonalization for the `m` lowest eigenpairs of `op`.
///
/// `project` is applied to every basis vector, so the iteration stays inside its range
/// (a parity sector or a diagonal mask). When the reachable subspace is exhausted the
/// Ritz pairs are exact and fewer than `m` may be returned.
pub fn lanczos_lowest(
    dim: usize,
    m: usize,
    op: &RealOp,
    project: &(dyn Fn(&mut [f64]) + Sync),
    start: Option<Vec<f64>>,
    opts: &LanczosOptions,
) -> Result<Eigenpairs> {
    if m == 0 {
        return Err(Error::Precondition("need m >= 1 eigenpairs".into()));
    }
    let budget = (BASIS_BYTES / (16 * dim.max(1))).max(m + 4);
    let max_basis = opts.max_basis.max(m + 8).min(budget).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect() };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, basis: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>| -> bool {
        let mut v = v;
        project(&mut v);
        let before = norm(&v);
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, &v);
                axpy(&mut v, -c, b);
            }
        }
        let after = norm(&v);
        if after <= 1e-10 * before {
            return false;
        }
        scale(&mut v, 1.0 / after);
        let mut av = vec![0.0; dim];
        op(&v, &mut av);
        project(&mut av);
        basis.push(v);
        images.push(av);
        true
    };

    let first = start.unwrap_or_else(|| random(&mut rng));
    if !push(first, &mut basis, &mut images) && !push(random(&mut rng), &mut basis, &mut images) {
        return Err(Error::EmptySubspace);
    }
    let mut restarts = 0;
    loop {
        let mut exhausted = false;
        while basis.len() < max_basis {
            let next = images.last().unwrap().clone();
            if push(next, &mut basis, &mut images) {
                continue;
            }
            if !(0..3).any(|_| push(random(&mut rng), &mut basis, &mut images)) {
                exhausted = true;
                break;
            }
        }
        let k = basis.len();
        let mut hm = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let h = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                hm[(i, j)] = h;
                hm[(j, i)] = h;
            }
        }
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let wanted = m.min(k);
        let keep = if exhausted { wanted } else { (m + 6).max(max_basis / 3).min(k - 1).max(wanted) };
        let combine = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut y = vec![0.0; dim];
            for (j, s) in src.iter().enumerate() {
                let c = eig.eigenvectors[(j, col)];
                if c != 0.0 {
                    axpy(&mut y, c, s);
                }
            }
            y
        };
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_images = Vec::with_capacity(keep);
        let mut residual_vecs = Vec::with_capacity(wanted);
        let mut converged = true;
        let mut worst = 0.0f64;
        for (rank, &col) in order.iter().take(keep).enumerate() {
            let y = combine(&basis, col);
            let ay = combine(&images, col);
            if rank < wanted {
                let theta = eig.eigenvalues[col];
                let mut r = ay.clone();
                axpy(&mut r, -theta, &y);
                let rn = norm(&r);
                worst = worst.max(rn);
                if rn > opts.tol * theta.abs().max(1.0) {
                    converged = false;
                }
                residual_vecs.push((rn, r));
            }
            ritz.push(y);
            ritz_images.push(ay);
        }
        if converged || exhausted {
            let values: Vec<f64> = order.iter().take(wanted).map(|&c| eig.eigenvalues[c]).collect();
            let vectors: Vec<Vec<f64>> = ritz[..wanted].to_vec();
            let residuals: Vec<f64> = vectors
                .iter()
                .zip(&values)
                .map(|(v, &th)| {
                    let mut av = vec![0.0; dim];
                    op(v, &mut av);
                    project(&mut av);
                    axpy(&mut av, -th, v);
                    norm(&av)
                })
                .collect();
            let fresh_ok = residuals.iter().zip(&values).all(|(r, th)| *r <= 10.0 * opts.tol * th.abs().max(1.0));
            if fresh_ok || exhausted {
                return Ok(Eigenpairs { values, vectors, residuals });
            }
        }
        restarts += 1;
        if restarts > opts.max_restarts {
            return Err(Error::NoConvergence { iterations: restarts, residual: worst });
        }
        // The Ritz residuals are (nearly) parallel to the next Krylov direction; expand along the largest.
        let (_, direction) = residual_vecs.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        basis = ritz;
        images = ritz_images;
        if !push(direction, &mut basis, &mut images) && !push(random(&mut rng), &mut basis, &mut images) {
            continue;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct KrylovStats {
    pub substeps: usize,
    pub matvecs: usize,
    /// Sum of the per-substep error estimates.
    pub error_estimate: f64,
}

/// In-order sum of per-chunk results over `SUM_CHUNK`-sized pieces of `w`.
fn chunked<T, F>(w: &mut [Complex64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut [Complex64]) -> T + Sync,
{
    w.par_chunks_mut(SUM_CHUNK).enumerate().map(|(c, wc)| f(c * SUM_CHUNK, wc)).collect()
}

/// One Lanczos step on `w = H v_j`: three-term recurrence, one local reorthogonalization
/// pass against `v_j` and `v_{j−1}`, fused so each vector is streamed as few times as possible.
/// Returns `(α_j, β_j)` with `w` left unnormalized.
fn lanczos_recurrence(w: &mut [Complex64], vj: &[Complex64], prev: Option<(&[Complex64], f64)>) -> (f64, f64) {
    let alpha = cdot(vj, w).re;
    let zero = Complex64::new(0.0, 0.0);
    let overlaps = chunked(w, |o, wc| {
        let (mut c1, mut c2) = (zero, zero);
        for (i, x) in wc.iter_mut().enumerate() {
            let a = vj[o + i];
            *x -= a * alpha;
            if let Some((vp, b)) = prev {
                *x -= vp[o + i] * b;
                c2 += vp[o + i].conj() * *x;
            }
            c1 += a.conj() * *x;
        }
        (c1, c2)
    });
    let (c1, c2) = overlaps.into_iter().fold((zero, zero), |(a, b), (x, y)| (a + x, b + y));
    let sq: f64 = chunked(w, |o, wc| {
        let mut acc = 0.0;
        for (i, x) in wc.iter_mut().enumerate() {
            *x -= vj[o + i] * c1;
            if let Some((vp, _)) = prev {
                *x -= vp[o + i] * c2;
            }
            acc += x.norm_sqr();
        }
        acc
    })
    .into_iter()
    .sum();
    (alpha, sq.sqrt())
}

/// `e^{−iHt}ψ` with Krylov dimension `m` and adaptive substeps meeting a local error `tol`.
///
/// Each substep takes the longest time the projected problem certifies, using the usual
/// a posteriori estimate `β_m |e_mᵀ e^{−iT_mτ} e_1| ‖ψ‖`.
pub fn evolve_krylov(op: &ComplexOp, psi: &[Complex64], t: f64, m: usize, tol: f64) -> Result<(Vec<Complex64>, KrylovStats)> {
    let dim = psi.len();
    let mut state = psi.to_vec();
    let mut stats = KrylovStats::default();
    if t == 0.0 {
        return Ok((state, stats));
    }
    let m = m.min(dim).max(1);
    let sign = t.signum();
    let total = t.abs();
    let mut done = 0.0;
    let mut tau = total;
    let zero = Complex64::new(0.0, 0.0);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    while done < total {
        let nrm = norm(&state);
        if nrm == 0.0 {
            break;
        }
        if basis.is_empty() {
            basis.push(vec![zero; dim]);
        }
        basis[0].par_iter_mut().zip(&state).for_each(|(b, x)| *b = x / nrm);
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut breakdown = false;
        for j in 0..m {
            if basis.len() <= j + 1 && j + 1 < m {
                basis.push(vec![zero; dim]);
            }
            let mut w = if j + 1 < m { std::mem::take(&mut basis[j + 1]) } else { vec![zero; dim] };
            op(&basis[j], &mut w);
            stats.matvecs += 1;
            let prev = (j > 0).then(|| (basis[j - 1].as_slice(), beta[j - 1]));
            let (a, b) = lanczos_recurrence(&mut w, &basis[j], prev);
            alpha.push(a);
            beta.push(b);
            if b <= 1e-13 * (a.abs() + 1.0) {
                breakdown = true;
                if j + 1 < m {
                    basis[j + 1] = w;
                }
                break;
            }
            if j + 1 < m {
                let inv = 1.0 / b;
                w.par_iter_mut().for_each(|x| *x *= inv);
                basis[j + 1] = w;
            }
        }
        let k = alpha.len();
        if k == dim {
            breakdown = true;
        }
        let mut tm = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            tm[(i, i)] = alpha[i];
            if i + 1 < k {
                tm[(i, i + 1)] = beta[i];
                tm[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(tm);
        let coeff = |r: usize, tau: f64| -> Complex64 {
            (0..k)
                .map(|c| Complex64::from_polar(1.0, -sign * eig.eigenvalues[c] * tau) * eig.eigenvectors[(r, c)] * eig.eigenvectors[(0, c)])
                .sum()
        };
        let err_at = |tau: f64| if breakdown { 0.0 } else { beta[k - 1] * coeff(k - 1, tau).norm() * nrm };
        let remaining = total - done;
        tau = if err_at(remaining) <= tol {
            remaining
        } else {
            let mut ok = (2.0 * tau).min(remaining);
            while err_at(ok) > tol {
                ok *= 0.5;
                if ok < 1e-13 * total.max(1.0) {
                    return Err(Error::StepUnderflow { t: sign * done });
                }
            }
            let mut bad = (2.0 * ok).min(remaining);
            while err_at(bad) <= tol && bad < remaining {
                ok = bad;
                bad = (2.0 * bad).min(remaining);
            }
            for _ in 0..12 {
                let mid = 0.5 * (ok + bad);
                if err_at(mid) <= tol {
                    ok = mid;
                } else {
                    bad = mid;
                }
            }
            ok
        };
        let err = err_at(tau);
        let coeffs: Vec<Complex64> = (0..k).map(|r| coeff(r, tau) * nrm).collect();
        let basis_ref = &basis;
        state.par_chunks_mut(SUM_CHUNK).enumerate().for_each(|(c, sc)| {
            let o = c * SUM_CHUNK;
            for (i, x) in sc.iter_mut().enumerate() {
                *x = (0..k).map(|j| coeffs[j] * basis_ref[j][o + i]).sum();
            }
        });
        done = if tau >= remaining { total } else { done + tau };
        stats.substeps += 1;
        stats.error_estimate += err;
    }
    Ok((state, stats))
}

/// Dense `e^{−iHt}` for a real symmetric matrix by scaling and squaring a Taylor series.
///
/// Avoids an eigendecomposition, so it stays usable as an oracle on highly degenerate spectra.
pub fn dense_propagator(h: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a = h.map(|x| Complex64::new(0.0, -x * t));
    let a_norm = (0..n).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if a_norm > 0.5 { (a_norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a * Complex64::new(0.5f64.powi(s), 0.0);
    let mut u = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &b * Complex64::new(1.0 / k as f64, 0.0);
        u += &term;
        if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        u = &u * &u;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn lanczos_matches_dense_path_laplacian() {
        let n = 200;
        let a = laplacian(n);
        let op = |x: &[f64], y: &mut [f64]| {
            let v = &a * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let res = lanczos_lowest(n, 3, &op, &|_| {}, None, &LanczosOptions::default()).unwrap();
        for (k, &v) in res.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-9, "{k}: {v} vs {exact}");
        }
        assert!(res.residuals.iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn small_space_is_exhausted_exactly() {
        let a = laplacian(5);
        let op = |x: &[f64], y: &mut [f64]| {
            let v = &a * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let res = lanczos_lowest(5, 5, &op, &|_| {}, None, &LanczosOptions::default()).unwrap();
        assert_eq!(res.values.len(), 5);
        assert!((res.values[4] - (2.0 + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn krylov_rabi_flip() {
        let eps = 0.7;
        let op = |x: &[Complex64], y: &mut [Complex64]| {
            y[0] = x[1] * eps;
            y[1] = x[0] * eps;
        };
        let psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let (out, _) = evolve_krylov(&op, &psi, std::f64::consts::PI / (2.0 * eps), 30, 1e-12).unwrap();
        assert!(out[0].norm() < 1e-10);
        assert!((out[1].norm() - 1.0).abs() < 1e-10);
    }
}
