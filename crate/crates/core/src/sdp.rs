//! ADMM solver for `max tr(R X)` subject to `diag(X) = 1`, `X ⪰ 0`
//! (complex Hermitian `X`), the relaxation of unit-modulus quadratic
//! programs.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cabs, carg, cis, lit, to_f64, Cx, Real};

/// Iterations between penalty updates.
const BALANCE_PERIOD: usize = 50;
/// Iterations between duality-gap certificates.
const GAP_PERIOD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Relative tolerance on residuals and duality gap.
    pub tol: f64,
    pub max_iterations: usize,
    /// Initial penalty.
    pub rho: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 5000,
            rho: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution<T: Real> {
    /// Feasible solution with an exact unit diagonal.
    pub x: DMatrix<Cx<T>>,
    /// `tr(R X)`.
    pub objective: T,
    /// Certified upper bound on the optimum.
    pub upper_bound: T,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Largest entry magnitude of `R`, the unit of the gap.
    pub scale: T,
}

impl<T: Real> SdpSolution<T> {
    /// Duality gap relative to the larger of `|objective|`, `|upper_bound|`
    /// and the entry scale of `R`.
    pub fn relative_gap(&self) -> T {
        let d = self.objective.abs().max(self.upper_bound.abs()).max(self.scale);
        if d == T::zero() {
            T::zero()
        } else {
            (self.upper_bound - self.objective) / d
        }
    }
}

fn hermitian_part<T: Real>(m: &DMatrix<Cx<T>>) -> DMatrix<Cx<T>> {
    (m + m.adjoint()) * Cx::new(lit::<T>(0.5), T::zero())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
fn eigh<T: Real>(m: &DMatrix<Cx<T>>) -> (Vec<T>, DMatrix<Cx<T>>) {
    let e = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Projection onto the PSD cone.
pub fn project_psd<T: Real>(m: &DMatrix<Cx<T>>) -> DMatrix<Cx<T>> {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l > T::zero() {
            let v = vecs.column(k);
            out += (&v * v.adjoint()) * Cx::new(l, T::zero());
        }
    }
    out
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<T: Real>(m: &DMatrix<Cx<T>>) -> T {
    eigh(m).0[0]
}

/// Largest eigenpair of a Hermitian matrix.
pub fn principal_eigenpair<T: Real>(m: &DMatrix<Cx<T>>) -> (T, Vec<Cx<T>>) {
    let (vals, vecs) = eigh(m);
    let k = vals.len() - 1;
    (vals[k], vecs.column(k).iter().copied().collect())
}

fn frob<T: Real>(m: &DMatrix<Cx<T>>) -> f64 {
    m.iter().map(|z| to_f64(z.norm_sqr())).sum::<f64>().sqrt()
}

fn real_trace_product<T: Real>(a: &DMatrix<Cx<T>>, b: &DMatrix<Cx<T>>) -> T {
    // tr(A B) for Hermitian A, B
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Rescales a PSD matrix to an exact unit diagonal.
fn unit_diagonal<T: Real>(z: &DMatrix<Cx<T>>) -> DMatrix<Cx<T>> {
    let n = z.nrows();
    let d: Vec<T> = (0..n)
        .map(|i| {
            let v = z[(i, i)].re;
            if v > T::zero() { v.sqrt().recip() } else { T::zero() }
        })
        .collect();
    let mut out = DMatrix::from_fn(n, n, |r, c| z[(r, c)] * Cx::new(d[r] * d[c], T::zero()));
    for i in 0..n {
        // a zero diagonal means the row is zero; the identity entry keeps
        // the matrix PSD and feasible
        out[(i, i)] = Cx::new(T::one(), T::zero());
    }
    out
}

/// Solves `max tr(R X)` s.t. `X_ii = 1`, `X ⪰ 0`.
///
/// `warm` seeds the PSD iterate, typically with `v v^H` for the previous
/// unit-modulus solution.
pub fn solve<T: Real>(
    r: &DMatrix<Cx<T>>,
    warm: Option<&DMatrix<Cx<T>>>,
    opts: &SdpOptions,
) -> Result<SdpSolution<T>> {
    let n = r.nrows();
    if n == 0 || r.ncols() != n {
        return Err(Error::Dimension(format!("R is {}x{}", r.nrows(), r.ncols())));
    }
    if let Some(w) = warm {
        if w.shape() != (n, n) {
            return Err(Error::Dimension(format!("warm start is {:?}, R is {n}x{n}", w.shape())));
        }
    }
    let r = hermitian_part(r);
    let scale = r.iter().map(|z| cabs(*z)).fold(T::zero(), |a, b| a.max(b));
    let one = Cx::new(T::one(), T::zero());
    if scale == T::zero() {
        let x = DMatrix::from_element(n, n, one);
        return Ok(SdpSolution {
            x,
            objective: T::zero(),
            upper_bound: T::zero(),
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            scale,
        });
    }
    // minimize tr(C X) with C = -R / scale
    let c = &r * Cx::new(-scale.recip(), T::zero());
    let tol = opts.tol;
    let sqrt_n = (n as f64).sqrt();

    let mut z = match warm {
        Some(w) => project_psd(&hermitian_part(w)),
        None => DMatrix::identity(n, n),
    };
    let mut u = DMatrix::<Cx<T>>::zeros(n, n);
    let mut rho: T = lit(opts.rho);
    let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=opts.max_iterations {
        let mut x = &z - &u - &c * Cx::new(rho.recip(), T::zero());
        for i in 0..n {
            x[(i, i)] = one;
        }
        let z_old = std::mem::replace(&mut z, project_psd(&(&x + &u)));
        u += &x - &z;

        rp = frob(&(&x - &z));
        rd = to_f64(rho) * frob(&(&z - &z_old));
        let eps_p = sqrt_n * tol + tol * frob(&x).max(frob(&z));
        let eps_d = sqrt_n * tol + tol * to_f64(rho) * frob(&u);

        let residuals_ok = rp <= eps_p && rd <= eps_d;
        if residuals_ok || it % GAP_PERIOD == 0 {
            let sol = certify(&r, &c, &z, &u, rho, scale, it, rp, rd);
            if to_f64(sol.relative_gap()) <= tol {
                return Ok(sol);
            }
        }

        // residual balancing; adapting every iteration makes the iterates cycle
        let ten = 10.0;
        if it % BALANCE_PERIOD != 0 {
        } else if rp > ten * rd {
            rho = rho * lit(2.0);
            u = u * Cx::new(lit::<T>(0.5), T::zero());
        } else if rd > ten * rp {
            rho = rho * lit(0.5);
            u = u * Cx::new(lit::<T>(2.0), T::zero());
        }
    }
    Err(Error::SolverNonConvergence {
        iterations: opts.max_iterations,
        primal: rp,
        dual: rd,
    })
}

/// Largest `sum(y)` over `y + shift` with `C - Diag(y + shift) ⪰ 0`.
fn dual_value<T: Real>(c: &DMatrix<Cx<T>>, mut y: Vec<T>) -> T {
    let mut slack = c.clone();
    for (i, v) in y.iter().enumerate() {
        slack[(i, i)] -= Cx::new(*v, T::zero());
    }
    let lmin = min_eigenvalue(&slack);
    if lmin < T::zero() {
        for v in &mut y {
            *v += lmin;
        }
    }
    y.iter().fold(T::zero(), |a, &b| a + b)
}

/// Best feasible primal and certified bound from the current iterates.
///
/// Two candidates each: the rescaled PSD iterate and the rank-one matrix of
/// its unit-modulus principal direction; duals from the ADMM multiplier and
/// from the stationarity condition `(C - Diag(y)) v = 0` at that direction.
#[allow(clippy::too_many_arguments)]
fn certify<T: Real>(
    r: &DMatrix<Cx<T>>,
    c: &DMatrix<Cx<T>>,
    z: &DMatrix<Cx<T>>,
    u: &DMatrix<Cx<T>>,
    rho: T,
    scale: T,
    iterations: usize,
    rp: f64,
    rd: f64,
) -> SdpSolution<T> {
    let n = r.nrows();
    let x_full = unit_diagonal(z);
    let (_, e) = principal_eigenpair(&x_full);
    let v: Vec<Cx<T>> = e
        .iter()
        .map(|z| {
            let m = cabs(*z);
            if m > T::zero() { *z / m } else { Cx::new(T::one(), T::zero()) }
        })
        .collect();
    let full_obj = real_trace_product(r, &x_full);
    let rank1_obj = quadratic_value(r, &v);
    let (x, objective) = if rank1_obj >= full_obj {
        (DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()), rank1_obj)
    } else {
        (x_full, full_obj)
    };

    // dual of min tr(CX): max sum(y) s.t. C - Diag(y) ⪰ 0
    let from_multiplier: Vec<T> = (0..n).map(|i| c[(i, i)].re + rho * u[(i, i)].re).collect();
    let from_direction: Vec<T> = (0..n)
        .map(|i| {
            let mut cv = Cx::new(T::zero(), T::zero());
            for j in 0..n {
                cv += c[(i, j)] * v[j];
            }
            (v[i].conj() * cv).re
        })
        .collect();
    let dual = dual_value(c, from_multiplier).max(dual_value(c, from_direction));
    SdpSolution {
        x,
        objective,
        upper_bound: -dual * scale,
        iterations,
        primal_residual: rp,
        dual_residual: rd,
        scale,
    }
}

/// Rank-one extraction: scales the principal eigenvector by the square root
/// of its eigenvalue and references all phases to the last entry.
pub fn extract_phases<T: Real>(x: &DMatrix<Cx<T>>) -> Vec<Cx<T>> {
    let (l, e) = principal_eigenpair(x);
    let s = l.max(T::zero()).sqrt();
    let v: Vec<Cx<T>> = e.iter().map(|z| *z * Cx::new(s, T::zero())).collect();
    let last = *v.last().expect("non-empty");
    let n = v.len() - 1;
    (0..n)
        .map(|i| {
            let ratio = if last.norm_sqr() > T::zero() { v[i] / last } else { v[i] };
            cis(carg(ratio))
        })
        .collect()
}

/// `v^H R v`.
pub fn quadratic_value<T: Real>(r: &DMatrix<Cx<T>>, v: &[Cx<T>]) -> T {
    let mut acc = Cx::new(T::zero(), T::zero());
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i].conj() * r[(i, j)] * v[j];
        }
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream, Domain};

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Cx<f64>> {
        let mut rng = stream(seed, Domain::Custom(11), 0);
        let a = DMatrix::from_fn(n, n, |_, _| complex_normal::<f64, _>(&mut rng));
        hermitian_part(&a)
    }

    #[test]
    fn psd_projection_is_idempotent() {
        let m = random_hermitian(6, 1);
        let p = project_psd(&m);
        assert!(min_eigenvalue(&p) > -1e-12);
        assert!((project_psd(&p) - &p).camax() < 1e-12);
    }

    #[test]
    fn rank_one_objective_is_exact() {
        // R = v v^H with unit-modulus v: optimum is X = v v^H
        let n = 7;
        let v: Vec<Cx<f64>> = (0..n).map(|i| cis(0.7 * i as f64 * i as f64)).collect();
        let vv = DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
        let sol = solve(&vv, None, &SdpOptions::default()).unwrap();
        assert!((sol.objective - (n * n) as f64).abs() < 1e-4 * (n * n) as f64);
        assert!(sol.upper_bound >= sol.objective - 1e-9);
        let mut th = extract_phases(&sol.x);
        th.push(cis(0.0));
        let val = quadratic_value(&vv, &th);
        assert!((val - sol.objective).abs() < 1e-4 * val);
    }

    #[test]
    fn feasibility_and_bound_on_random_instances() {
        for seed in 0..5 {
            let r = random_hermitian(9, seed);
            let sol = solve(&r, None, &SdpOptions::default()).unwrap();
            for i in 0..9 {
                assert!((sol.x[(i, i)].re - 1.0).abs() < 1e-12);
            }
            assert!(min_eigenvalue(&sol.x) > -1e-8);
            assert!(sol.upper_bound >= sol.objective - 1e-9 * sol.objective.abs().max(1.0));
            assert!(sol.relative_gap() < 1e-4, "gap {}", sol.relative_gap());
            // any unit-modulus vector is a lower bound
            let ones = vec![cis(0.0); 9];
            assert!(quadratic_value(&r, &ones) <= sol.upper_bound + 1e-9);
        }
    }
}
