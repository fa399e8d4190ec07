//! Union-bound SER analysis.
//!
//! Pairwise error probabilities are averaged over fading by modelling the
//! decision distance as a quadratic form `a^T B a` of a Gaussian vector
//! `a = [H, H^, |g|]` and evaluating its moment generating function at the two
//! exponents of the exponential Q-function approximation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::MomentSet;
use crate::constellation::SurfaceMode;
use crate::error::{param, Error, Result};
use crate::scalar::{cis, from_usize, lit, to_f64, Real};
use crate::transceiver::{Hypothesis, SystemConfig};

/// `Q(x) ~ e^{-x^2/2}/12 + e^{-2x^2/3}/4`.
pub fn q_approx<T: Real>(x: T) -> T {
    let x2 = x * x;
    (-x2 / lit(2.0)).exp() / lit(12.0) + (-x2 * lit(2.0 / 3.0)).exp() / lit(4.0)
}

/// Determinant by cofactor expansion, dimension at most 3.
pub fn det_small<T: Real>(m: &DMatrix<T>) -> T {
    match m.nrows() {
        0 => T::one(),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        n => panic!("det_small on {n}x{n}"),
    }
}

/// Inverse by adjugate, dimension at most 3. `None` when the determinant
/// vanishes.
pub fn inverse_small<T: Real>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = m.nrows();
    let det = det_small(m);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let mut adj = DMatrix::zeros(n, n);
    match n {
        1 => adj[(0, 0)] = T::one(),
        2 => {
            adj[(0, 0)] = m[(1, 1)];
            adj[(0, 1)] = -m[(0, 1)];
            adj[(1, 0)] = -m[(1, 0)];
            adj[(1, 1)] = m[(0, 0)];
        }
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = rest(j);
                    let (c0, c1) = rest(i);
                    let minor = m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
                    adj[(i, j)] = if (i + j) % 2 == 0 { minor } else { -minor };
                }
            }
        }
        _ => panic!("inverse_small on {n}x{n}"),
    }
    Some(adj / det)
}

fn rest(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Mean, covariance and weight matrix of the Gaussian quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormStats<T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub b_real: DVector<T>,
    pub b_imag: DVector<T>,
    /// `b_r b_r^T + b_i b_i^T`.
    pub b_matrix: DMatrix<T>,
}

impl<T: Real> QuadraticFormStats<T> {
    fn new(mean: Vec<T>, cov: DMatrix<T>, b_real: Vec<T>, b_imag: Vec<T>) -> Self {
        let b_real = DVector::from_vec(b_real);
        let b_imag = DVector::from_vec(b_imag);
        let b_matrix = &b_real * b_real.transpose() + &b_imag * b_imag.transpose();
        Self {
            mean: DVector::from_vec(mean),
            cov,
            b_real,
            b_imag,
            b_matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Evaluates the quadratic form at a sample vector.
    pub fn form(&self, a: &DVector<T>) -> T {
        (a.transpose() * &self.b_matrix * a)[(0, 0)]
    }
}

fn weights<T: Real>(truth: &Hypothesis<T>, error: &Hypothesis<T>) -> Result<(Vec<T>, Vec<T>, bool)> {
    if truth.n_a == error.n_a && truth.psi == error.psi && truth.x == error.x {
        return Err(param("error", "identical to truth"));
    }
    let s = truth.x * cis(truth.psi);
    let e = error.x * cis(error.psi);
    let d = truth.x - error.x;
    if truth.n_a != error.n_a {
        Ok((vec![s.re, -e.re, d.re], vec![s.im, -e.im, d.im], true))
    } else {
        let v = s - e;
        Ok((vec![v.re, d.re], vec![v.im, d.im], false))
    }
}

fn sym3<T: Real>(s11: T, s12: T, s22: T, sg: T) -> DMatrix<T> {
    let z = T::zero();
    DMatrix::from_row_slice(3, 3, &[s11, s12, z, s12, s22, z, z, z, sg])
}

fn diag2<T: Real>(s11: T, sg: T) -> DMatrix<T> {
    DMatrix::from_row_slice(2, 2, &[s11, T::zero(), T::zero(), sg])
}

/// Statistics of `[H_{N_a}, H_{N^_a}, |g|]` for a passive surface.
pub fn build_stats_passive<T: Real>(
    truth: &Hypothesis<T>,
    error: &Hypothesis<T>,
    moments: &MomentSet<T>,
) -> Result<QuadraticFormStats<T>> {
    let (br, bi, distinct) = weights(truth, error)?;
    let na: T = from_usize(truth.n_a);
    let nb: T = from_usize(error.n_a);
    let (mu, s2) = (moments.mu, moments.sigma2);
    Ok(if distinct {
        let shared: T = from_usize(truth.n_a.min(error.n_a));
        QuadraticFormStats::new(
            vec![na * mu, nb * mu, moments.mu_g],
            sym3(na * s2, shared * s2, nb * s2, moments.sigma_g2),
            br,
            bi,
        )
    } else {
        QuadraticFormStats::new(
            vec![na * mu, moments.mu_g],
            diag2(na * s2, moments.sigma_g2),
            br,
            bi,
        )
    })
}

/// Statistics for an active surface with `n` elements and gain `xi`.
///
/// In [`SurfaceMode::ActiveOn`] the vector is
/// `[xi H_{N_a} + H_{N_p}, xi H_{N^_a} + H_{N^_p}, |g|]`; in
/// [`SurfaceMode::ActiveOff`] the passive elements are OFF and the entries
/// are `xi H_{N_a}`.
pub fn build_stats_active<T: Real>(
    truth: &Hypothesis<T>,
    error: &Hypothesis<T>,
    moments: &MomentSet<T>,
    xi: T,
    n: usize,
    mode: SurfaceMode,
) -> Result<QuadraticFormStats<T>> {
    if truth.n_a > n || error.n_a > n {
        return Err(param("n", "fewer elements than N_a"));
    }
    let (br, bi, distinct) = weights(truth, error)?;
    let na: T = from_usize(truth.n_a);
    let nb: T = from_usize(error.n_a);
    let nn: T = from_usize(n);
    let (mu, s2) = (moments.mu, moments.sigma2);
    let one = T::one();
    let (mean_of, var_of): (Box<dyn Fn(T) -> T>, Box<dyn Fn(T) -> T>) = match mode {
        SurfaceMode::ActiveOn => (
            Box::new(move |k: T| ((xi - one) * k + nn) * mu),
            Box::new(move |k: T| ((xi * xi - one) * k + nn) * s2),
        ),
        SurfaceMode::ActiveOff => (
            Box::new(move |k: T| xi * k * mu),
            Box::new(move |k: T| xi * xi * k * s2),
        ),
        SurfaceMode::Passive => return Err(Error::Mode("active statistics in passive mode".into())),
    };
    Ok(if distinct {
        let (lo, hi) = if truth.n_a < error.n_a { (na, nb) } else { (nb, na) };
        let s12 = match mode {
            SurfaceMode::ActiveOn => (lo * xi * xi + (hi - lo) * xi + nn - hi) * s2,
            _ => xi * xi * lo * s2,
        };
        QuadraticFormStats::new(
            vec![mean_of(na), mean_of(nb), moments.mu_g],
            sym3(var_of(na), s12, var_of(nb), moments.sigma_g2),
            br,
            bi,
        )
    } else {
        QuadraticFormStats::new(
            vec![mean_of(na), moments.mu_g],
            diag2(var_of(na), moments.sigma_g2),
            br,
            bi,
        )
    })
}

/// MGF of `a^T B a` at `t <= 0`.
///
/// Evaluated as `det(K)^{-1/2} exp(t a^T K^{-1} B a)` with `K = I - 2tB A`,
/// which equals the textbook form with `A^{-1}` but stays accurate when
/// `2tBA` is small.
pub fn mgf<T: Real>(stats: &QuadraticFormStats<T>, t: T) -> Result<T> {
    if !(t <= T::zero()) {
        return Err(param("t", "must be <= 0"));
    }
    let n = stats.dim();
    let diag_scale = (0..n).fold(T::one(), |acc, i| acc * stats.cov[(i, i)].abs());
    let cdet = det_small(&stats.cov);
    if !(cdet > diag_scale * lit(1e-12)) || diag_scale == T::zero() {
        return Err(Error::Singular("covariance of the quadratic form"));
    }
    let two_t = t + t;
    let k = DMatrix::identity(n, n) - &stats.b_matrix * &stats.cov * two_t;
    let kdet = det_small(&k);
    let kinv = inverse_small(&k).ok_or(Error::Singular("I - 2tBA"))?;
    if !(kdet > T::zero()) {
        return Err(Error::Singular("I - 2tBA"));
    }
    let expo = t * (stats.mean.transpose() * kinv * &stats.b_matrix * &stats.mean)[(0, 0)];
    Ok(kdet.sqrt().recip() * expo.exp())
}

/// The literal `det(K)^{-1/2} exp(-1/2 a^T [I - K^{-1}] A^{-1} a)`; kept to
/// cross-check [`mgf`].
pub fn mgf_textbook<T: Real>(stats: &QuadraticFormStats<T>, t: T) -> Result<T> {
    let n = stats.dim();
    let ainv = inverse_small(&stats.cov).ok_or(Error::Singular("covariance"))?;
    let eye = DMatrix::identity(n, n);
    let k = &eye - &stats.b_matrix * &stats.cov * (t + t);
    let kinv = inverse_small(&k).ok_or(Error::Singular("I - 2tBA"))?;
    let q = (stats.mean.transpose() * (eye - kinv) * ainv * &stats.mean)[(0, 0)];
    Ok(det_small(&k).sqrt().recip() * (-q / lit(2.0)).exp())
}

/// Fading-averaged pairwise error probability.
pub fn unconditional_pep<T: Real>(
    truth: &Hypothesis<T>,
    error: &Hypothesis<T>,
    config: &SystemConfig<T>,
    moments: &MomentSet<T>,
) -> Result<T> {
    let stats = match config.mode {
        SurfaceMode::Passive => build_stats_passive(truth, error, moments)?,
        mode => build_stats_active(truth, error, moments, config.xi, config.n_elements(), mode)?,
    };
    let noise = config.effective_noise(moments, truth.n_a);
    if noise == T::zero() {
        return Ok(T::zero());
    }
    let t1 = -config.p_t / (noise * lit(4.0));
    let t2 = -config.p_t / (noise * lit(3.0));
    Ok(mgf(&stats, t1)? / lit(12.0) + mgf(&stats, t2)? / lit(4.0))
}

/// PEPs for every ordered pair of hypotheses; the diagonal is NaN.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PepTable {
    pub size: usize,
    /// Row-major, `values[truth * size + error]`.
    pub values: Vec<f64>,
}

impl PepTable {
    pub fn build<T: Real>(config: &SystemConfig<T>, moments: &MomentSet<T>) -> Result<Self> {
        let hyps: Vec<Hypothesis<T>> = config.hypotheses().collect();
        let size = hyps.len();
        let rows: Vec<Vec<f64>> = hyps
            .par_iter()
            .map(|t| {
                hyps.iter()
                    .map(|e| {
                        if e.label == t.label {
                            Ok(f64::NAN)
                        } else {
                            unconditional_pep(t, e, config, moments).map(to_f64)
                        }
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            size,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn get(&self, truth: usize, error: usize) -> f64 {
        self.values[truth * self.size + error]
    }
}

/// Union bounds on the three symbol error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerBounds {
    /// Active symbol `x` wrong.
    pub active: f64,
    /// Backscatter pair `(N_a, psi)` wrong.
    pub backscatter: f64,
    /// Anything wrong.
    pub overall: f64,
}

impl SerBounds {
    pub fn clamped(&self) -> Self {
        Self {
            active: self.active.min(1.0),
            backscatter: self.backscatter.min(1.0),
            overall: self.overall.min(1.0),
        }
    }
}

pub fn bounds_from_table<T: Real>(config: &SystemConfig<T>, table: &PepTable) -> SerBounds {
    let hyps: Vec<Hypothesis<T>> = config.hypotheses().collect();
    let mut out = SerBounds {
        active: 0.0,
        backscatter: 0.0,
        overall: 0.0,
    };
    for t in &hyps {
        for e in &hyps {
            if t.label == e.label {
                continue;
            }
            let p = table.get(t.label, e.label);
            if t.x != e.x {
                out.active += p;
            }
            if t.n_a != e.n_a || t.psi != e.psi {
                out.backscatter += p;
            }
            out.overall += p;
        }
    }
    let m = hyps.len() as f64;
    out.active /= m;
    out.backscatter /= m;
    out.overall /= m;
    out
}

/// Raw (unclamped) union bounds.
pub fn ser_bounds<T: Real>(config: &SystemConfig<T>, moments: &MomentSet<T>) -> Result<SerBounds> {
    let table = PepTable::build(config, moments)?;
    Ok(bounds_from_table(config, &table))
}
