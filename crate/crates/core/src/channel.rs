//! Rician links with distance-based path loss, and the envelope moments
//! used by the analytical error bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::{cabs, from_usize, lit, to_f64, Cx, Real};

/// Terms allowed in the confluent hypergeometric series before giving up.
pub const HYP1F1_MAX_TERMS: usize = 500;
const HYP1F1_TOL: f64 = 1e-12;

/// Large-scale geometry and fading parameters shared by all links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChannelParams<T> {
    /// Rician K-factor (linear). `inf` gives pure line of sight.
    pub rician_k: T,
    /// Path-loss factor at 1 m (linear power ratio).
    pub ref_loss: T,
    /// Distances A-Tx to RIS, RIS to C-Rx, A-Tx to C-Rx, in meters.
    pub distances: [T; 3],
    /// Path-loss exponents of the same three links.
    pub exponents: [T; 3],
    /// Number of surface elements `N`.
    pub n_elements: usize,
}

impl<T: Real> Default for ChannelParams<T> {
    fn default() -> Self {
        Self {
            rician_k: lit(8.0),
            ref_loss: lit(1e-3),
            distances: [lit(5.0), lit(50.0), lit(54.0)],
            exponents: [lit(2.0), lit(2.2), lit(3.5)],
            n_elements: 128,
        }
    }
}

impl<T: Real> ChannelParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rician_k >= T::zero()) {
            return Err(param("rician_k", "must be >= 0"));
        }
        if !(self.ref_loss > T::zero() && self.ref_loss.is_finite()) {
            return Err(param("ref_loss", "must be positive and finite"));
        }
        if self.distances.iter().any(|&d| !(d > T::zero() && d.is_finite())) {
            return Err(param("distances", "must be positive and finite"));
        }
        if self.exponents.iter().any(|&v| !v.is_finite()) {
            return Err(param("exponents", "must be finite"));
        }
        if self.n_elements == 0 {
            return Err(param("n_elements", "must be at least 1"));
        }
        Ok(())
    }

    /// `[rho_1, rho_2, rho_3]`, the linear path gains of the three links.
    pub fn path_gains(&self) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (o, (&d, &v)) in out.iter_mut().zip(self.distances.iter().zip(&self.exponents)) {
            *o = self.ref_loss * d.powf(-v);
        }
        out
    }

    /// Line-of-sight and scattered amplitude weights.
    fn rician_weights(&self) -> (T, T) {
        if self.rician_k.is_finite() {
            let k1 = self.rician_k + T::one();
            ((self.rician_k / k1).sqrt(), (T::one() / k1).sqrt())
        } else {
            (T::one(), T::zero())
        }
    }
}

/// One Rician coefficient with mean power `rho`.
pub fn rician_coefficient<T: Real, R: Rng + ?Sized>(
    rho: T,
    los: T,
    scatter: T,
    rng: &mut R,
) -> Cx<T> {
    let z = complex_normal::<T, _>(rng);
    (Cx::new(los, T::zero()) + z * scatter) * rho.sqrt()
}

/// Sampled links for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    /// A-Tx to element `i`.
    pub h: Vec<Cx<T>>,
    /// Element `i` to C-Rx.
    pub f: Vec<Cx<T>>,
    /// Direct link.
    pub g: Cx<T>,
    /// `|f_i| |h_i|`, in element order.
    pub cascade: Vec<T>,
    prefix: Vec<T>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn from_links(h: Vec<Cx<T>>, f: Vec<Cx<T>>, g: Cx<T>) -> Result<Self> {
        if h.len() != f.len() || h.is_empty() {
            return Err(Error::Dimension(format!(
                "h has {} entries, f has {}",
                h.len(),
                f.len()
            )));
        }
        if h.iter().chain(&f).chain(std::iter::once(&g)).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(param("channel", "non-finite coefficient"));
        }
        let cascade: Vec<T> = h.iter().zip(&f).map(|(&a, &b)| cabs(a) * cabs(b)).collect();
        let mut prefix = Vec::with_capacity(cascade.len() + 1);
        let mut acc = T::zero();
        prefix.push(acc);
        for &c in &cascade {
            acc += c;
            prefix.push(acc);
        }
        Ok(Self {
            h,
            f,
            g,
            cascade,
            prefix,
        })
    }

    /// Draws `h`, `f`, `g` from the streams of `(seed, trial)`.
    pub fn sample(params: &ChannelParams<T>, seed: u64, trial: u64) -> Self {
        let mut rh = stream(seed, Domain::LinkH, trial);
        let mut rf = stream(seed, Domain::LinkF, trial);
        let mut rg = stream(seed, Domain::LinkG, trial);
        Self::sample_with(params, &mut rh, &mut rf, &mut rg)
    }

    pub fn sample_with<R: Rng + ?Sized>(
        params: &ChannelParams<T>,
        rng_h: &mut R,
        rng_f: &mut R,
        rng_g: &mut R,
    ) -> Self {
        let [rho1, rho2, rho3] = params.path_gains();
        let (los, sc) = params.rician_weights();
        let n = params.n_elements;
        let h = (0..n).map(|_| rician_coefficient(rho1, los, sc, rng_h)).collect();
        let f = (0..n).map(|_| rician_coefficient(rho2, los, sc, rng_f)).collect();
        let g = rician_coefficient(rho3, los, sc, rng_g);
        Self::from_links(h, f, g).expect("sampled links are finite")
    }

    pub fn n_elements(&self) -> usize {
        self.cascade.len()
    }

    /// `H_{n} = sum of the first n cascade gains`.
    pub fn partial_sum(&self, n: usize) -> T {
        self.prefix[n]
    }

    /// Sum of cascade gains over elements `from..to`.
    pub fn range_sum(&self, from: usize, to: usize) -> T {
        self.prefix[to] - self.prefix[from]
    }
}

/// `1F1(a; b; z)` by forward power series.
pub fn hyp1f1<T: Real>(a: T, b: T, z: T) -> Result<T> {
    let tol: T = lit(HYP1F1_TOL);
    let mut term = T::one();
    let mut sum = T::one();
    for n in 0..HYP1F1_MAX_TERMS {
        let nn: T = from_usize(n);
        term *= (a + nn) / (b + nn) * z / (nn + T::one());
        sum += term;
        if term.abs() <= tol * sum.abs() && nn >= z.abs() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDivergence {
        terms: HYP1F1_MAX_TERMS,
    })
}

/// Above this the power series needs too many terms; switch to the
/// asymptotic expansion, which is then accurate to machine precision.
const LARGE_Z: f64 = 40.0;

/// `sum_s ((-h)_s)^2 / s! z^-s`, i.e. `E{|X|^k} / a^k` for large `z`
/// (terminates for even `k`).
fn large_z_series<T: Real>(h: T, z: T) -> T {
    let tol: T = lit(HYP1F1_TOL);
    let mut term = T::one();
    let mut sum = T::one();
    for s in 0..HYP1F1_MAX_TERMS {
        let ss: T = from_usize(s);
        let next = term * (ss - h) * (ss - h) / ((ss + T::one()) * z);
        if next.abs() > term.abs() || next.abs() <= tol * sum.abs() {
            sum += next;
            break;
        }
        term = next;
        sum += term;
    }
    sum
}

/// `E{|X|^k}` for a Rician envelope with line-of-sight amplitude `a` and
/// per-dimension scatter variance `b`.
pub fn rician_abs_moment<T: Real>(a: T, b: T, k: u32) -> Result<T> {
    if !(b > T::zero()) {
        return Err(param("b", "must be positive"));
    }
    let gamma = match k {
        1 => T::pi().sqrt() / lit(2.0),
        2 => T::one(),
        _ => return Err(param("k", format!("moment order {k} not in {{1, 2}}"))),
    };
    let half_k: T = lit(k as f64 / 2.0);
    let z = a * a / (b + b);
    if z > lit(LARGE_Z) {
        return Ok(a.powf(lit(k as f64)) * large_z_series(half_k, z));
    }
    let two_b = b + b;
    Ok(two_b.powf(half_k) * (-z).exp() * gamma * hyp1f1(T::one() + half_k, T::one(), z)?)
}

/// Envelope moments of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LinkMoments<T> {
    /// Line-of-sight amplitude.
    pub a: T,
    /// Scatter variance per real dimension.
    pub b: T,
    /// `E{|.|}`.
    pub m1: T,
    /// `E{|.|^2}`.
    pub m2: T,
}

impl<T: Real> LinkMoments<T> {
    fn new(rho: T, k: T) -> Result<Self> {
        if !k.is_finite() {
            return Ok(Self {
                a: rho.sqrt(),
                b: T::zero(),
                m1: rho.sqrt(),
                m2: rho,
            });
        }
        let a = (rho * k / (T::one() + k)).sqrt();
        let b = rho / (lit::<T>(2.0) + k + k);
        Ok(Self {
            a,
            b,
            m1: rician_abs_moment(a, b, 1)?,
            m2: rician_abs_moment(a, b, 2)?,
        })
    }

    pub fn variance(&self) -> T {
        self.m2 - self.m1 * self.m1
    }
}

/// First and second order statistics of the cascade gains and direct link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MomentSet<T> {
    /// Mean of one cascade gain `|f_i||h_i|`.
    pub mu: T,
    /// Variance of one cascade gain.
    pub sigma2: T,
    /// Mean of `|g|`.
    pub mu_g: T,
    /// Variance of `|g|`.
    pub sigma_g2: T,
    pub h: LinkMoments<T>,
    pub f: LinkMoments<T>,
    pub g: LinkMoments<T>,
}

impl<T: Real> MomentSet<T> {
    pub fn from_params(params: &ChannelParams<T>) -> Result<Self> {
        params.validate()?;
        let [rho1, rho2, rho3] = params.path_gains();
        let k = params.rician_k;
        let h = LinkMoments::new(rho1, k)?;
        let f = LinkMoments::new(rho2, k)?;
        let g = LinkMoments::new(rho3, k)?;
        let mu = h.m1 * f.m1;
        Ok(Self {
            mu,
            sigma2: h.m2 * f.m2 - mu * mu,
            mu_g: g.m1,
            sigma_g2: (g.m2 - g.m1 * g.m1).max(T::zero()),
            h,
            f,
            g,
        })
    }

    pub fn to_f64(&self) -> MomentSet<f64> {
        let link = |l: &LinkMoments<T>| LinkMoments {
            a: to_f64(l.a),
            b: to_f64(l.b),
            m1: to_f64(l.m1),
            m2: to_f64(l.m2),
        };
        MomentSet {
            mu: to_f64(self.mu),
            sigma2: to_f64(self.sigma2),
            mu_g: to_f64(self.mu_g),
            sigma_g2: to_f64(self.sigma_g2),
            h: link(&self.h),
            f: link(&self.f),
            g: link(&self.g),
        }
    }
}
