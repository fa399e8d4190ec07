//! Multi-antenna transmitter: joint transmit beamforming and surface phase
//! design by alternating optimization, for a passive surface.
//!
//! The received sample is `y = sqrt(Pt) (e^{j psi} beta^T Theta Hb + g^T) p x + w`
//! with `Hb = diag(f) H`. Averaging the received power over the backscatter
//! symbols gives `p^H V p`, which is maximized alternately over `p`
//! (principal eigenvector) and over `theta` (semidefinite relaxation).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{rician_coefficient, ChannelParams};
use crate::constellation::{BitMap, SurfaceMode};
use crate::error::{param, Error, Result};
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::{cabs, carg, cis, from_usize, to_f64, Cx, Real};
use crate::sdp::{self, SdpOptions};
use crate::transceiver::{DetectorBank, Hypothesis, ReceivedSample, SystemConfig};

/// Links of a multi-antenna transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoChannel<T: Real> {
    /// A-Tx to surface, `N x N_t`.
    pub h: DMatrix<Cx<T>>,
    /// Surface to C-Rx.
    pub f: Vec<Cx<T>>,
    /// A-Tx to C-Rx, one entry per antenna.
    pub g: Vec<Cx<T>>,
}

impl<T: Real> MisoChannel<T> {
    pub fn from_parts(h: DMatrix<Cx<T>>, f: Vec<Cx<T>>, g: Vec<Cx<T>>) -> Result<Self> {
        if h.nrows() != f.len() || h.ncols() != g.len() || f.is_empty() || g.is_empty() {
            return Err(Error::Dimension(format!(
                "H is {}x{}, f has {}, g has {}",
                h.nrows(),
                h.ncols(),
                f.len(),
                g.len()
            )));
        }
        if h.iter().chain(&f).chain(&g).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(param("channel", "non-finite coefficient"));
        }
        Ok(Self { h, f, g })
    }

    /// Every entry is drawn from the single-antenna Rician model of its link.
    /// `H` is drawn column by column, so antenna 0 sees exactly the
    /// single-antenna realization of the same `(seed, trial)`.
    pub fn sample(params: &ChannelParams<T>, n_t: usize, seed: u64, trial: u64) -> Result<Self> {
        params.validate()?;
        if n_t == 0 {
            return Err(param("n_t", "must be at least 1"));
        }
        let [rho1, rho2, rho3] = params.path_gains();
        let (los, sc) = if params.rician_k.is_finite() {
            let k1 = params.rician_k + T::one();
            ((params.rician_k / k1).sqrt(), k1.recip().sqrt())
        } else {
            (T::one(), T::zero())
        };
        let n = params.n_elements;
        let mut rh = stream(seed, Domain::LinkH, trial);
        let mut rf = stream(seed, Domain::LinkF, trial);
        let mut rg = stream(seed, Domain::LinkG, trial);
        let cols: Vec<Cx<T>> = (0..n * n_t)
            .map(|_| rician_coefficient(rho1, los, sc, &mut rh))
            .collect();
        let h = DMatrix::from_column_slice(n, n_t, &cols);
        let f = (0..n).map(|_| rician_coefficient(rho2, los, sc, &mut rf)).collect();
        let g = (0..n_t).map(|_| rician_coefficient(rho3, los, sc, &mut rg)).collect();
        Self::from_parts(h, f, g)
    }

    pub fn n_elements(&self) -> usize {
        self.f.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.g.len()
    }

    /// `diag(f) H`.
    pub fn h_bar(&self) -> DMatrix<Cx<T>> {
        DMatrix::from_fn(self.h.nrows(), self.h.ncols(), |i, j| self.f[i] * self.h[(i, j)])
    }

    /// `Hb p`, the per-element cascade seen through the beamformer.
    pub fn cascade(&self, p: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        self.check_beam(p)?;
        let pv = DVector::from_column_slice(p);
        Ok((self.h_bar() * pv).iter().copied().collect())
    }

    /// `g^T p`.
    pub fn direct(&self, p: &[Cx<T>]) -> Cx<T> {
        self.g.iter().zip(p).fold(Cx::new(T::zero(), T::zero()), |a, (g, p)| a + g * p)
    }

    fn check_beam(&self, p: &[Cx<T>]) -> Result<()> {
        if p.len() != self.n_antennas() {
            return Err(Error::Dimension(format!("p has {}, N_t = {}", p.len(), self.n_antennas())));
        }
        Ok(())
    }

    fn check_phases(&self, theta: &[Cx<T>]) -> Result<()> {
        if theta.len() != self.n_elements() {
            return Err(Error::Dimension(format!("theta has {}, N = {}", theta.len(), self.n_elements())));
        }
        Ok(())
    }
}

/// Backscatter-symbol averages of the ON/OFF pattern `beta` and phase `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackscatterStats<T: Real> {
    /// `E{beta e^{-j psi}}`.
    pub u_bar: DVector<Cx<T>>,
    /// `E{beta beta^T}`.
    pub u: DMatrix<T>,
    /// `E{beta e^{j psi}}`, the detector anchor.
    pub q_bar: DVector<Cx<T>>,
}

impl<T: Real> BackscatterStats<T> {
    pub fn n_elements(&self) -> usize {
        self.u.nrows()
    }

    /// `[[U, u], [u^H, 1]]`.
    pub fn weight(&self) -> DMatrix<Cx<T>> {
        let n = self.n_elements();
        DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => Cx::new(self.u[(i, j)], T::zero()),
            (true, false) => self.u_bar[i],
            (false, true) => self.u_bar[j].conj(),
            (false, false) => Cx::new(T::one(), T::zero()),
        })
    }
}

/// Exact averages over the `P` backscatter symbols; element `i` is ON for a
/// symbol with `N_a > i`.
pub fn backscatter_stats<T: Real>(bit_map: &BitMap<T>) -> BackscatterStats<T> {
    let n = bit_map.alphabet().n_elements;
    let symbols: Vec<(usize, T)> = bit_map.backscatter_symbols().collect();
    let p: T = from_usize(symbols.len());
    let mut u_bar = DVector::from_element(n, Cx::new(T::zero(), T::zero()));
    let mut u = DMatrix::zeros(n, n);
    for &(n_a, psi) in &symbols {
        let rot = cis(-psi);
        for i in 0..n_a {
            u_bar[i] += rot;
            for j in 0..n_a {
                u[(i, j)] += T::one();
            }
        }
    }
    u /= p;
    let inv = Cx::new(p.recip(), T::zero());
    u_bar *= inv;
    let q_bar = u_bar.map(|z| z.conj());
    BackscatterStats { u_bar, u, q_bar }
}

/// `V = S^H W S` with `S = [Theta Hb; g^T]`.
pub fn v_matrix<T: Real>(
    channel: &MisoChannel<T>,
    stats: &BackscatterStats<T>,
    theta: &[Cx<T>],
) -> Result<DMatrix<Cx<T>>> {
    channel.check_phases(theta)?;
    if stats.n_elements() != channel.n_elements() {
        return Err(Error::Dimension("statistics and channel disagree on N".into()));
    }
    let n = channel.n_elements();
    let hb = channel.h_bar();
    let s = DMatrix::from_fn(n + 1, channel.n_antennas(), |i, j| {
        if i < n {
            theta[i] * hb[(i, j)]
        } else {
            channel.g[j]
        }
    });
    Ok(s.adjoint() * stats.weight() * s)
}

/// Average received power `p^H V p` (per unit transmit power).
pub fn average_power<T: Real>(
    channel: &MisoChannel<T>,
    stats: &BackscatterStats<T>,
    p: &[Cx<T>],
    theta: &[Cx<T>],
) -> Result<T> {
    channel.check_beam(p)?;
    let v = v_matrix(channel, stats, theta)?;
    Ok(sdp::quadratic_value(&v, p))
}

/// Transmit beam maximizing the average received power for fixed `theta`.
pub fn active_beamforming<T: Real>(
    theta: &[Cx<T>],
    channel: &MisoChannel<T>,
    stats: &BackscatterStats<T>,
) -> Result<Vec<Cx<T>>> {
    let v = v_matrix(channel, stats, theta)?;
    let (_, e) = sdp::principal_eigenpair(&v);
    let norm = e.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
    Ok(e.iter().map(|z| *z / norm).collect())
}

/// `R = [[G^H U G, gt G^H u], [gt^* u^H G, 0]]` with `G = diag(Hb p)`,
/// `gt = g^T p`.
pub fn r_matrix<T: Real>(
    channel: &MisoChannel<T>,
    stats: &BackscatterStats<T>,
    p: &[Cx<T>],
) -> Result<DMatrix<Cx<T>>> {
    let gd = channel.cascade(p)?;
    let gt = channel.direct(p);
    let n = channel.n_elements();
    Ok(DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => gd[i].conj() * gd[j] * stats.u[(i, j)],
        (true, false) => gt * gd[i].conj() * stats.u_bar[i],
        (false, true) => gt.conj() * stats.u_bar[j].conj() * gd[j],
        (false, false) => Cx::new(T::zero(), T::zero()),
    }))
}

/// The `theta`-dependent part of the average power,
/// `theta^H G^H U G theta + 2 Re(gt theta^H G^H u)`.
pub fn phase_objective<T: Real>(r: &DMatrix<Cx<T>>, theta: &[Cx<T>]) -> T {
    let mut v = theta.to_vec();
    v.push(Cx::new(T::one(), T::zero()));
    sdp::quadratic_value(r, &v)
}

/// Solver diagnostics for one phase step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStep {
    pub sdp_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// SDP optimum `tr(R X)`.
    pub relaxed: f64,
    /// Upper bound certified by the dual.
    pub upper_bound: f64,
    /// Phase objective of the extracted unit-modulus vector.
    pub extracted: f64,
}

/// Phases from the relaxed problem for a fixed beam `p`. `warm` is the
/// previous phase vector.
pub fn passive_beamforming_sdr<T: Real>(
    p: &[Cx<T>],
    warm: &[Cx<T>],
    channel: &MisoChannel<T>,
    stats: &BackscatterStats<T>,
    opts: &SdpOptions,
) -> Result<(Vec<Cx<T>>, PhaseStep)> {
    channel.check_phases(warm)?;
    let r = r_matrix(channel, stats, p)?;
    let mut v = warm.to_vec();
    v.push(Cx::new(T::one(), T::zero()));
    let n = v.len();
    let seed = DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
    let sol = sdp::solve(&r, Some(&seed), opts)?;
    let theta = sdp::extract_phases(&sol.x);
    let step = PhaseStep {
        sdp_iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        relaxed: to_f64(sol.objective),
        upper_bound: to_f64(sol.upper_bound),
        extracted: to_f64(phase_objective(&r, &theta)),
    };
    Ok((theta, step))
}

/// Phases that co-phase every cascade path with the direct link for beam `p`.
pub fn aligned_phases<T: Real>(channel: &MisoChannel<T>, p: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
    let gd = channel.cascade(p)?;
    let phi = carg(channel.direct(p));
    Ok(gd.iter().map(|c| cis(phi - carg(*c))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoOptions {
    /// Stop once the beam-step objective moves by less than this.
    pub epsilon: f64,
    /// Maximum number of (beam, phase) rounds.
    pub max_iterations: usize,
    pub sdp: SdpOptions,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iterations: 4,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingState<T: Real> {
    pub p: Vec<Cx<T>>,
    pub theta: Vec<Cx<T>>,
    /// `p^H V p` at `(p, theta)`.
    pub objective: T,
    /// Rounds completed.
    pub iteration: usize,
}

/// One alternating-optimization round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoRound {
    pub iteration: usize,
    /// Average power after the beam step.
    pub after_beam: f64,
    /// Average power after the phase step.
    pub after_phase: f64,
    pub phase: PhaseStep,
}

#[derive(Debug, Clone)]
pub struct AoOutcome<T: Real> {
    pub state: BeamformingState<T>,
    pub trajectory: Vec<AoRound>,
    pub converged: bool,
}

/// Alternates the eigenvector beam step and the relaxed phase step starting
/// from all-ones phases.
pub fn alternating_optimize<T: Real>(
    channel: &MisoChannel<T>,
    stats: &BackscatterStats<T>,
    opts: &AoOptions,
) -> Result<AoOutcome<T>> {
    if !(opts.epsilon > 0.0) {
        return Err(param("epsilon", "must be positive"));
    }
    if opts.max_iterations == 0 {
        return Err(param("max_iterations", "must be at least 1"));
    }
    let mut theta = vec![Cx::new(T::one(), T::zero()); channel.n_elements()];
    let mut p = vec![Cx::new(T::zero(), T::zero()); channel.n_antennas()];
    let mut trajectory = Vec::new();
    let mut previous: Option<f64> = None;
    let mut converged = false;
    for k in 1..=opts.max_iterations {
        p = active_beamforming(&theta, channel, stats)?;
        let after_beam = to_f64(average_power(channel, stats, &p, &theta)?);
        let (next, phase) = passive_beamforming_sdr(&p, &theta, channel, stats, &opts.sdp)?;
        theta = next;
        let after_phase = to_f64(average_power(channel, stats, &p, &theta)?);
        trajectory.push(AoRound {
            iteration: k,
            after_beam,
            after_phase,
            phase,
        });
        if let Some(prev) = previous {
            if (after_beam - prev).abs() < opts.epsilon {
                converged = true;
                break;
            }
        }
        previous = Some(after_beam);
    }
    let objective = average_power(channel, stats, &p, &theta)?;
    let iteration = trajectory.len();
    Ok(AoOutcome {
        state: BeamformingState {
            p,
            theta,
            objective,
            iteration,
        },
        trajectory,
        converged,
    })
}

fn check_beamformer<T: Real>(channel: &MisoChannel<T>, p: &[Cx<T>], theta: &[Cx<T>]) -> Result<()> {
    channel.check_beam(p)?;
    channel.check_phases(theta)?;
    let pn = p.iter().map(|z| to_f64(z.norm_sqr())).sum::<f64>();
    if pn > 1.0 + 1e-12 {
        return Err(param("p", format!("|p|^2 = {pn} exceeds 1")));
    }
    if theta.iter().any(|z| (to_f64(cabs(*z)) - 1.0).abs() > 1e-9) {
        return Err(param("theta", "entries must have unit modulus"));
    }
    Ok(())
}

/// Precomputed effective links for a fixed beamformer.
#[derive(Debug, Clone)]
pub struct MisoLink<T: Real> {
    /// `sum_{i < k} (Theta Hb p)_i` for `k = 0..=N`.
    prefix: Vec<Cx<T>>,
    /// `q_bar^T Theta Hb p`.
    anchor: Cx<T>,
    direct: Cx<T>,
}

impl<T: Real> MisoLink<T> {
    pub fn new(
        channel: &MisoChannel<T>,
        stats: &BackscatterStats<T>,
        p: &[Cx<T>],
        theta: &[Cx<T>],
    ) -> Result<Self> {
        check_beamformer(channel, p, theta)?;
        let c = channel.cascade(p)?;
        let mut prefix = Vec::with_capacity(c.len() + 1);
        let mut acc = Cx::new(T::zero(), T::zero());
        prefix.push(acc);
        let mut anchor = acc;
        for (i, (ci, th)) in c.iter().zip(theta).enumerate() {
            let v = *ci * th;
            acc += v;
            anchor += stats.q_bar[i] * v;
            prefix.push(acc);
        }
        Ok(Self {
            prefix,
            anchor,
            direct: channel.direct(p),
        })
    }

    /// Noiseless sample for a hypothesis.
    pub fn noiseless(&self, config: &SystemConfig<T>, h: &Hypothesis<T>) -> Cx<T> {
        (cis(h.psi) * self.prefix[h.n_a] + self.direct) * h.x * config.p_t.sqrt()
    }

    /// Detector over all `A * P` hypotheses; anchors use `q_bar`.
    pub fn detector(&self, config: &SystemConfig<T>) -> DetectorBank<T> {
        let models = config.hypotheses().map(|h| self.noiseless(config, &h)).collect();
        let base = (self.anchor + self.direct) * config.p_t.sqrt();
        let anchors = config.bit_map.active_symbols().map(|x| base * x).collect();
        DetectorBank::from_parts(models, anchors, config.bit_map.backscatter_order())
    }

    pub fn transmit<R: Rng + ?Sized>(
        &self,
        config: &SystemConfig<T>,
        truth: &Hypothesis<T>,
        rng: &mut R,
    ) -> Result<ReceivedSample<T>> {
        if config.mode != SurfaceMode::Passive {
            return Err(Error::Mode(format!("multi-antenna link in {} mode", config.mode)));
        }
        config.check_label(truth)?;
        if truth.n_a >= self.prefix.len() {
            return Err(Error::Dimension(format!("N_a = {} exceeds N", truth.n_a)));
        }
        let w = complex_normal::<T, _>(rng) * config.n0.sqrt();
        Ok(ReceivedSample {
            y: self.noiseless(config, truth) + w,
            truth: *truth,
        })
    }
}

/// One received sample with beam `p` and phases `theta`.
pub fn miso_received_signal<T: Real, R: Rng + ?Sized>(
    channel: &MisoChannel<T>,
    p: &[Cx<T>],
    theta: &[Cx<T>],
    hypothesis: &Hypothesis<T>,
    config: &SystemConfig<T>,
    rng: &mut R,
) -> Result<ReceivedSample<T>> {
    let stats = backscatter_stats(&config.bit_map);
    MisoLink::new(channel, &stats, p, theta)?.transmit(config, hypothesis, rng)
}

/// Serializable beamforming result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamformingReport {
    /// `(re, im)` per antenna.
    pub p: Vec<(f64, f64)>,
    /// Phase of each element in radians.
    pub theta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<AoRound>,
}

impl BeamformingReport {
    pub fn new<T: Real>(outcome: &AoOutcome<T>) -> Self {
        Self {
            p: outcome.state.p.iter().map(|z| (to_f64(z.re), to_f64(z.im))).collect(),
            theta: outcome.state.theta.iter().map(|z| to_f64(carg(*z))).collect(),
            objective: to_f64(outcome.state.objective),
            iterations: outcome.state.iteration,
            converged: outcome.converged,
            trajectory: outcome.trajectory.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::constellation::{ApskConstellation, RingSchedule};

    fn config(n: usize) -> SystemConfig<f64> {
        let c = ApskConstellation::optimize(RingSchedule::parse("4+12", 4).unwrap(), 0.01).unwrap();
        let ch = ChannelParams {
            n_elements: n,
            ..ChannelParams::default()
        };
        SystemConfig::new(ch, c, SurfaceMode::Passive, 1.0, 1.0, 1e-11, 1e-11).unwrap()
    }

    #[test]
    fn table_pattern_statistics() {
        let cfg = config(128);
        let s = backscatter_stats(&cfg.bit_map);
        let n1 = cfg.bit_map.backscatter_symbols().map(|(n, _)| n).min().unwrap();
        assert_eq!(n1, 62);
        for i in 0..128 {
            let want = if i < n1 { 1.0 } else { 0.75 };
            assert!((s.u[(i, i)] - want).abs() < 1e-15);
            assert!((s.u_bar[i] - s.q_bar[i].conj()).norm() < 1e-15);
            for j in 0..128 {
                assert_eq!(s.u[(i, j)], s.u[(j, i)]);
                assert!((0.0..=1.0).contains(&s.u[(i, j)]));
            }
        }
        // always-ON elements carry the mean rotation over all symbols
        let mean: Cx<f64> = cfg.bit_map.backscatter_symbols().map(|(_, psi)| cis(-psi)).sum::<Cx<f64>>() / 4.0;
        assert!((s.u_bar[0] - mean).norm() < 1e-15);
    }

    #[test]
    fn single_antenna_sampling_matches_siso() {
        let params = ChannelParams::<f64> {
            n_elements: 16,
            ..ChannelParams::default()
        };
        let m = MisoChannel::sample(&params, 1, 5, 9).unwrap();
        let s = ChannelRealization::sample(&params, 5, 9);
        assert_eq!(m.h.column(0).iter().copied().collect::<Vec<_>>(), s.h);
        assert_eq!(m.f, s.f);
        assert_eq!(m.g[0], s.g);
        let m2 = MisoChannel::sample(&params, 2, 5, 9).unwrap();
        assert_eq!(m2.h.column(0), m.h.column(0));
    }

    #[test]
    fn single_antenna_reduces_to_siso_model() {
        let cfg = config(32);
        let m = MisoChannel::sample(&cfg.channel, 1, 2, 3).unwrap();
        let s = ChannelRealization::sample(&cfg.channel, 2, 3);
        let p = vec![Cx::new(1.0, 0.0)];
        let theta = aligned_phases(&m, &p).unwrap();
        let stats = backscatter_stats(&cfg.bit_map);
        let link = MisoLink::new(&m, &stats, &p, &theta).unwrap();
        let a = link.detector(&cfg);
        let b = DetectorBank::new(&cfg, &s);
        for (x, y) in a.models().iter().zip(b.models()) {
            assert!((x - y).norm() < 1e-12 * y.norm());
        }
    }

    #[test]
    fn beam_is_principal_eigenvector() {
        let cfg = config(16);
        let stats = backscatter_stats(&cfg.bit_map);
        for nt in 1..=4 {
            let m = MisoChannel::sample(&cfg.channel, nt, 7, nt as u64).unwrap();
            let theta: Vec<Cx<f64>> = (0..16).map(|i| cis(0.3 * i as f64)).collect();
            let v = v_matrix(&m, &stats, &theta).unwrap();
            let p = active_beamforming(&theta, &m, &stats).unwrap();
            let val = sdp::quadratic_value(&v, &p);
            // power iteration oracle
            let mut x = DVector::from_element(nt, Cx::new(1.0, 0.3));
            for _ in 0..2000 {
                x = &v * &x;
                let n = x.norm();
                x /= Cx::new(n, 0.0);
            }
            let lam = (x.adjoint() * &v * &x)[(0, 0)].re;
            assert!(((val - lam) / lam).abs() < 1e-8, "nt={nt}");
            let pn: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            assert!((pn - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn received_power_matches_quadratic_form() {
        let cfg = config(16);
        let stats = backscatter_stats(&cfg.bit_map);
        let m = MisoChannel::sample(&cfg.channel, 2, 1, 1).unwrap();
        let p = vec![Cx::new(0.6, 0.0), Cx::new(0.0, 0.8)];
        let theta: Vec<Cx<f64>> = (0..16).map(|i| cis(1.1 * i as f64)).collect();
        let link = MisoLink::new(&m, &stats, &p, &theta).unwrap();
        let mut avg = 0.0;
        for (n_a, psi) in cfg.bit_map.backscatter_symbols() {
            let h = Hypothesis {
                n_a,
                psi,
                x: Cx::new(1.0, 0.0),
                label: 0,
            };
            avg += link.noiseless(&cfg, &h).norm_sqr() / 4.0;
        }
        let q = average_power(&m, &stats, &p, &theta).unwrap();
        assert!(((avg - q) / q).abs() < 1e-12);
        let r = r_matrix(&m, &stats, &p).unwrap();
        let g = m.direct(&p).norm_sqr();
        assert!(((phase_objective(&r, &theta) + g - q) / q).abs() < 1e-12);
    }

    #[test]
    fn ao_feasible_and_beam_steps_monotone() {
        let cfg = config(12);
        let stats = backscatter_stats(&cfg.bit_map);
        for trial in 0..3 {
            let m = MisoChannel::sample(&cfg.channel, 2, 4, trial).unwrap();
            let out = alternating_optimize(&m, &stats, &AoOptions::default()).unwrap();
            let pn: f64 = out.state.p.iter().map(|z| z.norm_sqr()).sum();
            assert!(pn <= 1.0 + 1e-12);
            assert!(out.state.theta.iter().all(|z| (z.norm() - 1.0).abs() < 1e-9));
            for w in out.trajectory.windows(2) {
                assert!(w[1].after_beam >= w[0].after_phase * (1.0 - 1e-12));
            }
            let ones = vec![Cx::new(1.0, 0.0); 12];
            let p0 = active_beamforming(&ones, &m, &stats).unwrap();
            assert!(out.state.objective >= average_power(&m, &stats, &p0, &ones).unwrap());
        }
        let m = MisoChannel::sample(&cfg.channel, 2, 4, 0).unwrap();
        let one = AoOptions {
            max_iterations: 1,
            ..AoOptions::default()
        };
        assert_eq!(alternating_optimize(&m, &stats, &one).unwrap().trajectory.len(), 1);
    }

    #[test]
    fn noiseless_detection_recovers_truth() {
        let mut cfg = config(16);
        cfg.n0 = 0.0;
        let stats = backscatter_stats(&cfg.bit_map);
        let m = MisoChannel::sample(&cfg.channel, 2, 8, 0).unwrap();
        let out = alternating_optimize(&m, &stats, &AoOptions::default()).unwrap();
        let link = MisoLink::new(&m, &stats, &out.state.p, &out.state.theta).unwrap();
        let bank = link.detector(&cfg);
        let mut rng = stream(1, Domain::Custom(2), 0);
        for h in cfg.hypotheses() {
            let s = link.transmit(&cfg, &h, &mut rng).unwrap();
            assert_eq!(bank.ml(s.y), h.label);
            assert_eq!(bank.lc(s.y, 4).unwrap().label, h.label);
        }
    }

    #[test]
    fn rejects_infeasible_beams() {
        let cfg = config(8);
        let stats = backscatter_stats(&cfg.bit_map);
        let m = MisoChannel::sample(&cfg.channel, 2, 1, 0).unwrap();
        let theta = vec![Cx::new(1.0, 0.0); 8];
        assert!(MisoLink::new(&m, &stats, &[Cx::new(1.0, 0.0), Cx::new(1.0, 0.0)], &theta).is_err());
        assert!(MisoLink::new(&m, &stats, &[Cx::new(1.0, 0.0)], &theta).is_err());
        let bad = vec![Cx::new(2.0, 0.0); 8];
        assert!(MisoLink::new(&m, &stats, &[Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)], &bad).is_err());
    }
}
