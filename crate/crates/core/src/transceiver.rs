//! Symbol synthesis for passive and active surfaces, and the ML and
//! low-complexity detectors.
//!
//! With the co-phasing configuration every ON element adds its cascade gain
//! coherently, so the received point for hypothesis `(N_a, psi, x)` is
//! `sqrt(P_t) (e^{j psi} amp(N_a) + |g|) x e^{j angle(g)}` where `amp`
//! depends on the surface mode.

use rand::Rng;

use crate::channel::{ChannelParams, ChannelRealization, MomentSet};
use crate::constellation::{
    active_na_alphabet, passive_na_alphabet, ApskConstellation, BitMap, BitMapEntry, SurfaceMode,
};
use crate::error::{param, Error, Result};
use crate::rng::complex_normal;
use crate::scalar::{cabs, carg, cis, from_usize, to_f64, wrap_angle, Cx, Real};

/// Everything needed to synthesize and detect a symbol.
#[derive(Debug, Clone)]
pub struct SystemConfig<T> {
    pub channel: ChannelParams<T>,
    pub constellation: ApskConstellation<T>,
    pub bit_map: BitMap<T>,
    /// Transmit power, linear mW.
    pub p_t: T,
    /// Receiver noise power, linear mW.
    pub n0: T,
    /// Per-element amplifier noise power, linear mW.
    pub n_v: T,
    /// Amplifier gain; 1 for a passive surface.
    pub xi: T,
    pub mode: SurfaceMode,
}

impl<T: Real> SystemConfig<T> {
    /// Builds the alphabet and bit map for `mode`.
    ///
    /// `ActiveOn` requires `xi` at least the product of the ring ratios.
    pub fn new(
        channel: ChannelParams<T>,
        constellation: ApskConstellation<T>,
        mode: SurfaceMode,
        xi: T,
        p_t: T,
        n0: T,
        n_v: T,
    ) -> Result<Self> {
        channel.validate()?;
        if !(p_t > T::zero() && p_t.is_finite()) {
            return Err(param("p_t", "must be positive and finite"));
        }
        if !(n0 >= T::zero()) || !(n_v >= T::zero()) {
            return Err(param("noise", "powers must be non-negative"));
        }
        let n = channel.n_elements;
        let (alphabet, xi) = match mode {
            SurfaceMode::Passive => (passive_na_alphabet(&constellation, n)?, T::one()),
            SurfaceMode::ActiveOn => {
                let a = active_na_alphabet(&constellation, n, xi)?;
                if a.mode != SurfaceMode::ActiveOn {
                    return Err(Error::Mode(format!(
                        "active-on needs xi >= {:.4}, got {}",
                        to_f64(constellation.total_ratio()),
                        to_f64(xi)
                    )));
                }
                (a, xi)
            }
            SurfaceMode::ActiveOff => {
                if !(xi > T::one()) {
                    return Err(param("xi", "must exceed 1"));
                }
                let mut a = passive_na_alphabet(&constellation, n)?;
                a.mode = SurfaceMode::ActiveOff;
                a.xi = to_f64(xi);
                (a, xi)
            }
        };
        let bit_map = BitMap::build(&constellation, &alphabet)?;
        Ok(Self {
            channel,
            constellation,
            bit_map,
            p_t,
            n0,
            n_v,
            xi,
            mode,
        })
    }

    pub fn with_power(&self, p_t: T) -> Self {
        Self {
            p_t,
            ..self.clone()
        }
    }

    pub fn n_elements(&self) -> usize {
        self.channel.n_elements
    }

    pub fn hypothesis(&self, label: usize) -> Result<Hypothesis<T>> {
        self.bit_map
            .entry(label)
            .map(Hypothesis::from)
            .ok_or_else(|| Error::UnknownHypothesis(format!("label {label}")))
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = Hypothesis<T>> + '_ {
        self.bit_map.entries().iter().map(Hypothesis::from)
    }

    /// Coherent amplitude contributed by the surface when `n_a` elements
    /// carry the ring.
    pub fn amplitude(&self, realization: &ChannelRealization<T>, n_a: usize) -> T {
        let on = realization.partial_sum(n_a);
        match self.mode {
            SurfaceMode::Passive => on,
            SurfaceMode::ActiveOn => {
                self.xi * on + realization.range_sum(n_a, realization.n_elements())
            }
            SurfaceMode::ActiveOff => self.xi * on,
        }
    }

    /// Amplifier-plus-receiver noise power when `n_a` elements are amplified,
    /// using the mean RIS-to-receiver gain.
    pub fn effective_noise(&self, moments: &MomentSet<T>, n_a: usize) -> T {
        match self.mode {
            SurfaceMode::Passive => self.n0,
            _ => self.xi * self.xi * from_usize::<T>(n_a) * moments.f.m2 * self.n_v + self.n0,
        }
    }

    pub(crate) fn check_label(&self, h: &Hypothesis<T>) -> Result<()> {
        match self.bit_map.entry(h.label) {
            Some(e) if e.n_a == h.n_a => Ok(()),
            _ => Err(Error::UnknownHypothesis(format!(
                "N_a = {} (label {})",
                h.n_a, h.label
            ))),
        }
    }
}

/// A transmit triple `(N_a, psi, x)` with its bit label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis<T> {
    pub n_a: usize,
    pub psi: T,
    pub x: Cx<T>,
    pub label: usize,
}

impl<T: Real> From<&BitMapEntry<T>> for Hypothesis<T> {
    fn from(e: &BitMapEntry<T>) -> Self {
        Self {
            n_a: e.n_a,
            psi: e.psi,
            x: e.x,
            label: e.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedSample<T> {
    pub y: Cx<T>,
    pub truth: Hypothesis<T>,
}

/// Surface phases that co-phase every cascade path with the direct link,
/// rotated by `psi`; wrapped to `[0, 2pi)`.
pub fn configure_phases<T: Real>(realization: &ChannelRealization<T>, psi: T) -> Vec<T> {
    let ag = carg(realization.g);
    realization
        .h
        .iter()
        .zip(&realization.f)
        .map(|(&h, &f)| wrap_angle(-carg(f * h) + ag + psi))
        .collect()
}

/// `sum_i beta_i f_i h_i e^{j phi_i} + g`, the composite channel for an
/// explicit per-element gain vector.
pub fn reflect<T: Real>(realization: &ChannelRealization<T>, beta: &[T], phases: &[T]) -> Cx<T> {
    realization
        .f
        .iter()
        .zip(&realization.h)
        .zip(beta.iter().zip(phases))
        .fold(realization.g, |acc, ((&f, &h), (&b, &p))| acc + f * h * cis(p) * b)
}

fn direct_phase<T: Real>(g: Cx<T>) -> Cx<T> {
    let m = cabs(g);
    if m > T::zero() {
        g / m
    } else {
        Cx::new(T::one(), T::zero())
    }
}

fn noiseless<T: Real>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    h: &Hypothesis<T>,
) -> Cx<T> {
    let amp = config.amplitude(realization, h.n_a);
    let g = realization.g;
    (cis(h.psi) * amp + Cx::new(cabs(g), T::zero())) * h.x * direct_phase(g) * config.p_t.sqrt()
}

/// Received sample for a passive surface: first `N_a` elements ON.
pub fn transmit_passive<T: Real, R: Rng + ?Sized>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    truth: &Hypothesis<T>,
    rng: &mut R,
) -> Result<ReceivedSample<T>> {
    if config.mode != SurfaceMode::Passive {
        return Err(Error::Mode(format!("transmit_passive in {} mode", config.mode)));
    }
    config.check_label(truth)?;
    let w = complex_normal::<T, _>(rng) * config.n0.sqrt();
    Ok(ReceivedSample {
        y: noiseless(config, realization, truth) + w,
        truth: *truth,
    })
}

/// Received sample for an active surface, with amplifier noise synthesized
/// element by element.
pub fn transmit_active<T: Real, R: Rng + ?Sized>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    truth: &Hypothesis<T>,
    rng: &mut R,
) -> Result<ReceivedSample<T>> {
    if !config.mode.is_active() {
        return Err(Error::Mode("transmit_active in passive mode".into()));
    }
    config.check_label(truth)?;
    let w_e = amplifier_noise(config, realization, truth, rng);
    Ok(ReceivedSample {
        y: noiseless(config, realization, truth) + w_e,
        truth: *truth,
    })
}

/// `xi e^{j psi} sum_{i<N_a} |f_i| e^{j(angle(g) - angle(h_i))} v_i + w`.
pub fn amplifier_noise<T: Real, R: Rng + ?Sized>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    truth: &Hypothesis<T>,
    rng: &mut R,
) -> Cx<T> {
    let sv = config.n_v.sqrt();
    let mut acc = Cx::new(T::zero(), T::zero());
    for (f, h) in realization.f[..truth.n_a].iter().zip(&realization.h) {
        let v = complex_normal::<T, _>(rng) * sv;
        let hm = cabs(*h);
        let rot = if hm > T::zero() { h.conj() / hm } else { Cx::new(T::one(), T::zero()) };
        acc += rot * v * cabs(*f);
    }
    let w = complex_normal::<T, _>(rng) * config.n0.sqrt();
    acc * cis(truth.psi) * direct_phase(realization.g) * config.xi + w
}

/// Mode-dispatching transmit.
pub fn transmit<T: Real, R: Rng + ?Sized>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    truth: &Hypothesis<T>,
    rng: &mut R,
) -> Result<ReceivedSample<T>> {
    if config.mode.is_active() {
        transmit_active(config, realization, truth, rng)
    } else {
        transmit_passive(config, realization, truth, rng)
    }
}

/// Noiseless model points for every hypothesis of one realization, plus the
/// anchor points used by the low-complexity detector.
#[derive(Debug, Clone)]
pub struct DetectorBank<T> {
    models: Vec<Cx<T>>,
    anchors: Vec<Cx<T>>,
    backscatter_order: usize,
}

/// Output of the two-stage detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcDecision {
    pub label: usize,
    /// Distance metrics computed, `A + I * P`.
    pub evaluations: usize,
}

impl<T: Real> DetectorBank<T> {
    pub fn new(config: &SystemConfig<T>, realization: &ChannelRealization<T>) -> Self {
        let models = config
            .hypotheses()
            .map(|h| noiseless(config, realization, &h))
            .collect();
        // anchor: average of amp e^{j psi} over the P backscatter symbols
        let p = config.bit_map.backscatter_order();
        let q = config
            .bit_map
            .backscatter_symbols()
            .fold(Cx::new(T::zero(), T::zero()), |acc, (n_a, psi)| {
                acc + cis(psi) * config.amplitude(realization, n_a)
            })
            / from_usize::<T>(p);
        let g = realization.g;
        let base = (q + Cx::new(cabs(g), T::zero())) * direct_phase(g) * config.p_t.sqrt();
        let anchors = config.bit_map.active_symbols().map(|x| base * x).collect();
        Self::from_parts(models, anchors, p)
    }

    /// Builds a bank from precomputed model points (label order) and anchors
    /// (active-symbol order).
    pub fn from_parts(models: Vec<Cx<T>>, anchors: Vec<Cx<T>>, backscatter_order: usize) -> Self {
        debug_assert_eq!(models.len(), anchors.len() * backscatter_order);
        Self {
            models,
            anchors,
            backscatter_order,
        }
    }

    pub fn models(&self) -> &[Cx<T>] {
        &self.models
    }

    /// Exhaustive ML decision; ties go to the smallest label.
    pub fn ml(&self, y: Cx<T>) -> usize {
        let mut best = 0;
        let mut best_d = (y - self.models[0]).norm_sqr();
        for (l, m) in self.models.iter().enumerate().skip(1) {
            let d = (y - m).norm_sqr();
            if d < best_d {
                best_d = d;
                best = l;
            }
        }
        best
    }

    /// Two-stage decision keeping the `keep` best active symbols.
    pub fn lc(&self, y: Cx<T>, keep: usize) -> Result<LcDecision> {
        let a = self.anchors.len();
        if keep == 0 || keep > a {
            return Err(param("keep", format!("{keep} not in 1..={a}")));
        }
        let mut ranked: Vec<(T, usize)> = self
            .anchors
            .iter()
            .enumerate()
            .map(|(i, q)| ((y - q).norm_sqr(), i))
            .collect();
        ranked.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap_or(std::cmp::Ordering::Equal).then(l.1.cmp(&r.1)));
        let mut candidates: Vec<usize> = ranked[..keep].iter().map(|&(_, i)| i).collect();
        candidates.sort_unstable();

        let p = self.backscatter_order;
        let mut best = usize::MAX;
        let mut best_d = T::zero();
        let mut evaluations = a;
        for &ai in &candidates {
            for l in ai * p..(ai + 1) * p {
                let d = (y - self.models[l]).norm_sqr();
                evaluations += 1;
                if best == usize::MAX || d < best_d {
                    best = l;
                    best_d = d;
                }
            }
        }
        Ok(LcDecision {
            label: best,
            evaluations,
        })
    }
}

/// ML detection over all `A * P` hypotheses.
pub fn ml_detect<T: Real>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    y: Cx<T>,
) -> Hypothesis<T> {
    let label = DetectorBank::new(config, realization).ml(y);
    config.hypothesis(label).expect("label from bank")
}

/// Low-complexity two-stage detection keeping `keep` active candidates.
pub fn lc_detect<T: Real>(
    config: &SystemConfig<T>,
    realization: &ChannelRealization<T>,
    y: Cx<T>,
    keep: usize,
) -> Result<(Hypothesis<T>, usize)> {
    let d = DetectorBank::new(config, realization).lc(y, keep)?;
    Ok((config.hypothesis(d.label)?, d.evaluations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::RingSchedule;
    use crate::rng::{stream, Domain};
    use std::f64::consts::PI;

    fn config(mode: SurfaceMode, n: usize) -> SystemConfig<f64> {
        let c = ApskConstellation::optimize(RingSchedule::parse("4+12", 4).unwrap(), 0.01).unwrap();
        let ch = ChannelParams {
            n_elements: n,
            ..Default::default()
        };
        let xi = if mode == SurfaceMode::Passive { 1.0 } else { 10.0 };
        SystemConfig::new(ch, c, mode, xi, 10.0, 1e-8, 1e-8).unwrap()
    }

    #[test]
    fn real_channels_need_no_phase() {
        let r = ChannelRealization::from_links(
            vec![Cx::new(0.5, 0.0); 4],
            vec![Cx::new(2.0, 0.0); 4],
            Cx::new(0.1, 0.0),
        )
        .unwrap();
        assert!(configure_phases(&r, 0.0f64).iter().all(|&p| p.abs() < 1e-15));
        let shifted = configure_phases(&r, PI / 6.0);
        assert!(shifted.iter().all(|&p| (p - PI / 6.0).abs() < 1e-15));
    }

    #[test]
    fn phase_shift_is_additive() {
        let p = ChannelParams::<f64> {
            n_elements: 16,
            ..Default::default()
        };
        let r = ChannelRealization::sample(&p, 2, 0);
        let a = configure_phases(&r, 0.0);
        let b = configure_phases(&r, PI / 6.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((wrap_angle(x + PI / 6.0) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_reflection_matches_reduced_model() {
        let cfg = config(SurfaceMode::Passive, 64);
        let r = ChannelRealization::sample(&cfg.channel, 9, 1);
        for h in cfg.hypotheses() {
            let phases = configure_phases(&r, h.psi);
            let beta: Vec<f64> = (0..64).map(|i| if i < h.n_a { 1.0 } else { 0.0 }).collect();
            let y = reflect(&r, &beta, &phases) * h.x * cfg.p_t.sqrt();
            let m = noiseless(&cfg, &r, &h);
            assert!((y - m).norm() < 1e-9 * m.norm(), "label {}", h.label);
        }
    }

    #[test]
    fn coherent_combining() {
        let p = ChannelParams::<f64> {
            n_elements: 32,
            ..Default::default()
        };
        let r = ChannelRealization::sample(&p, 4, 2);
        let psi = 0.4;
        let phases = configure_phases(&r, psi);
        let beta = vec![1.0; 32];
        let sum = reflect(&r, &beta, &phases) - r.g;
        let expect = cis(carg(r.g) + psi) * r.partial_sum(32);
        assert!((sum - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn backscatter_only_amplitude() {
        let cfg = config(SurfaceMode::Passive, 32);
        let mut r = ChannelRealization::sample(&cfg.channel, 1, 0);
        r = ChannelRealization::from_links(r.h, r.f, Cx::new(0.0, 0.0)).unwrap();
        let h = cfg.hypothesis(1).unwrap();
        let mut zero = cfg.clone();
        zero.n0 = 0.0;
        let s = transmit_passive(&zero, &r, &h, &mut stream(0, Domain::Custom(1), 0)).unwrap();
        assert!((s.y.norm() / zero.p_t.sqrt() - r.partial_sum(h.n_a)).abs() < 1e-15);
    }

    #[test]
    fn table_row_uses_inner_ring_count() {
        let cfg = config(SurfaceMode::Passive, 128);
        let h = cfg.hypothesis(0).unwrap();
        let gamma = cfg.constellation.radius_ratios()[0];
        assert_eq!(h.n_a, (128.0 / gamma).round() as usize);
    }

    #[test]
    fn mode_mismatch_errors() {
        let cfg = config(SurfaceMode::Passive, 32);
        let r = ChannelRealization::sample(&cfg.channel, 1, 0);
        let h = cfg.hypothesis(0).unwrap();
        let mut rng = stream(0, Domain::Custom(2), 0);
        assert!(matches!(transmit_active(&cfg, &r, &h, &mut rng), Err(Error::Mode(_))));
        let act = config(SurfaceMode::ActiveOn, 32);
        assert!(matches!(transmit_passive(&act, &r, &h, &mut rng), Err(Error::Mode(_))));
        let bogus = Hypothesis { n_a: 7, ..h };
        assert!(transmit_passive(&cfg, &r, &bogus, &mut rng).is_err());
    }

    #[test]
    fn active_on_requires_gain() {
        let c = ApskConstellation::optimize(RingSchedule::parse("4+12", 4).unwrap(), 0.01).unwrap();
        let r = SystemConfig::new(
            ChannelParams::default(),
            c,
            SurfaceMode::ActiveOn,
            1.5,
            1.0,
            1e-8,
            1e-8,
        );
        assert!(matches!(r, Err(Error::Mode(_))));
    }

    #[test]
    fn unit_gain_active_equals_all_on_passive() {
        let c = ApskConstellation::<f64>::from_ratios(RingSchedule::parse("4+12", 4).unwrap(), vec![2.08]).unwrap();
        let mut cfg = SystemConfig::new(
            ChannelParams::default(),
            c,
            SurfaceMode::ActiveOn,
            10.0,
            1.0,
            1e-8,
            0.0,
        )
        .unwrap();
        cfg.xi = 1.0;
        let r = ChannelRealization::sample(&cfg.channel, 5, 5);
        for h in cfg.hypotheses() {
            assert!((cfg.amplitude(&r, h.n_a) - r.partial_sum(128)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_amplifier_noise_leaves_receiver_noise() {
        let mut cfg = config(SurfaceMode::ActiveOn, 32);
        cfg.n_v = 0.0;
        let r = ChannelRealization::sample(&cfg.channel, 1, 0);
        let h = cfg.hypothesis(3).unwrap();
        let a = amplifier_noise(&cfg, &r, &h, &mut stream(1, Domain::Custom(3), 0));
        let mut rng = stream(1, Domain::Custom(3), 0);
        for _ in 0..h.n_a {
            let _ = complex_normal::<f64, _>(&mut rng);
        }
        let w = complex_normal::<f64, _>(&mut rng) * cfg.n0.sqrt();
        assert!((a - w).norm() < 1e-20);
    }

    #[test]
    fn noiseless_roundtrip_all_modes() {
        for mode in [SurfaceMode::Passive, SurfaceMode::ActiveOn, SurfaceMode::ActiveOff] {
            let mut cfg = config(mode, 64);
            cfg.n0 = 0.0;
            cfg.n_v = 0.0;
            for trial in 0..10 {
                let r = ChannelRealization::sample(&cfg.channel, 3, trial);
                let bank = DetectorBank::new(&cfg, &r);
                let mut rng = stream(3, Domain::Custom(4), trial);
                for h in cfg.hypotheses() {
                    let s = transmit(&cfg, &r, &h, &mut rng).unwrap();
                    assert_eq!(bank.ml(s.y), h.label, "{mode} trial {trial}");
                    assert_eq!(bank.lc(s.y, 4).unwrap().label, h.label);
                }
            }
        }
    }

    #[test]
    fn lc_rejects_bad_keep() {
        let cfg = config(SurfaceMode::Passive, 32);
        let r = ChannelRealization::sample(&cfg.channel, 1, 0);
        assert!(lc_detect(&cfg, &r, Cx::new(0.0, 0.0), 0).is_err());
        assert!(lc_detect(&cfg, &r, Cx::new(0.0, 0.0), 5).is_err());
        let (_, evals) = lc_detect(&cfg, &r, Cx::new(1e-3, 0.0), 2).unwrap();
        assert_eq!(evals, 2 * 4 + 4);
    }

    #[test]
    fn ml_ties_go_to_smallest_label() {
        let bank = DetectorBank::from_parts(
            vec![Cx::new(1.0, 0.0), Cx::new(-1.0, 0.0), Cx::new(0.0, 1.0), Cx::new(0.0, -1.0)],
            vec![Cx::new(0.0, 0.0); 2],
            2,
        );
        assert_eq!(bank.ml(Cx::new(0.0, 0.0)), 0);
        assert_eq!(bank.lc(Cx::new(0.0, 0.0), 2).unwrap().label, 0);
    }
}
