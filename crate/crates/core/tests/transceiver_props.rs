use proptest::prelude::*;
use rand::Rng;
use riscbc::channel::{ChannelParams, ChannelRealization};
use riscbc::constellation::{ApskConstellation, RingSchedule, SurfaceMode};
use riscbc::rng::{stream, Domain};
use riscbc::scalar::cis;
use riscbc::transceiver::{configure_phases, reflect, transmit, DetectorBank, SystemConfig};
use riscbc::Cx;

fn config(schedule: &str, mode: SurfaceMode, xi: f64, n: usize, n0: f64) -> SystemConfig<f64> {
    let c = ApskConstellation::optimize(RingSchedule::parse(schedule, 4).unwrap(), 0.01).unwrap();
    let channel = ChannelParams {
        n_elements: n,
        ..ChannelParams::default()
    };
    SystemConfig::new(channel, c, mode, xi, 1.0, n0, n0).unwrap()
}

fn mode_of(i: u8) -> (SurfaceMode, f64) {
    match i {
        0 => (SurfaceMode::Passive, 1.0),
        1 => (SurfaceMode::ActiveOn, 10.0),
        _ => (SurfaceMode::ActiveOff, 1.5),
    }
}

/// Noise level giving a few percent symbol errors at unit power.
fn noisy(cfg: &SystemConfig<f64>, r: &ChannelRealization<f64>) -> f64 {
    let m = DetectorBank::new(cfg, r);
    let mut d = f64::INFINITY;
    for (i, a) in m.models().iter().enumerate() {
        for b in &m.models()[i + 1..] {
            d = d.min((a - b).norm_sqr());
        }
    }
    d
}

#[test]
fn passive_model_matches_explicit_reflection() {
    let cfg = config("4+12", SurfaceMode::Passive, 1.0, 64, 0.0);
    for t in 0..20 {
        let r = ChannelRealization::sample(&cfg.channel, 3, t);
        let bank = DetectorBank::new(&cfg, &r);
        for h in cfg.hypotheses() {
            let beta: Vec<f64> = (0..64).map(|i| (i < h.n_a) as u8 as f64).collect();
            let want = reflect(&r, &beta, &configure_phases(&r, h.psi)) * h.x;
            let got = bank.models()[h.label];
            assert!((want - got).norm() <= 1e-12 * want.norm(), "{want} vs {got}");
        }
    }
}

#[test]
fn active_off_geometry_is_scaled_passive() {
    let xi = 1.7;
    let p = config("4+12", SurfaceMode::Passive, 1.0, 128, 0.0);
    let off = config("4+12", SurfaceMode::ActiveOff, xi, 128, 0.0);
    for t in 0..20 {
        let r = ChannelRealization::sample(&p.channel, 5, t);
        let (bp, bo) = (DetectorBank::new(&p, &r), DetectorBank::new(&off, &r));
        let direct = r.g.norm() * r.g / r.g.norm();
        for h in p.hypotheses() {
            let base = direct * h.x;
            let want = (bp.models()[h.label] - base) * xi;
            let got = bo.models()[h.label] - base;
            assert!((want - got).norm() <= 1e-12 * want.norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_round_trip(seed in any::<u64>(), mode in 0u8..3, n in 64usize..300, three in any::<bool>()) {
        let (mode, xi) = mode_of(mode);
        let cfg = config(if three { "4+12+16" } else { "4+12" }, mode, xi, n, 0.0);
        let r = ChannelRealization::sample(&cfg.channel, seed, 0);
        let bank = DetectorBank::new(&cfg, &r);
        let mut rng = stream(seed, Domain::Custom(1), 0);
        for h in cfg.hypotheses() {
            let s = transmit(&cfg, &r, &h, &mut rng).unwrap();
            prop_assert_eq!(bank.ml(s.y), h.label);
            prop_assert_eq!(bank.lc(s.y, 4).unwrap().label, h.label);
        }
    }

    #[test]
    fn full_keep_equals_ml(seed in any::<u64>(), mode in 0u8..3, scale in 0.05f64..2.0) {
        let (mode, xi) = mode_of(mode);
        let base = config("4+12", mode, xi, 128, 0.0);
        let r = ChannelRealization::sample(&base.channel, seed, 1);
        let n0 = scale * noisy(&base, &r);
        let cfg = config("4+12", mode, xi, 128, n0);
        let bank = DetectorBank::new(&cfg, &r);
        let mut rng = stream(seed, Domain::Custom(2), 0);
        for _ in 0..200 {
            let h = cfg.hypothesis(rng.random_range(0..cfg.bit_map.len())).unwrap();
            let y = transmit(&cfg, &r, &h, &mut rng).unwrap().y;
            let lc = bank.lc(y, 4).unwrap();
            prop_assert_eq!(lc.label, bank.ml(y));
            prop_assert_eq!(lc.evaluations, 4 * cfg.bit_map.backscatter_order() + 4);
        }
    }

    #[test]
    fn common_rotation_leaves_decisions_unchanged(seed in any::<u64>(), phi in -3.1f64..3.1, yr in -2.0f64..2.0, yi in -2.0f64..2.0) {
        let cfg = config("4+12", SurfaceMode::Passive, 1.0, 64, 0.0);
        let r = ChannelRealization::sample(&cfg.channel, seed, 2);
        let rot = cis(phi);
        let turned = ChannelRealization::from_links(
            r.h.clone(),
            r.f.iter().map(|f| f * rot).collect(),
            r.g * rot,
        ).unwrap();
        let (a, b) = (DetectorBank::new(&cfg, &r), DetectorBank::new(&cfg, &turned));
        let scale = a.models().iter().map(|m| m.norm()).fold(0.0, f64::max);
        let y = Cx::new(yr, yi) * scale;
        prop_assert_eq!(a.ml(y), b.ml(y * rot));
        prop_assert_eq!(a.lc(y, 2).unwrap(), b.lc(y * rot, 2).unwrap());
    }
}
