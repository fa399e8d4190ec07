use rand::Rng;
use rayon::prelude::*;

use super::spec::{DetectorKind, ExperimentSpec};
use super::stats::SerPoint;
use crate::analysis::{ser_bounds, SerBounds};
use crate::channel::{ChannelRealization, MomentSet};
use crate::error::{param, Result};
use crate::miso::{alternating_optimize, backscatter_stats, MisoChannel, MisoLink};
use crate::rng::{stream, Domain};
use crate::scalar::dbm_to_mw;
use crate::transceiver::{transmit, DetectorBank, SystemConfig};

/// Error counts per sweep point: `[active, backscatter, overall]`.
pub type ErrorCounts = Vec<[u64; 3]>;

fn add(mut a: ErrorCounts, b: ErrorCounts) -> ErrorCounts {
    for (x, y) in a.iter_mut().zip(b) {
        for k in 0..3 {
            x[k] += y[k];
        }
    }
    a
}

/// System for one sweep point; `+inf` dBm gives the noiseless link.
fn point_config(base: &SystemConfig<f64>, p_t_dbm: f64) -> SystemConfig<f64> {
    if p_t_dbm == f64::INFINITY {
        let mut c = base.with_power(1.0);
        c.n0 = 0.0;
        c.n_v = 0.0;
        c
    } else {
        base.with_power(dbm_to_mw(p_t_dbm))
    }
}

fn classify(truth: usize, decided: usize, p: usize, out: &mut [u64; 3]) {
    let active = truth / p != decided / p;
    let back = truth % p != decided % p;
    out[0] += active as u64;
    out[1] += back as u64;
    out[2] += (truth != decided) as u64;
}

fn decide(bank: &DetectorBank<f64>, y: num_complex::Complex<f64>, kind: DetectorKind, keep: usize) -> Result<usize> {
    Ok(match kind {
        DetectorKind::Ml => bank.ml(y),
        DetectorKind::Lc => bank.lc(y, keep)?.label,
    })
}

/// Runs the Monte Carlo sweep on `workers` threads.
///
/// Trial `t` uses the channel streams of `(seed, t)` at every sweep point
/// and the symbol/noise stream of `(seed, point, t)`, so results do not
/// depend on the worker count or schedule. With a `miso` block, a trial is a
/// beamformed channel realization carrying `symbols_per_channel` symbols.
pub fn run_sweep(spec: &ExperimentSpec, workers: usize) -> Result<Vec<SerPoint>> {
    let base = spec.system()?;
    if workers == 0 {
        return Err(param("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| param("workers", e.to_string()))?;
    let configs: Vec<SystemConfig<f64>> = spec.p_t_dbm.iter().map(|&p| point_config(&base, p)).collect();
    let (counts, trials) = pool.install(|| match &spec.miso {
        None => siso_counts(spec, &configs).map(|c| (c, spec.trials)),
        Some(m) => {
            let channels = spec.trials.div_ceil(m.symbols_per_channel);
            miso_counts(spec, &configs, channels).map(|c| (c, channels * m.symbols_per_channel))
        }
    })?;

    let bounds: Vec<[f64; 3]> = analytic_bounds(spec)?
        .into_iter()
        .map(|b| b.map_or([f64::NAN; 3], |b| {
            let b = b.clamped();
            [b.active, b.backscatter, b.overall]
        }))
        .collect();
    Ok(spec
        .p_t_dbm
        .iter()
        .zip(counts)
        .zip(bounds)
        .map(|((&p, c), b)| SerPoint::from_counts(p, c, trials, b))
        .collect())
}

/// Unclamped union bounds per sweep point; `None` for the multi-antenna
/// link, which has no analytic bound. A noiseless point bounds to zero.
pub fn analytic_bounds(spec: &ExperimentSpec) -> Result<Vec<Option<SerBounds>>> {
    if spec.miso.is_some() {
        return Ok(vec![None; spec.p_t_dbm.len()]);
    }
    let base = spec.system()?;
    let moments = MomentSet::from_params(&base.channel)?;
    spec.p_t_dbm
        .iter()
        .map(|&p| {
            if p == f64::INFINITY {
                Ok(Some(SerBounds {
                    active: 0.0,
                    backscatter: 0.0,
                    overall: 0.0,
                }))
            } else {
                ser_bounds(&point_config(&base, p), &moments).map(Some)
            }
        })
        .collect()
}

fn siso_counts(spec: &ExperimentSpec, configs: &[SystemConfig<f64>]) -> Result<ErrorCounts> {
    let params = &configs[0].channel;
    let m = configs[0].bit_map.len();
    let p = configs[0].bit_map.backscatter_order();
    let zero = vec![[0u64; 3]; configs.len()];
    (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<ErrorCounts> {
            let r = ChannelRealization::sample(params, spec.seed, t);
            let mut out = vec![[0u64; 3]; configs.len()];
            for (k, cfg) in configs.iter().enumerate() {
                let mut rng = stream(spec.seed, Domain::Symbol(k), t);
                let truth = cfg.hypothesis(rng.random_range(0..m))?;
                let s = transmit(cfg, &r, &truth, &mut rng)?;
                let bank = DetectorBank::new(cfg, &r);
                let d = decide(&bank, s.y, spec.detector, spec.lc_keep)?;
                classify(truth.label, d, p, &mut out[k]);
            }
            Ok(out)
        })
        .try_reduce(|| zero.clone(), |a, b| Ok(add(a, b)))
}

fn miso_counts(spec: &ExperimentSpec, configs: &[SystemConfig<f64>], channels: u64) -> Result<ErrorCounts> {
    let mspec = spec.miso.as_ref().expect("miso block");
    let params = &configs[0].channel;
    let stats = backscatter_stats(&configs[0].bit_map);
    let opts = mspec.ao_options();
    let m = configs[0].bit_map.len();
    let p = configs[0].bit_map.backscatter_order();
    let zero = vec![[0u64; 3]; configs.len()];
    (0..channels)
        .into_par_iter()
        .map(|c| -> Result<ErrorCounts> {
            let ch = MisoChannel::sample(params, mspec.n_t, spec.seed, c)?;
            let ao = alternating_optimize(&ch, &stats, &opts)?;
            let link = MisoLink::new(&ch, &stats, &ao.state.p, &ao.state.theta)?;
            let mut out = vec![[0u64; 3]; configs.len()];
            for (k, cfg) in configs.iter().enumerate() {
                let bank = link.detector(cfg);
                let mut rng = stream(spec.seed, Domain::Symbol(k), c);
                for _ in 0..mspec.symbols_per_channel {
                    let truth = cfg.hypothesis(rng.random_range(0..m))?;
                    let s = link.transmit(cfg, &truth, &mut rng)?;
                    let d = decide(&bank, s.y, spec.detector, spec.lc_keep)?;
                    classify(truth.label, d, p, &mut out[k]);
                }
            }
            Ok(out)
        })
        .try_reduce(|| zero.clone(), |a, b| Ok(add(a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::SurfaceMode;

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            n_elements: 32,
            trials: 400,
            p_t_dbm: vec![0.0, 10.0, 20.0, f64::INFINITY],
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn noiseless_sentinel_is_error_free() {
        for mode in [SurfaceMode::Passive, SurfaceMode::ActiveOn] {
            let pts = run_sweep(&ExperimentSpec { mode, ..small() }, 2).unwrap();
            let last = pts.last().unwrap();
            assert_eq!(last.sers(), [0.0; 3]);
            assert_eq!(last.bounds(), [0.0; 3]);
        }
    }

    #[test]
    fn overall_dominates_and_rates_decrease() {
        let pts = run_sweep(&small(), 1).unwrap();
        for p in &pts {
            assert!(p.ser_overall >= p.ser_active.max(p.ser_backscatter));
            assert!(p.sers().iter().all(|r| (0.0..=1.0).contains(r)));
        }
        assert!(pts[0].ser_overall > pts[2].ser_overall);
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let a = run_sweep(&small(), 1).unwrap();
        let b = run_sweep(&small(), 3).unwrap();
        assert_eq!(a, b.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn rejects_zero_trials() {
        let s = ExperimentSpec {
            trials: 0,
            ..small()
        };
        assert!(run_sweep(&s, 1).is_err());
    }
}
