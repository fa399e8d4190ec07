use serde::{Deserialize, Serialize};

use super::extended;

use crate::channel::ChannelParams;
use crate::constellation::{ApskConstellation, RingSchedule, SurfaceMode, DEFAULT_GRID_STEP};
use crate::error::{param, Result};
use crate::miso::AoOptions;
use crate::scalar::{db_to_linear, dbm_to_mw};
use crate::sdp::SdpOptions;
use crate::transceiver::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Ml,
    Lc,
}

/// Large-scale channel geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    #[serde(with = "extended")]
    pub rician_k: f64,
    pub ref_loss_db: f64,
    /// A-Tx to RIS, RIS to C-Rx, A-Tx to C-Rx (m).
    pub distances: [f64; 3],
    pub exponents: [f64; 3],
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            rician_k: 8.0,
            ref_loss_db: -30.0,
            distances: [5.0, 50.0, 54.0],
            exponents: [2.0, 2.2, 3.5],
        }
    }
}

/// Multi-antenna block; its presence switches `simulate` to the beamformed
/// link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MisoSpec {
    pub n_t: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Symbols per beamformed channel realization.
    pub symbols_per_channel: u64,
    pub sdp_tolerance: f64,
    pub sdp_max_iterations: usize,
}

impl Default for MisoSpec {
    fn default() -> Self {
        Self {
            n_t: 2,
            epsilon: 1e-10,
            max_iterations: 4,
            symbols_per_channel: 1,
            sdp_tolerance: 1e-6,
            sdp_max_iterations: 5000,
        }
    }
}

impl MisoSpec {
    pub fn ao_options(&self) -> AoOptions {
        AoOptions {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            sdp: SdpOptions {
                tol: self.sdp_tolerance,
                max_iterations: self.sdp_max_iterations,
                ..SdpOptions::default()
            },
        }
    }
}

/// One experiment: system parameters, transmit-power sweep and Monte Carlo
/// budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub mode: SurfaceMode,
    pub schedule: String,
    /// Active PSK order `A`.
    pub active_order: usize,
    pub n_elements: usize,
    /// Amplifier gain (linear amplitude); ignored in passive mode.
    pub xi: f64,
    /// Transmit powers in dBm; `inf` runs the noiseless link.
    #[serde(with = "extended::list")]
    pub p_t_dbm: Vec<f64>,
    pub trials: u64,
    pub detector: DetectorKind,
    /// Active candidates `I` kept by the low-complexity detector.
    pub lc_keep: usize,
    pub seed: u64,
    pub grid_step: f64,
    #[serde(with = "extended")]
    pub noise_dbm: f64,
    #[serde(with = "extended")]
    pub amp_noise_dbm: f64,
    pub channel: ChannelSpec,
    pub miso: Option<MisoSpec>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            mode: SurfaceMode::Passive,
            schedule: "4+12".into(),
            active_order: 4,
            n_elements: 128,
            xi: 10.0,
            p_t_dbm: (0..=8).map(|i| -4.0 + 2.0 * i as f64).collect(),
            trials: 100_000,
            detector: DetectorKind::Ml,
            lc_keep: 2,
            seed: 1,
            grid_step: DEFAULT_GRID_STEP,
            noise_dbm: -80.0,
            amp_noise_dbm: -80.0,
            channel: ChannelSpec::default(),
            miso: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn channel_params(&self) -> ChannelParams<f64> {
        ChannelParams {
            rician_k: self.channel.rician_k,
            ref_loss: db_to_linear(self.channel.ref_loss_db),
            distances: self.channel.distances,
            exponents: self.channel.exponents,
            n_elements: self.n_elements,
        }
    }

    pub fn constellation(&self) -> Result<ApskConstellation<f64>> {
        let schedule = RingSchedule::parse(&self.schedule, self.active_order)?;
        ApskConstellation::optimize(schedule, self.grid_step)
    }

    /// System at unit transmit power; sweep points rescale it.
    pub fn system(&self) -> Result<SystemConfig<f64>> {
        self.validate_fields()?;
        let c = self.constellation()?;
        SystemConfig::new(
            self.channel_params(),
            c,
            self.mode,
            self.xi,
            1.0,
            dbm_to_mw(self.noise_dbm),
            dbm_to_mw(self.amp_noise_dbm),
        )
    }

    fn validate_fields(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(param("spec.trials", "must be at least 1"));
        }
        if self.p_t_dbm.is_empty() {
            return Err(param("spec.p_t_dbm", "sweep is empty"));
        }
        if self.p_t_dbm.iter().any(|p| p.is_nan() || *p == f64::NEG_INFINITY) {
            return Err(param("spec.p_t_dbm", "entries must be finite or +inf"));
        }
        if self.lc_keep == 0 || self.lc_keep > self.active_order {
            return Err(param("spec.lc_keep", format!("must be in 1..={}", self.active_order)));
        }
        if let Some(m) = &self.miso {
            if m.n_t == 0 {
                return Err(param("spec.miso.n_t", "must be at least 1"));
            }
            if m.symbols_per_channel == 0 {
                return Err(param("spec.miso.symbols_per_channel", "must be at least 1"));
            }
            if !(m.epsilon > 0.0) {
                return Err(param("spec.miso.epsilon", "must be positive"));
            }
            if m.max_iterations == 0 {
                return Err(param("spec.miso.max_iterations", "must be at least 1"));
            }
            if self.mode != SurfaceMode::Passive {
                return Err(param("spec.mode", "the multi-antenna link supports passive mode only"));
            }
        }
        Ok(())
    }

    /// Full validation, including the assembled system.
    pub fn validate(&self) -> Result<()> {
        self.system().map(|_| ())
    }
}
