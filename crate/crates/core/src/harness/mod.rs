//! Experiment configuration, Monte Carlo sweeps and result files.

mod output;
mod spec;
mod stats;
mod sweep;

pub use output::{emit_results, read_csv, run_id, EmittedFiles, RunMetadata, CSV_COLUMNS};
pub use spec::{ChannelSpec, DetectorKind, ExperimentSpec, MisoSpec};
pub use stats::{wilson_interval, SerPoint, Z_ONE_SIDED_99, Z_TWO_SIDED_99};
pub use sweep::{analytic_bounds, run_sweep, ErrorCounts};

use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl HarnessError {
    /// Process exit code by category.
    pub fn exit_code(&self) -> i32 {
        use crate::Error as E;
        match self {
            HarnessError::Config(_) => 3,
            HarnessError::Io { .. } => 5,
            HarnessError::Core(e) => match e {
                E::SolverNonConvergence { .. } | E::SeriesDivergence { .. } | E::Singular(_) => 4,
                _ => 3,
            },
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Serde for `f64` fields that may be infinite: JSON has no literal for
/// them, so non-finite values travel as the strings `inf`, `-inf`, `nan`.
pub(crate) mod extended {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Num(x)
        } else {
            Repr::Text(x.to_string().to_lowercase())
        }
    }

    fn from_repr<E: Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, got `{other}`"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
            xs.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}
