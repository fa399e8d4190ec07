use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::ExperimentSpec;
use super::stats::SerPoint;
use super::sweep::analytic_bounds;
use crate::analysis::SerBounds;
use super::HarnessError;
use crate::constellation::ConstellationExport;

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 8] = [
    "p_t_dbm",
    "ser_active",
    "ser_backscatter",
    "ser_overall",
    "bound_active",
    "bound_backscatter",
    "bound_overall",
    "trials",
];

/// Short content hash of the experiment settings, stable across runs.
pub fn run_id(spec: &ExperimentSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// JSON sidecar written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub seed: u64,
    pub spec: ExperimentSpec,
    pub constellation: ConstellationExport,
    /// How symbols relate to channel realizations.
    pub symbols_per_channel: u64,
    pub channel_sharing: String,
    pub points: Vec<SerPoint>,
    /// Union bounds before clamping, one per point; null where none applies.
    pub raw_bounds: Vec<Option<SerBounds>>,
}

#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub plot: PathBuf,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // 17 significant digits round-trip every f64
        format!("{x:.16e}")
    }
}

fn csv_text(points: &[SerPoint]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| HarnessError::Config(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for p in points {
        let mut row: Vec<String> = [p.p_t_dbm, p.ser_active, p.ser_backscatter, p.ser_overall]
            .into_iter()
            .chain(p.bounds())
            .map(num)
            .collect();
        row.push(p.trials.to_string());
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

fn plot_script(stem: &str, has_bounds: bool) -> String {
    let mut s = String::new();
    s.push_str("# SER versus transmit power; render with gnuplot\n");
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str("set logscale y\nset format y '10^{%L}'\nset yrange [1e-6:1]\n");
    s.push_str("set xlabel 'P_t (dBm)'\nset ylabel 'SER'\nset grid\n");
    s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{stem}.png'\n"));
    let csv = format!("{stem}.csv");
    let mut series = vec![
        format!("'{csv}' using 1:2 with linespoints pt 4 title 'active (sim)'"),
        format!("'{csv}' using 1:3 with linespoints pt 6 title 'backscatter (sim)'"),
        format!("'{csv}' using 1:4 with linespoints pt 8 title 'overall (sim)'"),
    ];
    if has_bounds {
        series.push(format!("'{csv}' using 1:5 with lines dt 2 title 'active (bound)'"));
        series.push(format!("'{csv}' using 1:6 with lines dt 2 title 'backscatter (bound)'"));
        series.push(format!("'{csv}' using 1:7 with lines dt 2 title 'overall (bound)'"));
    }
    s.push_str("plot ");
    s.push_str(&series.join(", \\\n     "));
    s.push('\n');
    s
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.gp` into `dir`.
pub fn emit_results(
    points: &[SerPoint],
    spec: &ExperimentSpec,
    dir: &Path,
    stem: &str,
) -> Result<EmittedFiles, HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::Config("no sweep points to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let files = EmittedFiles {
        csv: dir.join(format!("{stem}.csv")),
        json: dir.join(format!("{stem}.json")),
        plot: dir.join(format!("{stem}.gp")),
    };
    fs::write(&files.csv, csv_text(points)?).map_err(|e| HarnessError::io(&files.csv, e))?;

    let system = spec.system()?;
    let meta = RunMetadata {
        run_id: run_id(spec),
        seed: spec.seed,
        spec: spec.clone(),
        constellation: ConstellationExport::new(&system.constellation, Some(&system.bit_map)),
        symbols_per_channel: spec.miso.as_ref().map_or(1, |m| m.symbols_per_channel),
        channel_sharing: "trial t uses the same channel realization at every transmit power".into(),
        points: points.to_vec(),
        raw_bounds: analytic_bounds(spec)?,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(&files.json, json).map_err(|e| HarnessError::io(&files.json, e))?;

    let has_bounds = points.iter().all(|p| !p.bound_overall.is_nan());
    fs::write(&files.plot, plot_script(stem, has_bounds)).map_err(|e| HarnessError::io(&files.plot, e))?;
    Ok(files)
}

/// Parses a CSV written by [`emit_results`].
pub fn read_csv(path: &Path) -> Result<Vec<SerPoint>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| HarnessError::Config(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(HarnessError::Config(format!("unexpected columns {headers:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::Config(e.to_string()))?;
        let f = |i: usize| -> Result<f64, HarnessError> {
            rec[i].parse::<f64>().map_err(|e| HarnessError::Config(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        let trials = rec[7]
            .parse::<u64>()
            .map_err(|e| HarnessError::Config(format!("column trials: {e}")))?;
        out.push(SerPoint::from_columns(f(0)?, [f(1)?, f(2)?, f(3)?], [f(4)?, f(5)?, f(6)?], trials));
    }
    Ok(out)
}
