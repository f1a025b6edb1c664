//! Per-run rows, sweep summary and file emission.
//!
//! All SNRs are in dB; BERs are ratios (an upper bound `1/bits` when no
//! error was counted). Per-run min/max are taken over the x and y
//! tributaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::run::Mode;
use crate::ExperimentError;

/// `|model − sim|` threshold for the agreement share.
pub const AGREEMENT_DB: f64 = 0.2;
/// Slack allowed when counting a run as conservative (`model ≤ sim + slack`).
pub const CONSERVATISM_SLACK_DB: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: usize,
    pub seed: u64,
    pub snr_model_x_db: Option<f64>,
    pub snr_model_y_db: Option<f64>,
    pub snr_sim_x_db: Option<f64>,
    pub snr_sim_y_db: Option<f64>,
    /// model − sim
    pub delta_x_db: Option<f64>,
    pub delta_y_db: Option<f64>,
    pub snr_min_model_db: Option<f64>,
    pub snr_max_model_db: Option<f64>,
    pub snr_min_sim_db: Option<f64>,
    pub snr_max_sim_db: Option<f64>,
    pub ber_sim_x: Option<f64>,
    pub ber_sim_y: Option<f64>,
    pub converged: Option<bool>,
    pub wall_time_model_s: Option<f64>,
    pub wall_time_sim_s: Option<f64>,
    pub status: String,
}

fn min_max(a: Option<f64>, b: Option<f64>) -> (Option<f64>, Option<f64>) {
    match (a, b) {
        (Some(a), Some(b)) => (Some(a.min(b)), Some(a.max(b))),
        _ => (None, None),
    }
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

impl RunReport {
    pub fn empty(run_id: usize, seed: u64) -> Self {
        Self {
            run_id,
            seed,
            snr_model_x_db: None,
            snr_model_y_db: None,
            snr_sim_x_db: None,
            snr_sim_y_db: None,
            delta_x_db: None,
            delta_y_db: None,
            snr_min_model_db: None,
            snr_max_model_db: None,
            snr_min_sim_db: None,
            snr_max_sim_db: None,
            ber_sim_x: None,
            ber_sim_y: None,
            converged: None,
            wall_time_model_s: None,
            wall_time_sim_s: None,
            status: String::new(),
        }
    }

    pub fn set_model(&mut self, x_db: f64, y_db: f64) {
        self.snr_model_x_db = Some(x_db);
        self.snr_model_y_db = Some(y_db);
    }

    pub fn set_sim(&mut self, x_db: f64, y_db: f64, ber_x: f64, ber_y: f64) {
        self.snr_sim_x_db = Some(x_db);
        self.snr_sim_y_db = Some(y_db);
        self.ber_sim_x = Some(ber_x);
        self.ber_sim_y = Some(ber_y);
    }

    /// Fills the derived columns from the SNR columns.
    pub fn finish(&mut self) {
        self.delta_x_db = diff(self.snr_model_x_db, self.snr_sim_x_db);
        self.delta_y_db = diff(self.snr_model_y_db, self.snr_sim_y_db);
        (self.snr_min_model_db, self.snr_max_model_db) = min_max(self.snr_model_x_db, self.snr_model_y_db);
        (self.snr_min_sim_db, self.snr_max_sim_db) = min_max(self.snr_sim_x_db, self.snr_sim_y_db);
    }

    /// Both deltas, when both paths succeeded and the equalizer converged.
    pub fn compared_deltas(&self) -> Option<[f64; 2]> {
        if self.converged != Some(true) {
            return None;
        }
        Some([self.delta_x_db?, self.delta_y_db?])
    }

    /// The delta with the larger magnitude, sign kept.
    pub fn worst_delta_db(&self) -> Option<f64> {
        let [x, y] = [self.delta_x_db?, self.delta_y_db?];
        Some(if x.abs() >= y.abs() { x } else { y })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_runs: usize,
    pub n_model_ok: usize,
    pub n_sim_ok: usize,
    pub n_converged: usize,
    /// Runs with both paths available and a converged equalizer.
    pub n_compared: usize,
    pub min_model_db: Option<f64>,
    pub max_model_db: Option<f64>,
    pub min_sim_db: Option<f64>,
    pub max_sim_db: Option<f64>,
    pub spread_model_db: Option<f64>,
    pub spread_sim_db: Option<f64>,
    pub max_abs_delta_db: Option<f64>,
    /// Share of compared runs with both `|delta| < 0.2 dB`.
    pub share_within_0_2_db: Option<f64>,
    /// Share of compared runs with `model ≤ sim + 0.05 dB` on both tributaries.
    pub conservatism_rate: Option<f64>,
    pub mean_wall_time_model_s: Option<f64>,
    pub mean_wall_time_sim_s: Option<f64>,
    /// Mean analytic wall time over mean simulation wall time.
    pub model_to_sim_time_ratio: Option<f64>,
}

fn fold(v: impl Iterator<Item = f64>, f: fn(f64, f64) -> f64) -> Option<f64> {
    v.reduce(f)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn share<T>(items: &[T], pred: impl Fn(&T) -> bool) -> Option<f64> {
    (!items.is_empty()).then(|| items.iter().filter(|i| pred(i)).count() as f64 / items.len() as f64)
}

pub fn summarize(reports: &[RunReport]) -> Summary {
    let compared: Vec<[f64; 2]> = reports.iter().filter_map(RunReport::compared_deltas).collect();
    let min_model_db = fold(reports.iter().filter_map(|r| r.snr_min_model_db), f64::min);
    let max_model_db = fold(reports.iter().filter_map(|r| r.snr_max_model_db), f64::max);
    let min_sim_db = fold(reports.iter().filter_map(|r| r.snr_min_sim_db), f64::min);
    let max_sim_db = fold(reports.iter().filter_map(|r| r.snr_max_sim_db), f64::max);
    let mean_wall_time_model_s = mean(reports.iter().filter_map(|r| r.wall_time_model_s));
    let mean_wall_time_sim_s = mean(reports.iter().filter_map(|r| r.wall_time_sim_s));
    Summary {
        n_runs: reports.len(),
        n_model_ok: reports.iter().filter(|r| r.snr_model_x_db.is_some()).count(),
        n_sim_ok: reports.iter().filter(|r| r.snr_sim_x_db.is_some()).count(),
        n_converged: reports.iter().filter(|r| r.converged == Some(true)).count(),
        n_compared: compared.len(),
        min_model_db,
        max_model_db,
        min_sim_db,
        max_sim_db,
        spread_model_db: diff(max_model_db, min_model_db),
        spread_sim_db: diff(max_sim_db, min_sim_db),
        max_abs_delta_db: fold(compared.iter().flatten().map(|d| d.abs()), f64::max),
        share_within_0_2_db: share(&compared, |d| d.iter().all(|v| v.abs() < AGREEMENT_DB)),
        conservatism_rate: share(&compared, |d| d.iter().all(|v| *v <= CONSERVATISM_SLACK_DB)),
        mean_wall_time_model_s,
        mean_wall_time_sim_s,
        model_to_sim_time_ratio: match (mean_wall_time_model_s, mean_wall_time_sim_s) {
            (Some(m), Some(s)) if s > 0.0 => Some(m / s),
            _ => None,
        },
    }
}

/// Provenance written as `#` lines ahead of every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub command: Mode,
    pub config: serde_json::Value,
    /// Seconds since the Unix epoch; `None` makes the files reproducible
    /// byte for byte, which also blanks the wall-time columns.
    pub generated_unix_s: Option<u64>,
}

impl Metadata {
    pub fn new(command: Mode, config: &impl Serialize, timestamp: bool) -> Self {
        Self {
            tool: format!("polsnr {}", env!("CARGO_PKG_VERSION")),
            command,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            generated_unix_s: timestamp.then(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            }),
        }
    }

    pub fn deterministic(&self) -> bool {
        self.generated_unix_s.is_none()
    }

    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# tool: {}", self.tool)?;
        writeln!(w, "# command: {}", serde_json::to_string(&self.command)?.trim_matches('"'))?;
        if let Some(t) = self.generated_unix_s {
            writeln!(w, "# generated_unix_s: {t}")?;
        }
        writeln!(w, "# config: {}", self.config)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Io(format!("{}: {e}", path.display()))
}

fn with_metadata<T: Serialize>(
    path: &Path,
    meta: &Metadata,
    rows: impl Iterator<Item = T>,
) -> Result<(), ExperimentError> {
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    meta.write(&mut f).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One row per run in [`RunReport`] column order.
pub fn emit_csv(reports: &[RunReport], path: &Path, meta: &Metadata) -> Result<(), ExperimentError> {
    if reports.is_empty() {
        return Err(ExperimentError::Io("no runs to write".into()));
    }
    with_metadata(
        path,
        meta,
        reports.iter().map(|r| {
            let mut r = r.clone();
            if meta.deterministic() {
                r.wall_time_model_s = None;
                r.wall_time_sim_s = None;
            }
            r
        }),
    )
}

/// The series needed to redraw the min/max SNR per run and the per-run
/// model − sim difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub run_id: usize,
    pub snr_min_model_db: Option<f64>,
    pub snr_max_model_db: Option<f64>,
    pub snr_min_sim_db: Option<f64>,
    pub snr_max_sim_db: Option<f64>,
    /// Larger-magnitude of the x and y deltas, sign kept.
    pub delta_db: Option<f64>,
}

pub fn emit_plot_data(reports: &[RunReport], path: &Path, meta: &Metadata) -> Result<(), ExperimentError> {
    if reports.is_empty() {
        return Err(ExperimentError::Io("no runs to write".into()));
    }
    with_metadata(
        path,
        meta,
        reports.iter().map(|r| PlotRow {
            run_id: r.run_id,
            snr_min_model_db: r.snr_min_model_db,
            snr_max_model_db: r.snr_max_model_db,
            snr_min_sim_db: r.snr_min_sim_db,
            snr_max_sim_db: r.snr_max_sim_db,
            delta_db: r.worst_delta_db(),
        }),
    )
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| ExperimentError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

/// Reads a runs CSV back, skipping the metadata lines.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunReport>, ExperimentError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// The CSV text without its `#` lines.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}
