//! Experiment harness: declarative configs in, CSV tables (and optional SVG
//! plots) out.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;

use std::path::{Path, PathBuf};

use log::warn;
use symquad_core::dynamics::write_trajectory_csv;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::{run, RunError, RunOutput};
pub use table::ResultTable;

use crate::plot::{emit_plot, PlotKind};

/// Plot style used for each experiment's table.
pub fn plot_kind(experiment: Experiment) -> PlotKind {
    match experiment {
        Experiment::RandomSweep | Experiment::Compare | Experiment::RegularitySweep => PlotKind::LogLog,
        _ => PlotKind::LogY,
    }
}

/// Writes `<outdir>/<experiment>/<name>.csv`, its SVG and any trajectory
/// CSVs. Returns the written paths.
pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput, outdir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let dir = outdir.join(cfg.experiment().id());
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let csv = dir.join(format!("{}.csv", cfg.name()));
    out.table.write_csv(&csv)?;
    written.push(csv);
    if cfg.plot() {
        match emit_plot(&out.table, plot_kind(cfg.experiment())) {
            Some(svg) => {
                let path = dir.join(format!("{}.svg", cfg.name()));
                std::fs::write(&path, svg)?;
                written.push(path);
            }
            None => warn!("table {} is empty; no plot written", cfg.name()),
        }
    }
    for t in &out.trajectories {
        let path = dir.join(format!("{}.csv", t.name));
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write_trajectory_csv(&t.points, file)?;
        written.push(path);
    }
    Ok(written)
}

/// Loads, runs and writes one config file. `outdir` overrides the
/// configured output directory.
pub fn run_config_file(path: &Path, outdir: Option<&Path>) -> Result<(RunOutput, Vec<PathBuf>), RunError> {
    let cfg = ExperimentConfig::load(path).map_err(|e| RunError::Config(e.to_string()))?;
    let out = run(&cfg)?;
    let dir = outdir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir());
    let written = write_outputs(&cfg, &out, &dir)?;
    Ok((out, written))
}
