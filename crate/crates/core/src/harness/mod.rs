//! Orchestration: configuration, the sweep, series, agreement and theory
//! pipelines, artifact files and plots.

pub mod agreement;
pub mod config;
pub mod plot;
pub mod series;
pub mod sweep;
pub mod theory;

use std::path::Path;

use crate::error::{Error, Result};

pub use agreement::{run_agreement_pipeline, AgreementReport};
pub use config::{AnalysisOptions, ExperimentConfig, GridSpec, OutputOptions, TableInputs, TheoryOptions};
pub use plot::{emit_plot, Overlay, PlotStyle, Scatter};
pub use series::{run_spurious_series, Knob, SeriesReport};
pub use sweep::{
    analyze_results, gen_data, load_bundle, plot_results, run_sweep, run_sweep_pipeline, write_sweep_bundle, SweepBundle,
};
pub use theory::{run_theory, TableFormat, TheorySummary};

/// Writes to a hidden temporary sibling, then renames over `path`, so readers
/// never observe a truncated file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Buffers a writer callback and stores the result atomically.
pub fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

pub(crate) fn read_input(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
