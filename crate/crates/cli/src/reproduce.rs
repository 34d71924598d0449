//! Pinned sweeps behind the figure reproductions.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::json;

use crate::config::{RunConfig, SweepSpec};
use crate::render::{heatmap_svg, row_means, spectrum_csv, spectrum_svg, Surface, Table};
use crate::sweep::{run_sweep, SweepReport};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Effective index against p/w and frequency.
    Fig1c,
    /// Normal-incidence absorption against p and frequency.
    Fig1d,
    /// Gaussian-beam field maps on the finite array.
    Fields,
    /// Absorption maps of the composite and bare-wedge cells.
    Fig4,
}

pub const FIG1C: &str = r#"
[sweep]
mode = "tunnel-index"
p_over_w = [0.0, 0.05, 0.1, 0.15, 0.2, 0.24, 0.3, 0.33, 0.35]
frequencies = [500, 1000, 1500, 2000, 2500, 3000, 3500, 4000]
"#;

pub const FIG1D: &str = r#"
[sweep]
p_range_mm = [0.0, 3.0, 0.25]
frequency_range = [500, 4000, 50]
angles = [0]
"#;

pub const FIELDS_BY_FREQUENCY: &str = r#"
[sweep]
mode = "finite-array"
frequencies = [500, 1000, 2000, 4000]
angles = [30]
dump_fields = true
"#;

pub const FIELDS_BY_ANGLE: &str = r#"
[sweep]
mode = "finite-array"
frequencies = [1000]
angles = [0, 15, 30, 45, 60, 75]
dump_fields = true
"#;

pub const FIG4_COMPOSITE: &str = r#"
[sweep]
frequency_range = [500, 4000, 250]
angle_range = [0, 75, 15]
"#;

pub const FIG4_BARE: &str = r#"
[sweep]
mode = "bare-wedge"
frequency_range = [500, 4000, 250]
angle_range = [0, 75, 15]
"#;

fn spec(text: &str, out: PathBuf, workers: usize) -> Result<SweepSpec, CliError> {
    let mut spec = RunConfig::parse(text)?.resolve()?;
    spec.out = out;
    spec.workers = workers;
    Ok(spec)
}

fn plots(report: &SweepReport, dir: &Path, stem: &str) -> Result<Surface, CliError> {
    let surface = Surface::from_table(&Table::parse(&fs::read_to_string(&report.table)?)?)?;
    fs::write(dir.join(format!("{stem}_heatmap.svg")), heatmap_svg(&surface))?;
    fs::write(dir.join(format!("{stem}_spectrum.svg")), spectrum_svg(&surface))?;
    fs::write(dir.join(format!("{stem}_spectrum.csv")), spectrum_csv(&surface))?;
    Ok(surface)
}

/// Runs the pinned sweeps for `figure` under `out/<figure>/` and returns the
/// number of failed grid points.
pub fn reproduce(figure: Figure, out: &Path, workers: usize) -> Result<usize, CliError> {
    let name = figure.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let dir = out.join(name);
    fs::create_dir_all(&dir)?;
    let mut failed = 0;
    let mut run = |text: &str, sub: &str| -> Result<SweepReport, CliError> {
        let report = run_sweep(&spec(text, dir.join(sub), workers)?)?;
        failed += report.failures().count();
        Ok(report)
    };
    match figure {
        Figure::Fig1c => {
            let r = run(FIG1C, "index")?;
            plots(&r, &dir, "fig1c")?;
        }
        Figure::Fig1d => {
            let r = run(FIG1D, "absorption")?;
            plots(&r, &dir, "fig1d")?;
        }
        Figure::Fields => {
            let a = run(FIELDS_BY_FREQUENCY, "by_frequency")?;
            let b = run(FIELDS_BY_ANGLE, "by_angle")?;
            plots(&a, &dir, "beam_by_frequency")?;
            plots(&b, &dir, "beam_by_angle")?;
        }
        Figure::Fig4 => {
            let a = run(FIG4_COMPOSITE, "composite")?;
            let b = run(FIG4_BARE, "bare_wedge")?;
            let sa = plots(&a, &dir, "fig4a")?;
            let sb = plots(&b, &dir, "fig4b")?;
            let mean = |r: &SweepReport| {
                let v = r.absorption();
                v.iter().map(|(_, a)| a.alpha).sum::<f64>() / v.len().max(1) as f64
            };
            let summary = json!({
                "composite_mean_alpha": mean(&a),
                "bare_wedge_mean_alpha": mean(&b),
                "composite_band_mean_by_angle": row_means(&sa),
                "bare_wedge_band_mean_by_angle": row_means(&sb),
            });
            let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
            fs::write(dir.join("summary.json"), text)?;
        }
    }
    Ok(failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_configs_resolve() {
        let sizes = [
            (FIG1C, 72),
            (FIG1D, 923),
            (FIELDS_BY_FREQUENCY, 4),
            (FIELDS_BY_ANGLE, 6),
            (FIG4_COMPOSITE, 90),
            (FIG4_BARE, 90),
        ];
        for (text, n) in sizes {
            assert_eq!(spec(text, PathBuf::from("x"), 1).unwrap().len(), n);
        }
    }
}
