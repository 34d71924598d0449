//! TOML run configuration and its resolution into a [`SweepSpec`].
//!
//! Lengths are millimetres, frequencies hertz, angles degrees. Unknown keys
//! anywhere are rejected.

use std::path::{Path, PathBuf};

use metaporous::analysis::UniformRange;
use metaporous::geometry::{GeometryConfig, UnitCellGeometry};
use metaporous::materials::MaterialsConfig;
use metaporous::solver::{
    Backing, BeamSpec, LinearSolveOptions, LinearSolverKind, MaterialSet, Mode, PmlSettings, SimulationConfig,
    Termination,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Grid spacing used by beam runs unless the config sets one.
pub const FINITE_ARRAY_SPACING_MM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SweepMode {
    #[default]
    #[serde(rename = "unit-cell", alias = "UNIT_CELL")]
    UnitCell,
    #[serde(rename = "finite-array", alias = "FINITE_ARRAY")]
    FiniteArray,
    #[serde(rename = "tunnel-index", alias = "TUNNEL_INDEX")]
    TunnelIndex,
    #[serde(rename = "bare-wedge", alias = "BARE_WEDGE")]
    BareWedge,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub spacing_mm: Option<f64>,
    pub air_gap_mm: Option<f64>,
    pub pml_cells: Option<usize>,
    pub pml_order: Option<u32>,
    pub pml_reflection: Option<f64>,
    pub linear_solver: Option<LinearSolverKind>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Closure below unit cells; `rigid` (default) or `pml`.
    pub backing: Option<Backing>,
    /// Far end of index tunnels; `pml` (default) or `rigid`.
    pub termination: Option<Termination>,
    pub beam_waist_wavelengths: Option<f64>,
    pub beam_components: Option<usize>,
    pub array_units: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub mode: SweepMode,
    pub frequencies: Option<Vec<f64>>,
    /// `[start, stop, step]`.
    pub frequency_range: Option<[f64; 3]>,
    pub angles: Option<Vec<f64>>,
    pub angle_range: Option<[f64; 3]>,
    pub p_mm: Option<Vec<f64>>,
    pub p_range_mm: Option<[f64; 3]>,
    pub p_over_w: Option<Vec<f64>>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub dump_fields: bool,
}

/// Fully resolved sweep: every grid axis expanded, units in SI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    /// One entry per swept protrusion length, in sweep order.
    pub geometries: Vec<UnitCellGeometry>,
    /// True when the sweep varies p; tables then gain a `p_over_w` column.
    pub vary_p: bool,
    pub frequencies: Vec<f64>,
    pub angles: Vec<f64>,
    pub simulation: SimulationConfig,
    pub materials: MaterialSet,
    pub backing: Backing,
    pub termination: Termination,
    pub beam: BeamSpec,
    pub array_units: usize,
    pub workers: usize,
    pub out: PathBuf,
    pub dump_fields: bool,
}

impl SweepSpec {
    /// Number of solves.
    pub fn len(&self) -> usize {
        let angles = if self.mode == SweepMode::TunnelIndex { 1 } else { self.angles.len() };
        self.geometries.len() * self.frequencies.len() * angles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.frequencies.is_empty() || self.angles.is_empty() || self.geometries.is_empty() {
            return Err(CliError::Config("sweep needs at least one frequency, angle and geometry".into()));
        }
        if self.frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(CliError::Config("frequencies must be positive".into()));
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return Err(CliError::Config("angles must be finite".into()));
        }
        if self.mode == SweepMode::TunnelIndex && self.angles.iter().any(|&a| a != 0.0) {
            return Err(CliError::Config("tunnel-index sweeps are at normal incidence; drop the angle list".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if self.array_units == 0 {
            return Err(CliError::Config("array_units must be at least 1".into()));
        }
        for g in &self.geometries {
            g.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.simulation.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn resolve(&self) -> Result<SweepSpec, CliError> {
        let cfg = |e: metaporous::Error| CliError::Config(e.to_string());
        let base = self.geometry.resolve().map_err(cfg)?;
        let (fluid, porous) = self.materials.resolve().map_err(cfg)?;
        let sw = &self.sweep;
        let sv = &self.solver;

        let frequencies = axis("frequency", &sw.frequencies, &sw.frequency_range)?
            .ok_or_else(|| CliError::Config("sweep needs `frequencies` or `frequency_range`".into()))?;
        let angles = match axis("angle", &sw.angles, &sw.angle_range)? {
            Some(a) => a,
            None if sw.mode == SweepMode::TunnelIndex => vec![0.0],
            None => return Err(CliError::Config("sweep needs `angles` or `angle_range`".into())),
        };
        let (geometries, vary_p) = geometries(base, sw)?;

        let spacing_mm = match (sv.spacing_mm, sw.mode) {
            (Some(h), _) => Some(h),
            (None, SweepMode::FiniteArray) => Some(FINITE_ARRAY_SPACING_MM),
            (None, _) => None,
        };
        let defaults = SimulationConfig::default();
        let lin = LinearSolveOptions::default();
        let pml = PmlSettings::default();
        let simulation = SimulationConfig {
            mode: if sw.mode == SweepMode::FiniteArray { Mode::FiniteArray } else { Mode::UnitCell },
            spacing: spacing_mm.map(|h| h * 1e-3),
            air_gap: sv.air_gap_mm.map_or(defaults.air_gap, |g| g * 1e-3),
            pml: PmlSettings {
                cells: sv.pml_cells.unwrap_or(pml.cells),
                order: sv.pml_order.unwrap_or(pml.order),
                reflection: sv.pml_reflection.unwrap_or(pml.reflection),
            },
            linear: LinearSolveOptions {
                kind: sv.linear_solver.unwrap_or(lin.kind),
                tolerance: sv.tolerance.unwrap_or(lin.tolerance),
                max_iterations: sv.max_iterations.unwrap_or(lin.max_iterations),
            },
            max_frequency: frequencies.iter().copied().fold(f64::MIN, f64::max),
        };
        let beam_default = BeamSpec::default();
        let spec = SweepSpec {
            mode: sw.mode,
            geometries,
            vary_p,
            frequencies,
            angles,
            simulation,
            materials: MaterialSet { fluid, porous },
            backing: sv.backing.unwrap_or_default(),
            termination: sv.termination.unwrap_or_default(),
            beam: BeamSpec {
                waist_wavelengths: sv.beam_waist_wavelengths.unwrap_or(beam_default.waist_wavelengths),
                components: sv.beam_components.unwrap_or(beam_default.components),
            },
            array_units: sv.array_units.unwrap_or(30),
            workers: sw.workers.unwrap_or(1),
            out: sw.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            dump_fields: sw.dump_fields,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn axis(name: &str, list: &Option<Vec<f64>>, range: &Option<[f64; 3]>) -> Result<Option<Vec<f64>>, CliError> {
    match (list, range) {
        (Some(_), Some(_)) => Err(CliError::Config(format!("give either a {name} list or a {name} range, not both"))),
        (Some(v), None) if v.is_empty() => Err(CliError::Config(format!("{name} list is empty"))),
        (Some(v), None) => Ok(Some(v.clone())),
        (None, Some([a, b, s])) => {
            let r = UniformRange::new(*a, *b, *s).map_err(|e| CliError::Config(format!("{name} range: {e}")))?;
            Ok(Some(r.values()))
        }
        (None, None) => Ok(None),
    }
}

fn geometries(base: UnitCellGeometry, sw: &SweepSection) -> Result<(Vec<UnitCellGeometry>, bool), CliError> {
    let lengths = match (&sw.p_mm, &sw.p_range_mm, &sw.p_over_w) {
        (None, None, None) => return Ok((vec![base], false)),
        (Some(v), None, None) => v.iter().map(|p| p * 1e-3).collect::<Vec<_>>(),
        (None, Some(_), None) => axis("p", &None, &sw.p_range_mm)?
            .unwrap_or_default()
            .into_iter()
            .map(|p| p * 1e-3)
            .collect(),
        (None, None, Some(r)) => r.iter().map(|r| r * base.tunnel_width).collect(),
        _ => return Err(CliError::Config("give only one of p_mm, p_range_mm, p_over_w".into())),
    };
    if lengths.is_empty() {
        return Err(CliError::Config("protrusion list is empty".into()));
    }
    let geoms = lengths
        .into_iter()
        .map(|p| UnitCellGeometry { protrusion_length: p, ..base })
        .collect();
    Ok((geoms, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves() {
        let spec = RunConfig::parse("[sweep]\nfrequencies = [1000]\nangles = [0]\n").unwrap().resolve().unwrap();
        assert_eq!(spec.len(), 1);
        assert_eq!(spec.geometries[0], UnitCellGeometry::default());
        assert!(!spec.vary_p);
    }

    #[test]
    fn ranges_expand_inclusively() {
        let text = "[sweep]\nfrequency_range = [500, 4000, 50]\nangles = [0]\np_range_mm = [0, 3, 0.25]\n";
        let spec = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(spec.frequencies.len(), 71);
        assert_eq!(spec.geometries.len(), 13);
        assert_eq!(spec.len(), 923);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(RunConfig::parse("[sweep]\nfrequencies = [1000]\nangles = [0]\ncolour = 1\n").is_err());
        assert!(RunConfig::parse("[solver]\nspacing = 0.25\n").is_err());
        assert!(RunConfig::parse("[extras]\n").is_err());
    }

    #[test]
    fn lengths_are_millimetres() {
        let text = "[geometry]\nh_mm = 75\n[solver]\nspacing_mm = 0.2\n[sweep]\nfrequencies = [1000]\nangles = [0]\n";
        let spec = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert!((spec.geometries[0].tunnel_height - 0.075).abs() < 1e-12);
        assert_eq!(spec.simulation.spacing, Some(0.2e-3));
    }

    #[test]
    fn modes_accept_both_spellings() {
        for name in ["bare-wedge", "BARE_WEDGE"] {
            let text = format!("[sweep]\nmode = \"{name}\"\nfrequencies = [1000]\nangles = [0]\n");
            assert_eq!(RunConfig::parse(&text).unwrap().resolve().unwrap().mode, SweepMode::BareWedge);
        }
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        for text in [
            "[sweep]\nangles = [0]\n",
            "[sweep]\nfrequencies = []\nangles = [0]\n",
            "[sweep]\nfrequency_range = [500, 400, 50]\nangles = [0]\n",
            "[sweep]\nfrequency_range = [500, 1000, 0]\nangles = [0]\n",
            "[sweep]\nfrequencies = [1000]\nfrequency_range = [500, 1000, 100]\nangles = [0]\n",
            "[sweep]\nmode = \"tunnel-index\"\nfrequencies = [1000]\nangles = [30]\n",
            "[sweep]\nfrequencies = [1000]\nangles = [0]\nworkers = 0\n",
            "[solver]\npml_cells = 2\n[sweep]\nfrequencies = [1000]\nangles = [0]\n",
            "[geometry]\np_mm = 5\n[sweep]\nfrequencies = [1000]\nangles = [0]\n",
        ] {
            assert!(RunConfig::parse(text).and_then(|c| c.resolve()).is_err(), "{text}");
        }
    }

    #[test]
    fn finite_array_defaults_to_coarser_grid() {
        let text = "[sweep]\nmode = \"finite-array\"\nfrequencies = [1000]\nangles = [30]\n";
        let spec = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(spec.simulation.spacing, Some(0.5e-3));
        assert_eq!(spec.simulation.mode, Mode::FiniteArray);
    }
}
