//! Frequency-domain Helmholtz solver on a cell-centred grid.

pub mod assemble;
pub mod finite_array;
pub mod linear;
pub mod pml;
pub mod source;
pub mod tunnel;
pub mod unit_cell;

use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{FluidProperties, PorousMaterialParams};

pub use assemble::{assemble_system, AssembledSystem, BoundarySpec, Media, SparseMatrix, XBoundary};
pub use finite_array::{solve_finite_array, ArrayLayout, BeamSpec};
pub use linear::{solve_linear_system, LinearSolution, LinearSolveOptions, LinearSolverKind};
pub use pml::{Layer, PmlSettings, Stretch};
pub use source::{discrete_ky, GaussianBeam, Incident, PlaneWave};
pub use tunnel::{solve_tunnel, Termination, TunnelField};
pub use unit_cell::{solve_periodic_structure, solve_unit_cell, solve_unit_cell_subtraction, Backing};

/// Lowest and highest frequency the default grid is trusted for.
pub const FREQUENCY_RANGE: (f64, f64) = (100.0, 8000.0);
/// Largest accepted incidence angle magnitude, degrees.
pub const MAX_ANGLE_DEG: f64 = 85.0;
/// Default grid spacing cap.
pub const DEFAULT_SPACING: f64 = 0.25e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    UnitCell,
    FiniteArray,
}

/// Everything about a solve that is not geometry, materials, f or θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub mode: Mode,
    /// Grid spacing (m); `None` picks `min(λ_min/40, 0.25 mm)`.
    pub spacing: Option<f64>,
    /// Minimum mouth-to-measurement distance (m); raised to λ/2 when shorter.
    pub air_gap: f64,
    pub pml: PmlSettings,
    pub linear: LinearSolveOptions,
    /// Highest frequency of the surrounding sweep, used for the default spacing.
    pub max_frequency: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::UnitCell,
            spacing: None,
            air_gap: 0.0,
            pml: PmlSettings::default(),
            linear: LinearSolveOptions::default(),
            max_frequency: 4000.0,
        }
    }
}

impl SimulationConfig {
    pub fn spacing(&self, fluid: &FluidProperties) -> f64 {
        self.spacing
            .unwrap_or_else(|| (fluid.wavelength(self.max_frequency) / 40.0).min(DEFAULT_SPACING))
    }

    pub fn validate(&self) -> Result<()> {
        if self.pml.cells < 8 {
            return Err(Error::Validation(format!("PML must be at least 8 cells thick, got {}", self.pml.cells)));
        }
        if !(self.pml.reflection > 0.0 && self.pml.reflection < 1.0) {
            return Err(Error::Validation("PML target reflection must lie in (0, 1)".into()));
        }
        if let Some(h) = self.spacing {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Validation(format!("grid spacing must be positive, got {h}")));
            }
        }
        if !(self.air_gap >= 0.0) {
            return Err(Error::Validation("air gap must be non-negative".into()));
        }
        if !(self.linear.tolerance > 0.0) {
            return Err(Error::Validation("solver tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Fluid and porous material used by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSet {
    pub fluid: FluidProperties,
    pub porous: PorousMaterialParams,
}

impl Default for MaterialSet {
    fn default() -> Self {
        Self {
            fluid: FluidProperties::standard_air(),
            porous: PorousMaterialParams::melamine(),
        }
    }
}

/// Solved pressure on the full grid.
///
/// In the scattered-field region `pressure` holds the scattered field only;
/// elsewhere it is the total field. Rigid cells hold zero.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: [f64; 2],
    pub pressure: Vec<Complex64>,
    pub scattered: Vec<bool>,
    pub absorbing: Vec<bool>,
    pub rigid: Vec<bool>,
    pub frequency: f64,
    pub theta_deg: f64,
    pub incident: Incident,
    /// Horizontal period for Floquet runs.
    pub period: Option<f64>,
    /// Phase reference plane (the structure mouth).
    pub y_ref: f64,
    /// Default measurement line.
    pub y_measure: f64,
    pub residual: f64,
    pub assembly_time: Duration,
    pub solve_time: Duration,
}

impl FieldSolution {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.pressure[self.index(i, j)]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.spacing,
            self.origin[1] + (j as f64 + 0.5) * self.spacing,
        ]
    }

    /// Row whose centre is closest to height `y`.
    pub fn row_at(&self, y: f64) -> Option<usize> {
        let j = ((y - self.origin[1]) / self.spacing - 0.5).round();
        (j >= 0.0 && (j as usize) < self.ny).then_some(j as usize)
    }

    /// Scattered field everywhere (total minus incident in the total-field region).
    pub fn scattered_field(&self) -> Vec<Complex64> {
        let mut out = self.pressure.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.index(i, j);
                if !self.scattered[c] && !self.rigid[c] {
                    let [x, y] = self.cell_center(i, j);
                    out[c] -= self.incident.at(x, y);
                }
            }
        }
        out
    }

    /// Total field everywhere (scattered plus incident in the scattered-field region).
    pub fn total_field(&self) -> Vec<Complex64> {
        let mut out = self.pressure.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.index(i, j);
                if self.scattered[c] && !self.rigid[c] {
                    let [x, y] = self.cell_center(i, j);
                    out[c] += self.incident.at(x, y);
                }
            }
        }
        out
    }

    /// Text dump: a small header followed by `i,j,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# nx={} ny={} spacing_m={} f_hz={} theta_deg={} convention=exp(+iwt)\ni,j,re_p,im_p\n",
            self.nx, self.ny, self.spacing, self.frequency, self.theta_deg
        );
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.at(i, j);
                s.push_str(&format!("{i},{j},{:e},{:e}\n", p.re, p.im));
            }
        }
        s
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.pressure.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Solver {
                message: "field contains non-finite values".into(),
                residual: self.residual,
            });
        }
        Ok(())
    }
}

/// Shared guard on the (f, θ) inputs.
pub(crate) fn check_inputs(f: f64, theta_deg: f64) -> Result<()> {
    let (lo, hi) = FREQUENCY_RANGE;
    if !(f >= lo && f <= hi) {
        return Err(Error::Validation(format!("frequency {f} Hz outside [{lo}, {hi}] Hz")));
    }
    if !(theta_deg.abs() <= MAX_ANGLE_DEG) {
        return Err(Error::Validation(format!("|θ| = {} exceeds {MAX_ANGLE_DEG} degrees", theta_deg.abs())));
    }
    Ok(())
}

/// Cell count covering at least `len`.
pub(crate) fn cells_for(len: f64, spacing: f64) -> usize {
    (len / spacing - 1e-9).ceil().max(0.0) as usize
}
