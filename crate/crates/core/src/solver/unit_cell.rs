//! Floquet-periodic unit-cell solves under plane-wave incidence.
//!
//! Vertical layout, bottom to top: optional PML backing, the structure from
//! `y = 0` to its mouth `y_ref`, an air gap holding the TF/SF injection line
//! (half way) and the measurement line (at the top), a buffer, and the PML.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assemble::{assemble_system, BoundarySpec, Media, XBoundary};
use super::linear::solve_linear_system;
use super::pml::{Layer, Stretch};
use super::source::{Incident, PlaneWave};
use super::{cells_for, check_inputs, FieldSolution, MaterialSet, SimulationConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_unit_cell, rasterize, BoundingBox, Material, MaterialMap, ShapeList, UnitCellGeometry};

/// What closes the domain below `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backing {
    /// Hard wall at `y = 0`.
    #[default]
    Rigid,
    /// Air and an absorbing layer below `y = 0` (open half-space).
    Pml,
}

/// Row bookkeeping for one periodic solve.
#[derive(Debug, Clone, Copy)]
struct Layout {
    spacing: f64,
    nx: usize,
    ny: usize,
    /// Rows below `y = 0`.
    below: usize,
    /// First row above the mouth.
    mouth: usize,
    /// First scattered-field row.
    injection: usize,
    measure: usize,
    pml_bottom: Option<Layer>,
    pml_top: Layer,
}

impl Layout {
    fn y_min(&self) -> f64 {
        -(self.below as f64) * self.spacing
    }

    fn row_center(&self, j: usize) -> f64 {
        self.y_min() + (j as f64 + 0.5) * self.spacing
    }

    fn domain(&self) -> BoundingBox {
        BoundingBox::new(
            [0.0, self.y_min()],
            [self.nx as f64 * self.spacing, self.y_min() + self.ny as f64 * self.spacing],
        )
    }

    fn stretch_y(&self, omega: f64) -> Stretch {
        Stretch::new(self.ny, omega, self.pml_bottom, Some(self.pml_top))
    }
}

fn layout(
    cfg: &SimulationConfig,
    mats: &MaterialSet,
    period: f64,
    y_ref: f64,
    f: f64,
    theta: f64,
    backing: Backing,
) -> Result<Layout> {
    let spacing = cfg.spacing(&mats.fluid);
    let nx = (period / spacing).round() as usize;
    if nx == 0 || ((nx as f64) * spacing - period).abs() > 1e-9 * period.max(1.0) {
        return Err(Error::Configuration(format!(
            "period {period} m is not a whole number of {spacing} m cells"
        )));
    }
    if y_ref < 0.0 {
        return Err(Error::Configuration("structure mouth lies below y = 0".into()));
    }
    let k = mats.fluid.wavenumber(f);
    if period * k * (1.0 + theta.sin().abs()) >= 2.0 * PI {
        return Err(Error::Validation(format!(
            "higher diffraction orders propagate at {f} Hz, {} deg for period {period} m",
            theta.to_degrees()
        )));
    }
    let lambda = 2.0 * PI / k;
    let c = mats.fluid.sound_speed;
    // oblique waves cross the layer at an angle; keep the round-trip target
    let design = theta.abs();
    let pml_top = Layer::from_settings(&cfg.pml, spacing, c, design);
    let buffer = cells_for(lambda / 4.0, spacing);
    let (below, pml_bottom) = match backing {
        Backing::Rigid => (0, None),
        Backing::Pml => (cfg.pml.cells + buffer, Some(pml_top)),
    };
    let gap = cells_for(cfg.air_gap.max(lambda / 2.0), spacing).max(4);
    let mouth = below + cells_for(y_ref, spacing);
    let injection = mouth + gap / 2;
    let measure = mouth + gap;
    let ny = measure + 1 + buffer + cfg.pml.cells;
    Ok(Layout {
        spacing,
        nx,
        ny,
        below,
        mouth,
        injection,
        measure,
        pml_bottom,
        pml_top,
    })
}

pub(crate) struct Solved {
    pub grid: Vec<Complex64>,
    pub residual: f64,
    pub assembly_time: std::time::Duration,
    pub solve_time: std::time::Duration,
}

/// Assembles, builds the right-hand side and solves.
pub(crate) fn run(
    cfg: &SimulationConfig,
    map: &MaterialMap,
    media: &Media,
    f: f64,
    bc: &BoundarySpec,
    rhs: impl FnOnce(&super::AssembledSystem) -> Vec<Complex64>,
) -> Result<Solved> {
    let t0 = Instant::now();
    let sys = assemble_system(map, media, f, bc)?;
    let b = rhs(&sys);
    let assembly_time = t0.elapsed();
    let t1 = Instant::now();
    let sol = solve_linear_system(&sys.matrix, &b, &cfg.linear)?;
    let solve_time = t1.elapsed();
    log::debug!(
        "solve f = {f} Hz: {} unknowns, assembly {:?}, solve {:?}",
        sys.unknowns(),
        assembly_time,
        solve_time
    );
    Ok(Solved {
        grid: sys.to_grid(&sol.x),
        residual: sol.residual,
        assembly_time,
        solve_time,
    })
}

pub(crate) fn mask(map: &MaterialMap, pred: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut out = Vec::with_capacity(map.nx * map.ny);
    for j in 0..map.ny {
        for i in 0..map.nx {
            out.push(pred(i, j));
        }
    }
    out
}

/// Default composite cell on a rigid floor.
pub fn solve_unit_cell(
    cfg: &SimulationConfig,
    geom: &UnitCellGeometry,
    mats: &MaterialSet,
    f: f64,
    theta_deg: f64,
) -> Result<FieldSolution> {
    let shapes = build_unit_cell(geom)?;
    solve_periodic_structure(cfg, &shapes, geom.period(), geom.mouth(), mats, f, theta_deg, Backing::Rigid)
}

/// Any structure occupying `[0, period] × [0, y_ref]`, repeated periodically
/// along x, under TF/SF plane-wave incidence.
#[allow(clippy::too_many_arguments)]
pub fn solve_periodic_structure(
    cfg: &SimulationConfig,
    shapes: &ShapeList,
    period: f64,
    y_ref: f64,
    mats: &MaterialSet,
    f: f64,
    theta_deg: f64,
    backing: Backing,
) -> Result<FieldSolution> {
    check_inputs(f, theta_deg)?;
    cfg.validate()?;
    let theta = theta_deg.to_radians();
    let lay = layout(cfg, mats, period, y_ref, f, theta, backing)?;
    let map = rasterize(shapes, lay.domain(), lay.spacing)?;
    let media = Media::new(&mats.fluid, &mats.porous, f)?;
    let omega = 2.0 * PI * f;
    let k = mats.fluid.wavenumber(f);
    let bc = BoundarySpec {
        x: XBoundary::floquet(k, theta, period),
        sx: Stretch::identity(lay.nx),
        sy: lay.stretch_y(omega),
    };
    let wave = PlaneWave::downward(k, theta, lay.spacing, y_ref)?;
    let injection = lay.injection;
    let solved = run(cfg, &map, &media, f, &bc, |sys| {
        sys.tfsf_rhs(
            |_, j| j < injection,
            |i, j| {
                let [x, y] = map.cell_center(i, j);
                wave.at(x, y)
            },
        )
    })?;
    let sy = &bc.sy;
    let sol = FieldSolution {
        nx: lay.nx,
        ny: lay.ny,
        spacing: lay.spacing,
        origin: map.origin(),
        pressure: solved.grid,
        scattered: mask(&map, |_, j| j >= injection),
        absorbing: mask(&map, |_, j| sy.is_stretched_center(j)),
        rigid: mask(&map, |i, j| map.get(i, j) == Material::Rigid),
        frequency: f,
        theta_deg,
        incident: Incident::Plane(wave),
        period: Some(period),
        y_ref,
        y_measure: lay.row_center(lay.measure),
        residual: solved.residual,
        assembly_time: solved.assembly_time,
        solve_time: solved.solve_time,
    };
    sol.check_finite()?;
    Ok(sol)
}

/// Cross-check of the TF/SF path by two solves with a soft line source: one
/// with the structure, one with the structure replaced by open space. Their
/// difference above the mouth is the scattered field; the incident amplitude
/// is measured from the empty run.
#[allow(clippy::too_many_arguments)]
pub fn solve_unit_cell_subtraction(
    cfg: &SimulationConfig,
    shapes: &ShapeList,
    period: f64,
    y_ref: f64,
    mats: &MaterialSet,
    f: f64,
    theta_deg: f64,
    backing: Backing,
) -> Result<FieldSolution> {
    check_inputs(f, theta_deg)?;
    cfg.validate()?;
    let theta = theta_deg.to_radians();
    let full = layout(cfg, mats, period, y_ref, f, theta, backing)?;
    let empty = layout(cfg, mats, period, 0.0, f, theta, Backing::Pml)?;
    let media = Media::new(&mats.fluid, &mats.porous, f)?;
    let omega = 2.0 * PI * f;
    let k = mats.fluid.wavenumber(f);
    let kx = k * theta.sin();
    let x_bc = XBoundary::floquet(k, theta, period);

    let solve = |lay: &Layout, shapes: &ShapeList| -> Result<(MaterialMap, Solved)> {
        let map = rasterize(shapes, lay.domain(), lay.spacing)?;
        let bc = BoundarySpec {
            x: x_bc,
            sx: Stretch::identity(lay.nx),
            sy: lay.stretch_y(omega),
        };
        // same height above the mouth in both runs
        let src = lay.injection;
        let solved = run(cfg, &map, &media, f, &bc, |sys| {
            let mut b = vec![Complex64::new(0.0, 0.0); sys.unknowns()];
            for i in 0..lay.nx {
                if let Some(u) = sys.unknown(i, src) {
                    let x = map.cell_center(i, src)[0];
                    b[u] = Complex64::from_polar(1.0, -kx * x);
                }
            }
            b
        })?;
        Ok((map, solved))
    };
    let (map, with) = solve(&full, shapes)?;
    let (_, without) = solve(&empty, &ShapeList::empty())?;

    let wave0 = super::source::discrete_ky(k, kx, full.spacing)?;
    let project = |grid: &[Complex64], j: usize| -> Complex64 {
        (0..full.nx)
            .map(|i| {
                let x = (i as f64 + 0.5) * full.spacing;
                grid[j * full.nx + i] * Complex64::from_polar(1.0, kx * x)
            })
            .sum::<Complex64>()
            / full.nx as f64
    };
    // incident amplitude at the mouth from the empty run's first row above it
    let y_c = empty.row_center(empty.mouth);
    let amp = project(&without.grid, empty.mouth) * Complex64::from_polar(1.0, -wave0 * y_c);
    let wave = PlaneWave {
        amplitude: amp,
        kx,
        ky: wave0,
        x_ref: 0.0,
        y_ref,
    };

    let mut pressure = with.grid.clone();
    for j in full.mouth..full.ny {
        let je = j - full.mouth + empty.mouth;
        for i in 0..full.nx {
            pressure[j * full.nx + i] -= without.grid[je * full.nx + i];
        }
    }
    let mouth = full.mouth;
    let sy = full.stretch_y(omega);
    let sol = FieldSolution {
        nx: full.nx,
        ny: full.ny,
        spacing: full.spacing,
        origin: map.origin(),
        pressure,
        scattered: mask(&map, |_, j| j >= mouth),
        absorbing: mask(&map, |_, j| sy.is_stretched_center(j)),
        rigid: mask(&map, |i, j| map.get(i, j) == Material::Rigid),
        frequency: f,
        theta_deg,
        incident: Incident::Plane(wave),
        period: Some(period),
        y_ref,
        y_measure: full.row_center(full.measure),
        residual: with.residual.max(without.residual),
        assembly_time: with.assembly_time + without.assembly_time,
        solve_time: with.solve_time + without.solve_time,
    };
    sol.check_finite()?;
    Ok(sol)
}
