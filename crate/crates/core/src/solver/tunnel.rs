//! Air-filled protruded tunnel driven by a plane wave from its mouth, used to
//! measure the effective refractive index of the protrusion lattice.
//!
//! The duct is the clear channel `x ∈ [0, w]` with hard side walls. From the
//! top: PML, a plain lead-in holding the TF/SF line, then the protruded
//! section (about two free-space wavelengths long), closed either by a hard
//! wall or by a PML into which the protrusions continue.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assemble::{BoundarySpec, Media, XBoundary};
use super::pml::{Layer, PmlSettings, Stretch};
use super::source::{Incident, PlaneWave};
use super::unit_cell::{mask, run};
use super::{cells_for, check_inputs, FieldSolution, MaterialSet, SimulationConfig};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, BoundingBox, Material, Primitive, ProtrusionLayout, ShapeList, ShapeRole, UnitCellGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Travelling wave: the far end is absorbing.
    #[default]
    Pml,
    /// Standing wave: the far end is a hard wall.
    Rigid,
}

/// Centreline samples of a tunnel solve, one per protrusion pitch.
#[derive(Debug, Clone)]
pub struct TunnelField {
    pub frequency: f64,
    pub p_over_w: f64,
    pub termination: Termination,
    /// Depth below the start of the protruded section (m).
    pub positions: Vec<f64>,
    pub samples: Vec<Complex64>,
    pub solution: FieldSolution,
}

/// Protruded section length in free-space wavelengths.
const SECTION_WAVELENGTHS: f64 = 2.2;

pub fn solve_tunnel(
    cfg: &SimulationConfig,
    geom: &UnitCellGeometry,
    mats: &MaterialSet,
    f: f64,
    termination: Termination,
) -> Result<TunnelField> {
    check_inputs(f, 0.0)?;
    cfg.validate()?;
    geom.validate()?;
    let h = cfg.spacing(&mats.fluid);
    let w = geom.tunnel_width;
    let nx = (w / h).round() as usize;
    if nx < 2 || (nx as f64 * h - w).abs() > 1e-9 {
        return Err(Error::Configuration(format!("tunnel width {w} m is not a whole number of {h} m cells")));
    }
    let k = mats.fluid.wavenumber(f);
    let lambda = 2.0 * PI / k;
    let d = geom.protrusion_spacing;
    let t = geom.thickness;
    let p = geom.protrusion_length;

    let periods = ((SECTION_WAVELENGTHS * lambda).max(geom.tunnel_height) / d).ceil() as usize;
    let section = cells_for(periods as f64 * d, h);
    let bottom_cells = match termination {
        Termination::Pml => cfg.pml.cells.max(cells_for(lambda / 4.0, h)),
        Termination::Rigid => 0,
    };
    let lead = cells_for(lambda / 4.0, h).max(8);
    let buffer = cells_for(lambda / 4.0, h);
    let ny = bottom_cells + section + lead + buffer + cfg.pml.cells;
    let y_top = (bottom_cells + section) as f64 * h;
    let injection = bottom_cells + section + lead / 2;

    let mut shapes = ShapeList {
        shapes: Vec::new(),
        min_feature: geom.min_feature(),
    };
    if p > 0.0 {
        let right_offset = match geom.layout {
            ProtrusionLayout::Staggered => 0.5 * d,
            ProtrusionLayout::Aligned => 0.0,
        };
        let s0 = geom.protrusion_offset;
        for (x0, x1, offset) in [(0.0, p, 0.0), (w - p, w, right_offset)] {
            let mut depth = s0 + offset;
            while y_top - depth - t >= -1e-12 {
                shapes.push(
                    Primitive::Rect {
                        min: [x0, y_top - depth - t],
                        max: [x1, y_top - depth],
                    },
                    Material::Rigid,
                    ShapeRole::Protrusion,
                );
                depth += d;
            }
        }
    }
    let domain = BoundingBox::new([0.0, 0.0], [nx as f64 * h, ny as f64 * h]);
    let map = rasterize(&shapes, domain, h)?;

    let omega = 2.0 * PI * f;
    let c = mats.fluid.sound_speed;
    let top = Layer::from_settings(&cfg.pml, h, c, 0.0);
    let bottom = (bottom_cells > 0).then(|| {
        let settings = PmlSettings { cells: bottom_cells, ..cfg.pml };
        Layer::from_settings(&settings, h, c, 0.0)
    });
    let bc = BoundarySpec {
        x: XBoundary::Rigid,
        sx: Stretch::identity(nx),
        sy: Stretch::new(ny, omega, bottom, Some(top)),
    };
    let media = Media::new(&mats.fluid, &mats.porous, f)?;
    let wave = PlaneWave::downward(k, 0.0, h, y_top)?;
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
    let solution = FieldSolution {
        nx,
        ny,
        spacing: h,
        origin: [0.0, 0.0],
        pressure: solved.grid,
        scattered: mask(&map, |_, j| j >= injection),
        absorbing: mask(&map, |_, j| sy.is_stretched_center(j)),
        rigid: mask(&map, |i, j| map.get(i, j) == Material::Rigid),
        frequency: f,
        theta_deg: 0.0,
        incident: Incident::Plane(wave),
        period: None,
        y_ref: y_top,
        y_measure: y_top + lead as f64 * h,
        residual: solved.residual,
        assembly_time: solved.assembly_time,
        solve_time: solved.solve_time,
    };
    solution.check_finite()?;

    // centreline, between protrusions, skipping two pitches at each end
    let cols: Vec<usize> = if nx % 2 == 0 { vec![nx / 2 - 1, nx / 2] } else { vec![nx / 2] };
    let mut positions = Vec::new();
    let mut samples = Vec::new();
    for m in 2..periods.saturating_sub(2) {
        let depth = geom.protrusion_offset + (m as f64 + 0.5) * d;
        let y = y_top - depth;
        if y < bottom_cells as f64 * h {
            break;
        }
        let j = (y / h).floor() as usize;
        let v = cols.iter().map(|&i| solution.at(i, j)).sum::<Complex64>() / cols.len() as f64;
        positions.push(depth);
        samples.push(v);
    }
    if samples.len() < 3 {
        return Err(Error::Estimation("tunnel too short to sample".into()));
    }
    Ok(TunnelField {
        frequency: f,
        p_over_w: geom.p_over_w(),
        termination,
        positions,
        samples,
        solution,
    })
}
