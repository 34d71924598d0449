//! Gaussian-beam solves on an array of units.
//!
//! The array fills the interior width `x_range` and is continued
//! periodically into the side PMLs, so the beam never sees artificial array
//! ends. The beam enters through a horizontal TF/SF line above the mouth; in
//! the side PML columns the incident field is evaluated on the stretched
//! coordinate so the injection stays consistent with the absorbing layer.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assemble::{BoundarySpec, Media, XBoundary};
use super::pml::{Layer, Stretch};
use super::source::{GaussianBeam, Incident};
use super::unit_cell::{mask, run, Backing};
use super::{cells_for, check_inputs, FieldSolution, MaterialSet, SimulationConfig};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, BoundingBox, Material, ShapeList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSpec {
    /// Waist radius in wavelengths at the solve frequency.
    pub waist_wavelengths: f64,
    /// Angular-spectrum samples.
    pub components: usize,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            waist_wavelengths: 2.0,
            components: 181,
        }
    }
}

/// Structure description for [`solve_finite_array`].
#[derive(Debug, Clone, Copy)]
pub struct ArrayLayout<'a> {
    pub shapes: &'a ShapeList,
    /// Interior (non-PML) horizontal extent.
    pub x_range: [f64; 2],
    /// Horizontal repeat used to continue the structure into the side PMLs.
    pub period: f64,
    /// Mouth height; the beam is focused at `(centre of x_range, y_ref)`.
    pub y_ref: f64,
    pub backing: Backing,
}

pub fn solve_finite_array(
    cfg: &SimulationConfig,
    array: &ArrayLayout<'_>,
    mats: &MaterialSet,
    f: f64,
    theta_deg: f64,
    beam: &BeamSpec,
) -> Result<FieldSolution> {
    check_inputs(f, theta_deg)?;
    cfg.validate()?;
    let h = cfg.spacing(&mats.fluid);
    let [x0, x1] = array.x_range;
    let interior = ((x1 - x0) / h).round() as usize;
    let per = (array.period / h).round() as usize;
    if interior == 0 || ((interior as f64) * h - (x1 - x0)).abs() > 1e-9 || per == 0 || per > interior {
        return Err(Error::Configuration("array extent and period must be whole numbers of cells".into()));
    }
    let theta = theta_deg.to_radians();
    let k = mats.fluid.wavenumber(f);
    let lambda = 2.0 * PI / k;
    let c = mats.fluid.sound_speed;
    let side = cfg.pml.cells;

    let buffer = cells_for(lambda / 8.0, h);
    let (below, pml_bottom) = match array.backing {
        Backing::Rigid => (0, None),
        Backing::Pml => (cfg.pml.cells + buffer, Some(Layer::from_settings(&cfg.pml, h, c, 0.0))),
    };
    let gap = cells_for(cfg.air_gap.max(lambda / 4.0), h).max(8);
    let mouth = below + cells_for(array.y_ref, h);
    let injection = mouth + gap / 2;
    let measure = mouth + gap;
    let ny = measure + 2 + buffer + cfg.pml.cells;
    let nx = interior + 2 * side;

    let y_min = -(below as f64) * h;
    let origin_x = x0 - side as f64 * h;
    let domain = BoundingBox::new([origin_x, y_min], [origin_x + nx as f64 * h, y_min + ny as f64 * h]);
    let mut map = rasterize(array.shapes, domain, h)?;
    // continue the structure periodically into the side layers
    for j in 0..ny {
        for i in 0..side {
            let src = side + (per - (side - i) % per) % per;
            map.set(i, j, map.get(src, j));
            let r = side + interior + i;
            let src = side + interior - per + (i % per);
            map.set(r, j, map.get(src, j));
        }
    }

    let omega = 2.0 * PI * f;
    let x_layer = Layer::from_settings(&cfg.pml, h, c, 0.0);
    let top = Layer::from_settings(&cfg.pml, h, c, theta.abs());
    let bc = BoundarySpec {
        x: XBoundary::Rigid,
        sx: Stretch::new(nx, omega, Some(x_layer), Some(x_layer)),
        sy: Stretch::new(ny, omega, pml_bottom, Some(top)),
    };
    let xt = stretched_centers(&bc.sx, origin_x, h, side, interior);

    let focus = [0.5 * (x0 + x1), array.y_ref];
    let beam_field = GaussianBeam::new(k, theta, beam.waist_wavelengths * lambda, focus, h, beam.components)?;
    let media = Media::new(&mats.fluid, &mats.porous, f)?;
    let solved = run(cfg, &map, &media, f, &bc, |sys| {
        sys.tfsf_rhs(
            |_, j| j < injection,
            |i, j| {
                let y = y_min + (j as f64 + 0.5) * h;
                beam_field
                    .components
                    .iter()
                    .map(|w| {
                        w.amplitude
                            * (Complex64::i() * (-w.kx * (xt[i] - w.x_ref) + w.ky * (y - w.y_ref))).exp()
                    })
                    .sum()
            },
        )
    })?;
    let (sx, sy) = (&bc.sx, &bc.sy);
    let sol = FieldSolution {
        nx,
        ny,
        spacing: h,
        origin: [origin_x, y_min],
        pressure: solved.grid,
        scattered: mask(&map, |_, j| j >= injection),
        absorbing: mask(&map, |i, j| sx.is_stretched_center(i) || sy.is_stretched_center(j)),
        rigid: mask(&map, |i, j| map.get(i, j) == Material::Rigid),
        frequency: f,
        theta_deg,
        incident: Incident::Beam(beam_field),
        period: None,
        y_ref: array.y_ref,
        y_measure: y_min + (measure as f64 + 0.5) * h,
        residual: solved.residual,
        assembly_time: solved.assembly_time,
        solve_time: solved.solve_time,
    };
    sol.check_finite()?;
    Ok(sol)
}

/// Complex-stretched x coordinate of every cell centre, equal to the real
/// coordinate in the interior.
fn stretched_centers(sx: &Stretch, origin: f64, h: f64, side: usize, interior: usize) -> Vec<Complex64> {
    let n = sx.center.len();
    let mut xt = vec![Complex64::new(0.0, 0.0); n];
    for (i, x) in xt.iter_mut().enumerate().take(side + interior).skip(side) {
        *x = Complex64::new(origin + (i as f64 + 0.5) * h, 0.0);
    }
    for i in (0..side).rev() {
        xt[i] = xt[i + 1] - sx.face[i + 1] * h;
    }
    for i in side + interior..n {
        xt[i] = xt[i - 1] + sx.face[i] * h;
    }
    xt
}
