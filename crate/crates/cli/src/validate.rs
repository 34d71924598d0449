//! Fast self-check: closed-form limits, slab oracle, PML, mirror, angle
//! symmetry and grid convergence.

use std::f64::consts::PI;

use metaporous::analysis::{absorption, absorption_record, analytic_layer_reflection, extract_specular_reflection};
use metaporous::geometry::{slab, Material, ShapeList, UnitCellGeometry};
use metaporous::materials::{jca_effective_bulk_modulus, jca_effective_density};
use metaporous::solver::{solve_periodic_structure, solve_unit_cell, Backing, MaterialSet, SimulationConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn failed(name: &'static str, err: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

pub fn run_all() -> Vec<Check> {
    vec![jca_limits(), slab_oracle(), empty_cell(), mirror(), angle_symmetry(), grid_convergence()]
}

pub fn jca_limits() -> Check {
    let mats = MaterialSet::default();
    let (air, mel) = (mats.fluid, mats.porous);
    let res = (|| -> metaporous::Result<f64> {
        let rho_hi = jca_effective_density(&mel, &air, 1e8)?;
        let rho_lo = jca_effective_density(&mel, &air, 0.01)?;
        let k_hi = jca_effective_bulk_modulus(&mel, &air, 1e8)?;
        let k_lo = jca_effective_bulk_modulus(&mel, &air, 0.01)?;
        let inertial = air.density * mel.tortuosity / mel.porosity;
        let errs = [
            (rho_hi - inertial).norm() / inertial,
            (2.0 * PI * 0.01 * rho_lo.im.abs() - mel.flow_resistivity).abs() / mel.flow_resistivity,
            (k_hi - air.heat_capacity_ratio * air.ambient_pressure / mel.porosity).norm()
                / (air.heat_capacity_ratio * air.ambient_pressure / mel.porosity),
            (k_lo - air.ambient_pressure / mel.porosity).norm() / (air.ambient_pressure / mel.porosity),
        ];
        Ok(errs.into_iter().fold(0.0, f64::max))
    })();
    match res {
        Ok(e) => Check::new("JCA limits", e < 0.01, format!("worst relative error {e:.2e}")),
        Err(e) => Check::failed("JCA limits", e),
    }
}

fn reflection(shapes: &ShapeList, y_ref: f64, f: f64, theta: f64, backing: Backing) -> metaporous::Result<f64> {
    let cfg = SimulationConfig::default();
    let period = UnitCellGeometry::default().period();
    let sol = solve_periodic_structure(&cfg, shapes, period, y_ref, &MaterialSet::default(), f, theta, backing)?;
    Ok(extract_specular_reflection(&sol, sol.y_measure)?.norm())
}

pub fn slab_oracle() -> Check {
    let mats = MaterialSet::default();
    let l = 0.081;
    let res = (|| -> metaporous::Result<f64> {
        let mut worst: f64 = 0.0;
        for (f, theta) in [(500.0, 0.0), (2000.0, 30.0)] {
            let shapes = slab(UnitCellGeometry::default().period(), l, Material::Porous);
            let r = reflection(&shapes, l, f, theta, Backing::Rigid)?;
            let exact = analytic_layer_reflection(&mats.porous, &mats.fluid, l, f, theta)?;
            worst = worst.max((1.0 - r * r - absorption(exact)?).abs());
        }
        Ok(worst)
    })();
    match res {
        Ok(e) => Check::new("slab oracle", e < 0.01, format!("max |Δα| {e:.2e}")),
        Err(e) => Check::failed("slab oracle", e),
    }
}

pub fn empty_cell() -> Check {
    let res = [(1000.0, 0.0), (4000.0, 75.0)]
        .into_iter()
        .map(|(f, t)| reflection(&ShapeList::empty(), 0.0, f, t, Backing::Pml))
        .collect::<metaporous::Result<Vec<_>>>();
    match res {
        Ok(r) => {
            let worst = r.into_iter().fold(0.0, f64::max);
            Check::new("PML empty cell", worst < 1e-3, format!("max |R| {worst:.2e}"))
        }
        Err(e) => Check::failed("PML empty cell", e),
    }
}

pub fn mirror() -> Check {
    match reflection(&ShapeList::empty(), 0.0, 2000.0, 30.0, Backing::Rigid) {
        Ok(r) => Check::new("rigid mirror", (r - 1.0).abs() < 1e-3, format!("|R| = {r:.6}")),
        Err(e) => Check::failed("rigid mirror", e),
    }
}

fn alpha(cfg: &SimulationConfig, f: f64, theta: f64) -> metaporous::Result<f64> {
    let sol = solve_unit_cell(cfg, &UnitCellGeometry::default(), &MaterialSet::default(), f, theta)?;
    Ok(absorption_record(&sol)?.alpha)
}

pub fn angle_symmetry() -> Check {
    let cfg = SimulationConfig::default();
    match alpha(&cfg, 1500.0, 45.0).and_then(|a| Ok((a, alpha(&cfg, 1500.0, -45.0)?))) {
        Ok((a, b)) => Check::new("angle symmetry", (a - b).abs() < 1e-6, format!("|Δα| {:.2e}", (a - b).abs())),
        Err(e) => Check::failed("angle symmetry", e),
    }
}

pub fn grid_convergence() -> Check {
    let coarse = SimulationConfig { spacing: Some(0.25e-3), ..Default::default() };
    let fine = SimulationConfig { spacing: Some(0.125e-3), ..Default::default() };
    match alpha(&coarse, 2000.0, 0.0).and_then(|a| Ok((a, alpha(&fine, 2000.0, 0.0)?))) {
        Ok((a, b)) => Check::new(
            "grid convergence",
            (a - b).abs() < 0.01,
            format!("α(Δ) = {a:.5}, α(Δ/2) = {b:.5}"),
        ),
        Err(e) => Check::failed("grid convergence", e),
    }
}
