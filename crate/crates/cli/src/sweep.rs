//! Parallel sweep orchestration.
//!
//! Grid points are ordered p-major, then frequency, then angle. Workers solve
//! points independently; results are gathered by index, so every table is
//! identical for any worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use metaporous::analysis::{
    absorption_csv, absorption_record, extract_refractive_index, reflected_power_fraction, refractive_index_csv,
    AbsorptionRecord, RefractiveIndexRecord,
};
use metaporous::geometry::{build_finite_array, build_unit_cell, ShapeList, ShapeRole, UnitCellGeometry};
use metaporous::solver::{solve_finite_array, solve_periodic_structure, solve_tunnel, ArrayLayout, FieldSolution};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{SweepMode, SweepSpec};
use crate::render;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamRecord {
    pub frequency: f64,
    pub theta_deg: f64,
    pub reflected_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointValue {
    Absorption(AbsorptionRecord),
    Beam(BeamRecord),
    Index(RefractiveIndexRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    #[serde(skip)]
    pub geometry: usize,
    pub p_over_w: f64,
    pub frequency: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: GridPoint,
    pub outcome: Result<PointValue, String>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub results: Vec<PointResult>,
    pub table: PathBuf,
    pub manifest: PathBuf,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &PointResult> {
        self.results.iter().filter(|r| r.outcome.is_err())
    }

    pub fn absorption(&self) -> Vec<(f64, AbsorptionRecord)> {
        self.results
            .iter()
            .filter_map(|r| match &r.outcome {
                Ok(PointValue::Absorption(a)) => Some((r.point.p_over_w, *a)),
                _ => None,
            })
            .collect()
    }

    pub fn indices(&self) -> Vec<RefractiveIndexRecord> {
        self.results
            .iter()
            .filter_map(|r| match &r.outcome {
                Ok(PointValue::Index(a)) => Some(*a),
                _ => None,
            })
            .collect()
    }

    pub fn beams(&self) -> Vec<(f64, BeamRecord)> {
        self.results
            .iter()
            .filter_map(|r| match &r.outcome {
                Ok(PointValue::Beam(b)) => Some((r.point.p_over_w, *b)),
                _ => None,
            })
            .collect()
    }
}

/// Every grid point of the sweep, in output order.
pub fn grid(spec: &SweepSpec) -> Vec<GridPoint> {
    let angles: &[f64] = if spec.mode == SweepMode::TunnelIndex { &[0.0] } else { &spec.angles };
    let mut out = Vec::with_capacity(spec.len());
    for (g, geom) in spec.geometries.iter().enumerate() {
        for &f in &spec.frequencies {
            for &theta in angles {
                out.push(GridPoint {
                    index: out.len(),
                    geometry: g,
                    p_over_w: geom.p_over_w(),
                    frequency: f,
                    theta_deg: theta,
                });
            }
        }
    }
    out
}

/// Structure solved for one geometry in unit-cell and bare-wedge modes.
pub fn cell_shapes(mode: SweepMode, geom: &UnitCellGeometry) -> metaporous::Result<ShapeList> {
    let cell = build_unit_cell(geom)?;
    Ok(match mode {
        SweepMode::BareWedge => cell.retain_roles(|r| matches!(r, ShapeRole::Wedge | ShapeRole::Floor)),
        _ => cell,
    })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport, CliError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out)?;
    if spec.dump_fields {
        fs::create_dir_all(spec.out.join("fields"))?;
    }
    let points = grid(spec);
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<PointResult> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let outcome = solve_point(spec, p).map_err(|e| e.to_string());
                match &outcome {
                    Ok(_) => log::info!("point {} (f = {} Hz, θ = {}°) done", p.index, p.frequency, p.theta_deg),
                    Err(e) => log::error!("point {} (f = {} Hz, θ = {}°) failed: {e}", p.index, p.frequency, p.theta_deg),
                }
                PointResult { point: *p, outcome }
            })
            .collect()
    });

    let mut report = SweepReport {
        results,
        table: PathBuf::new(),
        manifest: spec.out.join("manifest.json"),
    };
    let (name, text) = match spec.mode {
        SweepMode::UnitCell | SweepMode::BareWedge => {
            let rows: Vec<_> = report
                .absorption()
                .into_iter()
                .map(|(p, r)| (spec.vary_p.then_some(p), r))
                .collect();
            ("absorption.csv", absorption_csv(&rows))
        }
        SweepMode::FiniteArray => ("beam.csv", beam_csv(&report.beams(), spec.vary_p)),
        SweepMode::TunnelIndex => ("refractive_index.csv", refractive_index_csv(&report.indices())),
    };
    report.table = spec.out.join(name);
    fs::write(&report.table, text)?;
    write_manifest(spec, &report, name, start.elapsed().as_secs_f64())?;
    Ok(report)
}

fn solve_point(spec: &SweepSpec, p: &GridPoint) -> metaporous::Result<PointValue> {
    let geom = &spec.geometries[p.geometry];
    let cfg = &spec.simulation;
    let mats = &spec.materials;
    match spec.mode {
        SweepMode::UnitCell | SweepMode::BareWedge => {
            let shapes = cell_shapes(spec.mode, geom)?;
            let sol = solve_periodic_structure(
                cfg,
                &shapes,
                geom.period(),
                geom.mouth(),
                mats,
                p.frequency,
                p.theta_deg,
                spec.backing,
            )?;
            dump(spec, p, &sol)?;
            Ok(PointValue::Absorption(absorption_record(&sol)?))
        }
        SweepMode::FiniteArray => {
            let shapes = build_finite_array(geom, spec.array_units)?;
            let lam = geom.period();
            let layout = ArrayLayout {
                shapes: &shapes,
                x_range: [0.0, spec.array_units as f64 * lam],
                period: lam,
                y_ref: geom.mouth(),
                backing: spec.backing,
            };
            let sol = solve_finite_array(cfg, &layout, mats, p.frequency, p.theta_deg, &spec.beam)?;
            dump(spec, p, &sol)?;
            let j = sol
                .row_at(sol.y_measure)
                .ok_or_else(|| metaporous::Error::Configuration("flux line outside the domain".into()))?;
            Ok(PointValue::Beam(BeamRecord {
                frequency: p.frequency,
                theta_deg: p.theta_deg,
                reflected_fraction: reflected_power_fraction(&sol, mats.fluid.density, j)?,
            }))
        }
        SweepMode::TunnelIndex => {
            let field = solve_tunnel(cfg, geom, mats, p.frequency, spec.termination)?;
            dump(spec, p, &field.solution)?;
            Ok(PointValue::Index(extract_refractive_index(&field, &mats.fluid)?))
        }
    }
}

fn dump(spec: &SweepSpec, p: &GridPoint, sol: &FieldSolution) -> metaporous::Result<()> {
    if !spec.dump_fields {
        return Ok(());
    }
    let stem = field_stem(p);
    let dir = spec.out.join("fields");
    let total = sol.total_field();
    fs::write(dir.join(format!("{stem}_re.ppm")), render::field_ppm(sol, &total, render::FieldPart::Real))?;
    fs::write(dir.join(format!("{stem}_abs.pgm")), render::field_ppm(sol, &total, render::FieldPart::Magnitude))?;
    Ok(())
}

pub fn field_stem(p: &GridPoint) -> String {
    format!("{:04}_pw{:.3}_f{}_t{}", p.index, p.p_over_w, p.frequency, p.theta_deg)
}

pub fn beam_csv(rows: &[(f64, BeamRecord)], with_p: bool) -> String {
    let mut s = String::new();
    if with_p {
        s.push_str("p_over_w,");
    }
    s.push_str("f_hz,theta_deg,reflected_fraction\n");
    for (p, r) in rows {
        if with_p {
            let _ = write!(s, "{p},");
        }
        let _ = writeln!(s, "{},{},{:.10}", r.frequency, r.theta_deg, r.reflected_fraction);
    }
    s
}

fn write_manifest(spec: &SweepSpec, report: &SweepReport, table: &str, elapsed: f64) -> Result<(), CliError> {
    let failures: Vec<_> = report
        .failures()
        .map(|r| {
            json!({
                "index": r.point.index,
                "p_over_w": r.point.p_over_w,
                "f_hz": r.point.frequency,
                "theta_deg": r.point.theta_deg,
                "error": r.outcome.as_ref().err(),
            })
        })
        .collect();
    let spacing = spec.simulation.spacing(&spec.materials.fluid);
    let manifest = json!({
        "solver": "metaporous",
        "solver_version": env!("CARGO_PKG_VERSION"),
        "time_convention": "exp(+i omega t)",
        "config": spec,
        "grid": {
            "spacing_m": spacing,
            "p_over_w": spec.geometries.iter().map(UnitCellGeometry::p_over_w).collect::<Vec<_>>(),
            "frequencies_hz": spec.frequencies,
            "angles_deg": spec.angles,
            "points": report.results.len(),
        },
        "table": table,
        "failures": failures,
        "elapsed_s": elapsed,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&report.manifest, text)?;
    Ok(())
}

/// Reads a manifest back, e.g. to check recorded failures.
pub fn read_manifest(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
}
