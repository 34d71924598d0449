//! Finite-difference discretization of `∇·(ρ⁻¹∇p) + ω²K⁻¹p = 0`.
//!
//! Unknowns live at the centres of non-rigid cells. Face coefficients are the
//! harmonic mean of `1/ρ` of the two adjacent cells; faces touching a rigid
//! cell or the domain edge carry no flux (hard wall). PML enters through the
//! stretched form
//! `∂x(s_y/s_x·ρ⁻¹·∂x p) + ∂y(s_x/s_y·ρ⁻¹·∂y p) + ω²·s_x·s_y·K⁻¹·p = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::pml::Stretch;
use crate::error::{Error, Result};
use crate::geometry::{Material, MaterialMap};
use crate::materials::{EffectiveFluid, FluidProperties, PorousMaterialParams};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|e| e.0 == c).map_or(Complex64::new(0.0, 0.0), |e| e.1)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }
}

/// Complex density and bulk modulus of each non-rigid material at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Media {
    pub air: EffectiveFluid,
    pub porous: EffectiveFluid,
}

impl Media {
    pub fn new(fluid: &FluidProperties, porous: &PorousMaterialParams, f: f64) -> Result<Self> {
        Ok(Self {
            air: EffectiveFluid::lossless(fluid, f),
            porous: EffectiveFluid::jca(porous, fluid, f)?,
        })
    }

    fn of(&self, m: Material) -> &EffectiveFluid {
        match m {
            Material::Porous => &self.porous,
            _ => &self.air,
        }
    }
}

/// Treatment of the left and right domain edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XBoundary {
    /// Floquet-periodic: `p(x + Λ) = bloch · p(x)` with `bloch = e^{-i·kx·Λ}`.
    Periodic { bloch: Complex64 },
    /// Zero normal velocity at the domain edge.
    Rigid,
}

impl XBoundary {
    /// Floquet boundary for incidence angle `theta` (radians) in a fluid of wavenumber `k0`.
    pub fn floquet(k0: f64, theta: f64, period: f64) -> Self {
        let phase = k0 * theta.sin() * period;
        XBoundary::Periodic {
            bloch: Complex64::from_polar(1.0, -phase),
        }
    }
}

/// Everything besides the material map that defines the discrete operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub x: XBoundary,
    pub sx: Stretch,
    pub sy: Stretch,
}

impl BoundarySpec {
    pub fn plain(nx: usize, ny: usize, x: XBoundary) -> Self {
        Self {
            x,
            sx: Stretch::identity(nx),
            sy: Stretch::identity(ny),
        }
    }
}

/// Assembled operator plus the cell <-> unknown numbering.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: SparseMatrix,
    pub nx: usize,
    pub ny: usize,
    unknown_of_cell: Vec<usize>,
    cell_of_unknown: Vec<usize>,
}

const NO_UNKNOWN: usize = usize::MAX;

impl AssembledSystem {
    pub fn unknowns(&self) -> usize {
        self.cell_of_unknown.len()
    }

    pub fn unknown(&self, i: usize, j: usize) -> Option<usize> {
        let u = self.unknown_of_cell[j * self.nx + i];
        (u != NO_UNKNOWN).then_some(u)
    }

    pub fn cell(&self, unknown: usize) -> (usize, usize) {
        let c = self.cell_of_unknown[unknown];
        (c % self.nx, c / self.nx)
    }

    /// Scatters a solution vector onto the full grid (rigid cells get 0).
    pub fn to_grid(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.nx * self.ny];
        for (u, &c) in self.cell_of_unknown.iter().enumerate() {
            out[c] = x[u];
        }
        out
    }

    /// Gathers grid values at the unknowns.
    pub fn from_grid(&self, grid: &[Complex64]) -> Vec<Complex64> {
        self.cell_of_unknown.iter().map(|&c| grid[c]).collect()
    }

    /// Right-hand side injecting `incident` across the boundary of the
    /// total-field region `in_total`: `b = (A·Q − Q·A)·p_inc`.
    ///
    /// Exact when `incident` solves the discrete homogeneous equation on
    /// every row that straddles the boundary.
    pub fn tfsf_rhs(
        &self,
        in_total: impl Fn(usize, usize) -> bool,
        incident: impl Fn(usize, usize) -> Complex64,
    ) -> Vec<Complex64> {
        let mut b = vec![Complex64::new(0.0, 0.0); self.unknowns()];
        for (r, slot) in b.iter_mut().enumerate() {
            let (i, j) = self.cell(r);
            let q_row = in_total(i, j);
            for (c, v) in self.matrix.row(r) {
                if c == r {
                    continue;
                }
                let (ni, nj) = self.cell(c);
                let q_nb = in_total(ni, nj);
                if q_nb != q_row {
                    let sign = if q_nb { 1.0 } else { -1.0 };
                    *slot += v * sign * incident(ni, nj);
                }
            }
        }
        b
    }
}

/// Five-point operator with Floquet wrap entries and PML stretching.
pub fn assemble_system(map: &MaterialMap, media: &Media, f: f64, bc: &BoundarySpec) -> Result<AssembledSystem> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {f}")));
    }
    let (nx, ny) = (map.nx, map.ny);
    if bc.sx.center.len() != nx || bc.sy.center.len() != ny {
        return Err(Error::Configuration("stretch profiles do not match the map size".into()));
    }
    let omega = 2.0 * PI * f;
    let h2 = map.spacing() * map.spacing();

    let mut unknown_of_cell = vec![NO_UNKNOWN; nx * ny];
    let mut cell_of_unknown = Vec::new();
    for (c, &m) in map.cells().iter().enumerate() {
        if m != Material::Rigid {
            unknown_of_cell[c] = cell_of_unknown.len();
            cell_of_unknown.push(c);
        }
    }
    if cell_of_unknown.is_empty() {
        return Err(Error::DegenerateSystem("every cell is rigid; no pressure unknowns".into()));
    }

    let one = Complex64::new(1.0, 0.0);
    let mut rows = Vec::with_capacity(cell_of_unknown.len());
    for &c in &cell_of_unknown {
        let (i, j) = (c % nx, c / nx);
        let here = media.of(map.get(i, j));
        let mut row: Vec<(usize, Complex64)> = Vec::with_capacity(5);
        let mut diag = omega * omega * bc.sx.center[i] * bc.sy.center[j] / here.bulk_modulus;

        let mut couple = |ni: usize, nj: usize, stretch: Complex64, phase: Complex64| {
            let m = map.get(ni, nj);
            if m == Material::Rigid {
                return;
            }
            let there = media.of(m);
            let beta = 2.0 / (here.density + there.density);
            let a = stretch * beta / h2;
            diag -= a;
            row.push((unknown_of_cell[nj * nx + ni], a * phase));
        };

        // x faces
        let x_stretch = |face: usize| bc.sy.center[j] / bc.sx.face[face];
        if i + 1 < nx {
            couple(i + 1, j, x_stretch(i + 1), one);
        } else if let XBoundary::Periodic { bloch } = bc.x {
            couple(0, j, x_stretch(nx), bloch);
        }
        if i > 0 {
            couple(i - 1, j, x_stretch(i), one);
        } else if let XBoundary::Periodic { bloch } = bc.x {
            couple(nx - 1, j, x_stretch(0), one / bloch);
        }

        // y faces
        let y_stretch = |face: usize| bc.sx.center[i] / bc.sy.face[face];
        if j + 1 < ny {
            couple(i, j + 1, y_stretch(j + 1), one);
        }
        if j > 0 {
            couple(i, j - 1, y_stretch(j), one);
        }

        row.push((unknown_of_cell[c], diag));
        rows.push(row);
    }

    Ok(AssembledSystem {
        matrix: SparseMatrix::from_rows(rows),
        nx,
        ny,
        unknown_of_cell,
        cell_of_unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, slab, BoundingBox, ShapeList};
    use crate::materials::FluidProperties;

    const AIR: FluidProperties = FluidProperties::standard_air();

    fn media(f: f64) -> Media {
        Media::new(&AIR, &PorousMaterialParams::melamine(), f).unwrap()
    }

    #[test]
    fn plane_wave_satisfies_periodic_rows() {
        let (f, h) = (1000.0, 0.25e-3);
        let (nx, ny) = (40, 30);
        let map = MaterialMap::filled([0.0, 0.0], h, nx, ny, Material::Air);
        let k = AIR.wavenumber(f);
        let theta = 30f64.to_radians();
        let (kx, ky) = (k * theta.sin(), k * theta.cos());
        let period = nx as f64 * h;
        let bc = BoundarySpec::plain(nx, ny, XBoundary::floquet(k, theta, period));
        let sys = assemble_system(&map, &media(f), f, &bc).unwrap();

        let wave = |i: usize, j: usize| {
            let [x, y] = map.cell_center(i, j);
            Complex64::from_polar(1.0, -(kx * x + ky * y))
        };
        let p: Vec<_> = (0..sys.unknowns()).map(|u| {
            let (i, j) = sys.cell(u);
            wave(i, j)
        }).collect();
        let ap = sys.matrix.mul_vec(&p);
        // interior rows (the top and bottom rows see the hard domain edge)
        let scale = 4.0 / (AIR.density * h * h);
        for u in 0..sys.unknowns() {
            let (_, j) = sys.cell(u);
            if j == 0 || j + 1 == ny {
                continue;
            }
            let rel = ap[u].norm() / scale;
            assert!(rel < 1e-3, "row {u}: relative residual {rel:e}");
            assert!(rel < (k * h).powi(2), "row {u}: residual not O(k²Δ²)");
        }
    }

    #[test]
    fn isolated_cavity_is_a_single_unknown() {
        let f = 500.0;
        let mut map = MaterialMap::filled([0.0, 0.0], 1e-3, 3, 3, Material::Rigid);
        map.set(1, 1, Material::Air);
        let bc = BoundarySpec::plain(3, 3, XBoundary::Rigid);
        let sys = assemble_system(&map, &media(f), f, &bc).unwrap();
        assert_eq!(sys.unknowns(), 1);
        assert_eq!(sys.matrix.nnz(), 1);
        let omega = 2.0 * PI * f;
        let expected = omega * omega / AIR.bulk_modulus();
        assert!((sys.matrix.get(0, 0) - expected).norm() < 1e-12 * expected);
    }

    #[test]
    fn all_rigid_map_is_degenerate() {
        let map = MaterialMap::filled([0.0, 0.0], 1e-3, 4, 4, Material::Rigid);
        let bc = BoundarySpec::plain(4, 4, XBoundary::Rigid);
        assert!(matches!(
            assemble_system(&map, &media(100.0), 100.0, &bc),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn sparsity_is_five_point_plus_wrap() {
        let (f, h) = (2000.0, 0.25e-3);
        let shapes = slab(10e-3, 4e-3, Material::Porous);
        let map = rasterize(&shapes, BoundingBox::new([0.0, 0.0], [10e-3, 8e-3]), h).unwrap();
        let bc = BoundarySpec::plain(map.nx, map.ny, XBoundary::floquet(AIR.wavenumber(f), 0.3, 10e-3));
        let sys = assemble_system(&map, &media(f), f, &bc).unwrap();
        for r in 0..sys.unknowns() {
            assert!(sys.matrix.row(r).count() <= 5);
        }
        assert!(sys.matrix.bandwidth() <= map.nx);
    }

    #[test]
    fn assembly_is_deterministic_and_symmetric_without_floquet() {
        let (f, h) = (1500.0, 0.5e-3);
        let mut shapes = ShapeList::empty();
        shapes.extend(&slab(6e-3, 3e-3, Material::Porous));
        let map = rasterize(&shapes, BoundingBox::new([0.0, 0.0], [8e-3, 6e-3]), h).unwrap();
        let bc = BoundarySpec::plain(map.nx, map.ny, XBoundary::Rigid);
        let a = assemble_system(&map, &media(f), f, &bc).unwrap();
        let b = assemble_system(&map, &media(f), f, &bc).unwrap();
        assert_eq!(a.matrix, b.matrix);
        for (r, c, v) in a.matrix.triplets() {
            assert_eq!(a.matrix.get(c, r), v);
        }
    }

    #[test]
    fn floquet_transpose_reverses_the_angle() {
        let (f, h, period) = (1000.0, 0.5e-3, 5e-3);
        let map = MaterialMap::filled([0.0, 0.0], h, 10, 6, Material::Air);
        let k = AIR.wavenumber(f);
        let plus = assemble_system(&map, &media(f), f, &BoundarySpec::plain(10, 6, XBoundary::floquet(k, 0.4, period))).unwrap();
        let minus = assemble_system(&map, &media(f), f, &BoundarySpec::plain(10, 6, XBoundary::floquet(k, -0.4, period))).unwrap();
        for (r, c, v) in plus.matrix.triplets() {
            assert!((minus.matrix.get(c, r) - v).norm() < 1e-9 * v.norm());
        }
    }
}
