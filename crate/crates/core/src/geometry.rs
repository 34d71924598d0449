//! Parametric unit cell of the rigid-metaporous array and its rasterization.
//!
//! Unit-cell frame: `x ∈ [0, Λ]` across the period, `y` upward from the
//! bottom of the rigid floor. The tunnel interior spans `y ∈ [t, t + h]` and
//! the mouth plane is `y = t + h`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Material {
    Air = 0,
    Porous = 1,
    Rigid = 2,
}

/// What a shape represents in the absorber; used for counting and stripping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeRole {
    Wall,
    Floor,
    Protrusion,
    Wedge,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Rect { min: [f64; 2], max: [f64; 2] },
    Triangle { vertices: [[f64; 2]; 3] },
}

impl Primitive {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Primitive::Rect { min, max } => x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1],
            Primitive::Triangle { vertices: [a, b, c] } => {
                let d1 = edge_sign([x, y], a, b);
                let d2 = edge_sign([x, y], b, c);
                let d3 = edge_sign([x, y], c, a);
                let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
                let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
                !(has_neg && has_pos)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Rect { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            Primitive::Triangle { vertices: [a, b, c] } => 0.5 * edge_sign(a, b, c).abs(),
        }
    }

    pub fn bounds(&self) -> BoundingBox {
        match *self {
            Primitive::Rect { min, max } => BoundingBox { min, max },
            Primitive::Triangle { vertices } => {
                let mut bb = BoundingBox::empty();
                for v in vertices {
                    bb.include(v);
                }
                bb
            }
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        match *self {
            Primitive::Rect { min, max } => Primitive::Rect {
                min: [min[0] + dx, min[1] + dy],
                max: [max[0] + dx, max[1] + dy],
            },
            Primitive::Triangle { vertices } => Primitive::Triangle {
                vertices: vertices.map(|v| [v[0] + dx, v[1] + dy]),
            },
        }
    }

    /// Reflection `x -> axis2 - x` (pass twice the mirror-line abscissa).
    pub fn mirrored(&self, axis2: f64) -> Self {
        match *self {
            Primitive::Rect { min, max } => Primitive::Rect {
                min: [axis2 - max[0], min[1]],
                max: [axis2 - min[0], max[1]],
            },
            Primitive::Triangle { vertices: [a, b, c] } => Primitive::Triangle {
                vertices: [[axis2 - a[0], a[1]], [axis2 - c[0], c[1]], [axis2 - b[0], b[1]]],
            },
        }
    }
}

fn edge_sign(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (p[0] - b[0]) * (a[1] - b[1]) - (a[0] - b[0]) * (p[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub primitive: Primitive,
    pub material: Material,
    pub role: ShapeRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoundingBox {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    fn include(&mut self, p: [f64; 2]) {
        for k in 0..2 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// A list of tagged shapes plus the smallest feature the grid must resolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeList {
    pub shapes: Vec<Shape>,
    /// Rasterization requires `Δ ≤ min_feature / 2`.
    pub min_feature: f64,
}

impl ShapeList {
    pub fn empty() -> Self {
        Self {
            shapes: Vec::new(),
            min_feature: f64::INFINITY,
        }
    }

    pub fn push(&mut self, primitive: Primitive, material: Material, role: ShapeRole) {
        self.shapes.push(Shape { primitive, material, role });
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn count(&self, role: ShapeRole) -> usize {
        self.shapes.iter().filter(|s| s.role == role).count()
    }

    /// Union of all shape bounds; `None` for an empty list.
    pub fn bounds(&self) -> Option<BoundingBox> {
        let mut it = self.shapes.iter();
        let mut bb = it.next()?.primitive.bounds();
        for s in it {
            let b = s.primitive.bounds();
            bb.include(b.min);
            bb.include(b.max);
        }
        Some(bb)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            shapes: self
                .shapes
                .iter()
                .map(|s| Shape { primitive: s.primitive.translated(dx, dy), ..*s })
                .collect(),
            min_feature: self.min_feature,
        }
    }

    pub fn mirrored(&self, axis: f64) -> Self {
        Self {
            shapes: self
                .shapes
                .iter()
                .map(|s| Shape { primitive: s.primitive.mirrored(2.0 * axis), ..*s })
                .collect(),
            min_feature: self.min_feature,
        }
    }

    /// Keeps only shapes whose role passes `keep`.
    pub fn retain_roles(&self, keep: impl Fn(ShapeRole) -> bool) -> Self {
        Self {
            shapes: self.shapes.iter().copied().filter(|s| keep(s.role)).collect(),
            min_feature: self.min_feature,
        }
    }

    pub fn extend(&mut self, other: &ShapeList) {
        self.shapes.extend_from_slice(&other.shapes);
        self.min_feature = self.min_feature.min(other.min_feature);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtrusionLayout {
    /// Opposite walls offset by half a pitch.
    Staggered,
    /// Protrusions face each other at the same depth.
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallConvention {
    /// Neighbouring tunnels share one partition of thickness t: Λ = w + t.
    Shared,
    /// Every tunnel owns both walls: Λ = w + 2t.
    Separate,
}

/// Parametric description of one absorber unit. All lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCellGeometry {
    /// h, depth of the tunnel from mouth to floor.
    pub tunnel_height: f64,
    /// t, thickness of walls, floor and protrusions.
    pub thickness: f64,
    /// d, pitch of the protrusions along one wall.
    pub protrusion_spacing: f64,
    /// w, clear width of the tunnel.
    pub tunnel_width: f64,
    /// p, length of each protrusion into the tunnel.
    pub protrusion_length: f64,
    pub wedge_length: f64,
    pub wedge_base_width: f64,
    /// s0, depth below the mouth of the first protrusion's upper face.
    pub protrusion_offset: f64,
    pub layout: ProtrusionLayout,
    pub walls: WallConvention,
}

impl Default for UnitCellGeometry {
    fn default() -> Self {
        Self {
            tunnel_height: 81e-3,
            thickness: 1e-3,
            protrusion_spacing: 5e-3,
            tunnel_width: 9e-3,
            protrusion_length: 2.98e-3,
            wedge_length: 70e-3,
            wedge_base_width: 9e-3,
            protrusion_offset: 5e-3,
            layout: ProtrusionLayout::Staggered,
            walls: WallConvention::Shared,
        }
    }
}

impl UnitCellGeometry {
    /// Λ.
    pub fn period(&self) -> f64 {
        self.tunnel_width + self.wall_thickness() * 2.0
    }

    /// Thickness of each side wall inside one cell.
    fn wall_thickness(&self) -> f64 {
        match self.walls {
            WallConvention::Shared => 0.5 * self.thickness,
            WallConvention::Separate => self.thickness,
        }
    }

    /// Height of the mouth plane above the bottom of the floor.
    pub fn mouth(&self) -> f64 {
        self.thickness + self.tunnel_height
    }

    pub fn p_over_w(&self) -> f64 {
        self.protrusion_length / self.tunnel_width
    }

    pub fn with_p_over_w(mut self, ratio: f64) -> Self {
        self.protrusion_length = ratio * self.tunnel_width;
        self
    }

    pub fn min_feature(&self) -> f64 {
        let t = self.thickness;
        let mut m = t.min(self.tunnel_width - 2.0 * self.protrusion_length);
        if self.protrusion_length > 0.0 {
            m = m.min(self.protrusion_spacing - t);
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tunnel_height h", self.tunnel_height),
            ("thickness t", self.thickness),
            ("protrusion_spacing d", self.protrusion_spacing),
            ("tunnel_width w", self.tunnel_width),
            ("wedge_length", self.wedge_length),
            ("wedge_base_width", self.wedge_base_width),
            ("protrusion_offset s0", self.protrusion_offset),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        let p = self.protrusion_length;
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::Validation(format!("protrusion length p must be >= 0, got {p}")));
        }
        if 2.0 * p >= self.tunnel_width {
            return Err(Error::Validation(format!(
                "2p < w violated: p = {p}, w = {} closes the channel",
                self.tunnel_width
            )));
        }
        if p > 0.0 && self.protrusion_spacing <= self.thickness {
            return Err(Error::Validation(format!(
                "protrusion spacing d = {} must exceed thickness t = {}",
                self.protrusion_spacing, self.thickness
            )));
        }
        if self.wedge_base_width > self.tunnel_width {
            return Err(Error::Validation(format!(
                "w_base <= w violated: {} > {}",
                self.wedge_base_width, self.tunnel_width
            )));
        }
        if self.wedge_length > self.tunnel_height {
            return Err(Error::Validation(format!(
                "l_wedge <= h violated: {} > {}",
                self.wedge_length, self.tunnel_height
            )));
        }
        Ok(())
    }

    /// Depths below the mouth of the upper faces of the protrusions on the
    /// (left, right) walls. A protrusion is kept when it fits above the floor.
    pub fn protrusion_depths(&self) -> (Vec<f64>, Vec<f64>) {
        if self.protrusion_length <= 0.0 {
            return (Vec::new(), Vec::new());
        }
        let d = self.protrusion_spacing;
        let series = |start: f64| {
            let mut out = Vec::new();
            let mut k = 0usize;
            loop {
                let depth = start + k as f64 * d;
                // tolerance keeps exact fits like 5 + 15*5 + 1 = 81 mm
                if depth + self.thickness > self.tunnel_height + 1e-9 * self.tunnel_height {
                    break;
                }
                out.push(depth);
                k += 1;
            }
            out
        };
        let s0 = self.protrusion_offset;
        let right_start = match self.layout {
            ProtrusionLayout::Staggered => s0 + 0.5 * d,
            ProtrusionLayout::Aligned => s0,
        };
        (series(s0), series(right_start))
    }
}

/// Rigid walls, floor, protrusions and the porous wedge of one unit cell.
pub fn build_unit_cell(params: &UnitCellGeometry) -> Result<ShapeList> {
    params.validate()?;
    let t = params.thickness;
    let lam = params.period();
    let tw = params.wall_thickness();
    let mouth = params.mouth();
    let mut list = ShapeList {
        shapes: Vec::new(),
        min_feature: params.min_feature(),
    };

    list.push(rect(0.0, 0.0, tw, mouth), Material::Rigid, ShapeRole::Wall);
    list.push(rect(lam - tw, 0.0, lam, mouth), Material::Rigid, ShapeRole::Wall);
    list.push(rect(0.0, 0.0, lam, t), Material::Rigid, ShapeRole::Floor);

    let (left, right) = params.protrusion_depths();
    let p = params.protrusion_length;
    let (x_left, x_right) = (tw, tw + params.tunnel_width);
    for depth in left {
        list.push(
            rect(x_left, mouth - depth - t, x_left + p, mouth - depth),
            Material::Rigid,
            ShapeRole::Protrusion,
        );
    }
    for depth in right {
        list.push(
            rect(x_right - p, mouth - depth - t, x_right, mouth - depth),
            Material::Rigid,
            ShapeRole::Protrusion,
        );
    }

    let xc = 0.5 * lam;
    let half = 0.5 * params.wedge_base_width;
    list.push(
        Primitive::Triangle {
            vertices: [[xc - half, t], [xc + half, t], [xc, t + params.wedge_length]],
        },
        Material::Porous,
        ShapeRole::Wedge,
    );
    Ok(list)
}

/// `n_units` copies of the unit cell at pitch Λ, starting at x = 0.
///
/// With shared walls the two outermost walls are thickened to the full t, so
/// the array spans `[-t/2, nΛ + t/2]`.
pub fn build_finite_array(params: &UnitCellGeometry, n_units: usize) -> Result<ShapeList> {
    if n_units == 0 {
        return Err(Error::Validation("finite array needs at least one unit".into()));
    }
    let cell = build_unit_cell(params)?;
    let lam = params.period();
    let mut out = ShapeList {
        shapes: Vec::with_capacity(cell.len() * n_units + 2),
        min_feature: cell.min_feature,
    };
    for k in 0..n_units {
        out.extend(&cell.translated(k as f64 * lam, 0.0));
    }
    if params.walls == WallConvention::Shared {
        let half = 0.5 * params.thickness;
        let mouth = params.mouth();
        let width = n_units as f64 * lam;
        out.push(rect(-half, 0.0, 0.0, mouth), Material::Rigid, ShapeRole::Wall);
        out.push(rect(width, 0.0, width + half, mouth), Material::Rigid, ShapeRole::Wall);
        out.push(rect(-half, 0.0, 0.0, params.thickness), Material::Rigid, ShapeRole::Floor);
        out.push(
            rect(width, 0.0, width + half, params.thickness),
            Material::Rigid,
            ShapeRole::Floor,
        );
    }
    Ok(out)
}

/// Homogeneous layer `y ∈ [0, thickness]` spanning `x ∈ [0, width]`.
pub fn slab(width: f64, thickness: f64, material: Material) -> ShapeList {
    let mut list = ShapeList {
        shapes: Vec::new(),
        min_feature: thickness,
    };
    list.push(rect(0.0, 0.0, width, thickness), material, ShapeRole::Block);
    list
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Primitive {
    Primitive::Rect { min: [x0, y0], max: [x1, y1] }
}

/// Per-cell material classification on a uniform square grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterialMap {
    /// Δ in metres, stored as raw bits so the map can derive `Eq`.
    spacing_bits: u64,
    origin_bits: [u64; 2],
    pub nx: usize,
    pub ny: usize,
    cells: Vec<Material>,
}

impl MaterialMap {
    pub fn filled(origin: [f64; 2], spacing: f64, nx: usize, ny: usize, material: Material) -> Self {
        Self {
            spacing_bits: spacing.to_bits(),
            origin_bits: origin.map(f64::to_bits),
            nx,
            ny,
            cells: vec![material; nx * ny],
        }
    }

    pub fn spacing(&self) -> f64 {
        f64::from_bits(self.spacing_bits)
    }

    /// Lower-left corner of the grid.
    pub fn origin(&self) -> [f64; 2] {
        self.origin_bits.map(f64::from_bits)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let [x0, y0] = self.origin();
        let h = self.spacing();
        [x0 + (i as f64 + 0.5) * h, y0 + (j as f64 + 0.5) * h]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Material {
        self.cells[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, m: Material) {
        self.cells[j * self.nx + i] = m;
    }

    pub fn cells(&self) -> &[Material] {
        &self.cells
    }

    pub fn count(&self, m: Material) -> usize {
        self.cells.iter().filter(|&&c| c == m).count()
    }

    /// Map with columns reversed.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.set(self.nx - 1 - i, j, self.get(i, j));
            }
        }
        out
    }

    /// Plain-text PGM: air black, porous grey, rigid white; top row first.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n2\n", self.nx, self.ny);
        for j in (0..self.ny).rev() {
            let row: Vec<String> = (0..self.nx).map(|i| (self.get(i, j) as u8).to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    /// One CSV row per grid row (bottom row first), 0 = air, 1 = porous, 2 = rigid.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() * 2);
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|i| (self.get(i, j) as u8).to_string()).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_pgm().as_bytes())?;
        Ok(())
    }
}

/// Classifies every grid cell by centre containment, RIGID > POROUS > AIR.
///
/// `domain` must be an integer number of cells wide and tall.
pub fn rasterize(shapes: &ShapeList, domain: BoundingBox, spacing: f64) -> Result<MaterialMap> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::Validation(format!("grid spacing must be positive, got {spacing}")));
    }
    if spacing > 0.5 * shapes.min_feature * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!(
            "grid spacing {spacing:e} m exceeds half the smallest feature ({:e} m)",
            shapes.min_feature
        )));
    }
    let nx = cells_across(domain.width(), spacing)?;
    let ny = cells_across(domain.height(), spacing)?;
    let mut map = MaterialMap::filled(domain.min, spacing, nx, ny, Material::Air);

    // porous first, rigid second: later writes win
    for pass in [Material::Porous, Material::Rigid] {
        for shape in shapes.shapes.iter().filter(|s| s.material == pass) {
            let bb = shape.primitive.bounds();
            let (i0, i1) = index_range(bb.min[0], bb.max[0], domain.min[0], spacing, nx);
            let (j0, j1) = index_range(bb.min[1], bb.max[1], domain.min[1], spacing, ny);
            for j in j0..j1 {
                for i in i0..i1 {
                    let [x, y] = map.cell_center(i, j);
                    if shape.primitive.contains(x, y) {
                        map.set(i, j, pass);
                    }
                }
            }
        }
    }
    Ok(map)
}

fn cells_across(length: f64, spacing: f64) -> Result<usize> {
    let n = (length / spacing).round();
    if n < 1.0 || (n * spacing - length).abs() > 1e-6 * spacing {
        return Err(Error::Resolution(format!(
            "domain extent {length:e} m is not a whole number of {spacing:e} m cells"
        )));
    }
    Ok(n as usize)
}

fn index_range(lo: f64, hi: f64, origin: f64, h: f64, n: usize) -> (usize, usize) {
    let a = ((lo - origin) / h - 1.0).floor().max(0.0) as usize;
    let b = (((hi - origin) / h + 1.0).ceil().max(0.0) as usize).min(n);
    (a.min(n), b)
}

/// `[geometry]` configuration section; lengths in millimetres.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub h_mm: Option<f64>,
    pub t_mm: Option<f64>,
    pub d_mm: Option<f64>,
    pub w_mm: Option<f64>,
    pub p_mm: Option<f64>,
    pub wedge_length_mm: Option<f64>,
    pub wedge_base_mm: Option<f64>,
    pub protrusion_offset_mm: Option<f64>,
    pub layout: Option<ProtrusionLayout>,
    pub walls: Option<WallConvention>,
}

impl GeometryConfig {
    pub fn resolve(&self) -> Result<UnitCellGeometry> {
        let mut g = UnitCellGeometry::default();
        let mm = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v * 1e-3;
            }
        };
        mm(&mut g.tunnel_height, self.h_mm);
        mm(&mut g.thickness, self.t_mm);
        mm(&mut g.protrusion_spacing, self.d_mm);
        mm(&mut g.tunnel_width, self.w_mm);
        mm(&mut g.protrusion_length, self.p_mm);
        mm(&mut g.wedge_length, self.wedge_length_mm);
        mm(&mut g.wedge_base_width, self.wedge_base_mm);
        mm(&mut g.protrusion_offset, self.protrusion_offset_mm);
        if let Some(l) = self.layout {
            g.layout = l;
        }
        if let Some(w) = self.walls {
            g.walls = w;
        }
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DX: f64 = 0.25e-3;

    fn cell_box(g: &UnitCellGeometry) -> BoundingBox {
        BoundingBox::new([0.0, 0.0], [g.period(), g.mouth()])
    }

    #[test]
    fn no_protrusions_when_p_is_zero() {
        let g = UnitCellGeometry { protrusion_length: 0.0, ..Default::default() };
        let cell = build_unit_cell(&g).unwrap();
        assert_eq!(cell.count(ShapeRole::Protrusion), 0);
        assert_eq!(cell.count(ShapeRole::Wall), 2);
        assert_eq!(cell.count(ShapeRole::Floor), 1);
        assert_eq!(cell.count(ShapeRole::Wedge), 1);
    }

    #[test]
    fn default_protrusion_count_by_enumeration() {
        let g = UnitCellGeometry { layout: ProtrusionLayout::Aligned, ..Default::default() };
        // explicit enumeration in integer micrometres: upper faces at
        // 5, 10, ..., 80 mm below the mouth, each 1 mm thick, 81 mm deep tunnel
        let expected = (0..).map(|k| 5000 + 5000 * k).take_while(|d| d + 1000 <= 81000).count();
        assert_eq!(expected, 16);
        let (left, right) = g.protrusion_depths();
        assert_eq!(left.len(), expected);
        assert_eq!(right.len(), expected);

        let staggered = UnitCellGeometry::default();
        let (left, right) = staggered.protrusion_depths();
        assert_eq!(left.len(), 16);
        // right wall starts half a pitch deeper: 7.5, ..., 77.5 mm
        assert_eq!(right.len(), 15);
        assert!((right[0] - 7.5e-3).abs() < 1e-12);
    }

    #[test]
    fn closed_channel_is_rejected() {
        let g = UnitCellGeometry { protrusion_length: 5e-3, ..Default::default() };
        match build_unit_cell(&g) {
            Err(Error::Validation(msg)) => assert!(msg.contains("2p < w"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn other_invariants_are_named() {
        let g = UnitCellGeometry { wedge_base_width: 10e-3, ..Default::default() };
        assert!(matches!(g.validate(), Err(Error::Validation(m)) if m.contains("w_base")));
        let g = UnitCellGeometry { wedge_length: 90e-3, ..Default::default() };
        assert!(matches!(g.validate(), Err(Error::Validation(m)) if m.contains("l_wedge")));
        let g = UnitCellGeometry { thickness: 0.0, ..Default::default() };
        assert!(matches!(g.validate(), Err(Error::Validation(m)) if m.contains("thickness")));
    }

    #[test]
    fn period_conventions() {
        let g = UnitCellGeometry::default();
        assert!((g.period() - 10e-3).abs() < 1e-15);
        let g = UnitCellGeometry { walls: WallConvention::Separate, ..g };
        assert!((g.period() - 11e-3).abs() < 1e-15);
    }

    #[test]
    fn empty_shape_list_is_all_air() {
        let map = rasterize(&ShapeList::empty(), BoundingBox::new([0.0, 0.0], [5e-3, 3e-3]), DX).unwrap();
        assert_eq!((map.nx, map.ny), (20, 12));
        assert_eq!(map.count(Material::Air), 240);
    }

    #[test]
    fn wedge_area_is_preserved() {
        let g = UnitCellGeometry::default();
        let cell = build_unit_cell(&g).unwrap();
        let wedge_only = cell.retain_roles(|r| r == ShapeRole::Wedge);
        let map = rasterize(&wedge_only, cell_box(&g), DX).unwrap();
        let area = map.count(Material::Porous) as f64 * DX * DX;
        let analytic: f64 = 0.5 * 9e-3 * 70e-3;
        assert!((analytic - 315e-6).abs() < 1e-15);
        assert!((area - analytic).abs() / analytic < 0.02, "area {area:e}");
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let g = UnitCellGeometry::default();
        let cell = build_unit_cell(&g).unwrap();
        assert!(matches!(rasterize(&cell, cell_box(&g), 1e-3), Err(Error::Resolution(_))));
        assert!(rasterize(&cell, cell_box(&g), 0.5e-3).is_ok());
    }

    fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
    }

    fn distance_to_boundary(prim: &Primitive, p: [f64; 2]) -> f64 {
        let edges: Vec<([f64; 2], [f64; 2])> = match *prim {
            Primitive::Rect { min, max } => {
                let c = [min, [max[0], min[1]], max, [min[0], max[1]]];
                (0..4).map(|k| (c[k], c[(k + 1) % 4])).collect()
            }
            Primitive::Triangle { vertices: v } => (0..3).map(|k| (v[k], v[(k + 1) % 3])).collect(),
        };
        edges.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn refinement_only_changes_cells_near_boundaries() {
        let g = UnitCellGeometry::default();
        let cell = build_unit_cell(&g).unwrap();
        let coarse = rasterize(&cell, cell_box(&g), DX).unwrap();
        let fine = rasterize(&cell, cell_box(&g), 0.5 * DX).unwrap();
        for j in 0..fine.ny {
            for i in 0..fine.nx {
                let (ic, jc) = (i / 2, j / 2);
                if fine.get(i, j) == coarse.get(ic, jc) {
                    continue;
                }
                let [x, y] = fine.cell_center(i, j);
                let near_boundary = cell
                    .shapes
                    .iter()
                    .any(|s| distance_to_boundary(&s.primitive, [x, y]) <= DX);
                assert!(near_boundary, "interior classification changed at fine cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn finite_array_dimensions() {
        let g = UnitCellGeometry::default();
        let one = build_finite_array(&g, 1).unwrap();
        let cell = build_unit_cell(&g).unwrap();
        assert_eq!(one.len(), cell.len() + 4);
        let bb = one.bounds().unwrap();
        assert!((bb.width() - (g.period() + g.thickness)).abs() < 1e-12);

        let thirty = build_finite_array(&g, 30).unwrap();
        assert_eq!(thirty.len(), 30 * cell.len() + 4);
        let bb = thirty.bounds().unwrap();
        assert!((bb.width() - 0.301).abs() < 1e-12, "width {}", bb.width());
        assert!(build_finite_array(&g, 0).is_err());
    }

    #[test]
    fn walls_and_protrusions_survive_rasterization() {
        let g = UnitCellGeometry::default();
        let arr = build_finite_array(&g, 3).unwrap();
        let bb = arr.bounds().unwrap();
        let map = rasterize(&arr, bb, DX).unwrap();
        // every wall at least four cells across, checked on a row between protrusions
        let mid = g.mouth() - 1.5e-3;
        let j = ((mid - bb.min[1]) / DX) as usize;
        let mut runs = Vec::new();
        let mut run = 0;
        for i in 0..map.nx {
            if map.get(i, j) == Material::Rigid {
                run += 1;
            } else if run > 0 {
                runs.push(run);
                run = 0;
            }
        }
        if run > 0 {
            runs.push(run);
        }
        assert_eq!(runs.len(), 4);
        assert!(runs.iter().all(|&r| r >= 4), "{runs:?}");

        // each protrusion covers at least 4 x 1 cells
        for s in arr.shapes.iter().filter(|s| s.role == ShapeRole::Protrusion) {
            let sb = s.primitive.bounds();
            let mut n = 0;
            for jj in 0..map.ny {
                for ii in 0..map.nx {
                    let [x, y] = map.cell_center(ii, jj);
                    if s.primitive.contains(x, y) {
                        assert_eq!(map.get(ii, jj), Material::Rigid);
                        n += 1;
                    }
                }
            }
            assert!(n >= 4, "protrusion at {sb:?} has {n} cells");
        }
    }

    #[test]
    fn tunnels_are_enclosed_except_at_the_mouth() {
        let g = UnitCellGeometry::default();
        let arr = build_finite_array(&g, 2).unwrap();
        let bb = arr.bounds().unwrap();
        let map = rasterize(&arr, bb, DX).unwrap();
        // flood air from a cell inside the first tunnel, never leaving the structure height
        let start_x = ((0.5 * g.period() - bb.min[0]) / DX) as usize;
        let start_y = ((g.thickness + 75e-3 - bb.min[1]) / DX) as usize;
        assert_ne!(map.get(start_x, start_y), Material::Rigid);
        let mut seen = vec![false; map.nx * map.ny];
        let mut stack = vec![(start_x, start_y)];
        let mut reached_mouth = false;
        while let Some((i, j)) = stack.pop() {
            if seen[j * map.nx + i] || map.get(i, j) == Material::Rigid {
                continue;
            }
            seen[j * map.nx + i] = true;
            if j + 1 == map.ny {
                reached_mouth = true;
                continue;
            }
            let x = map.cell_center(i, 0)[0];
            assert!(x < g.period(), "leaked into the neighbouring tunnel at x = {x}");
            if i > 0 {
                stack.push((i - 1, j));
            }
            if i + 1 < map.nx {
                stack.push((i + 1, j));
            }
            if j > 0 {
                stack.push((i, j - 1));
            }
            stack.push((i, j + 1));
        }
        assert!(reached_mouth);
    }

    #[test]
    fn mirror_commutes_with_rasterization() {
        let g = UnitCellGeometry::default();
        let cell = build_unit_cell(&g).unwrap();
        let lam = g.period();
        let direct = rasterize(&cell, cell_box(&g), DX).unwrap();
        let mirrored = rasterize(&cell.mirrored(0.5 * lam), cell_box(&g), DX).unwrap();
        assert_eq!(mirrored, direct.mirrored_x());

        // the aligned cell is itself symmetric
        let aligned = UnitCellGeometry { layout: ProtrusionLayout::Aligned, ..g };
        let map = rasterize(&build_unit_cell(&aligned).unwrap(), cell_box(&g), DX).unwrap();
        assert_eq!(map, map.mirrored_x());
    }

    #[test]
    fn debug_dumps() {
        let map = rasterize(&slab(1e-3, 0.5e-3, Material::Porous), BoundingBox::new([0.0, 0.0], [1e-3, 1e-3]), DX)
            .unwrap();
        let pgm = map.to_pgm();
        assert!(pgm.starts_with("P2\n4 4\n2\n"));
        assert_eq!(pgm.lines().nth(3).unwrap(), "0 0 0 0");
        let csv = map.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "1,1,1,1");
    }

    #[test]
    fn config_is_in_millimetres() {
        let cfg = GeometryConfig { p_mm: Some(2.0), layout: Some(ProtrusionLayout::Aligned), ..Default::default() };
        let g = cfg.resolve().unwrap();
        assert!((g.protrusion_length - 2e-3).abs() < 1e-15);
        assert_eq!(g.layout, ProtrusionLayout::Aligned);
        assert!(GeometryConfig { p_mm: Some(4.5), ..Default::default() }.resolve().is_err());
    }

    proptest! {
        #[test]
        fn rasterization_is_deterministic(p in 0.0f64..3.0, wedge in 10.0f64..80.0) {
            let g = UnitCellGeometry {
                protrusion_length: p * 1e-3,
                wedge_length: wedge * 1e-3,
                ..Default::default()
            };
            let cell = build_unit_cell(&g).unwrap();
            let a = rasterize(&cell, cell_box(&g), DX).unwrap();
            let b = rasterize(&cell, cell_box(&g), DX).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
