//! Complex coordinate stretching `s(ξ) = 1 + σ(ξ)/(iω)` for perfectly
//! matched layers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// PML parameters shared by every absorbing side of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlSettings {
    /// Layer thickness in grid cells.
    pub cells: usize,
    /// Polynomial order of the σ profile.
    pub order: u32,
    /// Theoretical round-trip reflection at the design angle.
    pub reflection: f64,
}

impl Default for PmlSettings {
    fn default() -> Self {
        Self {
            cells: 16,
            order: 2,
            reflection: 1e-6,
        }
    }
}

impl PmlSettings {
    /// σ_max for a layer `cells·Δ` thick such that a plane wave in a medium of
    /// sound speed `c` hitting it at `design_angle` (radians from the normal)
    /// comes back attenuated to `reflection`.
    pub fn sigma_max(&self, spacing: f64, c: f64, design_angle: f64) -> f64 {
        let thickness = self.cells as f64 * spacing;
        let cos = design_angle.cos().max(0.05);
        (self.order as f64 + 1.0) * c * (1.0 / self.reflection).ln() / (2.0 * thickness * cos)
    }
}

/// One absorbing layer at an end of an axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub cells: usize,
    pub order: u32,
    pub sigma_max: f64,
}

impl Layer {
    pub fn from_settings(settings: &PmlSettings, spacing: f64, c: f64, design_angle: f64) -> Self {
        Self {
            cells: settings.cells,
            order: settings.order,
            sigma_max: settings.sigma_max(spacing, c, design_angle),
        }
    }

    fn sigma(&self, depth_cells: f64) -> f64 {
        if depth_cells <= 0.0 {
            return 0.0;
        }
        let r = (depth_cells / self.cells as f64).min(1.0);
        self.sigma_max * r.powi(self.order as i32)
    }
}

/// Stretch factors along one axis, at cell centres and at cell faces.
///
/// Face `k` separates cells `k - 1` and `k`; there are `n + 1` faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Stretch {
    pub center: Vec<Complex64>,
    pub face: Vec<Complex64>,
}

impl Stretch {
    pub fn identity(n: usize) -> Self {
        Self {
            center: vec![Complex64::new(1.0, 0.0); n],
            face: vec![Complex64::new(1.0, 0.0); n + 1],
        }
    }

    /// Axis of `n` cells with optional layers occupying the first (`low`) and
    /// last (`high`) cells.
    pub fn new(n: usize, omega: f64, low: Option<Layer>, high: Option<Layer>) -> Self {
        let s = |sigma: f64| Complex64::new(1.0, -sigma / omega);
        let depth = |pos: f64| {
            // pos in cell units from the lower domain edge
            let mut sigma = 0.0;
            if let Some(l) = low {
                sigma += l.sigma(l.cells as f64 - pos);
            }
            if let Some(h) = high {
                sigma += h.sigma(pos - (n - h.cells) as f64);
            }
            sigma
        };
        Self {
            center: (0..n).map(|k| s(depth(k as f64 + 0.5))).collect(),
            face: (0..=n).map(|k| s(depth(k as f64))).collect(),
        }
    }

    pub fn is_stretched_center(&self, k: usize) -> bool {
        self.center[k] != Complex64::new(1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretch_is_identity_outside_layers() {
        let layer = Layer { cells: 4, order: 2, sigma_max: 100.0 };
        let st = Stretch::new(12, 10.0, Some(layer), Some(layer));
        for k in 4..8 {
            assert_eq!(st.center[k], Complex64::new(1.0, 0.0));
        }
        for k in 4..=8 {
            assert_eq!(st.face[k], Complex64::new(1.0, 0.0));
        }
        assert!(st.center[0].im < st.center[3].im);
        assert_eq!(st.center[0], st.center[11]);
        assert!((st.face[0].im + 10.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_max_scales_with_angle() {
        let s = PmlSettings::default();
        let normal = s.sigma_max(1e-3, 343.0, 0.0);
        let oblique = s.sigma_max(1e-3, 343.0, 60f64.to_radians());
        assert!((oblique / normal - 2.0).abs() < 1e-12);
    }
}
