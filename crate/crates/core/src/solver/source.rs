//! Incident fields that solve the discrete air operator exactly, so TF/SF
//! injection leaks nothing into the scattered-field region.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertical wavenumber of a lattice plane wave with horizontal wavenumber `kx`
/// on the five-point grid: `sin²(ky·Δ/2) = (kΔ/2)² − sin²(kx·Δ/2)`.
pub fn discrete_ky(k: f64, kx: f64, spacing: f64) -> Result<f64> {
    let s2 = (k * spacing / 2.0).powi(2) - (kx * spacing / 2.0).sin().powi(2);
    if !(s2 > 0.0 && s2 < 1.0) {
        return Err(Error::Domain(format!(
            "no propagating lattice wave for k = {k}, kx = {kx}, spacing = {spacing}"
        )));
    }
    Ok(2.0 / spacing * s2.sqrt().asin())
}

/// Down-going plane wave `A·e^{-i·kx·(x − x_ref)}·e^{+i·ky·(y − y_ref)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub amplitude: Complex64,
    pub kx: f64,
    pub ky: f64,
    pub x_ref: f64,
    pub y_ref: f64,
}

impl PlaneWave {
    /// Unit-amplitude wave arriving at `theta` (radians from the downward
    /// normal, positive towards +x), phase-referenced at `(0, y_ref)`.
    pub fn downward(k: f64, theta: f64, spacing: f64, y_ref: f64) -> Result<Self> {
        let kx = k * theta.sin();
        Ok(Self {
            amplitude: Complex64::new(1.0, 0.0),
            kx,
            ky: discrete_ky(k, kx, spacing)?,
            x_ref: 0.0,
            y_ref,
        })
    }

    pub fn scaled(self, c: Complex64) -> Self {
        Self { amplitude: self.amplitude * c, ..self }
    }

    pub fn at(&self, x: f64, y: f64) -> Complex64 {
        self.amplitude * Complex64::from_polar(1.0, -self.kx * (x - self.x_ref) + self.ky * (y - self.y_ref))
    }
}

/// Two-dimensional Gaussian beam as a finite angular spectrum of lattice plane waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    pub theta: f64,
    pub waist: f64,
    pub focus: [f64; 2],
    pub components: Vec<PlaneWave>,
}

impl GaussianBeam {
    /// Beam of waist radius `waist` focused at `focus`, travelling downwards at
    /// `theta`; the angular spectrum is sampled with `n` components and
    /// normalized to unit amplitude at the focus.
    pub fn new(k: f64, theta: f64, waist: f64, focus: [f64; 2], spacing: f64, n: usize) -> Result<Self> {
        if !(waist > 0.0) || n < 3 {
            return Err(Error::Configuration("Gaussian beam needs waist > 0 and at least 3 components".into()));
        }
        // keep every component strictly propagating
        let limit = FRAC_PI_2 - 2f64.to_radians();
        let lo = (-limit - theta).max(-FRAC_PI_2);
        let hi = (limit - theta).min(FRAC_PI_2);
        let step = (hi - lo) / (n - 1) as f64;
        let mut weights = Vec::with_capacity(n);
        let mut components = Vec::with_capacity(n);
        for m in 0..n {
            let psi = lo + step * m as f64;
            let kt = k * psi.sin();
            let w = (-(kt * waist).powi(2) / 4.0).exp() * k * psi.cos() * step;
            if w < 1e-12 {
                continue;
            }
            let phi = theta + psi;
            let kx = k * phi.sin();
            components.push(PlaneWave {
                amplitude: Complex64::new(w, 0.0),
                kx,
                ky: discrete_ky(k, kx, spacing)?,
                x_ref: focus[0],
                y_ref: focus[1],
            });
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        for c in &mut components {
            c.amplitude /= total;
        }
        Ok(Self { theta, waist, focus, components })
    }

    pub fn at(&self, x: f64, y: f64) -> Complex64 {
        self.components.iter().map(|c| c.at(x, y)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Incident {
    Plane(PlaneWave),
    Beam(GaussianBeam),
}

impl Incident {
    pub fn at(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Incident::Plane(w) => w.at(x, y),
            Incident::Beam(b) => b.at(x, y),
        }
    }
}
