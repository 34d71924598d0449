//! Equivalent-fluid acoustic properties of air and rigid-frame porous media.
//!
//! Time convention used throughout the crate: fields oscillate as `e^{+iωt}`.
//! A wave travelling along `+ξ` carries the spatial factor `e^{-ikξ}` and
//! decays when `Im(k) < 0`. Dissipative media therefore have `Im(ρ) < 0`
//! and `Im(K) > 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermodynamic and transport properties of the saturating fluid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidProperties {
    /// ρ0 in kg/m³.
    pub density: f64,
    /// c0 in m/s.
    pub sound_speed: f64,
    /// η in Pa·s.
    pub dynamic_viscosity: f64,
    /// γ.
    pub heat_capacity_ratio: f64,
    /// P0 in Pa.
    pub ambient_pressure: f64,
    pub prandtl_number: f64,
}

impl FluidProperties {
    /// Air at 20 °C, c0 = 343 m/s.
    pub const fn standard_air() -> Self {
        Self {
            density: 1.21,
            sound_speed: 343.0,
            dynamic_viscosity: 1.81e-5,
            heat_capacity_ratio: 1.4,
            ambient_pressure: 1.013e5,
            prandtl_number: 0.71,
        }
    }

    /// Air with ρ0 = 1.29 kg/m³ and isothermal bulk modulus 1.01e5 Pa (c0 ≈ 280 m/s).
    pub fn isothermal_air() -> Self {
        let density = 1.29;
        Self {
            density,
            sound_speed: (1.01e5_f64 / density).sqrt(),
            ..Self::standard_air()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "standard" | "standard-air" => Ok(Self::standard_air()),
            "isothermal-air" => Ok(Self::isothermal_air()),
            other => Err(Error::Configuration(format!("unknown air preset `{other}`"))),
        }
    }

    /// K0 = ρ0·c0².
    pub fn bulk_modulus(&self) -> f64 {
        self.density * self.sound_speed * self.sound_speed
    }

    pub fn characteristic_impedance(&self) -> f64 {
        self.density * self.sound_speed
    }

    pub fn wavenumber(&self, f: f64) -> f64 {
        2.0 * PI * f / self.sound_speed
    }

    pub fn wavelength(&self, f: f64) -> f64 {
        self.sound_speed / f
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("density", self.density),
            ("sound_speed", self.sound_speed),
            ("dynamic_viscosity", self.dynamic_viscosity),
            ("ambient_pressure", self.ambient_pressure),
            ("prandtl_number", self.prandtl_number),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("fluid {name} must be positive, got {v}")));
            }
        }
        if !(self.heat_capacity_ratio > 1.0) {
            return Err(Error::Validation(format!(
                "ratio of specific heats must exceed 1, got {}",
                self.heat_capacity_ratio
            )));
        }
        Ok(())
    }
}

impl Default for FluidProperties {
    fn default() -> Self {
        Self::standard_air()
    }
}

/// The five Johnson-Champoux-Allard parameters of a rigid-frame porous medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PorousMaterialParams {
    /// ε_p, open porosity.
    pub porosity: f64,
    /// R_f in Pa·s/m².
    pub flow_resistivity: f64,
    /// L_v in m.
    pub viscous_length: f64,
    /// L_th in m.
    pub thermal_length: f64,
    /// τ∞, high-frequency tortuosity.
    pub tortuosity: f64,
}

impl PorousMaterialParams {
    pub const fn melamine() -> Self {
        Self {
            porosity: 0.995,
            flow_resistivity: 10.5e3,
            viscous_length: 240e-6,
            thermal_length: 470e-6,
            tortuosity: 1.0059,
        }
    }

    /// Degenerate medium that behaves as the saturating fluid itself.
    ///
    /// Vanishing resistivity alone is not enough: the characteristic lengths
    /// must also be large, otherwise the boundary-layer terms survive.
    pub const fn air_like() -> Self {
        Self {
            porosity: 1.0,
            flow_resistivity: 1e-6,
            viscous_length: 1.0,
            thermal_length: 1.0,
            tortuosity: 1.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "melamine" => Ok(Self::melamine()),
            "air-like" => Ok(Self::air_like()),
            other => Err(Error::Configuration(format!("unknown porous preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.porosity > 0.0 && self.porosity <= 1.0) {
            return Err(Error::Validation(format!("porosity must lie in (0, 1], got {}", self.porosity)));
        }
        if !(self.flow_resistivity > 0.0) {
            return Err(Error::Validation(format!(
                "flow resistivity must be positive, got {}",
                self.flow_resistivity
            )));
        }
        if !(self.viscous_length > 0.0 && self.viscous_length <= self.thermal_length) {
            return Err(Error::Validation(format!(
                "need 0 < viscous length ({}) <= thermal length ({})",
                self.viscous_length, self.thermal_length
            )));
        }
        if !(self.tortuosity >= 1.0) {
            return Err(Error::Validation(format!("tortuosity must be >= 1, got {}", self.tortuosity)));
        }
        Ok(())
    }
}

impl Default for PorousMaterialParams {
    fn default() -> Self {
        Self::melamine()
    }
}

/// Complex density and bulk modulus of a medium at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveFluid {
    pub frequency: f64,
    pub density: Complex64,
    pub bulk_modulus: Complex64,
}

impl EffectiveFluid {
    pub fn lossless(fluid: &FluidProperties, f: f64) -> Self {
        Self {
            frequency: f,
            density: Complex64::new(fluid.density, 0.0),
            bulk_modulus: Complex64::new(fluid.bulk_modulus(), 0.0),
        }
    }

    pub fn jca(mat: &PorousMaterialParams, fluid: &FluidProperties, f: f64) -> Result<Self> {
        Ok(Self {
            frequency: f,
            density: jca_effective_density(mat, fluid, f)?,
            bulk_modulus: jca_effective_bulk_modulus(mat, fluid, f)?,
        })
    }

    /// k_c = ω·sqrt(ρ/K) on the decaying branch.
    pub fn wavenumber(&self) -> Complex64 {
        let omega = 2.0 * PI * self.frequency;
        decaying_branch(omega * (self.density / self.bulk_modulus).sqrt())
    }

    /// Z_c = sqrt(ρ·K) with positive real part.
    pub fn impedance(&self) -> Complex64 {
        let z = (self.density * self.bulk_modulus).sqrt();
        if z.re < 0.0 {
            -z
        } else {
            z
        }
    }
}

/// Picks the sign of a propagation constant so that `e^{-ikξ}` decays along
/// `+ξ` (`Im k < 0`); purely real values get `Re k ≥ 0`.
pub fn decaying_branch(k: Complex64) -> Complex64 {
    if k.im > 0.0 || (k.im == 0.0 && k.re < 0.0) {
        -k
    } else {
        k
    }
}

/// Anything that can report equivalent-fluid properties at a frequency.
pub trait AcousticMedium {
    fn effective(&self, f: f64) -> Result<EffectiveFluid>;
}

impl AcousticMedium for FluidProperties {
    fn effective(&self, f: f64) -> Result<EffectiveFluid> {
        check_frequency(f)?;
        Ok(EffectiveFluid::lossless(self, f))
    }
}

/// A porous material saturated by a given fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PorousMedium {
    pub material: PorousMaterialParams,
    pub fluid: FluidProperties,
}

impl AcousticMedium for PorousMedium {
    fn effective(&self, f: f64) -> Result<EffectiveFluid> {
        EffectiveFluid::jca(&self.material, &self.fluid, f)
    }
}

impl AcousticMedium for EffectiveFluid {
    fn effective(&self, f: f64) -> Result<EffectiveFluid> {
        check_frequency(f)?;
        if (f - self.frequency).abs() > 1e-9 * self.frequency {
            return Err(Error::Domain(format!(
                "effective fluid evaluated at {} Hz, requested {f} Hz",
                self.frequency
            )));
        }
        Ok(*self)
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency must be positive and finite, got {f}")))
    }
}

/// JCA dynamic density (visco-inertial effects).
pub fn jca_effective_density(mat: &PorousMaterialParams, fluid: &FluidProperties, f: f64) -> Result<Complex64> {
    check_frequency(f)?;
    let i = Complex64::i();
    let omega = 2.0 * PI * f;
    let (eps, rf, lv, tau) = (mat.porosity, mat.flow_resistivity, mat.viscous_length, mat.tortuosity);
    let (rho0, eta) = (fluid.density, fluid.dynamic_viscosity);

    let shape = (1.0 + i * (4.0 * tau * tau * eta * rho0 * omega) / (rf * rf * lv * lv * eps * eps)).sqrt();
    let viscous = (rf * eps) / (i * omega * rho0 * tau) * shape;
    Ok((tau * rho0 / eps) * (1.0 + viscous))
}

/// JCA dynamic bulk modulus (thermal effects).
pub fn jca_effective_bulk_modulus(mat: &PorousMaterialParams, fluid: &FluidProperties, f: f64) -> Result<Complex64> {
    check_frequency(f)?;
    let i = Complex64::i();
    let omega = 2.0 * PI * f;
    let (eps, lth) = (mat.porosity, mat.thermal_length);
    let (rho0, eta, gamma, p0, pr) = (
        fluid.density,
        fluid.dynamic_viscosity,
        fluid.heat_capacity_ratio,
        fluid.ambient_pressure,
        fluid.prandtl_number,
    );

    let shape = (1.0 + i * (rho0 * omega * pr * lth * lth) / (16.0 * eta)).sqrt();
    let thermal = 1.0 + (8.0 * eta) / (i * lth * lth * pr * omega * rho0) * shape;
    Ok((gamma * p0 / eps) / (gamma - (gamma - 1.0) / thermal))
}

/// Complex wavenumber and characteristic impedance `(k_c, Z_c)`.
pub fn characteristic_acoustics<M: AcousticMedium + ?Sized>(medium: &M, f: f64) -> Result<(Complex64, Complex64)> {
    let eff = medium.effective(f)?;
    Ok((eff.wavenumber(), eff.impedance()))
}

/// `[materials]` configuration section. Lengths are given in millimetres.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    /// `standard` (default) or `isothermal-air`.
    pub air: Option<String>,
    pub air_density: Option<f64>,
    pub air_sound_speed: Option<f64>,
    pub air_viscosity: Option<f64>,
    pub air_gamma: Option<f64>,
    pub air_pressure: Option<f64>,
    pub air_prandtl: Option<f64>,
    /// `melamine` (default) or `air-like`.
    pub porous: Option<String>,
    pub porosity: Option<f64>,
    pub flow_resistivity: Option<f64>,
    pub viscous_length_mm: Option<f64>,
    pub thermal_length_mm: Option<f64>,
    pub tortuosity: Option<f64>,
}

impl MaterialsConfig {
    pub fn resolve(&self) -> Result<(FluidProperties, PorousMaterialParams)> {
        let mut fluid = FluidProperties::preset(self.air.as_deref().unwrap_or("standard"))?;
        override_with(&mut fluid.density, self.air_density);
        override_with(&mut fluid.sound_speed, self.air_sound_speed);
        override_with(&mut fluid.dynamic_viscosity, self.air_viscosity);
        override_with(&mut fluid.heat_capacity_ratio, self.air_gamma);
        override_with(&mut fluid.ambient_pressure, self.air_pressure);
        override_with(&mut fluid.prandtl_number, self.air_prandtl);
        fluid.validate()?;

        let mut mat = PorousMaterialParams::preset(self.porous.as_deref().unwrap_or("melamine"))?;
        override_with(&mut mat.porosity, self.porosity);
        override_with(&mut mat.flow_resistivity, self.flow_resistivity);
        override_with(&mut mat.viscous_length, self.viscous_length_mm.map(|v| v * 1e-3));
        override_with(&mut mat.thermal_length, self.thermal_length_mm.map(|v| v * 1e-3));
        override_with(&mut mat.tortuosity, self.tortuosity);
        mat.validate()?;
        Ok((fluid, mat))
    }
}

fn override_with(slot: &mut f64, value: Option<f64>) {
    if let Some(v) = value {
        *slot = v;
    }
}
