//! Reflection, absorption and effective-index extraction from solved fields,
//! the analytic rigid-backed layer, and sweep statistics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{decaying_branch, EffectiveFluid, FluidProperties, PorousMaterialParams};
use crate::solver::{FieldSolution, Incident, Termination, TunnelField};

/// Allowed excursion of |R| above one (and of α outside [0, 1]) before it is
/// treated as a bug rather than noise.
pub const NOISE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionRecord {
    pub frequency: f64,
    pub theta_deg: f64,
    pub reflection: Complex64,
    pub alpha: f64,
}

impl AbsorptionRecord {
    pub fn new(frequency: f64, theta_deg: f64, reflection: Complex64) -> Result<Self> {
        Ok(Self {
            frequency,
            theta_deg,
            reflection,
            alpha: absorption(reflection)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefractiveIndexRecord {
    pub p_over_w: f64,
    pub frequency: f64,
    /// In-tunnel wavelength (m).
    pub wavelength: f64,
    /// Free-space wavelength (m).
    pub free_wavelength: f64,
    pub n_r: f64,
}

/// Complex amplitude of the up-going zeroth Floquet order at `y_m`,
/// normalized by the incident amplitude and referenced to the mouth plane.
pub fn extract_specular_reflection(sol: &FieldSolution, y_m: f64) -> Result<Complex64> {
    let period = sol
        .period
        .ok_or_else(|| Error::Configuration("specular extraction needs a periodic solve".into()))?;
    let wave = match &sol.incident {
        Incident::Plane(w) => *w,
        Incident::Beam(_) => {
            return Err(Error::Configuration("specular extraction needs plane-wave incidence".into()));
        }
    };
    let k = (wave.kx * wave.kx + wave.ky * wave.ky).sqrt();
    let sin = (wave.kx / k).abs();
    if period * k * (1.0 + sin) >= 2.0 * PI {
        return Err(Error::Validation("higher diffraction orders propagate; zeroth-order projection is invalid".into()));
    }
    let j = sol
        .row_at(y_m)
        .ok_or_else(|| Error::Configuration(format!("measurement line y = {y_m} m lies outside the domain")))?;
    for i in 0..sol.nx {
        let c = sol.index(i, j);
        if sol.absorbing[c] {
            return Err(Error::Configuration(format!("measurement line y = {y_m} m lies inside the PML")));
        }
        if !sol.scattered[c] || sol.rigid[c] {
            return Err(Error::Configuration(format!(
                "measurement line y = {y_m} m is not in the scattered-field region"
            )));
        }
    }
    let y_c = sol.cell_center(0, j)[1];
    let projection: Complex64 = (0..sol.nx)
        .map(|i| {
            let x = sol.cell_center(i, j)[0];
            sol.at(i, j) * Complex64::from_polar(1.0, wave.kx * (x - wave.x_ref))
        })
        .sum::<Complex64>()
        / sol.nx as f64;
    let reference = wave.amplitude * Complex64::from_polar(1.0, -wave.ky * (y_c - wave.y_ref));
    Ok(projection / reference)
}

/// `α = 1 − |R|²`, clamped to [0, 1] for noise-level excursions.
pub fn absorption(r: Complex64) -> Result<f64> {
    let mag = r.norm();
    if !mag.is_finite() || mag > 1.0 + NOISE_TOLERANCE {
        return Err(Error::Physicality(mag));
    }
    let alpha = 1.0 - mag * mag;
    if alpha < 0.0 {
        log::warn!("clamping α = {alpha:e} to 0 (|R| = {mag})");
        return Ok(0.0);
    }
    Ok(alpha.min(1.0))
}

/// Specular reflection at the solve's default measurement line.
pub fn absorption_record(sol: &FieldSolution) -> Result<AbsorptionRecord> {
    let r = extract_specular_reflection(sol, sol.y_measure)?;
    AbsorptionRecord::new(sol.frequency, sol.theta_deg, r)
}

/// Plane-wave reflection of a porous layer of thickness `l` on a rigid wall.
pub fn analytic_layer_reflection(
    mat: &PorousMaterialParams,
    fluid: &FluidProperties,
    l: f64,
    f: f64,
    theta_deg: f64,
) -> Result<Complex64> {
    if !(l > 0.0) {
        return Err(Error::Domain(format!("layer thickness must be positive, got {l}")));
    }
    if !(theta_deg.abs() < 90.0) {
        return Err(Error::Domain(format!("|θ| must be below 90 degrees, got {theta_deg}")));
    }
    let eff = EffectiveFluid::jca(mat, fluid, f)?;
    let (kc, zc) = (eff.wavenumber(), eff.impedance());
    let theta = theta_deg.to_radians();
    let kx = fluid.wavenumber(f) * theta.sin();
    let ky = decaying_branch((kc * kc - kx * kx).sqrt());
    let i = Complex64::i();
    let arg = ky * l;
    let cot = arg.cos() / arg.sin();
    let zs = -i * zc * (kc / ky) * cot;
    let z0 = fluid.characteristic_impedance();
    let zn = zs * theta.cos();
    Ok((zn - z0) / (zn + z0))
}

/// Uniform grid `start, start + step, …, stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl UniformRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::Configuration(format!("invalid range {start}..={stop} step {step}")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn single(value: f64) -> Self {
        Self { start: value, stop: value, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandAverage {
    pub mean: f64,
    pub points: usize,
    pub frequency_step: f64,
    pub angle_step: f64,
}

/// Unweighted mean of α over every `(f, θ)` of the two grids.
pub fn band_angle_average(
    records: &[AbsorptionRecord],
    frequencies: &UniformRange,
    angles: &UniformRange,
) -> Result<BandAverage> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0);
    let mut sum = 0.0;
    let mut points = 0;
    let mut missing = Vec::new();
    for f in frequencies.values() {
        for t in angles.values() {
            match records.iter().find(|r| close(r.frequency, f) && close(r.theta_deg, t)) {
                Some(r) => {
                    sum += r.alpha;
                    points += 1;
                }
                None => missing.push((f, t)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage { missing });
    }
    Ok(BandAverage {
        mean: sum / points as f64,
        points,
        frequency_step: frequencies.step,
        angle_step: angles.step,
    })
}

/// Least-squares slope of unwrapped phase against position.
pub fn phase_slope(positions: &[f64], values: &[Complex64]) -> Result<f64> {
    if positions.len() != values.len() || positions.len() < 3 {
        return Err(Error::Estimation("phase regression needs at least three samples".into()));
    }
    let mut phase = Vec::with_capacity(values.len());
    let mut prev = values[0].arg();
    let mut offset = 0.0;
    phase.push(prev);
    for v in &values[1..] {
        let a = v.arg();
        let mut jump = a - prev;
        while jump > PI {
            jump -= 2.0 * PI;
            offset -= 2.0 * PI;
        }
        while jump < -PI {
            jump += 2.0 * PI;
            offset += 2.0 * PI;
        }
        prev = a;
        phase.push(a + offset);
    }
    let n = positions.len() as f64;
    let mx = positions.iter().sum::<f64>() / n;
    let my = phase.iter().sum::<f64>() / n;
    let sxy: f64 = positions.iter().zip(&phase).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = positions.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Estimation("samples share a single position".into()));
    }
    Ok(sxy / sxx)
}

/// Wavelength from the spacing of pressure minima of a standing wave.
///
/// Successive minima of |p| sit half a wavelength apart. Each minimum is
/// refined with a parabola through |p|², which is smooth at a node.
pub fn nodal_wavelength(positions: &[f64], values: &[Complex64]) -> Result<f64> {
    if positions.len() != values.len() || positions.len() < 3 {
        return Err(Error::Estimation("nodal estimate needs samples".into()));
    }
    let mags: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    let mut nodes = Vec::new();
    for k in 1..mags.len() - 1 {
        if mags[k] < mags[k - 1] && mags[k] <= mags[k + 1] {
            // parabolic refinement through the three samples
            let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
            let h = positions[k + 1] - positions[k];
            let denom = a - 2.0 * b + c;
            let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            nodes.push(positions[k] + shift * h);
        }
    }
    if nodes.len() < 2 {
        return Err(Error::Estimation(format!(
            "only {} pressure node in the tunnel; need at least two",
            nodes.len()
        )));
    }
    let span = (nodes[nodes.len() - 1] - nodes[0]).abs();
    Ok(2.0 * span / (nodes.len() - 1) as f64)
}

/// Effective index `n_r = λ0/λ` of an air-filled protruded tunnel.
pub fn extract_refractive_index(field: &TunnelField, fluid: &FluidProperties) -> Result<RefractiveIndexRecord> {
    let f = field.frequency;
    let free = fluid.wavelength(f);
    let by_phase = || -> Result<f64> {
        let beta = phase_slope(&field.positions, &field.samples)?.abs();
        if beta == 0.0 {
            return Err(Error::Estimation("zero phase slope".into()));
        }
        Ok(2.0 * PI / beta)
    };
    let wavelength = match field.termination {
        Termination::Pml => by_phase()?,
        Termination::Rigid => match nodal_wavelength(&field.positions, &field.samples) {
            Ok(l) => l,
            Err(e) => {
                log::warn!("{e}; falling back to phase regression");
                by_phase()?
            }
        },
    };
    Ok(RefractiveIndexRecord {
        p_over_w: field.p_over_w,
        frequency: f,
        wavelength,
        free_wavelength: free,
        n_r: free / wavelength,
    })
}

/// Net vertical acoustic power per unit depth through the face above row `j`
/// (positive upwards), summed over the columns selected by `columns`.
pub fn vertical_power(
    field: &[Complex64],
    nx: usize,
    j: usize,
    spacing: f64,
    omega: f64,
    rho0: f64,
    columns: impl Iterator<Item = usize>,
) -> f64 {
    let i_unit = Complex64::i();
    columns
        .map(|i| {
            let (lo, hi) = (field[j * nx + i], field[(j + 1) * nx + i]);
            let p = 0.5 * (lo + hi);
            let v = -(hi - lo) / spacing / (i_unit * omega * rho0);
            0.5 * (p * v.conj()).re * spacing
        })
        .sum()
}

/// Ratio of the up-going scattered power to the down-going incident power
/// through the horizontal face just above row `j` of a beam solve.
pub fn reflected_power_fraction(sol: &FieldSolution, rho0: f64, j: usize) -> Result<f64> {
    if j + 1 >= sol.ny {
        return Err(Error::Configuration("flux line outside the domain".into()));
    }
    let columns: Vec<usize> = (0..sol.nx)
        .filter(|&i| !sol.absorbing[sol.index(i, j)] && !sol.absorbing[sol.index(i, j + 1)])
        .collect();
    for &i in &columns {
        if !sol.scattered[sol.index(i, j)] || !sol.scattered[sol.index(i, j + 1)] {
            return Err(Error::Configuration("flux line crosses the total-field region".into()));
        }
    }
    let omega = 2.0 * PI * sol.frequency;
    let incident: Vec<Complex64> = (0..sol.nx * sol.ny)
        .map(|c| {
            let (i, jj) = (c % sol.nx, c / sol.nx);
            if jj == j || jj == j + 1 {
                let [x, y] = sol.cell_center(i, jj);
                sol.incident.at(x, y)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let p_in = -vertical_power(&incident, sol.nx, j, sol.spacing, omega, rho0, columns.iter().copied());
    let p_sc = vertical_power(&sol.pressure, sol.nx, j, sol.spacing, omega, rho0, columns.iter().copied());
    if !(p_in > 0.0) {
        return Err(Error::Estimation("no down-going incident power through the flux line".into()));
    }
    Ok(p_sc / p_in)
}

pub const ABSORPTION_HEADER: &str = "f_hz,theta_deg,re_R,im_R,alpha";
pub const INDEX_HEADER: &str = "p_over_w,f_hz,lambda_m,n_r";

/// CSV table; `p_over_w` adds a leading column when the sweep varies p.
pub fn absorption_csv(records: &[(Option<f64>, AbsorptionRecord)]) -> String {
    let with_p = records.iter().any(|(p, _)| p.is_some());
    let mut s = String::new();
    if with_p {
        s.push_str("p_over_w,");
    }
    s.push_str(ABSORPTION_HEADER);
    s.push('\n');
    for (p, r) in records {
        if with_p {
            let _ = write!(s, "{},", p.unwrap_or(f64::NAN));
        }
        let _ = writeln!(
            s,
            "{},{},{:.10e},{:.10e},{:.10}",
            r.frequency, r.theta_deg, r.reflection.re, r.reflection.im, r.alpha
        );
    }
    s
}

pub fn refractive_index_csv(records: &[RefractiveIndexRecord]) -> String {
    let mut s = String::from(INDEX_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{},{:.10e},{:.10}", r.p_over_w, r.frequency, r.wavelength, r.n_r);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const AIR: FluidProperties = FluidProperties::standard_air();

    fn record(f: f64, t: f64, alpha: f64) -> AbsorptionRecord {
        AbsorptionRecord {
            frequency: f,
            theta_deg: t,
            reflection: Complex64::new((1.0 - alpha).sqrt(), 0.0),
            alpha,
        }
    }

    #[test]
    fn absorption_arithmetic() {
        assert_eq!(absorption(Complex64::new(0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(absorption(Complex64::new(0.0, 1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(absorption(Complex64::from_polar(0.3, 1.0)).unwrap(), 0.91, epsilon = 1e-12);
        assert_eq!(absorption(Complex64::new(1.005, 0.0)).unwrap(), 0.0);
        assert!(matches!(absorption(Complex64::new(1.02, 0.0)), Err(Error::Physicality(_))));
    }

    #[test]
    fn slab_matches_independent_oracle() {
        let mat = PorousMaterialParams::melamine();
        // (L, f, θ, α) from tests/oracles/equivalent_fluid_oracle.py
        let table = [
            (0.081, 500.0, 0.0, 0.74298155102452646),
            (0.081, 1000.0, 30.0, 0.97117415866377577),
            (0.081, 2000.0, 60.0, 0.96244896792206722),
            (0.081, 4000.0, 0.0, 0.97657901588524067),
            (0.040, 500.0, 60.0, 0.58849991318714475),
            (0.040, 1000.0, 0.0, 0.55692662742439065),
            (0.040, 2000.0, 30.0, 0.87871836945569889),
            (0.040, 4000.0, 60.0, 0.90848205736197628),
        ];
        for (l, f, t, alpha) in table {
            let r = analytic_layer_reflection(&mat, &AIR, l, f, t).unwrap();
            assert_abs_diff_eq!(1.0 - r.norm_sqr(), alpha, epsilon = 1e-12);
        }
        let r = analytic_layer_reflection(&mat, &AIR, 0.081, 2000.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.re, 0.17517676316761376, epsilon = 1e-12);
        assert_abs_diff_eq!(r.im, -0.16234673989875484, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_layers() {
        let mat = PorousMaterialParams::melamine();
        let thin = analytic_layer_reflection(&mat, &AIR, 1e-6, 1000.0, 0.0).unwrap();
        assert!((thin.norm() - 1.0).abs() < 1e-3);
        let lossless = PorousMaterialParams::air_like();
        for f in [200.0, 1000.0, 3000.0] {
            let r = analytic_layer_reflection(&lossless, &AIR, 0.05, f, 20.0).unwrap();
            assert!((r.norm() - 1.0).abs() < 1e-3, "f = {f}: |R| = {}", r.norm());
        }
        assert!(analytic_layer_reflection(&mat, &AIR, 0.05, 1000.0, 90.0).is_err());
        assert!(analytic_layer_reflection(&mat, &AIR, 0.0, 1000.0, 0.0).is_err());
    }

    #[test]
    fn band_average_basics() {
        let fr = UniformRange::new(500.0, 1000.0, 250.0).unwrap();
        let tr = UniformRange::new(0.0, 30.0, 15.0).unwrap();
        let mut table = Vec::new();
        for f in fr.values() {
            for t in tr.values() {
                table.push(record(f, t, 1.0));
            }
        }
        let avg = band_angle_average(&table, &fr, &tr).unwrap();
        assert_eq!(avg.mean, 1.0);
        assert_eq!(avg.points, 9);
        assert_eq!(avg.frequency_step, 250.0);

        let one = [record(700.0, 10.0, 0.42)];
        let avg = band_angle_average(&one, &UniformRange::single(700.0), &UniformRange::single(10.0)).unwrap();
        assert_eq!(avg.mean, 0.42);

        table.remove(4);
        match band_angle_average(&table, &fr, &tr) {
            Err(Error::Coverage { missing }) => assert_eq!(missing, vec![(750.0, 15.0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn range_values() {
        assert_eq!(UniformRange::new(500.0, 4000.0, 250.0).unwrap().values().len(), 15);
        assert_eq!(UniformRange::new(0.0, 75.0, 15.0).unwrap().values().len(), 6);
        assert_eq!(UniformRange::new(500.0, 4000.0, 50.0).unwrap().values().len(), 71);
        assert!(UniformRange::new(1.0, 0.0, 1.0).is_err());
        assert!(UniformRange::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn phase_regression_recovers_wavenumber() {
        let beta = 23.7;
        let xs: Vec<f64> = (0..40).map(|k| k as f64 * 5e-3).collect();
        let vals: Vec<_> = xs.iter().map(|x| Complex64::from_polar(0.8 - x, -beta * x + 0.4)).collect();
        assert_abs_diff_eq!(phase_slope(&xs, &vals).unwrap(), -beta, epsilon = 1e-9);
    }

    #[test]
    fn nodal_spacing_of_standing_wave() {
        let k = 2.0 * PI / 0.1;
        let xs: Vec<f64> = (0..400).map(|k| k as f64 * 1e-3).collect();
        let vals: Vec<_> = xs.iter().map(|x| Complex64::new((k * x + 0.3).cos(), 0.0)).collect();
        let lambda = nodal_wavelength(&xs, &vals).unwrap();
        assert!((lambda - 0.1).abs() < 1e-3, "{lambda}");
        assert!(nodal_wavelength(&xs[..60], &vals[..60]).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![(None, record(500.0, 0.0, 0.91))];
        let s = absorption_csv(&rows);
        assert!(s.starts_with("f_hz,theta_deg,re_R,im_R,alpha\n500,0,"));
        let rows = vec![(Some(0.25), record(500.0, 0.0, 0.91))];
        assert!(absorption_csv(&rows).starts_with("p_over_w,f_hz,theta_deg,re_R,im_R,alpha\n0.25,500,0,"));
        let idx = refractive_index_csv(&[RefractiveIndexRecord {
            p_over_w: 0.0,
            frequency: 1000.0,
            wavelength: 0.343,
            free_wavelength: 0.343,
            n_r: 1.0,
        }]);
        assert!(idx.starts_with("p_over_w,f_hz,lambda_m,n_r\n0,1000,"));
    }
}
