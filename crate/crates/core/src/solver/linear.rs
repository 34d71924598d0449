//! Sparse complex linear solves: direct LU (faer) or Jacobi-preconditioned BiCGSTAB.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assemble::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverKind {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSolveOptions {
    pub kind: LinearSolverKind,
    /// Required relative residual `‖Ax − b‖ / ‖b‖`.
    pub tolerance: f64,
    /// Iteration cap for the iterative path.
    pub max_iterations: usize,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self {
            kind: LinearSolverKind::Direct,
            tolerance: 1e-8,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Relative residual of `x` for `Ax = b` (absolute when `b = 0`).
pub fn relative_residual(a: &SparseMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<_> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb > 0.0 { norm(&r) / nb } else { norm(&r) }
}

pub fn solve_linear_system(a: &SparseMatrix, b: &[Complex64], opts: &LinearSolveOptions) -> Result<LinearSolution> {
    if b.len() != a.n {
        return Err(Error::Configuration(format!(
            "right-hand side has {} entries for a {}x{} matrix",
            b.len(),
            a.n,
            a.n
        )));
    }
    if a.n == 0 {
        return Err(Error::DegenerateSystem("empty system".into()));
    }
    let (x, iterations) = match opts.kind {
        LinearSolverKind::Direct => (direct(a, b)?, 1),
        LinearSolverKind::Iterative => bicgstab(a, b, opts)?,
    };
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solver {
            message: "solution contains non-finite values (singular matrix?)".into(),
            residual: f64::INFINITY,
        });
    }
    let residual = relative_residual(a, &x, b);
    if !(residual <= opts.tolerance) {
        return Err(Error::Solver {
            message: format!("residual above tolerance {:e}", opts.tolerance),
            residual,
        });
    }
    log::debug!("linear solve: n = {}, nnz = {}, residual = {residual:e}", a.n, a.nnz());
    Ok(LinearSolution { x, residual, iterations })
}

fn direct(a: &SparseMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let fail = |message: String| Error::Solver { message, residual: f64::INFINITY };
    let triplets: Vec<_> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, Complex64>::try_new_from_triplets(a.n, a.n, &triplets)
        .map_err(|e| fail(format!("matrix construction: {e:?}")))?;
    // single-threaded factorization: results must not depend on the worker count
    faer::set_global_parallelism(faer::Par::Seq);
    let lu = mat.sp_lu().map_err(|e| fail(format!("sparse LU: {e:?}")))?;
    let rhs = Mat::from_fn(a.n, 1, |i, _| b[i]);
    let sol = lu.solve(&rhs);
    Ok((0..a.n).map(|i| sol[(i, 0)]).collect())
}

fn bicgstab(a: &SparseMatrix, b: &[Complex64], opts: &LinearSolveOptions) -> Result<(Vec<Complex64>, usize)> {
    let n = a.n;
    let zero = Complex64::new(0.0, 0.0);
    let inv_diag: Vec<Complex64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d.norm() > 0.0 { 1.0 / d } else { Complex64::new(1.0, 0.0) })
        .collect();
    let precond = |v: &[Complex64]| -> Vec<Complex64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let nb = norm(b);
    if nb == 0.0 {
        return Ok((vec![zero; n], 0));
    }
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];

    for it in 1..=opts.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() < 1e-300 {
            return Err(Error::Solver {
                message: "BiCGSTAB breakdown (rho = 0)".into(),
                residual: norm(&r) / nb,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        let p_hat = precond(&p);
        v = a.mul_vec(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<_> = (0..n).map(|k| r[k] - alpha * v[k]).collect();
        if norm(&s) / nb <= opts.tolerance * 0.5 {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            return Ok((x, it));
        }
        let s_hat = precond(&s);
        let t = a.mul_vec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt.norm() > 0.0 { dot(&t, &s) / tt } else { zero };
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] = s[k] - omega * t[k];
        }
        if norm(&r) / nb <= opts.tolerance * 0.5 {
            return Ok((x, it));
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    Err(Error::Solver {
        message: format!("BiCGSTAB did not converge in {} iterations", opts.max_iterations),
        residual: relative_residual(a, &x, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Material, MaterialMap};
    use crate::materials::{FluidProperties, PorousMaterialParams};
    use crate::solver::assemble::{assemble_system, BoundarySpec, Media, XBoundary};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hermitian_pd(n: usize) -> SparseMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![(i, c(4.0 + i as f64 * 0.01, 0.0))];
                if i + 1 < n {
                    row.push((i + 1, c(-1.0, 0.5)));
                }
                if i > 0 {
                    row.push((i - 1, c(-1.0, -0.5)));
                }
                row
            })
            .collect();
        SparseMatrix::from_rows(rows)
    }

    #[test]
    fn identity_system() {
        let a = SparseMatrix::identity(7);
        let b: Vec<_> = (0..7).map(|k| c(k as f64, -(k as f64))).collect();
        for kind in [LinearSolverKind::Direct, LinearSolverKind::Iterative] {
            let opts = LinearSolveOptions { kind, ..Default::default() };
            let sol = solve_linear_system(&a, &b, &opts).unwrap();
            for (x, y) in sol.x.iter().zip(&b) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_system_against_known_solution() {
        let a = hermitian_pd(60);
        let truth: Vec<_> = (0..60).map(|k| c((k as f64 * 0.3).sin(), (k as f64 * 0.7).cos())).collect();
        let b = a.mul_vec(&truth);
        for kind in [LinearSolverKind::Direct, LinearSolverKind::Iterative] {
            let opts = LinearSolveOptions { kind, tolerance: 1e-12, ..Default::default() };
            let sol = solve_linear_system(&a, &b, &opts).unwrap();
            for (x, y) in sol.x.iter().zip(&truth) {
                assert!((x - y).norm() < 1e-10, "{kind:?}");
            }
        }
    }

    #[test]
    fn singular_system_reports_solver_error() {
        let a = SparseMatrix::from_rows(vec![vec![(0, c(1.0, 0.0)), (1, c(1.0, 0.0))], vec![(0, c(1.0, 0.0)), (1, c(1.0, 0.0))]]);
        let b = vec![c(1.0, 0.0), c(2.0, 0.0)];
        let err = solve_linear_system(&a, &b, &LinearSolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Solver { .. }), "{err}");
    }

    #[test]
    fn unattainable_tolerance_reports_residual() {
        let a = hermitian_pd(200);
        let b = vec![c(1.0, 0.0); 200];
        let opts = LinearSolveOptions {
            kind: LinearSolverKind::Iterative,
            tolerance: 1e-14,
            max_iterations: 2,
        };
        match solve_linear_system(&a, &b, &opts) {
            Err(Error::Solver { residual, .. }) => assert!(residual > 1e-14),
            other => panic!("expected solver error, got {other:?}"),
        }
    }

    /// Air column closed at y = 0, driven by a prescribed normal velocity at the top.
    #[test]
    fn air_column_standing_wave() {
        let air = FluidProperties::standard_air();
        let f = 1200.0;
        let len = 0.2;
        let k = air.wavenumber(f);
        let mut last_err = f64::INFINITY;
        for ny in [200usize, 400] {
            let h = len / ny as f64;
            let map = MaterialMap::filled([0.0, 0.0], h, 1, ny, Material::Air);
            let media = Media::new(&air, &PorousMaterialParams::melamine(), f).unwrap();
            let sys = assemble_system(&map, &media, f, &BoundarySpec::plain(1, ny, XBoundary::Rigid)).unwrap();
            // p = cos(k y) needs (1/ρ) ∂p/∂y = -k sin(kL)/ρ on the top face
            let flux = -k * (k * len).sin() / air.density;
            let mut b = vec![c(0.0, 0.0); ny];
            b[ny - 1] = c(-flux / h, 0.0);
            let sol = solve_linear_system(&sys.matrix, &b, &LinearSolveOptions::default()).unwrap();
            let err = (0..ny)
                .map(|j| (sol.x[j] - (k * (j as f64 + 0.5) * h).cos()).norm())
                .fold(0.0, f64::max);
            assert!(err < 5e-3, "ny = {ny}: max error {err}");
            assert!(err < last_err);
            last_err = err;
        }
    }
}
