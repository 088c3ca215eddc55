//! Minimal solutions for radial weights on a disk |ζ| < R, for data supported near the origin.
//!
//! For the weight (1 − |ζ|²)^p the Bergman coefficients of the Cauchy transform follow from Stokes:
//! ⟨Cv, ζ^j⟩ = −∬ v conj(ζ)^{j+1} q_j(|ζ|²) dV, since the far field of Cv has only negative powers.
//! The solution is then evaluated from the patch transform near the support and from the
//! Laurent series further out.

use std::f64::consts::TAU;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bergman::horner;
use crate::cauchy::{cauchy_transform, laurent_eval, moments};
use crate::error::{Error, Result};
use crate::grid::{DiskGrid, FieldKind, GridField};
use crate::weight::{truncated_monomial_norm_sq, RadialKernel, Weight, WeightSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Laurent terms kept for the far field; used only at |ζ| ≥ 2·support radius.
pub const LAURENT_TERMS: usize = 64;

/// c_j = ⟨Cv, ζ^j⟩ / ‖ζ^j‖² on the disk of radius R, for j ≤ degree.
pub fn stokes_coefficients(v: &GridField, p: u32, radius: f64, degree: usize) -> Vec<Complex64> {
    let g = v.grid;
    let side = g.side();
    let nb = degree + 1;
    let kernel = RadialKernel::new(p, degree as u32);
    let rows: Vec<Vec<Complex64>> = v
        .samples
        .par_chunks(side)
        .enumerate()
        .map(|(j, row)| {
            let mut acc = vec![ZERO; nb];
            let mut q = vec![0.0; nb];
            for (i, s) in row.iter().enumerate() {
                if *s == ZERO {
                    continue;
                }
                let z = g.point(i, j);
                kernel.eval_all(z.norm_sqr(), &mut q);
                let zc = z.conj();
                let mut pw = *s * zc;
                for (a, qj) in acc.iter_mut().zip(&q) {
                    *a += pw * *qj;
                    pw *= zc;
                }
            }
            acc
        })
        .collect();
    let mut m = vec![ZERO; nb];
    for r in rows {
        for (o, x) in m.iter_mut().zip(r) {
            *o += x;
        }
    }
    m.iter()
        .enumerate()
        .map(|(j, x)| -x * g.cell_area() / truncated_monomial_norm_sq(j as u32, p, radius))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSolution {
    pub weight: WeightSpec,
    pub radius: f64,
    pub support_radius: f64,
    /// Coefficients of the removed polynomial.
    pub coefficients: Vec<Complex64>,
    pub moments: Vec<Complex64>,
    /// Cauchy transform of the data on the patch.
    pub cauchy: GridField,
    /// ‖v‖²_w.
    pub data_norm_sq: f64,
}

/// Radial Gauss–Legendre nodes per segment of the polar norm quadrature.
pub const POLAR_RADIAL_NODES: usize = 64;
/// Angular nodes of the polar norm quadrature.
pub const POLAR_ANGULAR_NODES: usize = 256;

impl LocalSolution {
    /// Solves for a form coefficient sampled on a square patch centered at 0.
    pub fn solve(v: &GridField, weight: WeightSpec, radius: f64, degree: usize) -> Result<Self> {
        weight.validate()?;
        if v.kind != FieldKind::Form {
            return Err(Error::Domain("local solve takes a (0,1)-form coefficient".into()));
        }
        let support_radius = v
            .measured_support(0.0)
            .map(|s| s.radius)
            .unwrap_or(v.grid.h);
        if support_radius >= radius {
            return Err(Error::Domain(format!(
                "data support radius {support_radius} reaches the solve radius {radius}"
            )));
        }
        let cauchy = cauchy_transform(v)?;
        let coefficients = stokes_coefficients(v, weight.exponent(), radius, degree);
        let moments = moments(v, LAURENT_TERMS);
        let data_norm_sq = v.weighted_norm_sq(|z| weight.density(z), |_| true);
        Ok(Self { weight, radius, support_radius, coefficients, moments, cauchy, data_norm_sq })
    }

    /// Samples `f` on a patch wide enough for the near-field evaluation and solves.
    pub fn from_fn<F>(f: F, support_radius: f64, h: f64, weight: WeightSpec, radius: f64, degree: usize) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let grid = DiskGrid::patch(2.0 * support_radius + 4.0 * h, h)?;
        let v = GridField::from_fn(grid, FieldKind::Form, |z| if z.norm() < support_radius { f(z) } else { ZERO });
        Self::solve(&v, weight, radius, degree)
    }

    /// The Cauchy transform of the data at z.
    pub fn cauchy_at(&self, z: Complex64) -> Complex64 {
        if z.norm() >= 2.0 * self.support_radius {
            return laurent_eval(&self.moments, z);
        }
        self.cauchy.sample(z).unwrap_or_else(|| laurent_eval(&self.moments, z))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.cauchy_at(z) - horner(&self.coefficients, z)
    }

    /// ∬_{|ζ|<R} |u|² (1 − |ζ|²)^p · extra(ζ) dV by polar Gauss–Legendre quadrature.
    pub fn norm_sq_with<E: Fn(Complex64) -> f64 + Sync>(&self, extra: E) -> f64 {
        self.norm_sq_between(0.0, self.radius, extra)
    }

    /// The same integral over the annulus a < |ζ| < b.
    pub fn norm_sq_between<E: Fn(Complex64) -> f64 + Sync>(&self, a: f64, b: f64, extra: E) -> f64 {
        let rs = self.support_radius;
        let mut cuts = vec![a];
        cuts.extend([rs, 2.0 * rs].into_iter().filter(|&c| c > a && c < b));
        cuts.push(b);
        polar_quadrature(&cuts, |z| self.eval(z).norm_sqr() * self.weight.density(z) * extra(z))
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq_with(|_| 1.0)
    }

    /// ‖u‖²_w / ‖v‖²_w.
    pub fn hormander_ratio(&self) -> f64 {
        if self.data_norm_sq == 0.0 {
            0.0
        } else {
            self.norm_sq() / self.data_norm_sq
        }
    }

    pub fn to_grid(&self, grid: DiskGrid) -> GridField {
        GridField::from_fn(grid, FieldKind::Section, |z| self.eval(z))
    }
}

/// ∬ f dV over the annulus cuts[0] < |ζ| < cuts[last], with Gauss–Legendre in r on each segment
/// and the trapezoid rule in the angle.
pub fn polar_quadrature<F: Fn(Complex64) -> f64 + Sync>(cuts: &[f64], f: F) -> f64 {
    let gl = GaussLegendre::new(POLAR_RADIAL_NODES).expect("node count");
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let vals: Vec<f64> = gl
            .as_node_weight_pairs()
            .par_iter()
            .map(|&(x, wgt)| {
                let r = 0.5 * ((b - a) * x + b + a);
                let mut ring = 0.0;
                for k in 0..POLAR_ANGULAR_NODES {
                    ring += f(Complex64::from_polar(r, TAU * k as f64 / POLAR_ANGULAR_NODES as f64));
                }
                wgt * r * ring * TAU / POLAR_ANGULAR_NODES as f64
            })
            .collect();
        total += 0.5 * (b - a) * vals.iter().sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimal::minimal_solution;

    fn bump_form(z: Complex64) -> Complex64 {
        let r = 0.2;
        let c = Complex64::new(0.03, -0.02);
        let d = z - c;
        let t = d.norm_sqr() / (r * r);
        if t >= 1.0 {
            ZERO
        } else {
            d * Complex64::new(1.0, 0.5) * (-3.0 * (1.0 - t).powi(2) / (r * r))
        }
    }

    #[test]
    fn agrees_with_grid_solver() {
        let w = WeightSpec::default();
        let g = DiskGrid::new(6, 1.0 / 256.0).unwrap();
        let v = GridField::from_fn(g, FieldKind::Form, bump_form);
        let grid_sol = minimal_solution(&v, &w, 24).unwrap();
        let local = LocalSolution::from_fn(bump_form, 0.26, 1.0 / 256.0, w, g.clip.unwrap(), 24).unwrap();
        let lf = local.to_grid(g);
        let diff = lf.sub(&grid_sol.field).unwrap();
        let rel = (diff.weighted_norm_sq(|z| w.density(z), |_| true)
            / grid_sol.field.weighted_norm_sq(|z| w.density(z), |_| true))
        .sqrt();
        assert!(rel < 1e-3, "{rel}");
        for (a, b) in local.coefficients.iter().zip(&grid_sol.coefficients).take(4) {
            assert!((a - b).norm() < 1e-3 * a.norm().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn polar_norm_matches_grid_norm() {
        let w = WeightSpec::default();
        let local = LocalSolution::from_fn(bump_form, 0.26, 1.0 / 256.0, w, 1.0, 24).unwrap();
        let g = DiskGrid::new(8, 1.0 / 512.0).unwrap();
        let lf = local.to_grid(g);
        let grid_norm = lf.weighted_norm_sq(|z| w.density(z), |_| true);
        let polar = local.norm_sq();
        assert!(((polar - grid_norm) / polar).abs() < 2e-3, "{polar} vs {grid_norm}");
        assert!(local.hormander_ratio() < w.hormander_constant_laplacian());
    }

    #[test]
    fn zero_data() {
        let local = LocalSolution::from_fn(|_| ZERO, 0.2, 0.01, WeightSpec::default(), 1.0, 8).unwrap();
        assert_eq!(local.eval(Complex64::new(0.3, 0.1)), ZERO);
        assert_eq!(local.norm_sq(), 0.0);
    }

    #[test]
    fn support_must_fit() {
        let r = LocalSolution::from_fn(|_| Complex64::new(1.0, 0.0), 0.6, 0.02, WeightSpec::default(), 0.5, 8);
        assert!(r.is_err());
    }
}
