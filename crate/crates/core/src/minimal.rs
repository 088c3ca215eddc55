//! Weighted L²-minimal solutions of ∂̄u = v on the disk grid, and Möbius pullbacks of fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bergman::{horner, BergmanProjector};
use crate::cauchy::cauchy_transform;
use crate::disk::MobiusTransform;
use crate::error::Result;
use crate::grid::{FieldKind, GridField};
use crate::local::stokes_coefficients;
use crate::weight::{truncated_monomial_norm_sq, Weight, WeightSpec};

/// Relative change of u under doubling of the basis degree above which the degree is flagged.
pub const DEGREE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSolution {
    pub field: GridField,
    /// Coefficients of the removed holomorphic polynomial.
    pub coefficients: Vec<Complex64>,
    pub degree: usize,
    /// max_j |⟨u, ζ^j⟩_w| / (‖u‖_w ‖ζ^j‖_w).
    pub orthogonality_defect: f64,
    /// ‖u‖²_w / ‖v‖²_w.
    pub hormander_ratio: f64,
    /// ‖u_D − u_{2D}‖_w / ‖u_D‖_w, when measured.
    pub degree_change: Option<f64>,
}

impl MinimalSolution {
    pub fn degree_stable(&self) -> bool {
        self.degree_change.is_none_or(|c| c <= DEGREE_TOLERANCE)
    }
}

/// u = u₀ − P(u₀) for the Cauchy transform u₀ of v, with P the projection onto degree ≤ D.
pub fn minimal_solution(v: &GridField, w: &WeightSpec, degree: usize) -> Result<MinimalSolution> {
    w.validate()?;
    minimal_solution_weighted(v, w, degree, true)
}

/// The same for an arbitrary weight density; `check_degree` measures the change from degree D to 2D.
///
/// For radial weights on a clipped grid the change is the tail Σ_{D<j≤2D} |c_j|² ‖ζ^j‖² of the
/// Stokes coefficients, which avoids the lattice error of a second Gram solve.
pub fn minimal_solution_weighted(
    v: &GridField,
    weight: &dyn Weight,
    degree: usize,
    check_degree: bool,
) -> Result<MinimalSolution> {
    let u0 = cauchy_transform(v)?;
    let proj = BergmanProjector::new(v.grid, weight, degree)?;
    let coefficients = proj.coefficients(&u0)?;
    let field = u0.map(|z, s| s - horner(&coefficients, z));
    let orthogonality_defect = proj.orthogonality_defect(&field)?;
    let un = proj.norm_sq(&field);
    let vn = proj.norm_sq(v);
    let hormander_ratio = if vn > 0.0 { un / vn } else { 0.0 };
    let degree_change = if !check_degree || un == 0.0 {
        None
    } else if let (Some(p), Some(rho)) = (weight.radial_exponent(), v.grid.clip) {
        let c = stokes_coefficients(v, p, rho, 2 * degree.max(1));
        let tail: f64 = c
            .iter()
            .enumerate()
            .skip(degree + 1)
            .map(|(j, cj)| cj.norm_sqr() * truncated_monomial_norm_sq(j as u32, p, rho))
            .sum();
        Some((tail / un).sqrt())
    } else {
        let proj2 = BergmanProjector::new(v.grid, weight, 2 * degree.max(1))?;
        let c2 = proj2.coefficients(&u0)?;
        let diff = GridField::from_fn(v.grid, FieldKind::Section, |z| horner(&c2, z) - horner(&coefficients, z));
        Some((proj.norm_sq(&diff) / un).sqrt())
    };
    Ok(MinimalSolution { field, coefficients, degree, orthogonality_defect, hormander_ratio, degree_change })
}

/// How sections of the line bundle transform under disk automorphisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Frame {
    /// Plain composition.
    Trivial,
    /// Sections of K^{m/2}: an extra factor φ'^{m/2}, which makes (1 − |ζ|²)^m invariant.
    Canonical { m: u32 },
}

/// The factor multiplying f(φ(ξ)) in φ*f.
pub fn pullback_factor(phi: &MobiusTransform, xi: Complex64, kind: FieldKind, frame: Frame) -> Complex64 {
    let mut c = Complex64::new(1.0, 0.0);
    if kind == FieldKind::Form {
        c *= phi.derivative(xi).conj();
    }
    if let Frame::Canonical { m } = frame {
        c *= phi.frame_factor(xi, m);
    }
    c
}

/// φ*f on f's own grid, sampling f(φ(ξ)) by bicubic interpolation (zero off the grid).
pub fn pullback(phi: &MobiusTransform, f: &GridField, frame: Frame) -> GridField {
    let kind = f.kind;
    GridField::from_fn(f.grid, kind, |xi| {
        let z = phi.apply(xi);
        if !f.grid.inside(z) {
            return Complex64::new(0.0, 0.0);
        }
        f.sample(z).unwrap_or_default() * pullback_factor(phi, xi, kind, frame)
    })
}

/// φ_*f = (φ⁻¹)*f.
pub fn pushforward(phi: &MobiusTransform, f: &GridField, frame: Frame) -> GridField {
    pullback(&phi.inverse(), f, frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::one_minus_norm_sqr;
    use crate::grid::DiskGrid;
    use approx::assert_relative_eq;

    fn bump(z: Complex64, c: Complex64, r: f64) -> (Complex64, Complex64) {
        let d = z - c;
        let t = d.norm_sqr() / (r * r);
        if t >= 1.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let f = (1.0 - t).powi(3);
        (Complex64::new(f, 0.0), d * (-3.0 * (1.0 - t).powi(2) / (r * r)))
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = DiskGrid::new(4, 1.0 / 32.0).unwrap();
        let s = minimal_solution(&GridField::zeros(g, FieldKind::Form), &WeightSpec::default(), 8).unwrap();
        assert!(s.field.samples.iter().all(|x| x.norm() == 0.0));
        assert_eq!(s.hormander_ratio, 0.0);
    }

    #[test]
    fn bump_oracle() {
        let g = DiskGrid::new(6, 1.0 / 128.0).unwrap();
        let w = WeightSpec::default();
        let c = Complex64::new(0.2, -0.1);
        let v = GridField::from_fn(g, FieldKind::Form, |z| bump(z, c, 0.25).1);
        let f = GridField::from_fn(g, FieldKind::Section, |z| bump(z, c, 0.25).0);
        let sol = minimal_solution(&v, &w, 24).unwrap();
        let proj = BergmanProjector::new(g, &w, 24).unwrap();
        let oracle = f.sub(&proj.project(&f).unwrap()).unwrap();
        let err = proj.norm_sq(&sol.field.sub(&oracle).unwrap()).sqrt() / proj.norm_sq(&oracle).sqrt();
        assert!(err < 0.01, "{err}");
        assert!(sol.orthogonality_defect < 1e-10);
        assert!(sol.hormander_ratio < w.hormander_constant_laplacian());
        assert!(sol.degree_change.unwrap() < 1e-6, "{:?}", sol.degree_change);
    }

    #[test]
    fn psi_transforms_by_derivative() {
        let phi = MobiusTransform::new(Complex64::new(0.4, -0.7), 2.0).unwrap();
        for z in [Complex64::new(0.1, 0.2), Complex64::new(-0.9, 0.05), Complex64::new(0.0, 0.999)] {
            let lhs = 1.0 / phi.one_minus_norm_sqr_image(z);
            let rhs = 1.0 / (one_minus_norm_sqr(z) * phi.derivative(z).norm());
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn identity_pullback_is_identity() {
        let g = DiskGrid::new(3, 1.0 / 32.0).unwrap();
        let f = GridField::from_fn(g, FieldKind::Form, |z| z * z.conj() + z);
        let p = pullback(&MobiusTransform::identity(), &f, Frame::Canonical { m: 6 });
        let err = p.samples.iter().zip(&f.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn change_of_variables() {
        let g = DiskGrid::new(6, 1.0 / 256.0).unwrap();
        let w = WeightSpec::default();
        let phi = MobiusTransform::new(Complex64::new(0.3, 0.2), 0.5).unwrap();
        let c = Complex64::new(-0.1, 0.15);
        let f = GridField::from_fn(g, FieldKind::Section, |z| bump(z, c, 0.3).0 * Complex64::new(1.0, 2.0));
        let pf = pullback(&phi, &f, Frame::Trivial);
        let lhs = pf.weighted_norm_sq(|xi| w.density(phi.apply(xi)) * phi.derivative(xi).norm_sqr(), |_| true);
        let rhs = f.weighted_norm_sq(|z| w.density(z), |_| true);
        assert_relative_eq!(lhs, rhs, max_relative = 0.01);
    }

    #[test]
    fn canonical_frame_preserves_bundle_norm() {
        let g = DiskGrid::new(6, 1.0 / 256.0).unwrap();
        let w = WeightSpec::default();
        let phi = MobiusTransform::new(Complex64::new(-0.25, 0.1), 1.0).unwrap();
        let f = GridField::from_fn(g, FieldKind::Section, |z| bump(z, Complex64::new(0.1, 0.0), 0.3).0);
        let pf = pullback(&phi, &f, Frame::Canonical { m: w.m });
        let lhs = pf.weighted_norm_sq(|xi| w.bundle_density(xi) * phi.derivative(xi).norm_sqr(), |_| true);
        let rhs = f.weighted_norm_sq(|z| w.bundle_density(z), |_| true);
        assert_relative_eq!(lhs, rhs, max_relative = 0.01);
    }
}
