//! Discrete weighted Bergman projection onto holomorphic polynomials of bounded degree.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, FieldKind, GridField};
use crate::weight::{monomial_norm_sq, Weight, WeightSpec};

/// Relative eigenvalue cutoff of the Gram matrix.
pub const GRAM_CUTOFF: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Orthogonal projection onto span{ζ^j : j ≤ D} in the grid inner product ⟨f, g⟩ = Σ f ḡ w h².
///
/// The monomials are scaled by the closed-form norms of the radial part so the Gram matrix stays
/// close to the identity; it is inverted on eigenvalues above [`GRAM_CUTOFF`] times the largest.
pub struct BergmanProjector {
    grid: DiskGrid,
    degree: usize,
    density: Vec<f64>,
    scale: Vec<f64>,
    /// Pseudo-inverse of the Gram matrix.
    gram_pinv: DMatrix<Complex64>,
    pub rank: usize,
    pub condition: f64,
}

fn powers(z: Complex64, scale: &[f64], out: &mut [Complex64]) {
    let mut p = Complex64::new(1.0, 0.0);
    for (o, s) in out.iter_mut().zip(scale) {
        *o = p * *s;
        p *= z;
    }
}

impl BergmanProjector {
    pub fn new(grid: DiskGrid, weight: &dyn Weight, degree: usize) -> Result<Self> {
        let p = weight.radial_exponent().unwrap_or(1);
        let scale: Vec<f64> = (0..=degree).map(|j| 1.0 / monomial_norm_sq(j as u32, p).sqrt()).collect();
        let density: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let z = grid.point_at(k);
                if grid.inside(z) {
                    weight.density(z)
                } else {
                    0.0
                }
            })
            .collect();
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Domain("weight density is not finite and non-negative on the grid".into()));
        }
        let nb = degree + 1;
        let side = grid.side();
        let rows: Vec<Vec<Complex64>> = (0..side)
            .into_par_iter()
            .map(|j| {
                let mut acc = vec![ZERO; nb * nb];
                let mut b = vec![ZERO; nb];
                for i in 0..side {
                    let w = density[grid.index(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    powers(grid.point(i, j), &scale, &mut b);
                    for r in 0..nb {
                        let br = b[r].conj() * w;
                        for c in 0..nb {
                            acc[r * nb + c] += b[c] * br;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut gram = DMatrix::<Complex64>::zeros(nb, nb);
        for acc in rows {
            for r in 0..nb {
                for c in 0..nb {
                    gram[(r, c)] += acc[r * nb + c];
                }
            }
        }
        gram *= Complex64::new(grid.cell_area(), 0.0);
        // symmetrize against rounding before the Hermitian eigen-solve
        let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = gram.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if !(lmax > 0.0) {
            return Err(Error::Domain("Gram matrix has no positive eigenvalue".into()));
        }
        let cut = GRAM_CUTOFF * lmax;
        let mut pinv = DMatrix::<Complex64>::zeros(nb, nb);
        let mut rank = 0;
        let mut lmin = lmax;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > cut {
                rank += 1;
                lmin = lmin.min(l);
                let v = eig.eigenvectors.column(k);
                pinv += (&v * v.adjoint()) * Complex64::new(1.0 / l, 0.0);
            }
        }
        Ok(Self { grid, degree, density, scale, gram_pinv: pinv, rank, condition: lmax / lmin })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> DiskGrid {
        self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// ⟨f, b_j⟩ for the scaled monomials b_j.
    pub fn moments(&self, f: &GridField) -> Result<Vec<Complex64>> {
        if f.grid != self.grid {
            return Err(Error::Domain("field grid does not match the projector".into()));
        }
        let nb = self.degree + 1;
        let side = self.grid.side();
        let rows: Vec<Vec<Complex64>> = (0..side)
            .into_par_iter()
            .map(|j| {
                let mut acc = vec![ZERO; nb];
                let mut b = vec![ZERO; nb];
                for i in 0..side {
                    let k = self.grid.index(i, j);
                    let w = self.density[k];
                    let s = f.samples[k];
                    if w == 0.0 || s == ZERO {
                        continue;
                    }
                    powers(self.grid.point(i, j), &self.scale, &mut b);
                    for (a, bj) in acc.iter_mut().zip(&b) {
                        *a += s * bj.conj() * w;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![ZERO; nb];
        for r in rows {
            for (o, x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
        let area = self.grid.cell_area();
        Ok(out.into_iter().map(|x| x * area).collect())
    }

    /// Coefficients c of Pf = Σ c_j ζ^j.
    pub fn coefficients(&self, f: &GridField) -> Result<Vec<Complex64>> {
        let r = DVector::from_vec(self.moments(f)?);
        let c = &self.gram_pinv * r;
        Ok(c.iter().zip(&self.scale).map(|(c, s)| c * s).collect())
    }

    pub fn project(&self, f: &GridField) -> Result<GridField> {
        let c = self.coefficients(f)?;
        Ok(GridField::from_fn(self.grid, FieldKind::Section, |z| horner(&c, z)))
    }

    /// max_j |⟨f, b_j⟩| / (‖f‖·‖b_j‖) over the scaled monomials.
    pub fn orthogonality_defect(&self, f: &GridField) -> Result<f64> {
        let m = self.moments(f)?;
        let fnorm = self.norm_sq(f).sqrt();
        if fnorm == 0.0 {
            return Ok(0.0);
        }
        let basis_norms: Vec<f64> = (0..=self.degree)
            .map(|j| {
                let one = GridField::from_fn(self.grid, FieldKind::Section, |z| z.powu(j as u32) * self.scale[j]);
                self.norm_sq(&one).sqrt()
            })
            .collect();
        Ok(m.iter().zip(basis_norms).map(|(x, n)| x.norm() / (fnorm * n)).fold(0.0, f64::max))
    }

    pub fn norm_sq(&self, f: &GridField) -> f64 {
        let d = &self.density;
        let side = self.grid.side();
        let rows: Vec<f64> = f
            .samples
            .par_chunks(side)
            .enumerate()
            .map(|(j, row)| row.iter().enumerate().map(|(i, s)| s.norm_sqr() * d[j * side + i]).sum())
            .collect();
        rows.iter().sum::<f64>() * self.grid.cell_area()
    }
}

/// Σ c_j z^j.
pub fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(ZERO, |acc, cj| acc * z + cj)
}

/// Bergman projection for the weight (1 − |ζ|²)^{m−s}.
pub fn bergman_project(u: &GridField, w: &WeightSpec, degree: usize) -> Result<GridField> {
    w.validate()?;
    BergmanProjector::new(u.grid, w, degree)?.project(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> DiskGrid {
        DiskGrid::new(5, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn polynomials_are_fixed() {
        let w = WeightSpec::default();
        let f = GridField::from_fn(grid(), FieldKind::Section, |z| z * z * Complex64::new(2.0, -1.0) + 0.5);
        let pf = bergman_project(&f, &w, 8).unwrap();
        let err = pf.samples.iter().zip(&f.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn conjugate_projects_to_zero() {
        let w = WeightSpec::default();
        let f = GridField::from_fn(grid(), FieldKind::Section, |z| z.conj());
        let c = BergmanProjector::new(grid(), &w, 8).unwrap().coefficients(&f).unwrap();
        assert!(c[0].norm() < 1e-12);
        // the square lattice only sees ζ̄ζ^j for j ≡ 3 mod 4, through the clipped boundary
        assert!(c.iter().all(|x| x.norm() < 1e-2), "{c:?}");
    }

    #[test]
    fn idempotent_and_orthogonal() {
        let w = WeightSpec::new(6, 3).unwrap();
        let proj = BergmanProjector::new(grid(), &w, 12).unwrap();
        let f = GridField::from_fn(grid(), FieldKind::Section, |z| (z.conj() * z * 3.0).exp() + z.conj() * z * z);
        let pf = proj.project(&f).unwrap();
        let ppf = proj.project(&pf).unwrap();
        let scale = proj.norm_sq(&pf).sqrt();
        assert!(proj.norm_sq(&ppf.sub(&pf).unwrap()).sqrt() < 1e-10 * scale);
        let r = f.sub(&pf).unwrap();
        assert!(proj.orthogonality_defect(&r).unwrap() < 1e-10);
        assert_eq!(proj.rank, 13);
    }

    #[test]
    fn radial_gram_is_near_identity() {
        let proj = BergmanProjector::new(DiskGrid::new(6, 1.0 / 128.0).unwrap(), &WeightSpec::default(), 6).unwrap();
        assert!(proj.condition < 1.2, "{}", proj.condition);
    }

    #[test]
    fn rejects_non_integrable_weight() {
        let f = GridField::zeros(grid(), FieldKind::Section);
        assert!(bergman_project(&f, &WeightSpec { m: 5, s: 5 }, 4).is_err());
    }

    #[test]
    fn constant_norm_matches_closed_form() {
        let w = WeightSpec::new(2, 1).unwrap();
        let g = DiskGrid::new(8, 1.0 / 256.0).unwrap();
        let proj = BergmanProjector::new(g, &w, 0).unwrap();
        let one = GridField::from_fn(g, FieldKind::Section, |_| Complex64::new(1.0, 0.0));
        assert_relative_eq!(proj.norm_sq(&one), std::f64::consts::PI / 2.0, max_relative = 1e-3);
    }
}
