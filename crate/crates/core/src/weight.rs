//! Weights (1 − |ζ|²)^{m−s} = e^{−(σ+sψ)} with σ = −mψ, and smooth non-radial perturbations.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disk::one_minus_norm_sqr;
use crate::error::{Error, Result};

/// A density on the disk used as L² weight.
pub trait Weight: Sync {
    fn density(&self, z: Complex64) -> f64;

    /// p when the density is exactly (1 − |ζ|²)^p.
    fn radial_exponent(&self) -> Option<u32> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub m: u32,
    pub s: u32,
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self { m: 6, s: 5 }
    }
}

impl WeightSpec {
    pub fn new(m: u32, s: u32) -> Result<Self> {
        let w = Self { m, s };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("bundle weight m must be positive".into()));
        }
        if self.m <= self.s {
            return Err(Error::Config(format!(
                "weight needs m > s for integrability, got m = {}, s = {}",
                self.m, self.s
            )));
        }
        Ok(())
    }

    /// p = m − s.
    pub fn exponent(&self) -> u32 {
        self.m - self.s
    }

    /// c in dd^cσ = c/(1 − |ζ|²)² dV.
    pub fn curvature(&self) -> f64 {
        4.0 * self.m as f64
    }

    /// 1/(c − 4s), the Hörmander constant with the weight's own curvature normalization.
    pub fn hormander_constant(&self) -> f64 {
        1.0 / (self.curvature() - 4.0 * self.s as f64)
    }

    /// 4/(c − 4s) = 1/(m − s), the same bound when dd^c is read as the flat Laplacian.
    pub fn hormander_constant_laplacian(&self) -> f64 {
        4.0 * self.hormander_constant()
    }

    /// e^{−σ} = (1 − |ζ|²)^m.
    pub fn bundle_density(&self, z: Complex64) -> f64 {
        one_minus_norm_sqr(z).max(0.0).powi(self.m as i32)
    }

    /// ∬_𝔻 |ζ^j|² (1 − |ζ|²)^p dV = π j! p!/(j+p+1)!.
    pub fn monomial_norm_sq(&self, j: u32) -> f64 {
        monomial_norm_sq(j, self.exponent())
    }

    /// The same integral over the disk of radius R.
    pub fn truncated_monomial_norm_sq(&self, j: u32, radius: f64) -> f64 {
        truncated_monomial_norm_sq(j, self.exponent(), radius)
    }
}

impl Weight for WeightSpec {
    fn density(&self, z: Complex64) -> f64 {
        one_minus_norm_sqr(z).max(0.0).powi(self.exponent() as i32)
    }

    fn radial_exponent(&self) -> Option<u32> {
        Some(self.exponent())
    }
}

/// π·B(j+1, p+1).
pub fn monomial_norm_sq(j: u32, p: u32) -> f64 {
    let mut b = 1.0;
    for i in 1..=p {
        b *= i as f64 / (j + i) as f64;
    }
    PI * b / (j + p + 1) as f64
}

/// ∬_{|ζ|<R} |ζ^j|² (1 − |ζ|²)^p dV.
pub fn truncated_monomial_norm_sq(j: u32, p: u32, radius: f64) -> f64 {
    PI * radius.powi(2 * (j as i32 + 1)) * radial_kernel(j, p, radius * radius)
}

/// q_j(s) = s^{−(j+1)} ∫₀^s t^j (1 − t)^p dt = ∫₀¹ u^j (1 − s u)^p du.
///
/// Evaluated by a Gauss–Legendre rule that is exact for the polynomial integrand.
pub fn radial_kernel(j: u32, p: u32, s: f64) -> f64 {
    let deg = ((j + p) as usize / 2 + 1).max(2);
    let gl = GaussLegendre::new(deg).expect("degree at least 2");
    gl.integrate(0.0, 1.0, |u| u.powi(j as i32) * (1.0 - s * u).powi(p as i32))
}

/// q_j(s) for j ≤ degree with the Gauss–Legendre rule built once.
pub struct RadialKernel {
    p: u32,
    nodes: Vec<(f64, f64)>,
}

impl RadialKernel {
    pub fn new(p: u32, degree: u32) -> Self {
        let deg = ((degree + p) as usize / 2 + 1).max(2);
        let gl = GaussLegendre::new(deg).expect("degree at least 2");
        let nodes = gl.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        Self { p, nodes }
    }

    /// q_j(s) for all j ≤ degree at once.
    pub fn eval_all(&self, s: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(u, w) in &self.nodes {
            let mut uj = w * (1.0 - s * u).powi(self.p as i32);
            for o in out.iter_mut() {
                *o += uj;
                uj *= u;
            }
        }
    }
}

/// Flat Laplacian by the five-point stencil.
pub fn laplacian_fd<F: Fn(Complex64) -> f64>(f: F, z: Complex64, step: f64) -> f64 {
    let e = Complex64::new(step, 0.0);
    let i = Complex64::new(0.0, step);
    (f(z + e) + f(z - e) + f(z + i) + f(z - i) - 4.0 * f(z)) / (step * step)
}

/// Relative error of the finite-difference Laplacian of sψ against −4s/(1 − |ζ|²)².
pub fn s_psi_laplacian_error(s: u32, z: Complex64) -> f64 {
    let f = |w: Complex64| s as f64 * one_minus_norm_sqr(w).ln();
    let step = 1e-4 * one_minus_norm_sqr(z);
    let exact = -4.0 * s as f64 / one_minus_norm_sqr(z).powi(2);
    if s == 0 {
        return laplacian_fd(f, z, step).abs();
    }
    ((laplacian_fd(f, z, step) - exact) / exact).abs()
}

/// B(ζ) = exp(1 − 1/(1 − |ζ−c|²/r²)), with B(c) = 1.
fn smooth_bump(z: Complex64, c: Complex64, r: f64) -> f64 {
    let t = (z - c).norm_sqr() / (r * r);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

/// w_t = (1 − |ζ|²)^{m−s}·(1 + δ cos t · B(ζ)): a C^∞ family of non-radial weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    pub base: WeightSpec,
    pub delta: f64,
    pub bump_center: Complex64,
    pub bump_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedWeight {
    pub family: WeightFamily,
    pub t: f64,
}

impl Weight for PerturbedWeight {
    fn density(&self, z: Complex64) -> f64 {
        self.family.base.density(z) * self.factor(z)
    }

    fn radial_exponent(&self) -> Option<u32> {
        (self.family.delta * self.t.cos() == 0.0).then(|| self.family.base.exponent())
    }
}

impl PerturbedWeight {
    fn factor(&self, z: Complex64) -> f64 {
        let f = &self.family;
        1.0 + f.delta * self.t.cos() * smooth_bump(z, f.bump_center, f.bump_radius)
    }

    /// Δσ_t·(1 − |ζ|²)² at z, with σ_t = −mψ − log(1 + δ cos t B).
    pub fn curvature_at(&self, z: Complex64) -> f64 {
        let step = 1e-4;
        let pert = laplacian_fd(|w| self.factor(w).ln(), z, step);
        self.family.base.curvature() - pert * one_minus_norm_sqr(z).powi(2)
    }
}

/// Curvature and continuity data of a weight family on a t-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConditions {
    /// Smallest Δσ_t(1 − |ζ|²)² over the sampled (ζ, t).
    pub curvature_lower_bound: f64,
    /// Largest |∂_t w_t / w_t| over the samples.
    pub c1_modulus: f64,
}

impl WeightFamily {
    pub fn new(base: WeightSpec, delta: f64, bump_center: Complex64, bump_radius: f64) -> Result<Self> {
        base.validate()?;
        if !(delta.abs() < 1.0) {
            return Err(Error::Config(format!("perturbation size δ = {delta} must be below 1")));
        }
        if !(bump_radius > 0.0) || bump_center.norm() + bump_radius >= 1.0 {
            return Err(Error::Config("perturbation bump must lie inside the disk".into()));
        }
        Ok(Self { base, delta, bump_center, bump_radius })
    }

    pub fn at(&self, t: f64) -> PerturbedWeight {
        PerturbedWeight { family: *self, t }
    }

    /// Sup over ζ of |w_{t₁} − w_{t₂}|/w_{t₁} and of the ζ-gradient of that ratio: C¹ distance of members.
    pub fn c1_distance(&self, t1: f64, t2: f64) -> f64 {
        let d = self.delta.abs() * (t1.cos() - t2.cos()).abs();
        // ‖B‖_{C¹} of the bump is at most max(1, 1.2/r)
        d * (1.0f64).max(1.2 / self.bump_radius)
    }

    pub fn conditions(&self, ts: &[f64], radii: usize) -> FamilyConditions {
        let mut lower = f64::INFINITY;
        let mut c1 = 0.0f64;
        for &t in ts {
            let w = self.at(t);
            for a in 0..radii {
                let r = 0.95 * (a as f64 + 0.5) / radii as f64;
                let rb = self.bump_radius * (a as f64 + 0.5) / radii as f64;
                for b in 0..32 {
                    let th = b as f64 * PI / 16.0;
                    let (z, zb) = (Complex64::from_polar(r, th), self.bump_center + Complex64::from_polar(rb, th));
                    lower = lower.min(w.curvature_at(z)).min(w.curvature_at(zb));
                    let dt = self.delta * t.sin() * smooth_bump(z, self.bump_center, self.bump_radius);
                    c1 = c1.max((dt / w.factor(z)).abs());
                }
            }
        }
        FamilyConditions { curvature_lower_bound: lower, c1_modulus: c1 }
    }

    /// Errors when some member's curvature drops to 4s or below on the sweep.
    pub fn check_curvature(&self, ts: &[f64]) -> Result<FamilyConditions> {
        let cond = self.conditions(ts, 24);
        let need = 4.0 * self.base.s as f64;
        if !(cond.curvature_lower_bound > need) {
            return Err(Error::Check(format!(
                "weight family curvature {} is not above 4s = {need}",
                cond.curvature_lower_bound
            )));
        }
        Ok(cond)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validation() {
        assert!(WeightSpec::new(6, 5).is_ok());
        assert!(WeightSpec::new(5, 5).is_err());
        assert!(WeightSpec::new(0, 0).is_err());
        let w = WeightSpec::default();
        assert_eq!(w.curvature(), 24.0);
        assert_relative_eq!(w.hormander_constant(), 0.25);
    }

    #[test]
    fn beta_integral_oracle() {
        assert_relative_eq!(monomial_norm_sq(0, 1), PI / 2.0, epsilon = 1e-15);
        // 2π ∫₀¹ r^{2j+1}(1 − r²)^p dr by a fine composite midpoint rule
        for (j, p) in [(0u32, 1u32), (3, 2), (24, 6), (10, 0)] {
            let n = 200_000;
            let mut acc = 0.0;
            for k in 0..n {
                let r = (k as f64 + 0.5) / n as f64;
                acc += r.powi(2 * j as i32 + 1) * (1.0 - r * r).powi(p as i32);
            }
            let oracle = 2.0 * PI * acc / n as f64;
            assert_relative_eq!(monomial_norm_sq(j, p), oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn kernel_table_matches_single_evaluation() {
        let k = RadialKernel::new(3, 30);
        let mut out = vec![0.0; 31];
        k.eval_all(0.64, &mut out);
        for j in [0u32, 7, 30] {
            assert_relative_eq!(out[j as usize], radial_kernel(j, 3, 0.64), max_relative = 1e-13);
        }
    }

    #[test]
    fn truncated_norm_tends_to_full() {
        let w = WeightSpec::default();
        for j in [0, 5, 24] {
            assert_relative_eq!(w.truncated_monomial_norm_sq(j, 1.0), w.monomial_norm_sq(j), max_relative = 1e-13);
            assert!(w.truncated_monomial_norm_sq(j, 0.9) < w.monomial_norm_sq(j));
        }
    }

    #[test]
    fn s_psi_curvature() {
        for r in [0.0, 0.3, 0.6, 0.9] {
            let z = Complex64::from_polar(r, 0.7);
            assert!(s_psi_laplacian_error(5, z) < 0.01, "{r}");
        }
    }

    #[test]
    fn family_curvature() {
        let base = WeightSpec::default();
        let fam = WeightFamily::new(base, 0.02, Complex64::new(0.3, 0.1), 0.4).unwrap();
        let cond = fam.check_curvature(&[0.0, 1.0, 2.0]).unwrap();
        assert!(cond.curvature_lower_bound > 20.0);
        let bad = WeightFamily::new(base, 0.95, Complex64::new(0.3, 0.1), 0.05).unwrap();
        assert!(bad.check_curvature(&[0.0]).is_err());
        assert!(WeightFamily::new(base, 1.5, Complex64::new(0.0, 0.0), 0.2).is_err());
        assert_eq!(fam.c1_distance(0.4, 0.4), 0.0);
        let flat = WeightFamily::new(base, 0.0, Complex64::new(0.0, 0.0), 0.2).unwrap();
        assert_eq!(flat.at(1.0).radial_exponent(), Some(1));
        assert_eq!(fam.at(1.0).radial_exponent(), None);
    }
}
