//! Poincaré disk geometry: ψ, distances, dyadic annuli and disk automorphisms.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 - |z|^2` evaluated without forming `|z|^2` first.
#[inline]
pub fn one_minus_norm_sqr(z: Complex64) -> f64 {
    (-z.im).mul_add(z.im, (-z.re).mul_add(z.re, 1.0))
}

#[inline]
pub fn ensure_in_disk(z: Complex64) -> Result<()> {
    if z.norm_sqr() < 1.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::OutsideDisk { re: z.re, im: z.im })
    }
}

/// ψ(ζ) = log(1 − |ζ|²).
pub fn psi(z: Complex64) -> Result<f64> {
    ensure_in_disk(z)?;
    Ok(one_minus_norm_sqr(z).ln())
}

/// Poincaré distance with the normalization d(0, a) = ½ log((1+|a|)/(1−|a|)).
pub fn poincare_distance(z: Complex64, w: Complex64) -> Result<f64> {
    ensure_in_disk(z)?;
    ensure_in_disk(w)?;
    Ok(pseudo_distance(z, w).atanh())
}

/// |z − w| / |1 − w̄z|, the modulus of the image of `z` under the map sending `w` to 0.
#[inline]
pub fn pseudo_distance(z: Complex64, w: Complex64) -> f64 {
    ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm()
}

/// Euclidean radius of the Poincaré disk of radius `d` about the origin.
#[inline]
pub fn euclidean_radius(d: f64) -> f64 {
    d.tanh()
}

/// Label of the dyadic annulus A_n = {1 − 2^{−n} ≤ |ζ| < 1 − 2^{−(n+1)}}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnnulusIndex(pub u32);

impl AnnulusIndex {
    pub fn n(self) -> u32 {
        self.0
    }

    /// Inner radius 1 − 2^{−n} (included in A_n).
    pub fn inner_radius(self) -> f64 {
        1.0 - 0.5f64.powi(self.0 as i32)
    }

    /// Outer radius 1 − 2^{−(n+1)} (excluded from A_n, the radius of D(n)).
    pub fn outer_radius(self) -> f64 {
        1.0 - 0.5f64.powi(self.0 as i32 + 1)
    }

    pub fn contains_radius(self, r: f64) -> bool {
        r >= self.inner_radius() && r < self.outer_radius()
    }

    pub fn contains(self, z: Complex64) -> bool {
        self.contains_radius(z.norm())
    }

    /// 2^n as a float.
    pub fn scale(self) -> f64 {
        2f64.powi(self.0 as i32)
    }
}

pub fn annulus_index(z: Complex64) -> Result<AnnulusIndex> {
    ensure_in_disk(z)?;
    Ok(annulus_of_radius(z.norm()))
}

pub(crate) fn annulus_of_radius(r: f64) -> AnnulusIndex {
    if r < 0.5 {
        return AnnulusIndex(0);
    }
    let mut n = (-(1.0 - r).log2()).floor().max(0.0) as u32;
    // the logarithm can land one off near the dyadic edges
    while r >= AnnulusIndex(n).outer_radius() {
        n += 1;
    }
    while n > 0 && r < AnnulusIndex(n).inner_radius() {
        n -= 1;
    }
    AnnulusIndex(n)
}

/// A disk automorphism φ(ζ) = e^{iβ}(ζ − a)/(1 − āζ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusTransform {
    a: Complex64,
    beta: f64,
}

impl Default for MobiusTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn wrap_angle(beta: f64) -> f64 {
    let b = beta.rem_euclid(TAU);
    if b >= TAU {
        0.0
    } else {
        b
    }
}

impl MobiusTransform {
    pub fn new(a: Complex64, beta: f64) -> Result<Self> {
        ensure_in_disk(a)?;
        if !beta.is_finite() {
            return Err(Error::Domain(format!("rotation angle {beta} is not finite")));
        }
        Ok(Self { a, beta: wrap_angle(beta) })
    }

    pub const fn identity() -> Self {
        Self { a: Complex64::new(0.0, 0.0), beta: 0.0 }
    }

    pub fn rotation(theta: f64) -> Self {
        Self { a: Complex64::new(0.0, 0.0), beta: wrap_angle(theta) }
    }

    /// The hyperbolic translation ζ ↦ (ζ + p)/(1 + p̄ζ), sending 0 to `p`.
    pub fn translation_to(p: Complex64) -> Result<Self> {
        Self::new(-p, 0.0)
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        Complex64::from_polar(1.0, self.beta) * (z - self.a) / (1.0 - self.a.conj() * z)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let d = 1.0 - self.a.conj() * z;
        Complex64::from_polar(one_minus_norm_sqr(self.a), self.beta) / (d * d)
    }

    /// The square root e^{iβ/2}√(1−|a|²)/(1 − āζ) of the derivative.
    pub fn sqrt_derivative(&self, z: Complex64) -> Complex64 {
        Complex64::from_polar(one_minus_norm_sqr(self.a).sqrt(), 0.5 * self.beta)
            / (1.0 - self.a.conj() * z)
    }

    /// φ'(ζ)^{m/2}, the transition factor of K^{m/2}.
    pub fn frame_factor(&self, z: Complex64, m: u32) -> Complex64 {
        if m % 2 == 0 {
            self.derivative(z).powi((m / 2) as i32)
        } else {
            self.sqrt_derivative(z).powi(m as i32)
        }
    }

    /// 1 − |φ(ζ)|², through the Schwarz–Pick identity so that it stays accurate near the circle.
    pub fn one_minus_norm_sqr_image(&self, z: Complex64) -> f64 {
        let d = (1.0 - self.a.conj() * z).norm_sqr();
        one_minus_norm_sqr(self.a) * one_minus_norm_sqr(z) / d
    }

    pub fn image_of_zero(&self) -> Complex64 {
        -Complex64::from_polar(1.0, self.beta) * self.a
    }

    pub fn preimage_of_zero(&self) -> Complex64 {
        self.a
    }

    fn su11(&self) -> (Complex64, Complex64) {
        let s = 1.0 / one_minus_norm_sqr(self.a).sqrt();
        let e = Complex64::from_polar(s, 0.5 * self.beta);
        (e, -e * self.a)
    }

    fn from_su11(p: Complex64, q: Complex64) -> Self {
        let a = -q / p;
        Self { a, beta: wrap_angle(2.0 * p.arg()) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let (p1, q1) = self.su11();
        let (p2, q2) = other.su11();
        Self::from_su11(p1 * p2 + q1 * q2.conj(), p1 * q2 + q1 * p2.conj())
    }

    pub fn inverse(&self) -> Self {
        let (p, q) = self.su11();
        Self::from_su11(p.conj(), -q)
    }

    /// Largest parameter gap to another transform, with β compared on the circle.
    pub fn distance(&self, other: &Self) -> f64 {
        let db = (self.beta - other.beta).rem_euclid(TAU);
        (self.a - other.a).norm().max(db.min(TAU - db))
    }

    /// Translation length along the axis, in the curvature −1 metric, from the trace.
    pub fn translation_length(&self) -> f64 {
        let (p, _) = self.su11();
        let tr = 2.0 * p.re.abs();
        if tr <= 2.0 {
            0.0
        } else {
            2.0 * (0.5 * tr).acosh()
        }
    }

    /// |trace| of the SU(1,1) lift; above 2 exactly for hyperbolic elements.
    pub fn abs_trace(&self) -> f64 {
        2.0 * self.su11().0.re.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(c(0.0, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(psi(c(0.5, 0.0)).unwrap(), 0.75f64.ln(), epsilon = 1e-15);
        let z = c(0.0, 1.0 - 0.125);
        let e = (-psi(z).unwrap()).exp();
        assert!((4.0..=16.0).contains(&e));
        assert!(psi(c(1.0, 0.0)).is_err());
        assert!(psi(c(0.8, 0.7)).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(poincare_distance(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(
            poincare_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap(),
            0.5 * 3f64.ln(),
            epsilon = 1e-15
        );
        let a = c(0.0, 0.97);
        assert_eq!(annulus_index(a).unwrap(), AnnulusIndex(5));
        assert!(poincare_distance(c(0.0, 0.0), a).unwrap() <= 7.0);
        assert!(poincare_distance(c(0.0, 0.0), c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus_index(c(0.0, 0.0)).unwrap(), AnnulusIndex(0));
        assert_eq!(annulus_index(c(0.75, 0.0)).unwrap(), AnnulusIndex(2));
        assert_eq!(annulus_index(c(0.0, -0.9)).unwrap(), AnnulusIndex(3));
        assert_eq!(annulus_index(c(0.5, 0.0)).unwrap(), AnnulusIndex(1));
        assert_eq!(annulus_index(c(0.4999999, 0.0)).unwrap(), AnnulusIndex(0));
        for n in 0..40 {
            let r = AnnulusIndex(n).inner_radius();
            assert_eq!(annulus_of_radius(r), AnnulusIndex(n), "inner edge of A_{n}");
        }
    }

    #[test]
    fn identity_transform() {
        let id = MobiusTransform::identity();
        let z = c(0.3, -0.2);
        assert_eq!(id.apply(z), z);
        assert_eq!(id.derivative(z), c(1.0, 0.0));
    }

    #[test]
    fn derivative_at_zero() {
        let phi = MobiusTransform::new(c(0.4, 0.3), 1.1).unwrap();
        let expect = Complex64::from_polar(1.0 - 0.25, 1.1);
        assert_relative_eq!((phi.derivative(c(0.0, 0.0)) - expect).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn compose_matches_pointwise() {
        let f = MobiusTransform::new(c(0.6, -0.1), 2.0).unwrap();
        let g = MobiusTransform::new(c(-0.3, 0.5), 5.5).unwrap();
        let fg = f.compose(&g);
        for z in [c(0.1, 0.2), c(-0.7, 0.1), c(0.0, 0.9)] {
            assert!((fg.apply(z) - f.apply(g.apply(z))).norm() < 1e-14);
        }
        let id = f.compose(&f.inverse());
        assert!(id.distance(&MobiusTransform::identity()) < 1e-14);
    }

    #[test]
    fn translation_sends_zero() {
        let p = c(0.3, 0.6);
        let t = MobiusTransform::translation_to(p).unwrap();
        assert!((t.apply(c(0.0, 0.0)) - p).norm() < 1e-16);
        assert!((t.image_of_zero() - p).norm() < 1e-16);
        let ell = t.translation_length();
        assert_relative_eq!(ell, 2.0 * p.norm().atanh(), epsilon = 1e-13);
    }

    #[test]
    fn frame_factor_squares_to_derivative_power() {
        let f = MobiusTransform::new(c(0.2, -0.55), 0.4).unwrap();
        let z = c(-0.3, 0.25);
        let s = f.sqrt_derivative(z);
        assert!((s * s - f.derivative(z)).norm() < 1e-14);
        assert!((f.frame_factor(z, 6) - f.derivative(z).powi(3)).norm() < 1e-13);
        assert!((f.frame_factor(z, 3) - s.powi(3)).norm() < 1e-13);
    }

    #[test]
    fn image_defect_is_accurate_near_circle() {
        let f = MobiusTransform::new(c(0.0, 0.999), 0.0).unwrap();
        let z = c(0.0, 0.9999);
        let w = f.apply(z);
        let direct = one_minus_norm_sqr(w);
        let stable = f.one_minus_norm_sqr_image(z);
        assert_relative_eq!(direct, stable, max_relative = 1e-8);
    }
}
