//! Sampled verification of the automorphism lemmas on the dyadic annuli.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::disk::{one_minus_norm_sqr, poincare_distance, MobiusTransform};
use crate::error::{Error, Result};
use crate::partition::f_n_unchecked;

/// Relative slack allowed on every inequality and identity.
pub const RELATIVE_SLACK: f64 = 1e-12;
/// Radii at which the density lower-bound constant is estimated.
pub const DENSITY_LOWER_RADII: [f64; 3] = [0.25, 0.5, 0.75];
/// Boundary samples of the small disk in the containment test.
pub const CONTAINMENT_POINTS: usize = 256;
/// Largest k drawn for the containment test.
pub const CONTAINMENT_MAX_K: u32 = 6;

const BLOCK: usize = 1024;

pub const CHECK_NAMES: [&str; 12] = [
    "density_growth",
    "disk_containment",
    "derivative_bound",
    "derivative_on_small_disk",
    "chord_slope",
    "image_radius",
    "annulus_i",
    "annulus_ii",
    "annulus_iii",
    "schwarz_pick",
    "poincare_invariance",
    "derivative_accuracy",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub a: Complex64,
    pub beta: f64,
    pub zeta: Complex64,
    pub n: u32,
    /// r for the disk-restricted lemmas, k for the containment test, unused otherwise.
    pub parameter: f64,
    pub ratio: f64,
}

/// One inequality or identity: `worst_ratio` is lhs/rhs (or the relative residual for identities).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub samples: u64,
    pub violations: u64,
    pub worst_ratio: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityLowerConstant {
    pub r: f64,
    /// Smallest observed e^{−ψ(φ(ζ))}/2^n over ζ ∈ 𝔻_r.
    pub c_empirical: f64,
    /// The lower bound 1/(2(1 + 2r/(1−r)²)) implied by the image-radius bound.
    pub c_from_image_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskLemmaReport {
    pub sample_count: usize,
    pub seed: u64,
    pub n_max: u32,
    pub checks: Vec<LemmaCheck>,
    pub density_lower: Vec<DensityLowerConstant>,
}

impl DiskLemmaReport {
    pub fn total_violations(&self) -> u64 {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, name: &str) -> Option<&LemmaCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Turns the first violated check into an error carrying its witness.
    pub fn ensure(&self) -> Result<()> {
        match self.checks.iter().find(|c| c.violations > 0) {
            None => Ok(()),
            Some(c) => Err(Error::Check(format!(
                "{} violated on {} of {} samples; witness {:?}",
                c.name, c.violations, c.samples, c.witness
            ))),
        }
    }
}

struct Acc {
    checks: Vec<LemmaCheck>,
    c_lower: Vec<f64>,
}

impl Acc {
    fn new() -> Self {
        Self {
            checks: CHECK_NAMES
                .iter()
                .map(|n| LemmaCheck {
                    name: (*n).to_string(),
                    samples: 0,
                    violations: 0,
                    worst_ratio: f64::NEG_INFINITY,
                    witness: None,
                })
                .collect(),
            c_lower: vec![f64::INFINITY; DENSITY_LOWER_RADII.len()],
        }
    }

    fn record(&mut self, i: usize, ratio: f64, witness: impl FnOnce() -> Witness) {
        let c = &mut self.checks[i];
        c.samples += 1;
        let bad = !(ratio <= 1.0 + RELATIVE_SLACK);
        if bad {
            c.violations += 1;
        }
        if bad && c.witness.is_none() {
            c.witness = Some(Witness { ratio, ..witness() });
        }
        if ratio > c.worst_ratio || ratio.is_nan() {
            c.worst_ratio = ratio;
        }
    }

    fn record_identity(&mut self, i: usize, residual: f64, witness: impl FnOnce() -> Witness) {
        // identities are recorded as residual/slack so that "≤ 1" means "within tolerance"
        self.record(i, residual / RELATIVE_SLACK, witness);
    }

    fn merge(mut self, other: Acc) -> Acc {
        for (a, b) in self.checks.iter_mut().zip(other.checks) {
            a.samples += b.samples;
            a.violations += b.violations;
            if a.witness.is_none() {
                a.witness = b.witness;
            }
            if b.worst_ratio > a.worst_ratio || b.worst_ratio.is_nan() {
                a.worst_ratio = b.worst_ratio;
            }
        }
        for (a, b) in self.c_lower.iter_mut().zip(other.c_lower) {
            *a = a.min(b);
        }
        self
    }
}

/// Double-double quotient with one correction step; the crate's own division is only f64-accurate.
fn ddiv(x: TwoFloat, y: TwoFloat) -> TwoFloat {
    let q = x / y;
    q + (x - q * y) / y
}

fn dsqrt(x: TwoFloat) -> TwoFloat {
    let s = x.sqrt();
    s + ddiv(x - s * s, s * TwoFloat::from(2.0))
}

#[derive(Clone, Copy)]
struct Dc {
    re: TwoFloat,
    im: TwoFloat,
}

impl Dc {
    fn from(z: Complex64) -> Self {
        Self { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
    }
    fn one() -> Self {
        Self { re: TwoFloat::from(1.0), im: TwoFloat::from(0.0) }
    }
    fn sub(self, o: Self) -> Self {
        Self { re: self.re - o.re, im: self.im - o.im }
    }
    fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
    fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }
    fn norm_sqr(self) -> TwoFloat {
        self.re * self.re + self.im * self.im
    }
    fn div(self, o: Self) -> Self {
        let d = o.norm_sqr();
        let n = self.mul(o.conj());
        Self { re: ddiv(n.re, d), im: ddiv(n.im, d) }
    }
}

/// φ(ζ) in double-double, with φ given by f64 parameters.
fn dd_apply(a: Dc, rot: Dc, z: Dc) -> Dc {
    rot.mul(z.sub(a)).div(Dc::one().sub(a.conj().mul(z)))
}

fn dd_pseudo(z: Dc, w: Dc) -> TwoFloat {
    let t = z.sub(w).div(Dc::one().sub(w.conj().mul(z)));
    dsqrt(t.norm_sqr())
}

/// Relative gap between atanh(t1) and atanh(t0), through atanh(t1) − atanh(t0) = atanh((t1−t0)/(1−t0 t1)).
fn distance_gap(t0: TwoFloat, t1: TwoFloat) -> f64 {
    let one = TwoFloat::from(1.0);
    let delta = f64::from(ddiv(t1 - t0, one - t0 * t1)).atanh();
    let d0 = 0.5 * f64::from(ddiv(one + t0, one - t0)).ln();
    if d0 > 0.0 {
        (delta / d0).abs()
    } else {
        0.0
    }
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, rng.gen_range(0.0..TAU))
}

fn one_sample(rng: &mut ChaCha8Rng, n_max: u32, acc: &mut Acc) {
    let n = rng.gen_range(0..=n_max);
    let x = rng.gen_range(f64::EPSILON..1.0);
    let y = rng.gen_range(0.0..2f64.powi(n as i32 + 1));
    let beta = rng.gen_range(0.0..TAU);
    let p = f_n_unchecked(n, x, y);
    let a = -Complex64::from_polar(1.0, -beta) * p;
    let phi = MobiusTransform::new(a, beta).expect("sampled center lies in the disk");
    let inv = phi.inverse();
    let scale = 2f64.powi(n as i32);
    let zeta = uniform_in_disk(rng, 1.0);
    let wit = |zeta: Complex64, parameter: f64| Witness { a, beta, zeta, n, parameter, ratio: 0.0 };

    // growth of e^{-ψ}
    let w = phi.apply(zeta);
    let lhs = 1.0 / one_minus_norm_sqr(w);
    let rhs = 8.0 * scale / one_minus_norm_sqr(zeta);
    acc.record(0, lhs / rhs, || wit(zeta, 0.0));

    // containment of small disks
    let k = rng.gen_range(0..=CONTAINMENT_MAX_K);
    let eps = 0.5f64.powi((n + k + 3) as i32);
    let mut worst = 0.0f64;
    for j in 0..CONTAINMENT_POINTS {
        let q = p + Complex64::from_polar(eps, TAU * j as f64 / CONTAINMENT_POINTS as f64);
        worst = worst.max(inv.apply(q).norm() * 2f64.powi(k as i32));
    }
    acc.record(1, worst, || wit(p, k as f64));

    // derivative bound
    acc.record(2, phi.derivative(zeta).norm() / (4.0 * scale), || wit(zeta, 0.0));

    // derivative and image-radius bounds on 𝔻_r
    let r = rng.gen_range(f64::EPSILON..1.0);
    let zr = uniform_in_disk(rng, r);
    let bound_small = 2.0 / ((1.0 - r) * (1.0 - r) * scale);
    acc.record(3, phi.derivative(zr).norm() / bound_small, || wit(zr, r));

    let c = a.conj() * zr;
    let s_star = if c.norm_sqr() > 0.0 { (c.re / c.norm_sqr()).clamp(0.0, 1.0) } else { 0.0 };
    let min_denom = (1.0 - s_star * c).norm_sqr();
    let oma = one_minus_norm_sqr(a);
    let chord = zr.norm() * oma / (1.0 - c).norm();
    let max_slope = oma / min_denom;
    let chord_ratio = if zr.norm() > 0.0 { chord / (zr.norm() * max_slope) } else { 0.0 };
    acc.record(4, chord_ratio, || wit(zr, r));

    let bound_image = 1.0 - (1.0 + 2.0 * r / ((1.0 - r) * (1.0 - r))) / scale;
    acc.record(5, bound_image / phi.apply(zr).norm(), || wit(zr, r));

    // annulus facts for a = φ(0)
    let omp = one_minus_norm_sqr(p);
    let lo = 0.5f64.powi(n as i32 + 1);
    let hi = 0.5f64.powi(n as i32 - 1);
    acc.record(6, (lo / omp).max(omp / hi), || wit(p, 0.0));
    let e = 1.0 / omp;
    acc.record(7, (0.5 * scale / e).max(e / (2.0 * scale)), || wit(p, 0.0));
    let d = poincare_distance(Complex64::new(0.0, 0.0), p).expect("p in disk");
    acc.record(8, d / (n as f64 + 2.0), || wit(p, 0.0));

    // identities in double-double
    let (ad, zd) = (Dc::from(a), Dc::from(zeta));
    // moduli and distances do not see the rotation factor
    let rot = Dc::one();
    let wd = dd_apply(ad, rot, zd);
    let den = Dc::one().sub(ad.conj().mul(zd)).norm_sqr();
    let one = TwoFloat::from(1.0);
    let deriv_abs = ddiv(one - ad.norm_sqr(), den);
    let sp_lhs = deriv_abs * (one - zd.norm_sqr());
    let sp_rhs = one - wd.norm_sqr();
    let sp_res = f64::from(ddiv(sp_lhs - sp_rhs, sp_rhs)).abs();
    acc.record_identity(9, sp_res, || wit(zeta, 0.0));

    let z2 = uniform_in_disk(rng, 1.0);
    let z2d = Dc::from(z2);
    let inv_res = distance_gap(dd_pseudo(zd, z2d), dd_pseudo(wd, dd_apply(ad, rot, z2d)));
    acc.record_identity(10, inv_res, || wit(z2, 0.0));

    let deriv = phi.derivative(zeta).norm();
    let acc_res = f64::from(ddiv(TwoFloat::from(deriv) - deriv_abs, deriv_abs)).abs();
    acc.record_identity(11, acc_res, || wit(zeta, 0.0));

    // lower bound of e^{-ψ∘φ} on 𝔻_r
    for (i, &rr) in DENSITY_LOWER_RADII.iter().enumerate() {
        let z = uniform_in_disk(rng, rr);
        let v = 1.0 / (phi.one_minus_norm_sqr_image(z) * scale);
        acc.c_lower[i] = acc.c_lower[i].min(v);
    }
}

/// Checks the automorphism lemmas on `sample_count` seeded samples with φ(0) spread over A_0..A_{n_max}.
pub fn verify_disk_lemmas(sample_count: usize, seed: u64, n_max: u32) -> Result<DiskLemmaReport> {
    if sample_count == 0 {
        return Err(Error::Domain("sample_count must be positive".into()));
    }
    if n_max < 1 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    if n_max > 40 {
        return Err(Error::Domain("n_max above 40 exhausts double precision".into()));
    }
    let blocks = sample_count.div_ceil(BLOCK);
    let parts: Vec<Acc> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut acc = Acc::new();
            let count = BLOCK.min(sample_count - b * BLOCK);
            for _ in 0..count {
                one_sample(&mut rng, n_max, &mut acc);
            }
            acc
        })
        .collect();
    let acc = parts.into_iter().fold(Acc::new(), Acc::merge);
    let density_lower = DENSITY_LOWER_RADII
        .iter()
        .zip(acc.c_lower)
        .map(|(&r, c)| DensityLowerConstant {
            r,
            c_empirical: c,
            c_from_image_radius: 1.0 / (2.0 * (1.0 + 2.0 * r / ((1.0 - r) * (1.0 - r)))),
        })
        .collect();
    Ok(DiskLemmaReport { sample_count, seed, n_max, checks: acc.checks, density_lower })
}

/// Empirical constant c with e^{−ψ∘φ} ≥ c·2^n on 𝔻_r, at one radius.
pub fn density_lower_constant(r: f64, sample_count: usize, seed: u64, n_max: u32) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = f64::INFINITY;
    for _ in 0..sample_count {
        let n = rng.gen_range(0..=n_max);
        let x = rng.gen_range(f64::EPSILON..1.0);
        let y = rng.gen_range(0.0..2f64.powi(n as i32 + 1));
        let beta = rng.gen_range(0.0..TAU);
        let p = f_n_unchecked(n, x, y);
        let phi = MobiusTransform::new(-Complex64::from_polar(1.0, -beta) * p, beta)?;
        let z = uniform_in_disk(&mut rng, r);
        c = c.min(1.0 / (phi.one_minus_norm_sqr_image(z) * 2f64.powi(n as i32)));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_growth_at_origin_has_factor_eight() {
        let phi = MobiusTransform::identity();
        let z = Complex64::new(0.0, 0.0);
        let lhs = 1.0 / one_minus_norm_sqr(phi.apply(z));
        let rhs = 8.0 / one_minus_norm_sqr(z);
        assert_eq!(lhs, 1.0);
        assert_eq!(rhs / lhs, 8.0);
    }

    #[test]
    fn small_run_is_clean_and_deterministic() {
        let a = verify_disk_lemmas(3000, 7, 10).unwrap();
        let b = verify_disk_lemmas(3000, 7, 10).unwrap();
        assert_eq!(a, b);
        a.ensure().unwrap();
        assert!(a.checks.iter().all(|c| c.samples == 3000));
        for c in &a.density_lower {
            assert!(c.c_empirical >= c.c_from_image_radius);
        }
    }

    #[test]
    fn sample_placement_covers_annuli() {
        // φ(0) = p by construction
        let beta = 1.3;
        let p = f_n_unchecked(4, 0.4, 3.0);
        let phi = MobiusTransform::new(-Complex64::from_polar(1.0, -beta) * p, beta).unwrap();
        assert!((phi.image_of_zero() - p).norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(verify_disk_lemmas(0, 1, 3).is_err());
        assert!(verify_disk_lemmas(10, 1, 0).is_err());
    }
}
