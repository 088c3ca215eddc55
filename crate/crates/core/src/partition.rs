//! Strip rectangles S_{k,l}, the annulus maps f_n, the partition α̃_{k,l,n} and the cutoffs χ̃_n.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disk::{annulus_index, ensure_in_disk, poincare_distance, AnnulusIndex, MobiusTransform};
use crate::error::{Error, Result};

/// Rectangles per unit length in x (x-extent of S_{k,l} is two cells).
pub const X_CELLS: u32 = 32;
/// Rectangles per unit length in y.
pub const Y_CELLS: u32 = 256;
/// Number of x positions, k = 0..=30.
pub const K_COUNT: u32 = X_CELLS - 1;

#[inline]
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[inline]
fn smoothstep_slope(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        6.0 * t * (1.0 - t)
    } else {
        0.0
    }
}

/// Unit hat g(u) = S(1 − |u|), supported on [−1, 1]; integer shifts sum to one.
#[inline]
fn hat(u: f64) -> f64 {
    smoothstep(1.0 - u.abs())
}

#[inline]
fn hat_slope(u: f64) -> f64 {
    -u.signum() * smoothstep_slope(1.0 - u.abs())
}

/// Parameters of the partition. The profile is fixed; the struct records its constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub x_cells: u32,
    pub y_cells: u32,
    /// End of the plateau of χ and end of its support.
    pub chi_plateau: f64,
    pub chi_support: f64,
    /// Uniform C¹ bound of α_{k,l} in strip coordinates.
    pub c_p: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            x_cells: X_CELLS,
            y_cells: Y_CELLS,
            chi_plateau: 0.25,
            chi_support: 0.75,
            // max |g'| = S'(1/2) = 3/2, scaled by the y cell count
            c_p: 1.5 * Y_CELLS as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RectangleIndex {
    pub k: u32,
    pub l: u64,
    pub n: u32,
}

impl RectangleIndex {
    pub fn new(k: u32, l: u64, n: u32) -> Result<Self> {
        if k >= K_COUNT {
            return Err(Error::Domain(format!("k = {k} outside 0..={}", K_COUNT - 1)));
        }
        if l >= rectangles_per_turn(n) {
            return Err(Error::Domain(format!("l = {l} outside 0..{}", rectangles_per_turn(n))));
        }
        Ok(Self { k, l, n })
    }

    pub fn annulus(&self) -> AnnulusIndex {
        AnnulusIndex(self.n)
    }

    /// Center of S_{k,l} in strip coordinates.
    pub fn strip_center(&self) -> (f64, f64) {
        (
            (self.k + 1) as f64 / X_CELLS as f64,
            (self.l + 1) as f64 / Y_CELLS as f64,
        )
    }

    /// Center of S̃_{k,l,n} = f_n(S_{k,l}).
    pub fn center(&self) -> Complex64 {
        let (x, y) = self.strip_center();
        f_n_unchecked(self.n, x, y)
    }

    pub fn strip_contains(&self, x: f64, y: f64) -> bool {
        let k = self.k as f64 / X_CELLS as f64;
        if !(x > k && x < k + 2.0 / X_CELLS as f64) {
            return false;
        }
        let lo = self.l as f64 / Y_CELLS as f64;
        let dy = (y - lo).rem_euclid(period(self.n));
        dy > 0.0 && dy < 2.0 / Y_CELLS as f64
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let (x, y) = strip_coordinates(self.n, z);
        self.strip_contains(x, y)
    }
}

/// Number of l values in annulus n: 2^{n+9}.
pub fn rectangles_per_turn(n: u32) -> u64 {
    1u64 << (n + 9)
}

/// y-period of f_n: 2^{n+1}.
pub fn period(n: u32) -> f64 {
    2f64.powi(n as i32 + 1)
}

pub(crate) fn f_n_unchecked(n: u32, x: f64, y: f64) -> Complex64 {
    let h = 0.5f64.powi(n as i32 + 1);
    let r = 1.0 - 0.5f64.powi(n as i32) + x * h;
    Complex64::from_polar(r, TAU * y * h)
}

/// f_n(x, y) = (1 − 2^{−n} + x 2^{−(n+1)}) e^{2πi y 2^{−(n+1)}}.
pub fn f_n(n: u32, x: f64, y: f64) -> Result<Complex64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("strip coordinate x = {x} outside (0, 1)")));
    }
    if !y.is_finite() {
        return Err(Error::Domain("strip coordinate y is not finite".into()));
    }
    Ok(f_n_unchecked(n, x, y))
}

/// Strip coordinates of a point relative to annulus n; x leaves (0, 1) off A_n.
pub fn strip_coordinates(n: u32, z: Complex64) -> (f64, f64) {
    let scale = 2f64.powi(n as i32 + 1);
    let x = (z.norm() - 1.0 + 0.5f64.powi(n as i32)) * scale;
    let y = (z.arg().rem_euclid(TAU) / TAU * scale).rem_euclid(scale);
    (x, y)
}

/// f_n⁻¹ on the open annulus; y is returned in [0, 2^{n+1}).
pub fn f_n_inverse(n: u32, z: Complex64) -> Result<(f64, f64)> {
    ensure_in_disk(z)?;
    let (x, y) = strip_coordinates(n, z);
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("|ζ| = {} is not in the open annulus A_{n}", z.norm())));
    }
    Ok((x, y))
}

/// a_k(x): the x factor of α_{k,l}.
pub fn alpha_x(k: u32, x: f64) -> f64 {
    let c = (k + 1) as f64 / X_CELLS as f64;
    if (k == 0 && x <= c) || (k == K_COUNT - 1 && x >= c) {
        return 1.0;
    }
    hat((x - c) * X_CELLS as f64)
}

fn alpha_x_slope(k: u32, x: f64) -> f64 {
    let c = (k + 1) as f64 / X_CELLS as f64;
    if (k == 0 && x <= c) || (k == K_COUNT - 1 && x >= c) {
        return 0.0;
    }
    X_CELLS as f64 * hat_slope((x - c) * X_CELLS as f64)
}

/// Signed y offset from the center of rectangle l, reduced to the nearest period copy.
fn y_offset(l: u64, n: u32, y: f64) -> f64 {
    let p = period(n);
    let c = (l + 1) as f64 / Y_CELLS as f64;
    let d = (y - c).rem_euclid(p);
    if d > 0.5 * p {
        d - p
    } else {
        d
    }
}

/// b_l(y): the y factor of α_{k,l}, periodic with period 2^{n+1} on annulus n.
pub fn alpha_y(l: u64, n: u32, y: f64) -> f64 {
    hat(y_offset(l, n, y) * Y_CELLS as f64)
}

fn alpha_y_slope(l: u64, n: u32, y: f64) -> f64 {
    Y_CELLS as f64 * hat_slope(y_offset(l, n, y) * Y_CELLS as f64)
}

/// α_{k,l}(x, y) in strip coordinates.
pub fn alpha(idx: &RectangleIndex, x: f64, y: f64) -> f64 {
    alpha_x(idx.k, x) * alpha_y(idx.l, idx.n, y)
}

/// (∂α/∂x, ∂α/∂y).
pub fn alpha_gradient(idx: &RectangleIndex, x: f64, y: f64) -> (f64, f64) {
    (
        alpha_x_slope(idx.k, x) * alpha_y(idx.l, idx.n, y),
        alpha_x(idx.k, x) * alpha_y_slope(idx.l, idx.n, y),
    )
}

/// The decreasing cutoff χ: 1 on (0, ¼), 0 on (¾, 1).
pub fn chi(x: f64) -> f64 {
    1.0 - smoothstep((x - 0.25) * 2.0)
}

pub fn chi_slope(x: f64) -> f64 {
    -2.0 * smoothstep_slope((x - 0.25) * 2.0)
}

/// α̃_{k,l,n}(ζ) = α_{k,l}(f_n⁻¹(ζ)).
pub fn tilde_alpha(idx: &RectangleIndex, z: Complex64) -> Result<f64> {
    ensure_in_disk(z)?;
    let (x, y) = strip_coordinates(idx.n, z);
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "|ζ| = {} is outside the closed annulus A_{}",
            z.norm(),
            idx.n
        )));
    }
    Ok(alpha(idx, x, y))
}

/// χ_n: χ ∘ f_n⁻¹ on A_n, extended by 1 on D(n−1) and by 0 outside D(n).
pub fn tilde_chi(n: u32, z: Complex64) -> f64 {
    let (x, _) = strip_coordinates(n, z);
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        chi(x)
    }
}

/// ∂̄χ_n(ζ) = χ'(x)·2^{n+1}·ζ/(2|ζ|).
pub fn dbar_tilde_chi(n: u32, z: Complex64) -> Complex64 {
    let (x, _) = strip_coordinates(n, z);
    if x <= 0.0 || x >= 1.0 {
        return Complex64::new(0.0, 0.0);
    }
    let r = z.norm();
    z * (chi_slope(x) * 2f64.powi(n as i32 + 1) / (2.0 * r))
}

/// The rectangles whose α̃ is nonzero at ζ ∈ A_n (at most four).
pub fn active_rectangles(n: u32, z: Complex64) -> Vec<RectangleIndex> {
    let (x, y) = strip_coordinates(n, z);
    let mut out = Vec::with_capacity(4);
    let kx = (x * X_CELLS as f64).floor() as i64;
    let lt = rectangles_per_turn(n) as i64;
    let ly = (y * Y_CELLS as f64).floor() as i64;
    for k in [kx - 1, kx] {
        if k < 0 || k >= K_COUNT as i64 {
            continue;
        }
        for l in [ly - 1, ly] {
            let idx = RectangleIndex { k: k as u32, l: l.rem_euclid(lt) as u64, n };
            if alpha(&idx, x, y) > 0.0 {
                out.push(idx);
            }
        }
    }
    out
}

/// Measured C¹ norms of α̃∘φ and χ̃_n∘φ on φ⁻¹(S̃_{k,l,n}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposedNorms {
    pub alpha: f64,
    pub chi: f64,
}

fn c1_sample<F: Fn(Complex64) -> f64>(f: &F, xi: Complex64, step: f64) -> f64 {
    let i = Complex64::new(0.0, step);
    let dx = (f(xi + step) - f(xi - step)) / (2.0 * step);
    let dy = (f(xi + i) - f(xi - i)) / (2.0 * step);
    f(xi).abs().max(dx.abs()).max(dy.abs())
}

/// Samples per side of the strip rectangle in [`composed_regularity_check`].
pub const REGULARITY_SAMPLES: usize = 12;

pub fn composed_regularity_check(idx: &RectangleIndex, phi: &MobiusTransform) -> Result<ComposedNorms> {
    let c = phi.image_of_zero();
    let (x0, y0) = strip_coordinates(idx.n, c);
    if !idx.strip_contains(x0, y0) {
        return Err(Error::Domain(format!(
            "φ(0) = {c} is not in S̃_({},{},{})",
            idx.k, idx.l, idx.n
        )));
    }
    let inv = phi.inverse();
    let n = idx.n;
    let fa = |xi: Complex64| {
        let (x, y) = strip_coordinates(n, phi.apply(xi));
        if (0.0..=1.0).contains(&x) {
            alpha(idx, x, y)
        } else {
            0.0
        }
    };
    let fc = |xi: Complex64| tilde_chi(n, phi.apply(xi));
    let k0 = idx.k as f64 / X_CELLS as f64;
    let l0 = idx.l as f64 / Y_CELLS as f64;
    let wx = 2.0 / X_CELLS as f64;
    let wy = 2.0 / Y_CELLS as f64;
    let mut out = ComposedNorms { alpha: 0.0, chi: 0.0 };
    let m = REGULARITY_SAMPLES;
    for i in 0..m {
        for j in 0..m {
            let x = k0 + wx * (i as f64 + 0.5) / m as f64;
            let y = l0 + wy * (j as f64 + 0.5) / m as f64;
            let xi = inv.apply(f_n_unchecked(n, x, y));
            // 1e-4 in strip coordinates, transported to ξ
            let stretch = 2f64.powi(n as i32 + 1) * phi.derivative(xi).norm();
            let step = 1e-4 / stretch;
            out.alpha = out.alpha.max(c1_sample(&fa, xi, step));
            out.chi = out.chi.max(c1_sample(&fc, xi, step));
        }
    }
    Ok(out)
}

/// The translation τ_c with c the center of S̃_{k,l,n}.
pub fn centered_transform(idx: &RectangleIndex) -> MobiusTransform {
    MobiusTransform::translation_to(idx.center()).expect("rectangle centers lie in the disk")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedCount {
    pub n: u32,
    pub count: usize,
    pub ratio: f64,
}

/// Count of an r-separated set in a single annulus A_n, with the ratio count/2^n.
pub fn separated_count_bound(points: &[Complex64], r: f64) -> Result<SeparatedCount> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("separation radius {r} must be positive")));
    }
    let Some(first) = points.first() else {
        return Err(Error::Domain("empty point set".into()));
    };
    let n = annulus_index(*first)?;
    for p in points {
        if annulus_index(*p)? != n {
            return Err(Error::Domain(format!("point {p} is not in A_{}", n.0)));
        }
    }
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate().skip(i + 1) {
            let d = poincare_distance(*p, *q)?;
            if d < r {
                return Err(Error::Domain(format!(
                    "points #{i} = {p} and #{j} = {q} are {d} apart, closer than {r}"
                )));
            }
        }
    }
    Ok(SeparatedCount { n: n.0, count: points.len(), ratio: points.len() as f64 / n.scale() })
}

/// Area element of f_n: 2^{−(n+1)} · 2π r 2^{−(n+1)}.
pub fn f_n_jacobian(n: u32, x: f64) -> f64 {
    let h = 0.5f64.powi(n as i32 + 1);
    let r = 1.0 - 0.5f64.powi(n as i32) + x * h;
    h * h * 2.0 * PI * r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub n_max: u32,
    pub samples_per_annulus: usize,
    /// max |Σ α̃ − 1| over random points of A_n°, n ≤ n_max.
    pub sum_defect: f64,
    /// Largest number of nonzero α̃ on the exhaustive strip lattice.
    pub max_overlap: usize,
    /// (n, max |∇α̃_{k,l,n}| / 2^n) for 1 ≤ n ≤ n_max.
    pub gradient_ratios: Vec<(u32, f64)>,
    /// max / min of the gradient ratios.
    pub gradient_band: f64,
    /// (n, max C¹ norm of α̃∘φ, max C¹ norm of χ̃_n∘φ) over the sampled (k, l, φ).
    pub composed: Vec<(u32, f64, f64)>,
    pub composed_samples: usize,
}

/// Largest |∇α̃| over a lattice on one rectangle, by central differences in ζ.
fn max_gradient(idx: &RectangleIndex, side: usize) -> f64 {
    let n = idx.n;
    let step = 1e-4 * 0.5f64.powi(n as i32 + 1);
    let f = |z: Complex64| {
        let (x, y) = strip_coordinates(n, z);
        if (0.0..=1.0).contains(&x) {
            alpha(idx, x, y)
        } else {
            0.0
        }
    };
    let k0 = idx.k as f64 / X_CELLS as f64;
    let l0 = idx.l as f64 / Y_CELLS as f64;
    let mut best = 0.0f64;
    for i in 0..side {
        for j in 0..side {
            let x = k0 + 2.0 * (i as f64 + 0.5) / (side as f64 * X_CELLS as f64);
            let y = l0 + 2.0 * (j as f64 + 0.5) / (side as f64 * Y_CELLS as f64);
            let z = f_n_unchecked(n, x, y);
            let dx = (f(z + step) - f(z - step)) / (2.0 * step);
            let dy = (f(z + Complex64::new(0.0, step)) - f(z - Complex64::new(0.0, step))) / (2.0 * step);
            best = best.max(dx.hypot(dy));
        }
    }
    best
}

/// Sampled and exhaustive checks of the partition: sum, overlap, gradient scaling and pullback regularity.
pub fn partition_invariants(
    samples_per_annulus: usize,
    composed_samples: usize,
    n_max: u32,
    seed: u64,
) -> Result<PartitionReport> {
    if n_max < 1 || samples_per_annulus == 0 {
        return Err(Error::Config("partition checks need n_max >= 1 and a positive sample count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum_defect = 0.0f64;
    for n in 0..=n_max {
        for _ in 0..samples_per_annulus {
            let x = rng.gen_range(f64::EPSILON..1.0);
            let y = rng.gen_range(0.0..period(n));
            let z = f_n_unchecked(n, x, y);
            let total: f64 = active_rectangles(n, z).iter().map(|idx| tilde_alpha(idx, z).unwrap_or(0.0)).sum();
            sum_defect = sum_defect.max((total - 1.0).abs());
        }
    }
    // lattice of samples_per_annulus points: side × side in (x, y) over one period
    let side = (samples_per_annulus as f64).sqrt().ceil() as usize;
    let mut max_overlap = 0;
    for n in 0..=n_max {
        for i in 0..side {
            for j in 0..side {
                let x = (i as f64 + 0.5) / side as f64;
                let y = period(n) * j as f64 / side as f64;
                let (xs, ys) = strip_coordinates(n, f_n_unchecked(n, x, y));
                let mut count = 0;
                let kx = (xs * X_CELLS as f64).floor() as i64;
                let ly = (ys * Y_CELLS as f64).floor() as i64;
                let lt = rectangles_per_turn(n) as i64;
                for k in kx - 2..=kx + 1 {
                    if k < 0 || k >= K_COUNT as i64 {
                        continue;
                    }
                    for l in ly - 2..=ly + 1 {
                        let idx = RectangleIndex { k: k as u32, l: l.rem_euclid(lt) as u64, n };
                        if alpha(&idx, xs, ys) > 0.0 {
                            count += 1;
                        }
                    }
                }
                max_overlap = max_overlap.max(count);
            }
        }
    }
    let gradient_ratios: Vec<(u32, f64)> = (1..=n_max)
        .map(|n| {
            let idx = RectangleIndex { k: K_COUNT / 2, l: 3, n };
            (n, max_gradient(&idx, 40) / 2f64.powi(n as i32))
        })
        .collect();
    let gmax = gradient_ratios.iter().map(|g| g.1).fold(0.0, f64::max);
    let gmin = gradient_ratios.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let mut composed: Vec<(u32, f64, f64)> = (0..=n_max).map(|n| (n, 0.0, 0.0)).collect();
    for _ in 0..composed_samples {
        let n = rng.gen_range(1..=n_max);
        let k = rng.gen_range(0..K_COUNT);
        let l = rng.gen_range(0..rectangles_per_turn(n));
        let idx = RectangleIndex { k, l, n };
        let x = (k as f64 + rng.gen_range(0.1..1.9)) / X_CELLS as f64;
        let y = (l as f64 + rng.gen_range(0.1..1.9)) / Y_CELLS as f64;
        let p = f_n_unchecked(n, x, y);
        let phi = MobiusTransform::translation_to(p)?.compose(&MobiusTransform::rotation(rng.gen_range(0.0..TAU)));
        let c = composed_regularity_check(&idx, &phi)?;
        let slot = &mut composed[n as usize];
        slot.1 = slot.1.max(c.alpha);
        slot.2 = slot.2.max(c.chi);
    }
    Ok(PartitionReport {
        n_max,
        samples_per_annulus,
        sum_defect,
        max_overlap,
        gradient_ratios,
        gradient_band: gmax / gmin,
        composed,
        composed_samples,
    })
}
