//! The deck-sum solver on the leaves of the suspension.
//!
//! The right-hand side is a sum of bumps centered on the orbits of a few base points, one per box,
//! with a transversal modulation. Every pulled-back piece is a scalar times the bump of its box, so
//! the local minimal solution U* of each box is computed once and u_t = Σ_w c_w(t)·w_*U* is
//! assembled from fields cached on the evaluation grid, in enumeration order.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disk::{AnnulusIndex, MobiusTransform};
use crate::error::{Error, Result};
use crate::fuchsian::{enumerate_deck, octagon_generators, DeckElement, DeckEnumeration};
use crate::grid::{DiskGrid, FieldKind, GridField};
use crate::lemmas::density_lower_constant;
use crate::local::LocalSolution;
use crate::minimal::{pullback_factor, Frame};
use crate::perturbation::log_slope;
use crate::suspension::{arc_distance, fit_distortion_exponent, SuspensionModel, TransversalAction};
use crate::weight::{Weight, WeightSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One flow box of the right-hand side: the bump a(t)·(1 − |ζ/r|²)² dζ̄ centered at `center`,
/// with a(t) = amplitude·(1 + modulation·cos(t + phase)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhsBox {
    pub center: Complex64,
    pub radius: f64,
    pub amplitude: f64,
    pub modulation: f64,
    pub phase: f64,
}

impl Default for RhsBox {
    fn default() -> Self {
        Self { center: ZERO, radius: 0.2, amplitude: 1.0, modulation: 0.5, phase: 0.0 }
    }
}

impl RhsBox {
    pub fn transversal(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + self.modulation * (t + self.phase).cos())
    }

    pub fn transversal_derivative(&self, t: f64) -> f64 {
        -self.amplitude * self.modulation * (t + self.phase).sin()
    }

    /// The dζ̄ coefficient of the centered bump with unit transversal factor.
    pub fn profile(&self, z: Complex64) -> Complex64 {
        let s = z.norm_sqr() / (self.radius * self.radius);
        if s >= 1.0 {
            ZERO
        } else {
            Complex64::new((1.0 - s).powi(2), 0.0)
        }
    }

    /// Radius of the bump in the Poincaré distance.
    pub fn kobayashi_radius(&self) -> f64 {
        self.radius.atanh()
    }

    /// The translation taking 0 to the box center.
    pub fn chart(&self) -> MobiusTransform {
        MobiusTransform::translation_to(self.center).expect("validated center")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub action: TransversalAction,
    pub weight: WeightSpec,
    pub boxes: Vec<RhsBox>,
    /// Largest annulus index summed.
    pub n_max: u32,
    pub word_cap: usize,
    pub h: f64,
    /// Radius r of the evaluation disk 𝔻_r.
    pub eval_radius: f64,
    /// Degree of the removed polynomial in the local solves.
    pub degree: usize,
    pub seed: u64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            action: TransversalAction::default(),
            weight: WeightSpec::default(),
            boxes: vec![RhsBox::default()],
            n_max: 8,
            word_cap: 12,
            h: 1.0 / 256.0,
            eval_radius: 0.5,
            degree: 48,
            seed: 1,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.weight.validate()?;
        if !(self.weight.curvature() > 20.0) {
            return Err(Error::Config(format!("curvature 4m = {} must exceed 20", self.weight.curvature())));
        }
        if self.n_max < 1 {
            return Err(Error::Config("truncation N must be at least 1".into()));
        }
        if !(self.h > 0.0 && self.h < 0.1) {
            return Err(Error::Config(format!("grid spacing {} outside (0, 0.1)", self.h)));
        }
        if !(self.eval_radius > 0.0 && self.eval_radius < 0.9) {
            return Err(Error::Config(format!("evaluation radius {} outside (0, 0.9)", self.eval_radius)));
        }
        let sep = octagon_generators().geometry().orbit_separation;
        for (i, b) in self.boxes.iter().enumerate() {
            if !(b.radius > 0.0 && b.radius < 1.0) || !(b.center.norm() < 1.0) {
                return Err(Error::Config(format!("rhs box {i} is not inside the disk")));
            }
            if !(2.0 * b.kobayashi_radius() < sep) {
                return Err(Error::Config(format!(
                    "rhs box {i}: Kobayashi radius {} must be below half the orbit separation {}",
                    b.kobayashi_radius(),
                    sep
                )));
            }
            if !(b.amplitude.is_finite() && b.modulation.is_finite() && b.phase.is_finite()) {
                return Err(Error::Config(format!("rhs box {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> SuspensionModel {
        SuspensionModel::new(octagon_generators(), self.action.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafSolution {
    pub t: f64,
    pub n_max: u32,
    pub field: GridField,
    /// ‖Σ_{w∈E_n} c_w F_w‖ on 𝔻_r for n = 0..=N.
    pub annulus_norms: Vec<f64>,
    /// ‖u^{(N')}‖ on 𝔻_r for N' = 0..=N.
    pub partial_norms: Vec<f64>,
    /// exp of the slope of log annulus norm over the nonempty annuli with n ≥ 1.
    pub fitted_ratio: f64,
    /// Geometric extrapolation of the tail beyond N.
    pub tail_estimate: f64,
    /// ‖∂̄u_t − v_t‖ / ‖v_t‖ on 𝔻_r.
    pub residual: f64,
    pub elements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusLipschitz {
    pub n: u32,
    pub elements: usize,
    /// max over w ∈ E_n of ‖u_{w,t₂} − u_{w,t₁}‖ / d₀(t₁, t₂).
    pub envelope: f64,
    /// (1/2)^{n(s − 2(k+1))/2}.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub t1: f64,
    pub t2: f64,
    pub k: u32,
    pub per_annulus: Vec<AnnulusLipschitz>,
    /// max envelope / bound.
    pub fitted_constant: f64,
    /// ‖u_{t₂} − u_{t₁}‖ / d₀(t₁, t₂).
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub t: f64,
    pub deltas: Vec<f64>,
    /// ‖(u_{t+δ} − u_{t−δ})/2δ − ∂_t u‖ / ‖∂_t u‖, or the absolute value when ∂_t u = 0.
    pub defects: Vec<f64>,
    pub derivative_norm: f64,
    /// Slope of log defect against log δ.
    pub order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    /// Largest pulled-back data norm over the sampled (w, t).
    pub c1: f64,
    /// Its largest value per annulus (zero for empty annuli).
    pub c1_per_annulus: Vec<f64>,
    /// Largest squared-norm Hörmander ratio of the local solves.
    pub c2: f64,
    /// Density lower-bound constant at the evaluation radius.
    pub c3: f64,
    /// max #E_n / 2^n over 3 ≤ n ≤ N.
    pub c4: f64,
    pub k: u32,
    /// 4 c₁ c₂ c₄ c₃^{−s/2}.
    pub tail_coefficient: f64,
    pub tail_from: u32,
    /// tail_coefficient · Σ_{n > tail_from} (1/2)^{n(s−4)/2}.
    pub predicted_tail: f64,
    /// ‖Σ_{tail_from < n ≤ N} contributions‖ on 𝔻_r at t.
    pub measured_tail: f64,
    pub t: f64,
}

pub struct DeckSumSolver {
    pub spec: ProblemSpec,
    pub model: SuspensionModel,
    pub enumeration: DeckEnumeration,
    pub grid: DiskGrid,
    pub profiles: Vec<LocalSolution>,
    /// Cached w_*U* per (element, box), index element·boxes + box.
    fields: Vec<Vec<Complex64>>,
    /// ‖w_*U*‖ on 𝔻_r per (element, box).
    field_norms: Vec<f64>,
    bump_norms: Vec<f64>,
}

impl DeckSumSolver {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let model = spec.model();
        let enumeration = enumerate_deck(&model.group, spec.word_cap, AnnulusIndex(spec.n_max));
        let grid = DiskGrid::clipped(spec.eval_radius + 3.0 * spec.h, spec.h)?;
        let w = spec.weight;
        let mut profiles = Vec::with_capacity(spec.boxes.len());
        let mut bump_norms = Vec::with_capacity(spec.boxes.len());
        for b in &spec.boxes {
            let p = LocalSolution::from_fn(|z| b.profile(z), b.radius, spec.h, w, 1.0, spec.degree)?;
            bump_norms.push(p.data_norm_sq.sqrt());
            profiles.push(p);
        }
        let mut solver =
            Self { spec, model, enumeration, grid, profiles, fields: Vec::new(), field_norms: Vec::new(), bump_norms };
        let nb = solver.spec.boxes.len();
        let mut fields = Vec::with_capacity(solver.enumeration.elements.len() * nb);
        for e in &solver.enumeration.elements {
            for j in 0..nb {
                fields.push(solver.pushed_profile(&e.transform, j));
            }
        }
        solver.field_norms = fields.iter().map(|f| solver.eval_norm(f)).collect();
        solver.fields = fields;
        Ok(solver)
    }

    pub fn boxes(&self) -> &[RhsBox] {
        &self.spec.boxes
    }

    fn density(&self) -> impl Fn(Complex64) -> f64 + Sync + '_ {
        move |z| self.spec.weight.density(z)
    }

    /// Norm of grid samples over 𝔻_r in the weight.
    fn eval_norm(&self, samples: &[Complex64]) -> f64 {
        let f = GridField { grid: self.grid, kind: FieldKind::Section, support: None, samples: samples.to_vec() };
        let r = self.spec.eval_radius;
        f.weighted_norm_sq(self.density(), |z| z.norm() < r).sqrt()
    }

    /// (g∘τ_j)_* U*_j on the evaluation grid.
    fn pushed_profile(&self, g: &MobiusTransform, j: usize) -> Vec<Complex64> {
        let phi = g.compose(&self.spec.boxes[j].chart());
        let inv = phi.inverse();
        let prof = &self.profiles[j];
        let m = self.spec.weight.m;
        let identity = phi == MobiusTransform::identity();
        GridField::from_fn(self.grid, FieldKind::Section, |z| {
            if !self.grid.inside(z) {
                return ZERO;
            }
            if identity {
                return prof.eval(z);
            }
            prof.eval(inv.apply(z)) * inv.frame_factor(z, m)
        })
        .samples
    }

    /// c_{w,j}(t) = a_j(ϕ(w)⁻¹(t)).
    pub fn coefficient(&self, e: &DeckElement, j: usize, t: f64) -> f64 {
        self.spec.boxes[j].transversal(self.model.base_point_shift(e, t))
    }

    pub fn coefficient_derivative(&self, e: &DeckElement, j: usize, t: f64) -> f64 {
        let b = &self.spec.boxes[j];
        b.transversal_derivative(self.model.base_point_shift(e, t)) * self.model.act_inverse_derivative(e, t)
    }

    /// Σ coefficient(e, j)·F_{e,j} over elements with annulus ≤ n, in enumeration order.
    fn assemble<C: Fn(&DeckElement, usize) -> f64>(&self, n: u32, coefficient: C) -> Vec<Complex64> {
        let nb = self.spec.boxes.len();
        let mut acc = vec![ZERO; self.grid.len()];
        for (i, e) in self.enumeration.elements.iter().enumerate() {
            if e.annulus.0 > n {
                continue;
            }
            for j in 0..nb {
                let c = coefficient(e, j);
                if c == 0.0 {
                    continue;
                }
                let f = &self.fields[i * nb + j];
                acc.par_iter_mut().zip(f.par_iter()).for_each(|(a, x)| *a += x * c);
            }
        }
        acc
    }

    fn assemble_annulus<C: Fn(&DeckElement, usize) -> f64>(&self, n: u32, coefficient: C) -> Vec<Complex64> {
        self.assemble(n, |e, j| if e.annulus.0 == n { coefficient(e, j) } else { 0.0 })
    }

    fn check_truncation(&self, n: u32) -> Result<()> {
        if n > self.spec.n_max {
            return Err(Error::Domain(format!(
                "truncation N = {n} exceeds the enumerated N = {}",
                self.spec.n_max
            )));
        }
        Ok(())
    }

    /// The pulled-back piece v*_{t,w} of box j on a patch around 0.
    pub fn localize_rhs(&self, t: f64, e: &DeckElement, j: usize) -> Result<GridField> {
        let b = &self.spec.boxes[j];
        let h = self.spec.h;
        let c = self.coefficient(e, j, t);
        let grid = DiskGrid::patch(b.radius + 4.0 * h, h)?;
        let v = GridField::from_fn(grid, FieldKind::Form, |z| b.profile(z) * c);
        if let Some(s) = v.measured_support(0.0) {
            let allowed = b.kobayashi_radius().tanh() + h;
            if s.radius > allowed {
                return Err(Error::Check(format!(
                    "piece support {} leaks outside the Kobayashi disk of Euclidean radius {allowed}",
                    s.radius
                )));
            }
        }
        Ok(v)
    }

    /// v_t on the evaluation grid: every piece whose support meets the grid.
    pub fn rhs_on_grid(&self, t: f64) -> GridField {
        let reach = (self.grid.clip.unwrap() + self.spec.h).atanh();
        let m = self.spec.weight.m;
        let mut acc = vec![ZERO; self.grid.len()];
        for e in &self.enumeration.elements {
            for (j, b) in self.spec.boxes.iter().enumerate() {
                let phi = e.transform.compose(&b.chart());
                let center = phi.image_of_zero();
                if center.norm().atanh() - b.kobayashi_radius() > reach {
                    continue;
                }
                let c = self.coefficient(e, j, t);
                let inv = phi.inverse();
                let piece = GridField::from_fn(self.grid, FieldKind::Form, |z| {
                    if !self.grid.inside(z) {
                        return ZERO;
                    }
                    b.profile(inv.apply(z)) * pullback_factor(&inv, z, FieldKind::Form, Frame::Canonical { m }) * c
                });
                acc.iter_mut().zip(piece.samples).for_each(|(a, x)| *a += x);
            }
        }
        GridField { grid: self.grid, kind: FieldKind::Form, support: None, samples: acc }
    }

    pub fn solve_leaf(&self, t: f64) -> Result<LeafSolution> {
        self.solve_leaf_truncated(t, self.spec.n_max)
    }

    pub fn solve_leaf_truncated(&self, t: f64, n: u32) -> Result<LeafSolution> {
        self.check_truncation(n)?;
        let samples = self.assemble(n, |e, j| self.coefficient(e, j, t));
        let field = GridField { grid: self.grid, kind: FieldKind::Section, support: None, samples };
        let mut annulus_norms = Vec::with_capacity(n as usize + 1);
        let mut partial = vec![ZERO; self.grid.len()];
        let mut partial_norms = Vec::with_capacity(n as usize + 1);
        for k in 0..=n {
            let a = self.assemble_annulus(k, |e, j| self.coefficient(e, j, t));
            annulus_norms.push(self.eval_norm(&a));
            partial.iter_mut().zip(&a).for_each(|(p, x)| *p += x);
            partial_norms.push(self.eval_norm(&partial));
        }
        check_convergence(&annulus_norms)?;
        let pts: Vec<(f64, f64)> = annulus_norms
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, a)| **a > 0.0)
            .map(|(k, a)| (k as f64, a.ln()))
            .collect();
        let fitted_ratio = log_slope(&pts).exp();
        let last = annulus_norms.iter().rev().find(|a| **a > 0.0).copied().unwrap_or(0.0);
        let tail_estimate =
            if fitted_ratio.is_finite() && fitted_ratio < 1.0 { last * fitted_ratio / (1.0 - fitted_ratio) } else { f64::NAN };
        let v = self.rhs_on_grid(t);
        let du = field.dbar();
        let r = self.spec.eval_radius;
        let diff = du.sub(&v)?;
        let vn = v.weighted_norm_sq(self.density(), |z| z.norm() < r).sqrt();
        let dn = diff.weighted_norm_sq(self.density(), |z| z.norm() < r).sqrt();
        let residual = if vn > 0.0 { dn / vn } else { dn };
        let elements = self.enumeration.elements.iter().filter(|e| e.annulus.0 <= n).count();
        Ok(LeafSolution {
            t,
            n_max: n,
            field,
            annulus_norms,
            partial_norms,
            fitted_ratio,
            tail_estimate,
            residual,
            elements,
        })
    }

    /// ‖u_t − w*(u_{ϕ(w)(t)})‖ / ‖u_t‖ on 𝔻_r, both sums truncated to E_N.
    pub fn equivariance_check(&self, t: f64, w: &DeckElement, n: u32) -> Result<f64> {
        self.check_truncation(n)?;
        let u = self.assemble(n, |e, j| self.coefficient(e, j, t));
        if w.word.is_empty() {
            return Ok(0.0);
        }
        let t2 = self.model.act(w, t);
        let winv = w.transform.inverse();
        let nb = self.spec.boxes.len();
        let mut pulled = vec![ZERO; self.grid.len()];
        for e in self.enumeration.elements.iter().filter(|e| e.annulus.0 <= n) {
            let g = winv.compose(&e.transform);
            for j in 0..nb {
                let c = self.coefficient(e, j, t2);
                if c == 0.0 {
                    continue;
                }
                let f = self.pushed_profile(&g, j);
                pulled.par_iter_mut().zip(f.par_iter()).for_each(|(a, x)| *a += x * c);
            }
        }
        let un = self.eval_norm(&u);
        let diff: Vec<Complex64> = u.iter().zip(&pulled).map(|(a, b)| a - b).collect();
        let dn = self.eval_norm(&diff);
        Ok(if un > 0.0 { dn / un } else { dn })
    }

    /// max over g of |c_g(ϕ(w)⁻¹t) − c_{wg}(t)|, over elements g with wg enumerated.
    pub fn well_definedness_defect(&self, t: f64, w: &DeckElement) -> f64 {
        let t2 = self.model.act_inverse(w, t);
        let mut worst = 0.0f64;
        for g in &self.enumeration.elements {
            let wg = w.transform.compose(&g.transform);
            let Some(i) = self.enumeration.position_of_point(wg.image_of_zero()) else { continue };
            let other = &self.enumeration.elements[i];
            for j in 0..self.spec.boxes.len() {
                let a = self.coefficient(g, j, t2) * self.bump_norms[j];
                let b = self.coefficient(other, j, t) * self.bump_norms[j];
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    fn lipschitz_exponent(&self) -> Result<u32> {
        let k = self.model.distortion_exponent();
        let s = self.spec.weight.s;
        if s <= 2 * (k + 1) {
            return Err(Error::Config(format!(
                "s = {s} must exceed 2(k+1) = {} for the {} action (k = {k})",
                2 * (k + 1),
                self.spec.action.name()
            )));
        }
        Ok(k)
    }

    pub fn transversal_lipschitz(&self, t1: f64, t2: f64) -> Result<LipschitzReport> {
        let k = self.lipschitz_exponent()?;
        let d = arc_distance(t1, t2);
        if d == 0.0 {
            return Err(Error::Domain("transversal Lipschitz ratio needs t1 != t2".into()));
        }
        let s = self.spec.weight.s as f64;
        let nb = self.spec.boxes.len();
        let mut per_annulus: Vec<AnnulusLipschitz> = (0..=self.spec.n_max)
            .map(|n| AnnulusLipschitz {
                n,
                elements: 0,
                envelope: 0.0,
                bound: 0.5f64.powf(n as f64 * (s - 2.0 * (k as f64 + 1.0)) / 2.0),
            })
            .collect();
        for (i, e) in self.enumeration.elements.iter().enumerate() {
            let diff = if nb == 1 {
                (self.coefficient(e, 0, t2) - self.coefficient(e, 0, t1)).abs() * self.field_norms[i]
            } else {
                let mut acc = vec![ZERO; self.grid.len()];
                for j in 0..nb {
                    let c = self.coefficient(e, j, t2) - self.coefficient(e, j, t1);
                    acc.iter_mut().zip(&self.fields[i * nb + j]).for_each(|(a, x)| *a += x * c);
                }
                self.eval_norm(&acc)
            };
            let slot = &mut per_annulus[e.annulus.0 as usize];
            slot.elements += 1;
            slot.envelope = slot.envelope.max(diff / d);
        }
        let fitted_constant = per_annulus.iter().map(|a| a.envelope / a.bound).fold(0.0, f64::max);
        let u1 = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t1));
        let u2 = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t2));
        let diff: Vec<Complex64> = u2.iter().zip(&u1).map(|(a, b)| a - b).collect();
        Ok(LipschitzReport { t1, t2, k, per_annulus, fitted_constant, total: self.eval_norm(&diff) / d })
    }

    /// Total Lipschitz ratio ‖u_{t₀+r} − u_{t₀}‖ / r for each r.
    pub fn lipschitz_sweep(&self, t0: f64, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.lipschitz_exponent()?;
        let u0 = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t0));
        radii
            .iter()
            .map(|&r| {
                let t = t0 + r;
                let u = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t));
                let diff: Vec<Complex64> = u.iter().zip(&u0).map(|(a, b)| a - b).collect();
                Ok((r, self.eval_norm(&diff) / arc_distance(t0, t)))
            })
            .collect()
    }

    /// ∂_t u_t: the deck sum with the differentiated coefficients.
    pub fn derivative_solve(&self, t: f64) -> Vec<Complex64> {
        self.assemble(self.spec.n_max, |e, j| self.coefficient_derivative(e, j, t))
    }

    pub fn transversal_derivative_fd(&self, t: f64, deltas: &[f64]) -> Result<DerivativeReport> {
        if deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Domain("finite-difference steps must be positive".into()));
        }
        let du = self.derivative_solve(t);
        let dn = self.eval_norm(&du);
        let defects: Vec<f64> = deltas
            .iter()
            .map(|&d| {
                let up = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t + d));
                let down = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t - d));
                let diff: Vec<Complex64> =
                    up.iter().zip(&down).zip(&du).map(|((a, b), c)| (a - b) / (2.0 * d) - c).collect();
                let e = self.eval_norm(&diff);
                if dn > 0.0 {
                    e / dn
                } else {
                    e
                }
            })
            .collect();
        let pts: Vec<(f64, f64)> =
            deltas.iter().zip(&defects).filter(|(_, e)| **e > 0.0).map(|(d, e)| (d.ln(), e.ln())).collect();
        Ok(DerivativeReport { t, deltas: deltas.to_vec(), defects, derivative_norm: dn, order: log_slope(&pts) })
    }

    /// Assembles the constants of the tail estimate at the transversal point t.
    pub fn measure_constants(&self, t: f64, tail_from: u32, samples: usize) -> Result<ConstantsReport> {
        self.check_truncation(tail_from)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let els = &self.enumeration.elements;
        let nb = self.spec.boxes.len();
        let mut c1_per_annulus = vec![0.0f64; self.spec.n_max as usize + 1];
        for _ in 0..samples {
            let e = &els[rng.gen_range(0..els.len())];
            let j = rng.gen_range(0..nb);
            let tt = rng.gen_range(0.0..TAU);
            let norm = self.coefficient(e, j, tt).abs() * self.bump_norms[j];
            let slot = &mut c1_per_annulus[e.annulus.0 as usize];
            *slot = slot.max(norm);
        }
        let c1 = c1_per_annulus.iter().cloned().fold(0.0, f64::max);
        let c2 = self.profiles.iter().map(|p| p.hormander_ratio()).fold(0.0, f64::max);
        let c3 = density_lower_constant(self.spec.eval_radius, samples.max(1000), self.spec.seed, self.spec.n_max)?;
        let counts = self.enumeration.normalized_counts();
        let c4 = counts.iter().enumerate().filter(|(n, _)| *n >= 3).map(|(_, c)| *c).fold(0.0, f64::max);
        let k = fit_distortion_exponent(&self.model, els, 4, self.spec.seed)?.k;
        let s = self.spec.weight.s as f64;
        let tail_coefficient = 4.0 * c1 * c2 * c4 * c3.powf(-s / 2.0);
        let q = 0.5f64.powf((s - 4.0) / 2.0);
        let predicted_tail = tail_coefficient * q.powi(tail_from as i32 + 1) / (1.0 - q);
        let full = self.assemble(self.spec.n_max, |e, j| self.coefficient(e, j, t));
        let head = self.assemble(tail_from, |e, j| self.coefficient(e, j, t));
        let tail: Vec<Complex64> = full.iter().zip(&head).map(|(a, b)| a - b).collect();
        Ok(ConstantsReport {
            c1,
            c1_per_annulus,
            c2,
            c3,
            c4,
            k,
            tail_coefficient,
            tail_from,
            predicted_tail,
            measured_tail: self.eval_norm(&tail),
            t,
        })
    }
}

/// Transversal points of the corpus: t_j = 0.3 + 0.6 j, j = 0..10.
pub fn corpus_points() -> Vec<f64> {
    (0..10).map(|j| 0.3 + 0.6 * j as f64).collect()
}

/// The 20 corpus instances: every corpus point under the rotation and the boundary action.
pub fn corpus() -> Vec<(TransversalAction, f64)> {
    [TransversalAction::default(), TransversalAction::Boundary]
        .into_iter()
        .flat_map(|a| corpus_points().into_iter().map(move |t| (a.clone(), t)))
        .collect()
}

/// Errors when the annulus contributions grow across three consecutive nonempty annuli.
fn check_convergence(norms: &[f64]) -> Result<()> {
    let nonzero: Vec<(usize, f64)> = norms.iter().cloned().enumerate().filter(|(_, a)| *a > 0.0).collect();
    for w in nonzero.windows(4) {
        if w[0].1 < w[1].1 && w[1].1 < w[2].1 && w[2].1 < w[3].1 {
            return Err(Error::Check(format!(
                "partial sums do not converge: contributions grow over annuli {}..{}",
                w[0].0, w[3].0
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::Word;

    fn spec(action: TransversalAction) -> ProblemSpec {
        ProblemSpec { action, h: 1.0 / 64.0, degree: 32, ..ProblemSpec::default() }
    }

    fn rotation() -> TransversalAction {
        TransversalAction::default()
    }

    fn solver(action: TransversalAction) -> DeckSumSolver {
        DeckSumSolver::new(spec(action)).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let mut s = spec(rotation());
        s.boxes[0].amplitude = 0.0;
        let d = DeckSumSolver::new(s).unwrap();
        let leaf = d.solve_leaf(0.7).unwrap();
        assert!(leaf.field.samples.iter().all(|x| *x == ZERO));
        assert!(leaf.annulus_norms.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn localized_piece_at_identity_is_the_bump() {
        let d = solver(rotation());
        let b = &d.spec.boxes[0];
        let v = d.localize_rhs(0.4, &DeckElement::identity(), 0).unwrap();
        let g = v.grid;
        for k in 0..g.len() {
            let z = g.point_at(k);
            assert_eq!(v.samples[k], b.profile(z) * b.transversal(0.4));
        }
    }

    #[test]
    fn localized_coefficients_follow_the_rotation() {
        let d = solver(rotation());
        let w = d.enumeration.elements.iter().find(|e| e.word.len() == 1).unwrap();
        let angle = d.model.word_angle(&w.word);
        let t = 1.1;
        let lhs = d.coefficient(w, 0, t);
        let rhs = d.spec.boxes[0].transversal(t - angle);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut s = spec(rotation());
        s.weight.m = 5;
        assert!(matches!(DeckSumSolver::new(s), Err(Error::Config(_))));
        let mut s = spec(rotation());
        s.boxes[0].radius = 0.95;
        assert!(matches!(DeckSumSolver::new(s), Err(Error::Config(_))));
    }

    #[test]
    fn residual_is_small_and_sums_converge() {
        let d = solver(rotation());
        let leaf = d.solve_leaf(0.3).unwrap();
        assert!(leaf.residual < 0.05, "{}", leaf.residual);
        assert!(leaf.fitted_ratio < 1.0, "{}", leaf.fitted_ratio);
        let last = *leaf.partial_norms.last().unwrap();
        assert!((leaf.partial_norms[leaf.partial_norms.len() - 2] - last).abs() < 1e-3 * last);
    }

    #[test]
    fn equivariance_defect_shrinks_with_truncation() {
        let d = solver(rotation());
        let a = d.enumeration.find(&Word::from_letters([0])).unwrap();
        assert_eq!(d.equivariance_check(0.5, &DeckElement::identity(), 8).unwrap(), 0.0);
        let coarse = d.equivariance_check(0.5, a, 4).unwrap();
        let fine = d.equivariance_check(0.5, a, 8).unwrap();
        assert!(fine < coarse, "{fine} vs {coarse}");
        assert!(fine < 1e-3, "{fine}");
        assert!(d.equivariance_check(0.5, a, 9).is_err());
    }

    #[test]
    fn coefficients_are_well_defined_on_the_quotient() {
        for action in [rotation(), TransversalAction::Boundary] {
            let d = solver(action);
            for e in d.enumeration.elements.iter().filter(|e| e.word.len() <= 2) {
                assert!(d.well_definedness_defect(0.9, e) < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_action_needs_larger_s_for_lipschitz() {
        let d = solver(TransversalAction::Boundary);
        assert!(matches!(d.transversal_lipschitz(0.1, 0.3), Err(Error::Config(_))));
        let r = solver(rotation()).transversal_lipschitz(0.1, 0.3).unwrap();
        assert_eq!(r.k, 0);
        assert!(r.total.is_finite() && r.fitted_constant > 0.0);
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let d = solver(rotation());
        let r = d.transversal_derivative_fd(0.8, &[0.1, 0.05, 0.025]).unwrap();
        assert!(r.order >= 1.5, "{}", r.order);
    }

    #[test]
    fn constants_are_positive() {
        let d = solver(rotation());
        let c = d.measure_constants(0.3, 4, 500).unwrap();
        assert!(c.c1 > 0.0 && c.c2 > 0.0 && c.c3 > 0.0 && c.c4 > 0.0);
        assert_eq!(c.k, 0);
        assert!(c.predicted_tail >= c.measured_tail, "{} < {}", c.predicted_tail, c.measured_tail);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let d = solver(rotation());
        let run = |n| {
            rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| d.solve_leaf(1.3).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.field.samples, b.field.samples);
        assert_eq!(a.annulus_norms, b.annulus_norms);
    }
}
