//! Stability of minimal solutions under perturbation of the weight and continuity along a weight family.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, FieldKind, GridField};
use crate::minimal::{minimal_solution_weighted, MinimalSolution};
use crate::weight::{PerturbedWeight, Weight, WeightFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub t1: f64,
    pub t2: f64,
    /// C¹ distance of the two weights.
    pub delta: f64,
    /// ‖u₁ − u₂‖ in the first weight.
    pub difference: f64,
    /// K^{1/2}‖v₁ − v₂‖ in the first weight, K the squared-norm Hörmander constant.
    pub data_term: f64,
    /// ‖v₂‖ in the second weight.
    pub second_norm: f64,
    /// (difference − data_term)⁺ / second_norm: the ε the comparison needs.
    pub epsilon: f64,
    pub curvature_lower_bound: f64,
}

fn solve(v: &GridField, w: &PerturbedWeight, degree: usize) -> Result<MinimalSolution> {
    minimal_solution_weighted(v, w, degree, false)
}

fn norm_in<W: Weight>(f: &GridField, w: &W) -> f64 {
    let g = f.grid;
    f.weighted_norm_sq(|z| w.density(z), |z| g.inside(z)).sqrt()
}

/// Compares the minimal solutions of ∂̄u_i = v_i for the family members at t₁ and t₂.
pub fn metric_perturbation(
    v1: &GridField,
    v2: &GridField,
    family: &WeightFamily,
    t1: f64,
    t2: f64,
    degree: usize,
) -> Result<PerturbationReport> {
    if v1.grid != v2.grid {
        return Err(Error::Domain("the two forms live on different grids".into()));
    }
    let cond = family.check_curvature(&[t1, t2])?;
    let (w1, w2) = (family.at(t1), family.at(t2));
    let u1 = solve(v1, &w1, degree)?;
    let u2 = if v1 == v2 && t1 == t2 { u1.clone() } else { solve(v2, &w2, degree)? };
    let difference = norm_in(&u1.field.sub(&u2.field)?, &w1);
    let k = 4.0 / (cond.curvature_lower_bound - 4.0 * family.base.s as f64);
    let data_term = k.sqrt() * norm_in(&v1.sub(v2)?, &w1);
    let second_norm = norm_in(v2, &w2);
    let epsilon = if second_norm > 0.0 { (difference - data_term).max(0.0) / second_norm } else { 0.0 };
    Ok(PerturbationReport {
        t1,
        t2,
        delta: family.c1_distance(t1, t2),
        difference,
        data_term,
        second_norm,
        epsilon,
        curvature_lower_bound: cond.curvature_lower_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSweep {
    pub reports: Vec<PerturbationReport>,
    /// Least-squares slope of log difference against log δ.
    pub exponent: f64,
}

/// Fixed data, weights w_{π/2} (the unperturbed base) against w_t with δ|cos t| = `amplitudes`.
pub fn perturbation_sweep(v: &GridField, family: &WeightFamily, amplitudes: &[f64], degree: usize) -> Result<PerturbationSweep> {
    let mut reports = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        if !(a > 0.0 && a <= family.delta.abs()) {
            return Err(Error::Config(format!("amplitude {a} outside (0, δ = {}]", family.delta)));
        }
        let t = (a / family.delta.abs()).acos();
        reports.push(metric_perturbation(v, v, family, FRAC_PI_2, t, degree)?);
    }
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.difference > 0.0 && r.delta > 0.0)
        .map(|r| (r.delta.ln(), r.difference.ln()))
        .collect();
    Ok(PerturbationSweep { exponent: log_slope(&pts), reports })
}

pub(crate) fn log_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub t0: f64,
    /// (t, ‖u_t − u_{t₀}‖ in the t₀ weight).
    pub distances: Vec<(f64, f64)>,
    /// (r, sup over the sampled |t − t₀| ≤ r of the distance), r increasing.
    pub modulus: Vec<(f64, f64)>,
    /// max distance / |t − t₀|.
    pub lipschitz: f64,
    pub curvature_lower_bound: f64,
}

impl ContinuityReport {
    /// True when the modulus is non-decreasing in r.
    pub fn modulus_monotone(&self) -> bool {
        self.modulus.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// ‖u_t − u_{t₀}‖ for the minimal solutions of ∂̄u_t = v_t in the weights w_t, over a t-sweep.
pub fn family_continuity<F>(
    vf: F,
    grid: DiskGrid,
    family: &WeightFamily,
    t0: f64,
    sweep: &[f64],
    degree: usize,
) -> Result<ContinuityReport>
where
    F: Fn(f64, Complex64) -> Complex64 + Sync,
{
    let mut ts = sweep.to_vec();
    ts.push(t0);
    let cond = family.check_curvature(&ts)?;
    let form = |t: f64| GridField::from_fn(grid, FieldKind::Form, |z| vf(t, z));
    let w0 = family.at(t0);
    let u0 = solve(&form(t0), &w0, degree)?;
    let distances = sweep
        .par_iter()
        .map(|&t| {
            let u = solve(&form(t), &family.at(t), degree)?;
            Ok((t, norm_in(&u.field.sub(&u0.field)?, &w0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_radius: Vec<(f64, f64)> = distances.iter().map(|&(t, d)| ((t - t0).abs(), d)).collect();
    by_radius.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut modulus = Vec::with_capacity(by_radius.len());
    let mut running = 0.0f64;
    for (r, d) in by_radius {
        running = running.max(d);
        modulus.push((r, running));
    }
    let lipschitz = distances
        .iter()
        .filter(|(t, _)| *t != t0)
        .map(|&(t, d)| d / (t - t0).abs())
        .fold(0.0, f64::max);
    Ok(ContinuityReport { t0, distances, modulus, lipschitz, curvature_lower_bound: cond.curvature_lower_bound })
}
