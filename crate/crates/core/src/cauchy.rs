//! Discrete Cauchy transforms: u(z) = (1/π) ∬ v(ζ)/(z − ζ) dV(ζ).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, FieldKind, GridField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// FFT convolution with the midpoint-rule Cauchy kernel h²/(π d) on a fixed grid.
///
/// The singular cell d = 0 gets weight zero.
pub struct CauchyPlan {
    grid: DiskGrid,
    n: usize,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CauchyPlan {
    pub fn new(grid: DiskGrid) -> Self {
        let side = grid.side();
        let n = 2 * side;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let c = grid.h / PI;
        let mut kernel = vec![ZERO; n * n];
        for q in 0..n {
            let dj = if q < side { q as f64 } else if q > side { q as f64 - n as f64 } else { continue };
            for p in 0..n {
                let di = if p < side { p as f64 } else if p > side { p as f64 - n as f64 } else { continue };
                if p == 0 && q == 0 {
                    continue;
                }
                // h²/(π h (di + i dj))
                kernel[q * n + p] = c / Complex64::new(di, dj);
            }
        }
        let mut plan = Self { grid, n, kernel_hat: kernel, fwd, inv };
        let mut k = std::mem::take(&mut plan.kernel_hat);
        plan.fft2(&mut k, false);
        plan.kernel_hat = k;
        plan
    }

    pub fn grid(&self) -> DiskGrid {
        self.grid
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let f = if inverse { &self.inv } else { &self.fwd };
        data.par_chunks_mut(n).for_each(|row| f.process(row));
        let mut t = transpose(data, n);
        t.par_chunks_mut(n).for_each(|row| f.process(row));
        let back = transpose(&t, n);
        data.copy_from_slice(&back);
    }

    /// (1/π) Σ_ζ v(ζ) h² / (z − ζ) at every cell center z of the grid.
    pub fn apply(&self, v: &GridField) -> Result<GridField> {
        if v.grid != self.grid {
            return Err(Error::Domain("field grid does not match the Cauchy plan".into()));
        }
        let side = self.grid.side();
        let n = self.n;
        let mut buf = vec![ZERO; n * n];
        for j in 0..side {
            buf[j * n..j * n + side].copy_from_slice(&v.samples[j * side..(j + 1) * side]);
        }
        self.fft2(&mut buf, false);
        buf.par_iter_mut().zip(self.kernel_hat.par_iter()).for_each(|(b, k)| *b *= k);
        self.fft2(&mut buf, true);
        let scale = 1.0 / (n * n) as f64;
        let out = GridField::from_fn(self.grid, FieldKind::Section, |z| {
            let (i, j) = cell_of(&self.grid, z);
            buf[j * n + i] * scale
        });
        Ok(out)
    }
}

fn cell_of(g: &DiskGrid, z: Complex64) -> (usize, usize) {
    let i = (z.re / g.h + g.half as f64 - 0.5).round() as usize;
    let j = (z.im / g.h + g.half as f64 - 0.5).round() as usize;
    (i, j)
}

fn transpose(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, o) in row.iter_mut().enumerate() {
            *o = a[j * n + i];
        }
    });
    out
}

/// Checks that v vanishes within two cells of the grid edge.
pub fn ensure_interior_support(v: &GridField) -> Result<()> {
    let g = v.grid;
    let margin = 2.0 * g.h;
    for (k, s) in v.samples.iter().enumerate() {
        if *s == ZERO {
            continue;
        }
        let z = g.point_at(k);
        let near_edge = match g.clip {
            Some(r) => z.norm() > r - margin,
            None => z.re.abs().max(z.im.abs()) > g.half_width() - margin,
        };
        if near_edge {
            return Err(Error::Domain(format!("form support touches the grid boundary at {z}")));
        }
    }
    Ok(())
}

/// The Cauchy transform u₀ of a compactly supported form coefficient, on the form's own grid.
pub fn cauchy_transform(v: &GridField) -> Result<GridField> {
    if v.kind != FieldKind::Form {
        return Err(Error::Domain("the Cauchy transform takes a (0,1)-form coefficient".into()));
    }
    ensure_interior_support(v)?;
    CauchyPlan::new(v.grid).apply(v)
}

/// Moments μ_k = ∬ v ζ^k dV for k < count.
pub fn moments(v: &GridField, count: usize) -> Vec<Complex64> {
    let g = v.grid;
    let side = g.side();
    let rows: Vec<Vec<Complex64>> = v
        .samples
        .par_chunks(side)
        .enumerate()
        .map(|(j, row)| {
            let mut acc = vec![ZERO; count];
            for (i, s) in row.iter().enumerate() {
                if *s == ZERO {
                    continue;
                }
                let z = g.point(i, j);
                let mut p = *s;
                for a in acc.iter_mut() {
                    *a += p;
                    p *= z;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![ZERO; count];
    for r in rows {
        for (o, x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    out.iter().map(|m| m * g.cell_area()).collect()
}

/// Far-field expansion (1/π) Σ_k μ_k z^{−(k+1)}, valid outside the support disk.
pub fn laurent_eval(moments: &[Complex64], z: Complex64) -> Complex64 {
    let w = 1.0 / z;
    let mut acc = ZERO;
    for m in moments.iter().rev() {
        acc = (acc + m) * w;
    }
    acc / PI
}

/// u(z) = z^{−k} (1/π) ∬ v(ζ) ζ^k / (z − ζ) dV(ζ), summed directly; the cell containing z is skipped.
pub fn weighted_cauchy_plane(v: &GridField, k: u32, z: Complex64) -> Result<Complex64> {
    if k > 0 && z == ZERO {
        return Err(Error::Domain("the weighted Cauchy formula is singular at 0 for k > 0".into()));
    }
    let g = v.grid;
    let side = g.side();
    let rows: Vec<Complex64> = v
        .samples
        .par_chunks(side)
        .enumerate()
        .map(|(j, row)| {
            let mut acc = ZERO;
            for (i, s) in row.iter().enumerate() {
                if *s == ZERO {
                    continue;
                }
                let zeta = g.point(i, j);
                let d = z - zeta;
                if d.re.abs() < 0.5 * g.h && d.im.abs() < 0.5 * g.h {
                    continue;
                }
                acc += s * zeta.powu(k) / d;
            }
            acc
        })
        .collect();
    let sum: Complex64 = rows.iter().sum();
    Ok(sum * g.cell_area() / (PI * z.powu(k)))
}

/// The weighted formula at every cell center, by one FFT transform of v ζ^k; cells at 0 get 0 when k > 0.
pub fn weighted_cauchy_plane_grid(v: &GridField, k: u32) -> Result<GridField> {
    let vk = v.map(|z, s| s * z.powu(k));
    let mut vk = vk;
    vk.kind = FieldKind::Form;
    let u = CauchyPlan::new(v.grid).apply(&vk)?;
    Ok(u.map(|z, s| if k > 0 && z.norm() < 0.5 * v.grid.h { ZERO } else { s / z.powu(k) }))
}
