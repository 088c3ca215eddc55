//! Cell-centered Cartesian grids on the disk and complex fields sampled on them.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A square grid of `2·half` cells per side centered at 0, optionally clipped to a disk.
///
/// Cell (i, j) has center ((i − half + ½)h, (j − half + ½)h).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskGrid {
    pub h: f64,
    pub half: usize,
    /// Cells whose center lies at or beyond this radius are outside the grid; `None` keeps the whole square.
    pub clip: Option<f64>,
}

impl DiskGrid {
    /// The disk grid of radius ρ_max = 1 − 2^{−(n_grid+1)} and spacing h.
    pub fn new(n_grid: u32, h: f64) -> Result<Self> {
        Self::clipped(1.0 - 0.5f64.powi(n_grid as i32 + 1), h)
    }

    pub fn clipped(radius: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h < radius) || !(radius > 0.0) {
            return Err(Error::Config(format!("grid spacing {h} must lie in (0, {radius})")));
        }
        Ok(Self { h, half: (radius / h).ceil() as usize, clip: Some(radius) })
    }

    /// An unclipped square patch covering [−half_width, half_width]².
    pub fn patch(half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && half_width > 0.0) {
            return Err(Error::Config(format!("patch width {half_width} and spacing {h} must be positive")));
        }
        Ok(Self { h, half: (half_width / h).ceil() as usize, clip: None })
    }

    pub fn side(&self) -> usize {
        2 * self.half
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        self.half == 0
    }

    pub fn half_width(&self) -> f64 {
        self.half as f64 * self.h
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.coord(i), self.coord(j))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    #[inline]
    pub fn point_at(&self, idx: usize) -> Complex64 {
        let s = self.side();
        self.point(idx % s, idx / s)
    }

    #[inline]
    pub fn inside(&self, z: Complex64) -> bool {
        match self.clip {
            Some(r) => z.norm() < r,
            None => z.re.abs() < self.half_width() && z.im.abs() < self.half_width(),
        }
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Fractional cell coordinates of a point.
    #[inline]
    fn continuous_index(&self, z: Complex64) -> (f64, f64) {
        (z.re / self.h + self.half as f64 - 0.5, z.im / self.h + self.half as f64 - 0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Section,
    /// The dζ̄ coefficient of a (0,1)-form.
    Form,
}

impl FieldKind {
    fn tag(self) -> &'static str {
        match self {
            Self::Section => "section",
            Self::Form => "form",
        }
    }
}

/// A closed disk containing every nonzero sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub center: Complex64,
    pub radius: f64,
}

impl Support {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: DiskGrid,
    pub kind: FieldKind,
    pub support: Option<Support>,
    /// Row-major samples; zero outside the grid.
    pub samples: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl GridField {
    pub fn zeros(grid: DiskGrid, kind: FieldKind) -> Self {
        Self { grid, kind, support: None, samples: vec![ZERO; grid.len()] }
    }

    /// Samples `f` at the cell centers inside the grid.
    pub fn from_fn<F>(grid: DiskGrid, kind: FieldKind, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let side = grid.side();
        let mut samples = vec![ZERO; grid.len()];
        samples.par_chunks_mut(side).enumerate().for_each(|(j, row)| {
            for (i, s) in row.iter_mut().enumerate() {
                let z = grid.point(i, j);
                if grid.inside(z) {
                    *s = f(z);
                }
            }
        });
        Self { grid, kind, support: None, samples }
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = Some(support);
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.samples[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Smallest disk around 0 containing all samples above `tol` in modulus.
    pub fn measured_support(&self, tol: f64) -> Option<Support> {
        let r = self
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.norm() > tol)
            .map(|(k, _)| self.grid.point_at(k).norm() + std::f64::consts::FRAC_1_SQRT_2 * self.grid.h)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))?;
        Some(Support { center: ZERO, radius: r })
    }

    /// Checks the declared support against the samples.
    pub fn check_support(&self) -> Result<()> {
        let Some(sup) = self.support else { return Ok(()) };
        let slack = std::f64::consts::FRAC_1_SQRT_2 * self.grid.h;
        for (k, s) in self.samples.iter().enumerate() {
            let z = self.grid.point_at(k);
            if *s != ZERO && (z - sup.center).norm() > sup.radius + slack {
                return Err(Error::Check(format!("nonzero sample at {z} outside declared support")));
            }
        }
        Ok(())
    }

    pub fn map<F: Fn(Complex64, Complex64) -> Complex64 + Sync>(&self, f: F) -> Self {
        let grid = self.grid;
        let samples = self
            .samples
            .par_iter()
            .enumerate()
            .map(|(k, &s)| {
                let z = grid.point_at(k);
                if grid.inside(z) {
                    f(z, s)
                } else {
                    ZERO
                }
            })
            .collect();
        Self { grid, kind: self.kind, support: self.support, samples }
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Domain("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, kind: self.kind, support: None, samples })
    }

    pub fn add_scaled(&mut self, other: &Self, c: Complex64) -> Result<()> {
        self.same_grid(other)?;
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += c * b;
        }
        self.support = None;
        Ok(())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            kind: self.kind,
            support: self.support,
            samples: self.samples.iter().map(|s| s * c).collect(),
        }
    }

    /// ∬ |f|² w dV over cells whose center satisfies `region`, by the midpoint rule.
    ///
    /// Rows are summed in order so the result does not depend on the thread count.
    pub fn weighted_norm_sq<W, R>(&self, weight: W, region: R) -> f64
    where
        W: Fn(Complex64) -> f64 + Sync,
        R: Fn(Complex64) -> bool + Sync,
    {
        let side = self.grid.side();
        let rows: Vec<f64> = self
            .samples
            .par_chunks(side)
            .enumerate()
            .map(|(j, row)| {
                let mut acc = 0.0;
                for (i, s) in row.iter().enumerate() {
                    let z = self.grid.point(i, j);
                    if self.grid.inside(z) && region(z) {
                        acc += s.norm_sqr() * weight(z);
                    }
                }
                acc
            })
            .collect();
        rows.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// ∬ f ḡ w dV by the midpoint rule.
    pub fn weighted_inner<W>(&self, other: &Self, weight: W) -> Result<Complex64>
    where
        W: Fn(Complex64) -> f64 + Sync,
    {
        self.same_grid(other)?;
        let side = self.grid.side();
        let rows: Vec<Complex64> = self
            .samples
            .par_chunks(side)
            .zip(other.samples.par_chunks(side))
            .enumerate()
            .map(|(j, (ra, rb))| {
                let mut acc = ZERO;
                for i in 0..side {
                    let z = self.grid.point(i, j);
                    if self.grid.inside(z) {
                        acc += ra[i] * rb[i].conj() * weight(z);
                    }
                }
                acc
            })
            .collect();
        Ok(rows.iter().sum::<Complex64>() * self.grid.cell_area())
    }

    /// Centered-difference ∂̄ = ½(∂ₓ + i∂ᵧ); cells without four in-grid neighbours get 0.
    pub fn dbar(&self) -> Self {
        let g = self.grid;
        let side = g.side();
        let inv = 0.5 / (2.0 * g.h);
        let mut samples = vec![ZERO; g.len()];
        samples.par_chunks_mut(side).enumerate().for_each(|(j, row)| {
            if j == 0 || j + 1 == side {
                return;
            }
            for i in 1..side - 1 {
                let nb = [g.point(i - 1, j), g.point(i + 1, j), g.point(i, j - 1), g.point(i, j + 1)];
                if !nb.iter().all(|&z| g.inside(z)) {
                    continue;
                }
                let dx = self.get(i + 1, j) - self.get(i - 1, j);
                let dy = self.get(i, j + 1) - self.get(i, j - 1);
                row[i] = (dx + Complex64::i() * dy) * inv;
            }
        });
        Self { grid: g, kind: FieldKind::Form, support: None, samples }
    }

    /// True when all four centered-difference neighbours of the cell containing z are in the grid.
    pub fn has_dbar_stencil(&self, z: Complex64) -> bool {
        let h = self.grid.h;
        [h, -h].iter().all(|&d| {
            self.grid.inside(z + Complex64::new(d, 0.0)) && self.grid.inside(z + Complex64::new(0.0, d))
        })
    }

    /// Bicubic (Catmull–Rom) interpolation with edge-clamped stencils; `None` off the square of cell centers.
    pub fn sample(&self, z: Complex64) -> Option<Complex64> {
        let (x, y) = self.grid.continuous_index(z);
        let last = (self.grid.side() - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= last && y <= last) {
            return None;
        }
        let (fx, fy) = (x.floor(), y.floor());
        let (i0, j0) = (fx as i64 - 1, fy as i64 - 1);
        let clamp = |k: i64| k.clamp(0, last as i64) as usize;
        let wx = catmull_rom(x - fx);
        let wy = catmull_rom(y - fy);
        let mut acc = ZERO;
        for (b, wyb) in wy.iter().enumerate() {
            let mut row = ZERO;
            for (a, wxa) in wx.iter().enumerate() {
                row += self.get(clamp(i0 + a as i64), clamp(j0 + b as i64)) * wxa;
            }
            acc += row * wyb;
        }
        Some(acc)
    }

    /// Text serialization: a header block followed by one `re im` line per sample, row-major.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Check(format!("write failed: {e}"));
        writeln!(w, "# gridfield v1").map_err(io)?;
        writeln!(w, "kind {}", self.kind.tag()).map_err(io)?;
        writeln!(w, "h {:e}", self.grid.h).map_err(io)?;
        writeln!(w, "half {}", self.grid.half).map_err(io)?;
        match self.grid.clip {
            Some(r) => writeln!(w, "rho_max {r:e}").map_err(io)?,
            None => writeln!(w, "rho_max none").map_err(io)?,
        }
        match self.support {
            Some(s) => writeln!(w, "support {:e} {:e} {:e}", s.center.re, s.center.im, s.radius).map_err(io)?,
            None => writeln!(w, "support none").map_err(io)?,
        }
        writeln!(w, "data").map_err(io)?;
        for s in &self.samples {
            writeln!(w, "{:e} {:e}", s.re, s.im).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_table<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::Domain(format!("malformed gridfield table: {m}"));
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end"))?
                .map_err(|e| Error::Domain(format!("read failed: {e}")))
        };
        if next()? != "# gridfield v1" {
            return Err(bad("missing header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let l = next()?;
            l.strip_prefix(name)
                .and_then(|v| v.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| bad(&format!("expected {name}")))
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        let kind = match field("kind")?.as_str() {
            "section" => FieldKind::Section,
            "form" => FieldKind::Form,
            other => return Err(bad(other)),
        };
        let h = num(&field("h")?)?;
        let half = field("half")?.parse::<usize>().map_err(|_| bad("half"))?;
        let clip = match field("rho_max")?.as_str() {
            "none" => None,
            v => Some(num(v)?),
        };
        let support = match field("support")?.as_str() {
            "none" => None,
            v => {
                let p: Vec<f64> = v.split_whitespace().map(num).collect::<Result<_>>()?;
                if p.len() != 3 {
                    return Err(bad("support"));
                }
                Some(Support { center: Complex64::new(p[0], p[1]), radius: p[2] })
            }
        };
        if next()? != "data" {
            return Err(bad("missing data marker"));
        }
        let grid = DiskGrid { h, half, clip };
        let mut samples = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let l = next()?;
            let mut it = l.split_whitespace();
            let re = num(it.next().ok_or_else(|| bad("sample"))?)?;
            let im = num(it.next().ok_or_else(|| bad("sample"))?)?;
            samples.push(Complex64::new(re, im));
        }
        Ok(Self { grid, kind, support, samples })
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cell_geometry() {
        let g = DiskGrid::new(6, 1.0 / 256.0).unwrap();
        assert_eq!(g.clip, Some(1.0 - 1.0 / 128.0));
        assert_eq!(g.side(), 508);
        assert_relative_eq!(g.coord(g.half), 0.5 / 256.0);
        assert!(DiskGrid::new(6, 0.0).is_err());
    }

    #[test]
    fn area_of_disk() {
        let g = DiskGrid::clipped(0.9, 1.0 / 256.0).unwrap();
        let one = GridField::from_fn(g, FieldKind::Section, |_| Complex64::new(1.0, 0.0));
        let a = one.weighted_norm_sq(|_| 1.0, |_| true);
        assert_relative_eq!(a, std::f64::consts::PI * 0.81, max_relative = 1e-3);
    }

    #[test]
    fn dbar_kills_holomorphic_and_differentiates_conjugate() {
        let g = DiskGrid::clipped(0.9, 1.0 / 128.0).unwrap();
        let hol = GridField::from_fn(g, FieldKind::Section, |z| z * z * z + z.exp());
        let d = hol.dbar();
        assert!(d.samples.iter().all(|s| s.norm() < 1e-3));
        let f = GridField::from_fn(g, FieldKind::Section, |z| z.conj() * z);
        let d = f.dbar();
        let k = g.index(g.half + 10, g.half - 7);
        assert_relative_eq!(d.samples[k].re, g.point_at(k).re, epsilon = 1e-12);
        assert_relative_eq!(d.samples[k].im, g.point_at(k).im, epsilon = 1e-12);
    }

    #[test]
    fn bicubic_reproduces_quadratics() {
        let g = DiskGrid::patch(0.5, 0.01).unwrap();
        let f = |z: Complex64| Complex64::new(z.re * z.re * z.im * z.im + 0.5, z.re * z.im - z.im * z.im);
        let field = GridField::from_fn(g, FieldKind::Section, f);
        for z in [Complex64::new(0.123, -0.071), Complex64::new(-0.3, 0.2999)] {
            let s = field.sample(z).unwrap();
            assert!((s - f(z)).norm() < 1e-12, "{s} vs {}", f(z));
        }
        assert!(field.sample(Complex64::new(0.499, 0.0)).is_none());
        assert!(field.sample(Complex64::new(0.494, 0.0)).is_some());
    }

    #[test]
    fn table_round_trip() {
        let g = DiskGrid::clipped(0.5, 0.05).unwrap();
        let f = GridField::from_fn(g, FieldKind::Form, |z| z * Complex64::new(0.1, -3.0) / 7.0)
            .with_support(Support { center: ZERO, radius: 0.5 });
        let mut buf = Vec::new();
        f.write_table(&mut buf).unwrap();
        let back = GridField::read_table(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert!(GridField::read_table(&b"# gridfield v1\nkind nope\n"[..]).is_err());
    }
}
