//! The genus-2 surface group of the regular octagon and its deck-orbit enumeration.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disk::{annulus_of_radius, poincare_distance, AnnulusIndex, MobiusTransform};
use crate::error::{Error, Result};

/// Side-pairing letters: `a b c d` are g_0..g_3, `A B C D` their inverses.
pub const LETTERS: [char; 8] = ['a', 'b', 'c', 'd', 'A', 'B', 'C', 'D'];

#[inline]
pub fn inverse_letter(l: u8) -> u8 {
    (l + 4) % 8
}

/// A freely reduced word in the side-pairing letters, read left to right as composition.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a word and cancels adjacent inverse pairs.
    pub fn from_letters(letters: impl IntoIterator<Item = u8>) -> Self {
        let mut out: Vec<u8> = Vec::new();
        for l in letters {
            assert!(l < 8, "letter index {l} out of range");
            if out.last() == Some(&inverse_letter(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self(out)
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().rev().map(|&l| inverse_letter(l)).collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        Self::from_letters(self.0.iter().chain(other.0.iter()).copied())
    }

    /// Strips matching first/last letter pairs so the word is reduced as a cyclic word.
    pub fn cyclically_reduced(&self) -> Self {
        let mut v: &[u8] = &self.0;
        while v.len() >= 2 && v[0] == inverse_letter(v[v.len() - 1]) {
            v = &v[1..v.len() - 1];
        }
        Self(v.to_vec())
    }

    pub fn commutator(x: &Word, y: &Word) -> Self {
        x.concat(y).concat(&x.inverse()).concat(&y.inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for &l in &self.0 {
            write!(f, "{}", LETTERS[l as usize])?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "1" {
            return Ok(Self::empty());
        }
        let letters = s
            .chars()
            .map(|c| {
                LETTERS
                    .iter()
                    .position(|&x| x == c)
                    .map(|p| p as u8)
                    .ok_or_else(|| Error::Domain(format!("unknown generator letter {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_letters(letters))
    }
}

/// cosh of the inradius (center to side midpoint) of the regular octagon with angles π/4.
pub fn octagon_inradius_cosh() -> f64 {
    1.0 + SQRT_2
}

/// cosh of the circumradius (center to vertex).
pub fn octagon_circumradius_cosh() -> f64 {
    3.0 + 2.0 * SQRT_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGroup {
    /// g_k: translation by twice the inradius along the ray at angle kπ/4.
    pub side_pairings: [MobiusTransform; 4],
    /// Canonical generators (a₁, b₁, a₂, b₂) as side-pairing words.
    pub canonical_words: [Word; 4],
    /// The side-pairing relator, a cyclic conjugate of [a₁,b₁][a₂,b₂].
    pub relator: Word,
}

/// Geometry constants of the octagon, distances in the curvature −1 metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OctagonGeometry {
    pub inradius: f64,
    pub circumradius: f64,
    pub vertex_angle: f64,
    pub translation_length: f64,
    /// Orbit separation of Γ·0 in the Poincaré distance d_P (half the curvature −1 distance).
    pub orbit_separation: f64,
}

pub fn octagon_generators() -> SurfaceGroup {
    let rho = octagon_inradius_cosh().acosh();
    let side_pairings = std::array::from_fn(|k| {
        let p = Complex64::from_polar(rho.tanh(), k as f64 * FRAC_PI_4);
        MobiusTransform::translation_to(p).expect("tanh ρ < 1")
    });
    let w = |s: &str| s.parse::<Word>().expect("static word");
    SurfaceGroup {
        side_pairings,
        canonical_words: [w("a"), w("B"), w("Cd"), w("aBc")],
        relator: w("aBcDAbCd"),
    }
}

impl SurfaceGroup {
    pub fn letter(&self, l: u8) -> MobiusTransform {
        let g = self.side_pairings[(l % 4) as usize];
        if l < 4 {
            g
        } else {
            g.inverse()
        }
    }

    pub fn evaluate(&self, word: &Word) -> MobiusTransform {
        word.letters()
            .iter()
            .fold(MobiusTransform::identity(), |acc, &l| acc.compose(&self.letter(l)))
    }

    pub fn canonical_generators(&self) -> [MobiusTransform; 4] {
        std::array::from_fn(|i| self.evaluate(&self.canonical_words[i]))
    }

    /// [a₁,b₁][a₂,b₂] in side-pairing letters.
    pub fn canonical_relation(&self) -> Word {
        let [a1, b1, a2, b2] = &self.canonical_words;
        Word::commutator(a1, b1).concat(&Word::commutator(a2, b2))
    }

    /// Parameter distance of the relation word (and of the relator) from the identity.
    pub fn relation_residual(&self) -> f64 {
        let id = MobiusTransform::identity();
        let canonical = self.canonical_generators();
        let [a1, b1, a2, b2] = canonical;
        let comm = |x: MobiusTransform, y: MobiusTransform| {
            x.compose(&y).compose(&x.inverse()).compose(&y.inverse())
        };
        let r1 = comm(a1, b1).compose(&comm(a2, b2)).distance(&id);
        let r2 = self.evaluate(&self.relator).distance(&id);
        r1.max(r2)
    }

    pub fn geometry(&self) -> OctagonGeometry {
        let inradius = octagon_inradius_cosh().acosh();
        OctagonGeometry {
            inradius,
            circumradius: octagon_circumradius_cosh().acosh(),
            vertex_angle: FRAC_PI_4,
            translation_length: self.side_pairings[0].translation_length(),
            orbit_separation: poincare_distance(
                Complex64::new(0.0, 0.0),
                self.side_pairings[0].image_of_zero(),
            )
            .expect("orbit point in disk"),
        }
    }

    /// Octagon vertices, at angles (2j+1)π/8.
    pub fn vertices(&self) -> [Complex64; 8] {
        let r = (0.5 * octagon_circumradius_cosh().acosh()).tanh();
        std::array::from_fn(|j| Complex64::from_polar(r, (2 * j + 1) as f64 * FRAC_PI_8))
    }
}

/// A deck transformation with its shortlex word and the annulus of its orbit point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeckElement {
    pub word: Word,
    pub transform: MobiusTransform,
    pub annulus: AnnulusIndex,
}

impl DeckElement {
    pub fn identity() -> Self {
        Self { word: Word::empty(), transform: MobiusTransform::identity(), annulus: AnnulusIndex(0) }
    }

    pub fn orbit_point(&self) -> Complex64 {
        self.transform.image_of_zero()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeckEnumeration {
    pub max_word_len: usize,
    pub n_cap: AnnulusIndex,
    pub elements: Vec<DeckElement>,
    pub merged_duplicates: usize,
    pub pruned: usize,
}

/// Orbit points closer than this are the same group element.
pub const COINCIDENCE_RADIUS: f64 = 1e-9;

impl DeckEnumeration {
    /// #E_n for n = 0..=n_cap.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_cap.0 as usize + 1];
        for e in &self.elements {
            c[e.annulus.0 as usize] += 1;
        }
        c
    }

    /// #E_n / 2^n for n = 0..=n_cap.
    pub fn normalized_counts(&self) -> Vec<f64> {
        self.counts()
            .iter()
            .enumerate()
            .map(|(n, &c)| c as f64 / 2f64.powi(n as i32))
            .collect()
    }

    pub fn in_annulus(&self, n: u32) -> impl Iterator<Item = &DeckElement> {
        self.elements.iter().filter(move |e| e.annulus.0 == n)
    }

    pub fn find(&self, word: &Word) -> Option<&DeckElement> {
        self.elements.iter().find(|e| &e.word == word)
    }

    /// Index of the element whose orbit point coincides with `p`.
    pub fn position_of_point(&self, p: Complex64) -> Option<usize> {
        self.elements.iter().position(|e| (e.orbit_point() - p).norm() < COINCIDENCE_RADIUS)
    }
}

fn cell_key(p: Complex64) -> (i64, i64) {
    ((p.re / COINCIDENCE_RADIUS).floor() as i64, (p.im / COINCIDENCE_RADIUS).floor() as i64)
}

/// Breadth-first enumeration of reduced words up to `max_word_len`, deduplicated by orbit point.
///
/// Branches whose orbit point is farther than the outer radius of A_{n_cap} plus one octagon
/// diameter are pruned: a geodesic from 0 to an orbit point crosses a chain of adjacent tiles whose
/// centers stay within that margin.
pub fn enumerate_deck(group: &SurfaceGroup, max_word_len: usize, n_cap: AnnulusIndex) -> DeckEnumeration {
    let d_cap = 2.0 * n_cap.outer_radius().atanh();
    let prune = d_cap + 2.0 * octagon_circumradius_cosh().acosh();
    let mut seen: HashMap<(i64, i64), usize> = HashMap::new();
    let mut points: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    seen.insert(cell_key(points[0]), 0);
    let mut all = vec![DeckElement::identity()];
    let mut frontier: Vec<usize> = vec![0];
    let mut merged = 0;
    let mut pruned = 0;
    let letters: Vec<MobiusTransform> = (0..8).map(|l| group.letter(l)).collect();
    for _ in 0..max_word_len {
        let mut next = Vec::new();
        for &i in &frontier {
            let parent = all[i].clone();
            let last = parent.word.letters().last().copied();
            for l in 0u8..8 {
                if last == Some(inverse_letter(l)) {
                    continue;
                }
                let t = parent.transform.compose(&letters[l as usize]);
                let p = t.image_of_zero();
                if 2.0 * p.norm().atanh() > prune {
                    pruned += 1;
                    continue;
                }
                let (kx, ky) = cell_key(p);
                let dup = (-1..=1).any(|dx| {
                    (-1..=1).any(|dy| {
                        seen.get(&(kx + dx, ky + dy))
                            .is_some_and(|&j| (points[j] - p).norm() < COINCIDENCE_RADIUS)
                    })
                });
                if dup {
                    merged += 1;
                    continue;
                }
                let idx = all.len();
                seen.insert((kx, ky), idx);
                points.push(p);
                let mut letters_w = parent.word.letters().to_vec();
                letters_w.push(l);
                all.push(DeckElement {
                    word: Word(letters_w),
                    transform: t,
                    annulus: annulus_of_radius(p.norm()),
                });
                next.push(idx);
            }
        }
        frontier = next;
    }
    let elements = all.into_iter().filter(|e| e.annulus <= n_cap).collect();
    DeckEnumeration { max_word_len, n_cap, elements, merged_duplicates: merged, pruned }
}

/// Smallest pairwise Poincaré distance among the orbit points of an enumeration.
pub fn orbit_separation(enumeration: &DeckEnumeration) -> f64 {
    let pts: Vec<Complex64> = enumeration.elements.iter().map(|e| e.orbit_point()).collect();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if let Ok(d) = poincare_distance(pts[i], pts[j]) {
                best = best.min(d);
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub word_cap: usize,
    pub n_max: u32,
    pub relation_residual: f64,
    pub inradius_cosh: f64,
    pub geometry: OctagonGeometry,
    /// #E_n for n = 0..=n_max.
    pub counts: Vec<usize>,
    pub normalized_counts: Vec<f64>,
    /// max / min of #E_n/2^n over 3 ≤ n ≤ n_max (infinite when an annulus is empty).
    pub count_band: f64,
    pub merged_duplicates: usize,
    pub orbit_separation: f64,
}

pub fn group_report(word_cap: usize, n_max: u32) -> GroupReport {
    let g = octagon_generators();
    let e = enumerate_deck(&g, word_cap, AnnulusIndex(n_max));
    let normalized = e.normalized_counts();
    let band: Vec<f64> = normalized.iter().skip(3).cloned().collect();
    let hi = band.iter().cloned().fold(0.0, f64::max);
    let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
    let geometry = g.geometry();
    GroupReport {
        word_cap,
        n_max,
        relation_residual: g.relation_residual(),
        inradius_cosh: geometry.inradius.cosh(),
        geometry,
        counts: e.counts(),
        normalized_counts: normalized,
        count_band: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        merged_duplicates: e.merged_duplicates,
        orbit_separation: orbit_separation(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn word_parsing_and_reduction() {
        let w: Word = "aBcDAbCd".parse().unwrap();
        assert_eq!(w.to_string(), "aBcDAbCd");
        assert_eq!(w.len(), 8);
        assert!("aA".parse::<Word>().unwrap().is_empty());
        assert!("ax".parse::<Word>().is_err());
        assert_eq!(w.concat(&w.inverse()), Word::empty());
    }

    #[test]
    fn relation_holds() {
        let g = octagon_generators();
        assert!(g.relation_residual() < 1e-10, "{}", g.relation_residual());
    }

    #[test]
    fn canonical_relation_is_cyclic_conjugate_of_relator() {
        let g = octagon_generators();
        let rel = g.canonical_relation().cyclically_reduced();
        let r = g.relator.letters();
        let found = (0..r.len()).any(|s| {
            let rot: Vec<u8> = r[s..].iter().chain(&r[..s]).copied().collect();
            rot == rel.letters()
        });
        assert!(found, "{rel}");
    }

    #[test]
    fn generators_are_hyperbolic() {
        let g = octagon_generators();
        for t in g.side_pairings.iter().chain(g.canonical_generators().iter()) {
            assert!(t.abs_trace() > 2.0 + 1e-6);
        }
        let geo = g.geometry();
        assert_relative_eq!(geo.translation_length, 2.0 * (1.0 + SQRT_2).acosh(), epsilon = 1e-12);
        assert_relative_eq!(geo.orbit_separation, (1.0 + SQRT_2).acosh(), epsilon = 1e-12);
    }

    #[test]
    fn side_pairing_maps_opposite_vertices() {
        let g = octagon_generators();
        let v = g.vertices();
        // g_0 carries side 4 (vertices 3, 4) onto side 0 (vertices 0 and 7)
        let img: Vec<Complex64> = [v[3], v[4]].iter().map(|&z| g.side_pairings[0].apply(z)).collect();
        let targets = [v[0], v[7]];
        for p in img {
            assert!(targets.iter().any(|t| (t - p).norm() < 1e-12), "{p}");
        }
    }

    #[test]
    fn short_enumeration() {
        let g = octagon_generators();
        let e0 = enumerate_deck(&g, 0, AnnulusIndex(8));
        assert_eq!(e0.elements.len(), 1);
        assert_eq!(e0.elements[0].annulus, AnnulusIndex(0));
        let e1 = enumerate_deck(&g, 1, AnnulusIndex(8));
        assert_eq!(e1.elements.len(), 9);
        let r0 = e1.elements[1].orbit_point().norm();
        for e in &e1.elements[1..] {
            assert_relative_eq!(e.orbit_point().norm(), r0, epsilon = 1e-14);
            assert_eq!(e.word.len(), 1);
        }
    }

    #[test]
    fn enumeration_is_deterministic_and_ordered() {
        let g = octagon_generators();
        let a = enumerate_deck(&g, 6, AnnulusIndex(6));
        let b = enumerate_deck(&g, 6, AnnulusIndex(6));
        assert_eq!(a, b);
        for w in a.elements.windows(2) {
            let (x, y) = (&w[0].word, &w[1].word);
            assert!((x.len(), x.letters()) < (y.len(), y.letters()));
        }
        for e in &a.elements {
            assert!((g.evaluate(&e.word).distance(&e.transform)) < 1e-10);
        }
    }

    /// Interior angle of the regular octagon whose sides are at Euclidean distance `m` from 0,
    /// from the intersection of two neighbouring side circles.
    fn euclidean_vertex_angle(m: f64) -> f64 {
        let c = (1.0 + m * m) / (2.0 * m);
        let r = (c * c - 1.0).sqrt();
        let c0 = Complex64::new(c, 0.0);
        let c1 = Complex64::from_polar(c, FRAC_PI_4);
        // vertex on the bisector at angle π/8, inside the disk
        let dir = Complex64::from_polar(1.0, FRAC_PI_8);
        let proj = c0.re * dir.re + c0.im * dir.im;
        let t = proj - (proj * proj - (c * c - r * r)).sqrt();
        let v = dir * t;
        let (n0, n1) = (v - c0, v - c1);
        let cos = (n0.re * n1.re + n0.im * n1.im) / (n0.norm() * n1.norm());
        std::f64::consts::PI - cos.acos()
    }

    #[test]
    fn inradius_from_euclidean_construction() {
        let (mut lo, mut hi) = (0.05, 0.95);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if euclidean_vertex_angle(mid) > FRAC_PI_4 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rho = 2.0 * (0.5 * (lo + hi)).atanh();
        assert_relative_eq!(rho.cosh(), octagon_inradius_cosh(), epsilon = 1e-9);
        let g = octagon_generators();
        let v = g.vertices()[0];
        assert_relative_eq!(2.0 * v.norm().atanh(), g.geometry().circumradius, epsilon = 1e-12);
    }

    #[test]
    fn annulus_counts_up_to_nine() {
        let g = octagon_generators();
        let e = enumerate_deck(&g, 14, AnnulusIndex(9));
        assert_eq!(e.counts(), vec![1, 0, 0, 8, 0, 32, 24, 40, 160, 304]);
        let sep = orbit_separation(&e);
        assert_relative_eq!(sep, octagon_inradius_cosh().acosh(), epsilon = 1e-9);
    }
}
