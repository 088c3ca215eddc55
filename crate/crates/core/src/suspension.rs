//! The suspension (𝔻×T)/Γ̃ of a transversal circle action of the surface group.

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disk::{psi, MobiusTransform};
use crate::error::{Error, Result};
use crate::fuchsian::{DeckElement, SurfaceGroup, Word};

/// Default rotation angles for (a₁, b₁, a₂, b₂).
pub const DEFAULT_ROTATION_ANGLES: [f64; 4] = [1.0, SQRT_2, 1.732_050_807_568_877_2, 2.236_067_977_499_79];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransversalAction {
    /// Rigid rotations; `angles` are attached to the canonical generators (a₁, b₁, a₂, b₂).
    Rotation {
        #[serde(default = "default_angles")]
        angles: [f64; 4],
    },
    /// Each deck transformation acts on T through its own boundary values.
    Boundary,
}

fn default_angles() -> [f64; 4] {
    DEFAULT_ROTATION_ANGLES
}

impl Default for TransversalAction {
    fn default() -> Self {
        Self::Rotation { angles: DEFAULT_ROTATION_ANGLES }
    }
}

impl TransversalAction {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rotation { .. } => "rotation",
            Self::Boundary => "boundary",
        }
    }
}

/// Reduces an angle to [0, 2π).
#[inline]
pub fn wrap_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Arc-length distance d₀ on the unit circle.
#[inline]
pub fn arc_distance(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspensionModel {
    pub group: SurfaceGroup,
    pub action: TransversalAction,
    /// Rotation angle of each side-pairing letter a, b, c, d (zero for the boundary action).
    letter_angles: [f64; 4],
}

impl SuspensionModel {
    pub fn new(group: SurfaceGroup, action: TransversalAction) -> Self {
        let letter_angles = match &action {
            // a₁ = a, b₁ = B, a₂ = Cd, b₂ = aBc
            TransversalAction::Rotation { angles: [ta1, tb1, ta2, tb2] } => {
                let a = *ta1;
                let b = -tb1;
                let c = tb2 - ta1 - tb1;
                let d = ta2 + c;
                [a, b, c, d]
            }
            TransversalAction::Boundary => [0.0; 4],
        };
        Self { group, action, letter_angles }
    }

    fn letter_angle(&self, l: u8) -> f64 {
        let th = self.letter_angles[(l % 4) as usize];
        if l < 4 {
            th
        } else {
            -th
        }
    }

    /// Total rotation of a word under the rotation action.
    pub fn word_angle(&self, word: &Word) -> f64 {
        word.letters().iter().map(|&l| self.letter_angle(l)).sum()
    }

    /// ϕ(w)(t) for a word.
    pub fn act_word(&self, word: &Word, t: f64) -> f64 {
        match self.action {
            TransversalAction::Rotation { .. } => wrap_angle(t + self.word_angle(word)),
            TransversalAction::Boundary => {
                boundary_image(&self.group.evaluate(word), t)
            }
        }
    }

    /// ϕ(w)(t).
    pub fn act(&self, w: &DeckElement, t: f64) -> f64 {
        match self.action {
            TransversalAction::Rotation { .. } => wrap_angle(t + self.word_angle(&w.word)),
            TransversalAction::Boundary => boundary_image(&w.transform, t),
        }
    }

    /// ϕ(w)⁻¹(t).
    pub fn act_inverse(&self, w: &DeckElement, t: f64) -> f64 {
        match self.action {
            TransversalAction::Rotation { .. } => wrap_angle(t - self.word_angle(&w.word)),
            TransversalAction::Boundary => boundary_image(&w.transform.inverse(), t),
        }
    }

    /// d/dt ϕ(w)⁻¹(t).
    pub fn act_inverse_derivative(&self, w: &DeckElement, t: f64) -> f64 {
        match self.action {
            TransversalAction::Rotation { .. } => 1.0,
            TransversalAction::Boundary => {
                w.transform.inverse().derivative(Complex64::from_polar(1.0, t)).norm()
            }
        }
    }

    /// Transversal parameter, on the plaque through t, of the point seen at the orbit point w(0).
    ///
    /// A point (w(0), t) of the chart is identified with (0, ϕ(w)⁻¹(t)).
    pub fn base_point_shift(&self, w: &DeckElement, t: f64) -> f64 {
        self.act_inverse(w, t)
    }

    /// d₀(ϕ(w)⁻¹(t₁), ϕ(w)⁻¹(t₂)) / d₀(t₁, t₂).
    pub fn lift_distortion(&self, w: &DeckElement, t1: f64, t2: f64) -> Result<f64> {
        let d = arc_distance(t1, t2);
        if d == 0.0 {
            return Err(Error::Domain("lift distortion needs distinct transversal points".into()));
        }
        Ok(arc_distance(self.act_inverse(w, t1), self.act_inverse(w, t2)) / d)
    }

    /// Exponent k of the distortion bound 2^{kn} the solver assumes for this action.
    pub fn distortion_exponent(&self) -> u32 {
        match self.action {
            TransversalAction::Rotation { .. } => 0,
            TransversalAction::Boundary => 2,
        }
    }

    /// Sup over `samples` points of d₀(ϕ(relator)(t), t).
    pub fn relation_defect(&self, samples: usize) -> f64 {
        let rel = self.group.canonical_relation();
        (0..samples)
            .map(|i| {
                let t = TAU * i as f64 / samples as f64;
                arc_distance(self.act_word(&rel, t), t)
            })
            .fold(0.0, f64::max)
    }

    /// d₀(ϕ(w₁w₂)(t), ϕ(w₁)(ϕ(w₂)(t))).
    pub fn homomorphism_defect(&self, w1: &Word, w2: &Word, t: f64) -> f64 {
        let lhs = self.act_word(&w1.concat(w2), t);
        let rhs = self.act_word(w1, self.act_word(w2, t));
        arc_distance(lhs, rhs)
    }
}

/// Argument of φ(e^{it}).
pub fn boundary_image(phi: &MobiusTransform, t: f64) -> f64 {
    wrap_angle(phi.apply(Complex64::from_polar(1.0, t)).arg())
}

/// Result of fitting the distortion exponent to samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionFit {
    pub samples: usize,
    /// Smallest integer k with ratio ≤ 2^{kn} on all samples.
    pub k: u32,
    /// Largest ratio / 2^{(n+2)} seen.
    pub worst_against_boundary_bound: f64,
    pub max_ratio: f64,
}

/// Samples random pairs (t₁, t₂) for every element with n ≥ 1 and fits k.
pub fn fit_distortion_exponent(
    model: &SuspensionModel,
    elements: &[DeckElement],
    pairs_per_element: usize,
    seed: u64,
) -> Result<DistortionFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k_needed = 0.0f64;
    let mut worst_bd = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut samples = 0;
    for w in elements.iter().filter(|w| w.annulus.0 >= 1) {
        let n = w.annulus.0 as f64;
        for _ in 0..pairs_per_element {
            let t1 = rng.gen_range(0.0..TAU);
            // mix of nearby and far pairs
            let gap = if rng.gen_bool(0.5) { rng.gen_range(1e-6..1e-2) } else { rng.gen_range(1e-2..PI) };
            let t2 = wrap_angle(t1 + gap);
            let ratio = model.lift_distortion(w, t1, t2)?;
            samples += 1;
            max_ratio = max_ratio.max(ratio);
            k_needed = k_needed.max(ratio.log2() / n);
            worst_bd = worst_bd.max(ratio / 2f64.powf(n + 2.0));
        }
    }
    Ok(DistortionFit {
        samples,
        k: (k_needed - 1e-9).max(0.0).ceil() as u32,
        worst_against_boundary_bound: worst_bd,
        max_ratio,
    })
}

/// Leaf Kobayashi density at (ζ, t) in the global 𝔻×T chart with leafwise metric scale `chart_scale`.
pub fn kobayashi_in_chart(_t: f64, zeta: Complex64, chart_scale: f64) -> Result<f64> {
    Ok((-psi(zeta)?).exp() * chart_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::AnnulusIndex;
    use crate::fuchsian::{enumerate_deck, octagon_generators};
    use approx::assert_relative_eq;

    fn models() -> [SuspensionModel; 2] {
        let g = octagon_generators();
        [
            SuspensionModel::new(g.clone(), TransversalAction::default()),
            SuspensionModel::new(g, TransversalAction::Boundary),
        ]
    }

    #[test]
    fn canonical_generators_rotate_by_configured_angles() {
        let m = &models()[0];
        for (w, th) in m.group.canonical_words.iter().zip(DEFAULT_ROTATION_ANGLES) {
            assert_relative_eq!(m.word_angle(w), th, epsilon = 1e-14);
        }
    }

    #[test]
    fn relation_acts_trivially() {
        for m in models() {
            assert!(m.relation_defect(512) < 1e-9, "{}", m.action.name());
            assert!(arc_distance(m.act_word(&m.group.relator, 0.3), 0.3) < 1e-9);
        }
    }

    #[test]
    fn identity_fixes_transversal() {
        for m in models() {
            let id = DeckElement::identity();
            assert_eq!(m.act(&id, 1.25), 1.25);
            assert_eq!(m.lift_distortion(&id, 0.1, 2.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn boundary_action_stays_on_circle() {
        let m = &models()[1];
        let a1 = m.group.canonical_generators()[0];
        let z = a1.apply(Complex64::from_polar(1.0, 0.7));
        assert_relative_eq!(z.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_distortion_is_one() {
        let m = &models()[0];
        let e = enumerate_deck(&m.group, 4, AnnulusIndex(8));
        for w in &e.elements {
            assert_relative_eq!(m.lift_distortion(w, 0.2, 1.9).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert!(m.lift_distortion(&e.elements[1], 0.5, 0.5).is_err());
    }

    #[test]
    fn boundary_distortion_fits() {
        let m = &models()[1];
        let e = enumerate_deck(&m.group, 10, AnnulusIndex(8));
        let fit = fit_distortion_exponent(m, &e.elements, 8, 3).unwrap();
        assert!(fit.worst_against_boundary_bound <= 1.0, "{fit:?}");
        assert!(fit.k <= m.distortion_exponent(), "{fit:?}");
    }

    #[test]
    fn inverse_derivative_matches_difference_quotient() {
        let m = &models()[1];
        let e = enumerate_deck(&m.group, 3, AnnulusIndex(8));
        let w = &e.elements[5];
        let (t, h) = (0.8, 1e-6);
        let fd = (m.act_inverse(w, t + h) - m.act_inverse(w, t - h)) / (2.0 * h);
        assert_relative_eq!(m.act_inverse_derivative(w, t), fd, max_relative = 1e-6);
    }

    #[test]
    fn kobayashi_density() {
        assert_eq!(kobayashi_in_chart(0.0, Complex64::new(0.0, 0.0), 1.0).unwrap(), 1.0);
        let z = Complex64::new(0.3, 0.4);
        let d0 = kobayashi_in_chart(0.0, z, 1.0).unwrap();
        for i in 0..16 {
            assert_eq!(kobayashi_in_chart(i as f64 * 0.4, z, 1.0).unwrap(), d0);
        }
        assert!(kobayashi_in_chart(0.0, Complex64::new(1.0, 0.0), 1.0).is_err());
    }
}
