use leafdbar::deck_sum::{DeckSumSolver, ProblemSpec, RhsBox};
use leafdbar::fuchsian::Word;
use num_complex::Complex64;

fn spec(boxes: Vec<RhsBox>) -> ProblemSpec {
    ProblemSpec { boxes, h: 1.0 / 64.0, degree: 32, ..ProblemSpec::default() }
}

fn boxes() -> (RhsBox, RhsBox) {
    let a = RhsBox { radius: 0.15, ..RhsBox::default() };
    let b = RhsBox {
        center: Complex64::new(0.0, 0.3),
        radius: 0.1,
        amplitude: -0.7,
        modulation: 0.3,
        phase: 1.0,
    };
    (a, b)
}

#[test]
fn solution_is_linear_in_the_boxes() {
    let (a, b) = boxes();
    let t = 0.8;
    let both = DeckSumSolver::new(spec(vec![a.clone(), b.clone()])).unwrap().solve_leaf(t).unwrap();
    let ua = DeckSumSolver::new(spec(vec![a])).unwrap().solve_leaf(t).unwrap();
    let ub = DeckSumSolver::new(spec(vec![b])).unwrap().solve_leaf(t).unwrap();
    let scale = both.field.samples.iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(scale > 0.0);
    for ((u, x), y) in both.field.samples.iter().zip(&ua.field.samples).zip(&ub.field.samples) {
        assert!((u - x - y).norm() <= 1e-12 * scale);
    }
}

#[test]
fn two_box_leaf_solves_and_is_equivariant() {
    let (a, b) = boxes();
    let solver = DeckSumSolver::new(spec(vec![a, b])).unwrap();
    let leaf = solver.solve_leaf(2.0).unwrap();
    assert!(leaf.residual < 0.05, "{}", leaf.residual);
    assert!(leaf.fitted_ratio < 1.0, "{}", leaf.fitted_ratio);

    let w: Word = "a".parse().unwrap();
    let e = solver.enumeration.find(&w).unwrap().clone();
    let coarse = solver.equivariance_check(2.0, &e, 4).unwrap();
    let fine = solver.equivariance_check(2.0, &e, 8).unwrap();
    assert!(fine < coarse, "{fine} vs {coarse}");
    for e in solver.enumeration.elements.iter().take(40) {
        assert!(solver.well_definedness_defect(2.0, e) < 1e-12);
    }
}
